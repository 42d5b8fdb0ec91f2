"""
Enumerations shared between the configuration schemas, the compiler and the
simulator. Values are the lowercase / uppercase strings used in config files.
"""
import enum


class Axis(str, enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


class RunMode(str, enum.Enum):
    profile = "profile"
    compile = "compile"
    budget = "budget"
    simulate = "simulate"
    sweep = "sweep"


class WindowMode(str, enum.Enum):
    # coherent pair propagator computed once, reused for every pair
    propagator = "propagator"
    # full master equation integrated inside every pulse window
    lindblad = "lindblad"

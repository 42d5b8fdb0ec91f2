"""
Wigner 3j symbols and Clebsch-Gordan coefficients in closed (Racah) form.

Angular momenta are passed as floats holding integers or half-integers; they
are doubled internally so that every factorial argument is an exact integer.
"""
from math import factorial, sqrt


def _twice(value: float) -> int:
    doubled = round(2 * value)
    if abs(doubled - 2 * value) > 1e-9:
        raise ValueError(f"{value} is not an integer or half-integer")
    return doubled


def _fact(twice_value: int) -> int:
    # factorial of (twice_value / 2); callers guarantee the argument is even
    return factorial(twice_value // 2)


def _triangle(a: int, b: int, c: int) -> bool:
    return abs(a - b) <= c <= a + b and (a + b + c) % 2 == 0


def wigner_3j(j1: float, j2: float, j3: float, m1: float, m2: float, m3: float) -> float:
    J1, J2, J3 = _twice(j1), _twice(j2), _twice(j3)
    M1, M2, M3 = _twice(m1), _twice(m2), _twice(m3)

    if M1 + M2 + M3 != 0 or not _triangle(J1, J2, J3):
        return 0.0
    for J, M in ((J1, M1), (J2, M2), (J3, M3)):
        if abs(M) > J or (J + M) % 2:
            return 0.0

    delta = (
        _fact(J1 + J2 - J3) * _fact(J1 - J2 + J3) * _fact(-J1 + J2 + J3)
        / _fact(J1 + J2 + J3 + 2)
    )
    norm = (
        _fact(J1 + M1) * _fact(J1 - M1) * _fact(J2 + M2)
        * _fact(J2 - M2) * _fact(J3 + M3) * _fact(J3 - M3)
    )

    # k runs over integers (stored doubled) keeping every factorial argument >= 0
    k_min = max(0, J2 - J3 - M1, J1 - J3 + M2)
    k_max = min(J1 + J2 - J3, J1 - M1, J2 + M2)
    total = 0.0
    for K in range(k_min, k_max + 1, 2):
        denom = (
            _fact(K) * _fact(J3 - J2 + K + M1) * _fact(J3 - J1 + K - M2)
            * _fact(J1 + J2 - J3 - K) * _fact(J1 - K - M1) * _fact(J2 - K + M2)
        )
        total += (-1) ** (K // 2) / denom

    phase = (-1) ** (((J1 - J2 - M3) // 2) % 2)
    return phase * sqrt(delta * norm) * total


def clebsch_gordan(j1: float, m1: float, j2: float, m2: float, j: float, m: float) -> float:
    """<j1 m1; j2 m2 | j m>."""
    phase = (-1) ** ((_twice(j1) - _twice(j2) + _twice(m)) // 2 % 2)
    return phase * sqrt(2 * j + 1) * wigner_3j(j1, j2, j, m1, m2, -m)

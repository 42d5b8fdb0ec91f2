"""
Electronic structure of the ion: fine-structure manifolds, their Zeeman
sublevels, and the electric-dipole matrix elements generated from tabulated
decay rates.

Conventions used everywhere downstream:

    energies    angular frequencies in rad/s, measured from the ground manifold
    linewidths  total radiative widths in 1/s (rad/s with hbar = 1)
    dipoles     <lower|d_j|upper> in units of e*a0, j = x, y, z

The scheme is immutable once loaded, so the same object can be handed to
several worker threads or processes.
"""
import logging
import re
from collections import deque
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .constants import C, EA0, EPS0, HBAR, thz_to_rad, wavenumber_to_rad
from .errors import ConfigError, LevelSchemeError
from .wigner import wigner_3j

logger = logging.getLogger(__name__)

DEFAULT_SCHEME_PATH = Path(__file__).resolve().parent / "data" / "ca40.levels"

SUM_RULE_TOLERANCE = 0.01

_TERM = re.compile(r"^(\d*)([SPDFG])(\d+(?:/2)?)$")
_ORBITAL = {"S": 0, "P": 1, "D": 2, "F": 3, "G": 4}
_UNITS = {"THz": thz_to_rad, "cm-1": wavenumber_to_rad}

# spontaneous emission: gamma = omega^3 |d|^2 / (3 pi eps0 hbar c^3)
_EMISSION = 3.0 * np.pi * EPS0 * HBAR * C**3


def parse_half(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        if int(den) != 2:
            raise ValueError(f"{text!r} is not a half-integer")
        return int(num) / 2.0
    return float(text)


def format_half(value: float, signed: bool = False) -> str:
    twice = int(round(2 * value))
    sign = ""
    if signed:
        sign = "-" if twice < 0 else "+"
        twice = abs(twice)
    elif twice < 0:
        sign, twice = "-", -twice
    body = f"{twice}/2" if twice % 2 else f"{twice // 2}"
    return sign + body


def sublevel_label(term: str, mJ: float) -> str:
    return f"{term}({format_half(mJ, signed=True)})"


def term_orbital(term: str) -> int:
    match = _TERM.match(term)
    if match is None:
        raise LevelSchemeError(f"cannot parse term symbol {term!r}", [term])
    return _ORBITAL[match.group(2)]


# ------------------ Domain Types ------------------

class Level(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    term: str
    term_energy: float
    energy: float
    J: float
    mJ: float
    linewidth: float = 0.0

    @model_validator(mode="after")
    def _check_quantum_numbers(self):
        twice_j, twice_m = 2 * self.J, 2 * self.mJ
        if abs(twice_j - round(twice_j)) > 1e-12 or abs(twice_m - round(twice_m)) > 1e-12:
            raise ValueError(f"{self.label}: J and mJ must be half-integers")
        if abs(self.mJ) > self.J or (round(twice_j) - round(twice_m)) % 2:
            raise ValueError(f"{self.label}: |mJ| <= J with matching parity required")
        if self.linewidth < 0:
            raise ValueError(f"{self.label}: negative linewidth")
        return self

    @property
    def parity(self) -> int:
        return (-1) ** term_orbital(self.term)


class DipoleCoupling(BaseModel):
    """<lower|d_j|upper> for j = x, y, z in e*a0; the reverse element is the conjugate."""

    model_config = ConfigDict(frozen=True)

    upper: str
    lower: str
    vector: Tuple[complex, complex, complex]


class DecayLine(BaseModel):
    model_config = ConfigDict(frozen=True)

    upper: str
    lower: str
    rate: float


class LevelScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    species: str
    mass_amu: float
    zeeman_hz: float
    levels: Tuple[Level, ...]
    couplings: Tuple[DipoleCoupling, ...]
    lines: Tuple[DecayLine, ...] = ()
    # False for sub-schemes cut out of a full scheme; sum rules are skipped
    complete: bool = True

    @model_validator(mode="after")
    def _check_scheme(self):
        labels = [level.label for level in self.levels]
        if len(set(labels)) != len(labels):
            raise LevelSchemeError("duplicate level labels", sorted({l for l in labels if labels.count(l) > 1}))

        if self.complete and self.levels and min(level.term_energy for level in self.levels) != 0.0:
            raise LevelSchemeError("ground manifold energy must be exactly 0")

        by_label = {level.label: level for level in self.levels}
        for coupling in self.couplings:
            missing = [l for l in (coupling.upper, coupling.lower) if l not in by_label]
            if missing:
                raise LevelSchemeError("coupling references unknown level", missing)
            upper, lower = by_label[coupling.upper], by_label[coupling.lower]
            if upper.parity == lower.parity:
                raise LevelSchemeError(
                    "parity violation: dipole coupling between equal-parity levels",
                    [upper.label, lower.label],
                )

        if self.complete:
            self._check_sum_rules()
        return self

    def _check_sum_rules(self) -> None:
        terms = {}
        for level in self.levels:
            terms.setdefault(level.term, level.linewidth)
        for term, width in terms.items():
            if width <= 0:
                continue
            branches = sum(line.rate for line in self.lines if line.upper == term)
            if abs(branches - width) > SUM_RULE_TOLERANCE * width:
                raise LevelSchemeError(
                    f"branch rates sum to {branches:.6g} 1/s but stored linewidth is {width:.6g} 1/s",
                    [term],
                )

        rates = self.partial_decay_rates()
        for i, level in enumerate(self.levels):
            if level.linewidth <= 0:
                continue
            total = rates[i].sum()
            if abs(total - level.linewidth) > SUM_RULE_TOLERANCE * level.linewidth:
                raise LevelSchemeError(
                    f"dipole sum rule: reconstructed width {total:.6g} 1/s vs {level.linewidth:.6g} 1/s",
                    [level.label],
                )

    # ------------------ Lookups ------------------

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(level.label for level in self.levels)

    @property
    def size(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        for i, level in enumerate(self.levels):
            if level.label == label:
                return i
        raise LevelSchemeError("unknown level", [label])

    def level(self, label: str) -> Level:
        return self.levels[self.index(label)]

    def energies(self) -> np.ndarray:
        return np.array([level.energy for level in self.levels])

    def linewidths(self) -> np.ndarray:
        return np.array([level.linewidth for level in self.levels])

    # ------------------ Operators ------------------

    def dipole_matrices(self) -> np.ndarray:
        """Cartesian dipole operator, shape (3, n, n), Hermitian per axis, e*a0."""
        n = self.size
        d = np.zeros((3, n, n), dtype=complex)
        index = {label: i for i, label in enumerate(self.labels)}
        for coupling in self.couplings:
            lo, up = index[coupling.lower], index[coupling.upper]
            vec = np.asarray(coupling.vector, dtype=complex)
            d[:, lo, up] = vec
            d[:, up, lo] = vec.conj()
        return d

    def coupling_matrix(self, polarization: Sequence[float]) -> np.ndarray:
        """u . d over the electronic levels."""
        return np.tensordot(np.asarray(polarization, dtype=float), self.dipole_matrices(), axes=1)

    def partial_decay_rates(self) -> np.ndarray:
        """rates[u, l] of spontaneous emission u -> l in 1/s, from the stored dipoles."""
        n = self.size
        rates = np.zeros((n, n))
        energies = self.energies()
        index = {label: i for i, label in enumerate(self.labels)}
        for coupling in self.couplings:
            up, lo = index[coupling.upper], index[coupling.lower]
            omega = energies[up] - energies[lo]
            strength = float(np.sum(np.abs(np.asarray(coupling.vector)) ** 2)) * EA0**2
            rates[up, lo] += omega**3 * strength / _EMISSION
        return rates

    def decay_channels(self) -> Tuple[DecayLine, ...]:
        """Sublevel-resolved spontaneous emission channels with nonzero rate."""
        rates = self.partial_decay_rates()
        labels = self.labels
        return tuple(
            DecayLine(upper=labels[u], lower=labels[l], rate=float(rates[u, l]))
            for u, l in zip(*np.nonzero(rates > 0))
        )

    # ------------------ Sub-schemes ------------------

    def restricted(self, labels: Iterable[str]) -> "LevelScheme":
        keep = set(labels)
        unknown = keep - set(self.labels)
        if unknown:
            raise LevelSchemeError("cannot restrict to unknown levels", sorted(unknown))
        return LevelScheme(
            species=self.species,
            mass_amu=self.mass_amu,
            zeeman_hz=self.zeeman_hz,
            levels=tuple(level for level in self.levels if level.label in keep),
            couplings=tuple(c for c in self.couplings if c.upper in keep and c.lower in keep),
            lines=self.lines,
            complete=False,
        )

    def active_subspace(
        self, seeds: Iterable[str], polarizations: Sequence[Sequence[float]]
    ) -> Tuple[str, ...]:
        """
        Levels reachable from the seeds through the field couplings, plus every
        level those can decay into. Decay targets are not expanded further.
        """
        d = self.dipole_matrices()
        adjacency = np.zeros((self.size, self.size), dtype=bool)
        for u in polarizations:
            adjacency |= np.abs(np.tensordot(np.asarray(u, dtype=float), d, axes=1)) > 0

        visited = set()
        queue = deque(self.index(label) for label in seeds)
        while queue:
            i = queue.popleft()
            if i in visited:
                continue
            visited.add(i)
            queue.extend(int(j) for j in np.nonzero(adjacency[i])[0] if j not in visited)

        rates = self.partial_decay_rates()
        targets = {int(j) for i in visited for j in np.nonzero(rates[i] > 0)[0]}
        keep = visited | targets
        return tuple(label for i, label in enumerate(self.labels) if i in keep)


# ------------------ Dipoles from decay rates ------------------

def dipole_from_decay_rate(gamma: float, omega_transition: float, J_upper: float, J_lower: float) -> float:
    """
    Reduced matrix element |<J_lower||d||J_upper>| in e*a0 from the Einstein A
    coefficient of the line:

        |<J_l||d||J_u>|^2 = gamma (2 J_u + 1) 3 pi eps0 hbar c^3 / omega^3

    Zeeman components follow from
    <J_l m_l|d_q|J_u m_u> = (-1)^(J_l - m_l) (J_l 1 J_u; -m_l q m_u) <J_l||d||J_u>.
    """
    if gamma <= 0 or omega_transition <= 0:
        raise ConfigError(
            f"decay rate and transition frequency must be positive (gamma={gamma}, omega={omega_transition})"
        )
    if not abs(J_upper - J_lower) <= 1 <= J_upper + J_lower:
        raise ConfigError(f"J = {J_upper} -> {J_lower} is not an electric-dipole line")
    strength = gamma * (2 * J_upper + 1) * _EMISSION / omega_transition**3
    return float(np.sqrt(strength) / EA0)


def spherical_to_cartesian(q: int, amplitude: float) -> Tuple[complex, complex, complex]:
    """Matrix element of d_q -> matrix elements of (d_x, d_y, d_z)."""
    d_minus = amplitude if q == -1 else 0.0
    d_plus = amplitude if q == 1 else 0.0
    d_zero = amplitude if q == 0 else 0.0
    root = np.sqrt(2.0)
    return (
        complex((d_minus - d_plus) / root),
        complex(1j * (d_minus + d_plus) / root),
        complex(d_zero),
    )


def _zeeman_couplings(upper: dict, lower: dict, rate: float) -> List[DipoleCoupling]:
    omega = upper["energy"] - lower["energy"]
    reduced = dipole_from_decay_rate(rate, omega, upper["J"], lower["J"])
    J_u, J_l = upper["J"], lower["J"]

    couplings = []
    for m_u in _projections(J_u):
        for m_l in _projections(J_l):
            q = m_l - m_u
            if abs(q) > 1:
                continue
            sign = (-1) ** int(round(J_l - m_l))
            amplitude = sign * wigner_3j(J_l, 1, J_u, -m_l, q, m_u) * reduced
            if amplitude == 0.0:
                continue
            couplings.append(
                DipoleCoupling(
                    upper=sublevel_label(upper["term"], m_u),
                    lower=sublevel_label(lower["term"], m_l),
                    vector=spherical_to_cartesian(int(round(q)), amplitude),
                )
            )
    return couplings


def _projections(J: float) -> List[float]:
    twice = int(round(2 * J))
    return [m / 2.0 for m in range(-twice, twice + 1, 2)]


# ------------------ File loading ------------------

def _parse_scheme_text(text: str, source: str) -> dict:
    parsed: Dict[str, object] = {"species": None, "mass_amu": None, "zeeman_mhz": None}
    manifolds: List[dict] = []
    lines: List[DecayLine] = []
    section = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        key = fields[0].upper()
        where = f"{source}:{lineno}"

        try:
            if key in ("LEVELS", "LINES") and len(fields) == 1:
                section = key
            elif key == "SPECIES" and len(fields) == 2:
                parsed["species"] = fields[1]
            elif key == "MASS_AMU" and len(fields) == 2:
                parsed["mass_amu"] = float(fields[1])
            elif key == "ZEEMAN_MHZ" and len(fields) == 2:
                parsed["zeeman_mhz"] = float(fields[1])
            elif section == "LEVELS":
                if len(fields) != 5:
                    raise LevelSchemeError(f"{where}: expected 'term energy unit J linewidth'")
                term, energy, unit, J, width = fields
                term_orbital(term)
                if unit not in _UNITS:
                    raise LevelSchemeError(f"{where}: unknown unit tag {unit!r}", [term])
                manifolds.append(
                    {
                        "term": term,
                        "energy": _UNITS[unit](float(energy)),
                        "J": parse_half(J),
                        "linewidth": float(width),
                    }
                )
            elif section == "LINES":
                if len(fields) != 3:
                    raise LevelSchemeError(f"{where}: expected 'upper lower rate'")
                lines.append(DecayLine(upper=fields[0], lower=fields[1], rate=float(fields[2])))
            else:
                raise LevelSchemeError(f"{where}: unexpected line {line!r}")
        except ValueError as exc:
            raise LevelSchemeError(f"{where}: {exc}") from exc

    if parsed["species"] is None or parsed["mass_amu"] is None:
        raise LevelSchemeError(f"{source}: SPECIES and MASS_AMU are required")
    if not manifolds:
        raise LevelSchemeError(f"{source}: no LEVELS")
    parsed["manifolds"] = manifolds
    parsed["lines"] = lines
    return parsed


def build_level_scheme(parsed: dict, zeeman_mhz: Optional[float] = None) -> LevelScheme:
    if zeeman_mhz is None:
        zeeman_mhz = parsed["zeeman_mhz"] if parsed["zeeman_mhz"] is not None else 0.0
    zeeman_hz = float(zeeman_mhz) * 1e6

    by_term = {m["term"]: m for m in parsed["manifolds"]}
    couplings: List[DipoleCoupling] = []
    for line in parsed["lines"]:
        missing = [t for t in (line.upper, line.lower) if t not in by_term]
        if missing:
            raise LevelSchemeError("decay line references unknown manifold", missing)
        upper, lower = by_term[line.upper], by_term[line.lower]
        if term_orbital(upper["term"]) % 2 == term_orbital(lower["term"]) % 2:
            raise LevelSchemeError(
                "parity violation: dipole line between equal-parity manifolds",
                [upper["term"], lower["term"]],
            )
        if upper["energy"] <= lower["energy"]:
            raise LevelSchemeError("decay line must go downwards in energy", [upper["term"], lower["term"]])
        try:
            couplings.extend(_zeeman_couplings(upper, lower, line.rate))
        except ConfigError as exc:
            raise LevelSchemeError(exc.message, [upper["term"], lower["term"]]) from exc

    levels = []
    try:
        for manifold in parsed["manifolds"]:
            for mJ in _projections(manifold["J"]):
                levels.append(
                    Level(
                        label=sublevel_label(manifold["term"], mJ),
                        term=manifold["term"],
                        term_energy=manifold["energy"],
                        energy=manifold["energy"] + mJ * 2.0 * np.pi * zeeman_hz,
                        J=manifold["J"],
                        mJ=mJ,
                        linewidth=manifold["linewidth"],
                    )
                )
        return LevelScheme(
            species=parsed["species"],
            mass_amu=parsed["mass_amu"],
            zeeman_hz=zeeman_hz,
            levels=tuple(levels),
            couplings=tuple(couplings),
            lines=tuple(parsed["lines"]),
        )
    except ValidationError as exc:
        raise LevelSchemeError(f"invalid level data: {exc}") from exc


def load_level_scheme(path: Union[str, Path, None] = None, zeeman_mhz: Optional[float] = None) -> LevelScheme:
    """Read, expand and validate a level-scheme file (the bundled Ca-40 file by default)."""
    path = Path(path) if path is not None else DEFAULT_SCHEME_PATH
    if not path.is_file():
        raise ConfigError(f"level-scheme file not found: {path}")

    parsed = _parse_scheme_text(path.read_text(encoding="utf-8"), path.name)
    scheme = build_level_scheme(parsed, zeeman_mhz=zeeman_mhz)
    logger.info(
        "loaded %s from %s: %d sublevels, %d dipole couplings",
        scheme.species, path.name, scheme.size, len(scheme.couplings),
    )
    return scheme


def parse_level_scheme(text: str, zeeman_mhz: Optional[float] = None, source: str = "<text>") -> LevelScheme:
    return build_level_scheme(_parse_scheme_text(text, source), zeeman_mhz=zeeman_mhz)

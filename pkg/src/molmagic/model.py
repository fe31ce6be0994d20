"""Molecule parameters, field configurations and the |J, M; m1, m2> basis."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from . import units as u
from .angmom import HalfInt, projections, twice


class ParamFileError(ValueError):
    """Malformed or physically invalid molecule parameter file."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        prefix = f"{key}: " if key else ""
        super().__init__(f"{prefix}{message}{where}")


@dataclass(frozen=True)
class VibPole:
    """X(v=0, J=0) -> b(v', J'=1) transition used as a pole of the polarizability."""

    vprime: int
    omega: float  # rad/s
    gamma: float  # rad/s

    def __post_init__(self):
        if not self.omega > 0:
            raise ParamFileError("pole frequency must be positive", "pole")
        if not self.gamma > 0:
            raise ParamFileError("pole width must be positive", "pole")
        if self.gamma > 1e-3 * self.omega:
            raise ParamFileError("pole width must be much smaller than its frequency", "pole")


@dataclass(frozen=True)
class MoleculeParams:
    name: str
    I1: HalfInt
    I2: HalfInt
    Bv: float  # rad/s
    Bvp: float  # rad/s
    g_r: float
    g1: float
    g2: float
    sigma1: float
    sigma2: float
    eqQ1: float  # rad/s
    eqQ2: float  # rad/s
    d_perm: float  # C m
    alpha_bg_par: float  # J/(W/m^2)
    alpha_bg_perp: float  # J/(W/m^2)
    poles: tuple[VibPole, ...]
    gamma_f: float = u.angular(6.0, "MHz")
    bg_line_par: float | None = None  # rad/s, effective oscillator for the imaginary part
    bg_line_perp: float | None = None
    quadrupole_convention: str = "standard"
    hyperfine: bool = True

    def __post_init__(self):
        for key in ("I1", "I2"):
            if getattr(self, key).twice_value <= 0:
                raise ParamFileError("nuclear spin must be positive", key)
        for key in ("Bv", "Bvp"):
            if not getattr(self, key) > 0:
                raise ParamFileError("rotational constant must be positive", key)
        if not self.gamma_f >= 0:
            raise ParamFileError("linewidth must be non-negative", "gamma_f")
        if not self.poles:
            raise ParamFileError("at least one pole is required", "pole")
        omegas = [p.omega for p in self.poles]
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise ParamFileError("pole frequencies must be strictly increasing", "pole")
        if len({p.vprime for p in self.poles}) != len(self.poles):
            raise ParamFileError("duplicate vibrational quantum number", "pole")
        if self.quadrupole_convention not in ("standard", "literal"):
            raise ParamFileError("must be 'standard' or 'literal'", "quadrupole_convention")

    @property
    def spins(self) -> tuple[HalfInt, HalfInt]:
        return self.I1, self.I2

    @property
    def stretched(self) -> tuple[Fraction, Fraction]:
        return self.I1.value, self.I2.value

    def pole(self, vprime: int) -> VibPole:
        for p in self.poles:
            if p.vprime == vprime:
                return p
        raise KeyError(f"{self.name} has no pole v'={vprime}")

    def with_poles(self, vprimes) -> "MoleculeParams":
        """Copy restricted to the listed vibrational poles."""
        keep = tuple(self.pole(v) for v in sorted(vprimes, key=lambda v: self.pole(v).omega))
        return replace(self, poles=keep)

    def without_hyperfine(self) -> "MoleculeParams":
        return replace(self, hyperfine=False)


@dataclass(frozen=True)
class FieldConfig:
    """Lab fields in boundary units: gauss, kV/cm, W/cm^2, rad/s, radians."""

    B: float = 0.0
    E: float = 0.0
    intensity: float = 0.0
    omega_laser: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.B < 0 or self.E < 0 or self.intensity < 0:
            raise ValueError("B, E and intensity must be non-negative")
        if not -1e-12 <= self.theta <= np.pi / 2 + 1e-12:
            raise ValueError("theta must lie in [0, pi/2]")

    @classmethod
    def at_detuning(cls, pole: VibPole, detuning: float, **kwargs) -> "FieldConfig":
        """Fields with the laser at ``detuning`` (rad/s) from ``pole``."""
        return cls(omega_laser=pole.omega + detuning, **kwargs)

    def detuning(self, pole: VibPole) -> float:
        return self.omega_laser - pole.omega

    def replace(self, **kwargs) -> "FieldConfig":
        return replace(self, **kwargs)


class BasisState(NamedTuple):
    J: int
    M: int
    m1: Fraction
    m2: Fraction


@dataclass(frozen=True)
class Basis:
    """Ordered product basis |J, M; m1, m2> for J <= Jmax."""

    states: tuple[BasisState, ...]
    Jmax: int
    spins: tuple[HalfInt, HalfInt]
    J: np.ndarray = field(repr=False, compare=False)
    M: np.ndarray = field(repr=False, compare=False)
    tm1: np.ndarray = field(repr=False, compare=False)  # doubled projections
    tm2: np.ndarray = field(repr=False, compare=False)
    _index: dict = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[BasisState]:
        return iter(self.states)

    def index(self, state) -> int:
        J, M, m1, m2 = state
        return self._index[(int(J), int(M), twice(m1), twice(m2))]

    def j_slice(self, J: int) -> slice:
        idx = np.flatnonzero(self.J == J)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    @property
    def tmf(self) -> np.ndarray:
        """Doubled total projection M_F = M + m1 + m2."""
        return 2 * self.M + self.tm1 + self.tm2

    @property
    def tag(self) -> tuple:
        return (self.Jmax, self.spins)


def build_basis(params: MoleculeParams, Jmax: int) -> Basis:
    """Enumerate |J, M; m1, m2> lexicographically for J = 0..Jmax."""
    if Jmax < 0:
        raise ValueError("Jmax must be >= 0")
    states = [
        BasisState(J, M, m1, m2)
        for J in range(Jmax + 1)
        for M in range(-J, J + 1)
        for m1 in projections(params.I1)
        for m2 in projections(params.I2)
    ]
    return Basis(
        states=tuple(states),
        Jmax=Jmax,
        spins=params.spins,
        J=np.array([s.J for s in states], dtype=int),
        M=np.array([s.M for s in states], dtype=int),
        tm1=np.array([twice(s.m1) for s in states], dtype=int),
        tm2=np.array([twice(s.m2) for s in states], dtype=int),
        _index={(s.J, s.M, twice(s.m1), twice(s.m2)): i for i, s in enumerate(states)},
    )


# --- parameter files -------------------------------------------------------

REQUIRED_KEYS = (
    "name", "I1", "I2", "Bv", "Bvp", "g_r", "g1", "g2", "sigma1", "sigma2",
    "eqQ1", "eqQ2", "d_perm", "alpha_bg_par", "alpha_bg_perp", "gamma_f",
)
OPTIONAL_KEYS = ("bg_line_par", "bg_line_perp", "quadrupole_convention")

_FREQ = {**{k: ("freq", v) for k, v in u.FREQ_UNITS.items()}, "rad/s": ("angular", 1.0)}
_KIND_UNITS = {
    "freq": _FREQ,
    "dimensionless": {"": ("scale", 1.0), "ppm": ("scale", 1e-6)},
    "dipole": {"D": ("scale", u.debye), "C*m": ("scale", 1.0)},
    "polarizability": {
        "kHz/(W/cm2)": ("scale", u.POL_UNIT),
        "kHz/(W/cm^2)": ("scale", u.POL_UNIT),
        "J*m2/W": ("scale", 1.0),
    },
}
_KEY_KIND = {
    "Bv": ("freq", "GHz"), "Bvp": ("freq", "GHz"),
    "eqQ1": ("freq", "kHz"), "eqQ2": ("freq", "kHz"),
    "gamma_f": ("freq", "MHz"),
    "bg_line_par": ("freq", "THz"), "bg_line_perp": ("freq", "THz"),
    "g_r": ("dimensionless", ""), "g1": ("dimensionless", ""), "g2": ("dimensionless", ""),
    "sigma1": ("dimensionless", ""), "sigma2": ("dimensionless", ""),
    "d_perm": ("dipole", "D"),
    "alpha_bg_par": ("polarizability", "kHz/(W/cm2)"),
    "alpha_bg_perp": ("polarizability", "kHz/(W/cm2)"),
}
_VALUE_RE = re.compile(r"^\s*(?P<num>[-+0-9.eE/]+)\s*(?:\[(?P<u1>[^\]]*)\]|(?P<u2>\S+))?\s*$")


def _convert(key: str, text: str, kind: str, default_unit: str, lineno: int) -> float:
    m = _VALUE_RE.match(text)
    if not m:
        raise ParamFileError(f"cannot parse value {text!r}", key, lineno)
    unit = (m.group("u1") or m.group("u2") or default_unit).strip()
    table = _KIND_UNITS[kind]
    if unit not in table:
        raise ParamFileError(f"unknown unit {unit!r}", key, lineno)
    try:
        number = float(Fraction(m.group("num"))) if "/" in m.group("num") else float(m.group("num"))
    except (ValueError, ZeroDivisionError):
        raise ParamFileError(f"cannot parse number {m.group('num')!r}", key, lineno) from None
    how, scale = table[unit]
    if how == "freq":
        return u.TWO_PI * number * scale
    return number * scale


def _parse_pole(text: str, lineno: int) -> VibPole:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ParamFileError("expected 'vprime, frequency, width'", "pole", lineno)
    try:
        vprime = int(parts[0])
    except ValueError:
        raise ParamFileError(f"bad vibrational index {parts[0]!r}", "pole", lineno) from None
    omega = _convert("pole", parts[1], "freq", "THz", lineno)
    gamma = _convert("pole", parts[2], "freq", "kHz", lineno)
    return VibPole(vprime, omega, gamma)


def parse_molecule(text: str) -> MoleculeParams:
    values: dict[str, object] = {}
    poles: list[VibPole] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamFileError(f"expected 'key = value', got {raw.strip()!r}", None, lineno)
        key, _, rhs = (s.strip() for s in line.partition("="))
        if key == "pole":
            poles.append(_parse_pole(rhs, lineno))
            continue
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ParamFileError("unknown key", key, lineno)
        if key in values:
            raise ParamFileError("duplicate key", key, lineno)
        if key in ("name", "quadrupole_convention"):
            values[key] = rhs
        elif key in ("I1", "I2"):
            try:
                values[key] = HalfInt.of(Fraction(rhs))
            except ValueError:
                raise ParamFileError(f"bad spin {rhs!r}", key, lineno) from None
        else:
            kind, default = _KEY_KIND[key]
            values[key] = _convert(key, rhs, kind, default, lineno)
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ParamFileError("missing required key", key)
    if not poles:
        raise ParamFileError("missing required key", "pole")
    poles.sort(key=lambda p: p.omega)
    return MoleculeParams(poles=tuple(poles), **values)


def load_molecule(path) -> MoleculeParams:
    """Read and validate a ``key = value [unit]`` molecule parameter file."""
    path = resolve_molecule_path(path)
    return parse_molecule(Path(path).read_text())


def dump_molecule(params: MoleculeParams) -> str:
    """Serialise in internal SI units so that reloading is bit-for-bit exact."""
    si_unit = {"freq": "rad/s", "dimensionless": "", "dipole": "C*m", "polarizability": "J*m2/W"}
    lines = [f"name = {params.name}"]
    for f in fields(params):
        key = f.name
        val = getattr(params, key)
        if key in ("name", "poles", "hyperfine") or val is None:
            continue
        if key in ("I1", "I2"):
            lines.append(f"{key} = {val.value}")
        elif key == "quadrupole_convention":
            lines.append(f"{key} = {val}")
        else:
            unit = si_unit[_KEY_KIND[key][0]]
            lines.append(f"{key} = {val!r} [{unit}]" if unit else f"{key} = {val!r}")
    for p in params.poles:
        lines.append(f"pole = {p.vprime}, {p.omega!r} [rad/s], {p.gamma!r} [rad/s]")
    return "\n".join(lines) + "\n"


MOLECULE_DIR_ENV = "MOLMAGIC_MOLECULE_DIR"


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("molmagic") / "data" / name))


def resolve_molecule_path(path) -> Path:
    """Resolve a molecule file: as given, then $MOLMAGIC_MOLECULE_DIR, then bundled data."""
    p = Path(path)
    if p.exists():
        return p
    env = os.environ.get(MOLECULE_DIR_ENV)
    if env and (Path(env) / p).exists():
        return Path(env) / p
    if bundled_path(p.name).exists():
        return bundled_path(p.name)
    raise FileNotFoundError(f"molecule file {path!s} not found")


def rbcs() -> MoleculeParams:
    return load_molecule(bundled_path("rbcs.params"))


def narb() -> MoleculeParams:
    return load_molecule(bundled_path("narb.params"))

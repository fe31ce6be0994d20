"""Closed-form polarizabilities of M=0 states and the magic-window criteria.

All detunings and widths are angular frequencies (rad/s); polarizabilities
are returned in h kHz/(W/cm^2) unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, pi

import numpy as np

from . import units as u
from .model import MoleculeParams, VibPole


class PoleSingularityError(ZeroDivisionError):
    pass


class DegenerateBackgroundError(ValueError):
    pass


class MissingNeighborError(LookupError):
    pass


@dataclass(frozen=True)
class AngularFactors:
    A: float
    B: float
    J: int
    theta: float


@dataclass(frozen=True)
class BranchPoles:
    """Pole offsets: the two branches diverge at detuning -L and -R."""

    L: float
    R: float
    J: int


def angular_factors(J: int, theta: float, convention: str = "exact") -> AngularFactors:
    """Weights of the J' = J-1 (A) and J' = J+1 (B) branches for |J, M=0>.

    ``exact`` is the squared dipole matrix element summed over the excited
    level; ``printed`` keeps the printed closed form for A, which coincides with
    ``exact`` only for J <= 1 or theta = 0.
    """
    if J < 0:
        raise ValueError("J must be non-negative")
    c2 = cos(theta) ** 2
    B = ((J + 2) * (J + 1) + J * (J + 1) * c2) / (2 * (2 * J + 3) * (2 * J + 1))
    if J == 0:
        A = 0.0
    elif convention == "exact":
        A = (J * (J - 1) + J * (J + 1) * c2) / (2 * (2 * J + 1) * (2 * J - 1))
    elif convention == "printed":
        A = ((J + 1) * (J - 1) + (J * J + 1) * c2) / (2 * (2 * J + 1) * (2 * J - 1))
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return AngularFactors(A, B, J, theta)


def branch_poles(J: int, Bv: float, Bvp: float) -> BranchPoles:
    L = J * (J + 1) * Bv - (J * (J - 1) - 2) * Bvp
    R = J * (J + 1) * Bv - ((J + 1) * (J + 2) - 2) * Bvp
    return BranchPoles(L, R, J)


def prefactor(pole: VibPole) -> float:
    """3 pi c^2 Gamma / (2 omega^3), in m^2 (multiply by 1/detuning for J/(W/m^2))."""
    return 3.0 * pi * u.c**2 * pole.gamma / (2.0 * pole.omega**3)


def _pole_term(J, theta, detuning, params, pole, convention):
    f = angular_factors(J, theta, convention)
    bp = branch_poles(J, params.Bv, params.Bvp)
    k = prefactor(pole)
    total = 0.0
    for weight, off in ((f.A, bp.L), (f.B, bp.R)):
        if weight == 0.0:
            continue
        denom = detuning + off
        if denom == 0.0:
            raise PoleSingularityError(f"detuning sits exactly on a J={J} pole")
        total -= k * weight / denom
    return total, f


def alpha_analytic(
    J: int,
    theta: float,
    detuning: float,
    params: MoleculeParams,
    pole: VibPole,
    neighbors: bool = False,
    convention: str = "exact",
) -> float:
    """Two-branch polarizability of |J, M=0> near ``pole``.

    With ``neighbors=True`` every other pole of ``params`` is added with its
    own detuning, which is how the explicit multi-pole Hamiltonian sees the
    laser; the background constants are shared either way.
    """
    total, f = _pole_term(J, theta, detuning, params, pole, convention)
    if neighbors:
        laser = pole.omega + detuning
        for other in params.poles:
            if other.vprime != pole.vprime:
                total += _pole_term(J, theta, laser - other.omega, params, other, convention)[0]
    ab = f.A + f.B
    total += ab * params.alpha_bg_par + (1.0 - ab) * params.alpha_bg_perp
    return u.pol_to_lab(total)


def alpha_j0(detuning: float, params: MoleculeParams, pole: VibPole) -> float:
    """The J=0 two-parameter form, written out independently of the general formula."""
    k = prefactor(pole)
    val = -k / (3.0 * detuning)
    return u.pol_to_lab(val + params.alpha_bg_par / 3.0 + 2.0 * params.alpha_bg_perp / 3.0)


def alpha_j1(detuning: float, theta: float, params: MoleculeParams, pole: VibPole) -> float:
    """The J=1 form with its explicit cos^2 coefficients."""
    k = prefactor(pole)
    c2 = cos(theta) ** 2
    Bv, Bvp = params.Bv, params.Bvp
    val = -k * (
        c2 / 3.0 / (detuning + 2 * Bv + 2 * Bvp) + (3.0 + c2) / 15.0 / (detuning + 2 * Bv - 4 * Bvp)
    )
    val += (2 * c2 + 1) / 5 * params.alpha_bg_par + (4 - 2 * c2) / 5 * params.alpha_bg_perp
    return u.pol_to_lab(val)


def gamma_from_dipole(mu: float, omega: float) -> float:
    """Width (rad/s) of a transition with dipole ``mu`` (C m) at angular frequency ``omega``."""
    if mu <= 0 or omega <= 0:
        raise ValueError("dipole and frequency must be positive")
    return omega**3 * mu**2 / (3.0 * pi * u.epsilon_0 * u.hbar * u.c**3)


def dipole_from_gamma(gamma: float, omega: float) -> float:
    if gamma <= 0 or omega <= 0:
        raise ValueError("width and frequency must be positive")
    return float(np.sqrt(gamma * 3.0 * pi * u.epsilon_0 * u.hbar * u.c**3 / omega**3))


def critical_detuning(params: MoleculeParams, pole: VibPole) -> float:
    """Detuning where the common bracket of all alpha_J vanishes."""
    diff = params.alpha_bg_par - params.alpha_bg_perp
    if diff == 0.0:
        raise DegenerateBackgroundError("parallel and perpendicular backgrounds are equal")
    return prefactor(pole) / diff


@dataclass(frozen=True)
class Remainder:
    leading: float  # h kHz/(W/cm^2)
    bound: float  # bound on everything beyond the leading term


def remainder_T(J: int, theta: float, detuning: float, params: MoleculeParams, pole: VibPole,
                convention: str = "exact") -> Remainder:
    """Leading rotational correction to the common-bracket form.

    The bound is exact for the geometric tail: w off^2 / (D^2 (|D| - |off|))
    summed over branches, times the pole prefactor.
    """
    f = angular_factors(J, theta, convention)
    bp = branch_poles(J, params.Bv, params.Bvp)
    if abs(detuning) <= max(abs(bp.L) if J else 0.0, abs(bp.R)):
        raise ValueError("detuning must lie outside the rotational pole region")
    k = prefactor(pole)
    lead = k / detuning**2 * (f.A * bp.L + f.B * bp.R)
    bound = 0.0
    for w, off in ((f.A, bp.L), (f.B, bp.R)):
        bound += k * w * off**2 / (detuning**2 * (abs(detuning) - abs(off)))
    return Remainder(u.pol_to_lab(lead), u.pol_to_lab(bound))


def two_term(J: int, theta: float, detuning: float, params: MoleculeParams, pole: VibPole,
             convention: str = "exact") -> float:
    """(A + B)(-K/D + a_par - a_perp) + a_perp, without the remainder."""
    f = angular_factors(J, theta, convention)
    val = (f.A + f.B) * (-prefactor(pole) / detuning + params.alpha_bg_par - params.alpha_bg_perp)
    return u.pol_to_lab(val + params.alpha_bg_perp)


@dataclass(frozen=True)
class Criterion:
    bound: float  # rad/s
    ratio: float  # Gamma / bound
    passed: bool


def criterion_lower(params: MoleculeParams, pole: VibPole, margin: float = 5.0) -> Criterion:
    """Minimum width for the window to sit clear of the rotational poles."""
    if params.alpha_bg_perp == 0.0:
        raise DegenerateBackgroundError("perpendicular background is zero")
    diff = params.alpha_bg_par - params.alpha_bg_perp
    k_inv = 2.0 * pole.omega**3 / (3.0 * pi * u.c**2)
    bound = k_inv * diff**2 / abs(params.alpha_bg_perp) * np.hypot(params.Bv, params.Bvp)
    ratio = pole.gamma / bound
    return Criterion(float(bound), float(ratio), bool(ratio >= margin))


def neighbor(params: MoleculeParams, pole: VibPole) -> VibPole:
    """Adjacent pole on the side where the window opens (higher v' for a_par > a_perp)."""
    step = 1 if params.alpha_bg_par > params.alpha_bg_perp else -1
    try:
        return params.pole(pole.vprime + step)
    except KeyError as exc:
        raise MissingNeighborError(f"v'={pole.vprime + step} is not in the pole list") from exc


def criterion_upper(params: MoleculeParams, pole: VibPole, margin: float = 5.0) -> Criterion:
    """Maximum width for the window to stay short of the neighbouring pole."""
    other = neighbor(params, pole)
    diff = abs(params.alpha_bg_par - params.alpha_bg_perp)
    k_inv = 2.0 * pole.omega**3 / (3.0 * pi * u.c**2)
    bound = k_inv * diff * abs(other.omega - pole.omega)
    ratio = bound / pole.gamma
    return Criterion(float(bound), float(ratio), bool(ratio >= margin))

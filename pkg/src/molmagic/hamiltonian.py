"""Matrix representations of the effective ground-state Hamiltonian.

Every builder returns a dense real-symmetric ``numpy`` array of energies in
joules over a :class:`~molmagic.model.Basis`.  The light shift is modelled
by explicit vibrational poles (one rotating-wave denominator per excited
rotational level J' = J +/- 1) on top of a constant body-frame background
tensor.
"""

from __future__ import annotations

from math import sqrt

import numpy as np

from . import units as u
from .angmom import ck_element, tensor_t2_ii, twice
from .model import Basis, FieldConfig, MoleculeParams

# Branch identifiers for the two excited rotational levels reached from J.
LEFT, RIGHT = -1, +1


class ResonanceError(ValueError):
    """Laser frequency too close to an included transition."""


def build_rot(basis: Basis, params: MoleculeParams) -> np.ndarray:
    return np.diag(u.hbar * params.Bv * basis.J * (basis.J + 1.0))


def build_zeeman(basis: Basis, params: MoleculeParams, B: float) -> np.ndarray:
    """Zeeman term for a field of ``B`` gauss along z."""
    bt = B * u.GAUSS
    diag = -params.g_r * u.mu_N * basis.M * bt
    diag -= params.g1 * u.mu_N * (basis.tm1 / 2.0) * bt * (1.0 - params.sigma1)
    diag -= params.g2 * u.mu_N * (basis.tm2 / 2.0) * bt * (1.0 - params.sigma2)
    return np.diag(diag)


def quadrupole_prefactor(spin, eqQ: float, convention: str = "standard") -> float:
    """Energy prefactor multiplying ``C_2 . T_2(I, I)`` for one nucleus.

    ``standard`` is sqrt(6) eqQ / (4 I (2I-1)), which reproduces the
    first-order Casimir splittings; ``literal`` is eqQ / (I (I-1)).
    """
    i = twice(spin) / 2
    if i < 1:
        return 0.0
    if convention == "standard":
        return u.hbar * eqQ * sqrt(6.0) / (4.0 * i * (2.0 * i - 1.0))
    if convention == "literal":
        if i == 1:
            raise ValueError("literal quadrupole prefactor diverges for I = 1")
        return u.hbar * eqQ / (i * (i - 1.0))
    raise ValueError(f"unknown quadrupole convention {convention!r}")


def build_quadrupole(basis: Basis, params: MoleculeParams) -> np.ndarray:
    """Nuclear quadrupole coupling of both nuclei to the molecular axis."""
    n = len(basis)
    H = np.zeros((n, n))
    pref = [
        quadrupole_prefactor(params.I1, params.eqQ1, params.quadrupole_convention),
        quadrupole_prefactor(params.I2, params.eqQ2, params.quadrupole_convention),
    ]
    tm = (basis.tm1, basis.tm2)
    spins = params.spins
    for i, (J, M, m1, m2) in enumerate(basis.states):
        for k in (0, 1):
            if pref[k] == 0.0:
                continue
            m_k = (m1, m2)[k]
            for q in range(-2, 3):
                # <J'M'|C_{2,-q}|JM> <m'|T_{2,q}|m>, M' = M - q, m' = m + q
                t = tensor_t2_ii(spins[k], m_k + q, m_k, q)
                if t == 0.0:
                    continue
                for Jp in (J - 2, J, J + 2):
                    if Jp < 0 or Jp > basis.Jmax or abs(M - q) > Jp:
                        continue
                    ang = ck_element(Jp, M - q, 2, -q, J, M)
                    if ang == 0.0:
                        continue
                    new = [m1, m2]
                    new[k] = m_k + q
                    j = basis.index((Jp, M - q, new[0], new[1]))
                    H[j, i] += pref[k] * (-1) ** q * ang * t
    return H


def build_dc(basis: Basis, params: MoleculeParams, E: float) -> np.ndarray:
    """DC Stark coupling for ``E`` kV/cm along z."""
    n = len(basis)
    H = np.zeros((n, n))
    if E == 0.0:
        return H
    de = params.d_perm * E * u.KV_PER_CM
    for i, (J, M, m1, m2) in enumerate(basis.states):
        for Jp in (J - 1, J + 1):
            if Jp < 0 or Jp > basis.Jmax or abs(M) > Jp:
                continue
            j = basis.index((Jp, M, m1, m2))
            H[j, i] = -de * ck_element(Jp, M, 1, 0, J, M)
    return H


def polarization_components(theta: float) -> dict[int, float]:
    """Spherical components of a linear polarisation tilted by ``theta`` in the x-z plane."""
    s = np.sin(theta) / sqrt(2.0)
    return {0: float(np.cos(theta)), 1: float(-s), -1: float(s)}


def branch_offsets(J: int, Bv: float, Bvp: float) -> dict[int, float]:
    """Detuning offsets (rad/s) of the J' = J-1 and J' = J+1 excited levels."""
    out = {RIGHT: J * (J + 1) * Bv - ((J + 1) * (J + 2) - 2) * Bvp}
    if J > 0:
        out[LEFT] = J * (J + 1) * Bv - (J * (J - 1) - 2) * Bvp
    return out


def branch_weights(J: int, theta: float) -> dict[int, np.ndarray]:
    """Projected products ``P_J (n.e) P_J' (n.e) P_J`` as (2J+1)-square matrices in M."""
    eps = polarization_components(theta)
    Ms = range(-J, J + 1)
    out = {}
    for branch in (LEFT, RIGHT):
        Jp = J + branch
        if Jp < 0:
            continue
        D = np.zeros((2 * Jp + 1, 2 * J + 1))
        for a, Mpp in enumerate(range(-Jp, Jp + 1)):
            for b, M in enumerate(Ms):
                q = Mpp - M
                if q in eps:
                    D[a, b] = eps[q] * ck_element(Jp, Mpp, 1, q, J, M)
        out[branch] = D.T @ D
    return out


def strength(pole) -> float:
    """Pole strength 3 pi c^2 Gamma / (2 omega^3) in m^2."""
    return 3.0 * np.pi * u.c**2 * pole.gamma / (2.0 * pole.omega**3)


def alpha_block(
    J: int,
    params: MoleculeParams,
    omega_laser: float,
    theta: float,
    resonance_guard: float = 10.0,
) -> np.ndarray:
    """Polarizability operator (J m^2/W) within the rotational level J, indexed by M."""
    weights = branch_weights(J, theta)
    offsets = branch_offsets(J, params.Bv, params.Bvp)
    dim = 2 * J + 1
    total_w = sum(weights.values())
    block = params.alpha_bg_perp * np.eye(dim) + (params.alpha_bg_par - params.alpha_bg_perp) * total_w
    for pole in params.poles:
        s = strength(pole)
        det = omega_laser - pole.omega
        for branch, w in weights.items():
            denom = det + offsets[branch]
            if abs(denom) < resonance_guard * pole.gamma:
                raise ResonanceError(
                    f"laser within {resonance_guard:g} linewidths of v'={pole.vprime} "
                    f"J={J}->J'={J + branch}"
                )
            block -= s * w / denom
    return block


def build_ac(
    basis: Basis, params: MoleculeParams, fields: FieldConfig, per_intensity: bool = False
) -> np.ndarray:
    """AC Stark matrix, block-diagonal in J and diagonal in (m1, m2).

    With ``per_intensity=True`` the matrix for 1 W/cm^2 is returned.
    """
    n = len(basis)
    H = np.zeros((n, n))
    intensity = 1.0 if per_intensity else fields.intensity
    if intensity == 0.0:
        return H
    scale = -intensity * u.W_PER_CM2
    for J in range(basis.Jmax + 1):
        block = scale * alpha_block(J, params, fields.omega_laser, fields.theta)
        sl = basis.j_slice(J)
        idx = np.arange(sl.start, sl.stop)
        Ms = basis.M[idx]
        # Same nuclear projections, any pair of M within the J manifold.
        same = (basis.tm1[idx][:, None] == basis.tm1[idx][None, :]) & (
            basis.tm2[idx][:, None] == basis.tm2[idx][None, :]
        )
        vals = block[Ms[:, None] + J, Ms[None, :] + J]
        H[sl, sl] = np.where(same, vals, 0.0)
    return H


def build_static(basis: Basis, params: MoleculeParams, B: float, E: float) -> np.ndarray:
    """Field-free rotation plus Zeeman, quadrupole (if enabled) and DC Stark terms."""
    H = build_rot(basis, params) + build_zeeman(basis, params, B)
    if params.hyperfine:
        H = H + build_quadrupole(basis, params)
    if E:
        H = H + build_dc(basis, params, E)
    return H


def build_total(basis: Basis, params: MoleculeParams, fields: FieldConfig) -> np.ndarray:
    H = build_static(basis, params, fields.B, fields.E)
    if fields.intensity:
        H = H + build_ac(basis, params, fields)
    return H

"""Dynamic polarizabilities of the target states.

The real part is extracted numerically as -dE/dI of the target eigenstate of
the full Hamiltonian.  The complex polarizability uses the explicit pole list
with resonant and antiresonant denominators plus two effective background
oscillators.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import hamiltonian as ham
from . import units as u
from .model import FieldConfig, MoleculeParams, VibPole, build_basis
from .spectra import TargetNotFound, components, diagonalize, target_index

DEFAULT_I0 = 1000.0  # W/cm^2
DEFAULT_STEP = 0.5
DEFAULT_JMAX = 5
EXCLUSION_FLOOR = u.angular(50.0, "MHz")


class NonlinearityError(ArithmeticError):
    """Energy is not linear in intensity at the probe point (hyperpolarizability regime)."""


class ExclusionZoneError(ham.ResonanceError):
    """Laser detuning inside the resonance exclusion zone of a pole branch."""


def exclusion_check(params: MoleculeParams, omega_laser: float, Js) -> None:
    """Raise if any J in ``Js`` has a branch pole closer than max(10 Gamma, 2 pi x 50 MHz)."""
    for pole in params.poles:
        zone = max(10.0 * pole.gamma, EXCLUSION_FLOOR)
        det = omega_laser - pole.omega
        for J in Js:
            for branch, off in ham.branch_offsets(J, params.Bv, params.Bvp).items():
                if abs(det + off) < zone:
                    raise ExclusionZoneError(
                        f"detuning {u.to_freq(det, 'GHz'):.6g} GHz from v'={pole.vprime} lies within "
                        f"{u.to_freq(zone, 'MHz'):.3g} MHz of the J={J}->J'={J + branch} pole"
                    )


@lru_cache(maxsize=32)
def _static(params: MoleculeParams, B: float, E: float, Jmax: int):
    basis = build_basis(params, Jmax)
    return basis, ham.build_static(basis, params, B, E)


class Probe:
    """Target-state energies versus intensity at fixed static fields and laser frequency.

    Only the connected blocks of H that contain the requested targets are
    kept.  Energies are measured from the static diagonal element of each
    block's first target, which keeps tiny light shifts well above rounding
    error.
    """

    def __init__(self, params: MoleculeParams, fields: FieldConfig, Js, Jmax: int = DEFAULT_JMAX):
        self.params = params
        self.Js = tuple(Js)
        if max(self.Js) > Jmax:
            raise ValueError("Jmax must be at least the largest requested J")
        basis, H0 = _static(params, float(fields.B), float(fields.E), Jmax)
        self.basis = basis
        A1 = ham.build_ac(basis, params, fields, per_intensity=True)
        targets = [target_index(basis, params, J) for J in self.Js]
        pattern = (H0 != 0) | (A1 != 0)
        keep = []
        self._blocks = []
        for comp in components(pattern.astype(float)):
            tset = [t for t in targets if t in set(comp.tolist())]
            if not tset:
                continue
            ref = H0[tset[0], tset[0]]
            H0c = H0[np.ix_(comp, comp)] - ref * np.eye(len(comp))
            A1c = A1[np.ix_(comp, comp)]
            local = {J: int(np.flatnonzero(comp == t)[0]) for J, t in zip(self.Js, targets) if t in tset}
            self._blocks.append((H0c, A1c, local, ref))
            keep.extend(comp.tolist())

    def energies(self, intensity: float) -> dict[int, tuple[float, float]]:
        """J -> (energy relative to its block reference, target weight)."""
        out = {}
        for H0c, A1c, local, _ in self._blocks:
            sol = diagonalize(H0c + intensity * A1c)
            for J, li in local.items():
                w = sol.weights(li)
                k = int(np.argmax(w))
                if w[k] <= 0.5:
                    raise TargetNotFound(
                        f"J={J} target weight {w[k]:.3f} at I={intensity:g} W/cm^2"
                    )
                out[J] = (float(sol.energies[k]), float(w[k]))
        return out


@dataclass
class AlphaResult:
    alpha: float  # h kHz / (W/cm^2)
    weight: float
    richardson: float  # relative change under h -> h/2
    curvature: float  # |quadratic term / linear term| at I0


def _derivatives(probe: Probe, I0: float, h: float) -> dict[int, AlphaResult]:
    pts = {s: probe.energies(I0 * (1 + s * h)) for s in (-1.0, -0.5, 0.0, 0.5, 1.0)}
    out = {}
    for J in probe.Js:
        e = {s: pts[s][J][0] for s in pts}
        d1 = (e[1.0] - e[-1.0]) / (2 * h * I0)
        d2 = (e[0.5] - e[-0.5]) / (h * I0)
        second = (e[1.0] + e[-1.0] - 2 * e[0.0]) / (h * I0) ** 2
        rich = abs(d1 - d2) / max(abs(d2), 1e-300)
        curv = abs(0.5 * second * I0) / max(abs(d2), 1e-300)
        deriv = (4.0 * d2 - d1) / 3.0
        alpha = -u.pol_to_lab(deriv / u.W_PER_CM2)
        wmin = min(pts[s][J][1] for s in pts)
        out[J] = AlphaResult(alpha, wmin, rich, curv)
    return out


def alpha_numeric_multi(
    params: MoleculeParams,
    fields: FieldConfig,
    Js,
    pole: VibPole | None = None,
    detuning: float | None = None,
    I0: float = DEFAULT_I0,
    h: float = DEFAULT_STEP,
    Jmax: int = DEFAULT_JMAX,
    check: bool = True,
    retries: int = 2,
) -> dict[int, AlphaResult]:
    """Numeric polarizabilities of several target states from one set of diagonalisations.

    When the linearity checks fail, the probe intensity is lowered tenfold up
    to ``retries`` times before a :class:`NonlinearityError` is raised; near a
    pole the light shift at 1 kW/cm^2 can rival the hyperfine splittings.
    """
    if pole is not None and detuning is not None:
        fields = FieldConfig.at_detuning(pole, detuning, B=fields.B, E=fields.E, theta=fields.theta)
    if not fields.omega_laser > 0:
        raise ValueError("laser frequency must be positive")
    Js = tuple(sorted(set(Js)))
    exclusion_check(params, fields.omega_laser, Js)
    probe = Probe(params, fields, Js, max(Jmax, max(Js)))
    intensity = I0
    for attempt in range(retries + 1):
        res = _derivatives(probe, intensity, h)
        if not check:
            return res
        problem = None
        for J, r in res.items():
            if r.curvature > 0.01:
                problem = f"J={J}: quadratic term is {100 * r.curvature:.2g}% of the linear term"
            elif r.richardson > 1e-3:
                problem = f"J={J}: derivative changes by {100 * r.richardson:.2g}% under h/2"
            if problem:
                break
        if problem is None:
            return res
        intensity /= 10.0
    raise NonlinearityError(f"{problem} (down to I0={intensity * 10:g} W/cm^2)")


def alpha_numeric(params, fields, J: int, pole=None, detuning=None, **kwargs) -> float:
    """-dE/dI of the J target state in h kHz/(W/cm^2)."""
    return alpha_numeric_multi(params, fields, (J,), pole, detuning, **kwargs)[J].alpha


@dataclass
class PolarizabilitySpectrum:
    pole: VibPole
    detunings: np.ndarray  # rad/s relative to ``pole``
    alpha: dict[int, np.ndarray]  # J -> h kHz/(W/cm^2)
    weights: dict[int, np.ndarray]
    fields: FieldConfig
    mode: str = "numeric"
    alpha_imag: dict[int, np.ndarray] | None = None
    errors: dict[int, str] = field(default_factory=dict)  # grid index -> message

    @property
    def Js(self) -> list[int]:
        return sorted(self.alpha)

    @property
    def ok(self) -> np.ndarray:
        return np.array([i not in self.errors for i in range(len(self.detunings))])


def scan_alpha(
    params: MoleculeParams,
    fields: FieldConfig,
    Js,
    pole: VibPole,
    detunings,
    mode: str = "numeric",
    imag: bool = False,
    workers: int = 1,
    **kwargs,
) -> PolarizabilitySpectrum:
    """Polarizability curves over a detuning grid; failing points become NaN and are listed in ``errors``."""
    from . import analytic

    det = np.asarray(detunings, dtype=float)
    if len(det) > 1 and np.any(np.diff(det) <= 0):
        raise ValueError("detuning grid must be strictly increasing")
    Js = tuple(sorted(set(Js)))

    def one(d):
        if mode == "numeric":
            res = alpha_numeric_multi(params, fields, Js, pole, d, **kwargs)
            return {J: (r.alpha, r.weight) for J, r in res.items()}
        if mode == "analytic":
            # every pole is explicit in the numeric model, so include the neighbours by default
            kw = {"neighbors": True, **kwargs}
            exclusion_check(params, pole.omega + d, Js)
            return {
                J: (analytic.alpha_analytic(J, fields.theta, d, params, pole, **kw), 1.0)
                for J in Js
            }
        raise ValueError(f"unknown mode {mode!r}")

    def safe(d):
        try:
            return one(d), None
        except (TargetNotFound, NonlinearityError, ham.ResonanceError, ArithmeticError) as exc:
            return None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(safe, det))
    else:
        results = [safe(d) for d in det]

    alpha = {J: np.full(len(det), np.nan) for J in Js}
    weights = {J: np.full(len(det), np.nan) for J in Js}
    errors = {}
    for i, (vals, err) in enumerate(results):
        if err is not None:
            errors[i] = err
            continue
        for J, (a, w) in vals.items():
            alpha[J][i] = a
            weights[J][i] = w
    spec = PolarizabilitySpectrum(pole, det, alpha, weights, fields, mode, errors=errors)
    if imag:
        spec.alpha_imag = {
            J: np.array([alpha_complex(params, J, pole.omega + d, fields.theta).imag for d in det])
            for J in Js
        }
    return spec


# --- complex polarizability --------------------------------------------------

def _oscillator(z: complex, omega: float) -> complex:
    """Resonant plus antiresonant response 1/(z - w) + 1/(z + w)."""
    return 1.0 / (z - omega) + 1.0 / (z + omega)


def _background_strengths(params: MoleculeParams) -> dict[str, tuple[float, float] | None]:
    """Effective oscillators whose real response equals the background constants at the first pole."""
    ref = params.poles[0].omega
    out = {}
    for key, line, value in (
        ("par", params.bg_line_par, params.alpha_bg_par),
        ("perp", params.bg_line_perp, params.alpha_bg_perp),
    ):
        if line is None:
            out[key] = None
        else:
            out[key] = (line, value / _oscillator(line, ref).real)
    return out


def _transitions(params: MoleculeParams, J: int, theta: float):
    """(transition frequency, strength x angular weight) for every pole branch of the M=0 target."""
    weights = ham.branch_weights(J, theta)
    offsets = ham.branch_offsets(J, params.Bv, params.Bvp)
    for pole in params.poles:
        s = ham.strength(pole)
        for branch, w in weights.items():
            yield pole.omega - offsets[branch], s * w[J, J]


def alpha_complex(
    params: MoleculeParams, J: int, omega_laser: float, theta: float = 0.0, gamma_f: float | None = None
) -> complex:
    """Complex polarizability of |J, M=0> (hyperfine-free) in h kHz/(W/cm^2).

    Every transition contributes S (1/(w_f - w + i g/2) + 1/(w_f + w + i g/2))
    with g the uniform linewidth ``gamma_f``; the imaginary part is therefore
    never positive.
    """
    if not omega_laser > 0:
        raise ValueError("laser frequency must be positive")
    g = params.gamma_f if gamma_f is None else gamma_f
    w_tot = sum(ham.branch_weights(J, theta).values())[J, J]
    total = 0j
    for wf, s in _transitions(params, J, theta):
        total += s * _oscillator(wf + 0.5j * g, omega_laser)
    bg = _background_strengths(params)
    for key, frac, const in (
        ("par", w_tot, params.alpha_bg_par),
        ("perp", 1.0 - w_tot, params.alpha_bg_perp),
    ):
        if bg[key] is None:
            total += frac * const
        else:
            line, s = bg[key]
            total += frac * s * _oscillator(line + 0.5j * g, omega_laser)
    return complex(u.pol_to_lab(total.real), u.pol_to_lab(total.imag))


def alpha_imag(params: MoleculeParams, J: int, omega_laser: float, theta: float = 0.0, **kwargs) -> complex:
    """Alias of :func:`alpha_complex`, kept for symmetry with :func:`alpha_numeric`."""
    return alpha_complex(params, J, omega_laser, theta, **kwargs)


def lorentzian_tail_imag(params: MoleculeParams, J: int, omega_laser: float, theta: float = 0.0) -> float:
    """Far-wing estimate of Im alpha: each line contributes -S (g/2) / (w_f - w)^2.

    Uses only the rotating-wave tail of each transition, so it is an
    independent approximation to the full expression in :func:`alpha_complex`.
    """
    g = params.gamma_f
    w_tot = sum(ham.branch_weights(J, theta).values())[J, J]
    total = 0.0
    for wf, s in _transitions(params, J, theta):
        total -= s * (g / 2) / (wf - omega_laser) ** 2
    bg = _background_strengths(params)
    for key, frac in (("par", w_tot), ("perp", 1.0 - w_tot)):
        if bg[key] is not None:
            line, s = bg[key]
            total -= frac * s * (g / 2) / (line - omega_laser) ** 2
    return u.pol_to_lab(total)

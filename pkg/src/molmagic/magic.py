"""Magic crossings, the multi-state window, triple-magic tuning and pole screening."""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import analytic as an
from . import hamiltonian as ham
from . import polarizability as pz
from . import units as u
from .model import FieldConfig, MoleculeParams, VibPole
from .spectra import TargetNotFound

TRIPLE_TOL = u.angular(10.0, "MHz")


class NoSignChangeError(ValueError):
    """The polarizability difference keeps its sign across the bracket."""


class NoRootError(ValueError):
    """g(E) does not change sign over the electric-field bracket."""

    def __init__(self, message, g_lo=None, g_hi=None, best=None):
        super().__init__(message)
        self.g_lo = g_lo
        self.g_hi = g_hi
        self.best = best


class MultipleRootsWarning(UserWarning):
    pass


@dataclass
class Crossing:
    Ja: int
    Jb: int
    detuning: float  # rad/s from the pole
    alpha: float  # h kHz/(W/cm^2)
    mode: str
    fields: FieldConfig | None = None

    @property
    def detuning_GHz(self) -> float:
        return u.to_freq(self.detuning, "GHz")


@dataclass
class TripleResult:
    E: float  # kV/cm
    detuning: float  # rad/s
    alpha: float
    converged: bool
    g: float  # rad/s
    crossings: tuple[Crossing, ...] = ()


@dataclass
class WindowResult:
    lo: float
    hi: float
    max_percent: float
    pair_percent: dict = field(default_factory=dict)
    theta_spread: float | None = None  # relative spread of alpha_1 over theta at the centre


@dataclass
class ScreenRow:
    vprime: int
    gamma: float
    lower: float
    upper: float | None
    ratio_lower: float
    ratio_upper: float | None
    verdict: str
    delta_cr: float
    crossings: list = field(default_factory=list)
    note: str = ""


@dataclass
class MagicReport:
    pole: VibPole | None = None
    crossings: list = field(default_factory=list)
    window: WindowResult | None = None
    triple: TripleResult | None = None
    screening: list = field(default_factory=list)


# --- evaluation helpers -------------------------------------------------------

def _alphas(params, fields, Js, pole, detuning, mode, **kwargs) -> dict[int, float]:
    if mode == "numeric":
        res = pz.alpha_numeric_multi(params, fields, Js, pole, detuning, **kwargs)
        return {J: r.alpha for J, r in res.items()}
    if mode == "analytic":
        neighbors = kwargs.get("neighbors", True)
        convention = kwargs.get("convention", "exact")
        return {
            J: an.alpha_analytic(J, fields.theta, detuning, params, pole, neighbors, convention)
            for J in Js
        }
    raise ValueError(f"unknown mode {mode!r}")


def pole_positions(params: MoleculeParams, pole: VibPole, Js) -> list[float]:
    """Detunings (from ``pole``) of every branch pole of every level in ``Js``."""
    out = []
    for other in params.poles:
        shift = other.omega - pole.omega
        for J in Js:
            for off in ham.branch_offsets(J, params.Bv, params.Bvp).values():
                out.append(shift - off)
    return sorted(out)


def _check_bracket(params, pole, Js, lo, hi):
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    inside = [p for p in pole_positions(params, pole, Js) if lo <= p <= hi]
    if inside:
        raise ValueError(
            f"bracket contains a pole at {u.to_freq(inside[0], 'GHz'):.6g} GHz; split it first"
        )


def find_pair_crossing(
    params: MoleculeParams,
    fields: FieldConfig,
    Ja: int,
    Jb: int,
    pole: VibPole,
    bracket: tuple[float, float],
    mode: str = "numeric",
    rtol: float = 1e-6,
    probes: int = 9,
    **kwargs,
) -> Crossing:
    """Root of alpha_Ja - alpha_Jb inside ``bracket`` (detunings in rad/s)."""
    lo, hi = map(float, bracket)
    _check_bracket(params, pole, (Ja, Jb), lo, hi)

    def diff(d):
        a = _alphas(params, fields, (Ja, Jb), pole, d, mode, **kwargs)
        return a[Ja] - a[Jb]

    f_lo, f_hi = diff(lo), diff(hi)
    if np.sign(f_lo) == np.sign(f_hi) and f_lo != 0.0:
        raise NoSignChangeError(
            f"alpha_{Ja} - alpha_{Jb} has the same sign at {u.to_freq(lo, 'GHz'):.6g} GHz "
            f"({f_lo:.3e}) and {u.to_freq(hi, 'GHz'):.6g} GHz ({f_hi:.3e})"
        )
    if probes > 0:
        pts = np.linspace(lo, hi, probes + 2)
        vals = [f_lo] + [diff(d) for d in pts[1:-1]] + [f_hi]
        changes = int(np.sum(np.diff(np.sign(vals)) != 0))
        if changes > 1:
            warnings.warn(
                f"{changes} sign changes of alpha_{Ja} - alpha_{Jb} inside the bracket; "
                "returning one root",
                MultipleRootsWarning,
                stacklevel=2,
            )
    root = brentq(diff, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps))
    a = _alphas(params, fields, (Ja,), pole, root, mode, **kwargs)[Ja]
    return Crossing(Ja, Jb, root, a, mode, fields)


def detuning_grid(lo: float, hi: float, per_decade: int = 64) -> np.ndarray:
    """Grid with ``per_decade`` points per decade of |detuning| on each side of zero."""
    if not lo < hi:
        raise ValueError("lo must be below hi")
    parts = []
    floor = u.angular(1.0, "MHz")
    if hi > 0:
        a = max(lo, floor)
        n = max(int(np.ceil(per_decade * np.log10(hi / a))), 1) + 1
        parts.append(np.geomspace(a, hi, n))
    if lo < 0:
        b = max(-hi, floor)
        n = max(int(np.ceil(per_decade * np.log10(-lo / b))), 1) + 1
        parts.append(-np.geomspace(b, -lo, n)[::-1])
    return np.unique(np.concatenate(parts))


def find_crossings(
    params: MoleculeParams,
    fields: FieldConfig,
    Ja: int,
    Jb: int,
    pole: VibPole,
    lo: float,
    hi: float,
    mode: str = "analytic",
    per_decade: int = 64,
    workers: int = 1,
    **kwargs,
) -> list[Crossing]:
    """All crossings of alpha_Ja and alpha_Jb between ``lo`` and ``hi``, skipping poles."""
    grid = detuning_grid(lo, hi, per_decade)
    poles = np.array(pole_positions(params, pole, (Ja, Jb)))
    zone = max(max(10 * p.gamma for p in params.poles), pz.EXCLUSION_FLOOR)
    grid = np.array([d for d in grid if np.all(np.abs(d - poles) >= zone)])

    def value(d):
        try:
            a = _alphas(params, fields, (Ja, Jb), pole, d, mode, **kwargs)
            return a[Ja] - a[Jb]
        except (TargetNotFound, ArithmeticError, ham.ResonanceError):
            return np.nan

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = np.array(list(ex.map(value, grid)))
    else:
        vals = np.array([value(d) for d in grid])

    found = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        va, vb = vals[i], vals[i + 1]
        if not (np.isfinite(va) and np.isfinite(vb)) or np.sign(va) == np.sign(vb):
            continue
        if np.any((poles > a) & (poles < b)) or (a < 0 < b):
            continue
        try:
            found.append(find_pair_crossing(params, fields, Ja, Jb, pole, (a, b), mode, probes=0, **kwargs))
        except (NoSignChangeError, TargetNotFound, ArithmeticError):
            continue
    return found


def _nearest(crossings: list[Crossing], target: float) -> Crossing | None:
    if not crossings:
        return None
    return min(crossings, key=lambda c: abs(c.detuning - target))


def default_window_bracket(params: MoleculeParams, pole: VibPole, theta: float = 0.0,
                           Js=(0, 1, 2), span: float = 0.03) -> tuple[float, float]:
    """Bracket around the analytic medium-detuned crossings, padded by ``span`` x Delta_cr."""
    dcr = an.critical_detuning(params, pole)
    lo, hi = sorted((0.5 * dcr, 1.5 * dcr))
    f = FieldConfig(theta=theta)
    found = []
    for Ja, Jb in itertools.combinations(Js, 2):
        c = _nearest(find_crossings(params, f, Ja, Jb, pole, lo, hi, "analytic"), dcr)
        if c is not None:
            found.append(c.detuning)
    if not found:
        return lo, hi
    pad = span * abs(dcr)
    return min(found) - pad, max(found) + pad


# --- triple magic -------------------------------------------------------------

class _Undefined(ArithmeticError):
    pass


def _robust_root(func, a: float, b: float, xtol: float) -> float:
    """Brent's method, falling back to bisection if ``func`` is undefined somewhere inside."""

    def strict(x):
        val = func(x)
        if not np.isfinite(val):
            raise _Undefined(x)
        return val

    try:
        return brentq(strict, a, b, xtol=xtol)
    except _Undefined:
        pass
    fa = func(a)
    while b - a > xtol:
        mid = 0.5 * (a + b)
        fm = func(mid)
        for nudge in (0.25, 0.75):
            if np.isfinite(fm):
                break
            mid = a + nudge * (b - a)
            fm = func(mid)
        if not np.isfinite(fm):
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def find_triple_magic(
    params: MoleculeParams,
    fields: FieldConfig,
    pole: VibPole,
    E_bracket: tuple[float, float],
    det_bracket: tuple[float, float] | None = None,
    mode: str = "numeric",
    n_scan: int = 13,
    tol: float = TRIPLE_TOL,
    **kwargs,
) -> TripleResult:
    """Electric field where the (0,1) and (1,2) crossings coincide.

    g(E) = Delta_cross(0,1; E) - Delta_cross(1,2; E) is sampled on ``n_scan``
    points and refined with Brent's method inside the first sign change.
    """
    E_lo, E_hi = map(float, E_bracket)
    if det_bracket is None:
        det_bracket = default_window_bracket(params, pole, fields.theta)
    lo, hi = det_bracket

    def crossings(E):
        f = fields.replace(E=E)
        c01 = _nearest(find_crossings(params, f, 0, 1, pole, lo, hi, mode, per_decade=256, **kwargs),
                       0.5 * (lo + hi))
        c12 = _nearest(find_crossings(params, f, 1, 2, pole, lo, hi, mode, per_decade=256, **kwargs),
                       0.5 * (lo + hi))
        return c01, c12

    cache = {}

    def g(E):
        if E not in cache:
            c01, c12 = crossings(E)
            cache[E] = (np.nan if c01 is None or c12 is None else c01.detuning - c12.detuning, c01, c12)
        return cache[E][0]

    if not E_lo < E_hi:
        g_lo = g(E_lo)
        raise NoRootError(
            f"degenerate field bracket [{E_lo:g}, {E_hi:g}] kV/cm; g = "
            f"{u.to_freq(g_lo, 'GHz') if np.isfinite(g_lo) else float('nan'):.4g} GHz",
            g_lo, g_lo,
        )
    Es = np.linspace(E_lo, E_hi, n_scan)
    gs = np.array([g(E) for E in Es])
    finite = np.isfinite(gs)
    bracket = None
    for i in range(len(Es) - 1):
        if finite[i] and finite[i + 1] and np.sign(gs[i]) != np.sign(gs[i + 1]):
            bracket = (Es[i], Es[i + 1])
            break
    if bracket is None:
        best = None
        if finite.any():
            k = int(np.nanargmin(np.abs(gs)))
            best = (float(Es[k]), float(gs[k]))
        g_lo, g_hi = gs[0], gs[-1]
        msg = (
            f"g(E) keeps its sign over [{E_lo:g}, {E_hi:g}] kV/cm: "
            f"g(lo) = {u.to_freq(g_lo, 'GHz'):.4g} GHz, g(hi) = {u.to_freq(g_hi, 'GHz'):.4g} GHz"
        )
        if best:
            msg += f"; closest approach {u.to_freq(best[1], 'GHz'):.4g} GHz at E = {best[0]:.4g} kV/cm"
        raise NoRootError(msg, g_lo, g_hi, best)

    E_star = _robust_root(g, *bracket, xtol=1e-5)
    g(E_star)
    if not np.isfinite(cache[E_star][0]):
        # The crossing is undefined at the refined point (no identifiable
        # target); fall back to the closest evaluated field with a value.
        near = [E for E in cache if np.isfinite(cache[E][0]) and bracket[0] <= E <= bracket[1]]
        E_star = min(near, key=lambda E: abs(cache[E][0]))
    g_star, c01, c12 = cache[E_star]
    det = 0.5 * (c01.detuning + c12.detuning)
    alpha = _alphas(params, fields.replace(E=E_star), (0, 1, 2), pole, det, mode, **kwargs)
    return TripleResult(
        E_star, det, float(np.mean(list(alpha.values()))), bool(abs(g_star) < tol), g_star, (c01, c12)
    )


# --- window -------------------------------------------------------------------

def percent_differences(alpha: dict[int, np.ndarray]) -> dict[tuple[int, int], np.ndarray]:
    """|alpha_J - alpha_J'| / |alpha_J'| in percent, taking the larger of both orderings."""
    out = {}
    for a, b in itertools.combinations(sorted(alpha), 2):
        d = np.abs(alpha[a] - alpha[b])
        out[(a, b)] = 100.0 * np.maximum(d / np.abs(alpha[a]), d / np.abs(alpha[b]))
    return out


def window_report(
    params: MoleculeParams,
    fields: FieldConfig,
    Js,
    pole: VibPole,
    window: tuple[float, float],
    n: int = 61,
    mode: str = "numeric",
    thetas=None,
    workers: int = 1,
    **kwargs,
) -> WindowResult:
    lo, hi = window
    _check_bracket(params, pole, Js, lo, hi)
    spec = pz.scan_alpha(params, fields, Js, pole, np.linspace(lo, hi, n), mode, workers=workers, **kwargs)
    pct = percent_differences(spec.alpha)
    pair = {k: float(np.nanmax(v)) for k, v in pct.items()}
    result = WindowResult(lo, hi, max(pair.values()) if pair else 0.0, pair)
    if thetas is not None:
        centre = 0.5 * (lo + hi)
        vals = []
        for th in thetas:
            f = fields.replace(theta=float(th))
            vals.append(_alphas(params, f, (1,), pole, centre, mode, **kwargs)[1])
        vals = np.array(vals)
        result.theta_spread = float((vals.max() - vals.min()) / abs(vals.mean()))
    return result


def near_magic_window(
    params: MoleculeParams,
    fields: FieldConfig,
    Js,
    pole: VibPole,
    search: tuple[float, float],
    threshold: float = 0.6,
    n: int = 301,
    mode: str = "analytic",
    **kwargs,
) -> tuple[float, float] | None:
    """Widest detuning interval where every pairwise percent difference stays below ``threshold``."""
    det = np.linspace(*search, n)
    spec = pz.scan_alpha(params, fields, Js, pole, det, mode, **kwargs)
    worst = np.max(np.array(list(percent_differences(spec.alpha).values())), axis=0)
    ok = np.isfinite(worst) & (worst < threshold)
    best, start = None, None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if best is None or i - 1 - start > best[1] - best[0]:
                best = (start, i - 1)
            start = None
    if best is None:
        return None
    return float(det[best[0]]), float(det[best[1]])


# --- screening ----------------------------------------------------------------

def screen_poles(
    params: MoleculeParams,
    margin: float = 5.0,
    Js=(0, 1, 2),
    theta: float = 0.0,
    locate: bool = True,
) -> list[ScreenRow]:
    """Lower/upper width criteria for every pole, plus analytic crossings for passing poles."""
    rows = []
    for pole in params.poles:
        lower = an.criterion_lower(params, pole, margin)
        note = ""
        try:
            upper = an.criterion_upper(params, pole, margin)
        except an.MissingNeighborError as exc:
            upper = None
            note = str(exc)
        ok = lower.passed and (upper is None or upper.passed)
        dcr = an.critical_detuning(params, pole)
        row = ScreenRow(
            pole.vprime, pole.gamma, lower.bound, None if upper is None else upper.bound,
            lower.ratio, None if upper is None else upper.ratio, "pass" if ok else "fail", dcr,
            note=note,
        )
        if ok and locate:
            lo, hi = sorted((0.25 * dcr, 1.75 * dcr))
            f = FieldConfig(theta=theta)
            for Ja, Jb in itertools.combinations(Js, 2):
                c = _nearest(find_crossings(params, f, Ja, Jb, pole, lo, hi, "analytic"), dcr)
                if c is not None:
                    row.crossings.append(c)
        rows.append(row)
    return rows

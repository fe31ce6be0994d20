"""Diagonalisation, adiabatic tracking and target-state identification."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import hamiltonian as ham
from .model import Basis, FieldConfig, MoleculeParams, build_basis


class DiagonalizationError(RuntimeError):
    pass


class TargetNotFound(LookupError):
    """No eigenstate carries more than half its weight on the requested basis state."""


@dataclass
class EigenSolution:
    energies: np.ndarray  # ascending, J
    vectors: np.ndarray  # columns are eigenvectors in the full basis
    basis_tag: tuple | None = None

    def __len__(self) -> int:
        return len(self.energies)

    def weights(self, index: int) -> np.ndarray:
        """Population of basis state ``index`` in every eigenvector."""
        return np.abs(self.vectors[index, :]) ** 2


def components(H: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected blocks of ``H`` (exact zeros separate blocks)."""
    n, labels = connected_components(csr_matrix(H != 0.0), directed=False)
    return [np.flatnonzero(labels == k) for k in range(n)]


def _fix_phase(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[idx, np.arange(vectors.shape[1])]
    return vectors * (np.abs(lead) / lead)[None, :]


def _eigh(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Shifting by the mean diagonal keeps the absolute eigenvalue error at the
    # scale of the block's internal spread.
    shift = float(np.mean(np.diag(block))) if block.size else 0.0
    try:
        w, v = np.linalg.eigh(block - shift * np.eye(len(block)))
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(block)
        raise DiagonalizationError(f"eigh failed (condition number {cond:.3g})") from exc
    return w + shift, v


def diagonalize(
    H: np.ndarray, only: Sequence[int] | None = None, basis_tag=None, check: bool = False
) -> EigenSolution:
    """Full spectrum of a real-symmetric matrix, ascending.

    The matrix is split into its connected blocks first.  With ``only``, just
    the blocks containing those basis indices are diagonalised and the
    returned solution spans that subspace.  Eigenvectors follow the phase
    convention "largest-magnitude component real and positive".
    """
    n = len(H)
    comps = components(H)
    if only is not None:
        wanted = set(int(i) for i in only)
        comps = [c for c in comps if wanted.intersection(c.tolist())]
    energies, cols = [], []
    for comp in comps:
        w, v = _eigh(H[np.ix_(comp, comp)])
        full = np.zeros((n, len(comp)), dtype=v.dtype)
        full[comp, :] = v
        energies.append(w)
        cols.append(full)
    energies = np.concatenate(energies)
    vectors = np.concatenate(cols, axis=1)
    order = np.argsort(energies, kind="stable")
    sol = EigenSolution(energies[order], _fix_phase(vectors[:, order]), basis_tag)
    if check:
        check_solution(H, sol)
    return sol


def check_solution(H: np.ndarray, sol: EigenSolution, tol: float = 1e-10) -> None:
    norm = np.linalg.norm(H, 2) or 1.0
    resid = np.linalg.norm(H @ sol.vectors - sol.vectors * sol.energies[None, :], axis=0)
    if resid.max() > tol * norm:
        raise DiagonalizationError(f"residual {resid.max() / norm:.3g} exceeds {tol:g}")
    gram = sol.vectors.conj().T @ sol.vectors
    if np.abs(gram - np.eye(len(sol))).max() > tol:
        raise DiagonalizationError("eigenvectors are not orthonormal")


def target_index(basis: Basis, params: MoleculeParams, J: int, stretched=None) -> int:
    m1, m2 = stretched if stretched is not None else params.stretched
    return basis.index((J, 0, m1, m2))


def find_target_state(
    sol: EigenSolution, J: int, params: MoleculeParams, basis: Basis, stretched=None
) -> tuple[int, float]:
    """Eigenstate index with more than 50% weight on |J, M=0; m1, m2> (spin-stretched by default)."""
    w = sol.weights(target_index(basis, params, J, stretched))
    k = int(np.argmax(w))
    if w[k] <= 0.5:
        raise TargetNotFound(f"no J={J} eigenstate exceeds 50% target weight (max {w[k]:.3f})")
    return k, float(w[k])


def dominant_labels(sol: EigenSolution, basis: Basis) -> tuple[np.ndarray, np.ndarray]:
    """Dominant J and M of each eigenvector (by summed population)."""
    pop = np.abs(sol.vectors) ** 2
    Js = np.arange(basis.Jmax + 1)
    by_j = np.array([pop[basis.J == J].sum(axis=0) for J in Js])
    J_dom = Js[np.argmax(by_j, axis=0)]
    Ms = np.arange(-basis.Jmax, basis.Jmax + 1)
    by_m = np.array([pop[basis.M == M].sum(axis=0) for M in Ms])
    M_dom = Ms[np.argmax(by_m, axis=0)]
    return J_dom, M_dom


# --- tracking ---------------------------------------------------------------

@dataclass
class TrackedScan:
    """Eigenvalues along a parameter scan, columns following adiabatic states."""

    parameter: str
    grid: np.ndarray
    energies: np.ndarray  # (npts, nlev), J
    overlaps: np.ndarray  # (npts-1, nlev) |<v_i(t)|v_i(t+1)>|
    J_dominant: np.ndarray  # (npts, nlev)
    M_dominant: np.ndarray
    jumps: list[tuple[int, int]] = field(default_factory=list)  # (step, level)
    weyl_ok: bool = True
    target: np.ndarray | None = None  # (npts,) tracked column of the target state, -1 if none
    target_weight: np.ndarray | None = None
    crossings: list[dict] = field(default_factory=list)

    @property
    def nlevels(self) -> int:
        return self.energies.shape[1]

    def manifold(self, J: int) -> np.ndarray:
        """Tracked columns whose dominant J at the first grid point equals ``J``."""
        return np.flatnonzero(self.J_dominant[0] == J)


def _align_degenerate(prev: np.ndarray, energies: np.ndarray, vecs: np.ndarray, tol: float) -> np.ndarray:
    """Rotate eigenvectors inside degenerate clusters to best match ``prev``."""
    vecs = vecs.copy()
    start = 0
    n = len(energies)
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            V = vecs[:, start:stop]
            proj = V.conj().T @ prev  # (k, nprev)
            sel = np.argsort(-np.linalg.norm(proj, axis=0))[: stop - start]
            W, _, Zh = np.linalg.svd(proj[:, sel])
            vecs[:, start:stop] = V @ (W @ Zh)
        start = stop
    return vecs


def assign(overlap: np.ndarray, fallback_below: float = 0.7) -> np.ndarray:
    """Map previous states (rows) to new states (cols); greedy with global fallback."""
    n = overlap.shape[0]
    perm = np.full(n, -1)
    used = np.zeros(overlap.shape[1], dtype=bool)
    for r in np.argsort(-overlap.max(axis=1), kind="stable"):
        cands = np.where(used, -1.0, overlap[r])
        k = int(np.argmax(cands))
        perm[r] = k
        used[k] = True
    if overlap[np.arange(n), perm].min() < fallback_below:
        _, perm = linear_sum_assignment(-(overlap**2))
    return perm


def track(
    solutions: Sequence[EigenSolution],
    refine: Callable[[int], list[EigenSolution]] | None = None,
    jump_below: float = 0.5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """Reorder eigenpairs so each column follows one adiabatic state.

    Returns (energies, overlaps, columns, jumps) where ``columns[t, i]`` is the
    sorted index at point t occupied by tracked state i.  ``refine(t)`` may
    supply intermediate solutions between points t and t+1; they are used
    only to carry the assignment across a low-overlap step.
    """
    npts = len(solutions)
    nlev = len(solutions[0])
    cols = np.zeros((npts, nlev), dtype=int)
    cols[0] = np.arange(nlev)
    overlaps = np.ones((max(npts - 1, 0), nlev))
    jumps = []
    prev_vecs = solutions[0].vectors
    scale = max(np.abs(solutions[0].energies).max(), 1e-300)

    def step(prev, sol):
        vecs = _align_degenerate(prev, sol.energies, sol.vectors, 1e-12 * scale)
        ov = np.abs(prev.conj().T @ vecs)
        perm = assign(ov)
        return vecs[:, perm], perm, ov[np.arange(len(perm)), perm]

    for t in range(1, npts):
        sol = solutions[t]
        new_vecs, perm, ov = step(prev_vecs, sol)
        if ov.min() < jump_below and refine is not None:
            pv = prev_vecs
            chain = np.arange(nlev)
            for mid in refine(t - 1) + [sol]:
                nv, p, o = step(pv, mid)
                chain = p
                pv = nv
            perm = chain
            new_vecs = pv
            ov = np.abs(np.sum(prev_vecs.conj() * new_vecs, axis=0))
        cols[t] = perm
        overlaps[t - 1] = ov
        jumps.extend((t - 1, int(i)) for i in np.flatnonzero(ov < jump_below))
        prev_vecs = new_vecs
    energies = np.array([solutions[t].energies[cols[t]] for t in range(npts)])
    return energies, overlaps, cols, jumps


def _solve_grid(H_of: Callable[[float], np.ndarray], grid, workers: int = 1, only=None):
    def one(x):
        return diagonalize(H_of(x), only=only)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, grid))
    return [one(x) for x in grid]


def weyl_bound_holds(H_of: Callable[[float], np.ndarray], grid, solutions, rtol: float = 1e-9) -> bool:
    """Sorted eigenvalues move by at most ||H(t+1) - H(t)||_2 per step."""
    ok = True
    for t in range(len(grid) - 1):
        dH = np.linalg.norm(H_of(grid[t + 1]) - H_of(grid[t]), 2)
        dE = np.abs(solutions[t + 1].energies - solutions[t].energies).max()
        scale = np.abs(solutions[t].energies).max()
        if dE > dH + rtol * scale:
            ok = False
            warnings.warn(f"Weyl bound violated at step {t}: {dE:.3g} > {dH:.3g}")
    return ok


def tracked_scan(
    parameter: str,
    H_of: Callable[[float], np.ndarray],
    grid,
    basis: Basis,
    workers: int = 1,
    refine_depth: int = 3,
    check_weyl: bool = True,
) -> TrackedScan:
    grid = np.asarray(grid, dtype=float)
    if len(grid) > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise ValueError("scan grid must be strictly monotone")
    sols = _solve_grid(H_of, grid, workers)

    def refine(t):
        if refine_depth <= 0:
            return []
        pts = np.linspace(grid[t], grid[t + 1], 2**refine_depth + 1)[1:-1]
        return [diagonalize(H_of(x)) for x in pts]

    energies, overlaps, cols, jumps = track(sols, refine)
    labels = [dominant_labels(s, basis) for s in sols]
    J_dom = np.array([labels[t][0][cols[t]] for t in range(len(grid))])
    M_dom = np.array([labels[t][1][cols[t]] for t in range(len(grid))])
    scan = TrackedScan(parameter, grid, energies, overlaps, J_dom, M_dom, jumps)
    scan._solutions = sols  # kept for target identification
    scan._cols = cols
    if check_weyl:
        scan.weyl_ok = weyl_bound_holds(H_of, grid, sols)
    return scan


def mark_target(scan: TrackedScan, params: MoleculeParams, basis: Basis, J: int) -> TrackedScan:
    """Record, per grid point, which tracked column is the J target state (or -1)."""
    npts = len(scan.grid)
    target = np.full(npts, -1)
    weight = np.zeros(npts)
    idx = target_index(basis, params, J)
    for t, sol in enumerate(scan._solutions):
        w = sol.weights(idx)[scan._cols[t]]
        k = int(np.argmax(w))
        weight[t] = w[k]
        if w[k] > 0.5:
            target[t] = k
    scan.target = target
    scan.target_weight = weight
    return scan


# --- maps -------------------------------------------------------------------

def zeeman_map(params: MoleculeParams, B_grid, E: float = 0.0, Jmax: int = 2, workers: int = 1) -> TrackedScan:
    """Levels of J <= Jmax versus magnetic field (gauss)."""
    basis = build_basis(params, Jmax)
    base = ham.build_rot(basis, params)
    if params.hyperfine:
        base = base + ham.build_quadrupole(basis, params)
    if E:
        base = base + ham.build_dc(basis, params, E)
    unit_z = ham.build_zeeman(basis, params, 1.0)
    scan = tracked_scan("B_G", lambda b: base + b * unit_z, B_grid, basis, workers)
    return scan


def dcstark_map(params: MoleculeParams, E_grid, B: float = 181.0, Jmax: int = 2, workers: int = 1) -> TrackedScan:
    """Levels of J <= Jmax versus DC electric field (kV/cm) parallel to B."""
    basis = build_basis(params, Jmax + 1)  # one extra J keeps the top manifold's Stark shift
    base = ham.build_static(basis, params, B, 0.0)
    unit_e = ham.build_dc(basis, params, 1.0)
    keep = np.flatnonzero(basis.J <= Jmax)
    scan = tracked_scan("E_kV_per_cm", lambda e: base + e * unit_e, E_grid, basis, workers)
    return _restrict(scan, keep, basis)


def _restrict(scan: TrackedScan, keep: np.ndarray, basis: Basis) -> TrackedScan:
    """Drop tracked levels belonging to the padding manifold."""
    cols = np.flatnonzero(scan.J_dominant[0] <= basis.J[keep].max())
    out = TrackedScan(
        scan.parameter, scan.grid, scan.energies[:, cols], scan.overlaps[:, cols],
        scan.J_dominant[:, cols], scan.M_dominant[:, cols],
        [(t, int(np.searchsorted(cols, i))) for t, i in scan.jumps if i in set(cols.tolist())],
        scan.weyl_ok,
    )
    out._solutions = scan._solutions
    out._cols = scan._cols[:, cols]
    return out


def ac_map(
    params: MoleculeParams,
    intensity_grid,
    fields: FieldConfig,
    Jmax: int = 2,
    workers: int = 1,
) -> TrackedScan:
    """Microwave transition frequencies E(J=1 level) - E(J=0 target) versus intensity (W/cm^2).

    The returned scan contains only the J=1 manifold.  ``target`` marks the
    J=1 target column at each point and ``crossings`` lists every grid step
    where another J=1 level passes the target level.
    """
    basis = build_basis(params, Jmax)
    base = ham.build_static(basis, params, fields.B, fields.E)
    unit_ac = ham.build_ac(basis, params, fields, per_intensity=True)
    scan = tracked_scan("I_W_per_cm2", lambda i: base + i * unit_ac, intensity_grid, basis, workers)

    npts = len(scan.grid)
    g_idx = target_index(basis, params, 0)
    ground = np.empty(npts)
    for t, sol in enumerate(scan._solutions):
        k = int(np.argmax(sol.weights(g_idx)))
        ground[t] = sol.energies[k]
    cols = scan.manifold(1)
    out = TrackedScan(
        scan.parameter, scan.grid, scan.energies[:, cols] - ground[:, None],
        scan.overlaps[:, cols], scan.J_dominant[:, cols], scan.M_dominant[:, cols],
        [], scan.weyl_ok,
    )
    out._solutions = scan._solutions
    out._cols = scan._cols[:, cols]
    mark_target(out, params, basis, 1)

    # The target by weight; count levels below it at each point.
    crossings = []
    rank = np.full(npts, -1)
    for t in range(npts):
        k = out.target[t]
        if k >= 0:
            rank[t] = int(np.sum(out.energies[t] < out.energies[t, k]))
    for t in range(npts - 1):
        if rank[t] >= 0 and rank[t + 1] >= 0 and rank[t] != rank[t + 1]:
            crossings.append({
                "step": t,
                "intensity": 0.5 * (out.grid[t] + out.grid[t + 1]),
                "levels_passed": int(rank[t + 1] - rank[t]),
                "target_overlap": float(out.overlaps[t, out.target[t]]),
            })
        elif (rank[t] >= 0) != (rank[t + 1] >= 0):
            crossings.append({
                "step": t,
                "intensity": 0.5 * (out.grid[t] + out.grid[t + 1]),
                "levels_passed": 0,
                "target_overlap": float("nan"),
            })
    out.crossings = crossings
    return out

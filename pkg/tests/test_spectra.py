from fractions import Fraction

import numpy as np
import pytest

from molmagic import hamiltonian as ham
from molmagic import spectra
from molmagic import units as u
from molmagic.model import FieldConfig, build_basis


@pytest.fixture(scope="module")
def basis2(rbcs):
    return build_basis(rbcs, 2)


def test_rotational_spectrum(rbcs, basis2):
    sol = spectra.diagonalize(ham.build_rot(basis2, rbcs))
    levels = u.energy_to_hz(sol.energies) / 1e9
    assert np.allclose(levels[:32], 0.0)
    assert np.allclose(levels[32:128], 0.980)
    assert np.allclose(levels[128:], 2.940)


def test_diagonal_input_returns_diagonal():
    d = np.array([3.0, -1.0, 2.0, 0.5])
    sol = spectra.diagonalize(np.diag(d))
    np.testing.assert_array_equal(sol.energies, np.sort(d))


def test_solution_invariants(rbcs, basis2):
    H = ham.build_static(basis2, rbcs, 181.0, 0.2)
    sol = spectra.diagonalize(H, check=True)
    spectra.check_solution(H, sol)
    assert np.all(np.diff(sol.energies) >= 0)
    # phase convention: largest component real and positive
    k = np.argmax(np.abs(sol.vectors), axis=0)
    assert np.all(sol.vectors[k, np.arange(len(sol))] > 0)


def test_j1_manifold_width(rbcs, basis2):
    sol = spectra.diagonalize(ham.build_static(basis2, rbcs, 181.0, 0.0))
    J, _ = spectra.dominant_labels(sol, basis2)
    j1 = u.energy_to_hz(sol.energies[J == 1]) - 0.980e9
    assert (J == 1).sum() == 96
    assert 0.3e6 < j1.max() - j1.min() < 3e6


def test_per_mf_blocks_match_global(rbcs, basis2):
    f = FieldConfig.at_detuning(rbcs.pole(0), u.angular(20, "GHz"), B=181.0, E=0.2, intensity=500.0)
    H = ham.build_total(basis2, rbcs, f)
    glob = np.linalg.eigvalsh(H)
    blocks = []
    for tmf in np.unique(basis2.tmf):
        idx = np.flatnonzero(basis2.tmf == tmf)
        blocks.extend(np.linalg.eigvalsh(H[np.ix_(idx, idx)]))
    np.testing.assert_allclose(np.sort(blocks), glob, rtol=1e-10, atol=1e-10 * np.abs(glob).max())
    ours = spectra.diagonalize(H)
    np.testing.assert_allclose(ours.energies, glob, rtol=1e-10, atol=1e-10 * np.abs(glob).max())


@pytest.mark.parametrize("J", [0, 1, 2])
def test_target_found_at_181G(rbcs, basis2, J):
    sol = spectra.diagonalize(ham.build_static(basis2, rbcs, 181.0, 0.0))
    k, w = spectra.find_target_state(sol, J, rbcs, basis2)
    assert w >= 0.8
    assert sol.weights(spectra.target_index(basis2, rbcs, J))[k] == w


def test_target_lost_at_low_field(rbcs, basis2):
    sol = spectra.diagonalize(ham.build_static(basis2, rbcs, 5.0, 0.0))
    with pytest.raises(spectra.TargetNotFound):
        spectra.find_target_state(sol, 2, rbcs, basis2)


def _raising(basis):
    """Total F_+ = J_+ + I1_+ + I2_+ in the product basis."""
    n = len(basis)
    Fp = np.zeros((n, n))
    spins = [float(s) for s in basis.spins]
    for i, (J, M, m1, m2) in enumerate(basis.states):
        if M < J:
            Fp[basis.index((J, M + 1, m1, m2)), i] += np.sqrt(J * (J + 1) - M * (M + 1))
        for k, m in enumerate((m1, m2)):
            if m < spins[k]:
                new = [m1, m2]
                new[k] = m + 1
                Fp[basis.index((J, M, *new)), i] += np.sqrt(spins[k] * (spins[k] + 1) - m * (m + 1))
    return Fp


def test_zero_field_hamiltonian_is_rotationally_invariant(rbcs):
    # at B = 0 levels form complete F multiplets: H commutes with F_+
    basis = build_basis(rbcs, 2)
    H = ham.build_static(basis, rbcs, 0.0, 0.0)
    Fp = _raising(basis)
    comm = H @ Fp - Fp @ H
    assert np.abs(comm).max() < 1e-12 * np.abs(H).max()
    # and a field along z breaks it
    Hb = ham.build_static(basis, rbcs, 181.0, 0.0)
    assert np.abs(Hb @ Fp - Fp @ Hb).max() > 1e-9 * np.abs(Hb).max()


def test_zero_field_degeneracy(rbcs):
    basis = build_basis(rbcs, 1)
    sol = spectra.diagonalize(ham.build_static(basis, rbcs, 0.0, 0.0))
    e = u.energy_to_hz(sol.energies[32:])
    breaks = np.flatnonzero(np.diff(e) > 1.0)  # Hz
    sizes = np.diff(np.concatenate(([0], breaks + 1, [len(e)])))
    assert sizes.sum() == 96
    assert sizes.min() >= 2  # no isolated level survives without a field


def test_zeeman_map_counts_and_slope(rbcs):
    grid = np.linspace(0.0, 200.0, 21)
    scan = spectra.zeeman_map(rbcs, grid, Jmax=0)
    assert scan.nlevels == 32
    assert scan.weyl_ok and not scan.jumps
    basis = build_basis(rbcs, 0)
    spectra.mark_target(scan, rbcs, basis, 0)
    k = scan.target[-1]
    slope = (scan.energies[-1, k] - scan.energies[-2, k]) / (grid[-1] - grid[-2]) / 1e-4
    expected = -(rbcs.g1 * 1.5 * (1 - rbcs.sigma1) + rbcs.g2 * 3.5 * (1 - rbcs.sigma2)) * u.mu_N
    assert slope == pytest.approx(expected, rel=0.01)


def test_dcstark_bands(rbcs):
    scan = spectra.dcstark_map(rbcs, np.linspace(0.0, 0.2, 5), B=181.0, Jmax=2)
    assert scan.nlevels == 288
    for J, counts in ((1, [32, 64]), (2, [32, 64, 64])):
        M = np.abs(scan.M_dominant[-1, scan.manifold(J)])
        assert [int((M == m).sum()) for m in range(J + 1)] == counts
    ground = scan.energies[:, scan.manifold(0)].mean(axis=1)
    assert np.all(np.diff(ground) < 0)


def test_assign_falls_back_to_optimal():
    overlap = np.array([[0.6, 0.8], [0.8, 0.6]])
    np.testing.assert_array_equal(spectra.assign(overlap), [1, 0])
    np.testing.assert_array_equal(spectra.assign(np.eye(3)), [0, 1, 2])


def test_tracking_through_crossing():
    # two levels crossing exactly: tracking keeps each state on its own line
    def H_of(x):
        return np.diag([x, -x, 5.0])

    class _B:
        Jmax = 0
        J = np.zeros(3, dtype=int)
        M = np.zeros(3, dtype=int)

    scan = spectra.tracked_scan("x", H_of, np.linspace(-1, 1, 11), _B())
    assert scan.weyl_ok
    e = scan.energies
    col = int(np.argmin(e[0]))
    assert np.all(np.diff(e[:, col]) > 0) or np.all(np.diff(e[:, col]) < 0)


def test_scan_grid_must_be_monotone(rbcs):
    with pytest.raises(ValueError):
        spectra.zeeman_map(rbcs, [0.0, 10.0, 5.0], Jmax=0)


def test_ac_map_far_detuned_has_no_crossings(rbcs):
    f = FieldConfig.at_detuning(rbcs.pole(0), u.angular(200, "GHz"), B=181.0)
    scan = spectra.ac_map(rbcs, np.linspace(0, 1000, 21), f, Jmax=1)
    assert scan.nlevels == 96
    assert scan.crossings == []
    assert np.all(scan.target >= 0)


def test_ac_map_near_resonance_crosses(rbcs):
    f = FieldConfig.at_detuning(rbcs.pole(0), u.angular(3, "GHz"), B=181.0)
    scan = spectra.ac_map(rbcs, np.linspace(0, 300, 31), f, Jmax=1)
    assert scan.weyl_ok
    first = scan.crossings[0]["intensity"]
    assert 30 < first < 300

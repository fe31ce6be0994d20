from fractions import Fraction

import numpy as np
import pytest

from molmagic import model, units as u
from molmagic.model import FieldConfig, ParamFileError

MINIMAL = """\
name = Test
I1 = 3/2
I2 = 7/2
Bv = 0.490 GHz
Bvp = 0.510 GHz
g_r = 0.0062
g1 = 1.836
g2 = 0.738
sigma1 = 3531 ppm
sigma2 = 6367 ppm
eqQ1 = -809.29 kHz
eqQ2 = 59.98 kHz
d_perm = 1.225 D
alpha_bg_par = 0.127 kHz/(W/cm2)
alpha_bg_perp = 0.0340 kHz/(W/cm2)
gamma_f = 6 MHz
pole = 0, 261.533 THz, 15.5 kHz   # comment after a value
"""


def test_parse_units(rbcs):
    assert rbcs.Bv == pytest.approx(u.angular(0.490, "GHz"))
    assert rbcs.sigma1 == pytest.approx(3531e-6)
    assert rbcs.d_perm == pytest.approx(1.225 * 3.33564e-30, rel=1e-5)
    assert u.pol_to_lab(rbcs.alpha_bg_par) == pytest.approx(0.127)
    assert rbcs.I2.value == Fraction(7, 2)
    assert [p.vprime for p in rbcs.poles] == [0, 1, 2, 3]
    assert u.to_freq(rbcs.pole(0).gamma, "kHz") == pytest.approx(15.5)


def test_minimal_file_parses():
    p = model.parse_molecule(MINIMAL)
    assert p.name == "Test"
    assert p.bg_line_par is None
    assert len(p.poles) == 1


def test_missing_key_is_named():
    text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("Bv "))
    with pytest.raises(ParamFileError, match="Bv"):
        model.parse_molecule(text)


@pytest.mark.parametrize(
    "bad, fragment",
    [
        ("Bv = 0.490 furlongs", "unit"),
        ("Bv = 0 GHz", "positive"),
        ("I1 = 0.3", "spin"),
        ("pole = 0, 261.533 THz", "vprime"),
        ("colour = blue", "unknown key"),
    ],
)
def test_bad_lines(bad, fragment):
    key = bad.split("=")[0].strip()
    lines = [l for l in MINIMAL.splitlines() if not l.startswith(key + " ")]
    with pytest.raises(ParamFileError, match=fragment):
        model.parse_molecule("\n".join(lines + [bad]))


def test_duplicate_pole_rejected():
    with pytest.raises(ParamFileError):
        model.parse_molecule(MINIMAL + "pole = 0, 262 THz, 5 kHz\n")


def test_round_trip_is_exact(rbcs):
    again = model.parse_molecule(model.dump_molecule(rbcs))
    assert again == rbcs


def test_bundled_files_load():
    assert model.narb().name == "NaRb"
    assert model.resolve_molecule_path("rbcs.params").exists()


def test_molecule_dir_env(tmp_path, monkeypatch):
    (tmp_path / "mine.params").write_text(MINIMAL)
    monkeypatch.setenv(model.MOLECULE_DIR_ENV, str(tmp_path))
    assert model.load_molecule("mine.params").name == "Test"
    with pytest.raises(FileNotFoundError):
        model.load_molecule("absent.params")


@pytest.mark.parametrize("Jmax, size", [(0, 32), (1, 128), (2, 288), (5, 1152)])
def test_basis_size(rbcs, Jmax, size):
    assert len(model.build_basis(rbcs, Jmax)) == size


def test_basis_index_inverts_enumeration(rbcs):
    basis = model.build_basis(rbcs, 2)
    for i, state in enumerate(basis):
        assert basis.index(state) == i
    sl = basis.j_slice(1)
    assert np.all(basis.J[sl] == 1) and sl.stop - sl.start == 96


def test_field_config():
    pole = model.VibPole(0, 1e15, 1e5)
    f = FieldConfig.at_detuning(pole, 2e9, B=181, theta=np.pi / 2)
    assert f.detuning(pole) == pytest.approx(2e9)
    assert f.replace(E=0.2).E == 0.2
    with pytest.raises(ValueError):
        FieldConfig(B=-1)
    with pytest.raises(ValueError):
        FieldConfig(theta=2.0)


def test_pole_validation():
    with pytest.raises(ParamFileError):
        model.VibPole(0, 1e15, 0.0)
    with pytest.raises(ParamFileError):
        model.VibPole(0, 1e6, 1e5)

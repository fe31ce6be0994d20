import csv
import subprocess
import sys

import numpy as np
import pytest

from molmagic import cli


def _read(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return header, rows


@pytest.mark.parametrize(
    "text, kind, value",
    [("181G", "B", 181.0), ("0.2kV/cm", "E", 0.2), ("90deg", "angle", np.pi / 2), ("1.5", "f", 1.5),
     ("2 THz", "f", 2000.0), ("0.01T", "B", 100.0)],
)
def test_parse_quantity(text, kind, value):
    assert cli.parse_quantity(text, kind) == pytest.approx(value)


@pytest.mark.parametrize("text", ["abc", "5 furlongs", "3kV/cm"])
def test_parse_quantity_rejects(text):
    with pytest.raises(cli.SpecError):
        cli.parse_quantity(text, "B")


def test_parse_range():
    assert cli.parse_range("-6:6GHz:241", "f") == (-6.0, 6.0, 241)
    assert cli.parse_range("100MHz:2GHz", "f", count=False) == pytest.approx((0.1, 2.0))
    for bad in ("6:-6GHz:10", "0:1GHz", "0:1GHz:x", "0:1GHz:1"):
        with pytest.raises(cli.SpecError):
            cli.parse_range(bad, "f")
    var, grid = cli.parse_scan("E:0:0.3kV/cm:4")
    assert var == "E" and grid[-1] == pytest.approx(0.3) and len(grid) == 4


def test_spectrum_csv(tmp_path):
    out = tmp_path / "zeeman.csv"
    assert cli.main(["spectrum", "--scan", "B:0:200G:5", "--Jmax", "0", "--out", str(out)]) == 0
    header, rows = _read(out)
    assert header[0].startswith("# molmagic ")
    assert "sha256=" in header[1]
    assert len(rows) == 5 * 32
    assert list(rows[0]) == ["scan_value", "level_index", "energy_Hz", "J_dominant", "M_dominant",
                             "target_flag", "overlap"]
    last = [r for r in rows if float(r["scan_value"]) == 200.0]
    assert sum(int(r["target_flag"]) for r in last) == 1


def test_output_is_reproducible(tmp_path):
    out = tmp_path / "stark.csv"
    argv = ["spectrum", "--scan", "E:0:0.2kV/cm:3", "--Jmax", "1", "--J", "1", "--out", str(out)]
    assert cli.main(argv) == 0
    first = out.read_bytes()
    assert cli.main(argv) == 0
    assert out.read_bytes() == first
    _, rows = _read(out)
    assert len(rows) == 3 * 96


def test_intensity_scan_needs_detuning(tmp_path, capsys):
    assert cli.main(["spectrum", "--scan", "I:0:100W/cm2:3", "--out", str(tmp_path / "x.csv")]) == 2
    assert "detuning" in capsys.readouterr().err


def test_bad_inputs_exit_2(tmp_path):
    assert cli.main(["spectrum", "--scan", "B:5:0G:3"]) == 2
    assert cli.main(["spectrum", "--scan", "B:0:5G:3", "--molecule", str(tmp_path / "none.params")]) == 2
    bad = tmp_path / "bad.params"
    bad.write_text("name = X\n")
    assert cli.main(["spectrum", "--scan", "B:0:5G:3", "--molecule", str(bad)]) == 2


def test_polarizability_and_plot_script(tmp_path):
    out = tmp_path / "alpha.csv"
    script = tmp_path / "plot.py"
    rc = cli.main(["polarizability", "--detuning", "210:225GHz:4", "--J", "0,1", "--mode", "analytic",
                   "--imag", "--out", str(out), "--plot-script", str(script)])
    assert rc == 0
    _, rows = _read(out)
    assert len(rows) == 8
    assert all(float(r["alpha_im_kHz_per_Wcm2"]) <= 0 for r in rows)
    assert all(0.03 < float(r["alpha_re_kHz_per_Wcm2"]) < 0.04 for r in rows)
    compile(script.read_text(), str(script), "exec")
    assert str(out) in script.read_text()


def test_polarizability_flags_excluded_points(tmp_path):
    out = tmp_path / "alpha.csv"
    rc = cli.main(["polarizability", "--detuning=-0.01:0.01GHz:3", "--J", "0", "--mode", "analytic",
                   "--out", str(out)])
    assert rc == 0
    _, rows = _read(out)
    assert [r["flag"] for r in rows] == ["error", "error", "error"]


def test_magic_screen(capsys, tmp_path):
    out = tmp_path / "screen.csv"
    assert cli.main(["magic", "screen", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    verdicts = [line.split()[-1] for line in text.splitlines()[1:]]
    assert verdicts == ["pass", "pass", "pass", "fail"]
    _, rows = _read(out)
    assert "0-1@" in rows[0]["crossings_GHz"]


def test_magic_pair_not_found_exit_4(capsys):
    rc = cli.main(["magic", "pair", "--mode", "analytic", "--theta", "0deg", "--E", "0.2kV/cm",
                   "--bracket", "1.2:6GHz"])
    assert rc == 4
    assert "no crossing" in capsys.readouterr().err


def test_magic_pair_analytic(capsys):
    rc = cli.main(["magic", "pair", "--mode", "analytic", "--theta", "90deg", "--bracket", "2.3:3GHz"])
    assert rc == 0
    assert "2.66" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "molmagic", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "molmagic" in res.stdout

"""Command-line front end.

Examples::

    molmagic spectrum --molecule rbcs.params --scan B:0:200G:201 --Jmax 2 --out zeeman.csv
    molmagic polarizability --pole 0 --detuning -6:6GHz:241 --J 0,1 --theta 90deg --E 0.2kV/cm
    molmagic magic triple --molecule rbcs.params --pole 0 --E 0:0.3kV/cm
    molmagic magic screen --molecule rbcs.params

Exit codes: 0 success, 2 bad arguments or input file, 3 numerical failure,
4 requested crossing not found.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import magic as mg
from . import polarizability as pz
from . import spectra
from . import units as u
from .model import FieldConfig, ParamFileError, load_molecule, resolve_molecule_path

EXIT_SPEC, EXIT_NUMERIC, EXIT_NOT_FOUND = 2, 3, 4

_UNITS = {
    "G": ("B", 1.0), "gauss": ("B", 1.0), "T": ("B", 1e4), "mT": ("B", 10.0),
    "kV/cm": ("E", 1.0), "V/cm": ("E", 1e-3),
    "W/cm2": ("I", 1.0), "kW/cm2": ("I", 1e3), "mW/cm2": ("I", 1e-3),
    "Hz": ("f", 1e-9), "kHz": ("f", 1e-6), "MHz": ("f", 1e-3), "GHz": ("f", 1.0), "THz": ("f", 1e3),
    "deg": ("angle", np.pi / 180), "rad": ("angle", 1.0),
}
_DEFAULT_UNIT = {"B": "G", "E": "kV/cm", "I": "W/cm2", "f": "GHz", "angle": "deg"}
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class SpecError(ValueError):
    pass


def parse_quantity(text: str, kind: str) -> float:
    """'181G' -> 181.0 (gauss); '90deg' -> pi/2; unit defaults per kind."""
    m = re.fullmatch(rf"\s*({_NUM})\s*([A-Za-z/0-9]*)\s*", text)
    if not m:
        raise SpecError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2) or _DEFAULT_UNIT[kind]
    if unit not in _UNITS or _UNITS[unit][0] != kind:
        raise SpecError(f"unit {unit!r} is not valid for {kind}")
    return value * _UNITS[unit][1]


def _split_unit(text: str) -> tuple[str, str]:
    m = re.fullmatch(rf"(.*?{_NUM})\s*([A-Za-z/][A-Za-z/0-9]*)?", text.strip())
    if not m:
        raise SpecError(f"cannot parse {text!r}")
    return m.group(1), m.group(2) or ""


def parse_range(text: str, kind: str, count: bool = True):
    """'lo:hiUNIT[:n]' -> (lo, hi[, n]); the unit on hi applies to both ends unless lo has its own."""
    parts = text.split(":")
    if len(parts) != (3 if count else 2):
        raise SpecError(f"expected lo:hi{':n' if count else ''}, got {text!r}")
    hi_num, unit = _split_unit(parts[1])
    lo_txt = parts[0] if re.search(r"[A-Za-z]", parts[0]) else parts[0] + unit
    lo = parse_quantity(lo_txt, kind)
    hi = parse_quantity(hi_num + unit, kind)
    if not lo < hi:
        raise SpecError(f"range {text!r} must satisfy lo < hi")
    if not count:
        return lo, hi
    try:
        n = int(parts[2])
    except ValueError as exc:
        raise SpecError(f"point count {parts[2]!r} is not an integer") from exc
    if n < 2:
        raise SpecError("a range needs at least two points")
    return lo, hi, n


def parse_scan(text: str):
    """'B:0:200G:201' -> ('B', grid)."""
    var, _, rest = text.partition(":")
    if var not in ("B", "E", "I"):
        raise SpecError(f"scan variable must be B, E or I, not {var!r}")
    lo, hi, n = parse_range(rest, var)
    return var, np.linspace(lo, hi, n)


def parse_js(text: str) -> list[int]:
    try:
        js = sorted({int(x) for x in text.split(",")})
    except ValueError as exc:
        raise SpecError(f"bad J list {text!r}") from exc
    if min(js) < 0:
        raise SpecError("J must be non-negative")
    return js


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    return "nan" if np.isnan(x) else format(x, ".12g")


@dataclass
class ScanSpec:
    command: str
    molecule: Path
    argv: list[str] = field(default_factory=list)

    def header(self) -> list[str]:
        digest = hashlib.sha256(self.molecule.read_bytes()).hexdigest()
        return [
            f"# molmagic {__version__}",
            f"# molecule {self.molecule.name} sha256={digest}",
            "# spec " + " ".join(self.argv),
        ]


def write_csv(path, spec: ScanSpec, columns: list[str], rows) -> str:
    buf = io.StringIO()
    for line in spec.header():
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


# --- subcommands ----------------------------------------------------------------

def _fields(args, **override) -> FieldConfig:
    kw = dict(
        B=parse_quantity(args.B, "B"),
        E=parse_quantity(args.E, "E") if isinstance(args.E, str) and ":" not in args.E else 0.0,
        theta=parse_quantity(args.theta, "angle"),
    )
    kw.update(override)
    return FieldConfig(**kw)


def cmd_spectrum(args, spec: ScanSpec, params) -> int:
    var, grid = parse_scan(args.scan)
    fields = _fields(args)
    if var == "B":
        scan = spectra.zeeman_map(params, grid, fields.E, args.Jmax, workers=args.workers)
    elif var == "E":
        scan = spectra.dcstark_map(params, grid, fields.B, args.Jmax, workers=args.workers)
    else:
        if args.detuning is None:
            raise SpecError("an intensity scan needs --detuning")
        pole = params.pole(args.pole)
        f = FieldConfig.at_detuning(pole, u.angular(parse_quantity(args.detuning, "f"), "GHz"),
                                    B=fields.B, E=fields.E, theta=fields.theta)
        scan = spectra.ac_map(params, grid, f, max(args.Jmax, 1), workers=args.workers)

    cols = np.arange(scan.nlevels)
    if args.J is not None:
        cols = np.flatnonzero(scan.J_dominant[0] == args.J)
    targets = np.zeros(scan.energies.shape, dtype=bool)
    if var == "I":
        for t, k in enumerate(scan.target):
            if k >= 0:
                targets[t, k] = True
    else:
        basis = spectra.build_basis(params, args.Jmax + (1 if var == "E" else 0))
        for J in range(args.Jmax + 1):
            spectra.mark_target(scan, params, basis, J)
            for t, k in enumerate(scan.target):
                if k >= 0:
                    targets[t, k] = True
    rows = []
    for t, x in enumerate(scan.grid):
        for i in cols:
            ov = 1.0 if t == 0 else scan.overlaps[t - 1, i]
            rows.append((x, int(i), u.energy_to_hz(scan.energies[t, i]), int(scan.J_dominant[t, i]),
                         int(scan.M_dominant[t, i]), int(targets[t, i]), ov))
    write_csv(args.out, spec, ["scan_value", "level_index", "energy_Hz", "J_dominant",
                               "M_dominant", "target_flag", "overlap"], rows)
    if scan.jumps:
        print(f"warning: {len(scan.jumps)} low-overlap steps flagged", file=sys.stderr)
    return 0


PLOT_TEMPLATE = '''"""Plot {csv} (generated by molmagic {version})."""
import csv
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(l for l in open({csv!r}) if not l.startswith("#"))]
fig, ax = plt.subplots()
for key in sorted({{(r["J"], r["mode"]) for r in rows}}):
    sel = [r for r in rows if (r["J"], r["mode"]) == key]
    ax.plot([float(r["detuning_GHz"]) for r in sel],
            [float(r["{column}"]) for r in sel], label="J=%s (%s)" % key)
ax.set_xlabel("detuning / GHz")
ax.set_ylabel("{ylabel}")
ax.legend()
plt.show()
'''


def cmd_polarizability(args, spec: ScanSpec, params) -> int:
    pole = params.pole(args.pole)
    lo, hi, n = parse_range(args.detuning, "f")
    det = u.angular(np.linspace(lo, hi, n), "GHz")
    Js = parse_js(args.J)
    fields = _fields(args)
    modes = ["numeric", "analytic"] if args.mode == "both" else [args.mode]
    rows = []
    for mode in modes:
        kw = {"Jmax": args.Jmax, "I0": args.I0} if mode == "numeric" else {}
        res = pz.scan_alpha(params, fields, Js, pole, det, mode, imag=args.imag,
                            workers=args.workers, **kw)
        for i, d in enumerate(det):
            for J in Js:
                im = res.alpha_imag[J][i] if res.alpha_imag else None
                flag = "error" if i in res.errors else "ok"
                rows.append((u.to_freq(d, "GHz"), J, res.alpha[J][i], im, mode, res.weights[J][i], flag))
    rows.sort(key=lambda r: (r[0], r[1], r[4]))
    write_csv(args.out, spec, ["detuning_GHz", "J", "alpha_re_kHz_per_Wcm2", "alpha_im_kHz_per_Wcm2",
                               "mode", "target_weight", "flag"], rows)
    if args.plot_script:
        if args.out in (None, "-"):
            raise SpecError("--plot-script needs --out")
        column = "alpha_im_kHz_per_Wcm2" if args.imag else "alpha_re_kHz_per_Wcm2"
        Path(args.plot_script).write_text(PLOT_TEMPLATE.format(
            csv=str(args.out), version=__version__, column=column,
            ylabel=("Im" if args.imag else "Re") + " alpha / h kHz/(W/cm^2)"))
    return 0


def cmd_magic(args, spec: ScanSpec, params) -> int:
    out_rows, columns = [], []
    if args.kind == "screen":
        rows = mg.screen_poles(params, margin=args.margin)
        print(f"{'vprime':>6} {'Gamma/2pi kHz':>14} {'lower kHz':>10} {'ratio':>8} "
              f"{'upper kHz':>12} {'ratio':>9} {'Dcr GHz':>9} verdict")
        columns = ["vprime", "gamma_kHz", "lower_kHz", "ratio_lower", "upper_kHz", "ratio_upper",
                   "delta_cr_GHz", "verdict", "crossings_GHz"]
        for r in rows:
            up = None if r.upper is None else u.to_freq(r.upper, "kHz")
            print(f"{r.vprime:>6} {u.to_freq(r.gamma, 'kHz'):>14.4g} {u.to_freq(r.lower, 'kHz'):>10.4g} "
                  f"{r.ratio_lower:>8.3g} {'-' if up is None else format(up, '.4g'):>12} "
                  f"{'-' if r.ratio_upper is None else format(r.ratio_upper, '.3g'):>9} "
                  f"{u.to_freq(r.delta_cr, 'GHz'):>9.4g} {r.verdict}")
            cross = ";".join(f"{c.Ja}-{c.Jb}@{fmt(c.detuning_GHz)}" for c in r.crossings)
            out_rows.append((r.vprime, u.to_freq(r.gamma, "kHz"), u.to_freq(r.lower, "kHz"), r.ratio_lower,
                             up, r.ratio_upper, u.to_freq(r.delta_cr, "GHz"), r.verdict, cross))
    else:
        pole = params.pole(args.pole)
        fields = _fields(args)
        kw = {"Jmax": args.Jmax} if args.mode == "numeric" else {}
        if args.kind == "pair":
            lo, hi = parse_range(args.bracket, "f", count=False)
            try:
                c = mg.find_pair_crossing(params, fields, args.Ja, args.Jb, pole,
                                          (u.angular(lo, "GHz"), u.angular(hi, "GHz")), args.mode, **kw)
            except mg.NoSignChangeError as exc:
                print(f"no crossing: {exc}", file=sys.stderr)
                return EXIT_NOT_FOUND
            print(f"J={c.Ja}/J={c.Jb} crossing at {c.detuning_GHz:.6g} GHz, alpha = {c.alpha:.6g} h kHz/(W/cm^2)")
            columns = ["Ja", "Jb", "detuning_GHz", "alpha_kHz_per_Wcm2", "mode"]
            out_rows.append((c.Ja, c.Jb, c.detuning_GHz, c.alpha, c.mode))
        elif args.kind == "triple":
            E_lo, E_hi = parse_range(args.E, "E", count=False) if ":" in args.E else (0.0, 0.0)
            det = None
            if args.bracket:
                lo, hi = parse_range(args.bracket, "f", count=False)
                det = (u.angular(lo, "GHz"), u.angular(hi, "GHz"))
            try:
                r = mg.find_triple_magic(params, fields, pole, (E_lo, E_hi), det, args.mode, **kw)
            except mg.NoRootError as exc:
                print(f"no triple point: {exc}", file=sys.stderr)
                return EXIT_NOT_FOUND
            print(f"E* = {r.E:.4g} kV/cm, detuning = {u.to_freq(r.detuning, 'GHz'):.6g} GHz, "
                  f"alpha = {r.alpha:.6g} h kHz/(W/cm^2), residual {u.to_freq(r.g, 'MHz'):.3g} MHz, "
                  f"{'converged' if r.converged else 'NOT converged'}")
            columns = ["E_kV_per_cm", "detuning_GHz", "alpha_kHz_per_Wcm2", "residual_MHz", "converged"]
            out_rows.append((r.E, u.to_freq(r.detuning, "GHz"), r.alpha, u.to_freq(r.g, "MHz"), int(r.converged)))
            if not r.converged:
                print("triple point did not converge", file=sys.stderr)
                return EXIT_NOT_FOUND
        elif args.kind == "window":
            lo, hi = parse_range(args.window, "f", count=False)
            Js = parse_js(args.J)
            thetas = np.deg2rad(np.arange(0, 91, 15))
            w = mg.window_report(params, fields, Js, pole, (u.angular(lo, "GHz"), u.angular(hi, "GHz")),
                                 n=args.points, mode=args.mode, thetas=thetas, **kw)
            print(f"window {lo:g}-{hi:g} GHz: max pairwise difference {w.max_percent:.4g}%, "
                  f"alpha_1 spread over theta {100 * w.theta_spread:.3g}%")
            columns = ["Ja", "Jb", "max_percent"]
            out_rows = [(a, b, v) for (a, b), v in sorted(w.pair_percent.items())]
    if args.out:
        write_csv(args.out, spec, columns, out_rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molmagic", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"molmagic {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--molecule", default="rbcs.params", help="parameter file (bundled name or path)")
        sp.add_argument("--B", default="181G")
        sp.add_argument("--E", default="0kV/cm")
        sp.add_argument("--theta", default="0deg")
        sp.add_argument("--Jmax", type=int, default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("spectrum", help="Zeeman, Stark or light-shift maps")
    common(sp)
    sp.add_argument("--scan", required=True, help="B:lo:hiG:n, E:lo:hikV/cm:n or I:lo:hiW/cm2:n")
    sp.add_argument("--J", type=int, default=None, help="only levels of this J")
    sp.add_argument("--pole", type=int, default=0)
    sp.add_argument("--detuning", default=None, help="laser detuning for intensity scans")

    sp = sub.add_parser("polarizability", help="alpha_J versus detuning")
    common(sp)
    sp.add_argument("--pole", type=int, default=0)
    sp.add_argument("--detuning", required=True, help="lo:hiGHz:n")
    sp.add_argument("--J", default="0,1")
    sp.add_argument("--mode", choices=("numeric", "analytic", "both"), default="numeric")
    sp.add_argument("--imag", action="store_true")
    sp.add_argument("--I0", type=float, default=pz.DEFAULT_I0, help="probe intensity, W/cm^2")
    sp.add_argument("--plot-script", default=None)

    sp = sub.add_parser("magic", help="magic crossings, windows and screening")
    sp.add_argument("kind", choices=("pair", "triple", "window", "screen"))
    common(sp)
    sp.add_argument("--pole", type=int, default=0)
    sp.add_argument("--Ja", type=int, default=0)
    sp.add_argument("--Jb", type=int, default=1)
    sp.add_argument("--J", default="0,1,2")
    sp.add_argument("--bracket", default=None, help="detuning bracket lo:hiGHz")
    sp.add_argument("--window", default="216:219GHz")
    sp.add_argument("--points", type=int, default=31)
    sp.add_argument("--mode", choices=("numeric", "analytic"), default="numeric")
    sp.add_argument("--margin", type=float, default=5.0)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.Jmax is None:
        args.Jmax = 2 if args.command == "spectrum" else pz.DEFAULT_JMAX
    if args.command == "magic" and args.kind == "pair" and args.bracket is None:
        parser.error("magic pair needs --bracket")
    try:
        path = resolve_molecule_path(args.molecule)
        params = load_molecule(path)
        spec = ScanSpec(args.command, path, argv)
        handler = {"spectrum": cmd_spectrum, "polarizability": cmd_polarizability, "magic": cmd_magic}
        return handler[args.command](args, spec, params)
    except (SpecError, ParamFileError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (spectra.DiagonalizationError, spectra.TargetNotFound, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

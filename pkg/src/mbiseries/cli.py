"""Command-line interface.

Commands: ``coeffs``, ``radius``, ``certify``, ``solve`` and ``verify``.
Exit codes: 0 ok, 2 configuration error, 3 not certified, 4 field-strength
bound violated, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import SCHEMA_VERSION, RunConfig
from .convergence import (COEFF_CAP, MODES, certify, critical_points, electrostatic_radius,
                          majorant_sequence, q_ratio)
from .errors import ConfigError, FieldStrengthError, MBIError
from .fieldio import read_mbif, read_vtk, write_mbif, write_vtk
from .pipeline import json_safe, seed_run, solve
from .series import reconstruct_EB, residuals
from .sources import build_sources

EXIT_OK, EXIT_CONFIG, EXIT_UNCERTIFIED, EXIT_FIELD_STRENGTH, EXIT_NUMERICAL = 0, 2, 3, 4, 5
FIELD_NAMES = ("D", "H", "E", "B")

log = logging.getLogger("mbiseries")


def resolve_threads(flag):
    if flag is not None:
        n = flag
    elif os.environ.get("MBI_THREADS"):
        try:
            n = int(os.environ["MBI_THREADS"])
        except ValueError:
            raise ConfigError(f"MBI_THREADS must be an integer, got {os.environ['MBI_THREADS']!r}")
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError(f"thread count must be positive, got {n}")
    return n


def _emit(report, out_dir=None, name="report.json"):
    text = json.dumps(json_safe(report), indent=2, allow_nan=False)
    print(text)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")


def _load_config(args):
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = RunConfig.load(args.config)
    if args.beta is not None:
        cfg.beta = args.beta
    if args.order is not None:
        cfg.order = args.order
    if args.mode is not None:
        cfg.mode = args.mode
    cfg.__post_init__()
    return cfg


def cmd_coeffs(args):
    n = args.n if args.n is not None else (args.order if args.order is not None else 29)
    if n < 0 or n > COEFF_CAP:
        raise ConfigError(f"coefficient index must lie in [0, {COEFF_CAP}], got {n}")
    seq = majorant_sequence(n + 1)
    rows = []
    for row in seq.table():
        r = seq.R[row["k"]]
        rows.append({"k": row["k"],
                     "R": row["R"] if args.exact else float(r),
                     "S": row["S"]})
    if args.json:
        _emit({"schema_version": SCHEMA_VERSION, "command": "coeffs", "exact": args.exact,
               "rows": rows}, args.out, "coeffs.json")
    else:
        for row in rows:
            value = row["R"] if args.exact else f"{row['R']:.17g}"
            print(f"{row['k']}\t{value}\tS_{row['k'] + 1}={row['S']}")
    return EXIT_OK


def cmd_radius(args):
    report = critical_points()
    q = q_ratio()
    _emit({"schema_version": SCHEMA_VERSION, "command": "radius",
           "radius": report.radius, "electrostatic_radius": electrostatic_radius(),
           "q": q.q, "four_q": 4 * q.q, "last_ratio": q.last_ratio, "last_ratio_k": q.last_k,
           "critical_points": report.to_dict()}, args.out, "radius.json")
    return EXIT_OK


def cmd_certify(args):
    if args.config:
        cfg = _load_config(args)
        seed = seed_run(cfg, resolve_threads(args.threads))
        cert = seed.certificate()
        extra = {"seed_norms": {"D": seed.norm_D.to_dict(), "H": seed.norm_H.to_dict()}}
    else:
        if args.beta is None or args.norm_d is None or args.norm_h is None:
            raise ConfigError("certify needs --config, or --beta with --norm-d and --norm-h")
        cert = certify(args.beta, args.norm_d, args.norm_h,
                       args.order if args.order is not None else 4,
                       args.mode or "em", safety=args.safety)
        extra = {}
    _emit({"schema_version": SCHEMA_VERSION, "command": "certify",
           "certificate": cert.to_dict(), **extra}, args.out, "certificate.json")
    return EXIT_OK if cert.certified else EXIT_UNCERTIFIED


def _write_fields(fields, out_dir, outputs):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if outputs.get("binary", True):
        for name, f in fields.items():
            write_mbif(out / f"{name}.mbif", f)
            written.append(f"{name}.mbif")
    if outputs.get("vtk", True):
        write_vtk(out / "fields.vtk", fields)
        written.append("fields.vtk")
    return written


def cmd_solve(args):
    cfg = _load_config(args)
    result = solve(cfg, force=args.force, workers=resolve_threads(args.threads))
    if args.out is not None:
        result.report["files"] = _write_fields(result.fields, args.out, cfg.outputs)
    _emit(result.report, args.out)
    return EXIT_OK


def _read_fields(path):
    path = Path(path)
    fields = {}
    for name in FIELD_NAMES:
        f = path / f"{name}.mbif"
        if f.exists():
            fields[name] = read_mbif(f)
    if len(fields) < len(FIELD_NAMES) and (path / "fields.vtk").exists():
        vtk = read_vtk(path / "fields.vtk")
        for name in FIELD_NAMES:
            fields.setdefault(name, vtk.get(name))
    missing = [n for n in FIELD_NAMES if fields.get(n) is None]
    if missing:
        raise ConfigError(f"{path}: missing fields {missing}")
    return fields


def cmd_verify(args):
    cfg = _load_config(args)
    fields = _read_fields(args.fields)
    if fields["D"].grid != cfg.grid:
        raise ConfigError("field files were written on a different grid than the config")
    pair = build_sources(cfg.sources, cfg.grid)
    res = residuals(fields["E"], fields["B"], fields["D"], fields["H"], pair.rho, pair.j)
    E, B = reconstruct_EB(fields["D"], fields["H"], cfg.beta)
    law = {"E": (E - fields["E"]).max_abs(), "B": (B - fields["B"]).max_abs()}
    _emit({"schema_version": SCHEMA_VERSION, "command": "verify", "beta": cfg.beta,
           "residuals": res, "aether_law_mismatch": law}, args.out, "verify.json")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--order", type=int, help="truncation order K")
    common.add_argument("--beta", type=float, help="Born's field-strength parameter")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--exact", action="store_true", help="print exact rationals")
    common.add_argument("--force", action="store_true", help="run even when not certified")
    common.add_argument("--threads", type=int, help="worker threads (default: MBI_THREADS or all cores)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mbiseries", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("coeffs", parents=[common], help="majorant coefficients R_k and S_k")
    p.add_argument("n", nargs="?", type=int, help="largest index k (default 29)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_coeffs)
    p = sub.add_parser("radius", parents=[common], help="radius of convergence and critical points")
    p.set_defaults(func=cmd_radius)
    p = sub.add_parser("certify", parents=[common], help="convergence certificate")
    p.add_argument("--norm-d", type=float)
    p.add_argument("--norm-h", type=float)
    p.add_argument("--safety", type=float, default=2.0)
    p.set_defaults(func=cmd_certify)
    p = sub.add_parser("solve", parents=[common], help="compute D, H, E, B")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", parents=[common], help="residuals of stored fields")
    p.add_argument("fields", help="directory written by solve")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FieldStrengthError as exc:
        print(f"error: {exc}; first nodes: {exc.nodes[:5]}", file=sys.stderr)
        return EXIT_FIELD_STRENGTH
    except MBIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

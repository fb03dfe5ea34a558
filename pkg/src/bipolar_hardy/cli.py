"""Command-line entry point.

Usage::

    bipolar-hardy residual --samples 500
    bipolar-hardy integrate --integrand grad_phi_p --out-json energy.json
    bipolar-hardy scan-sharpness --eps0-frac 0.1 --out-csv scan.csv
    bipolar-hardy --config desk.cfg positivity

Exit status: 0 when every verdict of the run holds, 2 when one fails, 1 on a
usage, configuration or IO error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError
from .report import EXIT_USAGE, ExperimentSpec, run

log = logging.getLogger("bipolar_hardy")


def _point(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _pairs(text):
    out = []
    for item in text.split(","):
        N, p = item.split(":")
        out.append((int(N), float(p)))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bipolar-hardy",
                                 description="Bipolar Hardy inequality experiments")
    ap.add_argument("--config", help="key=value file with dimension, p, pole1, pole2")
    ap.add_argument("--dimension", type=int)
    ap.add_argument("--p", type=float)
    ap.add_argument("--pole1", type=_point, help='e.g. "-1,0,0,0"')
    ap.add_argument("--pole2", type=_point)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-json")
    ap.add_argument("--out-csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="V1, V2, V on a (t, rho) lattice")
    p.add_argument("--t-min", type=float, default=-3.0)
    p.add_argument("--t-max", type=float, default=3.0)
    p.add_argument("--rho-min", type=float, default=0.0)
    p.add_argument("--rho-max", type=float, default=3.0)
    p.add_argument("--nt", type=int, default=13)
    p.add_argument("--nrho", type=int, default=7)

    p = sub.add_parser("extremal", help="phi, |grad phi|, theta_eps, u_eps along a ray")
    p.add_argument("--center", choices=["pole1", "pole2", "midpoint"], default="pole1")
    p.add_argument("--angle", type=float, default=90.0, help="degrees from the axis")
    p.add_argument("--r-min", type=float, default=1e-3)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--eps", type=float, default=1e-3)

    p = sub.add_parser("residual", help="finite-difference supersolution residual")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--sampler", choices=["annulus", "axis", "bisector"], default="annulus")

    def grid_args(q):
        q.add_argument("--cells-per-decade", type=int)
        q.add_argument("--gauss-order", type=int)
        q.add_argument("--R", type=float)

    p = sub.add_parser("integrate", help="one named integral")
    p.add_argument("--integrand", default="grad_phi_p",
                   choices=["grad_phi_p", "V_phi_p", "V1_phi_p", "V2_phi_p", "gaussian", "ball"])
    grid_args(p)

    p = sub.add_parser("convergence", help="refinement table for a named integral")
    p.add_argument("--integrand", default="grad_phi_p",
                   choices=["grad_phi_p", "V_phi_p", "V1_phi_p", "V2_phi_p", "gaussian", "ball"])
    p.add_argument("--levels", type=_ints, default=(2, 4, 8, 16))
    p.add_argument("--R", type=float)

    tests = ["phi", "phi_truncated", "u_eps", "plane_bump", "pole_bump"]
    p = sub.add_parser("quotient", help="Rayleigh quotient of a test function")
    p.add_argument("--u", choices=tests, default="phi")
    p.add_argument("--W", choices=["V", "V1", "V2"], default="V")
    p.add_argument("--eps", type=float)
    grid_args(p)

    p = sub.add_parser("gap", help="int |grad u|^p - mu int W |u|^p")
    p.add_argument("--u", choices=tests, default="u_eps")
    p.add_argument("--W", choices=["V", "V1", "V2"], default="V")
    p.add_argument("--mu", type=float)
    p.add_argument("--eps", type=float)
    grid_args(p)

    p = sub.add_parser("scan-sharpness", help="I_eps, J_eps, L[u_eps] along an eps sequence")
    p.add_argument("--eps0-frac", type=float, default=0.1, help="eps0 in units of mu1")
    p.add_argument("--eps-hi", type=float, default=1e-2)
    p.add_argument("--eps-lo", type=float, default=1e-5)
    p.add_argument("--n-eps", type=int, default=8)

    p = sub.add_parser("scan-family", help="quotient of (r1 r2)^alpha over alpha")
    p.add_argument("--alpha-lo", type=float, default=-0.3)
    p.add_argument("--alpha-hi", type=float, default=-0.1)
    p.add_argument("--n-alpha", type=int, default=9)
    p.add_argument("--R", type=float, default=1e8)

    p = sub.add_parser("shafrir", help="random check of the pointwise inequality")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--ps", type=_floats, default=(2.0, 2.5, 3.0, 4.0, 6.0))
    p.add_argument("--dims", type=_ints, default=(1, 2, 3, 4, 5))

    p = sub.add_parser("positivity", help="sampled V >= 0 over several (N, p)")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--pairs", type=_pairs, default=((4, 1.5), (4, 2.0), (4, 3.0), (5, 3.9), (5, 4.5)),
                   help='e.g. "4:1.5,4:3"')
    return ap


_GLOBAL = {"config", "dimension", "p", "pole1", "pole2", "seed", "workers",
           "out_json", "out_csv", "verbose", "command"}


def spec_from_args(args) -> ExperimentSpec:
    params = {k: v for k, v in vars(args).items() if k not in _GLOBAL and v is not None}
    config = {k: getattr(args, k) for k in ("dimension", "p", "pole1", "pole2")
              if getattr(args, k) is not None}
    return ExperimentSpec(command=args.command, config=config, config_file=args.config,
                          params=params, out_json=args.out_json, out_csv=args.out_csv,
                          seed=args.seed, workers=args.workers)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    spec = spec_from_args(args)
    try:
        report = run(spec)
    except (ConfigError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not spec.out_json:
        print(report.to_json())
    for name, ok in report.verdicts.items():
        log.info("%s: %s", name, "ok" if ok else "FAILED")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())

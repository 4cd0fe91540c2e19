"""Command-line interface.

Subcommands: ``analyze`` (run the certificate pipeline on a config),
``simulate`` (audit a certificate by seeded switched simulation),
``figure-rho`` (certified-radius curve of the built-in analytic family),
``selftest`` (internal consistency checks), ``example1``/``example2``
(write ready-made configs).

Exit codes: analyze returns 0 on a certificate, 2 when the Jacobian
algebra is unsolvable, 3 when the scheme condition (or the stability
assumption) fails, 4 when the weight series diverges.  simulate returns
5 when the audit flags a violation.  selftest returns 1 on failure.
Usage and config errors exit with 2 via the argument parser.
"""

import argparse
import json
import math
import sys

from . import koopman
from .analysis import (
    analyze_family,
    export_epsilon_csv,
    export_ratios_csv,
    load_report,
)
from .certificate import CommonLyapunovFunction
from .config import SystemConfig, example1_config, example2_config
from .multiindex import build_basis
from .selftest import run_selftest
from .switchsim import (
    audit_certificate,
    export_run_csv,
    integrate_switched,
    random_signal,
    sample_initial_points,
)


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_config(parser, path):
    try:
        with open(path) as fh:
            return SystemConfig.from_json(fh.read())
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")
    except (ValueError, KeyError) as exc:
        parser.error(f"invalid config: {exc}")


def cmd_analyze(parser, args):
    cfg = _load_config(parser, args.config)
    degree = args.degree if args.degree is not None else cfg.truncation_degree
    scheme = args.scheme if args.scheme is not None else cfg.scheme_kind
    xi = args.xi if args.xi is not None else cfg.xi
    kappa = args.kappa if args.kappa is not None else cfg.kappa
    rho_request = args.rho if args.rho is not None else cfg.rho_request
    try:
        report = analyze_family(
            cfg.build_family(),
            degree,
            scheme_kind=scheme,
            xi=xi,
            kappa=kappa,
            eta=cfg.eta,
            rho_request=rho_request,
        )
    except ValueError as exc:
        parser.error(str(exc))
    if args.format == "json":
        _write_text(args.out, report.to_json())
    else:
        if report.epsilon is None:
            parser.error("analysis stopped before weights were computed; "
                         "no CSV to write")
        prefix = args.out if args.out not in (None, "-") else "report"
        with open(prefix + ".epsilon.csv", "w") as fh:
            export_epsilon_csv(report, fh)
        with open(prefix + ".ratios.csv", "w") as fh:
            export_ratios_csv(report, fh)
    if report.certified:
        sys.stderr.write(
            f"certified: rho={report.rho_certified!r} "
            f"scheme={report.scheme_kind}\n"
        )
    else:
        sys.stderr.write(f"not certified: {report.failure['message']}\n")
    return report.exit_code


def cmd_simulate(parser, args):
    cfg = _load_config(parser, args.config)
    try:
        with open(args.report) as fh:
            report = load_report(json.load(fh))
    except OSError as exc:
        parser.error(f"cannot read report: {exc}")
    except (KeyError, ValueError, TypeError) as exc:
        parser.error(f"invalid report: {exc}")
    if report.epsilon is None or report.rho_certified is None:
        parser.error("report holds no certificate to audit")
    sim = cfg.simulation
    signals = args.trials if args.trials is not None else sim.trials
    seed = args.seed if args.seed is not None else sim.seed
    dt = args.dt if args.dt is not None else sim.dt
    if signals < 1:
        parser.error("trials must be >= 1")
    family = cfg.build_family()
    summary = audit_certificate(
        family,
        report,
        signals=signals,
        points=args.points if args.points is not None else sim.points,
        seed=seed,
        dt=dt,
        horizon=sim.horizon,
        min_dwell=sim.min_dwell,
        max_dwell=sim.max_dwell,
    )
    _write_text(
        args.out,
        json.dumps(summary.to_json_dict(), sort_keys=True, indent=2) + "\n",
    )
    if args.trace is not None:
        basis = build_basis(report.dimension, report.truncation_degree)
        clf = CommonLyapunovFunction(
            report.epsilon,
            report.P_inv,
            basis,
            ratio=(report.convergence or {}).get("ratio"),
        )
        pts = sample_initial_points(
            report.dimension, 0.95 * report.rho_certified, 1, seed
        )
        sig = random_signal(
            len(family), sim.horizon, sim.min_dwell, sim.max_dwell, seed=seed
        )
        run = integrate_switched(family, sig, (report.P @ pts[0]), dt=dt, clf=clf)
        with open(args.trace, "w") as fh:
            export_run_csv(run, fh)
    return 0 if summary.passed else 5


def cmd_figure_rho(parser, args):
    if args.steps < 2 or args.mu_min <= 0 or args.mu_max < args.mu_min:
        parser.error("need steps >= 2 and 0 < mu-min <= mu-max")
    rows = []
    c_plus = (math.cosh(2.0) + 1.0) / 2.0
    for s in range(args.steps):
        mu = args.mu_min + (args.mu_max - args.mu_min) * s / (args.steps - 1)
        closed = 1.0 / (1.0 + c_plus / mu)
        row = [repr(mu), repr(closed)]
        if args.certify:
            cfg = example2_config(mu=mu, degree=args.degree)
            report = analyze_family(
                cfg.build_family(),
                cfg.truncation_degree,
                scheme_kind="diagonal_dominance",
            )
            row.append(
                repr(report.rho_certified) if report.certified else ""
            )
        rows.append(",".join(row))
    header = "mu,rho_closed_form" + (",rho_certified" if args.certify else "")
    _write_text(args.out, header + "\n" + "\n".join(rows) + "\n")
    return 0


def cmd_selftest(parser, args):
    entry_fn = koopman.entry
    if args.break_entry_sign:

        def entry_fn(field_, basis, k, j):
            v = koopman.entry(field_, basis, k, j)
            return -v if k != j else v

    return run_selftest(entry_fn=entry_fn, out=sys.stdout)


def cmd_example(parser, args, which):
    if which == 1:
        cfg = example1_config(a=args.a, b=args.b, degree=args.degree)
    else:
        cfg = example2_config(mu=args.mu, degree=args.degree)
    _write_text(args.out, cfg.to_json())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="koopman-clf",
        description=(
            "Certify global uniform asymptotic stability of switched "
            "systems on the complex polydisk via a common Lyapunov "
            "function built from truncated Koopman generator matrices."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run the certificate pipeline")
    p.add_argument("--config", required=True, help="system config JSON")
    p.add_argument("--out", default="-", help="report destination ('-' = stdout)")
    p.add_argument("--degree", type=int, help="override truncation degree")
    p.add_argument(
        "--scheme", choices=["poly", "dd", "polynomial", "diagonal_dominance"]
    )
    p.add_argument("--xi", type=float, help="override scheme parameter xi")
    p.add_argument("--kappa", type=float, help="override scheme parameter kappa")
    p.add_argument("--rho", type=float, help="request a radius <= the certified one")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("simulate", help="audit a certificate by simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--report", required=True, help="report JSON from analyze")
    p.add_argument("--out", default="-")
    p.add_argument("--trials", type=int, help="number of switching signals")
    p.add_argument("--points", type=int, help="initial states per signal")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--trace", help="write the first run's trace CSV here")

    p = sub.add_parser(
        "figure-rho", help="certified-radius curve of the analytic example"
    )
    p.add_argument("--mu-min", type=float, required=True)
    p.add_argument("--mu-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--degree", type=int, default=20)
    p.add_argument("--certify", action="store_true",
                   help="also run the pipeline at each mu")
    p.add_argument("--out", default="-")

    p = sub.add_parser("selftest", help="internal consistency checks")
    p.add_argument(
        "--break-entry-sign",
        action="store_true",
        help=argparse.SUPPRESS,
    )

    p = sub.add_parser("example1", help="write the polynomial pair config")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.3)
    p.add_argument("--degree", type=int, default=12)
    p.add_argument("--out", default="-")

    p = sub.add_parser("example2", help="write the analytic pair config")
    p.add_argument("--mu", type=float, default=3.0)
    p.add_argument("--degree", type=int, default=20)
    p.add_argument("--out", default="-")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "analyze":
        return cmd_analyze(parser, args)
    if args.command == "simulate":
        return cmd_simulate(parser, args)
    if args.command == "figure-rho":
        return cmd_figure_rho(parser, args)
    if args.command == "selftest":
        return cmd_selftest(parser, args)
    if args.command == "example1":
        return cmd_example(parser, args, 1)
    return cmd_example(parser, args, 2)


if __name__ == "__main__":
    sys.exit(main())

"""``halpern-cert``: run, tabulate and verify experiments from YAML configs.

Exit codes: 0 pass, 1 verification violation, 2 input error, 3 runtime abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile

import numpy as np

from . import builtins
from .certificates import format_rate
from .config import ConfigError, ExperimentConfig, builtin_config, load
from .exact import EvaluationCeiling
from .harness import run_suite, suite_exit_code
from .iteration import IterationAbort, run

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_ABORT = 0, 1, 2, 3
CSV_HEADER = ("n", "step_residual", "fix_residual", "kp_n")


class InputError(Exception):
    pass


def write_atomic(path: str, write) -> None:
    """Call ``write(fh)`` on a temp file next to ``path``, then rename over it."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise InputError(f"output directory does not exist: {directory}")
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(trace, fh, rows: int | None = None) -> None:
    """One row per step, ``%.17g`` so every double round-trips."""
    n = trace.length if rows is None else rows
    fh.write(",".join(CSV_HEADER) + "\n")
    block = 1 << 16
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        cols = np.column_stack([np.arange(lo, hi, dtype=np.float64), trace.step_residuals[lo:hi],
                                trace.fix_residuals[lo:hi], trace.kp_path[lo:hi]])
        buf = io.StringIO()
        np.savetxt(buf, cols, fmt=("%d", "%.17g", "%.17g", "%.17g"), delimiter=",")
        fh.write(buf.getvalue())


def _config(args) -> ExperimentConfig:
    if args.config:
        cfg = load(args.config)
    elif getattr(args, "builtin", None):
        if len(args.builtin) > 1:
            raise InputError("this subcommand takes a single --builtin")
        cfg = _builtin(args.builtin[0])
    else:
        raise InputError("--config (or --builtin) is required")
    return cfg.with_run(trace_length=args.steps, k_max=args.kmax, tolerance=args.tol, seed=args.seed)


def _builtin(name):
    if name not in builtins.all_names():
        raise InputError(f"unknown builtin {name!r}; see `halpern-cert examples`")
    return builtin_config(name)


def cmd_run(args) -> int:
    cfg = _config(args)
    out = args.out or cfg.outputs.get("trace")
    if not out:
        raise InputError("no output path: pass --out or set output.trace in the config")
    sc = cfg.scenario()
    trace = run(sc.instance, sc.schedule, sc.trace_length)
    write_atomic(out, lambda fh: trace_csv(trace, fh))
    print(f"wrote {trace.length} rows to {out}")
    return EXIT_OK


def cmd_rates(args) -> int:
    cfg = _config(args)
    if args.k is not None:
        ks = args.k
    else:
        ks = range((args.kmax if args.kmax is not None else cfg.data["run"].get("k_max", 10)) + 1)
    certs, notes = cfg.rate_certificates()
    lines = ["certificate\ttarget\tk\trate"]
    for c in certs:
        for k, v, why in c.table(ks):
            lines.append(f"{c.provenance}\t{c.target.value}\t{k}\t"
                         + (format_rate(v) if v is not None else f"not evaluated ({why})"))
    for note in notes:
        lines.append(f"# note: {note}")
    if args.verbose:
        for c in certs:
            lines.append("# " + c.render().replace("\n", "\n# "))
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, lambda fh: fh.write(text))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config or (args.builtin and len(args.builtin) == 1):
        cfgs = [_config(args)]
    else:
        names = args.builtin or list(builtins.BUILTINS)
        cfgs = [_builtin(n).with_run(trace_length=args.steps, k_max=args.kmax, tolerance=args.tol,
                                     seed=args.seed) for n in names]
    scenarios = [c.scenario() for c in cfgs]
    reports = run_suite(scenarios)
    text = "\n".join(r.render() for r in reports) + "\n"
    code = suite_exit_code(reports)
    text += f"suite: {'PASS' if code == 0 else 'FAIL'} ({sum(r.passed for r in reports)}/{len(reports)} scenarios)\n"
    sys.stdout.write(text)
    report_path = args.out or (cfgs[0].outputs.get("report") if len(cfgs) == 1 else None)
    if report_path:
        write_atomic(report_path, lambda fh: fh.write(text))
    rows_path = args.rows or (cfgs[0].outputs.get("rows") if len(cfgs) == 1 else None)
    if rows_path:
        def write_rows(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("scenario", "class", "check", "status", "k", "n", "lhs", "rhs"))
            for r in reports:
                w.writerows(r.rows())
        write_atomic(rows_path, write_rows)
    return code


def cmd_examples(args) -> int:
    for name in builtins.all_names():
        f = builtins.lookup(name)
        doc = (f.__doc__ or "").strip().splitlines()
        kind = "fault" if f in builtins.FAULTS.values() else "scenario"
        print(f"{name:24s} {kind:8s} {doc[0] if doc else ''}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halpern-cert", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="experiment config (YAML)")
        sp.add_argument("--builtin", action="append", metavar="NAME",
                        help="use a built-in scenario instead of a config")
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--kmax", type=int, help="largest k to check or tabulate")
        sp.add_argument("--steps", type=int, help="trace length")
        sp.add_argument("--tol", type=float, help="relative tolerance")
        sp.add_argument("--seed", type=int, help="seed recorded in the scenario")

    common(sub.add_parser("run", help="iterate and write the residual trace as CSV"), "CSV path")
    r = sub.add_parser("rates", help="tabulate every applicable certificate")
    common(r, "also write the table here")
    r.add_argument("--k", nargs="*", type=int, default=None, metavar="K",
                   help="k values (default 0..kmax); a bare --k prints the header only")
    r.add_argument("-v", "--verbose", action="store_true", help="append formulas and parameters")
    v = sub.add_parser("verify", help="run the harness; no config means all built-in scenarios")
    common(v, "report path")
    v.add_argument("--rows", help="machine-readable report rows (CSV)")
    sub.add_parser("examples", help="list built-in scenarios and fault fixtures")
    return p


COMMANDS = {"run": cmd_run, "rates": cmd_rates, "verify": cmd_verify, "examples": cmd_examples}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IterationAbort, EvaluationCeiling, MemoryError, FloatingPointError) as exc:
        print(f"aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()

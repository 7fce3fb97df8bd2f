"""Command-line experiment runner.

Verbs::

    piecewise-net run --config exp.json [--out DIR] [--jobs N] [--trials N]
                      [--grid-res R] [--seed-override S] [--dry-run]
    piecewise-net solve|approximate --config exp.json ...   (mode-checked aliases)
    piecewise-net dry-run --config exp.json
    piecewise-net reproduce t1..t7 [--trials N] [--out DIR] [--jobs N]

Exit codes: 0 success, 2 invalid configuration or arguments, 3 output
directory not writable, 4 every trial failed.
"""

import argparse
import csv
import io
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import metrics, problems, tables
from . import network as nw
from .config import ExperimentConfig
from .errors import ConfigError

EXIT_INVALID = 2
EXIT_UNWRITABLE = 3
EXIT_ALL_FAILED = 4

log = logging.getLogger("piecewise_net")


class UnwritableOutput(OSError):
    pass


def write_atomic(path, data):
    """Write text or bytes through a temporary file renamed into place."""
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def prepare_output(out):
    try:
        os.makedirs(out, exist_ok=True)
        probe = tempfile.NamedTemporaryFile(dir=out, prefix=".probe-")
        probe.close()
    except OSError as exc:
        raise UnwritableOutput(f"output directory {out!r} is not writable: {exc.strerror}") from None


def params_bytes(theta, layout):
    buf = io.BytesIO()
    nw.save_params(buf, layout.unpack(theta), layout.encoding, layout.dim)
    return buf.getvalue()


def grid_csv(config, layout, theta, res):
    """Regular-grid dump of ``u_N`` and ``|u_N - u|`` over the bounding box (d <= 2)."""
    problem = problems.catalog(config.problem)
    rmap = problem.region_map
    lo, hi = rmap.bbox
    axes = [np.linspace(a, b, res) for a, b in zip(lo, hi)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, rmap.dim)
    inside = rmap.contains(x)
    regions = np.full(len(x), -1)
    regions[inside] = rmap.classify(x[inside])
    encoding = layout.encoding
    params = layout.unpack(theta)
    u = np.full(len(x), math.nan)
    err = np.full(len(x), math.nan)
    xi, ri = x[inside], regions[inside]
    u[inside] = nw.forward(params, xi, encoding.encode_regions(ri, params.E))
    err[inside] = np.abs(u[inside] - problem.exact(xi, ri))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{k + 1}" for k in range(rmap.dim)] + ["region", "u_N", "abs_err"])
    for row, reg, val, e in zip(x, regions, u, err):
        tail = ["", ""] if reg < 0 else [repr(float(val)), repr(float(e))]
        w.writerow([repr(float(v)) for v in row] + [int(reg)] + tail)
    return buf.getvalue()


def describe(config):
    problem = problems.catalog(config.problem)
    n_p = metrics.count_params(config, problem)
    lines = [
        f"problem      {config.problem} (d = {problem.dim}, {problem.n_regions} regions)",
        f"mode         {config.mode}",
        f"encoding     {config.encoding.describe()}",
        f"width        {config.width}",
        f"points       M = {config.points.M}, M_b = {config.points.M_b}"
        + (f", M_gamma = {config.points.M_gamma}" if config.points.M_gamma else ""),
        f"optimizer    {config.optimizer.to_dict()}",
        f"trials       {config.trials} (seed {config.seed})",
        f"test points  {config.test_points}",
        f"N_p          {n_p}",
    ]
    return "\n".join(lines)


def run_experiment(config, out, jobs=1, grid_res=None):
    prepare_output(out)
    write_atomic(os.path.join(out, "resolved_config.json"), config.dumps())
    report = metrics.run_trials(config, jobs=jobs)
    problem = problems.catalog(config.problem)
    for t in report.trials:
        if t.trace is not None:
            write_atomic(os.path.join(out, f"trace_{t.trial}.csv"), t.trace.to_csv())
            write_atomic(os.path.join(out, f"params_{t.trial}.bin"), params_bytes(t.theta, t.layout))
    write_atomic(os.path.join(out, "report.csv"), report.to_csv())
    first = report.trials[0]
    if problem.dim <= 2 and first.theta is not None:
        res = grid_res or config.grid_res
        write_atomic(os.path.join(out, "grid.csv"), grid_csv(config, first.layout, first.theta, res))
    return report


def reproduce(key, trials, out=None, jobs=1, seed=0):
    table = tables.get(key)
    print(f"{table.key}: {table.title}")
    header = (
        f"{'Method':<26} {'N_p':>5} {'(ref)':>5}   {'L2':>9} {'(ref)':>9}   {'Linf':>9} {'(ref)':>9}   status"
    )
    print(header)
    rows = []
    for row in table.rows:
        cfg = row.config(trials=trials, seed=seed)
        report = metrics.run_trials(cfg, jobs=jobs)
        ok = row.passed(report)
        if report.failed:
            status = "fails to converge" + (" (expected)" if row.expect_failure else "")
        else:
            status = "pass" if ok else "FAIL"
        line = (
            f"{row.label:<26} {report.n_params:>5} {row.n_params:>5}   "
            f"{_num(report.mean_l2):>9} {_num(row.l2):>9}   "
            f"{_num(report.mean_linf):>9} {_num(row.linf):>9}   {status}"
        )
        print(line, flush=True)
        rows.append((row, report, ok, status))
        if out:
            sub = os.path.join(out, _slug(row.label) + "_" + row.problem)
            prepare_output(sub)
            write_atomic(os.path.join(sub, "report.csv"), report.to_csv())
    if table.reference:
        print(f"reference: {table.reference}")
    if out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "problem", "n_params", "ref_n_params", "l2", "ref_l2", "linf", "ref_linf", "status"])
        for row, report, _, status in rows:
            w.writerow(
                [row.label.strip(), row.problem, report.n_params, row.n_params, _num(report.mean_l2),
                 _num(row.l2), _num(report.mean_linf), _num(row.linf), status]
            )
        write_atomic(os.path.join(out, f"{key}.csv"), buf.getvalue())
    return rows


def _num(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "--"
    return f"{v:.2e}"


def _slug(label):
    return "".join(ch if ch.isalnum() else "_" for ch in label.strip()).strip("_").lower()


def build_parser():
    parser = argparse.ArgumentParser(prog="piecewise-net", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def experiment_flags(p):
        p.add_argument("--config", required=True, help="JSON experiment description")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="trials run in parallel")
        p.add_argument("--trials", type=int, help="override the trial count")
        p.add_argument("--grid-res", type=int, help="grid dump resolution per axis")
        p.add_argument("--seed-override", type=int, help="replace the master seed")
        p.add_argument("--dry-run", action="store_true", help="validate and print settings only")

    for verb in ("run", "solve", "approximate"):
        experiment_flags(sub.add_parser(verb, help="train and evaluate one experiment"))
    dry = sub.add_parser("dry-run", help="validate a config and print the resolved settings")
    dry.add_argument("--config", required=True)
    dry.add_argument("--seed-override", type=int)
    dry.add_argument("--trials", type=int)

    rep = sub.add_parser("reproduce", help="run a benchmark table sweep")
    rep.add_argument("table", help="table id (t1..t7)")
    rep.add_argument("--trials", type=int, default=10)
    rep.add_argument("--out")
    rep.add_argument("--jobs", type=int, default=1)
    rep.add_argument("--seed-override", type=int, default=0)
    return parser


def load_config(args):
    config = ExperimentConfig.load(args.config)
    changes = {}
    if getattr(args, "seed_override", None) is not None:
        changes["seed"] = args.seed_override
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "out", None):
        changes["out"] = args.out
    if getattr(args, "grid_res", None) is not None:
        changes["grid_res"] = args.grid_res
    return config.replace(**changes) if changes else config


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.verb == "reproduce":
        if args.table not in tables.TABLES:
            print(f"error: unknown table {args.table!r}; expected one of {sorted(tables.TABLES)}", file=sys.stderr)
            return EXIT_INVALID
        if args.trials < 1 or args.jobs < 1:
            print("error: --trials and --jobs must be positive", file=sys.stderr)
            return EXIT_INVALID
        try:
            reproduce(args.table, args.trials, args.out, args.jobs, args.seed_override)
        except UnwritableOutput as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_UNWRITABLE
        return 0

    try:
        config = load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.verb in ("solve", "approximate") and config.mode != args.verb:
        print(f"error: config mode is {config.mode!r} but the verb is {args.verb!r}", file=sys.stderr)
        return EXIT_INVALID
    if args.verb == "dry-run" or args.dry_run:
        print(describe(config))
        return 0
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_INVALID
    out = config.out or os.path.join("runs", config.problem)
    try:
        report = run_experiment(config, out, args.jobs, args.grid_res)
    except UnwritableOutput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    print(metrics.format_table([report]))
    print(f"{report.n_failed}/{report.n_trials} trials failed; outputs in {out}")
    if report.n_failed == report.n_trials:
        print("error: every trial failed to converge", file=sys.stderr)
        return EXIT_ALL_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())

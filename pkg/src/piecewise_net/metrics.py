"""Trial runner and error reports.

Each trial derives three independent streams from ``SeedSequence([seed, trial])``:
training points, initial parameters and test points.
"""

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import encoding as en
from . import network as nw
from . import optimizer as opt
from . import problems
from . import residual as rs

log = logging.getLogger(__name__)

# a trial whose final loss stays above this value is counted as failed
FAIL_LOSS = 1e-6


def evaluate(params, encoding, problem, n_test, seed):
    """Root-mean-square and max error of the network on random interior points."""
    if n_test < 1:
        raise ValueError("n_test must be at least 1")
    rmap = problem.region_map
    x = rmap.sample_interior(n_test, seed)
    regions = rmap.classify(x)
    err = nw.forward(params, x, encoding.encode_regions(regions, params.E)) - problem.exact(x, regions)
    return float(np.sqrt(np.mean(err**2))), float(np.max(np.abs(err)))


def build_encoding(spec, problem, x_interior, regions, rhs=None):
    """Encoding for a config ``EncodingSpec``; mean labels use the training points."""
    L1 = problem.n_regions
    if spec.scheme == "embedding":
        return en.embedding(L1, spec.embed_dim)
    if spec.scheme == "onehot":
        return en.onehot(L1)
    if spec.labels == "nominal":
        return en.nominal(L1)
    if spec.labels == "mean":
        values = problem.exact(x_interior, regions)
        return en.mean_labels(en.region_averages(values, regions, L1))
    if spec.labels == "mean_f":
        values = problem.rhs(x_interior, regions) if rhs is None else rhs
        return en.mean_labels(en.region_averages(values, regions, L1), normalize=True)
    return en.scalar(spec.labels)


def init_theta(layout, rng, scale=1.0):
    params = nw.init_params(layout, rng)
    if scale != 1.0:
        params = nw.Params(params.c, scale * params.W, scale * params.b, params.E)
    return layout.pack(params)


@dataclass
class TrialResult:
    trial: int
    l2: float
    linf: float
    final_loss: float
    iterations: int
    reason: str
    seconds: float
    layout: nw.Layout = field(default=None, repr=False)
    trace: opt.TrainingTrace = field(default=None, repr=False)
    theta: np.ndarray = field(default=None, repr=False)

    @property
    def failed(self):
        return not math.isfinite(self.final_loss) or self.final_loss > FAIL_LOSS


def trial_setup(config, trial):
    """Residual builder, layout and the init/test seeds for one trial."""
    problem = problems.catalog(config.problem)
    rmap = problem.region_map
    s_points, s_init, s_test = np.random.SeedSequence([config.seed, trial]).spawn(3)
    pts = config.points
    if config.mode == "approximate":
        seeds = s_points.spawn(2)
        xi = rmap.sample_interior(pts.M, seeds[0])
        xb = rmap.sample_boundary(pts.M_b, seeds[1])
        encoding = build_encoding(config.encoding, problem, xi, rmap.classify(xi))
        layout = nw.Layout(config.width, problem.dim, encoding)
        x = np.vstack([xi, xb])
        builder = rs.SupervisedSystem(layout, rmap, x, problem.exact(x))
    else:
        points = rs.sample_collocation(rmap, pts.M, pts.M_b, pts.M_gamma, s_points)
        xi = points.interior
        encoding = build_encoding(config.encoding, problem, xi, rmap.classify(xi))
        layout = nw.Layout(config.width, problem.dim, encoding)
        builder = rs.PinnSystem(layout, problem, points)
    return builder, layout, s_init, s_test


def run_trial(config, trial):
    problem = problems.catalog(config.problem)
    t0 = time.perf_counter()
    builder, layout, s_init, s_test = trial_setup(config, trial)
    theta0 = init_theta(layout, np.random.default_rng(s_init), config.init_scale)
    try:
        trace = opt.train(builder, theta0, config.optimizer)
    except FloatingPointError as exc:
        log.warning("trial %d: %s", trial, exc)
        return TrialResult(trial, math.nan, math.nan, math.nan, 0, "diverged", 0.0, layout)
    if not math.isfinite(trace.final_loss):
        l2 = linf = math.nan
    else:
        params = layout.unpack(trace.theta)
        l2, linf = evaluate(params, layout.encoding, problem, config.test_points, s_test)
    return TrialResult(
        trial,
        l2,
        linf,
        trace.final_loss,
        trace.n_iterations,
        trace.reason,
        time.perf_counter() - t0,
        layout,
        trace,
        trace.theta,
    )


@dataclass
class TrialReport:
    label: str
    problem: str
    n_params: int
    trials: list
    seconds: float = 0.0

    @property
    def n_trials(self):
        return len(self.trials)

    @property
    def n_failed(self):
        return sum(t.failed for t in self.trials)

    @property
    def failed(self):
        """More than half of the trials failed to converge."""
        return self.n_failed > self.n_trials / 2

    def _mean(self, attr):
        ok = [getattr(t, attr) for t in self.trials if not t.failed]
        if self.failed or not ok:
            return math.nan
        return float(np.mean(ok))

    @property
    def mean_l2(self):
        return self._mean("l2")

    @property
    def mean_linf(self):
        return self._mean("linf")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["label", "trial", "n_params", "l2", "linf", "final_loss", "iterations", "reason", "failed"]
        )
        for t in self.trials:
            w.writerow(
                [
                    self.label,
                    t.trial,
                    self.n_params,
                    _fmt(t.l2),
                    _fmt(t.linf),
                    _fmt(t.final_loss),
                    t.iterations,
                    t.reason,
                    int(t.failed),
                ]
            )
        status = "fails to converge" if self.failed else "ok"
        w.writerow(
            [self.label, "mean", self.n_params, _fmt(self.mean_l2), _fmt(self.mean_linf), "", "", status, self.n_failed]
        )
        return buf.getvalue()

    def row(self):
        if self.failed:
            return f"{self.label:<22} {self.n_params:>6}   {'--':>10}   {'--':>10}"
        return f"{self.label:<22} {self.n_params:>6}   {self.mean_l2:10.2e}   {self.mean_linf:10.2e}"


def _fmt(v):
    return "nan" if not math.isfinite(v) else f"{v:.6e}"


def format_table(reports):
    lines = [f"{'Method':<22} {'N_p':>6}   {'L2 error':>10}   {'Linf error':>10}"]
    lines += [r.row() for r in reports]
    return "\n".join(lines)


def run_trials(config, n_trials=None, jobs=1):
    n_trials = config.trials if n_trials is None else n_trials
    if n_trials < 1:
        raise ValueError("need at least one trial")
    t0 = time.perf_counter()
    if jobs > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_trial, [config] * n_trials, range(n_trials)))
    else:
        results = [run_trial(config, i) for i in range(n_trials)]
    problem = problems.catalog(config.problem)
    return TrialReport(
        config.encoding.describe(),
        config.problem,
        count_params(config, problem),
        results,
        time.perf_counter() - t0,
    )


def count_params(config, problem=None):
    problem = problem or problems.catalog(config.problem)
    spec = config.encoding
    L1 = problem.n_regions
    if spec.scheme == "embedding":
        enc = en.embedding(L1, spec.embed_dim)
    elif spec.scheme == "onehot":
        enc = en.onehot(L1)
    else:
        enc = en.nominal(L1)
    return nw.count_params(problem.dim, config.width, enc)

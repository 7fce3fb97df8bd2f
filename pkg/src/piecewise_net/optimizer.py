"""Levenberg-Marquardt training over residual builders.

A builder is any callable ``theta, jacobian=True -> ResidualSystem`` whose
``J`` is the derivative of ``r`` with respect to ``theta``.  The step solves
``(J^T J + mu I) dtheta = -J^T r``, i.e. the damped Gauss-Newton correction
that decreases ``||r||^2``.

With ``geodesic=True`` each step gets the second-order geodesic correction
``d2`` solving ``(J^T J + mu I) d2 = -J^T r_vv``, where ``r_vv`` is a finite
difference estimate of the second directional derivative of ``r`` along the
first-order step.  The combined step ``d + d2/2`` is tried only when
``2 ||d2|| <= accel_ratio ||d||``; otherwise the plain step is tried.
For residuals affine in ``theta`` the correction vanishes.
"""

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

log = logging.getLogger(__name__)

SOLVERS = ("cholesky", "qr")
MU_MIN = 1e-20
MU_MAX = 1e20


@dataclass(frozen=True)
class LMConfig:
    mu0: float = 1e-3
    nu: float = 3.0
    max_iters: int = 1000
    tol: float = 1e-15
    solver: str = "qr"
    max_rejects: int = 20
    geodesic: bool = True
    accel_ratio: float = 0.75
    fd_step: float = 0.1

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.nu > 1:
            raise ValueError("nu must exceed 1")
        if self.max_iters < 0 or self.max_rejects < 1:
            raise ValueError("iteration limits must be non-negative")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if not self.accel_ratio > 0 or not self.fd_step > 0:
            raise ValueError("accel_ratio and fd_step must be positive")

    def to_dict(self):
        return dict(
            mu0=self.mu0,
            nu=self.nu,
            max_iters=self.max_iters,
            tol=self.tol,
            solver=self.solver,
            max_rejects=self.max_rejects,
            geodesic=self.geodesic,
            accel_ratio=self.accel_ratio,
            fd_step=self.fd_step,
        )


@dataclass
class TrainingTrace:
    """One row per attempted step.  Row 0 is the initial state."""

    iteration: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    theta: np.ndarray = None
    reason: str = None
    seconds: float = 0.0

    def record(self, iteration, loss, mu, step_norm, accepted):
        self.iteration.append(iteration)
        self.loss.append(loss)
        self.mu.append(mu)
        self.step_norm.append(step_norm)
        self.accepted.append(bool(accepted))

    @property
    def accepted_losses(self):
        loss = np.asarray(self.loss)
        return loss[np.asarray(self.accepted, dtype=bool)]

    @property
    def final_loss(self):
        acc = self.accepted_losses
        return float(acc[-1]) if len(acc) else float("nan")

    @property
    def n_iterations(self):
        return int(self.iteration[-1]) if self.iteration else 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "loss", "mu", "step_norm", "accepted"])
        for row in zip(self.iteration, self.loss, self.mu, self.step_norm, self.accepted):
            it, loss, mu, sn, acc = row
            w.writerow([it, repr(float(loss)), repr(float(mu)), repr(float(sn)), int(acc)])
        return buf.getvalue()


def damped_solver(J, mu, solver="qr"):
    """Factor the damped system once; the result maps ``r`` to the LM step.

    ``qr`` solves ``[J; sqrt(mu) I] d = [r; 0]`` by Householder QR.
    ``cholesky`` solves ``(J^T J + mu I) d = J^T r``, switching to
    ``d = J^T (J J^T + mu I)^{-1} r`` for wide Jacobians, and raises
    ``numpy.linalg.LinAlgError`` if round-off makes the matrix indefinite.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    if solver == "qr":
        A = np.vstack([J, np.sqrt(mu) * np.eye(n)])
        (h, tau), R = linalg.qr(A, mode="raw", check_finite=False)

        def solve(r):
            rhs = np.concatenate([np.asarray(r, dtype=float), np.zeros(n)])[:, None]
            qtb, _, info = lapack.dormqr("L", "T", h, tau, rhs, lwork=64)
            if info != 0:
                raise np.linalg.LinAlgError(f"dormqr failed with info={info}")
            return linalg.solve_triangular(R[:n], qtb[:n, 0], check_finite=False)

        return solve
    if m >= n:
        G = J.T @ J
        G[np.diag_indices(n)] += mu
        factor = linalg.cho_factor(G, check_finite=False)
        return lambda r: linalg.cho_solve(factor, J.T @ np.asarray(r, dtype=float))
    G = J @ J.T
    G[np.diag_indices(m)] += mu
    factor = linalg.cho_factor(G, check_finite=False)
    return lambda r: J.T @ linalg.cho_solve(factor, np.asarray(r, dtype=float))


def lm_step_cholesky(J, r, mu):
    """LM step from the normal equations (dual form for wide ``J``)."""
    return damped_solver(J, mu, "cholesky")(r)


def lm_step_qr(J, r, mu):
    """LM step from the stacked least-squares system, by Householder QR."""
    return damped_solver(J, mu, "qr")(r)


def _apply_reflectors(h, tau, c, trans):
    """``Q^T c`` (trans "T") or ``Q c`` (trans "N") for a raw Householder QR."""
    out, _, info = lapack.dormqr("L", trans, h, tau, c[:, None], lwork=64)
    if info != 0:
        raise np.linalg.LinAlgError(f"dormqr failed with info={info}")
    return out[:, 0]


def triangular_damped_solver(U, mu, solver="qr"):
    """``damped_solver`` for square upper-triangular ``U``.

    The QR variant uses the triangular-pentagonal factorisation of
    ``[U; sqrt(mu) I]``, several times cheaper than a dense QR.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    k = U.shape[0]
    if solver != "qr":
        return damped_solver(U, mu, solver)
    R, V, T, info = lapack.dtpqrt(k, min(k, 32), U, np.sqrt(mu) * np.eye(k))
    if info != 0:
        raise np.linalg.LinAlgError(f"dtpqrt failed with info={info}")

    def solve(r):
        top, _, info = lapack.dtpmqrt(k, V, T, np.array(r, dtype=float)[:, None], np.zeros((k, 1)),
                                      side="L", trans="T")
        if info != 0:
            raise np.linalg.LinAlgError(f"dtpmqrt failed with info={info}")
        return linalg.solve_triangular(R, top[:, 0], check_finite=False)

    return solve


class _Stepper:
    """Per-iteration factorisation reused across rejected trial steps.

    ``J`` is compressed once with a Householder QR so each damping value only
    costs a factorisation of a square triangular matrix.  Tall ``J = QR``
    reduces to the system ``(R, Q^T v)``.  Wide ``J^T = QR`` gives
    ``d = Q [d'; 0]`` where ``d'`` solves ``(R^T, v)``; reversing the order of
    rows and columns turns the lower-triangular ``R^T`` into an upper one.
    """

    def __init__(self, J, solver):
        self.solver = solver
        self._factored = None
        m, n = J.shape
        self.wide = m < n
        self.n = n
        (self.h, self.tau), R = linalg.qr(J.T if self.wide else J, mode="raw", check_finite=False)
        k = min(m, n)
        self.U = np.triu(R[:k, :k])[::-1, ::-1].T.copy() if self.wide else np.triu(R[:k, :k])

    def step(self, v, mu):
        """Damped least-squares solution of ``J d = v``."""
        # the geodesic correction reuses the factorisation of the plain step
        if self._factored is None or self._factored[0] != mu:
            self._factored = (mu, triangular_damped_solver(self.U, mu, self.solver))
        solve = self._factored[1]
        if not self.wide:
            k = self.U.shape[0]
            return solve(_apply_reflectors(self.h, self.tau, np.asarray(v, dtype=float), "T")[:k])
        d = solve(np.asarray(v, dtype=float)[::-1])[::-1]
        return _apply_reflectors(self.h, self.tau, np.concatenate([d, np.zeros(self.n - len(d))]), "N")


def _trial_step(builder, theta, system, stepper, mu, config):
    """Proposed step at damping ``mu``, or None if it is unusable."""
    try:
        delta = stepper.step(-system.r, mu)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(delta)):
        return None
    if not config.geodesic:
        return delta
    h = config.fd_step
    r_h = builder(theta + h * delta, jacobian=False).r
    r_vv = (2.0 / h) * ((r_h - system.r) / h - system.J @ delta)
    try:
        accel = stepper.step(-r_vv, mu)
    except np.linalg.LinAlgError:
        return delta
    if not np.all(np.isfinite(accel)):
        return delta
    if 2.0 * np.linalg.norm(accel) > config.accel_ratio * np.linalg.norm(delta):
        return delta
    return delta + 0.5 * accel


def train(builder, theta0, config=None, callback=None):
    """Minimise ``||r(theta)||^2`` from ``theta0``.

    Each iteration assembles ``J`` once and retries with ``mu *= nu`` until a
    trial point lowers the loss (then ``mu /= nu``) or ``max_rejects``
    consecutive failures end the run with reason ``stall``.
    """
    config = config or LMConfig()
    t0 = time.perf_counter()
    theta = np.array(theta0, dtype=float)
    system = builder(theta)
    loss = system.loss
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss at the initial parameters")
    mu = config.mu0
    trace = TrainingTrace()
    trace.record(0, loss, mu, 0.0, True)
    reason = None
    it = 0
    while True:
        if loss <= config.tol:
            reason = "tolerance"
            break
        if it >= config.max_iters:
            reason = "max-iterations"
            break
        it += 1
        stepper = _Stepper(system.J, config.solver)
        for _ in range(config.max_rejects):
            delta = _trial_step(builder, theta, system, stepper, mu, config)
            ok = False
            if delta is None:
                trace.record(it, float("nan"), mu, float("nan"), False)
            else:
                trial = theta + delta
                trial_loss = builder(trial, jacobian=False).loss
                ok = bool(np.isfinite(trial_loss) and trial_loss < loss)
                trace.record(it, trial_loss, mu, float(np.linalg.norm(delta)), ok)
            if ok:
                theta, loss = trial, trial_loss
                mu = max(mu / config.nu, MU_MIN)
                break
            mu = min(mu * config.nu, MU_MAX)
        else:
            reason = "stall"
            break
        system = builder(theta)
        if callback is not None:
            callback(it, loss, mu)
    trace.theta = theta
    trace.reason = reason
    trace.seconds = time.perf_counter() - t0
    log.debug("LM stopped after %d iterations (%s), loss %.3e", it, reason, loss)
    return trace

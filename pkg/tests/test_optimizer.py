import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piecewise_net import optimizer as opt
from piecewise_net.residual import ResidualSystem


def _affine_builder(A, y):
    """Residual ``A theta - y``: affine in theta with constant Jacobian."""
    groups = np.full(len(y), "supervised")

    def build(theta, jacobian=True):
        return ResidualSystem(A @ theta - y, A if jacobian else None, groups)

    return build


def _well_conditioned(rng, m, n, cond=100.0):
    U, _ = np.linalg.qr(rng.normal(size=(m, m)))
    V, _ = np.linalg.qr(rng.normal(size=(n, n)))
    s = np.geomspace(1.0, 1.0 / cond, min(m, n))
    S = np.zeros((m, n))
    S[np.arange(len(s)), np.arange(len(s))] = s
    return U @ S @ V.T


@pytest.mark.parametrize("step", [opt.lm_step_cholesky, opt.lm_step_qr])
def test_identity_jacobian(step):
    r = np.array([1.0, -2.0, 0.5])
    assert np.allclose(step(np.eye(3), r, 0.25), r / 1.25, rtol=1e-14)


@pytest.mark.parametrize("step", [opt.lm_step_cholesky, opt.lm_step_qr])
@pytest.mark.parametrize("shape", [(20, 6), (6, 20)])
def test_large_damping_gives_scaled_gradient(step, shape):
    rng = np.random.default_rng(0)
    J, r = rng.normal(size=shape), rng.normal(size=shape[0])
    mu = 1e12
    d = step(J, r, mu)
    g = J.T @ r
    assert np.linalg.norm(mu * d - g) / np.linalg.norm(g) <= 1e-6


@pytest.mark.parametrize("step", [opt.lm_step_cholesky, opt.lm_step_qr])
def test_stationary_residual_gives_zero_step(step):
    rng = np.random.default_rng(1)
    J = rng.normal(size=(10, 4))
    Q, _ = np.linalg.qr(J, mode="complete")
    r = Q[:, 6]  # orthogonal to range(J)
    assert np.abs(J.T @ r).max() < 1e-14
    assert np.linalg.norm(step(J, r, 1e-3)) <= 1e-12


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 40), n=st.integers(1, 40),
       mu=st.sampled_from([1e-6, 1e-3, 1.0, 1e3]))
@settings(max_examples=80, deadline=None)
def test_cholesky_and_qr_agree(seed, m, n, mu):
    rng = np.random.default_rng(seed)
    J = _well_conditioned(rng, m, n, cond=1e3)
    r = rng.normal(size=m)
    a = opt.lm_step_cholesky(J, r, mu)
    b = opt.lm_step_qr(J, r, mu)
    assert np.linalg.norm(a - b) <= 1e-8 * max(np.linalg.norm(b), 1e-300)


@pytest.mark.parametrize("shape", [(60, 20), (20, 60)])
def test_qr_backward_error_on_ill_conditioned_jacobian(shape):
    rng = np.random.default_rng(2)
    J = _well_conditioned(rng, *shape, cond=1e10)
    r = rng.normal(size=shape[0])
    mu = 1e-12
    d = opt.lm_step_qr(J, r, mu)
    # the stacked normal equations, normalised by the size of their terms
    lhs = J.T @ (J @ d) + mu * d
    rhs = J.T @ r
    scale = np.linalg.norm(J.T) * np.linalg.norm(J @ d) + mu * np.linalg.norm(d) + np.linalg.norm(rhs)
    assert np.linalg.norm(lhs - rhs) / scale <= 1e-10


def test_step_rejects_nonpositive_damping():
    with pytest.raises(ValueError):
        opt.lm_step_qr(np.eye(2), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        opt.lm_step_cholesky(np.eye(2), np.ones(2), -1.0)


def test_stepper_matches_direct_solvers():
    rng = np.random.default_rng(3)
    for shape in [(30, 10), (10, 30), (12, 12)]:
        J, v = rng.normal(size=shape), rng.normal(size=shape[0])
        for solver, direct in (("qr", opt.lm_step_qr), ("cholesky", opt.lm_step_cholesky)):
            s = opt._Stepper(J, solver)
            for mu in (1e-4, 1.0):
                assert np.allclose(s.step(v, mu), direct(J, v, mu), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("solver", opt.SOLVERS)
@pytest.mark.parametrize("geodesic", [True, False])
def test_affine_model_converges_to_least_squares_optimum(solver, geodesic):
    rng = np.random.default_rng(4)
    A = _well_conditioned(rng, 40, 12, cond=1e3)
    y = rng.normal(size=40)
    theta_star, *_ = np.linalg.lstsq(A, y, rcond=None)
    best = float(np.sum((A @ theta_star - y) ** 2))
    cfg = opt.LMConfig(mu0=1e-12, solver=solver, geodesic=geodesic, max_iters=2)
    trace = opt.train(_affine_builder(A, y), np.zeros(12), cfg)
    accepted = int(np.sum(trace.accepted)) - 1
    assert 1 <= accepted <= 2
    assert np.linalg.norm(trace.theta - theta_star) <= 1e-10 * np.linalg.norm(theta_star)
    assert abs(trace.final_loss - best) <= 1e-10 * best


def test_zero_iterations_when_already_converged():
    A = np.eye(3)
    y = np.array([1.0, 2.0, 3.0])
    trace = opt.train(_affine_builder(A, y), y.copy())
    assert trace.reason == "tolerance"
    assert trace.n_iterations == 0
    assert np.array_equal(trace.theta, y)


def test_nonfinite_initial_loss_raises():
    def build(theta, jacobian=True):
        return ResidualSystem(np.array([np.inf]), np.ones((1, 1)), np.array(["x"]))

    with pytest.raises(FloatingPointError):
        opt.train(build, np.zeros(1))


def test_stall_after_max_rejects():
    # a Jacobian pointing the wrong way never produces a decrease
    def build(theta, jacobian=True):
        return ResidualSystem(np.array([1.0 + theta[0] ** 2]), -np.ones((1, 1)), np.array(["x"]))

    cfg = opt.LMConfig(max_rejects=20)
    trace = opt.train(build, np.array([0.5]), cfg)
    assert trace.reason == "stall"
    assert sum(not a for a in trace.accepted) == 20
    assert np.all(np.asarray(trace.mu) > 0)


def _rosenbrock():
    def build(theta, jacobian=True):
        x, y = theta
        r = np.array([10 * (y - x**2), 1 - x])
        J = np.array([[-20 * x, 10.0], [-1.0, 0.0]]) if jacobian else None
        return ResidualSystem(r, J, np.array(["a", "b"]))

    return build


@pytest.mark.parametrize("geodesic", [True, False])
def test_nonlinear_problem_converges_monotonically(geodesic):
    cfg = opt.LMConfig(geodesic=geodesic, max_iters=200)
    trace = opt.train(_rosenbrock(), np.array([-1.2, 1.0]), cfg)
    assert trace.reason == "tolerance"
    assert np.allclose(trace.theta, [1.0, 1.0], atol=1e-7)
    acc = trace.accepted_losses
    assert np.all(np.diff(acc) < 0)
    assert np.all(np.asarray(trace.mu) > 0)


def test_damping_schedule():
    trace = opt.train(_rosenbrock(), np.array([-1.2, 1.0]), opt.LMConfig(geodesic=False, nu=3.0))
    mu, acc = np.asarray(trace.mu), np.asarray(trace.accepted)
    assert mu[0] == 1e-3
    for k in range(1, len(mu) - 1):
        ratio = mu[k + 1] / mu[k]
        expected = 1 / 3.0 if acc[k] else 3.0
        assert np.isclose(ratio, expected, rtol=1e-12) or mu[k + 1] in (opt.MU_MIN, opt.MU_MAX)


def test_trace_csv_and_determinism():
    a = opt.train(_rosenbrock(), np.array([-1.2, 1.0]))
    b = opt.train(_rosenbrock(), np.array([-1.2, 1.0]))
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == "iteration,loss,mu,step_norm,accepted"
    assert len(lines) == len(a.loss) + 1


def test_config_validation():
    for bad in (dict(mu0=0), dict(nu=1.0), dict(solver="svd"), dict(max_rejects=0)):
        with pytest.raises(ValueError):
            opt.LMConfig(**bad)
    cfg = opt.LMConfig()
    assert (cfg.mu0, cfg.nu, cfg.max_iters, cfg.tol, cfg.solver) == (1e-3, 3.0, 1000, 1e-15, "qr")
    assert opt.LMConfig(**cfg.to_dict()) == cfg

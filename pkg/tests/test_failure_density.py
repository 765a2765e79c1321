import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbto.failure_density import (
    FailureDensityModel,
    FailureModelOverflowError,
    initial_model,
    log_density,
    penalty_gradient,
    residual_and_score,
    update,
)


def model(alpha, beta, eta_f=0.2):
    return FailureDensityModel(alpha, np.asarray(beta, dtype=float), eta_f)


def test_log_density_zero_model():
    m = model(0.0, [0.0, 0.0])
    for theta in ([0.0, 0.0], [1.0, -2.0], [100.0, 3.0]):
        assert log_density(m, np.array(theta)) == 0.0


def test_log_density_value():
    m = model(1.0, [2.0])
    assert log_density(m, np.array([0.5])) == pytest.approx(-2.0)


@given(t=st.floats(-10, 10), theta0=st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_log_density_translation(t, theta0):
    m = model(0.7, [1.3, -0.4])
    base = np.array([theta0, 2.0])
    shifted = base + np.array([t, 0.0])
    diff = log_density(m, shifted) - log_density(m, base)
    assert diff == pytest.approx(-1.3 * t, rel=1e-9, abs=1e-9)


def test_residual_zero_when_exponent_is_zero():
    m = model(0.0, [0.0, 0.0])  # alpha = -ln(1)
    theta = np.array([0.4, 0.7])
    q, score = residual_and_score(m, [theta])
    assert q == 0.0
    assert np.allclose(score, [-1.0, -0.4, -0.7])


def test_residual_log_two():
    m = model(np.log(2.0), [0.0])
    q, _ = residual_and_score(m, [np.array([1.0])])
    assert q == pytest.approx(-0.5)


def test_score_times_residual_matches_finite_differences():
    rng = np.random.default_rng(5)
    failed = rng.uniform(0.0, 1.0, size=(3, 4))
    m = model(0.3, rng.standard_normal(4) * 0.5)

    def half_q_squared(alpha, beta):
        exps = np.exp(-alpha - failed @ beta)
        return 0.5 * (np.sum(exps) - 1.0) ** 2

    q, score = residual_and_score(m, failed)
    grad = score * q
    h = 1e-6
    fd = np.empty(5)
    fd[0] = (half_q_squared(m.alpha + h, m.beta) - half_q_squared(m.alpha - h, m.beta)) / (2 * h)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd[i + 1] = (half_q_squared(m.alpha, m.beta + e) - half_q_squared(m.alpha, m.beta - e)) / (2 * h)
    assert np.allclose(grad, fd, rtol=1e-6, atol=1e-9)


def test_update_noop_at_zero_residual():
    m = model(0.0, [0.0, 0.0])
    m2 = update(m, [np.array([0.4, 0.7])])
    assert m2.alpha == m.alpha
    assert np.array_equal(m2.beta, m.beta)


def test_update_noop_on_empty_batch():
    m = model(0.3, [0.1])
    assert update(m, np.empty((0, 1))) is m


def test_update_descends_on_residual():
    # starting parameters and step size of the benchmark configuration
    m = model(0.01, [0.01, 0.01], eta_f=0.2)
    theta = np.array([0.1, np.pi / 4])

    def half_q_squared(mm):
        q, _ = residual_and_score(mm, [theta])
        return 0.5 * q**2

    before = half_q_squared(m)
    after = half_q_squared(update(m, [theta]))
    assert after < before


def test_update_converges_to_unit_mass_manifold():
    m = model(0.01, [0.01, 0.01], eta_f=0.2)
    theta = np.array([0.1, np.pi / 4])
    for _ in range(10**4):
        m = update(m, [theta])
    assert abs(m.alpha + m.beta @ theta) < 1e-8


def test_update_overflow_raises():
    m = model(-800.0, [0.0], eta_f=0.2)
    with pytest.raises(FailureModelOverflowError):
        update(m, [np.array([1.0])])


def test_penalty_zero_at_boundary_and_below():
    m = model(0.0, [1.0, 2.0])
    assert np.array_equal(penalty_gradient(m, 1e-3, 1e-3, 10.0), [0.0, 0.0])
    assert np.array_equal(penalty_gradient(m, 5e-4, 1e-3, 10.0), [0.0, 0.0])
    assert np.array_equal(penalty_gradient(m, 0.0, 1e-3, 10.0), [0.0, 0.0])


def test_penalty_one_log_unit_above_allowable():
    # log factor exactly 1; the gradient of the log failure probability under
    # the exponential density model is -beta, so the penalty is -kappa*beta
    m = model(0.0, [1.0, 2.0])
    p_a = 1e-3
    grad = penalty_gradient(m, np.e * p_a, p_a, 1.0)
    assert np.allclose(grad, [-1.0, -2.0], rtol=1e-12)


@given(scale=st.floats(0.1, 10.0), kappa=st.floats(0.0, 100.0))
@settings(max_examples=50, deadline=None)
def test_penalty_positively_homogeneous(scale, kappa):
    beta = np.array([0.5, -1.5])
    m1 = model(0.0, beta)
    m2 = model(0.0, scale * beta)
    g1 = penalty_gradient(m1, 1e-2, 1e-3, kappa)
    g2 = penalty_gradient(m2, 1e-2, 1e-3, kappa)
    assert np.allclose(g2, scale * g1, rtol=1e-9, atol=1e-12)
    g3 = penalty_gradient(m1, 1e-2, 1e-3, 7.0 * kappa)
    assert np.allclose(g3, 7.0 * g1, rtol=1e-9, atol=1e-12)


def test_model_fixed_over_window_without_failures():
    m = initial_model(3, alpha0=0.01, beta0=0.01, eta_f=0.2)
    # the optimizer skips update() entirely when no draw fails; the model
    # object is immutable, so identity is preserved across such a window
    m2 = update(m, np.empty((0, 3)))
    assert m2 is m


def test_invalid_inputs():
    m = model(0.0, [1.0])
    with pytest.raises(ValueError):
        penalty_gradient(m, 0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        penalty_gradient(m, 1.5, 1e-3, 1.0)
    with pytest.raises(ValueError):
        residual_and_score(m, np.empty((0, 1)))
    with pytest.raises(ValueError):
        log_density(m, np.array([1.0, 2.0]))

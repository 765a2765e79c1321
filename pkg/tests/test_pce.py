import math

import numpy as np
import pytest

from rbto.pce import (
    PceFitError,
    basis_matrix,
    fit_least_squares,
    hermite,
    multi_indices,
)
from rbto.sampling import Lognormal, Normal, RandomInput, SampleStream
from rbto.truss import TrussProblem, limit_state

U1 = RandomInput((Normal(0.0, 1.0),))
U2 = RandomInput((Normal(0.0, 1.0), Normal(0.0, 1.0)))


def test_multi_index_cardinalities():
    assert len(multi_indices(2, 4)) == 15
    assert multi_indices(1, 3).indices == ((0,), (1,), (2,), (3,))
    assert multi_indices(2, 0).indices == ((0, 0),)


def test_multi_index_graded_order():
    idx = multi_indices(3, 4)
    assert idx.indices[0] == (0, 0, 0)
    totals = [sum(t) for t in idx.indices]
    assert totals == sorted(totals)
    assert len(idx) == math.comb(7, 3)


def test_hermite_order_zero_is_one():
    for x in (-3.0, 0.0, 1.7):
        assert hermite(0, x) == 1.0


def test_hermite_second_order_at_zero():
    # He_2(x) = x^2 - 1 normalized by sqrt(2!)
    assert hermite(2, 0.0) == pytest.approx(-0.7071068, abs=1e-7)


def test_hermite_orthonormality_monte_carlo():
    u = SampleStream(101).child("ortho").rng().standard_normal(10**6)
    inner = np.mean(hermite(2, u) * hermite(3, u))
    assert abs(inner) < 5e-3


def test_empirical_gram_is_identity():
    # entrywise tolerance from the exact Monte Carlo standard error: products
    # of order-4 basis terms have fourth moments in the hundreds, so a flat
    # small tolerance at this sample count would be a sub-sigma window
    idx = multi_indices(2, 4)
    n = 10**6
    u = SampleStream(13).child("gram").rng().standard_normal((n, 2))
    psi = basis_matrix(u, idx)
    gram = psi.T @ psi / n
    second = psi**2
    entry_var = (second.T @ second / n) - gram**2
    tol = np.maximum(0.01, 4.0 * np.sqrt(entry_var / n))
    assert np.all(np.abs(gram - np.eye(len(idx))) < tol)


def test_exact_recovery_of_low_degree_model():
    idx4 = multi_indices(2, 4)
    idx2 = multi_indices(2, 2)
    rng = SampleStream(3).child("fit").rng()
    coef2 = rng.standard_normal(len(idx2))
    u = rng.standard_normal((2 * len(idx4), 2))
    values = basis_matrix(u, idx2) @ coef2
    model = fit_least_squares(u, values, idx4, U2)
    # low-degree coefficients recovered, the rest vanish
    lookup = {t: c for t, c in zip(idx4.indices, model.coefficients)}
    for t, c in zip(idx2.indices, coef2):
        assert lookup[t] == pytest.approx(c, abs=1e-10)
    high = [lookup[t] for t in idx4.indices if sum(t) > 2]
    assert np.abs(high).max() < 1e-10


def test_constant_values_give_constant_model():
    idx = multi_indices(2, 3)
    u = SampleStream(5).child("const").rng().standard_normal((40, 2))
    model = fit_least_squares(u, np.full(40, 2.5), idx, U2)
    assert model.coefficients[0] == pytest.approx(2.5, abs=1e-12)
    assert np.abs(model.coefficients[1:]).max() < 1e-12


def test_truss_limit_state_surrogate_holdout():
    prob = TrussProblem()
    lam, delta = 0.3425, np.deg2rad(43.25)
    rng = SampleStream(17).child("truss-pce").rng()
    u_fit = rng.standard_normal((100, 1))
    g_fit = limit_state(prob, lam, delta, u_fit[:, 0])
    model = fit_least_squares(u_fit, g_fit, multi_indices(1, 4), U1)
    u_out = rng.standard_normal((10**4, 1))
    g_out = limit_state(prob, lam, delta, u_out[:, 0])
    rms = np.sqrt(np.mean((model.evaluate_u(u_out) - g_out) ** 2))
    assert rms < 0.01 * (g_out.max() - g_out.min())


def test_square_interpolation_reproduces_values():
    idx = multi_indices(1, 4)
    rng = SampleStream(23).child("interp").rng()
    u = rng.standard_normal((len(idx), 1))
    y = rng.standard_normal(len(idx))
    model = fit_least_squares(u, y, idx, U1)
    assert np.allclose(model.evaluate_u(u), y, atol=1e-8)


def test_rank_deficient_fit_raises_with_condition():
    idx = multi_indices(1, 3)
    u = np.zeros((8, 1))  # all samples identical: rank-1 design matrix
    with pytest.raises(PceFitError, match="condition"):
        fit_least_squares(u, np.ones(8), idx, U1)


def test_underdetermined_fit_rejected():
    idx = multi_indices(2, 4)
    u = SampleStream(1).child("few").rng().standard_normal((len(idx) - 1, 2))
    with pytest.raises(PceFitError):
        fit_least_squares(u, np.zeros(len(idx) - 1), idx, U2)


def test_physical_space_evaluate_matches_u_space():
    input_map = RandomInput((Lognormal(1.0, 0.1), Normal(2.0, 0.5)))
    idx = multi_indices(2, 2)
    rng = SampleStream(9).child("phys").rng()
    u = rng.standard_normal((30, 2))
    y = 1.0 + u[:, 0] - 0.3 * u[:, 1] + 0.2 * u[:, 0] * u[:, 1]
    model = fit_least_squares(u, y, idx, input_map)
    x = input_map.from_u(u[:5])
    assert np.allclose(model.evaluate(x), model.evaluate_u(u[:5]), atol=1e-10)
    assert model.evaluate(x[0]) == pytest.approx(model.evaluate_u(u[0]), abs=1e-10)

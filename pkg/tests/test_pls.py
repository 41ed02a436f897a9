import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csbc import pls
from csbc.errors import ConfigurationError, DegenerateTargetError, FormatError, InputError


def design(n=20, d=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + 0.3 * rng.normal(size=n)
    return X, y


def ols_fitted(X, y):
    # normal equations with an intercept column
    A = np.column_stack([np.ones(len(X)), X])
    beta = np.linalg.solve(A.T @ A, A.T @ y)
    return A @ beta


def test_single_feature_is_simple_regression():
    rng = np.random.default_rng(1)
    x = rng.normal(size=15)
    y = 0.3 + 2.0 * x + 0.1 * rng.normal(size=15)
    slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
    intercept = y.mean() - slope * x.mean()
    m = pls.fit(x[:, None], y, 1)
    grid = np.linspace(-3, 3, 13)[:, None]
    np.testing.assert_allclose(m.predict(grid), intercept + slope * grid[:, 0], atol=1e-10)


def test_full_rank_matches_ols():
    X, y = design()
    m = pls.fit(X, y, 6)
    np.testing.assert_allclose(m.predict(X), ols_fitted(X, y), atol=1e-8)


def test_degenerate_target():
    X, _ = design()
    with pytest.raises(DegenerateTargetError):
        pls.fit(X, np.full(20, 0.7), 2)


@pytest.mark.parametrize("k", [0, 20, 7, 2.0, True])
def test_component_range(k):
    X, y = design()
    with pytest.raises(ConfigurationError):
        pls.fit(X, y, k)


def test_nan_rejected():
    X, y = design()
    X[3, 2] = np.nan
    with pytest.raises(InputError):
        pls.fit(X, y, 2)


def test_predict_at_mean_and_dimension_check():
    X, y = design(seed=3)
    m = pls.fit(X, y, 3)
    assert m.predict(m.x_mean) == pytest.approx(m.y_mean, abs=1e-15)
    with pytest.raises(InputError):
        m.predict(np.zeros(5))


def test_prediction_can_leave_unit_interval():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 3))
    y = np.clip(0.5 + 0.2 * X[:, 0], 0, 1)
    m = pls.fit(X, y, 1)
    assert m.predict(np.array([20.0, 0, 0])) > 1.0


def test_weights_unit_norm_and_scores_orthogonal():
    X, y = design(40, 12, seed=5)
    m = pls.fit(X, y, 8)
    np.testing.assert_allclose(np.linalg.norm(m.weights, axis=0), 1.0, atol=1e-12)
    t = m.transform(X)
    for i in range(8):
        for j in range(i):
            bound = 1e-8 * np.linalg.norm(t[:, i]) * np.linalg.norm(t[:, j])
            assert abs(t[:, i] @ t[:, j]) <= bound


def test_latent_and_direct_prediction_agree():
    X, y = design(40, 12, seed=6)
    m = pls.fit(X, y, 5)
    Z = np.random.default_rng(0).normal(size=(50, 12)) * 3
    np.testing.assert_allclose(m.predict_latent(Z), m.predict(Z), atol=1e-8)


def test_r2_non_decreasing_in_k():
    X, y = design(30, 10, seed=7)
    r2 = [pls.r_squared(pls.fit(X, y, k), X, y) for k in range(1, 11)]
    assert all(b >= a - 1e-12 for a, b in zip(r2, r2[1:]))


def test_zero_variance_column_gets_zero_weight():
    X, y = design(seed=8)
    X[:, 2] = 4.0
    m = pls.fit(X, y, 3)
    assert np.all(m.weights[2] == 0.0) and m.coef[2] == 0.0


def test_early_stop_on_exhausted_covariance():
    # y is exactly explained by one direction: the second component has no
    # residual covariance left
    X = np.zeros((10, 3))
    X[:, 0] = np.arange(10.0)
    y = 0.1 * X[:, 0]
    m = pls.fit(X, y, 2)
    assert m.n_components == 1 and m.n_components_requested == 2
    np.testing.assert_allclose(m.predict(X), y, atol=1e-12)


def test_scaling_knob():
    X, y = design(seed=9)
    X[:, 0] *= 1000
    m = pls.fit(X, y, 6, scale=True)
    np.testing.assert_allclose(m.predict(X), ols_fitted(X, y), atol=1e-8)
    np.testing.assert_allclose(m.predict_latent(X), m.predict(X), atol=1e-8)


def test_deterministic():
    X, y = design(seed=10)
    assert pls.dumps(pls.fit(X, y, 4)) == pls.dumps(pls.fit(X, y, 4))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_predict_is_affine(seed, alpha):
    X, y = design(25, 7, seed=seed)
    m = pls.fit(X, y, 3)
    rng = np.random.default_rng(seed + 1)
    a, b = rng.normal(size=7), rng.normal(size=7)
    lhs = m.predict(alpha * a + (1 - alpha) * b)
    rhs = alpha * m.predict(a) + (1 - alpha) * m.predict(b)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(alpha)))


# --- serialization -----------------------------------------------------------


def test_save_load_bit_exact():
    X, y = design(seed=11)
    m = pls.fit(X, y, 4, feature_tag="glcm")
    buf = io.BytesIO()
    pls.save_model(m, buf)
    back = pls.load_model(io.BytesIO(buf.getvalue()))
    assert back.feature_tag == "glcm" and back.n_components == 4 and back.dims == 6
    Z = np.random.default_rng(1).normal(size=(100, 6))
    assert np.array_equal(back.predict(Z), m.predict(Z))
    for name in ("x_mean", "x_scale", "weights", "loadings", "y_loadings", "coef"):
        assert np.array_equal(getattr(back, name), getattr(m, name))
    assert back.y_mean == m.y_mean


def test_truncated_stream():
    X, y = design(seed=12)
    data = pls.dumps(pls.fit(X, y, 2))
    for cut in (3, 10, 30, len(data) - 1):
        with pytest.raises(FormatError):
            pls.loads(data[:cut])


def test_unknown_version_named():
    X, y = design(seed=13)
    data = pls.dumps(pls.fit(X, y, 2))
    bad = data.replace(b'"version": 1', b'"version": 7')
    with pytest.raises(FormatError, match="7"):
        pls.loads(bad)

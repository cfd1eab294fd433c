"""Norm-ball projections: exactness against oracles and metric properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from l1poison.projections import (
    norm_value,
    project_ball,
    project_l1,
    project_l2,
    project_linf,
)
from l1poison.reference import project_l1_sort

NORMS = ("l1", "l2", "linf")
PROJECT = {"l1": project_l1, "l2": project_l2, "linf": project_linf}

finite_vec = arrays(
    np.float64,
    st.integers(min_value=1, max_value=30),
    elements=st.floats(min_value=-50, max_value=50, allow_nan=False),
)
radius = st.floats(min_value=0.0, max_value=20.0, allow_nan=False)


class TestL1Projection:
    def test_inside_ball_is_identity(self):
        x = np.array([0.2, -0.3, 0.1])
        out = project_l1(x, 1.0)
        assert np.array_equal(out, x)

    def test_known_simplex_case(self):
        # projecting (2, 0) onto the unit l1 ball gives (1, 0)
        out = project_l1(np.array([2.0, 0.0]), 1.0)
        assert np.allclose(out, [1.0, 0.0])

    def test_symmetric_shrink(self):
        out = project_l1(np.array([2.0, 2.0]), 2.0)
        assert np.allclose(out, [1.0, 1.0])

    def test_zero_radius_returns_zero(self):
        out = project_l1(np.array([1.0, -2.0]), 0.0)
        assert np.array_equal(out, np.zeros(2))

    def test_matrix_input_keeps_shape(self):
        X = np.array([[3.0, 0.0], [0.0, -4.0]])
        out = project_l1(X, 2.0)
        assert out.shape == X.shape
        assert norm_value(out, "l1") <= 2.0 + 1e-12

    def test_pivot_matches_sort_oracle_bitwise(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            n = rng.integers(1, 60)
            x = rng.standard_normal(n) * rng.uniform(0.1, 10)
            eta = rng.uniform(0.01, 5.0)
            fast = project_l1(x, eta)
            oracle = project_l1_sort(x, eta)
            assert np.array_equal(fast, oracle)

    def test_numba_and_numpy_kernels_agree(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            x = rng.standard_normal(40) * 3
            eta = rng.uniform(0.1, 4.0)
            a = project_l1(x, eta, impl="numpy")
            b = project_l1(x, eta, impl="numba")
            assert np.array_equal(a, b)

    def test_qp_oracle_small_dims(self):
        cvxpy = pytest.importorskip("cvxpy")
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(1, 6))
            x = rng.standard_normal(n) * 2
            eta = float(rng.uniform(0.05, 3.0))
            z = cvxpy.Variable(n)
            prob = cvxpy.Problem(
                cvxpy.Minimize(cvxpy.sum_squares(z - x)),
                [cvxpy.norm1(z) <= eta],
            )
            prob.solve(solver=cvxpy.CLARABEL)
            assert np.allclose(project_l1(x, eta), z.value, atol=1e-6)


class TestL2Linf:
    def test_l2_rescales_outside(self):
        out = project_l2(np.array([3.0, 4.0]), 1.0)
        assert np.allclose(out, [0.6, 0.8])

    def test_l2_identity_inside(self):
        x = np.array([0.3, 0.4])
        assert np.array_equal(project_l2(x, 1.0), x)

    def test_linf_clamps(self):
        out = project_linf(np.array([2.0, -0.5, -3.0]), 1.0)
        assert np.allclose(out, [1.0, -0.5, -1.0])


class TestProjectBall:
    def test_translated_ball(self):
        center = np.array([1.0, 1.0])
        out = project_ball(center, "l2", 1.0, np.array([4.0, 1.0]))
        assert np.allclose(out, [2.0, 1.0])

    def test_unknown_norm_rejected(self):
        with pytest.raises(ValueError, match="norm"):
            project_ball(np.zeros(2), "l7", 1.0, np.ones(2))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            project_ball(np.zeros(2), "l2", 1.0, np.ones(3))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            project_l2(np.array([np.inf, 0.0]), 1.0)


@pytest.mark.parametrize("norm", NORMS)
class TestProjectionProperties:
    @given(x=finite_vec, eta=radius)
    @settings(max_examples=60, deadline=None)
    def test_result_in_ball(self, norm, x, eta):
        out = PROJECT[norm](x, eta)
        assert norm_value(out, norm) <= eta * (1 + 1e-12) + 1e-12

    @given(x=finite_vec, eta=radius)
    @settings(max_examples=60, deadline=None)
    def test_idempotent(self, norm, x, eta):
        once = PROJECT[norm](x, eta)
        twice = PROJECT[norm](once, eta)
        assert np.allclose(once, twice, atol=1e-12)

    @given(x=finite_vec, eta=radius)
    @settings(max_examples=60, deadline=None)
    def test_identity_inside(self, norm, x, eta):
        if norm_value(x, norm) <= eta:
            assert np.array_equal(PROJECT[norm](x, eta), x)

    @given(data=st.data(), eta=radius)
    @settings(max_examples=60, deadline=None)
    def test_nonexpansive(self, norm, data, eta):
        n = data.draw(st.integers(min_value=1, max_value=20))
        elems = st.floats(min_value=-50, max_value=50, allow_nan=False)
        x = data.draw(arrays(np.float64, n, elements=elems))
        y = data.draw(arrays(np.float64, n, elements=elems))
        px = PROJECT[norm](x, eta)
        py = PROJECT[norm](y, eta)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9


class TestNormValue:
    def test_norm_values(self):
        x = np.array([3.0, -4.0])
        assert norm_value(x, "l1") == 7.0
        assert norm_value(x, "l2") == 5.0
        assert norm_value(x, "linf") == 4.0

    def test_matrix_uses_vectorization(self):
        X = np.array([[3.0, 0.0], [0.0, -4.0]])
        assert norm_value(X, "l2") == 5.0

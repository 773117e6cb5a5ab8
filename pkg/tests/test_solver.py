import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brockett_brute_force
from stiefeldr.benchmark import brockett_gradient, brockett_optimum, brockett_value, pca_problem
from stiefeldr.exceptions import DimensionError, NonFiniteObjectiveError, ObjectiveError
from stiefeldr.manifold import distance, feasibility_error, gram_schmidt, random_stiefel
from stiefeldr.solver import (
    ObjectiveSpec,
    SolverControl,
    cayley_step,
    cayley_step_lowrank,
    curvilinear_search,
    minimize_stiefel,
    numeric_gradient,
    ortho_optim,
    skew_lift,
)

E1 = np.array([[1.0], [0.0]])
E2 = np.array([[0.0], [1.0]])


def random_skew(p, rng):
    M = rng.standard_normal((p, p))
    return M - M.T


class TestSkewLift:
    def test_gradient_equal_to_square_b_gives_zero(self):
        B = random_stiefel(4, 4, 0)
        np.testing.assert_array_equal(skew_lift(B, B), np.zeros((4, 4)))

    def test_two_by_two(self):
        np.testing.assert_array_equal(skew_lift(E1, E2), [[0, -1], [1, 0]])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 8))
    def test_skew(self, seed, p):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, p + 1))
        A = skew_lift(random_stiefel(p, d, rng), rng.standard_normal((p, d)))
        assert np.abs(A + A.T).max() <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            skew_lift(np.eye(3, 2), np.ones((3, 1)))


class TestCayley:
    def test_zero_step_is_identity(self):
        B = random_stiefel(5, 2, 1)
        A = random_skew(5, np.random.default_rng(1))
        np.testing.assert_array_equal(cayley_step(B, A, 0.0), B)

    def test_two_by_two_rotation(self):
        A = np.array([[0.0, -1], [1, 0]])
        np.testing.assert_allclose(cayley_step(E1, A, 2.0), [[0.0], [-1.0]], atol=1e-12)

    def test_negative_tau(self):
        with pytest.raises(ValueError):
            cayley_step(E1, np.zeros((2, 2)), -1.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 8), tau=st.floats(0, 50))
    def test_feasible(self, seed, p, tau):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, p + 1))
        B = random_stiefel(p, d, rng)
        assert feasibility_error(cayley_step(B, random_skew(p, rng), tau)) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 6), tau=st.floats(0.01, 10))
    def test_factor_is_rotation(self, seed, p, tau):
        A = random_skew(p, np.random.default_rng(seed))
        factor = cayley_step(np.eye(p), A, tau)
        np.testing.assert_allclose(np.linalg.svd(factor, compute_uv=False), np.ones(p), atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), tau=st.floats(0, 5))
    def test_low_rank_matches_dense(self, seed, tau):
        rng = np.random.default_rng(seed)
        B = random_stiefel(9, 2, rng)
        G = rng.standard_normal((9, 2))
        np.testing.assert_allclose(
            cayley_step_lowrank(B, G, tau), cayley_step(B, skew_lift(B, G), tau), atol=1e-12
        )


def brockett_spec(X, D):
    return ObjectiveSpec(brockett_value, brockett_gradient, extra_args=(X, D))


class TestCurvilinearSearch:
    def test_zero_gradient_stalls(self):
        B = random_stiefel(4, 2, 0)
        res = curvilinear_search(B, np.zeros((4, 2)), lambda b: 1.0, None, 1.0, fval=1.0)
        assert res.stalled
        np.testing.assert_array_equal(res.B, B)

    def test_discrete_manifold(self):
        # p = d = 1: B in {-1, 1}, the lift of any gradient is 0
        B = np.array([[1.0]])
        target = np.array([[-1.0]])
        res = curvilinear_search(B, 2 * (B - target), lambda b: float(np.sum((b - target) ** 2)), None, 4.0)
        assert res.stalled
        np.testing.assert_array_equal(res.B, B)

    def test_brockett_decreases(self):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((12, 12))
        X, D = M + M.T, np.diag([3.0, 2.0, 1.0])
        spec = brockett_spec(X, D)
        B = random_stiefel(12, 3, rng)
        f = spec.value(B)
        res = curvilinear_search(B, spec.gradient(B), spec, SolverControl(), f, fval=f)
        assert not res.stalled
        assert res.fval < f
        assert feasibility_error(res.B) <= 1e-10


class TestNumericGradient:
    def test_constant(self):
        G = numeric_gradient(random_stiefel(4, 2, 0), lambda b: 3.0)
        np.testing.assert_array_equal(G, np.zeros((4, 2)))

    def test_linear(self):
        G = numeric_gradient(random_stiefel(5, 3, 0), lambda b: float(b.sum()))
        np.testing.assert_allclose(G, np.ones((5, 3)), atol=1e-8)

    @pytest.mark.parametrize("scheme", ["central", "forward"])
    def test_brockett(self, scheme):
        rng = np.random.default_rng(5)
        M = rng.standard_normal((10, 10))
        X, D = M + M.T, np.diag([2.0, 1.0])
        B = random_stiefel(10, 2, rng)
        G = numeric_gradient(B, lambda b: brockett_value(b, X, D), 1e-6, scheme=scheme)
        assert np.abs(G - brockett_gradient(B, X, D)).max() <= 1e-4

    def test_thread_count_invariant(self):
        rng = np.random.default_rng(6)
        M = rng.standard_normal((8, 8))
        X, D = M + M.T, np.diag([2.0, 1.0])
        B = random_stiefel(8, 2, rng)
        f = lambda b: brockett_value(b, X, D)  # noqa: E731
        np.testing.assert_array_equal(numeric_gradient(B, f, 1e-6, 1), numeric_gradient(B, f, 1e-6, 3))

    def test_non_finite_names_entry(self):
        def f(b):
            return np.inf if b[1, 0] > 0.5 else 0.0

        with pytest.raises(NonFiniteObjectiveError, match=r"\(1, 0\)"):
            numeric_gradient(np.array([[0.0], [0.5 - 1e-7]]), f)

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            numeric_gradient(np.eye(2, 1), lambda b: 0.0, 0.0)


class TestControl:
    def test_defaults(self):
        c = SolverControl()
        assert (c.ftol, c.gtol, c.btol, c.epsilon, c.maxitr) == (1e-6, 1e-6, 1e-6, 1e-6, 500)

    @pytest.mark.parametrize(
        "kwargs",
        [{"ftol": -1}, {"epsilon": 0}, {"eta": 1.0}, {"rho": 0.5}, {"maxitr": 0},
         {"num_threads": 0}, {"fd_scheme": "backward"}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SolverControl(**kwargs)

    def test_from_dict(self):
        assert SolverControl.from_any({"maxitr": 7}).maxitr == 7


class TestOrthoOptim:
    def test_small_brockett_matches_oracles(self):
        X = np.diag([1.0, 2.0, 3.0, 4.0])
        D = np.diag([2.0, 1.0])
        assert brockett_optimum(X, D) == pytest.approx(4.0, abs=1e-12)
        assert brockett_brute_force(X, D) == pytest.approx(4.0, abs=1e-12)
        res = ortho_optim(random_stiefel(4, 2, 2), brockett_value, brockett_gradient, args=(X, D),
                          gtol=1e-10, ftol=0, btol=0, maxitr=2000)
        assert res.fval == pytest.approx(4.0, abs=1e-8)
        assert distance(res.B, np.eye(4, 2)) <= 1e-4

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
    def test_eigen_oracle_matches_brute_force(self, seed, n):
        rng = np.random.default_rng(seed)
        X = np.diag(rng.standard_normal(n))
        p = int(rng.integers(1, n + 1))
        D = np.diag(np.sort(rng.uniform(0.1, 3, p))[::-1])
        assert brockett_optimum(X, D) == pytest.approx(brockett_brute_force(X, D), abs=1e-12)

    def test_full_space_trace(self):
        rng = np.random.default_rng(8)
        M = rng.standard_normal((4, 4))
        X = M + M.T
        assert brockett_optimum(X, np.eye(4)) == pytest.approx(np.trace(X), abs=1e-12)

    def test_constant_objective(self):
        B0 = random_stiefel(5, 2, 0)
        res = ortho_optim(B0, lambda b: 1.0)
        assert res.converged and res.iterations == 1
        np.testing.assert_array_equal(res.B, B0)
        assert len(res.fval_trace) == res.iterations + 1

    def test_result_contract(self):
        X = np.diag([1.0, 2, 3, 4, 5])
        D = np.diag([2.0, 1.0])
        res = ortho_optim(random_stiefel(5, 2, 1), brockett_value, brockett_gradient, args=(X, D))
        assert len(res.fval_trace) == res.iterations + 1
        assert res.fval == pytest.approx(brockett_value(res.B, X, D), rel=1e-12)
        assert res.fval_trace[-1] == res.fval
        assert res.elapsed >= 0

    def test_infeasible_start_is_orthonormalized(self):
        X = np.diag([1.0, 2, 3])
        res = ortho_optim(np.array([[2.0], [1.0], [1.0]]), brockett_value, brockett_gradient,
                          args=(X, np.eye(1)), maxitr=3)
        assert feasibility_error(res.B) <= 1e-10

    def test_every_iterate_feasible_and_nonmonotone(self):
        rng = np.random.default_rng(4)
        M = rng.standard_normal((30, 30))
        X, D = M + M.T, np.diag([4.0, 3, 2, 1])
        seen = []
        res = ortho_optim(random_stiefel(30, 4, rng), brockett_value, brockett_gradient, args=(X, D),
                          callback=lambda k, B, f: seen.append((feasibility_error(B), f)), maxitr=200)
        assert max(e for e, _ in seen) <= 1e-10
        trace = res.fval_trace
        for k in range(1, len(trace)):
            assert trace[k] <= max(trace[max(0, k - 5):k]) + 1e-12

    def test_maximize_equals_minimizing_negation(self):
        prob = pca_problem(60, 12, seed=2)
        X = prob.X
        w0 = gram_schmidt(np.random.default_rng(1).standard_normal((12, 1)))
        up = ortho_optim(w0, lambda w: float(np.sum((X @ w) ** 2)), lambda w: 2 * X.T @ (X @ w),
                         maximize=True)
        down = ortho_optim(w0, lambda w: -float(np.sum((X @ w) ** 2)), lambda w: -2 * X.T @ (X @ w))
        np.testing.assert_array_equal(up.B, down.B)
        np.testing.assert_array_equal(up.fval_trace, -down.fval_trace)

    def test_numeric_gradient_path(self):
        X = np.diag([1.0, 2, 3, 4])
        res = ortho_optim(random_stiefel(4, 1, 0), brockett_value, args=(X, np.eye(1)),
                          gtol=1e-8, maxitr=1000)
        assert res.fval == pytest.approx(1.0, abs=1e-6)

    def test_non_finite_start(self):
        with pytest.raises(ValueError):
            ortho_optim(np.eye(3, 1), lambda b: np.nan)

    def test_callback_error_carries_iteration(self):
        def cb(k, B, f):
            if k == 2:
                raise RuntimeError("boom")

        X = np.diag([1.0, 2, 3, 4])
        with pytest.raises(ObjectiveError) as info:
            ortho_optim(random_stiefel(4, 1, 0), brockett_value, brockett_gradient,
                        args=(X, np.eye(1)), callback=cb)
        assert info.value.iteration == 2

    def test_objective_error_wrapped(self):
        calls = []

        def f(b):
            calls.append(1)
            if len(calls) > 3:
                raise KeyError("bad")
            return float(b[1, 0])

        with pytest.raises(ObjectiveError) as info:
            ortho_optim(np.eye(3, 1), f, lambda b: np.array([[0.0], [1], [0]]))
        assert isinstance(info.value.original, KeyError)

    def test_minimize_stiefel_reports_fevals(self):
        X = np.diag([1.0, 2, 3, 4])
        spec = ObjectiveSpec(brockett_value, brockett_gradient, extra_args=(X, np.eye(1)))
        res = minimize_stiefel(spec, random_stiefel(4, 1, 0))
        assert res.n_fevals >= res.iterations

import numpy as np
import pytest
from scipy.optimize import linprog

from empc_dispatch.optimizer import (EQ, GE, INFEASIBLE, ITERATION_LIMIT, LE, OPTIMAL,
                                     UNBOUNDED, LinearProgram, PwlModel, SolverError, lower,
                                     simplex, solve_lp, solve_model)

from oracles import random_lp, vertex_enumeration

METHODS = ("highs", "simplex")


def with_nonneg_rows(c, A_ub, b_ub):
    n = len(c)
    return np.vstack([A_ub, -np.eye(n)]), np.concatenate([b_ub, np.zeros(n)])


def random_pwl(rng, n=4):
    """Bounded random model mixing linear, |.| and max terms."""
    model = PwlModel()
    v = model.add_variables(n, lb=-5.0, ub=5.0)
    model.add_objective(v, rng.normal(size=n))
    for _ in range(int(rng.integers(0, 3))):
        cols = rng.choice(v, size=2, replace=False)[None, :]
        model.add_constraints(cols, rng.normal(size=(1, 2)), LE, rng.uniform(0, 3))
    k = int(rng.integers(1, 4))
    model.add_abs_terms(rng.uniform(0, 2, k), rng.choice(v, size=(k, 2)),
                        rng.normal(size=(k, 2)), rng.normal(size=k))
    j = int(rng.integers(1, 4))
    model.add_max_term(float(rng.uniform(0, 2)), cols=rng.choice(v, size=(j, 2)),
                       vals=rng.normal(size=(j, 2)), const=rng.normal(size=j),
                       constants=(float(rng.normal()),))
    model.add_constant(float(rng.normal()))
    return model


class TestModelExamples:
    @pytest.mark.parametrize("method", METHODS)
    def test_abs_with_bound(self, method):
        m = PwlModel()
        x = m.add_variables(1, lb=-5.0)
        m.add_abs_terms(1.0, x)
        sol, obj, _ = solve_model(m, method=method)
        assert obj == pytest.approx(0.0, abs=1e-12) and sol[0] == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("method", METHODS)
    def test_max_pair(self, method):
        m = PwlModel()
        x = m.add_variables(1)
        m.add_max_term(1.0, cols=[[x[0]], [x[0]]], vals=[[1.0], [-1.0]], const=[0.0, 2.0])
        sol, obj, _ = solve_model(m, method=method)
        assert obj == pytest.approx(1.0) and sol[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("method", METHODS)
    def test_shifted_abs(self, method):
        m = PwlModel()
        x = m.add_variables(1)
        m.add_abs_terms(1.0, x, const=-3.0)
        sol, obj, _ = solve_model(m, method=method)
        assert obj == pytest.approx(0.0, abs=1e-12) and sol[0] == pytest.approx(3.0)

    def test_lowering_shape(self):
        m = PwlModel()
        x = m.add_variables(3)
        m.add_constraints([[0, 1]], [[1.0, 1.0]], GE, 1.0)
        m.add_constraints([[2]], [[1.0]], EQ, 2.0)
        m.add_abs_terms([1.0, 2.0], [[0], [1]])
        m.add_max_term(1.0, cols=x[:, None], constants=(0.0,))
        lp = lower(m)
        assert lp.n_model_vars == 3
        assert lp.n_vars == 3 + 2 + 1
        assert lp.n_rows == 2 + 4 + 3
        assert lp.is_eq.sum() == 1
        assert lp.lb[-1] == 0.0  # constant piece becomes the epigraph bound

    def test_rejects_negative_weights(self):
        m = PwlModel()
        x = m.add_variables(1)
        with pytest.raises(ValueError):
            m.add_abs_terms(-1.0, x)
        with pytest.raises(ValueError):
            m.add_max_term(-1.0, cols=x)
        with pytest.raises(ValueError):
            m.add_max_term(1.0)
        with pytest.raises(ValueError):
            m.add_constraints(x, None, "<", 0.0)

    def test_from_dense_bounds(self):
        lp = LinearProgram.from_dense([1, 1], [[1, 1]], [1], bounds=[(0, None), (None, 3)])
        assert lp.lb.tolist() == [0, -np.inf] and lp.ub.tolist() == [np.inf, 3]
        with pytest.raises(ValueError):
            LinearProgram(np.zeros(2), lp.A, np.zeros(2), np.zeros(2, bool), lp.lb, lp.ub)


class TestSolveExamples:
    @pytest.mark.parametrize("method", METHODS)
    def test_bound_below(self, method):
        sol = solve_lp(LinearProgram.from_dense([1.0], [[-1.0]], [-3.0], bounds=(None, None)),
                       method=method)
        assert sol.status == OPTIMAL and sol.objective == pytest.approx(3.0)

    @pytest.mark.parametrize("method", METHODS)
    def test_infeasible(self, method):
        lp = LinearProgram.from_dense([1.0], [[-1.0], [1.0]], [-1.0, 0.0], bounds=(None, None))
        sol = solve_lp(lp, method=method)
        assert sol.status == INFEASIBLE and sol.x is None

    @pytest.mark.parametrize("method", METHODS)
    def test_triangle(self, method):
        sol = solve_lp(LinearProgram.from_dense([-1, -1], [[1, 1]], [1]), method=method)
        assert sol.status == OPTIMAL and sol.objective == pytest.approx(-1.0)

    @pytest.mark.parametrize("method", METHODS)
    def test_unbounded(self, method):
        sol = solve_lp(LinearProgram.from_dense([-1, 0], [[0, 1]], [1]), method=method)
        assert sol.status == UNBOUNDED

    def test_infeasibility_certificate(self):
        # x + y <= 1, x + y >= 3
        lp = LinearProgram.from_dense([1, 1], [[1, 1], [-1, -1]], [1, -3])
        sol = simplex(lp)
        assert sol.status == INFEASIBLE
        assert sol.certificate is not None

    def test_unbounded_ray(self):
        lp = LinearProgram.from_dense([-1, -2], [[1, -1]], [1])
        sol = simplex(lp)
        assert sol.status == UNBOUNDED
        d = sol.certificate
        assert lp.c @ d < 0
        assert np.all(lp.A @ d <= 1e-9) and np.all(d >= -1e-9)

    @pytest.mark.parametrize("method", METHODS)
    def test_iteration_limit(self, method):
        rng = np.random.default_rng(3)
        A = rng.uniform(0.1, 1, (20, 20))
        lp = LinearProgram.from_dense(-np.ones(20), A, np.ones(20))
        assert solve_lp(lp, method=method, max_iter=1).status == ITERATION_LIMIT

    def test_solve_model_raises(self):
        m = PwlModel()
        x = m.add_variables(1, lb=2.0, ub=1.0)
        m.add_objective(x, 1.0)
        with pytest.raises(SolverError) as err:
            solve_model(m, context="toy")
        assert err.value.status == INFEASIBLE and "toy" in str(err.value)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            solve_lp(LinearProgram.from_dense([1.0], [[1.0]], [1.0]), method="cvx")

    def test_bland_on_degenerate_cycle_example(self):
        # Beale's example cycles under the textbook Dantzig rule
        c = [-0.75, 150, -0.02, 6]
        A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
        b = [0, 0, 1]
        lp = LinearProgram.from_dense(c, A, b)
        for rule in ("bland", "dantzig"):
            sol = simplex(lp, pivot_rule=rule)
            assert sol.status == OPTIMAL
            assert sol.objective == pytest.approx(-0.05)


@pytest.mark.parametrize("method", METHODS)
def test_random_lps_match_vertex_enumeration(method):
    rng = np.random.default_rng(2024)
    for _ in range(200):
        c, A_ub, b_ub, A_eq, b_eq = random_lp(rng)
        ref, _ = vertex_enumeration(c, *with_nonneg_rows(c, A_ub, b_ub), A_eq, b_eq)
        sol = solve_lp(LinearProgram.from_dense(c, A_ub, b_ub, A_eq, b_eq), method=method)
        if ref is None:
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-9)


def test_random_models_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(100):
        model = random_pwl(rng)
        for method in METHODS:
            x, obj, sol = solve_model(model, method=method)
            assert abs(model.evaluate(x) - obj) <= 1e-7 * max(1.0, abs(obj))


def test_lowered_matches_linprog():
    rng = np.random.default_rng(11)
    for _ in range(30):
        lp = lower(random_pwl(rng))
        A = lp.A.toarray()
        res = linprog(lp.c, A_ub=A[~lp.is_eq], b_ub=lp.rhs[~lp.is_eq],
                      A_eq=A[lp.is_eq] if lp.is_eq.any() else None,
                      b_eq=lp.rhs[lp.is_eq] if lp.is_eq.any() else None,
                      bounds=list(zip(lp.lb, lp.ub)), method="highs")
        sol = solve_lp(lp, method="simplex")
        assert sol.objective == pytest.approx(res.fun + lp.offset, rel=1e-7, abs=1e-9)


def test_scaling_invariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        c, A_ub, b_ub, A_eq, b_eq = random_lp(rng)
        base = solve_lp(LinearProgram.from_dense(c, A_ub, b_ub, A_eq, b_eq))
        scaled = solve_lp(LinearProgram.from_dense(1e3 * np.asarray(c), A_ub, b_ub, A_eq, b_eq))
        assert base.status == scaled.status
        if base.status == OPTIMAL:
            assert scaled.objective == pytest.approx(1e3 * base.objective, rel=1e-7, abs=1e-6)


def test_lp_format_reads_back(tmp_path):
    highspy = pytest.importorskip("highspy")
    rng = np.random.default_rng(9)
    model = random_pwl(rng)
    lp = lower(model)
    path = tmp_path / "m.lp"
    path.write_text(lp.to_lp_format())
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    obj = h.getInfo().objective_function_value + lp.offset
    assert obj == pytest.approx(solve_lp(lp).objective, rel=1e-9, abs=1e-9)

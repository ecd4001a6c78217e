import warnings

import numpy as np
import pytest

from nonsmooth_fw.core import evaluate_objective
from nonsmooth_fw.problems import (
    build_balanced_dev,
    build_graph_cut,
    build_l1svm,
    build_one_median,
    build_piecewise_linear,
    graph_cut_coreset_labels,
    graph_cut_direct_objective,
    svm_hyperplane_diagnostic,
)
from nonsmooth_fw.solver import SolverConfig, estimate_curvature, run

from conftest import l1_min_over_simplices, linf_hull_distance, median_points, schedule_run, weiszfeld


# --- l1 SVM ------------------------------------------------------------------


def test_svm_one_point_per_class():
    inst = build_l1svm(np.array([[1.0], [0.0]]), np.array([[-1.0], [0.0]]), 1)
    _, trace, _ = schedule_run(inst, max_iters=5)
    assert all(r.objective == 2.0 for r in trace)


def test_svm_duplicated_columns_keep_optimum():
    rng = np.random.default_rng(0)
    Ap, An = rng.standard_normal((3, 4)), rng.standard_normal((3, 5)) + 1
    base = linf_hull_distance(Ap, An)
    dup = linf_hull_distance(np.hstack([Ap, Ap[:, :2]]), np.hstack([An, An]))
    assert dup == pytest.approx(base, abs=1e-9)
    inst = build_l1svm(np.hstack([Ap, Ap[:, :2]]), np.hstack([An, An]), 1)
    _, trace, _ = run(inst, SolverConfig(max_iters=300, step_policy="bisection", eps_coeff=1e-4))
    assert trace[-1].objective == pytest.approx(base, abs=1e-6)


def test_svm_separable_gaussians_small_coreset():
    rng = np.random.default_rng(3)
    m = n = 150
    Ap = rng.standard_normal((2, m))
    An = rng.standard_normal((2, n))
    An[0] += 6
    inst = build_l1svm(Ap, An, 1)
    _, trace, cs = run(inst, SolverConfig(max_iters=300, step_policy="bisection", eps_coeff=1e-3, tol=1e-3))
    assert trace[-1].certified_bound <= 1e-3
    assert len(cs) <= (m + n) // 10


def test_svm_capped_optimum_matches_lp():
    rng = np.random.default_rng(5)
    Ap, An = rng.standard_normal((3, 6)), rng.standard_normal((3, 6)) + 0.5
    fstar = linf_hull_distance(Ap, An, R=2.0)
    inst = build_l1svm(Ap, An, 2.0)
    _, trace, _ = run(inst, SolverConfig(max_iters=400, step_policy="bisection", eps_coeff=1e-5))
    assert trace[-1].objective == pytest.approx(fstar, abs=1e-6)


def test_svm_errors():
    with pytest.raises(ValueError, match="each class"):
        build_l1svm(np.zeros((2, 0)), np.ones((2, 1)))
    with pytest.raises(ValueError, match="dimensions"):
        build_l1svm(np.zeros((2, 1)), np.ones((3, 1)))
    with pytest.raises(ValueError):
        build_l1svm(np.zeros((2, 1)), np.ones((2, 1)), R=0.5)


def test_svm_constants():
    Ap = np.array([[0.0, 2.0], [1.0, 1.0]])
    An = np.array([[0.0, 0.0, 1.0], [0.0, 3.0, 0.0]])
    inst = build_l1svm(Ap, An, 1.0)
    assert inst.lipschitz == 1.0
    assert inst.curvature_coeff == pytest.approx(2.0 * (2.0 + 3.0) ** 2)
    assert inst.data["decision_lipschitz"] == pytest.approx(5.0)


def test_svm_hyperplane_diagnostic_separates_clear_data():
    rng = np.random.default_rng(4)
    Ap = rng.standard_normal((3, 40))
    An = rng.standard_normal((3, 40))
    An[0] += 8
    inst = build_l1svm(Ap, An, 1)
    x, _, _ = run(inst, SolverConfig(max_iters=50, step_policy="bisection", eps_coeff=1e-3))
    w, gamma = svm_hyperplane_diagnostic(inst, x)
    assert np.abs(w).sum() == pytest.approx(1.0)
    assert (w @ Ap.mean(axis=1) - gamma) * (w @ An.mean(axis=1) - gamma) < 0


# --- 1-median ------------------------------------------------------------------


def test_median_single_point_optimum_zero():
    _, trace, _ = schedule_run(build_one_median(np.array([[2.0], [-1.0]])), max_iters=3)
    assert trace[-1].objective == 0.0


def test_median_two_points_half_distance():
    P = np.array([[0.0, 3.0], [0.0, 4.0]])
    inst = build_one_median(P)
    _, trace, _ = schedule_run(inst, max_iters=100)
    assert min(r.objective for r in trace) == pytest.approx(2.5, abs=1e-12)
    assert inst.curvature_coeff == pytest.approx(2 * 25.0)
    assert inst.data["diam2"] == pytest.approx(5.0)


def test_median_twenty_points_matches_weiszfeld():
    P = median_points(20, seed=1)
    _, fstar = weiszfeld(P)
    inst = build_one_median(P)
    _, trace, _ = run(inst, SolverConfig(max_iters=500, step_policy="bisection", eps_coeff=1e-6, tol=1e-6))
    assert abs(trace[-1].objective - fstar) <= 1e-4


def test_median_adds_at_most_one_atom_without_near_points():
    inst = build_one_median(median_points(30, seed=2))
    seen = set(np.flatnonzero(inst.feasible.default_point()).tolist())
    checked = 0

    def cb(info):
        nonlocal checked
        if info.T.near_count == 0:
            new = set(info.solution.support.tolist()) - seen
            assert len(new) <= 1
            checked += 1
        seen.update(info.solution.support.tolist())

    run(inst, SolverConfig(max_iters=200), callback=cb)
    assert checked > 100


# --- graph cuts ------------------------------------------------------------------


def test_graph_cut_no_free_nodes_is_constant():
    inst = build_graph_cut(2, 2, [(0, 1, 1.5)], {0: 0, 1: 1})
    assert inst.data["free_nodes"] == []
    _, trace, _ = schedule_run(inst, max_iters=3)
    assert all(r.objective == pytest.approx(3.0) for r in trace)


def test_graph_cut_path_any_mix_is_optimal():
    inst = build_graph_cut(3, 2, [(0, 1, 1.0), (1, 2, 1.0)], {0: 0, 2: 1})
    for t in np.linspace(0, 1, 11):
        assert inst.objective(np.array([t, 1 - t])) == pytest.approx(2.0)
    _, trace, _ = schedule_run(inst, max_iters=20)
    assert trace[-1].objective == pytest.approx(2.0)


def test_graph_cut_star_center_takes_leaf_label():
    edges = [(0, i, 1.0) for i in range(1, 5)]
    inst = build_graph_cut(5, 3, edges, {i: 1 for i in range(1, 5)})
    # with eps_0 = 1 every image coordinate is FREE and the box subproblem cannot move
    x, trace, cs = schedule_run(inst, max_iters=10, eps_coeff=1e-3)
    assert trace[-1].objective == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(x, [0, 1, 0])
    assert graph_cut_coreset_labels(inst, cs.union).tolist() == [1]


def test_graph_cut_kronecker_identity_random_labelings():
    rng = np.random.default_rng(6)
    n, d = 9, 3
    edges = [(u, v, float(rng.random())) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.4]
    inst = build_graph_cut(n, d, edges, {0: 0, 4: 1, 8: 2})
    for _ in range(50):
        x = inst.feasible.random_point(rng)
        assert evaluate_objective(inst, inst.image(x)) == pytest.approx(graph_cut_direct_objective(inst, x), abs=1e-10)


def test_graph_cut_grid_matches_lp():
    rng = np.random.default_rng(7)
    edges = []
    for i in range(3):
        for j in range(3):
            v = 3 * i + j
            if j < 2:
                edges.append((v, v + 1, float(rng.random() + 0.1)))
            if i < 2:
                edges.append((v, v + 3, float(rng.random() + 0.1)))
    inst = build_graph_cut(9, 3, edges, {0: 0, 2: 1, 8: 2})
    fstar = l1_min_over_simplices(inst.A, inst.b, list(inst.feasible.blocks))
    _, trace, _ = run(inst, SolverConfig(max_iters=300, step_policy="bisection", eps_coeff=1e-4))
    assert trace[-1].objective == pytest.approx(fstar, abs=1e-6)


def test_graph_cut_validation_and_warning():
    with pytest.raises(ValueError, match="self-loop"):
        build_graph_cut(2, 2, [(1, 1, 1.0)], {0: 0})
    with pytest.raises(ValueError, match="negative"):
        build_graph_cut(2, 2, [(0, 1, -1.0)], {0: 0})
    with pytest.raises(ValueError, match="label"):
        build_graph_cut(2, 2, [(0, 1, 1.0)], {0: 5})
    with pytest.raises(ValueError, match="seed"):
        build_graph_cut(2, 2, [(0, 1, 1.0)], {})
    with pytest.warns(UserWarning, match="no path"):
        build_graph_cut(4, 2, [(0, 1, 1.0), (2, 3, 1.0)], {0: 0, 1: 1})


def test_graph_cut_triangle_two_seeds():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inst = build_graph_cut(3, 2, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], {0: 0, 1: 1})
    assert inst.data["free_nodes"] == [2]
    assert inst.dim == 2


# --- balanced development ------------------------------------------------------


def test_balanced_single_product_is_linear():
    A = np.array([[2.0], [0.5], [1.0]])
    inst = build_balanced_dev(A, np.ones(3), np.ones(1))
    _, trace, _ = schedule_run(inst, max_iters=50)
    assert trace[-1].objective == pytest.approx(0.5)


def test_balanced_identity_two_by_two():
    inst = build_balanced_dev(np.eye(2), np.ones(2), np.ones(2))
    x, trace, _ = run(inst, SolverConfig(max_iters=100, step_policy="bisection", eps_coeff=1e-6))
    assert trace[-1].objective == pytest.approx(0.5, abs=1e-9)
    assert np.allclose(x, [0.5, 0.5], atol=1e-9)


def test_balanced_price_scaling():
    rng = np.random.default_rng(8)
    A, b, p = rng.random((3, 4)), rng.random(3) + 0.5, rng.random(4) + 0.5
    cfg = SolverConfig(max_iters=200, step_policy="bisection", eps_coeff=1e-6)
    x1, t1, _ = run(build_balanced_dev(A, b, p), cfg)
    x2, t2, _ = run(build_balanced_dev(A, b, 4.0 * p), cfg)
    assert t2[-1].objective == pytest.approx(t1[-1].objective / 4.0, rel=1e-9)
    assert np.allclose(x1, x2)


def test_balanced_reduces_to_piecewise_linear():
    rng = np.random.default_rng(9)
    A, b, p = rng.random((4, 3)), rng.random(4) + 0.1, rng.random(3) + 0.1
    inst = build_balanced_dev(A, b, p)
    for _ in range(20):
        y = rng.dirichlet(np.ones(4))
        direct = max((A[:, j] / b) @ y / p[j] for j in range(3))
        assert inst.objective(y) == pytest.approx(direct, rel=1e-12)


def test_balanced_rejects_nonpositive():
    with pytest.raises(ValueError):
        build_balanced_dev(np.eye(2), np.array([1.0, 0.0]), np.ones(2))
    with pytest.raises(ValueError):
        build_balanced_dev(np.eye(2), np.ones(2), np.array([1.0, -1.0]))


# --- curvature never exceeds the constructed constant ----------------------------


def _all_instances():
    rng = np.random.default_rng(10)
    yield build_l1svm(rng.standard_normal((3, 8)), rng.standard_normal((3, 8)) + 1, 2.0)
    yield build_one_median(rng.standard_normal((2, 12)))
    yield build_graph_cut(4, 2, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 1.0)], {0: 0, 3: 1})
    yield build_balanced_dev(rng.random((3, 4)), rng.random(3) + 0.5, rng.random(4) + 0.5)
    yield build_piecewise_linear(rng.standard_normal((5, 4)), rng.standard_normal(5))


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_curvature_estimate_below_constant(eps):
    for inst in _all_instances():
        est = estimate_curvature(inst, eps, num_samples=300, seed=1)
        assert est <= inst.curvature_coeff / eps, inst.name

"""Problem adapters: each returns a :class:`~nonsmooth_fw.core.ProblemInstance`.

All image-space objectives here are 1-Lipschitz in the norm that defines
their neighborhoods (sup norm for max and l-inf, l1 for graph cuts, l2 for
the median), so ``lipschitz = 1`` is the constant that enters the
certificates.  A decision-space bound is kept in ``data`` for reference.
"""

from __future__ import annotations

import warnings
from collections import deque

import numpy as np
import scipy.sparse as sp

from .core import (
    FeasibleSet,
    ProblemInstance,
    capped_simplex_product,
    column_diameter,
    curvature_coefficient,
    product_of_simplices,
    unit_simplex,
)
from .subdiff import vertex_set_linf


def _finite_matrix(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def make_instance(kind: str, A, b=None, feasible: FeasibleSet | None = None, name: str = "", **data) -> ProblemInstance:
    """Generic instance with ``D_f`` from the image diameter of the feasible set."""
    if not sp.issparse(A):
        A = _finite_matrix(A, "A")
    feasible = feasible or unit_simplex(A.shape[1])
    D_f = curvature_coefficient(kind, A, feasible)
    return ProblemInstance(kind, A, b, feasible, 1.0, D_f, name=name, data=dict(data))


def build_piecewise_linear(A, b=None) -> ProblemInstance:
    """``max_i (A x + b)_i`` over the unit simplex."""
    return make_instance("max", A, b, name="piecewise_linear")


# ---------------------------------------------------------------------------
# l1-regularized SVM dual


def build_l1svm(A_pos, A_neg, R: float = 1.0) -> ProblemInstance:
    """``min ||A+ u - A- v||_inf`` over reduced convex hulls with weights capped at ``1/R``.

    Columns of ``A_pos``/``A_neg`` are the examples of each class.
    """
    A_pos = _finite_matrix(A_pos, "A_pos")
    A_neg = _finite_matrix(A_neg, "A_neg")
    if A_pos.shape[1] < 1 or A_neg.shape[1] < 1:
        raise ValueError("each class needs at least one example")
    if A_pos.shape[0] != A_neg.shape[0]:
        raise ValueError(f"feature dimensions differ: {A_pos.shape[0]} vs {A_neg.shape[0]}")
    if R < 1:
        raise ValueError("R must be >= 1")
    m, n = A_pos.shape[1], A_neg.shape[1]
    fset = capped_simplex_product([m, n], 1.0 / R) if R > 1 else product_of_simplices([m, n])
    A = np.hstack([A_pos, -A_neg])
    diam = column_diameter(A_pos, np.inf) + column_diameter(A_neg, np.inf)
    D_f = 2.0 * diam**2
    data = {
        "num_pos": m,
        "num_neg": n,
        "R": float(R),
        "diam_inf": diam,
        "decision_lipschitz": float(np.abs(A).sum(axis=1).max()),
    }
    return ProblemInstance("linf", A, None, fset, 1.0, D_f, name="l1svm", data=data)


def svm_split(instance: ProblemInstance, x) -> tuple[np.ndarray, np.ndarray]:
    m = instance.data["num_pos"]
    x = np.asarray(x, dtype=float)
    return x[:m], x[m:]


def svm_hyperplane_diagnostic(instance: ProblemInstance, x, eps: float = 1e-6) -> tuple[np.ndarray, float]:
    """Best-effort ``(w, gamma)`` from a dual iterate.

    ``w`` is supported on the features attaining ``||A+ u - A- v||_inf`` and
    points along the sign of the gap; ``gamma`` splits the two reduced-hull
    points along ``w``.  Not certified.
    """
    u, v = svm_split(instance, x)
    A = np.asarray(instance.A)
    m = instance.data["num_pos"]
    p_pos, p_neg = A[:, :m] @ u, -A[:, m:] @ v
    gap = p_pos - p_neg
    V = vertex_set_linf(gap, eps)
    w = np.zeros(gap.size)
    w[V.indices] = V.signs
    w /= max(1, len(V))
    gamma = 0.5 * float(w @ (p_pos + p_neg))
    return w, gamma


# ---------------------------------------------------------------------------
# 1-median


def build_one_median(points) -> ProblemInstance:
    """Mean distance to ``points`` (one point per column), minimized over their convex hull."""
    P = _finite_matrix(points, "points")
    if P.shape[1] < 1:
        raise ValueError("need at least one point")
    diam2 = column_diameter(P, 2)
    data = {"points": P.T.copy(), "diam2": diam2}
    return ProblemInstance("median", P, None, unit_simplex(P.shape[1]), 1.0, 2.0 * diam2**2, name="one_median", data=data)


# ---------------------------------------------------------------------------
# multiway graph cuts


def incidence_matrix(num_nodes: int, edges) -> sp.csr_matrix:
    """Oriented incidence matrix: row ``e`` has +1 at ``u`` and -1 at ``v``."""
    E = len(edges)
    rows = np.repeat(np.arange(E), 2)
    cols = np.array([[u, v] for u, v, _ in edges], dtype=np.int64).ravel() if E else np.zeros(0, dtype=np.int64)
    vals = np.tile([1.0, -1.0], E)
    return sp.csr_matrix((vals, (rows, cols)), shape=(E, num_nodes))


def build_graph_cut(num_nodes: int, num_labels: int, edges, seeds: dict[int, int]) -> ProblemInstance:
    """Relaxed multiway cut ``sum_e w_e ||x_u - x_v||_1`` with seed labels fixed.

    ``edges`` holds ``(u, v, w)`` triples; ``seeds`` maps node to label.
    Seeded nodes are constants folded into the offset ``b``; only free nodes
    carry a simplex block.  Image row ``e * num_labels + j`` is
    ``w_e (x_u - x_v)_j``.
    """
    d = int(num_labels)
    if d < 1:
        raise ValueError("need at least one label")
    if not seeds:
        raise ValueError("at least one seed is required")
    for node, lab in seeds.items():
        if not (0 <= node < num_nodes):
            raise ValueError(f"seed node {node} out of range")
        if not (0 <= lab < d):
            raise ValueError(f"seed label {lab} out of range")
    edges = [(int(u), int(v), float(w)) for u, v, w in edges]
    for u, v, w in edges:
        if w < 0:
            raise ValueError(f"negative weight on edge ({u}, {v})")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
    free = [v for v in range(num_nodes) if v not in seeds]
    col_of = {v: i for i, v in enumerate(free)}
    E = len(edges)
    B = incidence_matrix(num_nodes, edges)
    W = sp.diags([w for _, _, w in edges]) if E else sp.csr_matrix((0, 0))
    WB = (W @ B).tocsc()
    # image = kron(WB, I_d) vec(X); split columns into free (decision) and seeded (offset)
    Xseed = np.zeros((num_nodes, d))
    for node, lab in seeds.items():
        Xseed[node, lab] = 1.0
    full = sp.kron(WB, sp.identity(d), format="csc")
    free_cols = np.array([v * d + j for v in free for j in range(d)], dtype=np.int64)
    A = full[:, free_cols].tocsr() if free else sp.csr_matrix((E * d, 0))
    b = np.asarray(full @ Xseed.ravel()).ravel()
    _warn_unreachable(num_nodes, edges, seeds)
    data = {
        "num_nodes": num_nodes,
        "num_labels": d,
        "free_nodes": free,
        "seeds": dict(seeds),
        "edges": edges,
        "col_of": col_of,
        "decision_lipschitz": float(abs(A).sum(axis=0).max()) if free else 0.0,
    }
    if not free:
        return _constant_graph_cut(A, b, data)
    fset = product_of_simplices([d] * len(free))
    D_f = curvature_coefficient("l1", A, fset)
    return ProblemInstance("l1", A, b, fset, 1.0, D_f, name="graph_cut", data=data)


def _constant_graph_cut(A, b, data):
    # no decision variables: a one-coordinate dummy block with a zero column
    A = sp.csr_matrix((A.shape[0], 1))
    return ProblemInstance("l1", A, b, unit_simplex(1), 1.0, 0.0, name="graph_cut", data=data)


def _warn_unreachable(num_nodes, edges, seeds):
    adj = [[] for _ in range(num_nodes)]
    for u, v, _ in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = set(seeds)
    queue = deque(seeds)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    lost = [v for v in range(num_nodes) if v not in seen]
    if lost:
        warnings.warn(f"free nodes with no path to a seed (objective indifferent): {lost[:10]}", stacklevel=3)


def graph_cut_labels(instance: ProblemInstance, x) -> np.ndarray:
    """Full ``num_nodes x num_labels`` soft labeling including seeds."""
    dat = instance.data
    d = dat["num_labels"]
    X = np.zeros((dat["num_nodes"], d))
    for node, lab in dat["seeds"].items():
        X[node, lab] = 1.0
    x = np.asarray(x, dtype=float)
    for v, i in dat["col_of"].items():
        X[v] = x[i * d : (i + 1) * d]
    return X


def graph_cut_direct_objective(instance: ProblemInstance, x) -> float:
    """``sum_e w_e ||x_u - x_v||_1`` evaluated edge by edge."""
    X = graph_cut_labels(instance, x)
    return float(sum(w * np.abs(X[u] - X[v]).sum() for u, v, w in instance.data["edges"]))


def graph_cut_coreset_labels(instance: ProblemInstance, indices) -> np.ndarray:
    """Labels that received mass in any step direction."""
    d = instance.data["num_labels"]
    if not instance.data["free_nodes"]:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.asarray(indices, dtype=np.int64) % d)


# ---------------------------------------------------------------------------
# balanced development


def build_balanced_dev(A, b, p) -> ProblemInstance:
    """``min_{y in simplex} max_j <a_j, E y> / p_j`` with ``E = diag(1/b)``.

    ``A`` is attributes x products; the decision variable lives on the
    attribute simplex.
    """
    A = _finite_matrix(A, "A")
    b = np.asarray(b, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if np.any(b <= 0) or np.any(p <= 0):
        raise ValueError("requirements b and prices p must be strictly positive")
    m, n = A.shape
    if b.size != m or p.size != n:
        raise ValueError(f"b must have length {m} and p length {n}")
    M = (A / b[:, None]).T / p[:, None]
    inst = make_instance("max", M, None, unit_simplex(m), name="balanced_dev", requirements=b, prices=p)
    return inst

"""Vectors, feasible sets, iterate updates and the problem-instance contract.

Every objective handled by this package has the composite form
``f(x) = fhat(A x + b)`` where ``x`` lives in a product of (possibly capped)
unit simplices.  The solver only ever touches ``A`` through column
extraction, row extraction and transposed products, so ``A`` may be a dense
``numpy`` array or any ``scipy.sparse`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

SUM_TOL = 1e-9
BOUND_TOL = 1e-12

OBJECTIVE_KINDS = ("max", "linf", "l1", "median")


class DimensionError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# vectors


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, value) pairs of a length-``size`` vector."""

    indices: np.ndarray
    values: np.ndarray
    size: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape or idx.ndim != 1:
            raise DimensionError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.size:
                raise ValueError(f"index out of range for size {self.size}")
            if np.any(val == 0.0):
                raise ValueError("stored values must be nonzero")
            if not np.all(np.isfinite(val)):
                raise ValueError("values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, x, tol: float = 0.0) -> SparseVector:
        x = np.asarray(x, dtype=float)
        idx = np.flatnonzero(np.abs(x) > tol)
        return cls(idx, x[idx], x.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.size)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def as_dense_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# matrix helpers (dense or scipy.sparse)


def matvec(A, x) -> np.ndarray:
    return np.asarray(A @ x, dtype=float).ravel()


def rmatvec(A, y) -> np.ndarray:
    """``A.T @ y`` without materializing the transpose."""
    if sp.issparse(A):
        return np.asarray(A.T @ y, dtype=float).ravel()
    return np.asarray(y @ A, dtype=float).ravel()


def get_row(A, r: int) -> np.ndarray:
    if sp.issparse(A):
        return np.asarray(A.getrow(r).toarray(), dtype=float).ravel()
    return np.asarray(A[r], dtype=float)


def get_rows(A, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    if sp.issparse(A):
        return np.asarray(sp.csr_matrix(A)[rows].toarray(), dtype=float)
    return np.asarray(A[rows], dtype=float)


def get_columns(A, cols) -> np.ndarray:
    cols = np.asarray(cols, dtype=np.int64)
    if sp.issparse(A):
        return np.asarray(sp.csc_matrix(A)[:, cols].toarray(), dtype=float)
    return np.asarray(A[:, cols], dtype=float)


def sparse_image(A, b, s: SparseVector) -> np.ndarray:
    """``A s + b`` touching only the columns in the support of ``s``."""
    if s.nnz == 0:
        return np.array(b, dtype=float, copy=True)
    return get_columns(A, s.indices) @ s.values + b


# ---------------------------------------------------------------------------
# feasible sets


@dataclass(frozen=True)
class FeasibleSet:
    """Product of unit simplices, each optionally capped coordinatewise.

    ``cap == 1`` gives plain simplices.  Use :func:`unit_simplex`,
    :func:`product_of_simplices` or :func:`capped_simplex_product` to build one.
    """

    blocks: tuple[int, ...]
    cap: float = 1.0

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        if any(b < 1 for b in blocks):
            raise ValueError("block sizes must be >= 1")
        cap = float(self.cap)
        if not (0.0 < cap <= 1.0):
            raise ValueError("cap must lie in (0, 1]")
        for b in blocks:
            # cap * n_b >= 1 up to rounding (e.g. cap = 1/3, n_b = 3)
            if cap * b < 1.0 - 1e-12:
                raise InfeasibleError(f"cap {cap} infeasible for a block of size {b}")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "cap", cap)

    @property
    def dim(self) -> int:
        return int(sum(self.blocks))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.blocks)]).astype(np.int64)

    @property
    def capped(self) -> bool:
        return self.cap < 1.0

    def block_slices(self) -> list[slice]:
        off = self.offsets
        return [slice(int(off[i]), int(off[i + 1])) for i in range(len(self.blocks))]

    def block_of(self, index: int) -> int:
        return int(np.searchsorted(self.offsets, index, side="right") - 1)

    def default_point(self) -> np.ndarray:
        """Lowest-index vertex: each block filled greedily from its first coordinate."""
        x = np.zeros(self.dim)
        for sl in self.block_slices():
            rem = 1.0
            for i in range(sl.start, sl.stop):
                take = min(self.cap, rem)
                x[i] = take
                rem -= take
                if rem <= 1e-15:
                    break
        return x

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        x = np.empty(self.dim)
        for sl, nb in zip(self.block_slices(), self.blocks):
            w = rng.dirichlet(np.ones(nb))
            if self.capped:
                # mix toward the barycenter, which is feasible because cap * n_b >= 1
                center = np.full(nb, 1.0 / nb)
                over = w.max() - center.max()
                if w.max() > self.cap and over > 0:
                    lam = (self.cap - center.max()) / over
                    w = center + lam * (w - center)
                w = np.minimum(w, self.cap)
            x[sl] = w / w.sum()
        return x

    def random_vertex(self, rng: np.random.Generator) -> np.ndarray:
        x = np.zeros(self.dim)
        for sl, nb in zip(self.block_slices(), self.blocks):
            order = rng.permutation(nb)
            rem = 1.0
            for j in order:
                take = min(self.cap, rem)
                x[sl.start + j] = take
                rem -= take
                if rem <= 1e-15:
                    break
        return x


def unit_simplex(n: int) -> FeasibleSet:
    return FeasibleSet((n,), 1.0)


def product_of_simplices(sizes: Sequence[int]) -> FeasibleSet:
    return FeasibleSet(tuple(sizes), 1.0)


def capped_simplex_product(sizes: Sequence[int], cap: float) -> FeasibleSet:
    return FeasibleSet(tuple(sizes), cap)


def project_feasible_check(x, fset: FeasibleSet) -> tuple[bool, float]:
    """Return ``(feasible, max_violation)``; diagnostic only, never raises on infeasibility."""
    x = np.asarray(x, dtype=float)
    if x.size != fset.dim:
        raise DimensionError(f"x has length {x.size}, feasible set has dimension {fset.dim}")
    sum_viol = 0.0
    for sl in fset.block_slices():
        sum_viol = max(sum_viol, abs(float(x[sl].sum()) - 1.0))
    bound_viol = max(0.0, float(-x.min(initial=0.0)), float(x.max(initial=0.0)) - fset.cap)
    ok = sum_viol <= SUM_TOL and bound_viol <= BOUND_TOL
    return ok, max(sum_viol, bound_viol)


# ---------------------------------------------------------------------------
# problem instance


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable description of ``min_{x in D} fhat(A x + b)``.

    ``lipschitz`` is the constant multiplying ``epsilon`` in certificates and
    in the a-priori bound; ``curvature_coeff`` is ``D_f`` with
    ``C_f(eps) <= D_f / eps``.  ``data`` carries problem-specific extras
    (median points, class sizes, graph layout, ...).
    """

    kind: str
    A: Any
    b: np.ndarray
    feasible: FeasibleSet
    lipschitz: float
    curvature_coeff: float
    name: str = ""
    data: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        p, n = self.A.shape
        if n != self.feasible.dim:
            raise DimensionError(f"A has {n} columns, feasible set has dimension {self.feasible.dim}")
        b = np.zeros(p) if self.b is None else as_dense_vector(self.b, "b")
        if b.size != p:
            raise DimensionError(f"offset b has length {b.size}, A has {p} rows")
        object.__setattr__(self, "b", b)
        for name in ("lipschitz", "curvature_coeff"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")
            object.__setattr__(self, name, v)
        if self.kind == "median" and "points" not in self.data:
            object.__setattr__(self, "data", {**self.data, "points": get_columns(self.A, np.arange(n)).T})

    @property
    def image_rows(self) -> int:
        return int(self.A.shape[0])

    @property
    def dim(self) -> int:
        return self.feasible.dim

    def image(self, x) -> np.ndarray:
        return matvec(self.A, np.asarray(x, dtype=float)) + self.b

    def objective(self, x) -> float:
        return evaluate_objective(self, self.image(x))

    def with_constants(self, **kw) -> ProblemInstance:
        return replace(self, **kw)


def evaluate_objective(instance: ProblemInstance, image) -> float:
    """Objective value from a cached image vector ``A x + b``."""
    image = np.asarray(image, dtype=float)
    p = instance.image_rows
    if image.shape != (p,):
        raise DimensionError(f"image has length {image.size}, expected {p}")
    kind = instance.kind
    if kind == "max":
        return float(image.max())
    if kind == "linf":
        return float(np.abs(image).max())
    if kind == "l1":
        return float(np.abs(image).sum())
    pts = instance.data["points"]
    return float(np.linalg.norm(pts - image, axis=1).mean())


# ---------------------------------------------------------------------------
# iterates


@dataclass
class IterateState:
    x: np.ndarray
    image: np.ndarray
    k: int = 0
    refresh_period: int = 100

    @classmethod
    def start(cls, instance: ProblemInstance, x0=None, refresh_period: int = 100) -> IterateState:
        x = instance.feasible.default_point() if x0 is None else as_dense_vector(x0, "x0").copy()
        if x.size != instance.dim:
            raise DimensionError(f"x0 has length {x.size}, expected {instance.dim}")
        if refresh_period < 1:
            raise ValueError("refresh_period must be positive")
        return cls(x, instance.image(x), 0, refresh_period)


def update_iterate(
    state: IterateState,
    s: SparseVector,
    s_image,
    alpha: float,
    instance: ProblemInstance | None = None,
) -> IterateState:
    """Convex step ``x <- (1-alpha) x + alpha s`` with the image updated by the same recurrence.

    When ``instance`` is given, the image is recomputed exactly from ``A``
    every ``refresh_period`` iterations to bound floating-point drift.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"step size {alpha} outside [0, 1]")
    if alpha == 0.0:
        x, image = state.x.copy(), state.image.copy()
    elif alpha == 1.0:
        x, image = s.to_dense(), np.array(s_image, dtype=float, copy=True)
    else:
        x = (1.0 - alpha) * state.x
        x[s.indices] += alpha * s.values
        image = (1.0 - alpha) * state.image + alpha * np.asarray(s_image, dtype=float)
    k = state.k + 1
    if instance is not None and k % state.refresh_period == 0:
        image = instance.image(x)
    return IterateState(x, image, k, state.refresh_period)


# ---------------------------------------------------------------------------
# diameters


def _pairwise_max(cols: np.ndarray, ord) -> float:
    """Max pairwise distance between columns, computed in chunks."""
    n = cols.shape[1]
    pts = cols.T
    best = 0.0
    chunk = max(1, 4_000_000 // max(1, n * max(1, cols.shape[0])))
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]
        diff = block[:, None, :] - pts[None, :, :]
        if ord == 2:
            d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        elif ord == 1:
            d = np.abs(diff).sum(axis=2)
        else:
            d = np.abs(diff).max(axis=2)
        best = max(best, float(d.max()))
    return best


def column_diameter(cols, ord) -> float:
    """Diameter in the ``ord``-norm of the convex hull of the given columns.

    Norms are convex so the maximum over the hull is attained at a pair of
    columns.  The infinity norm reduces to per-row ranges; the 2-norm uses
    the convex hull vertices in low dimension.
    """
    cols = np.asarray(cols, dtype=float)
    if cols.ndim != 2 or cols.shape[1] == 0:
        raise ValueError("need at least one column to compute a diameter")
    d, n = cols.shape
    if n == 1 or d == 0:
        return 0.0
    if ord in (np.inf, "inf"):
        return float((cols.max(axis=1) - cols.min(axis=1)).max())
    if ord == 1 and d <= 10:
        # max over sign vectors sigma of range(sigma^T cols); sigma and -sigma give the same range
        best = 0.0
        for signs in range(2 ** (d - 1)):
            sigma = np.array([1.0] + [(-1.0 if (signs >> i) & 1 else 1.0) for i in range(d - 1)])
            proj = sigma @ cols
            best = max(best, float(proj.max() - proj.min()))
        return best
    if ord == 2 and d in (2, 3) and n > 64:
        from scipy.spatial import ConvexHull, QhullError

        try:
            hull = ConvexHull(cols.T)
            cols = cols[:, hull.vertices]
        except (QhullError, ValueError):
            pass
    return _pairwise_max(cols, ord)


def brute_force_diameter(cols, ord) -> float:
    cols = np.asarray(cols, dtype=float)
    best = 0.0
    for i, j in combinations(range(cols.shape[1]), 2):
        best = max(best, float(np.linalg.norm(cols[:, i] - cols[:, j], ord=ord)))
    return best


_KIND_NORM = {"max": np.inf, "linf": np.inf, "l1": 1, "median": 2}


def image_diameter(A, fset: FeasibleSet, ord) -> float:
    """Upper bound on the diameter of ``A D``: the sum of per-block diameters.

    Exact for a single block.  For capped blocks the uncapped simplex is used,
    which contains the capped set.
    """
    if A.shape[1] == 0:
        raise ValueError("empty data: no columns")
    total = 0.0
    for sl in fset.block_slices():
        total += column_diameter(get_columns(A, np.arange(sl.start, sl.stop)), ord)
    return total


def diameter_bound(instance: ProblemInstance) -> float:
    """``D_f = 2 diam(A D)^2`` in the norm matching the objective kind."""
    diam = image_diameter(instance.A, instance.feasible, _KIND_NORM[instance.kind])
    return 2.0 * diam**2


def curvature_coefficient(kind: str, A, fset: FeasibleSet) -> float:
    return 2.0 * image_diameter(A, fset, _KIND_NORM[kind]) ** 2

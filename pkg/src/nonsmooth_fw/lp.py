"""Direction-finding subproblems: greedy closed forms and a dense simplex LP.

The LP engine is a two-phase bounded-variable primal simplex on a dense
tableau.  Upper bounds are handled implicitly (bound flips), free variables
are supported natively, and pivoting follows Bland's lowest-index rule, so
results are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FeasibleSet,
    InfeasibleError,
    SparseVector,
    get_row,
    get_rows,
    rmatvec,
    sparse_image,
)
from .subdiff import SignPattern, VertexHull

MAX_PIVOTS = 1_000_000
_PIV_TOL = 1e-11
_OPT_TOL = 1e-10


class LpError(RuntimeError):
    pass


class LpInfeasible(LpError):
    def __init__(self, msg="infeasible"):
        super().__init__(msg)


class LpUnbounded(LpError):
    def __init__(self, msg="unbounded"):
        super().__init__(msg)


@dataclass
class LpProblem:
    """``min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi``.

    ``lo`` defaults to 0 and ``hi`` to +inf; infinite entries are allowed
    on either side.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n)
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n)
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        for arr in (self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")
        if self.lo.size != n or self.hi.size != n:
            raise ValueError("bounds must match the number of variables")
        if np.any(self.lo > self.hi) or np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("need lo <= hi for every variable")


def _rows(A, b, n):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape != (b.size, n):
        raise ValueError(f"constraint block has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LpResult:
    x: np.ndarray
    value: float
    pivots: int
    dual_gap: float


class _Tableau:
    """Bounded-variable simplex state on ``A x = b`` with ``lo <= x <= hi``.

    Internal variables satisfy ``lo in {0, -inf}``; nonbasic variables sit at
    ``lo``, at ``hi`` or (free ones) at 0.
    """

    def __init__(self, A, b, lo, hi, basis, xval, rule):
        self.A0 = A
        self.b0 = b
        self.lo = lo
        self.hi = hi
        self.basis = list(basis)
        self.xval = xval
        self.rule = rule
        self.pivots = 0
        B = A[:, self.basis]
        self.T = np.linalg.solve(B, A)
        self.beta = self.xval[self.basis].copy()
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[self.basis] = True

    def set_cost(self, c):
        self.c = c
        self.d = c - c[self.basis] @ self.T

    def _eligible(self):
        d, lo, hi, x = self.d, self.lo, self.hi, self.xval
        nb = ~self.is_basic
        at_lo = nb & (x == lo) & (hi > lo)
        at_hi = nb & np.isfinite(hi) & (x == hi) & (hi > lo)
        free = nb & ~np.isfinite(lo) & ~np.isfinite(hi)
        inc = (at_lo & (d < -_OPT_TOL)) | (free & (d < -_OPT_TOL))
        dec = (at_hi & (d > _OPT_TOL)) | (free & (d > _OPT_TOL))
        return inc, dec

    def _choose(self, inc, dec, degenerate_streak):
        cand = np.flatnonzero(inc | dec)
        if cand.size == 0:
            return None, 0
        if self.rule == "dantzig" and degenerate_streak < 50:
            j = int(cand[np.argmax(np.abs(self.d[cand]))])
        else:
            j = int(cand[0])
        return j, (1 if inc[j] else -1)

    def _ratio(self, j, sigma):
        col = sigma * self.T[:, j]
        bidx = np.asarray(self.basis)
        lo_b, hi_b = self.lo[bidx], self.hi[bidx]
        limits = np.full(col.size, np.inf)
        dec = col > _PIV_TOL
        inc = col < -_PIV_TOL
        with np.errstate(invalid="ignore", divide="ignore"):
            limits[dec] = (self.beta[dec] - lo_b[dec]) / col[dec]
            limits[inc] = (hi_b[inc] - self.beta[inc]) / (-col[inc])
        limits = np.maximum(limits, 0.0)
        flip = self.hi[j] - self.lo[j]
        t_row = limits.min() if limits.size else np.inf
        if flip <= t_row:
            return flip, None
        tied = np.flatnonzero(limits <= t_row + 1e-14)
        # lowest basic-variable index among tied rows
        r = int(tied[np.argmin(bidx[tied])])
        return t_row, r

    def step(self, j, sigma, t, r):
        self.pivots += 1
        col = self.T[:, j]
        self.beta -= sigma * t * col
        self.xval[j] += sigma * t
        if r is None:
            return
        leave = self.basis[r]
        # snap the leaving variable onto the bound it reached
        if sigma * col[r] > 0:
            self.xval[leave] = self.lo[leave]
        else:
            self.xval[leave] = self.hi[leave]
        self.pivot(r, j)

    def pivot(self, r, j):
        leave = self.basis[r]
        T = self.T
        T[r] /= T[r, j]
        colj = T[:, j].copy()
        colj[r] = 0.0
        T -= np.outer(colj, T[r])
        self.d -= self.d[j] * T[r]
        self.basis[r] = j
        self.is_basic[leave] = False
        self.is_basic[j] = True
        self.beta[r] = self.xval[j]
        self.sync()

    def sync(self):
        self.xval[self.basis] = self.beta

    def optimize(self):
        streak = 0
        while True:
            inc, dec = self._eligible()
            j, sigma = self._choose(inc, dec, streak)
            if j is None:
                return
            t, r = self._ratio(j, sigma)
            if not np.isfinite(t):
                raise LpUnbounded()
            streak = streak + 1 if t <= 1e-14 else 0
            self.step(j, sigma, t, r)
            self.sync()
            if self.pivots > MAX_PIVOTS:
                raise LpError(f"pivot limit {MAX_PIVOTS} exceeded")

    def enter_free(self, j):
        """Move a free nonbasic variable into the basis along a zero-cost edge."""
        for sigma in (1, -1):
            t, r = self._ratio(j, sigma)
            if np.isfinite(t) and r is not None:
                self.step(j, sigma, t, r)
                self.sync()
                return True
        return False


def solve_lp(problem: LpProblem, rule: str = "bland") -> LpResult:
    """Solve an LP to a vertex optimum and verify it with a duality-gap check.

    Raises :class:`LpInfeasible`, :class:`LpUnbounded` or :class:`LpError`.
    ``rule='dantzig'`` prices by the most negative reduced cost and falls
    back to Bland's rule after a run of degenerate pivots.
    """
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pricing rule {rule!r}")
    p = problem
    n = p.c.size
    m_ub, m_eq = p.b_ub.size, p.b_eq.size
    m = m_ub + m_eq

    # internal variables y: x = shift + sign * y, with y in [0, hi'] or free
    lo, hi = p.lo, p.hi
    sign = np.ones(n)
    shift = np.zeros(n)
    ylo = np.zeros(n)
    yhi = np.full(n, np.inf)
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            yhi[j] = hi[j] - lo[j]
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            sign[j] = -1.0
        else:
            ylo[j] = -np.inf
    A_struct = np.vstack([p.A_ub, p.A_eq]) * sign
    b = np.concatenate([p.b_ub, p.b_eq]) - np.vstack([p.A_ub, p.A_eq]) @ shift
    c = p.c * sign
    const = float(p.c @ shift)

    # columns: structural | slacks (ub rows) | artificials (rows whose slack cannot start basic)
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = b[:m_ub] < 0
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    A = np.zeros((m, n + m_ub + n_art))
    A[:, :n] = A_struct
    A[np.arange(m_ub), n + np.arange(m_ub)] = 1.0
    art = n + m_ub + np.arange(n_art)
    A[art_rows, art] = np.where(b[art_rows] >= 0, 1.0, -1.0)
    N = A.shape[1]
    lo_all = np.concatenate([ylo, np.zeros(m_ub + n_art)])
    hi_all = np.concatenate([yhi, np.full(m_ub + n_art, np.inf)])
    xval = np.zeros(N)
    basis = [n + i for i in range(m)]
    for i, col in zip(art_rows, art):
        basis[i] = int(col)
    xval[basis] = np.abs(b)

    if m == 0:
        return _solve_box(p)

    tab = _Tableau(A, b, lo_all, hi_all, basis, xval, rule)
    c1 = np.zeros(N)
    c1[art] = 1.0
    tab.set_cost(c1)
    tab.optimize()
    infeas = float(tab.xval[art].sum())
    if infeas > 1e-9 * (1.0 + np.abs(b).max(initial=0.0)):
        raise LpInfeasible()

    # retire artificials: fix at zero, pivot basic ones out, drop redundant rows
    tab.hi[art] = 0.0
    tab.xval[art] = np.where(tab.is_basic[art], tab.xval[art], 0.0)
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= n + m_ub:
            row = tab.T[r, : n + m_ub]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            cand = cand[~tab.is_basic[cand]]
            if cand.size:
                tab.d = np.zeros(N)
                tab.pivot(r, int(cand[0]))
            else:
                keep[r] = False
    if not keep.all():
        rows = np.flatnonzero(keep)
        tab.T = tab.T[rows]
        tab.beta = tab.beta[rows]
        tab.basis = [tab.basis[r] for r in rows]
        tab.A0 = tab.A0[rows]
        tab.b0 = tab.b0[rows]
    c2 = np.zeros(N)
    c2[:n] = c
    tab.set_cost(c2)
    tab.optimize()
    for j in range(n):
        if not tab.is_basic[j] and not np.isfinite(tab.lo[j]) and not np.isfinite(tab.hi[j]):
            tab.enter_free(j)

    y = tab.xval[:n]
    x = shift + sign * y
    value = float(p.c @ x)
    gap = _dual_gap(tab, c2, value - const)
    if gap > 1e-8 * (1.0 + abs(value)):
        raise LpError(f"duality-gap check failed (gap {gap:.3e})")
    return LpResult(x, value, tab.pivots, gap)


def _dual_gap(tab: _Tableau, c, primal_internal: float) -> float:
    B = tab.A0[:, tab.basis]
    try:
        yd = np.linalg.solve(B.T, c[tab.basis])
    except np.linalg.LinAlgError:
        return np.inf
    rc = c - tab.A0.T @ yd
    rc[np.abs(rc) <= 1e-9] = 0.0
    dual = float(tab.b0 @ yd)
    lo, hi = tab.lo, tab.hi
    pos, neg = rc > 0, rc < 0
    if np.any(~np.isfinite(lo[pos])) or np.any(~np.isfinite(hi[neg])):
        return np.inf
    dual += float(rc[pos] @ lo[pos] + rc[neg] @ hi[neg])
    return abs(primal_internal - dual)


def _solve_box(p: LpProblem) -> LpResult:
    x = np.where(p.c > 0, p.lo, np.where(p.c < 0, p.hi, np.where(np.isfinite(p.lo), p.lo, np.where(np.isfinite(p.hi), p.hi, 0.0))))
    if not np.all(np.isfinite(x)):
        raise LpUnbounded()
    return LpResult(x, float(p.c @ x), 0, 0.0)


# ---------------------------------------------------------------------------
# subproblem solutions


@dataclass
class SubproblemSolution:
    s: SparseVector
    s_image: np.ndarray | None
    value: float

    @property
    def support(self) -> np.ndarray:
        return self.s.indices


def min_linear_over_simplex(c) -> SubproblemSolution:
    """Vertex ``e_j`` with ``j = argmin c`` (lowest index on ties)."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise ValueError("c must be nonempty")
    j = int(np.argmin(c))
    return SubproblemSolution(SparseVector([j], [1.0], c.size), None, float(c[j]))


def _greedy_fill(c, cap, order=None):
    if order is None:
        order = np.argsort(c, kind="stable")
    idx, vals = [], []
    rem = 1.0
    for j in order:
        take = min(cap, rem)
        idx.append(int(j))
        vals.append(take)
        rem -= take
        if rem <= 1e-15:
            break
    perm = np.argsort(idx)
    return np.asarray(idx)[perm], np.asarray(vals)[perm]


def min_linear_over_capped_simplex(c, cap: float) -> SubproblemSolution:
    """Greedy fill in ascending order of ``c``: ``cap`` each until the mass runs out."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise ValueError("c must be nonempty")
    if cap * c.size < 1.0 - 1e-12 or cap <= 0:
        raise InfeasibleError(f"cap {cap} infeasible for {c.size} coordinates")
    idx, vals = _greedy_fill(c, min(cap, 1.0))
    return SubproblemSolution(SparseVector(idx, vals, c.size), None, float(c[idx] @ vals))


def min_linear_over_feasible(c, fset: FeasibleSet, box_cache=None) -> SparseVector:
    """Blockwise greedy minimizer of ``<c, z>`` over the feasible set."""
    c = np.asarray(c, dtype=float)
    idx_all, val_all = [], []
    for b, sl in enumerate(fset.block_slices()):
        cb = c[sl]
        if fset.capped:
            order = box_cache(b, cb) if box_cache is not None else None
            idx, vals = _greedy_fill(cb, fset.cap, order)
        else:
            idx, vals = np.array([int(np.argmin(cb))]), np.array([1.0])
        idx_all.append(idx + sl.start)
        val_all.append(vals)
    return SparseVector(np.concatenate(idx_all), np.concatenate(val_all), fset.dim)


class BoundingBoxCache:
    """Per-row ordering cache for the single-vertex greedy step.

    For a row ``r`` and sign, the ``ceil(1/cap)`` extreme columns of each
    block are computed once and reused; these are the examples spanning
    the bounding box of the reduced convex hull along that coordinate.
    """

    def __init__(self, A, fset: FeasibleSet):
        self.A = A
        self.fset = fset
        self.k = int(np.ceil(1.0 / fset.cap - 1e-12))
        self._cache: dict[tuple[int, int, int], np.ndarray] = {}

    def order(self, r: int, sign: int, block: int, cb: np.ndarray) -> np.ndarray:
        key = (r, sign, block)
        if key not in self._cache:
            k = min(self.k, cb.size)
            part = np.argpartition(cb, k - 1)[:k] if k < cb.size else np.arange(cb.size)
            # stable order among the selected: by value then index
            part = part[np.lexsort((part, cb[part]))]
            self._cache[key] = part
        return self._cache[key]


def _finish(s: SparseVector, A, b, image_x, T) -> SubproblemSolution:
    s_image = sparse_image(A, b, s)
    return SubproblemSolution(s, s_image, T.support(s_image - image_x))


def _clean_block_solution(z, fset: FeasibleSet) -> SparseVector:
    z = np.clip(z, 0.0, fset.cap)
    z[z < 1e-13] = 0.0
    z[fset.cap - z < 1e-13] = fset.cap
    return SparseVector.from_dense(z)


def _block_equalities(fset: FeasibleSet, extra_cols: int) -> tuple[np.ndarray, np.ndarray]:
    A_eq = np.zeros((len(fset.blocks), fset.dim + extra_cols))
    for i, sl in enumerate(fset.block_slices()):
        A_eq[i, sl] = 1.0
    return A_eq, np.ones(len(fset.blocks))


def solve_minmax_vertexhull(
    V: VertexHull,
    image_x,
    A,
    b,
    fset: FeasibleSet,
    box_cache: BoundingBoxCache | None = None,
    rule: str = "bland",
) -> SubproblemSolution:
    """Minimize ``max_{d in V} <A z + b - image_x, d>`` over the feasible set.

    A single vertex reduces to a signed-row greedy step; otherwise the
    epigraph LP in ``(z, mu)`` is solved with ``mu`` kept basic.
    """
    image_x = np.asarray(image_x, dtype=float)
    if len(V) == 1:
        r, sg = int(V.indices[0]), int(V.signs[0])
        c = sg * get_row(A, r)
        if box_cache is not None and fset.capped:
            s = min_linear_over_feasible(c, fset, lambda blk, cb: box_cache.order(r, sg, blk, cb))
        else:
            s = min_linear_over_feasible(c, fset)
        return _finish(s, A, b, image_x, V)

    n = fset.dim
    rows = get_rows(A, V.indices) * V.signs[:, None]
    rhs = V.signs * (image_x[V.indices] - b[V.indices])
    # <sign * a_r, z> - mu <= sign * (image_x - b)_r
    A_ub = np.hstack([rows, -np.ones((len(V), 1))])
    A_eq, b_eq = _block_equalities(fset, 1)
    c = np.zeros(n + 1)
    c[n] = 1.0
    lo = np.concatenate([np.zeros(n), [-np.inf]])
    hi = np.concatenate([np.full(n, fset.cap), [np.inf]])
    res = solve_lp(LpProblem(c, A_ub, rhs, A_eq, b_eq, lo, hi), rule=rule)
    s = _clean_block_solution(res.x[:n], fset)
    return _finish(s, A, b, image_x, V)


def solve_minmax_signpattern(
    pattern: SignPattern,
    image_x,
    A,
    b,
    fset: FeasibleSet,
    rule: str = "bland",
) -> SubproblemSolution:
    """Minimize ``sum_fixed d_i delta_i + sum_free |delta_i|`` with ``delta = A z + b - image_x``.

    FREE coordinates are split as ``delta_i = u_i - v_i``; with no
    FREE coordinate the problem is linear and solved blockwise in closed form.
    """
    image_x = np.asarray(image_x, dtype=float)
    tags = pattern.tags
    if tags.size != A.shape[0]:
        raise ValueError(f"pattern length {tags.size} != image rows {A.shape[0]}")
    fixed_d = np.where(tags != 0, tags, 0).astype(float)
    c_lin = rmatvec(A, fixed_d)
    free = pattern.free
    if free.size == 0:
        s = min_linear_over_feasible(c_lin, fset)
        return _finish(s, A, b, image_x, pattern)

    n, q = fset.dim, free.size
    Af = get_rows(A, free)
    base = image_x[free] - b[free]
    # delta_free = Af z - base = u - v with u, v >= 0; at an optimum u_i v_i = 0, so u + v = |delta|
    A_blk, b_blk = _block_equalities(fset, 2 * q)
    A_eq = np.vstack([np.hstack([Af, -np.eye(q), np.eye(q)]), A_blk])
    b_eq = np.concatenate([base, b_blk])
    c = np.concatenate([c_lin, np.ones(2 * q)])
    lo = np.zeros(n + 2 * q)
    hi = np.concatenate([np.full(n, fset.cap), np.full(2 * q, np.inf)])
    res = solve_lp(LpProblem(c, None, None, A_eq, b_eq, lo, hi), rule=rule)
    s = _clean_block_solution(res.x[:n], fset)
    return _finish(s, A, b, image_x, pattern)

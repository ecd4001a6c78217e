"""Conditional-subgradient Frank-Wolfe loop, certificates and bound calculators."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    IterateState,
    ProblemInstance,
    evaluate_objective,
    rmatvec,
    sparse_image,
    update_iterate,
)
from .lp import (
    BoundingBoxCache,
    LpError,
    SubproblemSolution,
    min_linear_over_feasible,
    solve_minmax_signpattern,
    solve_minmax_vertexhull,
)
from .subdiff import (
    SignPattern,
    Singleton,
    VertexHull,
    approximate_subdifferential,
    certificate_extra,
)

STEP_POLICIES = ("schedule", "bisection")


class SolverError(RuntimeError):
    def __init__(self, k: int, cause: Exception):
        super().__init__(f"subproblem failed at iteration {k}: {cause}")
        self.k = k
        self.cause = cause


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass
class SolverConfig:
    max_iters: int = 1000
    tol: float = 0.0
    step_policy: str = "schedule"
    eps_coeff: float = 1.0
    refresh_period: int = 100
    rng_seed: int = 0
    line_search_tol: float = 1e-10
    lp_rule: str = "bland"
    bounding_box: bool = False
    record_time: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.step_policy not in STEP_POLICIES:
            raise ValueError(f"step_policy must be one of {STEP_POLICIES}")
        if not self.eps_coeff > 0:
            raise ValueError("eps_coeff must be > 0")
        if self.refresh_period < 1:
            raise ValueError("refresh_period must be >= 1")


@dataclass
class IterationRecord:
    """One row of a trace.

    ``gap_correction`` is the certificate correction already folded into
    ``gap_surrogate``; it is not written to trace files.
    """

    k: int
    alpha: float
    epsilon: float
    objective: float
    gap_surrogate: float
    certified_bound: float
    num_vertices: int
    step_support: int
    coreset_size: int
    elapsed_ms: float
    gap_correction: float = 0.0


TRACE_FIELDS = (
    "k",
    "alpha",
    "epsilon",
    "objective",
    "gap_surrogate",
    "certified_bound",
    "num_vertices",
    "step_support",
    "coreset_size",
    "elapsed_ms",
)


@dataclass
class Coreset:
    """Supports ``S_k`` of the step directions and their union.

    ``initial`` is the support of the starting point; it belongs to the
    union only while no full step (``alpha = 1``) has replaced it.
    """

    supports: list[np.ndarray] = field(default_factory=list)
    initial: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    initial_active: bool = True
    a_priori_bound: float = math.inf
    certified_bound: float = math.inf
    _members: set = field(default_factory=set, repr=False)

    def add(self, support, alpha: float):
        support = np.asarray(support, dtype=np.int64)
        self.supports.append(support)
        self._members.update(support.tolist())
        if alpha >= 1.0:
            self.initial_active = False

    @property
    def union(self) -> np.ndarray:
        members = set(self._members)
        if self.initial_active:
            members.update(self.initial.tolist())
        return np.array(sorted(members), dtype=np.int64)

    def __len__(self) -> int:
        return int(self.union.size)


@dataclass(frozen=True)
class TheoremBound:
    L: float
    D_f: float

    @property
    def E(self) -> float:
        return 2.0 * self.L + self.D_f

    def __call__(self, k: int) -> float:
        return a_priori_bound(self.L, self.D_f, k)


def step_schedule(k: int, c: float = 1.0) -> tuple[float, float]:
    """``alpha_k = 2/(k+2)`` and ``eps_k = c * sqrt(alpha_k)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    alpha = 2.0 / (k + 2.0)
    return alpha, c * math.sqrt(alpha)


def gap_certificate(subproblem_value: float, L: float, eps: float, extra: float = 0.0) -> tuple[float, float]:
    """Return ``(ghat, certified)`` with ``f(x) - f(x*) <= certified = ghat + 2 L eps``."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    ghat = -subproblem_value + extra
    return ghat, ghat + 2.0 * L * eps


def a_priori_bound(L: float, D_f: float, k: int) -> float:
    return (2.0**2.5 * L + 2.0**1.5 * D_f) / math.sqrt(k + 2.0)


def coreset_K(L: float, D_f: float, eps: float) -> int:
    """Smallest iteration count meeting the coreset approximation bound."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    v = (2.0**2.5 * L + 2.0**1.5 * D_f) ** 2 / (1.0 + eps) ** 2 - 2.0
    # guard against 70.00000000000001 rounding up
    return max(0, math.ceil(v - 1e-9))


def check_stepwise_bound(rec_k: IterationRecord, rec_next: IterationRecord, D_f: float, slack: float = 1e-8) -> bool:
    """Per-step descent inequality with ``C_f(eps) <= D_f/eps``.

    The gap entering the inequality is ``-max_{d in T} <s - x, d>``.  The
    correction that ``gap_surrogate`` adds on top of ``-value`` is an upper
    bound on how far that max exceeds ``value``, so it is subtracted here
    instead of added.
    """
    a, eps = rec_k.alpha, rec_k.epsilon
    curv = 0.0 if a == 0.0 else (a * a * D_f / eps if eps > 0 else math.inf)
    gap = rec_k.gap_surrogate - 2.0 * rec_k.gap_correction
    return rec_next.objective <= rec_k.objective - a * gap + curv + slack


# ---------------------------------------------------------------------------
# line search


def bisection_minimize(phi: Callable[[float], float], tol: float = 1e-10, max_halvings: int = 60) -> float:
    """Minimize a convex function on [0, 1] by bisecting on forward differences."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    lo, hi = 0.0, 1.0
    for _ in range(max_halvings):
        if hi - lo <= tol:
            break
        m = 0.5 * (lo + hi)
        h = min(0.5 * tol, 0.25 * (hi - lo))
        if phi(m + h) < phi(m):
            lo = m
        else:
            hi = m + h if m + h < hi else m
    best = 0.5 * (lo + hi)
    fbest = phi(best)
    for cand in (1.0, 0.0):
        fc = phi(cand)
        if fc < fbest:
            best, fbest = cand, fc
    return best


def bisection_line_search(instance: ProblemInstance, image_x, s_image, tol: float = 1e-10, max_halvings: int = 60) -> float:
    image_x = np.asarray(image_x, dtype=float)
    direction = np.asarray(s_image, dtype=float) - image_x
    return bisection_minimize(lambda a: evaluate_objective(instance, image_x + a * direction), tol, max_halvings)


# ---------------------------------------------------------------------------
# main loop


def hull_size(T) -> int:
    """Vertex count for hulls, box dimension for sign patterns, 1 for a singleton."""
    if isinstance(T, VertexHull):
        return len(T)
    if isinstance(T, SignPattern):
        return int(T.free.size)
    return 1


def solve_direction(instance: ProblemInstance, T, image_x, rule: str = "bland", box_cache=None) -> SubproblemSolution:
    A, b, fset = instance.A, instance.b, instance.feasible
    if isinstance(T, VertexHull):
        return solve_minmax_vertexhull(T, image_x, A, b, fset, box_cache=box_cache, rule=rule)
    if isinstance(T, SignPattern):
        return solve_minmax_signpattern(T, image_x, A, b, fset, rule=rule)
    s = min_linear_over_feasible(T.gradient, fset)
    s_image = sparse_image(A, b, s)
    return SubproblemSolution(s, s_image, T.support(s_image - image_x))


@dataclass
class StepInfo:
    """What the optional ``run`` callback receives at each recorded iteration."""

    record: IterationRecord
    state: IterateState
    T: object
    solution: SubproblemSolution
    extra: float


def run(instance: ProblemInstance, config: SolverConfig | None = None, x0=None, callback=None):
    """Run the conditional-subgradient method.

    Returns ``(x, trace, coreset)``.  Iteration ``k`` builds ``T(x_k, eps_k)``,
    solves the min-max direction subproblem, records the gap surrogate and
    the certified bound, and stops once the certified bound is within
    ``config.tol`` or after ``config.max_iters`` steps.
    """
    config = config or SolverConfig()
    state = IterateState.start(instance, x0, config.refresh_period)
    L, D_f = instance.lipschitz, instance.curvature_coeff
    box_cache = BoundingBoxCache(instance.A, instance.feasible) if config.bounding_box else None
    coreset = Coreset(initial=np.flatnonzero(state.x))
    trace: list[IterationRecord] = []
    t0 = time.perf_counter()
    for k in range(config.max_iters + 1):
        alpha, eps = step_schedule(k, config.eps_coeff)
        f_x = evaluate_objective(instance, state.image)
        T = approximate_subdifferential(instance, state.image, eps)
        try:
            sol = solve_direction(instance, T, state.image, config.lp_rule, box_cache)
        except LpError as exc:
            raise SolverError(k, exc) from exc
        extra = certificate_extra(instance, T, state.image, eps)
        ghat, certified = gap_certificate(sol.value, L, eps, extra)
        stop = certified <= config.tol or k == config.max_iters
        if not stop and config.step_policy == "bisection":
            alpha = bisection_line_search(instance, state.image, sol.s_image, config.line_search_tol)
        if not stop and alpha > 0.0:
            coreset.add(sol.support, alpha)
        elapsed = (time.perf_counter() - t0) * 1e3 if config.record_time else 0.0
        rec = IterationRecord(
            k, alpha, eps, f_x, ghat, certified, hull_size(T), sol.s.nnz, len(coreset), elapsed, extra
        )
        trace.append(rec)
        if callback is not None:
            callback(StepInfo(rec, state, T, sol, extra))
        if stop:
            break
        state = update_iterate(state, sol.s, sol.s_image, alpha, instance)
    coreset.a_priori_bound = a_priori_bound(L, D_f, len(trace) - 1)
    coreset.certified_bound = trace[-1].certified_bound
    return state.x, trace, coreset


# ---------------------------------------------------------------------------
# curvature estimation


def _sample_triple(instance: ProblemInstance, rng: np.random.Generator):
    fset = instance.feasible
    x = fset.random_point(rng) if rng.random() < 0.7 else fset.random_vertex(rng)
    s = fset.random_vertex(rng) if rng.random() < 0.7 else fset.random_point(rng)
    alpha = 10.0 ** rng.uniform(-3.0, 0.0)
    return x, s, alpha


def curvature_sample(instance: ProblemInstance, eps: float, x, s, alpha: float) -> float:
    """``min_{d in T(x, eps)} (f(y) - f(x) - <y - x, d>) / alpha^2`` with ``y = x + alpha (s - x)``."""
    xh = instance.image(x)
    sh = instance.image(s)
    yh = xh + alpha * (sh - xh)
    T = approximate_subdifferential(instance, xh, eps)
    h = yh - xh
    lin = T.support(h)
    if isinstance(T, Singleton) and T.near_count:
        # T holds the whole unit ball for each near point; the best element is h/|h|
        pts = instance.data["points"]
        near = np.linalg.norm(xh - pts, axis=1) <= eps
        lin += near.sum() / pts.shape[0] * float(np.linalg.norm(h))
    return (evaluate_objective(instance, yh) - evaluate_objective(instance, xh) - lin) / alpha**2


def estimate_curvature(
    instance: ProblemInstance,
    eps: float,
    num_samples: int = 1000,
    seed: int = 0,
    sampler: Callable | None = None,
    jobs: int = 1,
) -> float:
    """Empirical lower bound on ``C_f(eps)``: the max of sampled curvature terms.

    ``sampler(rng)`` may return ``(x, s, alpha)`` to focus the search.
    Sample ``i`` uses the generator keyed by ``(seed, i)`` so the result does
    not depend on ``jobs``.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    draw = sampler or (lambda rng: _sample_triple(instance, rng))

    def one(i):
        x, s, alpha = draw(make_rng(seed, i))
        return curvature_sample(instance, eps, x, s, alpha)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            vals = list(pool.map(one, range(num_samples)))
    else:
        vals = [one(i) for i in range(num_samples)]
    return float(max(vals))


# ---------------------------------------------------------------------------
# randomized smoothing baseline


def image_subgradients(instance: ProblemInstance, images: np.ndarray) -> np.ndarray:
    """One subgradient of ``fhat`` per column of ``images`` (lowest index on ties)."""
    kind = instance.kind
    p, m = images.shape
    out = np.zeros((p, m))
    cols = np.arange(m)
    if kind == "max":
        out[np.argmax(images, axis=0), cols] = 1.0
    elif kind == "linf":
        r = np.argmax(np.abs(images), axis=0)
        out[r, cols] = np.where(images[r, cols] >= 0, 1.0, -1.0)
    elif kind == "l1":
        out = np.sign(images)
    else:
        pts = instance.data["points"]
        for j in range(m):
            diff = images[:, j] - pts
            dist = np.linalg.norm(diff, axis=1)
            far = dist > 0
            out[:, j] = (diff[far] / dist[far, None]).sum(axis=0) / pts.shape[0]
    return out


def smoothed_gradient(instance: ProblemInstance, x, mu: float, num_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo gradient of ``E_u f(x + mu u)``, ``u`` uniform in the unit ball.

    Averages subgradients at the perturbed points.  Returns the
    decision-space gradient and its image-space preimage.
    """
    n = instance.dim
    U = rng.standard_normal((num_samples, n))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    U *= rng.random(num_samples)[:, None] ** (1.0 / n)
    base = instance.image(x)
    images = base[:, None] + mu * np.asarray(instance.A @ U.T)
    img_grad = image_subgradients(instance, images).mean(axis=1)
    return rmatvec(instance.A, img_grad), img_grad


def smoothed_fw_baseline(
    instance: ProblemInstance,
    config: SolverConfig | None = None,
    mu0: float = 0.1,
    samples_growth: int = 1,
    x0=None,
) -> list[IterationRecord]:
    """Frank-Wolfe on a randomly smoothed objective.

    Smoothing radius ``mu_k = mu0 / sqrt(k+1)`` and ``samples_growth * (k+1)``
    samples per iteration.  ``gap_surrogate`` is the Frank-Wolfe gap of the
    smoothed linearization; no certified bound exists, so that column is NaN.
    """
    config = config or SolverConfig()
    state = IterateState.start(instance, x0, config.refresh_period)
    coreset = Coreset(initial=np.flatnonzero(state.x))
    trace = []
    t0 = time.perf_counter()
    for k in range(config.max_iters + 1):
        alpha = 2.0 / (k + 2.0)
        mu = mu0 / math.sqrt(k + 1.0)
        rng = make_rng(config.rng_seed, k)
        grad, _ = smoothed_gradient(instance, state.x, mu, samples_growth * (k + 1), rng)
        s = min_linear_over_feasible(grad, instance.feasible)
        s_image = sparse_image(instance.A, instance.b, s)
        gap = float(grad @ state.x - grad[s.indices] @ s.values)
        stop = gap <= config.tol or k == config.max_iters
        if not stop and config.step_policy == "bisection":
            alpha = bisection_line_search(instance, state.image, s_image, config.line_search_tol)
        if not stop and alpha > 0:
            coreset.add(s.indices, alpha)
        elapsed = (time.perf_counter() - t0) * 1e3 if config.record_time else 0.0
        trace.append(
            IterationRecord(k, alpha, mu, evaluate_objective(instance, state.image), gap, math.nan, 1, s.nnz, len(coreset), elapsed)
        )
        if stop:
            break
        state = update_iterate(state, s, s_image, alpha, instance)
    return trace


__all__ = [
    "Coreset",
    "IterationRecord",
    "SolverConfig",
    "SolverError",
    "StepInfo",
    "TRACE_FIELDS",
    "TheoremBound",
    "a_priori_bound",
    "bisection_line_search",
    "bisection_minimize",
    "check_stepwise_bound",
    "coreset_K",
    "estimate_curvature",
    "gap_certificate",
    "make_rng",
    "run",
    "smoothed_fw_baseline",
    "smoothed_gradient",
    "step_schedule",
]

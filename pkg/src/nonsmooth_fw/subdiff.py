"""Finite representations of the approximate subdifferential T(x, eps).

All sets are described in image space (the space of ``A x + b``); the
decision-space set is ``A.T`` applied to it, which is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProblemInstance, column_diameter, rmatvec

FREE = 0


@dataclass(frozen=True)
class VertexHull:
    """Convex hull of signed basis vectors ``signs[j] * e_{indices[j]}``."""

    indices: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        sg = np.asarray(self.signs, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("vertex hull must be nonempty")
        if idx.shape != sg.shape:
            raise ValueError("indices and signs must have the same length")
        if not np.all(np.abs(sg) == 1):
            raise ValueError("signs must be +1 or -1")
        pairs = set(zip(idx.tolist(), sg.tolist()))
        if len(pairs) != idx.size:
            raise ValueError("duplicate vertex")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sg)

    def __len__(self) -> int:
        return int(self.indices.size)

    def as_set(self) -> set[tuple[int, int]]:
        return set(zip(self.indices.tolist(), self.signs.tolist()))

    def support(self, delta) -> float:
        """``max_{d in Co V} <delta, d>``, attained at a vertex."""
        delta = np.asarray(delta, dtype=float)
        return float((self.signs * delta[self.indices]).max())

    def dense_vertices(self, p: int) -> np.ndarray:
        out = np.zeros((len(self), p))
        out[np.arange(len(self)), self.indices] = self.signs
        return out


@dataclass(frozen=True)
class SignPattern:
    """Box ``prod_i [tag_i, tag_i]`` for fixed coordinates and ``[-1, 1]`` for FREE ones."""

    tags: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tags, dtype=np.int8)
        if not np.all(np.isin(t, (-1, 0, 1))):
            raise ValueError("tags must be in {-1, 0 (FREE), +1}")
        object.__setattr__(self, "tags", t)

    def __len__(self) -> int:
        return int(self.tags.size)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(self.tags == FREE)

    def support(self, delta) -> float:
        delta = np.asarray(delta, dtype=float)
        fixed = self.tags != FREE
        return float(delta[fixed] @ self.tags[fixed] + np.abs(delta[~fixed]).sum())


@dataclass(frozen=True)
class Singleton:
    """A single subgradient; ``image_gradient`` is its image-space preimage under ``A.T``."""

    gradient: np.ndarray
    image_gradient: np.ndarray
    near_count: int = 0

    def __len__(self) -> int:
        return 1

    def support(self, delta) -> float:
        return float(np.asarray(delta, dtype=float) @ self.image_gradient)


def vertex_set_max(xhat, eps: float) -> VertexHull:
    """Vertices ``e_i`` with ``xhat_i >= max(xhat) - 2 eps``."""
    xhat = np.asarray(xhat, dtype=float)
    if xhat.size == 0:
        raise ValueError("xhat must be nonempty")
    idx = np.flatnonzero(xhat >= xhat.max() - 2.0 * eps)
    return VertexHull(idx, np.ones_like(idx))


def vertex_set_linf(xhat, eps: float) -> VertexHull:
    """Signed vertices of the approximate subdifferential of ``||.||_inf``.

    Ordered by coordinate, ``+e_i`` before ``-e_i``.
    """
    xhat = np.asarray(xhat, dtype=float)
    if xhat.size == 0:
        raise ValueError("xhat must be nonempty")
    top = np.abs(xhat).max()
    pos = xhat >= top - 2.0 * eps
    neg = xhat <= -top + 2.0 * eps
    idx = np.concatenate([np.flatnonzero(pos), np.flatnonzero(neg)])
    sg = np.concatenate([np.ones(pos.sum(), dtype=np.int64), -np.ones(neg.sum(), dtype=np.int64)])
    order = np.lexsort((-sg, idx))
    return VertexHull(idx[order], sg[order])


def sign_pattern_l1(xhat, eps: float) -> SignPattern:
    """Fixed sign where ``|xhat_i| > eps``, FREE otherwise."""
    xhat = np.asarray(xhat, dtype=float)
    if xhat.size == 0:
        raise ValueError("xhat must be nonempty")
    tags = np.where(np.abs(xhat) > eps, np.sign(xhat), FREE).astype(np.int8)
    return SignPattern(tags)


def sign_pattern_excess(pattern: SignPattern, xhat, eps: float) -> float:
    """Extra certificate slack when the box is larger than the l1-ball T.

    Every box element is a ``2 * sum_free |xhat_i|``-subgradient of
    ``||.||_1`` at ``xhat``; the part exceeding ``2 eps`` is returned.
    """
    mass = float(np.abs(np.asarray(xhat, dtype=float)[pattern.free]).sum())
    return 2.0 * max(0.0, mass - eps)


def median_subgradient(points, image, eps: float, A=None) -> Singleton:
    """Mean of unit vectors ``(Ax - p_i)/||Ax - p_i||`` over points farther than ``eps``.

    ``points`` has one point per row.  Points within ``eps`` contribute the
    zero element of their unit-ball subdifferential and are counted in
    ``near_count``.
    """
    pts = np.asarray(points, dtype=float)
    image = np.asarray(image, dtype=float)
    diff = image - pts
    dist = np.linalg.norm(diff, axis=1)
    far = dist > eps
    n = pts.shape[0]
    img_grad = (diff[far] / dist[far, None]).sum(axis=0) / n if far.any() else np.zeros(image.size)
    grad = rmatvec(A, img_grad) if A is not None else pts @ img_grad
    return Singleton(grad, img_grad, int(n - far.sum()))


def approximate_subdifferential(instance: ProblemInstance, image, eps: float):
    """Dispatch to the representation matching the objective kind."""
    kind = instance.kind
    if kind == "max":
        return vertex_set_max(image, eps)
    if kind == "linf":
        return vertex_set_linf(image, eps)
    if kind == "l1":
        return sign_pattern_l1(image, eps)
    return median_subgradient(instance.data["points"], image, eps, instance.A)


def certificate_extra(instance: ProblemInstance, T, image, eps: float) -> float:
    """Additive gap correction needed for ``ghat + 2 L eps`` to bound suboptimality."""
    if isinstance(T, Singleton) and T.near_count:
        diam2 = instance.data.get("diam2")
        if diam2 is None:
            diam2 = column_diameter(instance.data["points"].T, 2)
        return T.near_count / instance.data["points"].shape[0] * diam2
    if isinstance(T, SignPattern):
        return sign_pattern_excess(T, image, eps)
    return 0.0


def witness_point(xhat, eps: float) -> np.ndarray:
    """Point ``u`` with ``||u - xhat||_inf <= eps`` whose argmax set is ``V(xhat, eps)``.

    Raising every near-maximal coordinate to ``max - eps`` makes them tie;
    the rest stay strictly below when ``eps > 0``.
    """
    xhat = np.asarray(xhat, dtype=float)
    top = xhat.max()
    u = xhat.copy()
    near = xhat >= top - 2.0 * eps
    u[near] = top - eps
    return u

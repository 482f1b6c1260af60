"""Tensor-product quadrature over (possibly oriented) rectangles."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np

from .exprlang import EvaluationError

RuleKind = Literal["gauss-legendre-tensor", "midpoint-composite"]


class QuadratureError(Exception):
    """An integrand failed at a quadrature node; ``location`` is (z1, z2) if known."""

    def __init__(self, message: str, location: tuple[float, float] | None = None):
        self.location = location
        super().__init__(message)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].

    Roots of P_n are found by Newton's method from Chebyshev-like initial
    guesses, with P_n and P_n' from the three-term recurrence.
    """
    if not 1 <= n <= 64:
        raise ValueError("points_per_axis must lie in [1, 64]")
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) <= 4e-16:
            break
    # one more evaluation at the converged roots for the weights
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    kind: RuleKind = "gauss-legendre-tensor"
    points_per_axis: int = 16
    panels_per_axis: int = 1

    def __post_init__(self):
        if self.kind not in ("gauss-legendre-tensor", "midpoint-composite"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if not 1 <= self.points_per_axis <= 64:
            raise ValueError("points_per_axis must lie in [1, 64]")
        if self.panels_per_axis < 1:
            raise ValueError("panels_per_axis must be at least 1")

    @property
    def order(self) -> int:
        """Nominal convergence order under panel refinement."""
        if self.kind == "midpoint-composite":
            return 2
        return 2 * self.points_per_axis

    def reference(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes/weights of one panel on [-1, 1]."""
        if self.kind == "gauss-legendre-tensor":
            return gauss_legendre(self.points_per_axis)
        m = self.points_per_axis
        nodes = -1.0 + (2.0 * np.arange(m) + 1.0) / m
        return nodes, np.full(m, 2.0 / m)

    def nodes_1d(self, a, b):
        """Composite nodes/weights on [a, b] (oriented; a > b gives negative weights).

        ``a`` and ``b`` may be arrays; nodes are appended on a trailing axis.
        """
        ref_x, ref_w = self.reference()
        npan = self.panels_per_axis
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        a, b = a[..., None], b[..., None]
        edges = np.arange(npan + 1) / npan
        lo = a + (b - a) * edges[:-1]
        hi = a + (b - a) * edges[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = (mid[..., :, None] + half[..., :, None] * ref_x).reshape(*a.shape[:-1], -1)
        w = (half[..., :, None] * ref_w * np.ones_like(mid[..., :, None])).reshape(*a.shape[:-1], -1)
        return x, w


DEFAULT_RULE = QuadratureRule()


def integrate1d(g: Callable, a, b, rule: QuadratureRule = DEFAULT_RULE):
    """Oriented integral of a vectorized ``g`` from ``a`` to ``b`` (broadcasts)."""
    x, w = rule.nodes_1d(a, b)
    return np.sum(g(x) * w, axis=-1)


def tensor_nodes(rule: QuadratureRule, l1, l2, r1, r2):
    """Tensor nodes for a batch of rectangles; node axis is last.

    Ordering is panel-major then node-major along z1, then z2, so a flat
    sum reproduces the deterministic row-major reduction.
    """
    z1, w1 = rule.nodes_1d(l1, l2)
    z2, w2 = rule.nodes_1d(r1, r2)
    n1, n2 = z1.shape[-1], z2.shape[-1]
    Z1 = np.repeat(z1, n2, axis=-1)
    Z2 = np.tile(z2, (1,) * (z2.ndim - 1) + (n1,))
    W = (w1[..., :, None] * w2[..., None, :]).reshape(*w1.shape[:-1], n1 * n2)
    return Z1, Z2, W


def integrate2d(g: Callable, rect, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Integrate ``g(z1, z2)`` over ``[l1, l2] x [r1, r2]`` with orientation.

    ``g`` receives arrays of node coordinates and must return an array of the
    same shape. Panels are summed sequentially in row-major order, nodes
    within a panel also row-major.
    """
    l1, l2, r1, r2 = (float(v) for v in rect)
    npan = rule.panels_per_axis
    ref_x, ref_w = rule.reference()
    e1 = l1 + (l2 - l1) * np.arange(npan + 1) / npan
    e2 = r1 + (r2 - r1) * np.arange(npan + 1) / npan
    total = 0.0
    for i in range(npan):
        h1 = 0.5 * (e1[i + 1] - e1[i])
        z1 = 0.5 * (e1[i + 1] + e1[i]) + h1 * ref_x
        for j in range(npan):
            h2 = 0.5 * (e2[j + 1] - e2[j])
            z2 = 0.5 * (e2[j + 1] + e2[j]) + h2 * ref_x
            Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
            try:
                vals = np.asarray(g(Z1, Z2), dtype=float)
            except EvaluationError as exc:
                loc = None
                if exc.index is not None and exc.index < Z1.size:
                    loc = (float(Z1.flat[exc.index]), float(Z2.flat[exc.index]))
                where = f" at node {loc}" if loc else f" on panel [{e1[i]}, {e1[i+1]}]x[{e2[j]}, {e2[j+1]}]"
                raise QuadratureError(f"integrand failed{where}: {exc}", loc) from exc
            if vals.shape != Z1.shape:
                vals = np.broadcast_to(vals, Z1.shape)
            if not np.all(np.isfinite(vals)):
                k = int(np.flatnonzero(~np.isfinite(vals))[0])
                loc = (float(Z1.flat[k]), float(Z2.flat[k]))
                raise QuadratureError(f"non-finite integrand at node {loc}", loc)
            total += h1 * h2 * float(np.sum(np.outer(ref_w, ref_w) * vals))
    return total

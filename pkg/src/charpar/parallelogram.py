"""Curvilinear characteristic parallelograms and the vertex identity.

For a solution u and a rectangle [l1, l2] x [r1, r2] in characteristic
coordinates,

    u(A) - u(B) + u(C) - u(D) = int_{l1}^{l2} int_{r1}^{r2} K_tilde dz2 dz1

with A <-> (l1, r1), B <-> (l1, r2), C <-> (l2, r2), D <-> (l2, r1).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .exprlang import Expr, parse
from .kernel import KernelContext
from .problem import COEFF_VARS, EquationSpec
from .quadrature import DEFAULT_RULE, QuadratureRule, integrate2d

VERTEX_LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class CharRectangle:
    l1: float
    l2: float
    r1: float
    r2: float
    allow_degenerate: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("l1", "l2", "r1", "r2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.allow_degenerate:
            ok = self.l1 <= self.l2 and self.r1 <= self.r2
        else:
            ok = self.l1 < self.l2 and self.r1 < self.r2
        if not ok:
            raise ValueError(f"rectangle bounds must satisfy l1 < l2 and r1 < r2, got {self.bounds}")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.l1, self.l2, self.r1, self.r2)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.l1 + self.l2), 0.5 * (self.r1 + self.r2))

    def corners(self) -> dict[str, tuple[float, float]]:
        """Characteristic coordinates of the labelled vertices."""
        return {
            "A": (self.l1, self.r1),
            "B": (self.l1, self.r2),
            "C": (self.l2, self.r2),
            "D": (self.l2, self.r1),
        }


def relabel_interval(q: Expr | str, lo: float, hi: float) -> tuple[float, float]:
    """Image of [lo, hi] under a strictly monotone q (expression in ``t``), ordered."""
    q = q if isinstance(q, Expr) else parse(q, ["t"])
    a = float(q.evaluate({"t": lo}))
    b = float(q.evaluate({"t": hi}))
    return (a, b) if a <= b else (b, a)


# --------------------------------------------------------------------------
# solution fields

class SolutionField:
    """A candidate solution u with its first partials p = u_x1, q = u_x2.

    Build one with :meth:`from_exprs`, :meth:`from_callables` or
    :meth:`from_lattice`.
    """

    def __init__(self, mode: str, value: Callable, grad: Callable, cell_size: float | None = None):
        self.mode = mode
        self._value = value
        self._grad = grad
        self.cell_size = cell_size
        self.exprs: tuple[Expr, Expr, Expr] | None = None

    def value(self, x1, x2):
        return self._value(x1, x2)

    def grad(self, x1, x2):
        return self._grad(x1, x2)

    __call__ = value

    @classmethod
    def from_exprs(cls, u: Expr | str, du_dx1: Expr | str | None = None, du_dx2: Expr | str | None = None):
        u = u if isinstance(u, Expr) else parse(u, COEFF_VARS)
        du_dx1 = u.diff("x1") if du_dx1 is None else (du_dx1 if isinstance(du_dx1, Expr) else parse(du_dx1, COEFF_VARS))
        du_dx2 = u.diff("x2") if du_dx2 is None else (du_dx2 if isinstance(du_dx2, Expr) else parse(du_dx2, COEFF_VARS))

        def ev(e, x1, x2):
            shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
            out = np.broadcast_to(e.evaluate({"x1": x1, "x2": x2}), shape) * 1.0
            return float(out) if out.ndim == 0 else out

        field_ = cls(
            "analytic",
            lambda x1, x2: ev(u, x1, x2),
            lambda x1, x2: (ev(du_dx1, x1, x2), ev(du_dx2, x1, x2)),
        )
        field_.exprs = (u, du_dx1, du_dx2)
        return field_

    @classmethod
    def from_callables(cls, value: Callable, grad: Callable | None = None, fd_step: float = 1e-5):
        """Wrap vectorized callables; a missing gradient falls back to central differences."""
        if grad is None:

            def grad(x1, x2):
                x1 = np.asarray(x1, dtype=float)
                x2 = np.asarray(x2, dtype=float)
                h1 = fd_step * np.maximum(1.0, np.abs(x1))
                h2 = fd_step * np.maximum(1.0, np.abs(x2))
                p = (value(x1 + h1, x2) - value(x1 - h1, x2)) / (2 * h1)
                q = (value(x1, x2 + h2) - value(x1, x2 - h2)) / (2 * h2)
                return p, q

        return cls("callable", value, grad)

    @classmethod
    def from_lattice(cls, y1_nodes, y2_nodes, values, pair=None):
        """Bicubic spline through samples on a tensor lattice.

        With ``pair`` the lattice lives in characteristic coordinates and
        derivatives are carried to x through the forward Jacobian; without it
        the lattice is in x directly.
        """
        y1_nodes = np.asarray(y1_nodes, dtype=float)
        y2_nodes = np.asarray(y2_nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        spline = RectBivariateSpline(y1_nodes, y2_nodes, values, kx=3, ky=3, s=0)

        def ev(y1, y2, dx=0, dy=0):
            shape = np.broadcast(np.asarray(y1), np.asarray(y2)).shape
            out = spline.ev(
                np.broadcast_to(y1, shape).ravel(), np.broadcast_to(y2, shape).ravel(), dx=dx, dy=dy
            ).reshape(shape)
            return float(out) if out.ndim == 0 else out

        if pair is None:
            value = ev

            def grad(x1, x2):
                return ev(x1, x2, 1, 0), ev(x1, x2, 0, 1)

        else:

            def value(x1, x2):
                return ev(*pair.gamma(x1, x2))

            def grad(x1, x2):
                y1, y2 = pair.gamma(x1, x2)
                v1, v2 = ev(y1, y2, 1, 0), ev(y1, y2, 0, 1)
                g1x1, g1x2, g2x1, g2x2 = pair.jacobian(x1, x2)
                return v1 * g1x1 + v2 * g2x1, v1 * g1x2 + v2 * g2x2

        cell = float(max(np.diff(y1_nodes).max(), np.diff(y2_nodes).max()))
        field_ = cls("grid", value, grad, cell_size=cell)
        field_.lattice = (y1_nodes, y2_nodes, values)
        return field_


# --------------------------------------------------------------------------
# identity

@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    residual: float
    vertices: dict[str, tuple[float, float]]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["vertices"] = {k: list(v) for k, v in self.vertices.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def vertices(rect: CharRectangle, pair) -> dict[str, tuple[float, float]]:
    """x-space vertices A, B, C, D of the parallelogram."""
    corners = rect.corners()
    y1 = np.array([corners[k][0] for k in VERTEX_LABELS])
    y2 = np.array([corners[k][1] for k in VERTEX_LABELS])
    x1, x2 = pair.inverse(y1, y2)
    return {k: (float(x1[i]), float(x2[i])) for i, k in enumerate(VERTEX_LABELS)}


def alternating_sum(field: SolutionField, verts: dict[str, tuple[float, float]]) -> float:
    x1 = np.array([verts[k][0] for k in VERTEX_LABELS])
    x2 = np.array([verts[k][1] for k in VERTEX_LABELS])
    u = np.asarray(field.value(x1, x2), dtype=float)
    return float(u[0] - u[1] + u[2] - u[3])


def identity_integrand(eq: EquationSpec, pair, field: SolutionField, ctx: KernelContext | None = None):
    ctx = ctx or KernelContext(eq, pair)

    def g(z1, z2):
        x1, x2 = pair.inverse(z1, z2)
        u = field.value(x1, x2)
        p, q = field.grad(x1, x2)
        return ctx.K_tilde(z1, z2, u, p, q, x=(x1, x2))

    return g


def identity_residual(
    eq: EquationSpec,
    pair,
    field: SolutionField,
    rect: CharRectangle,
    rule: QuadratureRule = DEFAULT_RULE,
    domain=None,
) -> IdentityReport:
    """Both sides of the vertex identity on ``rect`` and their difference."""
    if domain is not None:
        _check_inside(rect, pair, domain)
    ctx = KernelContext(eq, pair).calibrated(*rect.center)
    verts = vertices(rect, pair)
    lhs = alternating_sum(field, verts)
    rhs = integrate2d(identity_integrand(eq, pair, field, ctx), rect.bounds, rule)
    return IdentityReport(lhs, rhs, lhs - rhs, verts)


def _check_inside(rect: CharRectangle, pair, domain, n: int = 9):
    s = np.linspace(0.0, 1.0, n)
    l1, l2, r1, r2 = rect.bounds
    y1 = np.concatenate([l1 + (l2 - l1) * s, np.full(n, l2), l1 + (l2 - l1) * s, np.full(n, l1)])
    y2 = np.concatenate([np.full(n, r1), r1 + (r2 - r1) * s, np.full(n, r2), r1 + (r2 - r1) * s])
    x1, x2 = pair.inverse(y1, y2)
    inside = domain.contains(x1, x2, pair)
    if not np.all(inside):
        k = int(np.flatnonzero(~inside)[0])
        raise ValueError(f"parallelogram leaves the domain at x=({x1[k]:.6g}, {x2[k]:.6g})")


# --------------------------------------------------------------------------
# converse probe

@dataclass
class ProbeReport:
    sizes: list[tuple[float, float]]
    scaled_residuals: list[float]
    limit: float

    def observed_order(self) -> float:
        """Least-squares slope of log|scaled residual| against log(l + r)."""
        h = np.array([l + r for l, r in self.sizes])
        s = np.abs(np.array(self.scaled_residuals))
        return float(np.polyfit(np.log(h), np.log(s), 1)[0])

    def as_dict(self) -> dict:
        return {
            "sizes": [list(v) for v in self.sizes],
            "scaled_residuals": self.scaled_residuals,
            "limit": self.limit,
        }


def converse_probe(
    eq: EquationSpec,
    pair,
    field: SolutionField,
    corner: tuple[float, float],
    sizes: Sequence[tuple[float, float]],
    rule: QuadratureRule = DEFAULT_RULE,
    rhs: str = "quadrature",
) -> ProbeReport:
    """Scaled identity residuals on rectangles shrinking onto ``corner``.

    residual / (l r) tends to (A u - f) / beta at the corner's x-image, which
    is zero exactly when u solves the equation there. The limit is estimated
    by linear Richardson extrapolation in h = l + r from the last two sizes.

    ``rhs="quadrature"`` integrates K_tilde over each rectangle, so for a true
    solution every entry sits at rounding level. ``rhs="corner"`` replaces the
    integral mean by K_tilde at the corner; the entries then decay like
    O(l + r) for solutions, which makes the rate observable.
    """
    if rhs not in ("quadrature", "corner"):
        raise ValueError("rhs must be 'quadrature' or 'corner'")
    sizes = [(float(l), float(r)) for l, r in sizes]
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    if any(l <= 0 or r <= 0 for l, r in sizes):
        raise ValueError("sizes must be positive")
    hs = [l + r for l, r in sizes]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("sizes must be decreasing")
    if field.mode == "grid":
        threshold = 4 * field.cell_size
        if min(min(l, r) for l, r in sizes) < threshold:
            raise ValueError(f"grid fields cannot be probed below {threshold:.3g} (4 lattice cells)")
    l1, r1 = (float(v) for v in corner)
    scaled = []
    if rhs == "corner":
        g0 = float(identity_integrand(eq, pair, field)(np.array([l1]), np.array([r1]))[0])
    for l, r in sizes:
        rect = CharRectangle(l1, l1 + l, r1, r1 + r)
        if rhs == "corner":
            scaled.append(alternating_sum(field, vertices(rect, pair)) / (l * r) - g0)
        else:
            scaled.append(identity_residual(eq, pair, field, rect, rule).residual / (l * r))
    ha, hb = hs[-2], hs[-1]
    sa, sb = scaled[-2], scaled[-1]
    limit = (ha * sb - hb * sa) / (ha - hb)
    return ProbeReport(sizes, scaled, float(limit))

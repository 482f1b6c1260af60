"""Goursat problem for u_12 + a u_1 + b u_2 + c u = f on a rectangle, by Picard iteration.

Data: u(x1_0, x2) = phi(x2) and u(x1, x2_0) = psi(x1), with
phi(x2_0) = psi(x1_0). The iteration map is

    u <- phi(x2) + psi(x1) - phi(x2_0) + int int (f - a u_1 - b u_2 - c u)

over [x1_0, x1] x [x2_0, x2], discretised on a uniform node lattice with
second-order node derivatives and a cell-midpoint cumulative sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..characteristics import CharacteristicPair
from ..exprlang import Expr, to_source
from ..problem import EquationSpec
from ..parallelogram import SolutionField
from ._common import ConvergenceError, ev, expr

PICARD_TOL = 1e-10
MAX_PICARD = 200
XY = ("x1", "x2")


@dataclass(frozen=True)
class LinearGoursatData:
    corner: tuple[float, float]
    a_lo: Expr = "0"
    b_lo: Expr = "0"
    c_lo: Expr = "0"
    f: Expr = "0"
    phi: Expr = "0"  # on x1 = x1_0, as a function of t = x2
    psi: Expr = "0"  # on x2 = x2_0, as a function of t = x1
    compat_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "corner", (float(self.corner[0]), float(self.corner[1])))
        for name in ("a_lo", "b_lo", "c_lo", "f"):
            object.__setattr__(self, name, expr(getattr(self, name), XY))
        for name in ("phi", "psi"):
            object.__setattr__(self, name, expr(getattr(self, name), ("t",)))
        gap = self.compatibility_defect()
        if abs(gap) > self.compat_tol:
            raise ValueError(f"Goursat data incompatible at the corner: phi(x2_0) - psi(x1_0) = {gap:.3g}")

    def compatibility_defect(self) -> float:
        x10, x20 = self.corner
        return float(self.phi.evaluate({"t": x20}) - self.psi.evaluate({"t": x10}))

    def equation(self) -> EquationSpec:
        src = {k: to_source(getattr(self, k)) for k in ("f", "a_lo", "b_lo", "c_lo")}
        rhs = f"({src['f']}) - ({src['a_lo']})*p - ({src['b_lo']})*q - ({src['c_lo']})*u"
        return EquationSpec("0", "0.5", "0", rhs)

    def pair(self) -> CharacteristicPair:
        return CharacteristicPair("x1", "x2", ("y1", "y2"))

    @property
    def principal_only(self) -> bool:
        return self.a_lo.is_zero() and self.b_lo.is_zero() and self.c_lo.is_zero()


@dataclass
class PicardResult:
    x1_nodes: np.ndarray
    x2_nodes: np.ndarray
    u: np.ndarray
    iterations: int
    history: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def spacing(self) -> tuple[float, float]:
        return (self.x1_nodes[1] - self.x1_nodes[0], self.x2_nodes[1] - self.x2_nodes[0])

    def field(self) -> SolutionField:
        return SolutionField.from_lattice(self.x1_nodes, self.x2_nodes, self.u)


def _corner_mean(V):
    return 0.25 * (V[:-1, :-1] + V[1:, :-1] + V[:-1, 1:] + V[1:, 1:])


def solve_goursat_linear_picard(
    data: LinearGoursatData,
    x1_end: float,
    x2_end: float,
    n: int | tuple[int, int] = 129,
    picard_tol: float = PICARD_TOL,
    max_picard: int = MAX_PICARD,
) -> PicardResult:
    """Iterate from u = 0 until the sup-norm change is at most ``picard_tol``.

    Without lower-order terms the map does not depend on u, so exactly one
    application is performed.
    """
    n1, n2 = (n, n) if np.isscalar(n) else n
    if min(n1, n2) < 5:
        raise ValueError("grid needs at least 4 cells per axis")
    x10, x20 = data.corner
    if not (x1_end > x10 and x2_end > x20):
        raise ValueError("the rectangle must extend beyond the corner in both directions")
    x1 = np.linspace(x10, x1_end, n1)
    x2 = np.linspace(x20, x2_end, n2)
    h1, h2 = x1[1] - x1[0], x2[1] - x2[0]
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    base = ev(data.phi, X1.shape, t=X2) + ev(data.psi, X1.shape, t=X1) - data.phi.evaluate({"t": x20})

    c1, c2 = np.meshgrid(0.5 * (x1[:-1] + x1[1:]), 0.5 * (x2[:-1] + x2[1:]), indexing="ij")
    fc = ev(data.f, c1.shape, x1=c1, x2=c2)
    ac = ev(data.a_lo, c1.shape, x1=c1, x2=c2)
    bc = ev(data.b_lo, c1.shape, x1=c1, x2=c2)
    cc = ev(data.c_lo, c1.shape, x1=c1, x2=c2)

    def apply(U):
        G = fc
        if not data.principal_only:
            U1, U2 = np.gradient(U, h1, h2, edge_order=2)
            G = fc - ac * _corner_mean(U1) - bc * _corner_mean(U2) - cc * _corner_mean(U)
        out = base.copy()
        out[1:, 1:] += np.cumsum(np.cumsum(G, axis=0), axis=1) * (h1 * h2)
        return out

    U = np.zeros_like(base)
    history: list[float] = []
    for _ in range(max_picard):
        V = apply(U)
        history.append(float(np.max(np.abs(V - U))))
        U = V
        if data.principal_only or history[-1] <= picard_tol:
            return PicardResult(x1, x2, U, len(history), history, True)
    result = PicardResult(x1, x2, U, len(history), history, False)
    raise ConvergenceError(
        f"Picard iteration did not reach {picard_tol:g} in {max_picard} iterations (last change {history[-1]:.3g})",
        history,
        result,
    )

"""Darboux problem for u_12 = f - lambda g(x, u) in the sector alpha x1 <= x2 <= beta x1.

u vanishes on both sector edges. Chaining parallelograms whose far corners
sit on the edges gives a geometric cascade of axis-aligned rectangles
shrinking to the origin; u(P) is the alternating sum of the source
integrated over those rectangles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from ..characteristics import CharacteristicPair
from ..exprlang import Expr, to_source
from ..problem import EquationSpec
from ..parallelogram import SolutionField
from ..quadrature import QuadratureRule, tensor_nodes
from ._common import ConvergenceError, OutsideDomainError, ev, expr, scalar_or_array

SERIES_EPS = 1e-12
CASCADE_EPS = 1e-14
PICARD_TOL = 1e-10
MAX_PICARD = 200
MAX_DEPTH = 10_000
DARBOUX_RULE = QuadratureRule("gauss-legendre-tensor", 8)


@dataclass(frozen=True)
class DarbouxData:
    alpha: float
    beta: float
    lam: float = 0.0
    g: Expr = "0"
    f: Expr = "0"
    L1: float | None = None
    L2: float | None = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 < self.beta):
            raise ValueError(f"need 0 < alpha < 1 < beta, got alpha={self.alpha}, beta={self.beta}")
        object.__setattr__(self, "g", expr(self.g, ("x1", "x2", "u")))
        object.__setattr__(self, "f", expr(self.f, ("x1", "x2")))

    def equation(self) -> EquationSpec:
        """u_12 = f - lambda g written as an equation with b = 1/2."""
        rhs = f"({to_source(self.f)}) - ({self.lam!r})*({to_source(self.g)})"
        return EquationSpec("0", "0.5", "0", rhs)

    def pair(self) -> CharacteristicPair:
        return CharacteristicPair("x1", "x2", ("y1", "y2"))

    def growth_violations(self, x1_max: float = 1.0, n: int = 200, seed: int = 0) -> list[tuple]:
        """Sample points where |g| > L1 + L2 |u|; empty when no bound was given."""
        if self.L1 is None or self.L2 is None:
            return []
        rng = np.random.default_rng(seed)
        s = rng.uniform(0, x1_max, n)
        x2 = s * rng.uniform(self.alpha, self.beta, n)
        u = rng.normal(scale=10.0, size=n)
        g = ev(self.g, (n,), x1=s, x2=x2, u=u)
        bad = np.abs(g) > self.L1 + self.L2 * np.abs(u) + 1e-12
        return [(float(s[k]), float(x2[k]), float(u[k]), float(g[k])) for k in np.flatnonzero(bad)]


@dataclass(frozen=True)
class CascadeStep:
    P: tuple[float, float]
    N: tuple[float, float]
    M: tuple[float, float]
    P_next: tuple[float, float]

    @property
    def rect(self) -> tuple[float, float, float, float]:
        """(x1_lo, x1_hi, x2_lo, x2_hi) of the rectangle with corners P, N, P_next, M."""
        return (self.M[0], self.P[0], self.N[1], self.P[1])

    @property
    def area(self) -> float:
        lo1, hi1, lo2, hi2 = self.rect
        return (hi1 - lo1) * (hi2 - lo2)


def _check_sector(alpha, beta, x1, x2, tol=1e-12):
    bad = (x2 < alpha * x1 - tol) | (x2 > beta * x1 + tol) | (x1 < -tol)
    if np.any(bad):
        k = int(np.flatnonzero(np.ravel(bad))[0])
        raise OutsideDomainError(
            f"point ({np.ravel(x1)[k]}, {np.ravel(x2)[k]}) is outside the sector {alpha}*x1 <= x2 <= {beta}*x1"
        )


def darboux_cascade(data, P0, cascade_eps: float = CASCADE_EPS, max_steps: int = MAX_DEPTH) -> list[CascadeStep]:
    """Vertex sequence starting at P0; ``data`` is a DarbouxData or an (alpha, beta) pair.

    A point on a sector edge yields one zero-area step and stops; otherwise
    the cascade stops once the newest corner satisfies max|P| < cascade_eps.
    """
    alpha, beta = (data.alpha, data.beta) if isinstance(data, DarbouxData) else map(float, data)
    if not (0.0 < alpha < 1.0 < beta):
        raise ValueError(f"need 0 < alpha < 1 < beta, got alpha={alpha}, beta={beta}")
    x1, x2 = float(P0[0]), float(P0[1])
    _check_sector(alpha, beta, np.array(x1), np.array(x2))
    steps = []
    for _ in range(max_steps):
        N = (x1, alpha * x1)
        M = (x2 / beta, x2)
        nxt = (x2 / beta, alpha * x1)
        step = CascadeStep((x1, x2), N, M, nxt)
        steps.append(step)
        if step.area == 0.0 or max(abs(nxt[0]), abs(nxt[1])) < cascade_eps:
            break
        x1, x2 = nxt
    return steps


def _series(data, x1, x2, integrand, rule, series_eps, cascade_eps, record=False):
    """Alternating cascade sum for a batch of points.

    ``integrand(z1, z2)`` receives node arrays (batch, nodes). Returns values,
    per-point term counts, and the term list of the first point if requested.
    """
    alpha, beta = data.alpha, data.beta
    x1 = np.array(x1, dtype=float).ravel()
    x2 = np.array(x2, dtype=float).ravel()
    total = np.zeros_like(x1)
    nterms = np.zeros(x1.shape, dtype=int)
    active = np.ones(x1.shape, dtype=bool)
    terms = []
    sign = 1.0
    for _ in range(MAX_DEPTH):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        p1, p2 = x1[idx], x2[idx]
        m1, n2 = p2 / beta, alpha * p1
        degenerate = (p1 - m1) * (p2 - n2) == 0.0
        Z1, Z2, W = tensor_nodes(rule, m1, p1, n2, p2)
        term = np.sum(W * integrand(Z1, Z2, idx), axis=-1)
        total[idx] += sign * term
        nterms[idx] += 1
        if record and active[0]:
            terms.append(float(sign * term[0]))
        done = degenerate | (np.abs(term) < series_eps) | (np.maximum(np.abs(m1), np.abs(n2)) < cascade_eps)
        x1[idx], x2[idx] = m1, n2
        active[idx[done]] = False
        sign = -sign
    return total, nterms, terms


@dataclass
class DarbouxSolution:
    value: object
    terms: list[float]
    n_terms: np.ndarray
    picard_history: list[float] = field(default_factory=list)
    iterations: int = 0
    grid: tuple | None = None  # (s_nodes, theta_nodes, U) for the nonlinear solve
    evaluator: object = None

    def __call__(self, x1, x2):
        return self.evaluator(x1, x2)

    def as_field(self, fd_step: float = 1e-5) -> SolutionField:
        return SolutionField.from_callables(self.evaluator, fd_step=fd_step)


def _sector_coords(data, x1, x2):
    s = np.asarray(x1, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(s > 0, (np.asarray(x2) / np.where(s > 0, s, 1.0) - data.alpha) / (data.beta - data.alpha), 0.0)
    return s, np.clip(theta, 0.0, 1.0)


def solve_darboux(
    data: DarbouxData,
    x1,
    x2,
    rule: QuadratureRule = DARBOUX_RULE,
    series_eps: float = SERIES_EPS,
    cascade_eps: float = CASCADE_EPS,
    picard_tol: float = PICARD_TOL,
    max_picard: int = MAX_PICARD,
    grid: tuple[int, int] = (33, 17),
    extent: float | None = None,
) -> DarbouxSolution:
    """u at points of the closed sector.

    For lambda = 0 this is a direct series. Otherwise u is iterated on an
    (s, theta) grid, x1 = s and x2 = s (alpha + theta (beta - alpha)),
    covering 0 <= s <= extent. Each sweep recomputes the series at every node
    with g evaluated on a bicubic spline of the previous sweep, starting
    from u = 0. The requested points are then evaluated with the converged
    spline inside g.
    """
    x1a = np.asarray(x1, dtype=float)
    x2a = np.asarray(x2, dtype=float)
    shape = np.broadcast(x1a, x2a).shape
    x1a, x2a = np.broadcast_to(x1a, shape), np.broadcast_to(x2a, shape)
    _check_sector(data.alpha, data.beta, x1a, x2a)
    f = data.f

    if data.lam == 0.0 or data.g.is_zero():
        def src(Z1, Z2, idx):
            return ev(f, Z1.shape, x1=Z1, x2=Z2)

        def evaluator(p1, p2, record=False):
            p1, p2 = np.broadcast_arrays(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))
            _check_sector(data.alpha, data.beta, p1, p2)
            v, n, t = _series(data, p1, p2, src, rule, series_eps, cascade_eps, record)
            return v.reshape(p1.shape), n.reshape(p1.shape), t

        v, n, terms = evaluator(x1a, x2a, record=True)
        return DarbouxSolution(
            scalar_or_array(v), terms, n, evaluator=lambda p1, p2: scalar_or_array(evaluator(p1, p2)[0])
        )

    ns, nt = grid
    if ns < 4 or nt < 4:
        raise ValueError("the (s, theta) grid needs at least 4 nodes per axis")
    S = float(np.max(x1a)) if extent is None else float(extent)
    if S <= 0:
        raise ValueError("extent must be positive")
    s_nodes = np.linspace(0.0, S, ns)
    t_nodes = np.linspace(0.0, 1.0, nt)
    Sg, Tg = np.meshgrid(s_nodes, t_nodes, indexing="ij")
    X1g, X2g = Sg, Sg * (data.alpha + Tg * (data.beta - data.alpha))
    lam = data.lam

    def make_src(spline):
        def src(Z1, Z2, idx):
            zs, zt = _sector_coords(data, Z1, Z2)
            u = spline.ev(zs, zt) if spline is not None else np.zeros_like(Z1)
            return ev(f, Z1.shape, x1=Z1, x2=Z2) - lam * ev(data.g, Z1.shape, x1=Z1, x2=Z2, u=u)
        return src

    U = np.zeros_like(X1g)
    spline = None
    history: list[float] = []
    converged = False
    for k in range(1, max_picard + 1):
        V, _, _ = _series(data, X1g, X2g, make_src(spline), rule, series_eps, cascade_eps)
        V = V.reshape(U.shape)
        diff = float(np.max(np.abs(V - U)))
        history.append(diff)
        U = V
        spline = RectBivariateSpline(s_nodes, t_nodes, U, kx=3, ky=3)
        if diff <= picard_tol:
            converged = True
            break

    final_src = make_src(spline)

    def evaluator(p1, p2, record=False):
        p1, p2 = np.broadcast_arrays(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float))
        _check_sector(data.alpha, data.beta, p1, p2)
        v, n, t = _series(data, p1, p2, final_src, rule, series_eps, cascade_eps, record)
        return v.reshape(p1.shape), n.reshape(p1.shape), t

    v, n, terms = evaluator(x1a, x2a, record=True)
    sol = DarbouxSolution(
        scalar_or_array(v),
        terms,
        n,
        history,
        len(history),
        (s_nodes, t_nodes, U),
        lambda p1, p2: scalar_or_array(evaluator(p1, p2)[0]),
    )
    if not converged:
        raise ConvergenceError(
            f"Darboux iteration did not reach {picard_tol:g} in {max_picard} sweeps (last change {history[-1]:.3g})",
            history,
            sol,
        )
    return sol

"""Characteristic coordinates y1 = gamma1(x), y2 = gamma2(x) and their inverse."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from .exprlang import EvaluationError, Expr, parse, simplify, substitute
from .problem import COEFF_VARS, DomainSpec, EquationSpec, NonHyperbolicError

TOL_CHAR = 1e-8
EPS_JAC = 1e-8
TOL_INV = 1e-10
MAX_ITER = 50
MAX_HALVINGS = 20


class InverseMapError(RuntimeError):
    """Newton inversion failed; carries the last iterate and its residual."""

    def __init__(self, message, last_iterate=None, residual=None):
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(message)


class TraceError(RuntimeError):
    pass


def _solve2x2(j11, j12, j21, j22, r1, r2):
    det = j11 * j22 - j12 * j21
    if np.any(det == 0):
        raise InverseMapError("singular characteristic Jacobian during Newton step")
    return (j22 * r1 - j12 * r2) / det, (j11 * r2 - j21 * r1) / det


def _inverse_of_jacobian(j11, j12, j21, j22):
    """Entries of [dgamma/dx]^-1 = dx/dy by Cramer's rule, ordered dx1/dy1, dx1/dy2, dx2/dy1, dx2/dy2."""
    det = j11 * j22 - j12 * j21
    return j22 / det, -j12 / det, -j21 / det, j11 / det


class AnalyticInverse:
    """Closed-form inverse x1(y1, y2), x2(y1, y2)."""

    mode = "analytic"

    def __init__(self, x1_of_y: Expr | str, x2_of_y: Expr | str):
        self.x1_of_y = x1_of_y if isinstance(x1_of_y, Expr) else parse(x1_of_y, ["y1", "y2"])
        self.x2_of_y = x2_of_y if isinstance(x2_of_y, Expr) else parse(x2_of_y, ["y1", "y2"])
        self._d = [e.diff(v) for e in (self.x1_of_y, self.x2_of_y) for v in ("y1", "y2")]

    def __call__(self, y1, y2):
        env = {"y1": y1, "y2": y2}
        shape = np.broadcast(np.asarray(y1), np.asarray(y2)).shape
        return tuple(np.broadcast_to(e.evaluate(env), shape) * 1.0 for e in (self.x1_of_y, self.x2_of_y))

    def jacobian(self, y1, y2):
        env = {"y1": y1, "y2": y2}
        shape = np.broadcast(np.asarray(y1), np.asarray(y2)).shape
        return tuple(np.broadcast_to(e.evaluate(env), shape) * 1.0 for e in self._d)


class NewtonInverse:
    """Inverse by damped Newton iteration on gamma(x) - y = 0.

    The initial guess for each target comes from the nearest entry (in y) of
    a table of sampled (x, gamma(x)) pairs.
    """

    mode = "newton"

    def __init__(self, forward, table_x1, table_x2, tol=TOL_INV, max_iter=MAX_ITER):
        self.forward = forward
        self.table_x = np.column_stack([np.ravel(table_x1), np.ravel(table_x2)]).astype(float)
        ty1, ty2 = forward.gamma(self.table_x[:, 0], self.table_x[:, 1])
        self._tree = cKDTree(np.column_stack([ty1, ty2]))
        self.tol = tol
        self.max_iter = max_iter

    def __call__(self, y1, y2):
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        shape = np.broadcast(y1, y2).shape
        Y1 = np.broadcast_to(y1, shape).ravel()
        Y2 = np.broadcast_to(y2, shape).ravel()
        _, idx = self._tree.query(np.column_stack([Y1, Y2]))
        x1 = self.table_x[idx, 0].copy()
        x2 = self.table_x[idx, 1].copy()
        x1, x2 = self._newton(x1, x2, Y1, Y2)
        return x1.reshape(shape), x2.reshape(shape)

    def _residual(self, x1, x2, y1, y2):
        g1, g2 = self.forward.gamma(x1, x2)
        return g1 - y1, g2 - y2

    def _newton(self, x1, x2, y1, y2):
        F1, F2 = self._residual(x1, x2, y1, y2)
        res = np.maximum(np.abs(F1), np.abs(F2))
        for _ in range(self.max_iter):
            active = res > self.tol
            if not np.any(active):
                break
            x1, x2, F1, F2, res = self._step(x1, x2, y1, y2, F1, F2, res, active)
        else:
            if np.any(res > self.tol):
                k = int(np.argmax(res))
                raise InverseMapError(
                    f"Newton inversion did not converge after {self.max_iter} iterations "
                    f"at y=({y1[k]:.17g}, {y2[k]:.17g}); residual {res[k]:.3g}",
                    last_iterate=(float(x1[k]), float(x2[k])),
                    residual=float(res[k]),
                )
        # one polishing step: tol is a guarantee, not the attainable accuracy
        x1, x2, *_ = self._step(x1, x2, y1, y2, F1, F2, res, res > 0)
        return x1, x2

    def _step(self, x1, x2, y1, y2, F1, F2, res, active):
        j11, j12, j21, j22 = self.forward.jacobian(x1, x2)
        d1, d2 = _solve2x2(j11, j12, j21, j22, F1, F2)
        lam = np.where(active, 1.0, 0.0)
        for _ in range(MAX_HALVINGS + 1):
            t1, t2 = x1 - lam * d1, x2 - lam * d2
            try:
                G1, G2 = self._residual(t1, t2, y1, y2)
            except EvaluationError:
                lam = lam * 0.5
                continue
            rt = np.maximum(np.abs(G1), np.abs(G2))
            worse = active & ~(rt < res)
            if not np.any(worse):
                break
            lam = np.where(worse, lam * 0.5, lam)
        else:
            # take whatever the last trial gave for points that never improved
            try:
                G1, G2 = self._residual(t1, t2, y1, y2)
            except EvaluationError as exc:
                raise InverseMapError("Newton step left the domain of gamma", (x1, x2), res) from exc
            rt = np.maximum(np.abs(G1), np.abs(G2))
        keep = active & (rt <= res)
        x1 = np.where(keep, t1, x1)
        x2 = np.where(keep, t2, x2)
        F1 = np.where(keep, G1, F1)
        F2 = np.where(keep, G2, F2)
        res = np.where(keep, rt, res)
        return x1, x2, F1, F2, res

    def jacobian(self, y1, y2):
        x1, x2 = self(y1, y2)
        return _inverse_of_jacobian(*self.forward.jacobian(x1, x2))


class CharacteristicPair:
    """Two first integrals given as expressions over (x1, x2).

    ``inverse`` is either an :class:`AnalyticInverse` or a
    :class:`NewtonInverse`; pass ``inverse=None`` together with a ``domain``
    to get the Newton one.
    """

    def __init__(self, gamma1, gamma2, inverse=None, domain: DomainSpec | None = None, table_n: int = 41):
        self.gamma1 = gamma1 if isinstance(gamma1, Expr) else parse(gamma1, COEFF_VARS)
        self.gamma2 = gamma2 if isinstance(gamma2, Expr) else parse(gamma2, COEFF_VARS)
        g = (self.gamma1, self.gamma2)
        self.d_gamma = tuple(e.diff(v) for e in g for v in ("x1", "x2"))
        self.d2_gamma = tuple(
            e.diff(v).diff(w) for e in g for v, w in (("x1", "x1"), ("x1", "x2"), ("x2", "x2"))
        )
        if isinstance(inverse, (tuple, list)):
            inverse = AnalyticInverse(*inverse)
        if inverse is None:
            if domain is None:
                raise ValueError("a Newton inverse needs a domain to build its initial-guess table")
            xs = domain.sample(table_n)
            inverse = NewtonInverse(self, *xs)
        self.inverse = inverse
        self.domain = domain

    def _eval(self, exprs, x1, x2):
        env = {"x1": x1, "x2": x2}
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        return tuple(np.broadcast_to(e.evaluate(env), shape) * 1.0 for e in exprs)

    def gamma(self, x1, x2):
        return self._eval((self.gamma1, self.gamma2), x1, x2)

    def jacobian(self, x1, x2):
        """(dg1/dx1, dg1/dx2, dg2/dx1, dg2/dx2)."""
        return self._eval(self.d_gamma, x1, x2)

    def hessian(self, x1, x2):
        """(g1_11, g1_12, g1_22, g2_11, g2_12, g2_22)."""
        return self._eval(self.d2_gamma, x1, x2)

    def inverse_jacobian(self, y1, y2):
        """(dx1/dy1, dx1/dy2, dx2/dy1, dx2/dy2) at characteristic point y."""
        return self.inverse.jacobian(y1, y2)

    def invert(self, y1, y2):
        return self.inverse(y1, y2)

    def relabel(self, q: Expr | str, domain: DomainSpec | None = None) -> "CharacteristicPair":
        """Pair with gamma1 replaced by q(gamma1); q is an expression in ``t``.

        The result uses a Newton inverse since q^-1 is generally not available.
        """
        q = q if isinstance(q, Expr) else parse(q, ["t"])
        g1 = simplify(substitute(q, {"t": self.gamma1}))
        return CharacteristicPair(g1, self.gamma2, None, domain or self.domain)


def invert(pair, y) -> tuple[float, float]:
    x1, x2 = pair.inverse(float(y[0]), float(y[1]))
    return float(x1), float(x2)


@dataclass
class CharacteristicReport:
    max_char_residual: float
    residual_witness: tuple[float, float]
    min_abs_jacobian: float
    jacobian_witness: tuple[float, float]
    tol_char: float
    eps_jac: float

    @property
    def passed(self) -> bool:
        return self.max_char_residual <= self.tol_char and self.min_abs_jacobian >= self.eps_jac

    def as_dict(self) -> dict:
        return {
            "check": "characteristics",
            "passed": self.passed,
            "max_char_residual": self.max_char_residual,
            "residual_witness": list(self.residual_witness),
            "min_abs_jacobian": self.min_abs_jacobian,
            "jacobian_witness": list(self.jacobian_witness),
            "tol_char": self.tol_char,
            "eps_jac": self.eps_jac,
        }


def characteristic_residuals(eq: EquationSpec, pair, x1, x2):
    """Left side of a g_1^2 + 2b g_1 g_2 + c g_2^2 = 0 for each family."""
    a, b, c = eq.coefficients(x1, x2)
    g1x1, g1x2, g2x1, g2x2 = pair.jacobian(x1, x2)
    r1 = a * g1x1**2 + 2 * b * g1x1 * g1x2 + c * g1x2**2
    r2 = a * g2x1**2 + 2 * b * g2x1 * g2x2 + c * g2x2**2
    return r1, r2


def validate_characteristics(
    eq: EquationSpec,
    pair,
    dom: DomainSpec,
    n_samples: int = 21,
    tol_char: float = TOL_CHAR,
    eps_jac: float = EPS_JAC,
) -> CharacteristicReport:
    x1, x2 = dom.sample(n_samples, pair)
    r1, r2 = characteristic_residuals(eq, pair, x1, x2)
    r = np.maximum(np.abs(r1), np.abs(r2))
    k = int(np.argmax(r))
    g1x1, g1x2, g2x1, g2x2 = pair.jacobian(x1, x2)
    det = np.abs(g1x1 * g2x2 - g1x2 * g2x1)
    m = int(np.argmin(det))
    return CharacteristicReport(
        float(r[k]), (float(x1[k]), float(x2[k])), float(det[m]), (float(x1[m]), float(x2[m])), tol_char, eps_jac
    )


# --------------------------------------------------------------------------
# tracing

class GridCharacteristicPair:
    """First integrals sampled on a tensor grid and interpolated bicubically.

    Values are O(h^4) accurate, second derivatives only O(h^2).
    """

    def __init__(self, x1_nodes, x2_nodes, g1_values, g2_values, exited=None, tol_inv=TOL_INV):
        self.x1_nodes = np.asarray(x1_nodes, dtype=float)
        self.x2_nodes = np.asarray(x2_nodes, dtype=float)
        self.g1_values = np.asarray(g1_values, dtype=float)
        self.g2_values = np.asarray(g2_values, dtype=float)
        self.exited = np.zeros_like(self.g1_values, dtype=bool) if exited is None else np.asarray(exited)
        self._s1 = RectBivariateSpline(self.x1_nodes, self.x2_nodes, self.g1_values, kx=3, ky=3, s=0)
        self._s2 = RectBivariateSpline(self.x1_nodes, self.x2_nodes, self.g2_values, kx=3, ky=3, s=0)
        X1, X2 = np.meshgrid(self.x1_nodes, self.x2_nodes, indexing="ij")
        self.inverse = NewtonInverse(self, X1, X2, tol=tol_inv)

    @property
    def spacing(self) -> float:
        return float(max(np.diff(self.x1_nodes).max(), np.diff(self.x2_nodes).max()))

    def _ev(self, spline, x1, x2, dx=0, dy=0):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        shape = np.broadcast(x1, x2).shape
        out = spline.ev(np.broadcast_to(x1, shape).ravel(), np.broadcast_to(x2, shape).ravel(), dx=dx, dy=dy)
        out = out.reshape(shape)
        return float(out) if out.ndim == 0 else out

    def gamma(self, x1, x2):
        return self._ev(self._s1, x1, x2), self._ev(self._s2, x1, x2)

    def jacobian(self, x1, x2):
        return (
            self._ev(self._s1, x1, x2, 1, 0),
            self._ev(self._s1, x1, x2, 0, 1),
            self._ev(self._s2, x1, x2, 1, 0),
            self._ev(self._s2, x1, x2, 0, 1),
        )

    def hessian(self, x1, x2):
        return tuple(
            self._ev(s, x1, x2, dx, dy) for s in (self._s1, self._s2) for dx, dy in ((2, 0), (1, 1), (0, 2))
        )

    def inverse_jacobian(self, y1, y2):
        return self.inverse.jacobian(y1, y2)

    def invert(self, y1, y2):
        return self.inverse(y1, y2)

    def to_csv(self, path) -> None:
        X1, X2 = np.meshgrid(self.x1_nodes, self.x2_nodes, indexing="ij")
        write_csv(
            path,
            ("x1", "x2", "gamma1", "gamma2"),
            (X1.ravel(), X2.ravel(), self.g1_values.ravel(), self.g2_values.ravel()),
        )


def write_csv(path, header, columns) -> None:
    """Deterministic CSV: 17 significant digits, LF line endings."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([f"{float(v):.17g}" for v in row])


def _slope_fields(eq: EquationSpec):
    def slopes(x1, x2):
        a, b, c = eq.coefficients(x1, x2)
        if np.any(a == 0):
            k = int(np.flatnonzero(np.ravel(a == 0))[0])
            raise TraceError(f"tracing needs a != 0; a vanishes at x=({np.ravel(x1)[k]}, {np.ravel(x2)[k]})")
        disc = b * b - a * c
        if np.any(disc <= 0):
            k = int(np.flatnonzero(np.ravel(disc <= 0))[0])
            raise NonHyperbolicError((np.ravel(x1)[k], np.ravel(x2)[k]), np.ravel(disc)[k])
        root = np.sqrt(disc)
        return (b + root) / a, (b - root) / a

    return slopes


def trace_characteristics(
    eq: EquationSpec,
    dom: DomainSpec,
    seed_x1: float | None = None,
    n: int = 33,
    steps_per_cell: int = 1,
) -> GridCharacteristicPair:
    """Trace both characteristic families with fixed-step RK4.

    The seed line is the grid column ``x1 = seed_x1`` (default: the left
    edge). Each curve is labelled by the x2 coordinate where it crosses the
    seed line, so gamma_k at a grid node is obtained by integrating
    dx2/dx1 = slope_k from that node to the seed line. All nodes advance
    together, one RK4 step per sweep.
    """
    if dom.kind != "rectangle":
        raise ValueError("tracing is implemented on rectangular domains only")
    if n < 4:
        raise ValueError("need at least 4 grid nodes per axis")
    lo1, hi1, lo2, hi2 = dom.bounds
    x1n = np.linspace(lo1, hi1, n)
    x2n = np.linspace(lo2, hi2, n)
    seed_x1 = lo1 if seed_x1 is None else float(seed_x1)
    i_seed = int(np.argmin(np.abs(x1n - seed_x1)))
    if abs(x1n[i_seed] - seed_x1) > 1e-12 * max(1.0, abs(seed_x1)):
        raise ValueError("seed_x1 must coincide with a grid column")
    h = (hi1 - lo1) / (n - 1) / steps_per_cell

    X1, X2 = np.meshgrid(x1n, x2n, indexing="ij")
    cols = (np.arange(n) - i_seed)[:, None] * np.ones((1, n), dtype=int)
    nsteps = np.abs(cols).ravel() * steps_per_cell
    dt = (-np.sign(cols) * h).ravel().astype(float)

    slopes = _slope_fields(eq)
    labels = []
    exited = np.zeros(n * n, dtype=bool)
    for family in (0, 1):
        t = X1.ravel().copy()
        y = X2.ravel().copy()
        for k in range(int(nsteps.max(initial=0))):
            act = nsteps > k
            ta, ya, ha = t[act], y[act], dt[act]

            def rhs(tt, yy):
                return slopes(tt, yy)[family]

            try:
                k1 = rhs(ta, ya)
                k2 = rhs(ta + 0.5 * ha, ya + 0.5 * ha * k1)
                k3 = rhs(ta + 0.5 * ha, ya + 0.5 * ha * k2)
                k4 = rhs(ta + ha, ya + ha * k3)
            except (EvaluationError, NonHyperbolicError) as exc:
                raise TraceError(f"RK4 step rejected for family {family + 1}: {exc}") from exc
            y[act] = ya + ha / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t[act] = ta + ha
            exited[act] |= (y[act] < lo2) | (y[act] > hi2)
        labels.append(y.reshape(n, n))
    return GridCharacteristicPair(x1n, x2n, labels[0], labels[1], exited.reshape(n, n))

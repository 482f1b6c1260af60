"""Closed-form solvers for u_11 - a^2 u_22 = f built on the wave parallelogram.

Characteristic coordinates are y1 = x2 - a x1, y2 = x2 + a x1 with inverse
x1 = (y2 - y1)/(2a), x2 = (y1 + y2)/2. Every integral follows the printed
limits literally, including reversed (oriented) ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..characteristics import CharacteristicPair
from ..exprlang import Expr, to_source
from ..problem import EquationSpec
from ..quadrature import DEFAULT_RULE, QuadratureRule, tensor_nodes
from ._common import OutsideDomainError, ev, expr, scalar_or_array

ONE_VAR = ("t",)
XY = ("x1", "x2")


def wave_equation(speed: float, f: Expr) -> EquationSpec:
    return EquationSpec("1", "0", f"-({speed!r})^2", to_source(f))


def wave_pair(speed: float) -> CharacteristicPair:
    s = repr(float(speed))
    return CharacteristicPair(f"x2 - {s}*x1", f"x2 + {s}*x1", (f"(y2 - y1)/(2*{s})", "(y1 + y2)/2"))


@dataclass(frozen=True)
class GoursatWaveData:
    """Data on the characteristics x2 = a x1 (phi1) and x2 = -a x1 (phi2), both as functions of x1."""

    speed: float
    phi1: Expr
    phi2: Expr
    f: Expr = "0"
    compat_tol: float = 1e-12

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("wave speed must be positive")
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "phi1", expr(self.phi1, ONE_VAR))
        object.__setattr__(self, "phi2", expr(self.phi2, ONE_VAR))
        object.__setattr__(self, "f", expr(self.f, XY))
        mismatch = self.phi1.evaluate({"t": 0.0}) - self.phi2.evaluate({"t": 0.0})
        if abs(mismatch) > self.compat_tol:
            raise ValueError(f"Goursat data incompatible at the origin: phi1(0) - phi2(0) = {mismatch:.3g}")

    def equation(self) -> EquationSpec:
        return wave_equation(self.speed, self.f)

    def pair(self) -> CharacteristicPair:
        return wave_pair(self.speed)


def solve_goursat_wave(data: GoursatWaveData, x1, x2, rule: QuadratureRule = DEFAULT_RULE, tol: float = 1e-12):
    """u at points of the closed sector x1 >= 0, -a x1 <= x2 <= a x1 (vectorized)."""
    a = data.speed
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast(x1, x2).shape
    x1, x2 = np.broadcast_to(x1, shape), np.broadcast_to(x2, shape)
    outside = (x1 < -tol) | (x2 > a * x1 + tol) | (x2 < -a * x1 - tol)
    if np.any(outside):
        k = int(np.flatnonzero(np.ravel(outside))[0])
        raise OutsideDomainError(
            f"point ({np.ravel(x1)[k]}, {np.ravel(x2)[k]}) is outside the sector |x2| <= {a}*x1"
        )
    u = (
        ev(data.phi1, shape, t=(a * x1 + x2) / (2 * a))
        + ev(data.phi2, shape, t=(a * x1 - x2) / (2 * a))
        - data.phi1.evaluate({"t": 0.0})
    )
    if not data.f.is_zero():
        Z1, Z2, W = tensor_nodes(rule, 0.0, x2 - a * x1, 0.0, x2 + a * x1)
        fz = ev(data.f, Z1.shape, x1=(Z2 - Z1) / (2 * a), x2=(Z1 + Z2) / 2)
        u = u - np.sum(W * fz, axis=-1) / (4 * a * a)
    return scalar_or_array(u)


@dataclass(frozen=True)
class MixedWaveData:
    """u(0, x2) = phi(x2), u_x1(0, x2) = psi(x2), u(x1, 0) = mu(x1)."""

    speed: float
    phi: Expr
    psi: Expr
    mu: Expr
    f: Expr = "0"

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("wave speed must be positive")
        object.__setattr__(self, "speed", float(self.speed))
        for name in ("phi", "psi", "mu"):
            object.__setattr__(self, name, expr(getattr(self, name), ONE_VAR))
        object.__setattr__(self, "f", expr(self.f, XY))

    def equation(self) -> EquationSpec:
        return wave_equation(self.speed, self.f)

    def pair(self) -> CharacteristicPair:
        return wave_pair(self.speed)

    def matching_residuals(self) -> dict[str, float]:
        """Defects of the three corner conditions needed for a C^2 solution."""
        at0 = {"t": 0.0}
        a = self.speed
        mu, phi, psi = self.mu, self.phi, self.psi
        return {
            "mu(0) - phi(0)": mu.evaluate(at0) - phi.evaluate(at0),
            "mu'(0) - psi(0)": mu.diff("t").evaluate(at0) - psi.evaluate(at0),
            "mu''(0) - a^2 phi''(0) - f(0,0)": mu.diff("t").diff("t").evaluate(at0)
            - a * a * phi.diff("t").diff("t").evaluate(at0)
            - self.f.evaluate({"x1": 0.0, "x2": 0.0}),
        }

    def matching_ok(self, tol: float = 1e-10) -> bool:
        return all(abs(v) <= tol for v in self.matching_residuals().values())


def _int1d(e: Expr, lo, hi, rule):
    x, w = rule.nodes_1d(lo, hi)
    return np.sum(w * ev(e, x.shape, t=x), axis=-1)


def _triangle_source(f: Expr, T, centre, a, sign, rule):
    """int_0^T dtau int_{centre - sign*a*(T - tau)}^{centre + sign*a*(T - tau)} f(tau, xi) dxi.

    ``sign`` = +1 gives the backward light cone of d'Alembert's formula; the
    reflected branch uses lower limit centre - a(T - tau) with T = x2/a, which
    is the same shape.
    """
    tau, wt = rule.nodes_1d(0.0, T)
    c = np.asarray(centre, dtype=float)[..., None]
    half = sign * a * (np.asarray(T, dtype=float)[..., None] - tau)
    xi, wx = rule.nodes_1d(c - half, c + half)
    fz = ev(f, xi.shape, x1=np.broadcast_to(tau[..., None], xi.shape), x2=xi)
    return np.sum(wt * np.sum(wx * fz, axis=-1), axis=-1)


def _dalembert(data: MixedWaveData, x1, x2, rule):
    a = data.speed
    shape = x1.shape
    u = 0.5 * (ev(data.phi, shape, t=x2 - a * x1) + ev(data.phi, shape, t=x2 + a * x1))
    u = u + _int1d(data.psi, x2 - a * x1, x2 + a * x1, rule) / (2 * a)
    if not data.f.is_zero():
        u = u + _triangle_source(data.f, x1, x2, a, 1.0, rule) / (2 * a)
    return u


def _reflected(data: MixedWaveData, x1, x2, rule):
    a = data.speed
    shape = x1.shape
    u = ev(data.mu, shape, t=x1 - x2 / a)
    u = u + 0.5 * (ev(data.phi, shape, t=a * x1 + x2) - ev(data.phi, shape, t=a * x1 - x2))
    u = u + _int1d(data.psi, a * x1 - x2, a * x1 + x2, rule) / (2 * a)
    if not data.f.is_zero():
        # inner limits a x1 - x2 + a tau .. a x1 + x2 - a tau: centre a x1, half-width x2 - a tau
        u = u + _triangle_source(data.f, x2 / a, a * x1, a, 1.0, rule) / (2 * a)
        Z1, Z2, W = tensor_nodes(rule, a * x1 - x2, x2 - a * x1, a * x1 - x2, a * x1 + x2)
        fz = ev(data.f, Z1.shape, x1=(Z2 - Z1) / (2 * a), x2=(Z2 + Z1) / 2)
        u = u - np.sum(W * fz, axis=-1) / (4 * a * a)
    return u


def solve_mixed_wave(
    data: MixedWaveData, x1, x2, rule: QuadratureRule = DEFAULT_RULE, branch: str | None = None, tol: float = 1e-12
):
    """u on the closed quadrant x1 >= 0, x2 >= 0 (vectorized).

    Points with x2 - a x1 >= 0 use d'Alembert's formula, the others the
    reflected formula obtained from the parallelogram with one vertex on
    x2 = 0. ``branch="dalembert"`` or ``"reflected"`` forces one formula,
    which is how one-sided limits on the characteristic x2 = a x1 are taken.
    """
    a = data.speed
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast(x1, x2).shape
    x1, x2 = np.broadcast_to(x1, shape).copy(), np.broadcast_to(x2, shape).copy()
    outside = (x1 < -tol) | (x2 < -tol)
    if np.any(outside):
        k = int(np.flatnonzero(np.ravel(outside))[0])
        raise OutsideDomainError(f"point ({np.ravel(x1)[k]}, {np.ravel(x2)[k]}) is outside the quadrant")
    if branch is None:
        upper = x2 - a * x1 >= 0
    elif branch in ("dalembert", "reflected"):
        upper = np.full(shape, branch == "dalembert")
    else:
        raise ValueError("branch must be None, 'dalembert' or 'reflected'")
    u = np.empty(shape)
    if np.any(upper):
        u[upper] = _dalembert(data, x1[upper], x2[upper], rule)
    if np.any(~upper):
        u[~upper] = _reflected(data, x1[~upper], x2[~upper], rule)
    return scalar_or_array(u)

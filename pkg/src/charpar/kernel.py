"""Integrand of the parallelogram identity in characteristic coordinates.

With y = gamma(x) and u(x) = v(y), a characteristic pair reduces the
equation to

    beta * v_{y1 y2} + (A gamma1) v_{y1} + (A gamma2) v_{y2} = f

where beta = 2 (a g1_1 g2_1 + b (g2_2 g1_1 + g1_2 g2_1) + c g1_2 g2_2).
``K_tilde`` is v_{y1 y2} solved from that relation, with v_{yj} written
through p = u_x1, q = u_x2 and the inverse-map partials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .characteristics import _inverse_of_jacobian
from .problem import EquationSpec

EPS_BETA = 1e-12


class DegenerateKernelError(ValueError):
    """beta vanished: the two characteristic families are tangent."""

    def __init__(self, point, value):
        self.point = point
        self.value = value
        super().__init__(f"beta degenerates to {value:.3g} at x={point}")


@dataclass(frozen=True)
class KernelContext:
    eq: EquationSpec
    pair: object
    eps_beta: float = EPS_BETA

    def beta(self, x1, x2):
        a, b, c = self.eq.coefficients(x1, x2)
        g1x1, g1x2, g2x1, g2x2 = self.pair.jacobian(x1, x2)
        return 2.0 * (a * g1x1 * g2x1 + b * (g2x2 * g1x1 + g1x2 * g2x1) + c * g1x2 * g2x2)

    def beta_at(self, x) -> float:
        value = float(self.beta(float(x[0]), float(x[1])))
        self._check_beta(value, x1=x[0], x2=x[1])
        return value

    def A_gamma(self, which: int, x1, x2):
        """a g_11 + 2b g_12 + c g_22 for gamma_which."""
        if which not in (1, 2):
            raise ValueError("which must be 1 or 2")
        a, b, c = self.eq.coefficients(x1, x2)
        h = self.pair.hessian(x1, x2)
        g11, g12, g22 = h[:3] if which == 1 else h[3:]
        return a * g11 + 2.0 * b * g12 + c * g22

    def A_gamma_at(self, which: int, x) -> float:
        return float(self.A_gamma(which, float(x[0]), float(x[1])))

    def calibrated(self, z1: float, z2: float) -> "KernelContext":
        """Copy whose degeneracy threshold is scaled by |beta| at y = (z1, z2)."""
        x1, x2 = self.pair.inverse(z1, z2)
        scale = max(1.0, abs(float(self.beta(x1, x2))))
        return KernelContext(self.eq, self.pair, EPS_BETA * scale)

    def _check_beta(self, beta, x1, x2):
        bad = np.abs(beta) < self.eps_beta
        if np.any(bad):
            if np.ndim(bad) == 0:
                raise DegenerateKernelError((float(x1), float(x2)), float(beta))
            k = int(np.flatnonzero(np.ravel(bad))[0])
            point = (float(np.ravel(x1)[k]), float(np.ravel(x2)[k]))
            raise DegenerateKernelError(point, float(np.ravel(beta)[k]))

    def K(self, z1, z2, u, p, q, x=None):
        """f - A g1 (p dx1/dy1 + q dx2/dy1) - A g2 (p dx1/dy2 + q dx2/dy2) at y = z.

        ``x`` may pass a precomputed inverse image of z.
        """
        x1, x2 = self.pair.inverse(z1, z2) if x is None else x
        if getattr(self.pair.inverse, "mode", "analytic") == "newton":
            # Cramer on the forward Jacobian; avoids a second Newton solve
            d11, d12, d21, d22 = _inverse_of_jacobian(*self.pair.jacobian(x1, x2))
        else:
            d11, d12, d21, d22 = self.pair.inverse_jacobian(z1, z2)
        Ag1 = self.A_gamma(1, x1, x2)
        Ag2 = self.A_gamma(2, x1, x2)
        f = self.eq.rhs(x1, x2, u, p, q)
        return f - Ag1 * (p * d11 + q * d21) - Ag2 * (p * d12 + q * d22)

    def K_tilde(self, z1, z2, u, p, q, x=None):
        x1, x2 = self.pair.inverse(z1, z2) if x is None else x
        beta = self.beta(x1, x2)
        self._check_beta(beta, x1, x2)
        return self.K(z1, z2, u, p, q, x=(x1, x2)) / beta

    def K_tilde_at(self, z, u_val: float, p: float, q: float) -> float:
        return float(self.K_tilde(float(z[0]), float(z[1]), u_val, p, q))


def beta_at(ctx: KernelContext, x) -> float:
    return ctx.beta_at(x)


def A_gamma_at(ctx: KernelContext, which: int, x) -> float:
    return ctx.A_gamma_at(which, x)


def K_tilde_at(ctx: KernelContext, z, u_val: float, p: float, q: float) -> float:
    return ctx.K_tilde_at(z, u_val, p, q)

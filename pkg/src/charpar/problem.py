"""The semilinear equation a u_11 + 2b u_12 + c u_22 = f(x, u, u_1, u_2) and its domain."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .exprlang import Expr, parse

COEFF_VARS = ("x1", "x2")
RHS_VARS = ("x1", "x2", "u", "p", "q")

DomainKind = Literal["rectangle", "char-rectangle", "sector", "quadrant"]

EPS_HYP = 1e-10


class NonHyperbolicError(ValueError):
    def __init__(self, point, discriminant: float):
        self.point = tuple(float(v) for v in point)
        self.discriminant = float(discriminant)
        super().__init__(
            f"equation is not strictly hyperbolic at x={self.point}: b^2 - ac = {self.discriminant:.6g}"
        )


def _coerce(e, variables) -> Expr:
    if isinstance(e, Expr):
        extra = e.variables() - set(variables)
        if extra:
            raise ValueError(f"expression {e} uses undeclared variables {sorted(extra)}")
        return e
    return parse(str(e), variables)


@dataclass(frozen=True)
class EquationSpec:
    """Coefficients of the principal part and the right-hand side.

    ``p`` and ``q`` in ``f`` stand for du/dx1 and du/dx2.
    """

    a: Expr
    b: Expr
    c: Expr
    f: Expr

    def __post_init__(self):
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, _coerce(getattr(self, name), COEFF_VARS))
        object.__setattr__(self, "f", _coerce(self.f, RHS_VARS))

    @classmethod
    def from_strings(cls, a: str, b: str, c: str, f: str = "0") -> "EquationSpec":
        return cls(a, b, c, f)

    def coefficients(self, x1, x2):
        env = {"x1": x1, "x2": x2}
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        return tuple(np.broadcast_to(e.evaluate(env), shape) * 1.0 for e in (self.a, self.b, self.c))

    def discriminant(self, x1, x2):
        a, b, c = self.coefficients(x1, x2)
        return b * b - a * c

    def rhs(self, x1, x2, u, p, q):
        return self.f.evaluate({"x1": x1, "x2": x2, "u": u, "p": p, "q": q})

    def apply_operator(self, u: Expr) -> Expr:
        """Symbolic A u for an expression ``u`` over (x1, x2)."""
        from .exprlang import BinOp, Num, simplify

        u11 = u.diff("x1").diff("x1")
        u12 = u.diff("x1").diff("x2")
        u22 = u.diff("x2").diff("x2")
        out = BinOp(
            "+",
            BinOp("+", BinOp("*", self.a, u11), BinOp("*", BinOp("*", Num(2.0), self.b), u12)),
            BinOp("*", self.c, u22),
        )
        return simplify(out)


@dataclass(frozen=True)
class DomainSpec:
    """Where the equation is posed.

    bounds by kind:
      rectangle       (x1_lo, x1_hi, x2_lo, x2_hi)
      char-rectangle  (l1, l2, r1, r2) in characteristic coordinates
      sector          (alpha, beta, x1_lo, x1_hi): alpha*x1 <= x2 <= beta*x1
      quadrant        (x1_lo, x1_hi, x2_lo, x2_hi) sampling window with lows >= 0

    Membership is closed.
    """

    kind: DomainKind
    bounds: tuple[float, float, float, float]
    tol: float = field(default=1e-12, compare=False)

    def __post_init__(self):
        if self.kind not in ("rectangle", "char-rectangle", "sector", "quadrant"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        bounds = tuple(float(v) for v in self.bounds)
        if len(bounds) != 4:
            raise ValueError("a domain needs exactly four bounds")
        object.__setattr__(self, "bounds", bounds)
        lo1, hi1, lo2, hi2 = bounds
        if self.kind == "sector":
            alpha, beta, lo, hi = bounds
            if not alpha < beta:
                raise ValueError("sector slopes must satisfy alpha < beta")
            if not 0 <= lo < hi:
                raise ValueError("sector x1 window must satisfy 0 <= x1_lo < x1_hi")
        else:
            if not (lo1 < hi1 and lo2 < hi2):
                raise ValueError(f"{self.kind} bounds must be ordered (lower < upper per axis)")
            if self.kind == "quadrant" and (lo1 < 0 or lo2 < 0):
                raise ValueError("quadrant sampling window must lie in x1 >= 0, x2 >= 0")

    @classmethod
    def rectangle(cls, x1_lo, x1_hi, x2_lo, x2_hi) -> "DomainSpec":
        return cls("rectangle", (x1_lo, x1_hi, x2_lo, x2_hi))

    @classmethod
    def sector(cls, alpha, beta, x1_hi, x1_lo=0.0) -> "DomainSpec":
        return cls("sector", (alpha, beta, x1_lo, x1_hi))

    def contains(self, x1, x2, pair=None):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        t = self.tol
        if self.kind in ("rectangle", "quadrant"):
            lo1, hi1, lo2, hi2 = self.bounds
            if self.kind == "quadrant":
                return (x1 >= -t) & (x2 >= -t)
            return (x1 >= lo1 - t) & (x1 <= hi1 + t) & (x2 >= lo2 - t) & (x2 <= hi2 + t)
        if self.kind == "sector":
            alpha, beta = self.bounds[:2]
            return (x1 >= -t) & (x2 >= alpha * x1 - t) & (x2 <= beta * x1 + t)
        if pair is None:
            raise ValueError("membership in a characteristic rectangle needs the characteristic pair")
        y1, y2 = pair.gamma(x1, x2)
        l1, l2, r1, r2 = self.bounds
        return (y1 >= l1 - t) & (y1 <= l2 + t) & (y2 >= r1 - t) & (y2 <= r2 + t)

    def sample(self, n: int, pair=None) -> tuple[np.ndarray, np.ndarray]:
        """An n x n tensor sample (flattened) that includes the corners."""
        if n < 1:
            raise ValueError("n_samples must be at least 1")
        # corners are always included, n == 1 adds the centre
        s = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.0, 0.5, 1.0])
        lo1, hi1, lo2, hi2 = self.bounds
        if self.kind == "sector":
            alpha, beta, x1_lo, x1_hi = self.bounds
            X1 = x1_lo + (x1_hi - x1_lo) * s[:, None] * np.ones_like(s)[None, :]
            X2 = X1 * (alpha + (beta - alpha) * s[None, :])
            return X1.ravel(), X2.ravel()
        A = lo1 + (hi1 - lo1) * s
        B = lo2 + (hi2 - lo2) * s
        P, Q = np.meshgrid(A, B, indexing="ij")
        if self.kind == "char-rectangle":
            if pair is None:
                raise ValueError("sampling a characteristic rectangle needs the characteristic pair")
            return tuple(np.ravel(v) for v in pair.inverse(P.ravel(), Q.ravel()))
        return P.ravel(), Q.ravel()


@dataclass
class HyperbolicityReport:
    min_discriminant: float
    witness_point: tuple[float, float]
    threshold: float

    @property
    def passed(self) -> bool:
        return self.min_discriminant >= self.threshold

    def as_dict(self) -> dict:
        return {
            "check": "hyperbolicity",
            "passed": self.passed,
            "min_discriminant": self.min_discriminant,
            "witness_point": list(self.witness_point),
            "threshold": self.threshold,
        }


def check_hyperbolicity(
    eq: EquationSpec, dom: DomainSpec, n_samples: int = 21, eps_hyp: float = EPS_HYP, pair=None
) -> HyperbolicityReport:
    """Minimum of b^2 - ac over a tensor sample of the domain."""
    x1, x2 = dom.sample(n_samples, pair)
    disc = eq.discriminant(x1, x2)
    k = int(np.argmin(disc))
    return HyperbolicityReport(float(disc[k]), (float(x1[k]), float(x2[k])), eps_hyp)


@dataclass(frozen=True)
class CharacteristicDirections:
    """Slopes of the two characteristic families at a point.

    ``kind`` is ``"dx2/dx1"`` (a != 0), ``"dx1/dx2"`` (a == 0, c != 0) or
    ``"axes"`` (a == c == 0: family 1 is dx1 = 0, family 2 is dx2 = 0).
    Otherwise family 1 is the ``+`` root.
    """

    kind: str
    slope1: float
    slope2: float


def factor_characteristic_ode(eq: EquationSpec, x, eps_hyp: float = EPS_HYP) -> CharacteristicDirections:
    a, b, c = (float(v) for v in eq.coefficients(float(x[0]), float(x[1])))
    disc = b * b - a * c
    if not disc >= eps_hyp:
        raise NonHyperbolicError(x, disc)
    root = np.sqrt(disc)
    if a != 0.0:
        return CharacteristicDirections("dx2/dx1", (b + root) / a, (b - root) / a)
    if c != 0.0:
        return CharacteristicDirections("dx1/dx2", (b + root) / c, (b - root) / c)
    # a = c = 0: dx1 dx2 = 0, families x1 = const and x2 = const
    return CharacteristicDirections("axes", 0.0, 0.0)

from __future__ import annotations

import numpy as np

from ..exprlang import Expr, parse


class ConvergenceError(RuntimeError):
    """A fixed-point iteration stopped without meeting its tolerance.

    ``history`` holds the sup-norm of successive differences; ``result`` is
    the last iterate packaged like a successful return, when available.
    """

    def __init__(self, message, history, result=None):
        self.history = list(history)
        self.result = result
        super().__init__(message)


class OutsideDomainError(ValueError):
    pass


def expr(e, variables) -> Expr:
    if isinstance(e, Expr):
        extra = e.variables() - set(variables)
        if extra:
            raise ValueError(f"expression {e} uses undeclared variables {sorted(extra)}")
        return e
    return parse(str(e), variables)


def ev(e: Expr, shape=None, **env):
    """Evaluate and broadcast to the common shape of the bound arrays."""
    if shape is None:
        shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape if env else ()
    return np.broadcast_to(e.evaluate(env), shape) * 1.0


def scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x

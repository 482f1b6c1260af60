"""Built-in equations with known characteristics and manufactured solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .characteristics import CharacteristicPair
from .parallelogram import SolutionField
from .problem import DomainSpec, EquationSpec


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    description: str
    equation: EquationSpec
    make_pair: Callable[[], CharacteristicPair]
    domain: DomainSpec
    solution: str
    # rectangle in characteristic coordinates whose image lies in ``domain``
    char_window: tuple[float, float, float, float]
    gamma_strings: tuple[str, str]
    inverse_strings: tuple[str, str]

    def pair(self) -> CharacteristicPair:
        return self.make_pair()

    def field(self) -> SolutionField:
        return SolutionField.from_exprs(self.solution)


def _entry(name, description, a, b, c, f, gammas, inverse, domain, solution, window):
    eq = EquationSpec.from_strings(a, b, c, f)
    return CatalogEntry(
        name,
        description,
        eq,
        lambda: CharacteristicPair(gammas[0], gammas[1], inverse, domain),
        domain,
        solution,
        window,
        gammas,
        inverse,
    )


def wave(speed: float = 1.0) -> CatalogEntry:
    s = repr(float(speed))
    return _entry(
        "wave",
        "u_11 - a^2 u_22 = 0 with a travelling-wave solution",
        "1", "0", f"-({s})^2", "0",
        (f"x2 - {s}*x1", f"x2 + {s}*x1"),
        (f"(y2 - y1)/(2*{s})", "(y1 + y2)/2"),
        DomainSpec.rectangle(-2.0 / speed, 2.0 / speed, -2.0, 2.0),
        f"sin(x2 - {s}*x1) + cos(x2 + {s}*x1)",
        (-1.0, 1.0, -1.0, 1.0),
    )


def wave_forced() -> CatalogEntry:
    return _entry(
        "wave-forced",
        "u_11 - u_22 = 1 with u = x1^2/2",
        "1", "0", "-1", "1",
        ("x2 - x1", "x2 + x1"),
        ("(y2 - y1)/2", "(y1 + y2)/2"),
        DomainSpec.rectangle(-2.0, 2.0, -2.0, 2.0),
        "x1^2/2",
        (-1.0, 1.0, -1.0, 1.0),
    )


def mixed_derivative() -> CatalogEntry:
    return _entry(
        "mixed-derivative",
        "u_12 = u with u = exp(x1 + x2); identity characteristics",
        "0", "1/2", "0", "u",
        ("x1", "x2"),
        ("y1", "y2"),
        DomainSpec.rectangle(-1.0, 1.0, -1.0, 1.0),
        "exp(x1 + x2)",
        (-1.0, 1.0, -1.0, 1.0),
    )


def variable_speed() -> CatalogEntry:
    return _entry(
        "variable-speed",
        "u_11 - x1^2 u_22 = (1 + x1^2) u with u = exp(x1) sin(x2)",
        "1", "0", "-x1^2", "(1 + x1^2)*u",
        ("x2 - x1^2/2", "x2 + x1^2/2"),
        ("sqrt(y2 - y1)", "(y1 + y2)/2"),
        DomainSpec.rectangle(0.5, 2.0, 0.0, 2.0),
        "exp(x1)*sin(x2)",
        (0.0, 0.5, 1.0, 2.0),
    )


def exponential_speed() -> CatalogEntry:
    return _entry(
        "exp-speed",
        "u_11 - x2^2 u_22 = 0 with curved characteristics x2 exp(-+x1); u = x1 x2",
        "1", "0", "-x2^2", "0",
        ("x2*exp(-x1)", "x2*exp(x1)"),
        ("log(y2/y1)/2", "sqrt(y1*y2)"),
        DomainSpec.rectangle(0.0, 1.0, 0.5, 1.5),
        "x1*x2",
        (0.4, 0.8, 1.0, 1.6),
    )


def triples() -> list[CatalogEntry]:
    """The three identity test cases: wave, mixed-derivative, variable speed."""
    return [wave(1.0), mixed_derivative(), variable_speed()]


def all_entries() -> list[CatalogEntry]:
    return [wave(1.0), wave_forced(), mixed_derivative(), variable_speed(), exponential_speed()]

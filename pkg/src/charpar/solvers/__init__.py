"""Solvers built on the characteristic parallelogram."""

from ._common import ConvergenceError, OutsideDomainError
from .darboux import (
    CascadeStep,
    DarbouxData,
    DarbouxSolution,
    darboux_cascade,
    solve_darboux,
)
from .picard import LinearGoursatData, PicardResult, solve_goursat_linear_picard
from .wave import (
    GoursatWaveData,
    MixedWaveData,
    solve_goursat_wave,
    solve_mixed_wave,
    wave_equation,
    wave_pair,
)

__all__ = [
    "CascadeStep",
    "ConvergenceError",
    "DarbouxData",
    "DarbouxSolution",
    "GoursatWaveData",
    "LinearGoursatData",
    "MixedWaveData",
    "OutsideDomainError",
    "PicardResult",
    "darboux_cascade",
    "solve_darboux",
    "solve_goursat_linear_picard",
    "solve_goursat_wave",
    "solve_mixed_wave",
    "wave_equation",
    "wave_pair",
]

"""Quantum Otto cycle of a two-level system at arbitrary reservoir coupling.

Strong coupling is handled with the reaction-coordinate mapping: each reservoir
contributes one collective oscillator mode that is treated exactly together
with the two-level system, while the residual environment only sets the
temperature and the energy reference.
"""

from .model import ReservoirSpec, TlsParams, rc_mapping, splitting
from .otto import (
    CouplingModel,
    CycleConfig,
    CycleResult,
    DecouplingMode,
    Mode,
    StrokeMode,
    evaluate,
)

__version__ = "0.1.0"

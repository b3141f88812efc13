"""Flip-chip resonator design: CPW models, etch optimisation, Purcell limits
and chip-level frequency analysis."""

from .analysis import DesignReport, ResonanceFit, S11Trace, compare_designs, fit_s11
from .chipmodel import ChipLayout, ChipScenario, FrequencyTable, spacing_map, synthetic_scan
from .cpw import (
    CpwCrossSection,
    EtchPosition,
    Facing,
    FrequencyModel,
    ResonatorDesign,
    line_params,
    resonator_frequency,
    sensitivity,
    shift_curve,
)
from .design import allocate, calibrate_length, optimal_gamma
from .errors import (
    ConvergenceError,
    DomainError,
    FlipChipError,
    InputFormatError,
    MissingBaselineError,
    NoResonanceError,
    NoSignChangeError,
    RankDeficiencyError,
)
from .purcell import QrfParams, QrParams, qr_t1, qrf_t1, solve_g_qr, solve_g_rf, sweep

__version__ = "0.1.0"

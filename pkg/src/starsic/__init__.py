"""Star-QAM transmitter and SIC receiver for fiber phase-noise channels."""

from .air import (
    AirResult,
    awgn_air_gaussian,
    awgn_air_starqam,
    memoryless_baseline_air,
    sic_air,
    stage_air,
)
from .constellation import (
    Constellation,
    SymbolSequence,
    build_star_qam,
    sample_sequence,
    source_entropy,
)
from .cpan import CpanParams, fit_params, simulate, steady_state_variance
from .sic import (
    PhaseBelief,
    PosteriorTable,
    SicSchedule,
    amplitude_posterior,
    phase_smoother,
    phase_stage1_posterior,
    phase_stagek_posterior,
    run_sic,
    wrap,
)

__all__ = [
    "AirResult",
    "Constellation",
    "CpanParams",
    "PhaseBelief",
    "PosteriorTable",
    "SicSchedule",
    "SymbolSequence",
    "amplitude_posterior",
    "awgn_air_gaussian",
    "awgn_air_starqam",
    "build_star_qam",
    "fit_params",
    "memoryless_baseline_air",
    "phase_smoother",
    "phase_stage1_posterior",
    "phase_stagek_posterior",
    "run_sic",
    "sample_sequence",
    "sic_air",
    "simulate",
    "source_entropy",
    "stage_air",
    "steady_state_variance",
    "wrap",
]

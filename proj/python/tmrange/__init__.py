"""PN ranging jitter and telemetry BER simulator."""

from ._tmrange import (
    Error,
    ber_theory,
    code_chips,
    code_period,
    config,
    constellation_points,
    jitter_bound,
    n0_from_pn0bl,
    occupied_bandwidth,
    ranging_power,
    run_experiment,
    sigma2_p,
)

__all__ = [
    "Error",
    "ber_theory",
    "code_chips",
    "code_period",
    "config",
    "constellation_points",
    "jitter_bound",
    "n0_from_pn0bl",
    "occupied_bandwidth",
    "ranging_power",
    "run_experiment",
    "sigma2_p",
]

"""Bacteria-phage delayed SDE model: simulation, equilibria and concentration estimates."""

from ._core import (
    DomainError,
    EstimationError,
    HypothesisError,
    InputError,
    IntegrationError,
    ModelParams,
    check_hypothesis1,
    decay_rate_eta,
    drift,
    equilibria,
    estimate_concentration,
    interval_from_kappas,
    render_svg,
    sigma,
    simulate,
    simulate_deterministic,
    wilson_ci,
)

__all__ = [
    "DomainError",
    "EstimationError",
    "HypothesisError",
    "InputError",
    "IntegrationError",
    "ModelParams",
    "check_hypothesis1",
    "decay_rate_eta",
    "drift",
    "equilibria",
    "estimate_concentration",
    "interval_from_kappas",
    "render_svg",
    "sigma",
    "simulate",
    "simulate_deterministic",
    "wilson_ci",
]

"""Matched employer-employee panel tools: simulation, two-way fixed effects,
growth decompositions, weighting and comorbidity scoring."""

from ._wagepanel import (
    AkmFit,
    Panel,
    SimConfig,
    __version__,
    cci_at_cutoff,
    decompose_growth,
    fit_akm,
    holm_adjust,
    largest_connected_set,
    lifetime_income,
    load_panel,
    run_cli,
    simulate,
)

__all__ = [
    "AkmFit",
    "Panel",
    "SimConfig",
    "__version__",
    "cci_at_cutoff",
    "decompose_growth",
    "fit_akm",
    "holm_adjust",
    "largest_connected_set",
    "lifetime_income",
    "load_panel",
    "run_cli",
    "simulate",
]

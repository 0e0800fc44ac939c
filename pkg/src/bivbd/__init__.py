"""Transition probabilities of birth(death)/birth-death processes.

Continued-fraction Laplace transforms inverted numerically, independent
oracles to check them, and Bayesian inference for the stochastic SIR model.
"""
from .branching import branching_matrix, branching_trans_prob, pgf_phi1, pgf_phi2
from .contfrac import CfResult, CfTerms, denominators, lentz_eval, phi
from .inference import (
    ObservationSeries,
    log_likelihood,
    log_posterior,
    rwm_sample,
    summarize,
)
from .inversion import AcceleratorState, LaplaceGrid, invert, levin_accelerate, make_grid
from .models import (
    BBDRates,
    DBDRates,
    SirParams,
    bds_rates,
    monomolecular_rates,
    ode_trajectory,
    parasite_rates,
    regularity_diagnostic,
    sir_rates,
)
from .oracles import SimConfig, matexp_prob, mc_transition_matrix, monomolecular_analytic
from .solver import ProbRequest, TransitionMatrix, auto_truncate, bbd_prob, dbd_prob

__version__ = "0.1.0"

__all__ = [
    "AcceleratorState", "BBDRates", "CfResult", "CfTerms", "DBDRates", "LaplaceGrid",
    "ObservationSeries", "ProbRequest", "SimConfig", "SirParams", "TransitionMatrix",
    "auto_truncate", "bbd_prob", "bds_rates", "branching_matrix", "branching_trans_prob",
    "dbd_prob", "denominators", "invert", "lentz_eval", "levin_accelerate", "log_likelihood",
    "log_posterior", "make_grid", "matexp_prob", "mc_transition_matrix",
    "monomolecular_analytic", "monomolecular_rates", "ode_trajectory", "parasite_rates",
    "pgf_phi1", "pgf_phi2", "phi", "regularity_diagnostic", "rwm_sample", "sir_rates",
    "summarize",
]

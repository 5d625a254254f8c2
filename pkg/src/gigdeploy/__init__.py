"""Pricing, staffing and deployment of an on-demand service platform.

A service provider can run a standard service staffed by salaried employees,
an on-demand service staffed by self-scheduling contractors, or both. The
package solves the closed-form base model, the numerical extensions, and
ships brute-force and simulation oracles to check them.
"""
from .errors import (DomainError, GigDeployError, GridTooCoarse, InvalidInput, NoConvergence,
                     PatternViolation, TheoremViolation, UnstableQueue)
from .extensions import ExtensionConfig, regime_map_general, solve_deployment_general
from .hybrid import (DeploymentSolution, HybridSolution, RegimeMap, classify_regime_map,
                     solve_deployment, solve_hybrid)
from .model_core import (UNIFORM, ChannelState, Heterogeneity, MarketParams, Regime, beta,
                         contractor_equilibrium, demand_split, lead_time_mm1, lead_time_mmk)
from .single_service import solve_system_o, solve_system_s
from .welfare import WelfareReport, welfare_of

__version__ = "0.1.0"

__all__ = [
    "DomainError", "GigDeployError", "GridTooCoarse", "InvalidInput", "NoConvergence",
    "PatternViolation", "TheoremViolation", "UnstableQueue",
    "ExtensionConfig", "regime_map_general", "solve_deployment_general",
    "DeploymentSolution", "HybridSolution", "RegimeMap", "classify_regime_map",
    "solve_deployment", "solve_hybrid",
    "UNIFORM", "ChannelState", "Heterogeneity", "MarketParams", "Regime", "beta",
    "contractor_equilibrium", "demand_split", "lead_time_mm1", "lead_time_mmk",
    "solve_system_o", "solve_system_s", "WelfareReport", "welfare_of",
]

"""Multiscale traffic flow simulation toolkit.

Models: a follow-the-leader ODE model (micro), its stochastic particle
counterpart (particle), first- and second-order macroscopic PDE models with
space-dependent road capacity (macro1/macro2), Riemann eigenstructure
analysis, and uncertainty quantification of random accident sizes via Monte
Carlo and stochastic-Galerkin polynomial chaos.
"""

from .core import (
    AccidentCapacity,
    ConfigError,
    ConstantCapacity,
    Grid1D,
    MacroField,
    ModelParams,
    NumericalError,
    PiecewiseRampCapacity,
    capacity_eval,
    headway_H,
    micro_speed_Vtilde,
    micro_speed_equilibrium,
    pressure,
    speed_V,
)
from .scenario import (
    PiecewiseProfile,
    Scenario,
    UQConfig,
    accident_scenario,
    load_scenario,
    paper_comparison_scenario,
    scenario_from_dict,
)

__all__ = [
    "AccidentCapacity",
    "ConfigError",
    "ConstantCapacity",
    "Grid1D",
    "MacroField",
    "ModelParams",
    "NumericalError",
    "PiecewiseProfile",
    "PiecewiseRampCapacity",
    "Scenario",
    "UQConfig",
    "accident_scenario",
    "capacity_eval",
    "headway_H",
    "load_scenario",
    "micro_speed_Vtilde",
    "micro_speed_equilibrium",
    "paper_comparison_scenario",
    "pressure",
    "scenario_from_dict",
    "speed_V",
]

__version__ = "0.1.0"

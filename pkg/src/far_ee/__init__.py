"""Energy-efficiency optimization for fluid-antenna relays embedded in
lossy blockages: propagation physics, Rician channels, SCA/Dinkelbach
optimizers, comparison schemes, and a seeded experiment harness."""

from .geometry import ScenarioConfig, Placement, config_from_dict, load_config
from .propagation import MediumParams, propagation_constants, through_matrix
from .channel import ChannelRealization, build_channel
from .metrics import ControlState, LinkReport, check_solution, energy_efficiency
from .optimizer import initialize, optimize_ee
from .baselines import evaluate_afr, evaluate_sris

__all__ = [
    "ScenarioConfig", "Placement", "config_from_dict", "load_config",
    "MediumParams", "propagation_constants", "through_matrix",
    "ChannelRealization", "build_channel",
    "ControlState", "LinkReport", "check_solution", "energy_efficiency",
    "initialize", "optimize_ee", "evaluate_sris", "evaluate_afr",
]

__version__ = "0.1.0"

"""Max-min SINR beamforming for two-way AF relays shared by primary and
secondary transceivers, with perfect or norm-bounded interferer CSI."""
from .model import (ChannelSet, DerivedQuantities, NetworkConfig, Radii, UncertaintyModel,
                    derive, generate_channels, make_uncertainty)
from .metrics import BeamformingSolution, empirical_sinr, objective, rate, relay_powers, sinrs
from .feasibility import gamma_upper_bound, ratio_target_feasible
from .robust import RobustConstants, robust_constants
from .optimizer import BisectionConfig, RobustMode, optimize, post_verify

__all__ = [
    "ChannelSet", "DerivedQuantities", "NetworkConfig", "Radii", "UncertaintyModel",
    "derive", "generate_channels", "make_uncertainty",
    "BeamformingSolution", "empirical_sinr", "objective", "rate", "relay_powers", "sinrs",
    "gamma_upper_bound", "ratio_target_feasible", "RobustConstants", "robust_constants",
    "BisectionConfig", "RobustMode", "optimize", "post_verify",
]
__version__ = "0.1.0"

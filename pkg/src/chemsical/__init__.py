"""Clocked chemical reaction network receiver for successive interference cancellation."""

__version__ = "0.1.0"

from .blocks import ChemSicalConfig, GateConfig, ResetConfig, build, default_rates
from .channel import ChannelConfig, amplitudes, default_channel, input_pmf, sample_observation
from .crn import CrnModel, HillGate, RateLaw, Reaction, Species
from .estimators import ReceiverEstimator
from .evaluation import EvalReport, chem_decide, estimate_pd, evaluate, label_correct, ode_errors, weighted_pe
from .sic import ThresholdTree, ground_truth_labels, reference_tree, sic_detect
from .sim import child_seed, run_batch, simulate_ode, simulate_ssa

__all__ = [
    "ChannelConfig", "ChemSicalConfig", "CrnModel", "EvalReport", "GateConfig", "HillGate", "RateLaw", "Reaction",
    "ReceiverEstimator", "ResetConfig", "Species", "ThresholdTree", "amplitudes", "build", "chem_decide", "child_seed", "default_channel",
    "default_rates", "estimate_pd", "evaluate", "ground_truth_labels", "input_pmf", "label_correct", "ode_errors",
    "reference_tree", "run_batch", "sample_observation", "sic_detect", "simulate_ode", "simulate_ssa", "weighted_pe",
]

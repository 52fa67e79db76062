"""Distributed H-infinity leader-following tracking for discrete-time multi-agent networks.

The package builds the scaled topology matrix from an adjacency matrix,
checks a protocol gain against H-infinity tracking conditions, synthesizes
gains from a pair of LMIs, and simulates the closed-loop network.
"""
from .analysis import (HinfResult, UnstableSystemError, VerificationReport, hinf_norm, is_schur,
                       pbh_detectable, verify_definition1, verify_theorem1)
from .config import ConfigError, ProjectConfig, load_config
from .kernel import TOL, DimensionError, IllConditionedError, Tolerances
from .plant import (AugmentedSystem, FollowerModel, LeaderModel, ProtocolGain, SensingModel,
                    StateSpace, build_augmented, coupled_error_system, decoupled_systems,
                    protocol_step, relative_information)
from .simulation import (DisturbanceSpec, SimConfig, Trajectories, energy_curves, simulate,
                         tracking_error)
from .synthesis import (LmiVariables, SolverOptions, SynthesisCertificate, SynthesisInfeasible,
                        bisect_gamma, certify, compute_gain, solve_feasibility)
from .topology import (Adjacency, build_stochastic, follower_spectrum, has_leader_spanning_tree,
                       validate)

__version__ = "0.1.0"

__all__ = [
    "Adjacency", "AugmentedSystem", "ConfigError", "DimensionError", "DisturbanceSpec",
    "FollowerModel", "HinfResult", "IllConditionedError", "LeaderModel", "LmiVariables",
    "ProjectConfig", "ProtocolGain", "SensingModel", "SimConfig", "SolverOptions", "StateSpace",
    "SynthesisCertificate", "SynthesisInfeasible", "TOL", "Tolerances", "Trajectories",
    "UnstableSystemError", "VerificationReport", "bisect_gamma", "build_augmented",
    "build_stochastic", "certify", "compute_gain", "coupled_error_system", "decoupled_systems",
    "energy_curves", "follower_spectrum", "has_leader_spanning_tree", "hinf_norm", "is_schur",
    "load_config", "pbh_detectable", "protocol_step", "relative_information", "simulate",
    "solve_feasibility", "tracking_error", "validate", "verify_definition1", "verify_theorem1",
]

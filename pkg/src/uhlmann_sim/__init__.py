"""Simulation of Uhlmann-transformation algorithms.

Dense-matrix simulation at desk scale: exact Uhlmann isometries, their
query- and sample-access approximations, and the downstream fidelity
estimation, Petz recovery and decoupling demonstrations.
"""

from .applications import (
    EstimateRecord,
    PhaseEstimationPlan,
    decoupling_demo,
    fidelity_estimate,
    petz_recovery,
    petz_sweep,
    sqrt_amplitude_estimate,
    stinespring_via_uhlmann,
)
from .dme import DmePlan, dme_exponentiate, dmesub, prepare_upsilon
from .estimator import UhlmannTransformer
from .experiments import ExperimentConfig, RunRecord, report, run_experiment
from .ledger import ResourceLedger
from .metrics import diamond_distance, fidelity, fidelity_pair, spectrum_stats, trace_distance
from .polynomials import sign_degree, synthesize_sign_polynomial, synthesize_sqrt_polynomial
from .states import DensityMatrix, PureState, QuantumChannel, StatePrepOracle
from .uhlmann import (
    AccuracyMode,
    UhlmannResult,
    canonical_purification_alg,
    exact_uhlmann_isometry,
    uhlmann_mixed_sample,
    uhlmann_purified_query,
    uhlmann_purified_sample,
    variant_uhlmann_mixed,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyMode",
    "DensityMatrix",
    "DmePlan",
    "EstimateRecord",
    "ExperimentConfig",
    "PhaseEstimationPlan",
    "PureState",
    "QuantumChannel",
    "ResourceLedger",
    "RunRecord",
    "StatePrepOracle",
    "UhlmannResult",
    "UhlmannTransformer",
    "canonical_purification_alg",
    "decoupling_demo",
    "diamond_distance",
    "dme_exponentiate",
    "dmesub",
    "exact_uhlmann_isometry",
    "fidelity",
    "fidelity_estimate",
    "fidelity_pair",
    "petz_recovery",
    "petz_sweep",
    "prepare_upsilon",
    "report",
    "run_experiment",
    "sign_degree",
    "spectrum_stats",
    "sqrt_amplitude_estimate",
    "stinespring_via_uhlmann",
    "synthesize_sign_polynomial",
    "synthesize_sqrt_polynomial",
    "trace_distance",
    "uhlmann_mixed_sample",
    "uhlmann_purified_query",
    "uhlmann_purified_sample",
    "variant_uhlmann_mixed",
]

"""Benchmarking embeddings of fully connected Ising problems under simulated
quantum annealing."""

from .analysis import TtsCurve, loglog_fit, optimal_tts, repetitions, tts
from .decode import bp_decode, decode, majority_vote, verify_constraints
from .embed import EmbeddingMap, embed, embed_config, physical_gs_energy, validate_embedding
from .model import (
    InvalidInputError,
    LogicalProblem,
    PhysicalProblem,
    energy,
    generate_gaussian_sk,
    generate_maxcut,
)
from .oracle import brute_force_gs, ed_spectrum, min_gap
from .sqa import SqaParams, run_sqa

__version__ = "0.1.0"

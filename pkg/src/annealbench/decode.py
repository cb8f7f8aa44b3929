"""Recover logical configurations from physical readouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .embed import EmbeddingMap
from .model import InvalidInputError, PhysicalProblem, as_config


@dataclass(frozen=True)
class BpParams:
    max_iters: int = 50
    damping: float = 0.5
    prior_confidence: float = 0.05

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not 0 <= self.damping < 1:
            raise InvalidInputError("damping must lie in [0, 1)")
        if not 0 < self.prior_confidence < 0.5:
            raise InvalidInputError("prior_confidence must lie in (0, 0.5)")


@dataclass
class ConstraintReport:
    broken_chains: list = field(default_factory=list)
    violated_plaquettes: list = field(default_factory=list)

    @property
    def num_violations(self) -> int:
        return len(self.broken_chains) + len(self.violated_plaquettes)

    @property
    def ok(self) -> bool:
        return self.num_violations == 0


def majority_vote(physical, emb: EmbeddingMap) -> np.ndarray:
    """Sign of each chain's spin sum, ties to +1."""
    if emb.scheme not in ("square", "chimera", "direct"):
        raise InvalidInputError(f"majority vote does not apply to scheme {emb.scheme!r}")
    alpha = as_config(physical, emb.num_spins)
    sums = np.array([int(alpha[list(chain)].sum()) for chain in emb.chains])
    return np.where(sums >= 0, 1, -1).astype(np.int8)


@lru_cache(maxsize=64)
def _triangle_checks(n: int) -> np.ndarray:
    index = {}
    for i in range(n):
        for j in range(i + 1, n):
            index[(i, j)] = len(index)
    rows = [
        (index[(i, j)], index[(i, k)], index[(j, k)])
        for i in range(n)
        for j in range(i + 1, n)
        for k in range(j + 1, n)
    ]
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def first_row_decode(alpha: np.ndarray, emb: EmbeddingMap) -> np.ndarray:
    """``sigma_0 = +1`` and ``sigma_j = alpha_{0j}``."""
    sigma = np.ones(emb.n, dtype=np.int8)
    for j in range(1, emb.n):
        sigma[j] = alpha[emb.pair_index[(0, j)]]
    return sigma


def bp_decode(physical, emb: EmbeddingMap, params: BpParams = BpParams()) -> np.ndarray:
    """Damped sum-product over all three-spin loop checks of the parity code.

    Messages are log-likelihood ratios with positive values favouring +1.
    """
    if emb.scheme != "paqo":
        raise InvalidInputError("belief propagation decodes parity embeddings only")
    alpha = as_config(physical, emb.num_spins)
    checks = _triangle_checks(emb.n)
    # pair_index from embed_paqo is lexicographic, matching _triangle_checks
    prior = math.log((1 - params.prior_confidence) / params.prior_confidence) * alpha.astype(np.float64)
    if checks.size == 0:
        return first_row_decode(alpha, emb)
    c2v = np.zeros(checks.shape, dtype=np.float64)
    v2c = prior[checks]
    decision = alpha.copy()
    limit = 1.0 - 1e-15
    for _ in range(params.max_iters):
        t = np.tanh(v2c / 2.0)
        others = np.stack([t[:, 1] * t[:, 2], t[:, 0] * t[:, 2], t[:, 0] * t[:, 1]], axis=1)
        fresh = 2.0 * np.arctanh(np.clip(others, -limit, limit))
        c2v = params.damping * c2v + (1.0 - params.damping) * fresh
        total = prior.copy()
        np.add.at(total, checks.ravel(), c2v.ravel())
        v2c = total[checks] - c2v
        decision = np.where(total > 0, 1, np.where(total < 0, -1, alpha)).astype(np.int8)
        # stop once every loop check holds for the hard decisions
        if np.all(np.prod(decision[checks], axis=1) == 1):
            break
    return first_row_decode(decision, emb)


def decode(physical, emb: EmbeddingMap, bp_params: Optional[BpParams] = None) -> np.ndarray:
    """Scheme-appropriate decoder: identity, majority vote, or belief propagation."""
    if emb.scheme == "direct":
        return as_config(physical, emb.n).copy()
    if emb.scheme == "paqo":
        return bp_decode(physical, emb, bp_params or BpParams())
    return majority_vote(physical, emb)


def trivial_decode(physical, emb: EmbeddingMap) -> np.ndarray:
    """Decoder that trusts the readout as is (no error correction)."""
    alpha = as_config(physical, emb.num_spins)
    if emb.scheme == "paqo":
        return first_row_decode(alpha, emb)
    return np.array([alpha[chain[0]] for chain in emb.chains], dtype=np.int8)


def verify_constraints(physical, emb: EmbeddingMap, physical_problem: Optional[PhysicalProblem] = None) -> ConstraintReport:
    alpha = as_config(physical, emb.num_spins)
    report = ConstraintReport()
    if emb.scheme == "paqo":
        for l, key in enumerate(emb.plaquette_terms):
            if int(np.prod(alpha[list(key)])) != 1:
                report.violated_plaquettes.append(l)
    else:
        for i, chain in enumerate(emb.chains):
            values = alpha[list(chain)]
            if np.any(values != values[0]):
                report.broken_chains.append(i)
    return report

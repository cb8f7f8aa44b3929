"""Path-integral simulated quantum annealing.

The transverse-field model is Trotterized into ``M`` classical replicas with
periodic imaginary-time boundary. The sampled action is

    S = (beta / M) * sum_k E(s^k) - J_perp * sum_{k,i} s_i^k s_i^{k+1},
    J_perp = 0.5 * ln coth(beta * Gamma / M),

and Gamma follows ``Gamma_f + (Gamma_0 - Gamma_f) * (1 - u)^2`` over the
sweeps (steepest at the start). Each sweep makes one single-spin Metropolis
attempt per (spin, slice), spin-major, then slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .model import InvalidInputError, Problem, compile_problem, energy_tolerance


@dataclass(frozen=True)
class SqaParams:
    trotter_slices: int = 1024
    beta: float = 1024.0
    gamma_start: float = 0.5
    gamma_end: float = 0.001
    anneal_sweeps: int = 1000
    seed: int = 0
    schedule: str = "quadratic"

    def __post_init__(self):
        if self.trotter_slices < 2:
            raise InvalidInputError("need at least two Trotter slices")
        if self.beta <= 0:
            raise InvalidInputError("beta must be positive")
        if not self.gamma_start > self.gamma_end > 0:
            raise InvalidInputError("require gamma_start > gamma_end > 0")
        if self.anneal_sweeps < 1:
            raise InvalidInputError("anneal_sweeps must be >= 1")
        if self.schedule != "quadratic":
            raise InvalidInputError(f"unknown schedule {self.schedule!r}")

    def with_(self, **changes) -> "SqaParams":
        return replace(self, **changes)


@dataclass
class SqaResult:
    energies: np.ndarray
    gs_hit_fraction: float
    sweeps: int
    configs: Optional[np.ndarray] = None
    audit_error: float = 0.0
    hits: np.ndarray = field(default=None, repr=False)


def gamma_schedule(u: float, params: SqaParams) -> float:
    if not 0.0 <= u <= 1.0:
        raise InvalidInputError("schedule progress must lie in [0, 1]")
    g0, gf = params.gamma_start, params.gamma_end
    return gf + (g0 - gf) * (1.0 - u) ** 2


def slice_coupling(beta: float, gamma, trotter_slices: int):
    """Ferromagnetic coupling between neighbouring Trotter slices.

    ``ln coth x`` is evaluated as ``log1p(2 / expm1(2x))`` with ``x`` clamped
    away from zero, which stays finite for both tiny and large arguments.
    """
    x = beta * np.asarray(gamma, dtype=np.float64) / trotter_slices
    if np.any(x <= 0):
        raise InvalidInputError("beta * Gamma / M must be positive")
    x = np.maximum(x, 1e-300)
    with np.errstate(over="ignore"):
        value = 0.5 * np.log1p(2.0 / np.expm1(2.0 * x))
    return float(value) if value.ndim == 0 else value


def coupling_schedule(params: SqaParams) -> np.ndarray:
    T = params.anneal_sweeps
    # a one-sweep anneal runs at the final field
    u = np.arange(T) / (T - 1) if T > 1 else np.ones(1)
    gammas = params.gamma_end + (params.gamma_start - params.gamma_end) * (1.0 - u) ** 2
    return np.asarray(slice_coupling(params.beta, gammas, params.trotter_slices), dtype=np.float64).reshape(-1)


def _arrays(cp):
    return (cp.h, cp.nbr_ptr, cp.nbr_idx, cp.nbr_J, cp.term_ptr, cp.term_spins, cp.term_coef,
            cp.spin_term_ptr, cp.spin_term_idx)


def initial_slices(num_spins: int, params: SqaParams):
    rng = np.random.default_rng(params.seed)
    spins = (2 * rng.integers(0, 2, size=(params.trotter_slices, num_spins)) - 1).astype(np.int8)
    kernel_seed = int(rng.integers(0, 2**32))
    return spins, kernel_seed


def run_sqa(problem: Problem, params: SqaParams, gs_energy: Optional[float] = None,
            keep_configs: bool = False, audit: bool = False) -> SqaResult:
    """Anneal ``problem`` once and count the final slices at ``gs_energy``.

    Without a reference energy the hit fraction is NaN.
    """
    cp = compile_problem(problem)
    spins, kernel_seed = initial_slices(cp.num_spins, params)
    schedule = coupling_schedule(params)
    energies, audit_error = _kernels.anneal(
        spins, params.beta / params.trotter_slices, schedule, *_arrays(cp), kernel_seed, audit
    )
    if gs_energy is None:
        hits = np.zeros(energies.shape, dtype=bool)
        fraction = float("nan")
    else:
        hits = np.abs(energies - gs_energy) <= energy_tolerance(gs_energy)
        fraction = float(hits.mean())
    return SqaResult(
        energies=energies,
        gs_hit_fraction=fraction,
        sweeps=params.anneal_sweeps,
        configs=spins if keep_configs else None,
        audit_error=float(audit_error),
        hits=hits,
    )


def success_probability(results: Sequence[SqaResult]) -> float:
    """Mean ground-state hit fraction over repetitions."""
    if len(results) == 0:
        raise InvalidInputError("need at least one result")
    return float(np.mean([r.gs_hit_fraction for r in results]))


def stationary_histogram(problem: Problem, beta: float, gamma: float, trotter_slices: int,
                         sweeps: int, seed: int = 0) -> np.ndarray:
    """Empirical distribution of the joint Trotter state at a fixed field."""
    cp = compile_problem(problem)
    if cp.num_spins * trotter_slices > 20:
        raise InvalidInputError("histogram limited to 20 spin-slices")
    params = SqaParams(trotter_slices, beta, gamma * 2, gamma, 1, seed)
    spins, kernel_seed = initial_slices(cp.num_spins, params)
    jperp = slice_coupling(beta, gamma, trotter_slices)
    counts = _kernels.state_histogram(spins, beta / trotter_slices, jperp, *_arrays(cp), kernel_seed, sweeps)
    return counts / counts.sum()


def exact_action_distribution(problem: Problem, beta: float, gamma: float, trotter_slices: int) -> np.ndarray:
    """Boltzmann weights ``exp(-S)`` over the joint Trotter state, same coding
    as :func:`stationary_histogram`."""
    from .model import energy

    n, m = problem.num_spins, trotter_slices
    jperp = slice_coupling(beta, gamma, m)
    weights = np.empty(1 << (m * n))
    for code in range(weights.size):
        s = np.array([[-1 if (code >> (k * n + i)) & 1 else 1 for i in range(n)] for k in range(m)])
        action = beta / m * sum(energy(problem, s[k]) for k in range(m))
        action -= jperp * sum(float(s[k] @ s[(k + 1) % m]) for k in range(m))
        weights[code] = -action
    weights = np.exp(weights - weights.max())
    return weights / weights.sum()

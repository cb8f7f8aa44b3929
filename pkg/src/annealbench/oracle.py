"""Ground truth for small systems.

* exhaustive ground states (Gray-code enumeration),
* the three-group frustrated instance and the constraint strength needed to
  keep its parity embedding from breaking a single plaquette,
* dense exact diagonalization of transverse-field annealing Hamiltonians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .embed import embed_paqo, paqo_layout
from .model import InvalidInputError, LogicalProblem, Problem, compile_problem

MAX_ENUMERATION_SPINS = 30
MAX_ED_SPINS = 12


class CapacityError(InvalidInputError):
    pass


def _enumerate(problem: Problem):
    n = problem.num_spins
    if n > MAX_ENUMERATION_SPINS:
        raise CapacityError(f"{n} spins exceed the enumeration bound of {MAX_ENUMERATION_SPINS}")
    cp = compile_problem(problem)
    return _kernels.gray_enumerate(
        n, cp.h, cp.nbr_ptr, cp.nbr_idx, cp.nbr_J, cp.term_ptr, cp.term_spins, cp.term_coef,
        cp.spin_term_ptr, cp.spin_term_idx, 1e-9,
    )


def brute_force_gs(problem: Problem) -> tuple[float, int]:
    """Exact minimum energy and number of minimizing configurations."""
    e, count, _ = _enumerate(problem)
    return float(e), int(count)


def ground_state(problem: Problem) -> np.ndarray:
    """One minimizing configuration."""
    _, _, code = _enumerate(problem)
    bits = (int(code) >> np.arange(problem.num_spins)) & 1
    return np.where(bits == 1, -1, 1).astype(np.int8)


def _groups(sizes: Sequence[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def build_abc_instance(nA: int, nB: int, nC: int) -> LogicalProblem:
    """Three contiguous groups: members of a group want to align, members of
    different groups want to anti-align (``J = -1`` and ``+1`` here)."""
    sizes = (nA, nB, nC)
    if min(sizes) < 1:
        raise InvalidInputError("every group needs at least one variable")
    g = _groups(sizes)
    n = len(g)
    couplers = {(i, j): (-1.0 if g[i] == g[j] else 1.0) for i in range(n) for j in range(i + 1, n)}
    return LogicalProblem(n, couplers, label=f"abc-{nA}-{nB}-{nC}")


def designated_plaquette(nA: int, nB: int, nC: int) -> int:
    """Index (in layout order) of the tile straddling both group boundaries."""
    n = nA + nB + nC
    i, j = nA - 1, nA + nB - 1
    _, plaquettes = paqo_layout(n)
    target = ((i, i + 1), (i, i + 2), (i + 1, i + 2), None) if j == i + 1 else ((i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1))
    return plaquettes.index(target)


def _plaquette_products(states: np.ndarray, terms) -> np.ndarray:
    out = np.ones((states.shape[0], len(terms)), dtype=np.int8)
    for l, key in enumerate(terms):
        out[:, l] = np.prod(states[:, list(key)], axis=1)
    return out


def _bias_energy(states: np.ndarray, problem: LogicalProblem, pair_index) -> np.ndarray:
    h = np.zeros(len(pair_index))
    for p, J in problem.couplers.items():
        h[pair_index[p]] = J
    return states.astype(np.float64) @ h


@dataclass
class SingleBreak:
    """Best valid codeword and best state violating only the designated tile."""
    problem: LogicalProblem
    target: int
    valid_state: np.ndarray
    broken_state: np.ndarray
    valid_energy: float
    broken_energy: float

    @property
    def threshold(self) -> float:
        # violating a -C * product term costs 2 C
        return (self.valid_energy - self.broken_energy) / 2.0


def single_break(nA: int, nB: int, nC: int, mode: str = "block") -> SingleBreak:
    """Compare valid parity states with those breaking only the designated tile.

    Energies are bias energies (constraints excluded). ``mode="full"``
    enumerates every parity state; ``mode="block"`` only the states induced by
    group-uniform logical configurations and the all-couplers-satisfied state.
    """
    problem = build_abc_instance(nA, nB, nC)
    _, emb = embed_paqo(problem, omega=1.0, gamma=0.0)
    P = emb.num_spins
    target = designated_plaquette(nA, nB, nC)
    if mode == "full":
        if P > 22:
            raise CapacityError(f"full enumeration over {P} parity spins is too large")
        codes = np.arange(1 << P, dtype=np.int64)
        states = np.where((codes[:, None] >> np.arange(P)) & 1, -1, 1).astype(np.int8)
    elif mode == "block":
        groups = _groups((nA, nB, nC))
        rows = []
        for pattern in ((1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1)):
            sigma = np.array(pattern)[groups]
            rows.append([sigma[i] * sigma[j] for (i, j) in emb.pair_index])
        satisfied = [-int(np.sign(problem.couplers[p])) for p in emb.pair_index]
        rows.append(satisfied)
        states = np.array(rows, dtype=np.int8)
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    prods = _plaquette_products(states, emb.plaquette_terms)
    others = np.delete(prods, target, axis=1)
    admissible = np.all(others == 1, axis=1)
    e = _bias_energy(states, problem, emb.pair_index)
    valid = np.flatnonzero(admissible & (prods[:, target] == 1))
    broken = np.flatnonzero(admissible & (prods[:, target] == -1))
    if valid.size == 0 or broken.size == 0:
        raise InvalidInputError("candidate set lacks a valid or a single-break state")
    v = valid[np.argmin(e[valid])]
    b = broken[np.argmin(e[broken])]
    return SingleBreak(problem, target, states[v].copy(), states[b].copy(), float(e[v]), float(e[b]))


def single_break_threshold(nA: int, nB: int, nC: int, mode: str = "block") -> float:
    """Constraint strength at which a valid codeword stops losing to the best
    parity state that violates only the designated tile."""
    return single_break(nA, nB, nC, mode).threshold


def broken_constraint_gain(k: int, mode: Optional[str] = None) -> float:
    """Single-break threshold for three equal groups of ``k`` variables.

    Full enumeration is used for ``N = 3k <= 6``, the block-restricted
    candidate set otherwise.
    """
    if k < 2:
        raise InvalidInputError("groups need at least two variables for an interior tile")
    if mode is None:
        mode = "full" if 3 * k <= 6 else "block"
    return single_break_threshold(k, k, k, mode)


@dataclass
class ConstraintMap:
    n: int
    grid: np.ndarray
    splits: dict

    def border_mask(self) -> np.ndarray:
        """Tiles on the first row, last column or the diagonal boundary."""
        mask = np.zeros_like(self.grid, dtype=bool)
        for (i, j) in self.splits:
            mask[i, j] = i == 0 or j == self.n - 2 or j == i + 1
        return mask


def min_constraint_map(n: int, mode: str = "block") -> ConstraintMap:
    """Single-break thresholds in units of ``n**2`` for every tile reachable by
    a group split ``(a, b, c)``. Tile ``(i, j)`` with ``i = a - 1`` and
    ``j = a + b - 1``; entries not reachable are NaN."""
    if n > 12 or n < 3:
        raise InvalidInputError("constraint map supports 3 <= n <= 12")
    grid = np.full((n - 2, n - 1), np.nan)
    splits = {}
    for a in range(1, n - 1):
        for b in range(1, n - a):
            c = n - a - b
            i, j = a - 1, a + b - 1
            grid[i, j] = single_break_threshold(a, b, c, mode) / n**2
            splits[(i, j)] = (a, b, c)
    return ConstraintMap(n, grid, splits)


@dataclass
class SpectrumResult:
    s_grid: np.ndarray
    eigenvalues: np.ndarray
    gap: np.ndarray
    gs_amplitudes: np.ndarray


def basis_spins(n: int) -> np.ndarray:
    """Row ``b`` holds the spins of basis state ``b``; bit ``i`` set means -1."""
    codes = np.arange(1 << n)
    return np.where((codes[:, None] >> np.arange(n)) & 1, -1, 1)


def problem_diagonal(problem: LogicalProblem, fields: Optional[Sequence[float]] = None) -> np.ndarray:
    s = basis_spins(problem.n).astype(np.float64)
    diag = np.zeros(s.shape[0])
    for (i, j), J in problem.couplers.items():
        diag += J * s[:, i] * s[:, j]
    if fields is not None:
        diag += s @ np.asarray(fields, dtype=np.float64)
    return diag


def driver_matrix(n: int) -> np.ndarray:
    """Dense ``sum_i X_i``."""
    dim = 1 << n
    X = np.zeros((dim, dim))
    idx = np.arange(dim)
    for i in range(n):
        X[idx, idx ^ (1 << i)] = 1.0
    return X


def ed_spectrum(problem: LogicalProblem, gamma0: float, s_grid: Sequence[float],
                fields: Optional[Sequence[float]] = None, gamma_residual: float = 0.0) -> SpectrumResult:
    """Spectra of ``H(t) = -[(1-t) Gamma_0 + t Gamma_res] sum X + t H_problem``.

    ``fields`` adds ``sum_i h_i s_i`` to the problem energy.
    """
    n = problem.n
    if n > MAX_ED_SPINS:
        raise CapacityError(f"{n} spins exceed the dense diagonalization bound of {MAX_ED_SPINS}")
    grid = np.asarray(s_grid, dtype=np.float64)
    if grid.size == 0:
        raise InvalidInputError("empty anneal grid")
    diag = problem_diagonal(problem, fields)
    X = driver_matrix(n)
    eigvals, amps = [], []
    for t in grid:
        H = -((1 - t) * gamma0 + t * gamma_residual) * X
        H[np.diag_indices_from(H)] += t * diag
        assert np.max(np.abs(H - H.T)) == 0.0
        w, v = np.linalg.eigh(H)
        eigvals.append(w)
        amps.append(np.abs(v[:, 0]) ** 2)
    eigvals = np.array(eigvals)
    gap = np.maximum(eigvals[:, 1] - eigvals[:, 0], 0.0)
    return SpectrumResult(grid, eigvals, gap, np.array(amps))


def min_gap(spec: SpectrumResult) -> tuple[float, float]:
    if len(spec.gap) == 0:
        raise InvalidInputError("empty spectrum")
    k = int(np.argmin(spec.gap))
    return float(spec.s_grid[k]), float(spec.gap[k])


def chain_gap_estimate(gamma: float, J: float, N: int) -> float:
    """Tunnelling gap ``Gamma^N / J^(N-1)`` of a ferromagnetic chain in a weak field."""
    if gamma <= 0 or J <= 0 or N < 2:
        raise InvalidInputError("need gamma, J > 0 and N >= 2")
    return gamma**N / J ** (N - 1)


def ferro_chain(N: int, J: float = 1.0) -> LogicalProblem:
    return LogicalProblem(N, {(i, i + 1): -J for i in range(N - 1)}, label=f"ferro-chain-{N}")


def chain_gap_ed(gamma: float, J: float, N: int) -> float:
    """Exact gap of the open chain ``-J sum Z Z - Gamma sum X``."""
    spec = ed_spectrum(ferro_chain(N, J), gamma, [1.0], gamma_residual=gamma)
    return float(spec.gap[0])


# Three-spin chain with longitudinal fields (energy term h_i s_i). Spin 2 is
# nearly free while spins 0 and 1 point up, so the driver favours that branch
# until t ~ 0.91, after which the all-down state takes over.
DEMO_FIELDS = (-0.45, -0.45, 0.92)
DEMO_COUPLING = 1.0
DEMO_GAMMA0 = 1.0


def avoided_crossing_demo(points: int = 2001) -> tuple[SpectrumResult, LogicalProblem, tuple]:
    problem = ferro_chain(3, DEMO_COUPLING)
    spec = ed_spectrum(problem, DEMO_GAMMA0, np.linspace(0.0, 1.0, points), fields=DEMO_FIELDS)
    return spec, problem, DEMO_FIELDS

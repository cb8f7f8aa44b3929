"""Logical and physical Ising problems, energies and instance generators.

Energies follow ``H = sum_{i<j} J_ij s_i s_j`` and are minimized. MaxCut edges
are stored with ``J = +1`` (antiferromagnetic under this convention), so the
ground states of a MaxCut instance are its maximum cuts.

Instances are drawn with numpy's PCG64 generator (``numpy.random.default_rng``),
which is platform independent for a given seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Union

import numpy as np

SCHEMES = ("direct", "square", "chimera", "paqo")


class InvalidInputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class DegenerateInstanceError(InvalidInputError):
    """Raised when a generator would produce an instance without couplers."""


class ProblemParseError(ValueError):
    """Raised when an instance file is malformed."""


def energy_tolerance(reference: float) -> float:
    return 1e-9 * max(1.0, abs(reference))


def energies_match(a: float, b: float) -> bool:
    return abs(a - b) <= energy_tolerance(b)


@dataclass(frozen=True)
class LogicalProblem:
    n: int
    couplers: Mapping[tuple[int, int], float]
    label: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"n must be positive, got {self.n}")
        clean = {}
        for key, value in self.couplers.items():
            i, j = (int(k) for k in key)
            if not 0 <= i < j < self.n:
                raise InvalidInputError(f"coupler ({i}, {j}) violates 0 <= i < j < n={self.n}")
            if (i, j) in clean:
                raise InvalidInputError(f"duplicate coupler ({i}, {j})")
            clean[(i, j)] = float(value)
        object.__setattr__(self, "couplers", dict(sorted(clean.items())))

    @property
    def num_spins(self) -> int:
        return self.n

    def coupling(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        return self.couplers.get((i, j), 0.0)

    def scaled(self, factor: float) -> "LogicalProblem":
        return LogicalProblem(
            self.n, {k: v * factor for k, v in self.couplers.items()}, self.label, self.seed
        )


@dataclass(frozen=True)
class PhysicalProblem:
    """Embedded problem over ``num_spins`` physical spins.

    ``four_local`` holds the plaquette terms. A 3-tuple key is a boundary tile
    whose fourth corner is a fixed +1 ancilla that has been folded away.
    """

    num_spins: int
    one_local: Mapping[int, float] = field(default_factory=dict)
    two_local: Mapping[tuple[int, int], float] = field(default_factory=dict)
    four_local: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    scheme: str = "direct"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")
        n = self.num_spins
        for a in self.one_local:
            if not 0 <= a < n:
                raise InvalidInputError(f"bias index {a} out of range")
        for key in list(self.two_local) + list(self.four_local):
            if list(key) != sorted(set(key)):
                raise InvalidInputError(f"term {key} must be sorted and duplicate-free")
            if key[0] < 0 or key[-1] >= n:
                raise InvalidInputError(f"term {key} out of range")
        for key in self.four_local:
            if len(key) not in (3, 4):
                raise InvalidInputError(f"plaquette term {key} must have 3 or 4 spins")
        if self.scheme in ("direct", "square", "chimera") and self.four_local:
            raise InvalidInputError(f"scheme {self.scheme} cannot carry 4-local terms")
        if self.scheme in ("square", "chimera") and self.one_local:
            raise InvalidInputError(f"scheme {self.scheme} cannot carry biases")
        if self.scheme == "paqo" and self.two_local:
            raise InvalidInputError("paqo problems carry no 2-local terms")
        object.__setattr__(self, "one_local", {int(k): float(v) for k, v in sorted(self.one_local.items())})
        object.__setattr__(self, "two_local", {tuple(k): float(v) for k, v in sorted(self.two_local.items())})
        object.__setattr__(self, "four_local", {tuple(k): float(v) for k, v in sorted(self.four_local.items())})


Problem = Union[LogicalProblem, PhysicalProblem]


def as_config(values, length: int | None = None) -> np.ndarray:
    config = np.asarray(values, dtype=np.int8)
    if config.ndim != 1 or not np.all(np.abs(config) == 1):
        raise InvalidInputError("spin configurations must be 1-d arrays of +1/-1")
    if length is not None and config.size != length:
        raise InvalidInputError(f"configuration length {config.size} != {length} spins")
    return config


@dataclass(frozen=True)
class CompiledProblem:
    """Flat array form shared by the Monte Carlo engine and the enumerator.

    Two-local couplings are stored twice (CSR rows for both endpoints).
    Higher-order terms are stored once in ``term_*`` with a per-spin index.
    """

    num_spins: int
    h: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    nbr_J: np.ndarray
    term_ptr: np.ndarray
    term_spins: np.ndarray
    term_coef: np.ndarray
    spin_term_ptr: np.ndarray
    spin_term_idx: np.ndarray


def _terms(problem: Problem):
    if isinstance(problem, LogicalProblem):
        return {}, problem.couplers, {}
    return problem.one_local, problem.two_local, problem.four_local


def compile_problem(problem: Problem) -> CompiledProblem:
    n = problem.num_spins
    one, two, higher = _terms(problem)
    h = np.zeros(n)
    for a, v in one.items():
        h[a] = v

    rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (a, b), v in two.items():
        rows[a].append((b, v))
        rows[b].append((a, v))
    nbr_ptr = np.zeros(n + 1, dtype=np.int64)
    nbr_ptr[1:] = np.cumsum([len(r) for r in rows])
    nbr_idx = np.array([b for r in rows for b, _ in r], dtype=np.int64)
    nbr_J = np.array([v for r in rows for _, v in r], dtype=np.float64)

    keys = list(higher)
    term_ptr = np.zeros(len(keys) + 1, dtype=np.int64)
    term_ptr[1:] = np.cumsum([len(k) for k in keys])
    term_spins = np.array([a for k in keys for a in k], dtype=np.int64)
    term_coef = np.array([higher[k] for k in keys], dtype=np.float64)
    members: list[list[int]] = [[] for _ in range(n)]
    for t, k in enumerate(keys):
        for a in k:
            members[a].append(t)
    spin_term_ptr = np.zeros(n + 1, dtype=np.int64)
    spin_term_ptr[1:] = np.cumsum([len(m) for m in members])
    spin_term_idx = np.array([t for m in members for t in m], dtype=np.int64)
    return CompiledProblem(
        n, h, nbr_ptr, nbr_idx, nbr_J, term_ptr, term_spins, term_coef, spin_term_ptr, spin_term_idx
    )


def energy(problem: Problem, config) -> float:
    """Energy of ``config`` summed in canonical (sorted-key) order."""
    s = as_config(config, problem.num_spins).astype(np.float64)
    one, two, higher = _terms(problem)
    total = 0.0
    if one:
        idx = np.fromiter(one.keys(), dtype=np.int64, count=len(one))
        total += float(np.dot(np.fromiter(one.values(), float, len(one)), s[idx]))
    if two:
        pairs = np.array(list(two.keys()), dtype=np.int64)
        vals = np.fromiter(two.values(), float, len(two))
        total += float(np.dot(vals, s[pairs[:, 0]] * s[pairs[:, 1]]))
    for key, coef in higher.items():
        total += coef * float(np.prod(s[list(key)]))
    return total


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def num_maxcut_edges(n: int, p: float) -> int:
    return _round_half_away(p * n * (n - 1) / 2)


def generate_maxcut(n: int, p: float, seed: int) -> LogicalProblem:
    """Unweighted MaxCut instance with ``round(p n (n-1) / 2)`` random edges."""
    if n < 2:
        raise InvalidInputError("MaxCut needs n >= 2")
    if not 0 < p <= 1:
        raise InvalidInputError("density p must lie in (0, 1]")
    n_edges = num_maxcut_edges(n, p)
    if n_edges == 0:
        raise DegenerateInstanceError(f"n={n}, p={p} yields no edges")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(pairs), size=n_edges, replace=False)
    couplers = {pairs[k]: 1.0 for k in sorted(chosen)}
    return LogicalProblem(n, couplers, label=f"maxcut-n{n}-p{p:g}-s{seed}", seed=seed)


def generate_gaussian_sk(n: int, mu: float = 0.0, sigma: float = 1.0, seed: int = 0) -> LogicalProblem:
    """Fully connected spin glass; ``sigma`` is the standard deviation."""
    if n < 2:
        raise InvalidInputError("SK instance needs n >= 2")
    if sigma <= 0:
        raise InvalidInputError("sigma must be positive")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    values = rng.normal(mu, sigma, size=len(pairs))
    return LogicalProblem(
        n, dict(zip(pairs, values.tolist())), label=f"gauss-n{n}-s{seed}", seed=seed
    )


def problem_to_dict(problem: LogicalProblem) -> dict:
    return {
        "n": problem.n,
        "label": problem.label,
        "seed": problem.seed,
        "couplers": [[i, j, J] for (i, j), J in problem.couplers.items()],
    }


def problem_from_dict(data: dict, source: str = "<dict>") -> LogicalProblem:
    for key, kind in (("n", int), ("label", str), ("seed", int), ("couplers", list)):
        if key not in data:
            raise ProblemParseError(f"{source}: missing field {key!r}")
        if not isinstance(data[key], kind) or isinstance(data[key], bool) and kind is int:
            raise ProblemParseError(f"{source}: field {key!r} must be {kind.__name__}")
    n = data["n"]
    couplers: dict[tuple[int, int], float] = {}
    for pos, entry in enumerate(data["couplers"]):
        where = f"{source}: couplers[{pos}]"
        if not (isinstance(entry, list) and len(entry) == 3):
            raise ProblemParseError(f"{where}: expected [i, j, J]")
        i, j, J = entry
        if not (isinstance(i, int) and isinstance(j, int)) or not isinstance(J, (int, float)):
            raise ProblemParseError(f"{where}: bad types {entry!r}")
        if not 0 <= i < j < n:
            raise ProblemParseError(f"{where}: requires 0 <= i < j < n, got ({i}, {j})")
        if (i, j) in couplers:
            raise ProblemParseError(f"{where}: duplicate pair ({i}, {j})")
        couplers[(i, j)] = float(J)
    return LogicalProblem(n, couplers, data["label"], data["seed"])


def write_problem(problem: LogicalProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=1) + "\n")


def read_problem(path) -> LogicalProblem:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ProblemParseError(f"{path}: top level must be an object")
    return problem_from_dict(data, str(path))

"""Embeddings of all-to-all logical problems onto quasiplanar topologies.

Three schemes are provided:

* ``square``: every logical variable becomes an L-shaped chain of ``n - 1``
  spins. Chain ``i`` runs down column ``i`` of an upper-triangular cell grid
  and then along row ``i``; cell ``(i, j)`` is the single crossing of chains
  ``i`` and ``j`` and hosts their logical coupler.
* ``chimera``: the triangle clique layout on ``L x L`` cells of ``K_{c,c}``
  with ``L = ceil(n / c)``. Variable ``v`` (block ``b = v // c``, position
  ``k = v % c``) uses the left spin ``k`` of cells ``(0..b, b)`` and the right
  spin ``k`` of cells ``(b, b..L-1)``; the two runs meet in the diagonal cell.
* ``paqo``: one spin per logical pair, 4-local plaquettes between
  neighbouring pairs, and 3-spin boundary tiles whose fixed +1 ancilla corner
  is folded into the term.

Chain edges are stored as ``-C_i`` and plaquette terms as ``-C_l * product``
so satisfied constraints lower the energy.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import (
    InvalidInputError,
    LogicalProblem,
    PhysicalProblem,
    as_config,
    energies_match,
)

FORMAT_VERSION = 1

SQUARE_PARAMS = (0.0, 1.1)


def paqo_params(n: int) -> tuple[float, float]:
    """Constraint parameters ``(omega, gamma)`` used for the parity scheme."""
    return (n * n / 50.0, 1.1)


class UnconstrainedChainError(InvalidInputError):
    pass


class ParityStructureError(InvalidInputError):
    pass


class CapacityError(InvalidInputError):
    pass


class ConstraintTooWeakError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChimeraGraph:
    """Chimera cell grid. Spin labels are ``(row, col, side, k)`` with side 0
    the vertically coupled ("left") shore and side 1 the horizontal one."""

    rows: int
    cols: int
    c: int

    def contains(self, label) -> bool:
        r, col, side, k = label
        return 0 <= r < self.rows and 0 <= col < self.cols and side in (0, 1) and 0 <= k < self.c

    def adjacent(self, u, v) -> bool:
        if not (self.contains(u) and self.contains(v)) or u == v:
            return False
        (r1, c1, s1, k1), (r2, c2, s2, k2) = u, v
        if (r1, c1) == (r2, c2):
            return s1 != s2
        if s1 != s2 or k1 != k2:
            return False
        if s1 == 0:
            return c1 == c2 and abs(r1 - r2) == 1
        return r1 == r2 and abs(c1 - c2) == 1

    def neighbours(self, label):
        r, col, side, k = label
        out = [(r, col, 1 - side, q) for q in range(self.c)]
        steps = ((1, 0), (-1, 0)) if side == 0 else ((0, 1), (0, -1))
        for dr, dc in steps:
            cand = (r + dr, col + dc, side, k)
            if self.contains(cand):
                out.append(cand)
        return out


@dataclass(frozen=True)
class EmbeddingMap:
    scheme: str
    n: int
    num_spins: int
    chains: tuple = ()
    chain_strengths: tuple = ()
    pair_index: dict = field(default_factory=dict)
    fixed_spins: tuple = ()
    plaquettes: tuple = ()
    plaquette_strengths: tuple = ()
    plaquette_terms: tuple = ()
    coupler_assignment: dict = field(default_factory=dict)
    constraint_params: tuple = (0.0, 0.0)
    spin_labels: tuple = ()
    chimera: Optional[ChimeraGraph] = None

    def constant_offset(self) -> float:
        """Energy of the fully satisfied constraints."""
        if self.scheme == "paqo":
            return -float(sum(self.plaquette_strengths))
        return -float(sum((len(ch) - 1) * C for ch, C in zip(self.chains, self.chain_strengths)))


@dataclass
class EmbeddingReport:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _check_constraint_args(omega: float, gamma: float):
    if omega < 0 or gamma < 0:
        raise InvalidInputError("omega and gamma must be non-negative")
    if omega == 0 and gamma == 0:
        raise UnconstrainedChainError("omega = gamma = 0 leaves the constraints at zero strength")


def chain_constraint(problem: LogicalProblem, i: int, omega: float, gamma: float) -> float:
    """Chain strength ``omega + gamma * sum_j |J_ij|``."""
    if not 0 <= i < problem.n:
        raise InvalidInputError(f"variable {i} out of range")
    _check_constraint_args(omega, gamma)
    incident = [abs(v) for (a, b), v in problem.couplers.items() if a == i or b == i]
    return omega + gamma * math.fsum(incident)


def is_valid_plaquette(corners: Sequence) -> bool:
    """True if every logical label appears an even number of times."""
    counts = Counter(x for pair in corners if pair is not None for x in pair)
    return len(corners) == 4 and all(v % 2 == 0 for v in counts.values())


def plaquette_constraint(problem: LogicalProblem, plaquette: Sequence, omega: float, gamma: float) -> float:
    """Plaquette strength ``omega + gamma * sum |J_corner|``; an ancilla
    corner is given as ``None`` and contributes nothing."""
    if not is_valid_plaquette(plaquette):
        raise ParityStructureError(f"corners {plaquette} do not form an even-parity tile")
    _check_constraint_args(omega, gamma)
    carried = [abs(problem.coupling(*pair)) for pair in plaquette if pair is not None]
    return omega + gamma * math.fsum(carried)


def embed_direct(problem: LogicalProblem):
    phys = PhysicalProblem(problem.n, two_local=dict(problem.couplers), scheme="direct")
    emb = EmbeddingMap(
        scheme="direct",
        n=problem.n,
        num_spins=problem.n,
        chains=tuple((i,) for i in range(problem.n)),
        chain_strengths=tuple(0.0 for _ in range(problem.n)),
        coupler_assignment={k: k for k in problem.couplers},
    )
    return phys, emb


def _chain_problem(problem, chains, labels, carriers, omega, gamma, scheme, chimera=None):
    strengths = tuple(chain_constraint(problem, i, omega, gamma) for i in range(problem.n))
    two = {}
    for chain, C in zip(chains, strengths):
        for a, b in zip(chain, chain[1:]):
            two[tuple(sorted((a, b)))] = -C
    for pair, edge in carriers.items():
        J = problem.couplers.get(pair)
        if J is not None:
            two[edge] = J
    num_spins = sum(len(ch) for ch in chains)
    phys = PhysicalProblem(num_spins, two_local=two, scheme=scheme)
    emb = EmbeddingMap(
        scheme=scheme,
        n=problem.n,
        num_spins=num_spins,
        chains=chains,
        chain_strengths=strengths,
        coupler_assignment=carriers,
        constraint_params=(omega, gamma),
        spin_labels=labels,
        chimera=chimera,
    )
    return phys, emb


def embed_square(problem: LogicalProblem, omega: float = 0.0, gamma: float = 1.1):
    n = problem.n
    if n < 3:
        raise InvalidInputError("square embedding needs n >= 3")
    L = n - 1
    chains = tuple(tuple(range(i * L, (i + 1) * L)) for i in range(n))
    # slot k of chain i crosses chain j = k (column run) or k + 1 (row run)
    labels = []
    for i in range(n):
        for k in range(L):
            j = k if k < i else k + 1
            labels.append((min(i, j), max(i, j), 0 if k < i else 1))
    carriers = {}
    for i in range(n):
        for j in range(i + 1, n):
            a = i * L + (j - 1)
            b = j * L + i
            carriers[(i, j)] = (a, b)
    return _chain_problem(problem, chains, tuple(labels), carriers, omega, gamma, "square")


def chimera_layout(n: int, c: int):
    """Chains (as chimera labels) of the triangle clique layout."""
    L = max(1, -(-n // c))
    chains = []
    for v in range(n):
        b, k = divmod(v, c)
        left = [(r, b, 0, k) for r in range(b + 1)]
        right = [(b, col, 1, k) for col in range(b, L)]
        chains.append(left + right)
    return ChimeraGraph(L, L, c), chains


def embed_chimera(problem: LogicalProblem, c: int = 4, omega: float = 0.0, gamma: float = 1.1,
                  max_cells: int = 4096):
    n = problem.n
    if n < 2 or c < 2:
        raise InvalidInputError("chimera embedding needs n >= 2 and c >= 2")
    graph, label_chains = chimera_layout(n, c)
    if graph.rows * graph.cols > max_cells:
        raise CapacityError(f"layout needs {graph.rows}x{graph.cols} cells")
    index = {}
    labels = []
    chains = []
    for lab_chain in label_chains:
        ids = []
        for lab in lab_chain:
            index[lab] = len(labels)
            labels.append(lab)
            ids.append(index[lab])
        chains.append(tuple(ids))
    owner = {s: v for v, ch in enumerate(chains) for s in ch}
    carriers = {}
    for u in range(n):
        for v in range(u + 1, n):
            best = None
            for s in chains[u]:
                for lab in graph.neighbours(labels[s]):
                    t = index.get(lab)
                    if t is not None and owner[t] == v:
                        edge = tuple(sorted((s, t)))
                        if best is None or edge < best:
                            best = edge
            if best is None:
                raise CapacityError(f"chains {u} and {v} are not adjacent")
            carriers[(u, v)] = best
    return _chain_problem(problem, tuple(chains), tuple(labels), carriers, omega, gamma, "chimera", graph)


def paqo_layout(n: int):
    """Spin index per pair and plaquette corner lists (``None`` = ancilla)."""
    pair_index = {}
    for i in range(n):
        for j in range(i + 1, n):
            pair_index[(i, j)] = len(pair_index)
    plaquettes = []
    for i in range(n - 2):
        plaquettes.append(((i, i + 1), (i, i + 2), (i + 1, i + 2), None))
        for j in range(i + 2, n - 1):
            plaquettes.append(((i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)))
    return pair_index, plaquettes


def embed_paqo(problem: LogicalProblem, omega: Optional[float] = None, gamma: float = 1.1):
    n = problem.n
    if n < 3:
        raise InvalidInputError("parity embedding needs n >= 3")
    if omega is None:
        omega = paqo_params(n)[0]
    pair_index, plaquettes = paqo_layout(n)
    num_spins = len(pair_index)
    strengths = []
    terms = []
    fixed = []
    four = {}
    for corners in plaquettes:
        C = plaquette_constraint(problem, corners, omega, gamma)
        key = tuple(sorted(pair_index[p] for p in corners if p is not None))
        if None in corners:
            fixed.append(num_spins + len(fixed))
        strengths.append(C)
        terms.append(key)
        four[key] = -C
    one = {pair_index[p]: J for p, J in problem.couplers.items()}
    phys = PhysicalProblem(num_spins, one_local=one, four_local=four, scheme="paqo")
    emb = EmbeddingMap(
        scheme="paqo",
        n=n,
        num_spins=num_spins,
        pair_index=pair_index,
        fixed_spins=tuple(fixed),
        plaquettes=tuple(plaquettes),
        plaquette_strengths=tuple(strengths),
        plaquette_terms=tuple(terms),
        coupler_assignment={p: pair_index[p] for p in problem.couplers},
        constraint_params=(omega, gamma),
    )
    return phys, emb


def embed(problem: LogicalProblem, scheme: str, omega: Optional[float] = None,
          gamma: float = 1.1, c: int = 4):
    """Embed with the scheme's default constraint parameters unless given."""
    if scheme == "direct":
        return embed_direct(problem)
    if scheme == "square":
        return embed_square(problem, SQUARE_PARAMS[0] if omega is None else omega, gamma)
    if scheme == "chimera":
        return embed_chimera(problem, c, SQUARE_PARAMS[0] if omega is None else omega, gamma)
    if scheme == "paqo":
        return embed_paqo(problem, omega, gamma)
    raise InvalidInputError(f"unknown scheme {scheme!r}")


def embed_config(emb: EmbeddingMap, logical) -> np.ndarray:
    sigma = as_config(logical, emb.n)
    out = np.empty(emb.num_spins, dtype=np.int8)
    if emb.scheme == "paqo":
        for (i, j), a in emb.pair_index.items():
            out[a] = sigma[i] * sigma[j]
    else:
        for i, chain in enumerate(emb.chains):
            out[list(chain)] = sigma[i]
    return out


def physical_gs_energy(emb: EmbeddingMap, problem: LogicalProblem, logical_gs_energy: float,
                       verify: bool = False, verify_limit: int = 20) -> float:
    """Ground-state energy of the embedded problem, assuming no broken constraint.

    With ``verify`` the claim is checked by enumeration when the embedded
    problem has at most ``verify_limit`` spins.
    """
    value = logical_gs_energy + emb.constant_offset()
    if verify and emb.num_spins <= verify_limit:
        from .oracle import brute_force_gs

        phys, _ = embed(problem, emb.scheme, emb.constraint_params[0], emb.constraint_params[1],
                        emb.chimera.c if emb.chimera else 4)
        exact, _ = brute_force_gs(phys)
        if not energies_match(exact, value):
            raise ConstraintTooWeakError(
                f"enumerated ground state {exact} lies below the unbroken value {value}"
            )
    return value


def validate_embedding(emb: EmbeddingMap, physical: PhysicalProblem, logical: LogicalProblem) -> EmbeddingReport:
    v: list[str] = []
    if emb.n != logical.n:
        v.append(f"map has n={emb.n} but logical problem has n={logical.n}")
        return EmbeddingReport(False, v)
    if physical.num_spins != emb.num_spins:
        v.append("spin count of map and physical problem differ")
    if emb.scheme == "paqo":
        _validate_paqo(emb, physical, logical, v)
    else:
        _validate_chains(emb, physical, logical, v)
    return EmbeddingReport(not v, v)


def _validate_chains(emb, physical, logical, v):
    n = logical.n
    if len(emb.chains) != n:
        v.append(f"expected {n} chains, found {len(emb.chains)}")
        return
    if emb.scheme == "square":
        expected = [n - 1] * n
    elif emb.scheme == "chimera":
        L = emb.chimera.rows
        expected = [L + 1] * n
    else:
        expected = [1] * n
    for i, (chain, want) in enumerate(zip(emb.chains, expected)):
        if len(chain) != want:
            v.append(f"chain {i} has length {len(chain)}, expected {want}")
    owner = {}
    for i, chain in enumerate(emb.chains):
        for s in chain:
            if s in owner:
                v.append(f"spin {s} shared by chains {owner[s]} and {i}")
            owner[s] = i
    if sorted(owner) != list(range(physical.num_spins)):
        v.append("chains do not cover the physical spins exactly")

    params = emb.constraint_params
    expected_terms = {}
    chain_degree = Counter()
    for i, chain in enumerate(emb.chains):
        if emb.scheme != "direct":
            C = chain_constraint(logical, i, *params)
            if not math.isclose(C, emb.chain_strengths[i], rel_tol=1e-12, abs_tol=1e-12):
                v.append(f"chain {i} strength {emb.chain_strengths[i]} != {C}")
        for a, b in zip(chain, chain[1:]):
            edge = tuple(sorted((a, b)))
            expected_terms[edge] = -emb.chain_strengths[i]
            chain_degree[a] += 1
            chain_degree[b] += 1
            if emb.scheme == "chimera" and not emb.chimera.adjacent(emb.spin_labels[a], emb.spin_labels[b]):
                v.append(f"chain edge {edge} is not a chimera coupler")

    used = Counter()
    host = Counter()
    for i in range(n):
        for j in range(i + 1, n):
            edge = emb.coupler_assignment.get((i, j))
            if edge is None:
                if (i, j) in logical.couplers or emb.scheme != "direct":
                    v.append(f"logical pair ({i}, {j}) has no carrier")
                continue
            a, b = edge
            used[tuple(sorted(edge))] += 1
            host[a] += 1
            host[b] += 1
            if {owner.get(a), owner.get(b)} != {i, j}:
                v.append(f"carrier {edge} of ({i}, {j}) does not join chains {i} and {j}")
            if emb.scheme == "chimera" and not emb.chimera.adjacent(emb.spin_labels[a], emb.spin_labels[b]):
                v.append(f"carrier {edge} is not a chimera coupler")
            if (i, j) in logical.couplers:
                expected_terms[tuple(sorted(edge))] = logical.couplers[(i, j)]
    for edge, count in used.items():
        if count > 1:
            v.append(f"physical coupler {edge} carries {count} logical couplers")
    if emb.scheme == "square":
        for s in range(physical.num_spins):
            if host[s] > 1:
                v.append(f"spin {s} hosts {host[s]} logical couplers")
            if chain_degree[s] > 2:
                v.append(f"spin {s} has {chain_degree[s]} chain edges")
    if physical.four_local or physical.one_local:
        v.append("chain embeddings must carry only 2-local terms")
    for edge, value in expected_terms.items():
        got = physical.two_local.get(edge)
        if got is None or not math.isclose(got, value, rel_tol=1e-12, abs_tol=1e-12):
            v.append(f"term {edge} is {got}, expected {value}")
    for edge in physical.two_local:
        if edge not in expected_terms:
            v.append(f"unexpected physical coupler {edge}")


def _validate_paqo(emb, physical, logical, v):
    n = logical.n
    P = n * (n - 1) // 2
    if emb.num_spins != P or len(emb.pair_index) != P:
        v.append(f"expected {P} parity spins")
    want = (n - 1) * (n - 2) // 2
    if len(emb.plaquettes) != want:
        v.append(f"expected {want} plaquettes, found {len(emb.plaquettes)}")
    for l, corners in enumerate(emb.plaquettes):
        if not is_valid_plaquette(corners):
            v.append(f"plaquette {l} {corners} has odd parity")
            continue
        C = plaquette_constraint(logical, corners, *emb.constraint_params)
        if not math.isclose(C, emb.plaquette_strengths[l], rel_tol=1e-12, abs_tol=1e-12):
            v.append(f"plaquette {l} strength {emb.plaquette_strengths[l]} != {C}")
        key = tuple(sorted(emb.pair_index[p] for p in corners if p is not None))
        got = physical.four_local.get(key)
        if got is None or not math.isclose(got, -C, rel_tol=1e-12, abs_tol=1e-12):
            v.append(f"plaquette term {key} is {got}, expected {-C}")
    for pair, J in logical.couplers.items():
        a = emb.pair_index.get(pair)
        if a is None or emb.coupler_assignment.get(pair) != a:
            v.append(f"logical coupler {pair} is not carried by its parity spin")
        elif not math.isclose(physical.one_local.get(a, 0.0), J, rel_tol=1e-12, abs_tol=1e-12):
            v.append(f"bias on spin {a} is {physical.one_local.get(a)}, expected {J}")
    if len(set(emb.coupler_assignment.values())) != len(emb.coupler_assignment):
        v.append("two logical couplers share a parity spin")


def embedding_to_dict(physical: PhysicalProblem, emb: EmbeddingMap) -> dict:
    def pairs(d):
        return [[list(k) if isinstance(k, tuple) else k, val if not isinstance(val, tuple) else list(val)]
                for k, val in d.items()]

    return {
        "format": "annealbench-embedding",
        "version": FORMAT_VERSION,
        "scheme": emb.scheme,
        "n": emb.n,
        "num_spins": emb.num_spins,
        "constraint_params": list(emb.constraint_params),
        "chains": [list(ch) for ch in emb.chains],
        "chain_strengths": list(emb.chain_strengths),
        "pair_index": pairs(emb.pair_index),
        "fixed_spins": list(emb.fixed_spins),
        "plaquettes": [[list(p) if p is not None else None for p in corners] for corners in emb.plaquettes],
        "plaquette_strengths": list(emb.plaquette_strengths),
        "plaquette_terms": [list(t) for t in emb.plaquette_terms],
        "coupler_assignment": pairs(emb.coupler_assignment),
        "spin_labels": [list(lab) for lab in emb.spin_labels],
        "chimera": None if emb.chimera is None else [emb.chimera.rows, emb.chimera.cols, emb.chimera.c],
        "terms": {
            "one_local": [[a, h] for a, h in physical.one_local.items()],
            "two_local": [[a, b, J] for (a, b), J in physical.two_local.items()],
            "four_local": [[list(k), K] for k, K in physical.four_local.items()],
        },
    }


def embedding_from_dict(data: dict):
    if data.get("format") != "annealbench-embedding" or data.get("version") != FORMAT_VERSION:
        raise InvalidInputError("not an embedding file of a supported version")

    def tup(x):
        return tuple(x) if isinstance(x, list) else x

    terms = data["terms"]
    phys = PhysicalProblem(
        data["num_spins"],
        one_local={a: h for a, h in terms["one_local"]},
        two_local={(a, b): J for a, b, J in terms["two_local"]},
        four_local={tuple(k): K for k, K in terms["four_local"]},
        scheme=data["scheme"],
    )
    emb = EmbeddingMap(
        scheme=data["scheme"],
        n=data["n"],
        num_spins=data["num_spins"],
        chains=tuple(tuple(ch) for ch in data["chains"]),
        chain_strengths=tuple(data["chain_strengths"]),
        pair_index={tup(k): val for k, val in data["pair_index"]},
        fixed_spins=tuple(data["fixed_spins"]),
        plaquettes=tuple(tuple(tup(p) for p in corners) for corners in data["plaquettes"]),
        plaquette_strengths=tuple(data["plaquette_strengths"]),
        plaquette_terms=tuple(tuple(t) for t in data["plaquette_terms"]),
        coupler_assignment={tup(k): tup(val) for k, val in data["coupler_assignment"]},
        constraint_params=tuple(data["constraint_params"]),
        spin_labels=tuple(tuple(lab) for lab in data["spin_labels"]),
        chimera=None if data["chimera"] is None else ChimeraGraph(*data["chimera"]),
    )
    return phys, emb


def write_embedding(physical: PhysicalProblem, emb: EmbeddingMap, path) -> None:
    Path(path).write_text(json.dumps(embedding_to_dict(physical, emb)) + "\n")


def read_embedding(path):
    return embedding_from_dict(json.loads(Path(path).read_text()))

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annealbench.embed import (
    ChimeraGraph,
    ConstraintTooWeakError,
    EmbeddingMap,
    ParityStructureError,
    UnconstrainedChainError,
    chain_constraint,
    embed,
    embed_chimera,
    embed_config,
    embed_paqo,
    embed_square,
    embedding_from_dict,
    embedding_to_dict,
    is_valid_plaquette,
    paqo_params,
    physical_gs_energy,
    plaquette_constraint,
    read_embedding,
    validate_embedding,
    write_embedding,
)
from annealbench.model import LogicalProblem, energy, generate_gaussian_sk, generate_maxcut
from annealbench.oracle import brute_force_gs


def unit_clique(n, J=1.0):
    return LogicalProblem(n, {(i, j): J for i in range(n) for j in range(i + 1, n)})


def test_chain_constraint_examples():
    p = LogicalProblem(4, {(0, 1): 1.0, (0, 2): -1.0, (0, 3): 0.5})
    assert chain_constraint(p, 0, 0.0, 1.1) == pytest.approx(2.75, abs=1e-15)
    assert all(chain_constraint(unit_clique(6), i, 0.0, 1.1) == pytest.approx(5.5) for i in range(6))
    assert chain_constraint(p, 2, 2.0, 0.0) == 2.0
    with pytest.raises(UnconstrainedChainError):
        chain_constraint(p, 0, 0.0, 0.0)


def test_plaquette_constraint_examples():
    p = unit_clique(4)
    tile = ((0, 2), (0, 3), (1, 2), (1, 3))
    assert plaquette_constraint(p, tile, 2.0, 1.1) == pytest.approx(6.4)
    assert is_valid_plaquette(tile)
    assert not is_valid_plaquette(((0, 1), (0, 2), (1, 2), (2, 3)))
    with pytest.raises(ParityStructureError):
        plaquette_constraint(p, ((0, 1), (0, 2), (1, 2), (2, 3)), 1.0, 1.0)
    # boundary triangle with an ancilla corner
    assert plaquette_constraint(p, ((0, 1), (0, 2), (1, 2), None), 1.0, 1.0) == pytest.approx(4.0)


def test_paqo_default_offset():
    assert paqo_params(10) == (2.0, 1.1)


def test_square_sizes_and_k3():
    phys, emb = embed_square(unit_clique(3))
    assert phys.num_spins == 6
    chain_edges = [J for (a, b), J in phys.two_local.items()
                   if any(a in ch and b in ch for ch in emb.chains)]
    assert len(chain_edges) == 3 and all(J == pytest.approx(-2.2) for J in chain_edges)
    assert len(phys.two_local) - len(chain_edges) == 3
    assert embed_square(unit_clique(6))[0].num_spins == 30
    e_log, _ = brute_force_gs(unit_clique(3))
    e_phys, _ = brute_force_gs(phys)
    assert e_phys == pytest.approx(-7.6)
    assert physical_gs_energy(emb, unit_clique(3), e_log, verify=True) == pytest.approx(-7.6)


def test_chimera_layouts():
    phys, emb = embed_chimera(unit_clique(4), c=4)
    assert phys.num_spins == 8 and all(len(ch) == 2 for ch in emb.chains)
    assert {lab[:2] for lab in emb.spin_labels} == {(0, 0)}
    phys, emb = embed_chimera(unit_clique(6), c=3)
    assert phys.num_spins == 18 and all(len(ch) == 3 for ch in emb.chains)


def test_chimera_graph_adjacency():
    g = ChimeraGraph(2, 2, 4)
    assert g.adjacent((0, 0, 0, 1), (0, 0, 1, 3))
    assert g.adjacent((0, 0, 0, 2), (1, 0, 0, 2))
    assert g.adjacent((0, 0, 1, 2), (0, 1, 1, 2))
    assert not g.adjacent((0, 0, 0, 2), (0, 1, 0, 2))
    assert not g.adjacent((0, 0, 0, 1), (0, 0, 0, 2))


def test_paqo_counts():
    phys, emb = embed_paqo(unit_clique(4))
    assert phys.num_spins == 6 and len(emb.plaquettes) == 3
    phys, emb = embed_paqo(unit_clique(6))
    assert phys.num_spins == 15 and len(emb.plaquettes) == 10


def test_embed_config_examples():
    _, emb = embed_square(unit_clique(3))
    out = embed_config(emb, [1, -1, 1])
    assert [tuple(out[list(ch)]) for ch in emb.chains] == [(1, 1), (-1, -1), (1, 1)]
    _, emb = embed_paqo(unit_clique(3))
    out = embed_config(emb, [1, -1, 1])
    assert [out[emb.pair_index[p]] for p in ((0, 1), (0, 2), (1, 2))] == [-1, 1, -1]


def test_paqo_zero_couplers_ground_energy():
    p = LogicalProblem(4, {(0, 1): 0.0})
    phys, emb = embed_paqo(p, omega=1.0, gamma=0.0)
    assert brute_force_gs(phys)[0] == pytest.approx(-3.0)
    assert physical_gs_energy(emb, p, 0.0) == pytest.approx(-3.0)


@pytest.mark.parametrize("scheme", ["square", "chimera", "paqo", "direct"])
@pytest.mark.parametrize("n", [3, 5, 8, 13])
def test_validate_generated(scheme, n):
    p = generate_maxcut(n, 0.5, n)
    phys, emb = embed(p, scheme)
    report = validate_embedding(emb, phys, p)
    assert report.ok, report.violations


@pytest.mark.parametrize("scheme", ["square", "chimera", "paqo"])
def test_validate_full_range_sparse(scheme):
    for n in (20, 27, 35):
        p = generate_maxcut(n, 0.3, 1)
        phys, emb = embed(p, scheme)
        assert validate_embedding(emb, phys, p).ok


def test_validate_rejects_duplicate_carrier():
    p = unit_clique(4)
    phys, emb = embed_square(p)
    pairs = list(emb.coupler_assignment)
    bad = dict(emb.coupler_assignment)
    bad[pairs[1]] = bad[pairs[0]]
    broken = EmbeddingMap(**{**emb.__dict__, "coupler_assignment": bad})
    assert not validate_embedding(broken, phys, p).ok


def test_validate_rejects_odd_tile():
    p = unit_clique(5)
    phys, emb = embed_paqo(p)
    plaq = list(emb.plaquettes)
    plaq[1] = ((0, 2), (0, 3), (1, 2), (2, 3))
    broken = EmbeddingMap(**{**emb.__dict__, "plaquettes": tuple(plaq)})
    assert not validate_embedding(broken, phys, p).ok


@pytest.mark.parametrize("scheme", ["square", "chimera", "paqo"])
def test_energy_identity(scheme):
    p = generate_gaussian_sk(6, 0.0, 1.0, 3)
    phys, emb = embed(p, scheme)
    offset = emb.constant_offset()
    for bits in itertools.product((1, -1), repeat=p.n):
        s = np.array(bits)
        assert energy(phys, embed_config(emb, s)) == pytest.approx(energy(p, s) + offset, abs=1e-9)


def test_constraint_too_weak_detected():
    p = unit_clique(3)
    _, emb = embed_square(p, omega=0.1, gamma=0.0)
    e_log, _ = brute_force_gs(p)
    with pytest.raises(ConstraintTooWeakError):
        physical_gs_energy(emb, p, e_log, verify=True)


@pytest.mark.parametrize("scheme", ["square", "chimera", "paqo"])
def test_serialization_round_trip(tmp_path, scheme):
    p = generate_maxcut(7, 0.5, 2)
    phys, emb = embed(p, scheme)
    path = tmp_path / "e.json"
    write_embedding(phys, emb, path)
    phys2, emb2 = read_embedding(path)
    assert phys2.num_spins == phys.num_spins
    assert phys2.two_local == phys.two_local and phys2.four_local == phys.four_local
    assert phys2.one_local == phys.one_local
    assert emb2.chains == emb.chains and emb2.pair_index == emb.pair_index
    assert validate_embedding(emb2, phys2, p).ok
    again = embedding_from_dict(embedding_to_dict(phys2, emb2))
    assert again[1].plaquette_terms == emb.plaquette_terms


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 9), st.integers(0, 10_000), st.sampled_from(["square", "chimera", "paqo"]))
def test_embedded_energy_property(n, seed, scheme):
    p = generate_gaussian_sk(n, 0.0, 1.0, seed)
    phys, emb = embed(p, scheme)
    rng = np.random.default_rng(seed)
    s = rng.choice([-1, 1], n)
    assert math.isclose(energy(phys, embed_config(emb, s)), energy(p, s) + emb.constant_offset(),
                        rel_tol=1e-12, abs_tol=1e-9)

import math

import numpy as np
import pytest

from annealbench.embed import embed_paqo, embed_square
from annealbench.model import LogicalProblem, energy
from annealbench.oracle import (
    CapacityError,
    MAX_ENUMERATION_SPINS,
    avoided_crossing_demo,
    basis_spins,
    broken_constraint_gain,
    brute_force_gs,
    build_abc_instance,
    chain_gap_ed,
    chain_gap_estimate,
    designated_plaquette,
    ed_spectrum,
    ferro_chain,
    ground_state,
    min_constraint_map,
    min_gap,
    single_break,
    single_break_threshold,
    SpectrumResult,
)


def test_brute_force_examples():
    k3 = LogicalProblem(3, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0})
    assert brute_force_gs(k3) == (-1.0, 6)
    assert brute_force_gs(LogicalProblem(2, {(0, 1): -1.0})) == (-1.0, 2)
    phys, _ = embed_square(k3)
    assert brute_force_gs(phys)[0] == pytest.approx(-7.6)
    assert energy(k3, ground_state(k3)) == -1.0


def test_enumeration_capacity():
    big = LogicalProblem(MAX_ENUMERATION_SPINS + 1, {(0, 1): 1.0})
    with pytest.raises(CapacityError):
        brute_force_gs(big)


def test_abc_instances():
    p = build_abc_instance(2, 2, 2)
    assert p.n == 6 and len(p.couplers) == 15
    gs = ground_state(p)
    groups = [gs[0:2], gs[2:4], gs[4:6]]
    assert all(abs(g.sum()) == 2 for g in groups)
    signs = [g[0] for g in groups]
    parallel = sum(signs[a] == signs[b] for a, b in ((0, 1), (0, 2), (1, 2)))
    assert parallel == 1
    e9, _ = brute_force_gs(build_abc_instance(3, 3, 3))
    assert e9 == -18.0


def test_designated_plaquette_position():
    _, emb = embed_paqo(build_abc_instance(2, 2, 2))
    l = designated_plaquette(2, 2, 2)
    assert emb.plaquettes[l] == ((1, 3), (1, 4), (2, 3), (2, 4))
    l = designated_plaquette(1, 1, 3)
    assert emb.plaquettes[l] == ((0, 1), (0, 2), (1, 2), None)


def test_gain_values():
    assert broken_constraint_gain(2) == pytest.approx(4.0)
    assert broken_constraint_gain(2, mode="block") == pytest.approx(4.0)
    assert broken_constraint_gain(3) == pytest.approx(9.0)


def test_full_and_block_agree_small():
    for sizes in ((1, 2, 3), (2, 1, 3), (3, 2, 1), (1, 1, 4)):
        assert single_break_threshold(*sizes, "full") == pytest.approx(single_break_threshold(*sizes, "block"))


def test_single_break_state_is_physical_ground_state():
    sb = single_break(2, 2, 2, "full")
    phys, emb = embed_paqo(sb.problem, omega=0.95 * sb.threshold, gamma=0.0)
    e, _ = brute_force_gs(phys)
    assert e == pytest.approx(energy(phys, sb.broken_state))
    phys, _ = embed_paqo(sb.problem, omega=1.05 * sb.threshold, gamma=0.0)
    assert brute_force_gs(phys)[0] == pytest.approx(energy(phys, sb.valid_state))


def test_constraint_map_shape():
    cmap = min_constraint_map(7)
    assert cmap.grid.shape == (5, 6)
    assert len(cmap.splits) == 15
    border = cmap.border_mask()
    inner = cmap.grid[~border & ~np.isnan(cmap.grid)]
    outer = cmap.grid[border & ~np.isnan(cmap.grid)]
    assert inner.size and outer.size
    assert inner.max() > outer.max()


def test_basis_and_spectrum_symmetry():
    s = basis_spins(2)
    assert s.tolist() == [[1, 1], [-1, 1], [1, -1], [-1, -1]]
    spec = ed_spectrum(ferro_chain(3), 1.0, [0.0, 0.5, 1.0])
    assert np.allclose(spec.eigenvalues[0], [-3, -1, -1, -1, 1, 1, 1, 3])
    assert spec.gap[-1] == pytest.approx(0.0)
    assert np.allclose(spec.gs_amplitudes.sum(axis=1), 1.0)


def test_min_gap_examples():
    spec = SpectrumResult(np.array([0.0, 0.5, 1.0]), np.zeros((3, 2)), np.array([3.0, 1.0, 2.0]), np.zeros((3, 2)))
    assert min_gap(spec) == (0.5, 1.0)
    spec = SpectrumResult(np.array([0.0, 0.5, 1.0]), np.zeros((3, 2)), np.array([3.0, 2.0, 1.0]), np.zeros((3, 2)))
    assert min_gap(spec) == (1.0, 1.0)


def test_chain_gap():
    assert chain_gap_estimate(0.2, 1.0, 5) == pytest.approx(3.2e-4)
    assert chain_gap_estimate(0.1, 1.0, 2) == pytest.approx(0.01)
    ed = chain_gap_ed(0.1, 1.0, 2)
    assert ed == pytest.approx(0.019804, abs=1e-6)
    assert 0.5 < ed / 0.01 < 2.0 + 1e-9


def test_avoided_crossing_demo():
    spec, problem, fields = avoided_crossing_demo(801)
    t_star, gap = min_gap(spec)
    assert 0.05 < t_star < 0.95
    assert gap < 0.25 * spec.gap[-1]
    before = int(np.argmax(spec.gs_amplitudes[np.searchsorted(spec.s_grid, t_star - 0.05)]))
    after = int(np.argmax(spec.gs_amplitudes[-1]))
    assert before != after

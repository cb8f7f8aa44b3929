import math

import numpy as np
import pytest

from annealbench.embed import embed
from annealbench.model import InvalidInputError, LogicalProblem, generate_maxcut
from annealbench.oracle import brute_force_gs
from annealbench.sqa import (
    SqaParams,
    SqaResult,
    coupling_schedule,
    exact_action_distribution,
    gamma_schedule,
    run_sqa,
    slice_coupling,
    stationary_histogram,
    success_probability,
)

FAST = SqaParams(trotter_slices=16, beta=16.0, anneal_sweeps=200, seed=3)


def test_schedule_examples():
    p = SqaParams()
    assert gamma_schedule(0.0, p) == pytest.approx(0.5)
    assert gamma_schedule(1.0, p) == pytest.approx(0.001)
    assert gamma_schedule(0.5, p) == pytest.approx(0.12575)
    with pytest.raises(InvalidInputError):
        gamma_schedule(1.5, p)


def test_slice_coupling_examples():
    assert slice_coupling(1024, 0.5, 1024) == pytest.approx(0.5 * math.log(1 / math.tanh(0.5)), rel=1e-12)
    assert slice_coupling(1024, 0.5, 1024) == pytest.approx(0.3860, abs=5e-5)
    assert slice_coupling(1024, 0.001, 1024) == pytest.approx(3.4539, abs=5e-5)
    # far tail stays finite and positive
    assert 0 < slice_coupling(1.0, 50.0, 1) < 1e-40
    assert np.isfinite(slice_coupling(1.0, 1e-200, 1))


def test_coupling_schedule_monotone():
    js = coupling_schedule(SqaParams(anneal_sweeps=50))
    assert js.shape == (50,) and np.all(np.diff(js) > 0)
    assert coupling_schedule(SqaParams(anneal_sweeps=1))[0] == pytest.approx(slice_coupling(1024, 0.001, 1024))


def test_params_validation():
    with pytest.raises(InvalidInputError):
        SqaParams(trotter_slices=1)
    with pytest.raises(InvalidInputError):
        SqaParams(gamma_start=0.001, gamma_end=0.5)
    with pytest.raises(InvalidInputError):
        SqaParams(anneal_sweeps=0)


def test_single_sweep_runs():
    p = generate_maxcut(6, 0.5, 0)
    e, _ = brute_force_gs(p)
    r = run_sqa(p, FAST.with_(anneal_sweeps=1), e)
    assert 0.0 <= r.gs_hit_fraction <= 1.0


def test_deterministic():
    p = generate_maxcut(8, 0.5, 1)
    e, _ = brute_force_gs(p)
    a = run_sqa(p, FAST, e, keep_configs=True)
    b = run_sqa(p, FAST, e, keep_configs=True)
    assert np.array_equal(a.energies, b.energies) and np.array_equal(a.configs, b.configs)
    early = FAST.with_(anneal_sweeps=2)
    c = run_sqa(p, early, e, keep_configs=True)
    d = run_sqa(p, early.with_(seed=4), e, keep_configs=True)
    assert not np.array_equal(c.configs, d.configs)


def test_ferromagnet_pair_found():
    p = LogicalProblem(2, {(0, 1): -1.0})
    hits = [run_sqa(p, SqaParams(64, 64.0, anneal_sweeps=2000, seed=s), -1.0).gs_hit_fraction for s in range(10)]
    assert np.mean(hits) >= 0.95


@pytest.mark.parametrize("scheme", ["direct", "square", "paqo"])
def test_audit_bookkeeping(scheme):
    p = generate_maxcut(7, 0.5, 2)
    phys, _ = embed(p, scheme)
    r = run_sqa(phys, FAST.with_(anneal_sweeps=400), None, audit=True)
    assert r.audit_error < 1e-9
    assert math.isnan(r.gs_hit_fraction)


def test_detailed_balance_two_spins():
    p = LogicalProblem(2, {(0, 1): 0.7})
    beta, gamma, M = 2.0, 0.6, 3
    exact = exact_action_distribution(p, beta, gamma, M)
    emp = stationary_histogram(p, beta, gamma, M, sweeps=400_000, seed=5)
    assert np.max(np.abs(emp - exact)) < 0.01


def test_detailed_balance_with_plaquette_terms():
    from annealbench.model import PhysicalProblem

    p = PhysicalProblem(4, {0: 0.3, 2: -0.2}, {}, {(0, 1, 2, 3): -0.8, (1, 2, 3): 0.4}, scheme="paqo")
    beta, gamma, M = 1.5, 0.8, 2
    exact = exact_action_distribution(p, beta, gamma, M)
    emp = stationary_histogram(p, beta, gamma, M, sweeps=300_000, seed=9)
    assert np.max(np.abs(emp - exact)) < 0.01


def test_histogram_capacity():
    with pytest.raises(InvalidInputError):
        stationary_histogram(generate_maxcut(6, 0.5, 0), 1.0, 0.5, 4, 10)


def test_success_probability():
    mk = lambda f: SqaResult(np.zeros(1), f, 1)
    assert success_probability([mk(0.2), mk(0.4)]) == pytest.approx(0.3)
    assert success_probability([mk(0.0), mk(0.0)]) == 0.0
    assert success_probability([mk(0.7)]) == 0.7
    with pytest.raises(InvalidInputError):
        success_probability([])

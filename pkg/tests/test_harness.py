import json
import math
import random

import numpy as np
import pytest

from annealbench.harness import (
    ExperimentPlan,
    WorkItem,
    derive_seed,
    deterministic_view,
    execute_plan,
    grid_size,
    make_instance,
    full_anneal_times,
    plan_grid,
    read_records,
    run_item,
    run_plan,
    summarize,
    write_records,
    write_report,
)
from annealbench.model import InvalidInputError
from annealbench.sqa import SqaParams

TINY_SQA = SqaParams(trotter_slices=8, beta=8.0)


def tiny_plan(**kw):
    base = dict(sizes=(4, 5), instances_per_size=2, schemes=("direct", "square", "paqo"),
                anneal_times=(2, 20), repetitions=2, sqa=TINY_SQA, master_seed=11)
    base.update(kw)
    return ExperimentPlan(**base)


def test_full_grid_counts():
    times = full_anneal_times()
    assert len(times) == 29 and times[0] == 5 and times[-1] == 28000
    plan = ExperimentPlan(sizes=tuple(range(5, 36)), instance_types=("maxcut-0.3", "maxcut-0.5", "gaussian"),
                          anneal_times=tuple(times))
    assert grid_size(plan) == 9_709_200
    desk = ExperimentPlan(sizes=(5, 6, 7, 8, 9), instances_per_size=10, schemes=("direct", "paqo"),
                          anneal_times=tuple(range(1, 11)), repetitions=10)
    assert len(plan_grid(desk)) == 10_000


def test_pruning_keeps_smallest_corner():
    plan = ExperimentPlan(sizes=tuple(range(5, 14)), instances_per_size=1, schemes=("direct",),
                          anneal_times=tuple(range(1, 11)), repetitions=1, prune=True)
    items = plan_grid(plan)
    assert len(items) < grid_size(plan)
    assert any(it.n == 5 and it.T == 1 for it in items)
    assert not any(it.n == 5 and it.T == 10 for it in items)
    assert not any(it.n == 13 and it.T == 1 for it in items)


def test_empty_plan_rejected():
    with pytest.raises(InvalidInputError):
        ExperimentPlan(sizes=())


def test_seed_derivation_stable():
    assert derive_seed(0, "a") == derive_seed(0, "a")
    assert derive_seed(0, "a") != derive_seed(1, "a")
    assert 0 <= derive_seed(5, "x") < 2**63
    a = make_instance("maxcut-0.3", 9, 2, 0)
    b = make_instance("maxcut-0.3", 9, 2, 0)
    assert a.couplers == b.couplers


def test_run_item_reproducible():
    plan = tiny_plan()
    item = WorkItem("maxcut-0.3", 5, 1, "paqo", 20, 1)
    a, b = run_item(plan, item), run_item(plan, item)
    assert deterministic_view(a) == deterministic_view(b)
    assert a["seed"] == derive_seed(plan.master_seed, item.key)
    assert a["error"] is None and 0 <= a["logical_hit_fraction"] <= 1


def test_workers_and_resume(tmp_path):
    plan = tiny_plan()
    one = run_plan(plan, tmp_path / "one.jsonl", workers=1)
    many = run_plan(plan, tmp_path / "many.jsonl", workers=3)
    key = lambda r: r["key"]
    assert [deterministic_view(r) for r in sorted(one, key=key)] == \
        [deterministic_view(r) for r in sorted(many, key=key)]
    assert len(one) == len(plan_grid(plan))
    again = list(execute_plan(plan, tmp_path / "one.jsonl", resume=True))
    assert again == []


def test_partial_resume(tmp_path):
    plan = tiny_plan(schemes=("direct",))
    out = tmp_path / "r.jsonl"
    full = run_plan(plan, tmp_path / "full.jsonl")
    write_records(full[:3], out)
    new = list(execute_plan(plan, out, resume=True))
    assert len(new) == len(full) - 3
    merged = sorted(read_records(out), key=lambda r: r["key"])
    assert [deterministic_view(r) for r in merged] == \
        [deterministic_view(r) for r in sorted(full, key=lambda r: r["key"])]


def test_failure_is_recorded(tmp_path):
    plan = tiny_plan(sizes=(4, 31), instances_per_size=1, schemes=("direct",), anneal_times=(2,), repetitions=1)
    records = run_plan(plan, tmp_path / "f.jsonl")
    bad = [r for r in records if r["error"]]
    good = [r for r in records if not r["error"]]
    assert len(bad) == 1 and bad[0]["n"] == 31 and "CapacityError" in bad[0]["error"]
    assert len(good) == 1


def test_jsonl_round_trip_and_order_invariance(tmp_path):
    records = run_plan(tiny_plan(), tmp_path / "a.jsonl")
    path = tmp_path / "b.jsonl"
    write_records(records, path, append=False)
    a = summarize(records)
    b = summarize(read_records(path))
    shuffled = list(records)
    random.Random(3).shuffle(shuffled)
    c = summarize(shuffled)
    assert a.per_instance == b.per_instance == c.per_instance
    assert a.per_size == c.per_size and a.fits == c.fits


def synthetic_records(tau_by_instance, times, scheme="direct"):
    out = []
    for iid, (n, tau) in tau_by_instance.items():
        for T in times:
            p = 1 - math.exp(-((T / tau) ** 2))
            out.append({"key": f"{iid}/{scheme}/T{T}/r0", "instance_id": iid, "instance_type": "maxcut-0.3",
                        "n": n, "index": 0, "scheme": scheme, "T": T, "repetition": 0, "seed": 0,
                        "gs_hit_fraction": p, "logical_hit_fraction": p, "logical_hit": True, "error": None})
    return out


def test_summarize_synthetic_optimum():
    times = [int(t) for t in np.unique(np.round(np.geomspace(1, 5000, 30)).astype(int))]
    taus = {"maxcut-0.3/n5/i0": (5, 40.0), "maxcut-0.3/n7/i0": (7, 400.0)}
    report = summarize(synthetic_records(taus, times))
    for row in report.per_instance:
        t_star = taus[row["instance_id"]][1] * math.sqrt(math.log(10))
        k = times.index(int(row["T_L"]))
        assert times[max(0, k - 1)] <= t_star <= times[min(len(times) - 1, k + 1)]
    assert report.fits == []


def test_fit_rows_only_for_present_schemes(tmp_path):
    times = [1, 3, 10, 30, 100, 300, 1000]
    direct, square = {}, {}
    for n in (5, 6, 7, 8):
        direct[f"maxcut-0.3/n{n}/i0"] = (n, 2.0 * n)
        square[f"maxcut-0.3/n{n}/i0"] = (n, 0.5 * n**2)
    recs = synthetic_records(direct, times) + synthetic_records(square, times, "square")
    report = summarize(recs)
    assert [r["algorithm"] for r in report.fits] == ["square"]
    assert report.fits[0]["available"] and report.fits[0]["m_L"] > 1
    manifest = write_report(report, tmp_path)
    assert (tmp_path / "fits.csv").exists() and manifest["fit_rows"] == 1
    json.loads((tmp_path / "manifest.json").read_text())


def test_too_few_sizes_marks_fit_unavailable():
    times = [1, 10, 100]
    recs = synthetic_records({"maxcut-0.3/n5/i0": (5, 10.0)}, times) + \
        synthetic_records({"maxcut-0.3/n5/i0": (5, 50.0)}, times, "paqo")
    assert summarize(recs).fits[0]["available"] is False


def test_plan_round_trip():
    plan = tiny_plan()
    assert ExperimentPlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan

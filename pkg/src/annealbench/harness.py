"""Experiment grids, execution, persistence and summaries.

A work item is one SQA run of one instance under one scheme at one anneal
time and repetition. Item seeds are derived from the plan's master seed and
the item key with BLAKE2b (:func:`derive_seed`), so any record can be
regenerated in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .analysis import (
    DEFAULT_TARGET,
    REFERENCE_FITS,
    TtsCurve,
    aggregate,
    loglog_fit,
    optimal_tts,
    size_medians,
)
from .decode import BpParams, decode
from .embed import embed, physical_gs_energy
from .model import (
    InvalidInputError,
    LogicalProblem,
    energy,
    energies_match,
    generate_gaussian_sk,
    generate_maxcut,
)
from .oracle import brute_force_gs
from .sqa import SqaParams, run_sqa

log = logging.getLogger(__name__)

INSTANCE_TYPES = ("maxcut-0.3", "maxcut-0.5", "gaussian")


def full_anneal_times(count: int = 29, lo: float = 5, hi: float = 28000) -> list[int]:
    """Log-spaced integer sweep counts from ``lo`` to ``hi``."""
    times = np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))
    return [int(t) for t in times]


def desk_anneal_times(count: int = 10, lo: float = 1, hi: float = 5000) -> list[int]:
    return full_anneal_times(count, lo, hi)


def derive_seed(master_seed: int, key: str) -> int:
    digest = hashlib.blake2b(f"{master_seed}:{key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


@dataclass(frozen=True)
class ExperimentPlan:
    sizes: tuple
    instance_types: tuple = ("maxcut-0.3",)
    instances_per_size: int = 30
    schemes: tuple = ("direct", "square", "chimera", "paqo")
    anneal_times: tuple = tuple(full_anneal_times())
    repetitions: int = 30
    sqa: SqaParams = SqaParams()
    omega: Optional[float] = None
    gamma_sum: float = 1.1
    chimera_c: int = 4
    prune: bool = False
    master_seed: int = 0

    def __post_init__(self):
        for name in ("sizes", "instance_types", "schemes", "anneal_times"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.sizes or not self.instance_types or not self.schemes or not self.anneal_times:
            raise InvalidInputError("every plan dimension needs at least one entry")
        if self.instances_per_size < 1 or self.repetitions < 1:
            raise InvalidInputError("instance and repetition counts must be >= 1")
        if any(b <= a for a, b in zip(self.anneal_times, self.anneal_times[1:])):
            raise InvalidInputError("anneal times must be strictly increasing")
        for t in self.instance_types:
            if t not in INSTANCE_TYPES:
                raise InvalidInputError(f"unknown instance type {t!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sqa"] = asdict(self.sqa)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        d["sqa"] = SqaParams(**d["sqa"])
        return cls(**d)


def desk_plan(instance_type: str = "maxcut-0.3", master_seed: int = 0) -> ExperimentPlan:
    """Reduced study that runs in well under an hour on one core.

    Short imaginary-time paths (``M = beta = 32``) and a grid starting at one
    sweep keep the direct TTS resolvable at the smallest sizes.
    """
    return ExperimentPlan(
        sizes=tuple(range(5, 14)),
        instance_types=(instance_type,),
        instances_per_size=10,
        anneal_times=tuple(desk_anneal_times()),
        repetitions=10,
        sqa=SqaParams(trotter_slices=32, beta=32.0),
        master_seed=master_seed,
    )


@dataclass(frozen=True)
class WorkItem:
    instance_type: str
    n: int
    index: int
    scheme: str
    T: int
    repetition: int

    @property
    def instance_id(self) -> str:
        return f"{self.instance_type}/n{self.n}/i{self.index}"

    @property
    def key(self) -> str:
        return f"{self.instance_id}/{self.scheme}/T{self.T}/r{self.repetition}"


def _terciles(values: Sequence) -> tuple[set, set]:
    ordered = sorted(values)
    k = len(ordered) // 3
    if k == 0:
        return set(), set()
    return set(ordered[:k]), set(ordered[-k:])


def plan_grid(plan: ExperimentPlan) -> list[WorkItem]:
    """Work items in a fixed order, optionally dropping the (small size, long
    anneal) and (large size, short anneal) tercile corners."""
    small_n, large_n = _terciles(plan.sizes)
    short_T, long_T = _terciles(plan.anneal_times)
    items = []
    for itype in plan.instance_types:
        for n in plan.sizes:
            for idx in range(plan.instances_per_size):
                for scheme in plan.schemes:
                    for T in plan.anneal_times:
                        if plan.prune and ((n in small_n and T in long_T) or (n in large_n and T in short_T)):
                            continue
                        for rep in range(plan.repetitions):
                            items.append(WorkItem(itype, n, idx, scheme, T, rep))
    if not items:
        raise InvalidInputError("plan has no work items")
    return items


def grid_size(plan: ExperimentPlan) -> int:
    """Number of items before pruning."""
    return (len(plan.instance_types) * len(plan.sizes) * plan.instances_per_size * len(plan.schemes)
            * len(plan.anneal_times) * plan.repetitions)


def make_instance(instance_type: str, n: int, index: int, master_seed: int) -> LogicalProblem:
    seed = derive_seed(master_seed, f"instance/{instance_type}/n{n}/i{index}")
    if instance_type == "gaussian":
        problem = generate_gaussian_sk(n, 0.0, 1.0, seed)
    else:
        problem = generate_maxcut(n, float(instance_type.split("-")[1]), seed)
    return LogicalProblem(problem.n, problem.couplers, f"{instance_type}/n{n}/i{index}", seed)


@lru_cache(maxsize=256)
def _prepared(instance_type, n, index, scheme, master_seed, omega, gamma_sum, chimera_c):
    logical = make_instance(instance_type, n, index, master_seed)
    gs_logical, _ = brute_force_gs(logical)
    physical, emb = embed(logical, scheme, omega, gamma_sum, chimera_c)
    gs_physical = physical_gs_energy(emb, logical, gs_logical)
    return logical, physical, emb, gs_logical, gs_physical


def run_item(plan: ExperimentPlan, item: WorkItem) -> dict:
    """Execute one work item and return its record (a plain dict)."""
    seed = derive_seed(plan.master_seed, item.key)
    record = {
        "key": item.key,
        "instance_id": item.instance_id,
        "instance_type": item.instance_type,
        "n": item.n,
        "index": item.index,
        "scheme": item.scheme,
        "T": item.T,
        "repetition": item.repetition,
        "seed": seed,
    }
    start = time.perf_counter()
    try:
        logical, physical, emb, gs_logical, gs_physical = _prepared(
            item.instance_type, item.n, item.index, item.scheme, plan.master_seed,
            plan.omega, plan.gamma_sum, plan.chimera_c,
        )
        params = plan.sqa.with_(anneal_sweeps=item.T, seed=seed)
        result = run_sqa(physical, params, gs_physical, keep_configs=True)
        phys_hits = result.hits
        if item.scheme == "direct":
            log_hits = phys_hits.copy()
            best_hit = bool(phys_hits[int(np.argmin(result.energies))])
        else:
            log_hits, best_hit = _decoded_hits(result, emb, logical, gs_logical, phys_hits)
        record.update(
            num_spins=physical.num_spins,
            gs_hit_fraction=float(phys_hits.mean()),
            logical_hit_fraction=float(log_hits.mean()),
            logical_hit=best_hit,
            error=None,
        )
    except Exception as exc:  # recorded, the plan carries on
        record.update(num_spins=None, gs_hit_fraction=None, logical_hit_fraction=None,
                      logical_hit=None, error=f"{type(exc).__name__}: {exc}")
    record["wall_time"] = time.perf_counter() - start
    return record


def _decoded_hits(result, emb, logical, gs_logical, phys_hits):
    """Per-slice logical success: decoder output at the logical ground state,
    or the slice already at the physical ground state (trivially decodable)."""
    configs = result.configs
    unique, inverse = np.unique(configs, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    decoded_ok = np.array([energies_match(energy(logical, decode(row, emb)), gs_logical) for row in unique])
    hits = decoded_ok[inverse] | phys_hits
    best = int(np.argmin(result.energies))
    return hits, bool(decoded_ok[inverse[best]] or phys_hits[best])


def deterministic_view(record: dict) -> dict:
    """Record without the wall-clock diagnostic."""
    return {k: v for k, v in record.items() if k != "wall_time"}


def read_records(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_records(records: Iterable[dict], path, append: bool = True) -> None:
    with Path(path).open("a" if append else "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


_WORKER_PLAN: Optional[ExperimentPlan] = None


def _init_worker(plan_dict):
    global _WORKER_PLAN
    _WORKER_PLAN = ExperimentPlan.from_dict(plan_dict)


def _run_in_worker(item_tuple):
    return run_item(_WORKER_PLAN, WorkItem(*item_tuple))


def execute_plan(plan: ExperimentPlan, out_path=None, workers: int = 1, resume: bool = True,
                 progress: bool = False) -> Iterator[dict]:
    """Run every pending item, appending each record to ``out_path`` (JSONL).

    With ``resume`` keys already present in ``out_path`` are skipped. Records
    are yielded as they complete; their order depends on scheduling.
    """
    items = plan_grid(plan)
    done = set()
    if out_path is not None and resume:
        done = {r["key"] for r in read_records(out_path) if r.get("error") is None}
    elif out_path is not None:
        Path(out_path).write_text("")
    pending = [it for it in items if it.key not in done]
    log.info("%d items planned, %d pending", len(items), len(pending))
    sink = Path(out_path).open("a") if out_path is not None else None
    try:
        if workers <= 1:
            stream = (run_item(plan, it) for it in pending)
        else:
            pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(plan.to_dict(),))
            tuples = [(it.instance_type, it.n, it.index, it.scheme, it.T, it.repetition) for it in pending]
            stream = pool.map(_run_in_worker, tuples, chunksize=max(1, len(tuples) // (workers * 8) or 1))
        for count, rec in enumerate(stream, 1):
            if sink is not None:
                sink.write(json.dumps(rec, sort_keys=True) + "\n")
                sink.flush()
            if progress and count % 500 == 0:
                log.info("%d / %d items", count, len(pending))
            yield rec
        if workers > 1:
            pool.shutdown()
    finally:
        if sink is not None:
            sink.close()


def run_plan(plan: ExperimentPlan, out_path=None, workers: int = 1, resume: bool = True) -> list[dict]:
    list(execute_plan(plan, out_path, workers, resume))
    if out_path is not None:
        return read_records(out_path)
    raise InvalidInputError("run_plan needs an output path; use execute_plan to stream")


@dataclass
class Report:
    per_instance: list = field(default_factory=list)
    per_size: list = field(default_factory=list)
    overhead: list = field(default_factory=list)
    scatter: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)


def summarize(records: Sequence[dict], p_tar: float = DEFAULT_TARGET) -> Report:
    """TTS per instance and scheme, per-size aggregates, overheads and fits."""
    good = [r for r in records if r.get("error") is None]
    if not good:
        raise InvalidInputError("no successful records to summarize")
    # (instance, scheme) -> T -> list of (phys, logical) fractions
    grouped = defaultdict(lambda: defaultdict(list))
    meta = {}
    seen = set()
    for r in sorted(good, key=lambda r: r["key"]):
        if r["key"] in seen:
            continue
        seen.add(r["key"])
        grouped[(r["instance_id"], r["scheme"])][r["T"]].append((r["gs_hit_fraction"], r["logical_hit_fraction"]))
        meta[r["instance_id"]] = (r["instance_type"], r["n"])

    report = Report()
    s_table = {}
    for (iid, scheme), by_T in sorted(grouped.items()):
        times = sorted(by_T)
        p_phys = [float(np.mean([a for a, _ in by_T[T]])) for T in times]
        p_log = [float(np.mean([b for _, b in by_T[T]])) for T in times]
        phys = TtsCurve.from_probabilities(times, p_phys, p_tar, "physical")
        logi = TtsCurve.from_probabilities(times, p_log, p_tar, "logical")
        s_P, T_P = optimal_tts(phys)
        s_L, T_L = optimal_tts(logi)
        itype, n = meta[iid]
        report.curves[(iid, scheme)] = (phys, logi)
        s_table[(iid, scheme)] = (s_P, s_L)
        report.per_instance.append({
            "instance_id": iid, "instance_type": itype, "n": n, "scheme": scheme,
            "s_P": s_P, "T_P": T_P, "s_L": s_L, "T_L": T_L,
        })

    by_size = defaultdict(lambda: {"s_P": [], "s_L": []})
    for row in report.per_instance:
        by_size[(row["instance_type"], row["scheme"], row["n"])]["s_P"].append(row["s_P"])
        by_size[(row["instance_type"], row["scheme"], row["n"])]["s_L"].append(row["s_L"])
    for (itype, scheme, n), vals in sorted(by_size.items()):
        row = {"instance_type": itype, "scheme": scheme, "n": n, "instances": len(vals["s_L"])}
        for kind in ("s_P", "s_L"):
            finite = [v for v in vals[kind] if math.isfinite(v)]
            row[f"{kind}_infinite"] = len(vals[kind]) - len(finite)
            agg = aggregate(vals[kind]) if finite else None
            for stat in ("median", "q1", "q3", "p05", "p95"):
                row[f"{kind}_{stat}"] = getattr(agg, stat) if agg else math.inf
        report.per_size.append(row)

    for (iid, scheme), (s_P, s_L) in sorted(s_table.items()):
        if scheme == "direct" or (iid, "direct") not in s_table:
            continue
        d_P, d_L = s_table[(iid, "direct")]
        itype, n = meta[iid]
        report.overhead.append({
            "instance_id": iid, "instance_type": itype, "n": n, "scheme": scheme,
            "ratio_L": s_L / d_L, "ratio_P": s_P / d_P,
            "direct_s_L": d_L, "embedded_s_L": s_L, "embedded_s_P": s_P,
        })

    types = sorted({m[0] for m in meta.values()})
    schemes = sorted({k[1] for k in s_table})
    for itype in types:
        direct_L = {n: v["s_L"] for (t, s, n), v in by_size.items() if t == itype and s == "direct"}
        med_direct = size_medians(direct_L)
        for scheme in schemes:
            if scheme == "direct":
                continue
            row = {"algorithm": scheme, "problem_type": itype}
            for kind in ("L", "P"):
                emb_vals = {n: v[f"s_{kind}"] for (t, s, n), v in by_size.items() if t == itype and s == scheme}
                med_emb = size_medians(emb_vals)
                common = sorted(set(med_direct) & set(med_emb))
                for n in common:
                    if kind == "L":
                        report.scatter.append({
                            "instance_type": itype, "scheme": scheme, "n": n,
                            "direct_median": med_direct[n], "embedded_median": med_emb[n],
                        })
                try:
                    fit = loglog_fit([med_direct[n] for n in common], [med_emb[n] for n in common])
                    row.update({f"m_{kind}": fit.m, f"c_{kind}": fit.c_fit, f"r_{kind}": fit.r_corr})
                except InvalidInputError:
                    row.update({f"m_{kind}": None, f"c_{kind}": None, f"r_{kind}": None})
            row["available"] = row["m_L"] is not None
            ref = REFERENCE_FITS.get((scheme, itype), {})
            row["ref_m_L"], row["ref_m_P"] = ref.get("m_L"), ref.get("m_P")
            report.fits.append(row)
    return report


def _write_csv(path: Path, rows: list, columns: Optional[list] = None):
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


FIT_COLUMNS = ["algorithm", "problem_type", "m_L", "c_L", "r_L", "m_P", "c_P", "r_P", "available",
               "ref_m_L", "ref_m_P"]


def write_report(report: Report, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "per_instance": "per_instance.csv",
        "per_size": "per_size.csv",
        "overhead": "overhead.csv",
        "scatter": "scatter.csv",
        "fits": "fits.csv",
    }
    _write_csv(out / files["per_instance"], report.per_instance)
    _write_csv(out / files["per_size"], report.per_size)
    _write_csv(out / files["overhead"], report.overhead)
    _write_csv(out / files["scatter"], report.scatter)
    _write_csv(out / files["fits"], report.fits, FIT_COLUMNS)
    curve_rows = []
    for (iid, scheme), curves in sorted(report.curves.items()):
        for curve in curves:
            for T, p, s in curve.points:
                curve_rows.append({"instance_id": iid, "scheme": scheme, "kind": curve.kind, "T": T, "p_gs": p, "s": s})
    files["curves"] = "curves.csv"
    _write_csv(out / files["curves"], curve_rows, ["instance_id", "scheme", "kind", "T", "p_gs", "s"])
    manifest = {"files": files, "instances": len({r["instance_id"] for r in report.per_instance}),
                "fit_rows": len(report.fits)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest

"""Command line entry point (``annealbench``).

Every flag can also be set through an environment variable named
``ANNEALBENCH_<FLAG>`` (upper case, dashes as underscores); an explicit flag
on the command line wins over the environment.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, oracle
from .analysis import DEFAULT_TARGET
from .embed import embed, validate_embedding, write_embedding
from .model import SCHEMES, InvalidInputError, ProblemParseError, read_problem, write_problem
from .sqa import SqaParams

ENV_PREFIX = "ANNEALBENCH_"


def _env_default(flag: str, fallback):
    value = os.environ.get(ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper())
    return fallback if value is None else value


def _parse_sizes(text: str) -> tuple:
    sizes = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            sizes.extend(range(int(lo), int(hi) + 1))
        elif part:
            sizes.append(int(part))
    if not sizes:
        raise InvalidInputError("no sizes given")
    return tuple(sizes)


def _parse_times(text: str) -> tuple:
    text = str(text).strip()
    if text == "full":
        return tuple(harness.full_anneal_times())
    if text == "desk":
        return tuple(harness.desk_anneal_times())
    if text.startswith("geom:"):
        lo, hi, count = text[5:].split(":")
        return tuple(harness.full_anneal_times(int(count), float(lo), float(hi)))
    return tuple(sorted({int(t) for t in text.split(",") if t.strip()}))


def _instance_type(kind: str, p) -> str:
    if kind == "maxcut":
        return f"maxcut-{float(p):g}"
    return kind


def _add(parser, flag, **kw):
    if "default" in kw:
        kw["default"] = _env_default(flag, kw["default"])
    parser.add_argument(flag, **kw)


def _add_problem_flags(p):
    _add(p, "--type", default="maxcut", help="maxcut, maxcut-0.3, maxcut-0.5 or gaussian")
    _add(p, "--p", type=float, default=0.3, help="MaxCut edge density when --type maxcut")
    _add(p, "--seed", type=int, default=0, help="master seed")


def _add_embed_flags(p):
    _add(p, "--omega", type=float, default=None, help="constraint offset (scheme default when omitted)")
    _add(p, "--gamma-sum", type=float, default=1.1, help="constraint slope on the coupling sum")


def _add_sqa_flags(p):
    _add(p, "--slices", type=int, default=1024, help="Trotter slices M")
    _add(p, "--beta", type=float, default=1024.0, help="inverse temperature")
    _add(p, "--gamma0", type=float, default=0.5, help="initial transverse field")
    _add(p, "--gammaf", type=float, default=0.001, help="final transverse field")


def _sqa_from(args) -> SqaParams:
    return SqaParams(trotter_slices=int(args.slices), beta=float(args.beta),
                     gamma_start=float(args.gamma0), gamma_end=float(args.gammaf))


def _plan_from(args) -> harness.ExperimentPlan:
    if args.desk:
        return harness.desk_plan(_instance_type(args.type, args.p), int(args.seed))
    return harness.ExperimentPlan(
        sizes=_parse_sizes(args.sizes),
        instance_types=(_instance_type(args.type, args.p),),
        instances_per_size=int(args.instances),
        schemes=tuple(s.strip() for s in str(args.schemes).split(",")),
        anneal_times=_parse_times(args.times),
        repetitions=int(args.reps),
        sqa=_sqa_from(args),
        omega=None if args.omega is None else float(args.omega),
        gamma_sum=float(args.gamma_sum),
        prune=bool(args.prune),
        master_seed=int(args.seed),
    )


def cmd_gen(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    itype = _instance_type(args.type, args.p)
    for n in _parse_sizes(args.sizes):
        for idx in range(int(args.instances)):
            problem = harness.make_instance(itype, n, idx, int(args.seed))
            path = out / f"{itype}_n{n}_i{idx}.json"
            write_problem(problem, path)
            print(path)


def cmd_embed(args):
    problem = read_problem(args.instance)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    for scheme in str(args.schemes).split(","):
        physical, emb = embed(problem, scheme.strip(), None if args.omega is None else float(args.omega),
                              float(args.gamma_sum))
        report = validate_embedding(emb, physical, problem)
        if not report.ok:
            raise InvalidInputError(f"{scheme}: {report.violations[:3]}")
        path = out / f"{stem}_{scheme.strip()}.json"
        write_embedding(physical, emb, path)
        print(f"{path} spins={physical.num_spins}")


def cmd_run(args):
    plan = harness.ExperimentPlan(
        sizes=(int(args.n),),
        instance_types=(_instance_type(args.type, args.p),),
        instances_per_size=int(args.index) + 1,
        schemes=(args.scheme,),
        anneal_times=(int(args.T),),
        repetitions=int(args.rep) + 1,
        sqa=_sqa_from(args),
        omega=None if args.omega is None else float(args.omega),
        gamma_sum=float(args.gamma_sum),
        master_seed=int(args.seed),
    )
    item = harness.WorkItem(plan.instance_types[0], int(args.n), int(args.index), args.scheme,
                            int(args.T), int(args.rep))
    print(json.dumps(harness.run_item(plan, item), sort_keys=True))


def cmd_sweep(args):
    plan = _plan_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan_path = out / "plan.json"
    if plan_path.exists() and args.resume:
        previous = json.loads(plan_path.read_text())
        if previous != json.loads(json.dumps(plan.to_dict())):
            raise InvalidInputError(f"{plan_path} describes a different plan; drop --resume or change --out")
    plan_path.write_text(json.dumps(plan.to_dict(), indent=1) + "\n")
    total = len(harness.plan_grid(plan))
    count = 0
    for rec in harness.execute_plan(plan, out / "records.jsonl", int(args.workers), bool(args.resume),
                                    progress=True):
        count += 1
        if rec.get("error"):
            logging.warning("%s failed: %s", rec["key"], rec["error"])
    print(f"{count} new records ({total} planned) in {out / 'records.jsonl'}")


def cmd_analyze(args):
    out = Path(args.out)
    records = harness.read_records(out / "records.jsonl")
    if not records:
        raise InvalidInputError(f"no records under {out}")
    report = harness.summarize(records, float(args.target))
    manifest = harness.write_report(report, out)
    print(json.dumps(manifest, indent=1))


def cmd_fit(args):
    out = Path(args.out)
    report = harness.summarize(harness.read_records(out / "records.jsonl"), float(args.target))
    writer = csv.DictWriter(sys.stdout, fieldnames=harness.FIT_COLUMNS, extrasaction="ignore")
    writer.writeheader()
    for row in report.fits:
        writer.writerow({k: (f"{v:.4g}" if isinstance(v, float) else v) for k, v in row.items()})


def cmd_spectrum(args):
    if args.instance:
        problem = read_problem(args.instance)
        fields = None
        grid = np.linspace(0.0, 1.0, int(args.points))
        spec = oracle.ed_spectrum(problem, float(args.driver), grid)
    else:
        spec, problem, fields = oracle.avoided_crossing_demo(int(args.points))
    k = min(int(args.levels), spec.eigenvalues.shape[1])
    # the eight basis states with the largest peak ground-state weight
    top = np.argsort(-spec.gs_amplitudes.max(axis=0), kind="stable")[:8]
    n = problem.n
    names = ["".join("d" if (b >> i) & 1 else "u" for i in range(n)) for b in top]
    header = ["t"] + [f"E{i}" for i in range(k)] + ["gap"] + [f"p_{s}" for s in names]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow(header)
    for r, t in enumerate(spec.s_grid):
        writer.writerow([f"{t:.6g}"] + [f"{e:.10g}" for e in spec.eigenvalues[r, :k]]
                        + [f"{spec.gap[r]:.10g}"] + [f"{spec.gs_amplitudes[r, b]:.8g}" for b in top])
    if args.out:
        out.close()
        t_star, gap = oracle.min_gap(spec)
        print(f"t*={t_star:.4f} gap={gap:.4g} -> {args.out}")


def cmd_appendix_a(args):
    cmap = oracle.min_constraint_map(int(args.n), args.mode)
    border = cmap.border_mask()
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow(["i", "j", "nA", "nB", "nC", "threshold_over_n2", "border"])
    for (i, j), (a, b, c) in sorted(cmap.splits.items()):
        writer.writerow([i, j, a, b, c, f"{cmap.grid[i, j]:.10g}", int(border[i, j])])
    if args.out:
        out.close()
        print(f"{len(cmap.splits)} tiles -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annealbench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write random instances as JSON")
    _add_problem_flags(p)
    _add(p, "--sizes", default="5-13")
    _add(p, "--instances", type=int, default=10)
    _add(p, "--out", default="instances")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("embed", help="embed an instance file with one or more schemes")
    p.add_argument("instance")
    _add(p, "--schemes", default="square,chimera,paqo")
    _add_embed_flags(p)
    _add(p, "--out", default="embeddings")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("run", help="execute a single work item and print its record")
    _add_problem_flags(p)
    _add_embed_flags(p)
    _add_sqa_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--scheme", choices=SCHEMES, default="direct")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--rep", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a full plan into OUT/records.jsonl")
    _add_problem_flags(p)
    _add_embed_flags(p)
    _add_sqa_flags(p)
    _add(p, "--sizes", default="5-13")
    _add(p, "--instances", type=int, default=10)
    _add(p, "--schemes", default=",".join(SCHEMES))
    _add(p, "--times", default="full", help="full, desk, geom:LO:HI:COUNT or a comma list")
    _add(p, "--reps", type=int, default=10)
    _add(p, "--workers", type=int, default=1)
    _add(p, "--out", default="results/sweep")
    p.add_argument("--resume", action="store_true", default=str(_env_default("--resume", "")).lower() in ("1", "true", "yes"))
    p.add_argument("--prune", action="store_true", help="drop the tercile corners of the grid")
    p.add_argument("--desk", action="store_true", help="use the built-in desk-scale plan")
    p.set_defaults(func=cmd_sweep)

    for name, func, helptext in (("analyze", cmd_analyze, "write summary CSVs and manifest"),
                                 ("fit", cmd_fit, "print the scaling-fit table")):
        p = sub.add_parser(name, help=helptext)
        _add(p, "--out", default="results/sweep")
        _add(p, "--target", type=float, default=DEFAULT_TARGET)
        p.set_defaults(func=func)

    p = sub.add_parser("spectrum", help="exact spectrum along the anneal as CSV")
    p.add_argument("--instance", help="instance JSON (default: built-in avoided-crossing demo)")
    _add(p, "--driver", type=float, default=1.0, help="initial transverse field for --instance")
    _add(p, "--points", type=int, default=201)
    _add(p, "--levels", type=int, default=4)
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("appendix-a", help="single-break constraint thresholds per tile as CSV")
    _add(p, "--n", type=int, default=9)
    _add(p, "--mode", choices=("block", "full"), default="block")
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_appendix_a)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InvalidInputError, ProblemParseError, OSError) as exc:
        print(f"annealbench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``coordmech gen | run | analyze | verify``.

Exit codes: 0 success, 1 usage, 2 verification or bound failure, 3 resource
cap exceeded, 4 dynamics did not converge within the move budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import (
    DEFAULT_CAP,
    SWEEP_COLUMNS,
    CapExceeded,
    csv_text,
    poa_pos_report,
    sweep,
)
from .dynamics import ORDERS, potential, run_dynamics
from .exact import format_decimal, format_fraction
from .instance import (
    GENERATORS,
    Instance,
    InstanceError,
    dumps_instance,
    generate_instance,
    load_assignment,
    load_instance,
    load_vector,
    makespan,
    min_weight_assignment,
)
from .mechanism import MechanismError, completion_time, load_mechanism, mechanism_from_descriptor
from .verify import SUITES, run_suites

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_CAP, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4

log = logging.getLogger("coordmech")


class UsageError(Exception):
    pass


def _meta(args, inst: Instance | None = None, mech=None) -> dict:
    out = {"tool": "coordmech", "version": __version__, "seed": args.seed}
    if mech is not None:
        out["mechanism"] = mech.descriptor()
    if inst is not None:
        out["instance_digest"] = inst.digest()
    return out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _gen_params(args) -> dict:
    params = {}
    for name in ("lo", "hi", "max_slowness", "p_available", "on_empty"):
        val = getattr(args, name, None)
        if val is not None:
            params[name] = val
    return params


def _add_gen_options(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--kind", choices=GENERATORS, required=required, help="generator family")
    p.add_argument("--n", type=int, default=4, help="number of jobs")
    p.add_argument("--m", type=int, default=3, help="number of machines")
    p.add_argument("--lo", type=int, help="smallest weight (or job size)")
    p.add_argument("--hi", type=int, help="largest weight (or job size)")
    p.add_argument("--max-slowness", type=int, help="restricted-related: largest machine factor")
    p.add_argument("--p-available", type=float, help="restricted-related: availability probability")
    p.add_argument("--on-empty", choices=("regenerate", "fail"), help="restricted-related: empty rows")


def _add_mech_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mech", default="dcoord", choices=("dcoord", "ccoord", "makespan"),
                   help="mechanism (ignored with --mech-file)")
    p.add_argument("--mech-file", help="JSON mechanism descriptor, e.g. a custom gamma table")
    p.add_argument("--d", default="auto", help="degree d >= 2, or 'auto' = max(2, ceil(log2 m))")


def _mechanism(args, inst: Instance, kind: str | None = None):
    if args.mech_file and kind is None:
        return load_mechanism(args.mech_file, inst.m)
    d = args.d if args.d == "auto" else int(args.d)
    return mechanism_from_descriptor({"kind": kind or args.mech, "d": d}, inst.m)


def _instance(args) -> tuple[Instance, str]:
    if args.instance and args.kind:
        raise UsageError("give either --instance or a generator (--kind), not both")
    if args.instance:
        return load_instance(args.instance), Path(args.instance).stem
    if args.kind:
        inst = generate_instance(args.kind, args.n, args.m, args.seed, _gen_params(args))
        return inst, f"{args.kind}-n{args.n}-m{args.m}-s{args.seed}"
    raise UsageError("an instance source is required: --instance PATH or --kind GENERATOR")


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    inst = generate_instance(args.kind, args.n, args.m, args.seed, _gen_params(args))
    meta = _meta(args, inst)
    meta["generator"] = {"kind": args.kind, "n": args.n, "m": args.m, "params": _gen_params(args)}
    out = Path(args.out) if args.out else Path(args.out_dir) / f"instance-{inst.digest()}.json"
    _write(out, dumps_instance(inst, meta))
    print(f"{inst.digest()}  {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    inst, inst_id = _instance(args)
    mech = _mechanism(args, inst)
    if args.start == "min-weight":
        start = min_weight_assignment(inst)
    else:
        start = load_assignment(args.start).validate(inst)
    trace = run_dynamics(mech, inst, start, order=args.order, max_iter=args.max_iter, seed=args.seed)
    out = Path(args.out_dir)
    meta = _meta(args, inst, mech)
    meta.update({"order": args.order, "instance_id": inst_id})
    _write(out / "trace.jsonl", json.dumps({"meta": meta}, sort_keys=True) + "\n" + trace.jsonl())

    final = trace.final
    loads = load_vector(inst, final)
    cts = [completion_time(mech, inst, final, u) for u in range(inst.n)]
    worst = max(cts)
    phi = None if mech.kind == "makespan" else potential(mech, inst, final)
    summary = {
        "meta": meta,
        "converged": trace.converged,
        "moves": len(trace.moves),
        "final": list(final.machine_of),
        "phi": None if phi is None else format_fraction(phi),
        "makespan": format_fraction(makespan(loads)),
        "max_completion_time": str(worst.approx_digits(args.precision)),
        "d": mech.d,
    }
    _write(out / "final.json", _dump({"format": "cml-1", "machine_of": list(final.machine_of), "meta": meta}))
    _write(out / "summary.json", _dump(summary))
    print(f"mechanism      {mech.label}")
    print(f"moves          {len(trace.moves)} moves, converged={trace.converged}")
    print(f"final          {list(final.machine_of)}")
    if phi is not None:
        print(f"potential      {format_decimal(phi, args.precision)}")
    print(f"makespan       {format_decimal(makespan(loads), args.precision)}")
    print(f"max completion {worst.approx_digits(args.precision)}")
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def _analyze_one(job):
    inst, inst_id, mechs, cap = job
    reports = [poa_pos_report(mech, inst, cap) for mech in mechs]
    return inst_id, inst, reports


def cmd_analyze(args) -> int:
    out = Path(args.out_dir)
    if args.sweep:
        ms = [int(x) for x in args.sweep.split(",")]
        rows = sweep(args.mech, ms, args.sweep_n, args.sweep_count, args.seed,
                     generator=args.kind or "uniform-integer", params=_gen_params(args),
                     cap=args.cap, d=args.d if args.d == "auto" else int(args.d))
        meta = _meta(args)
        meta["mechanisms"] = [{"kind": args.mech, "d": args.d}]
        text = "# " + json.dumps(meta, sort_keys=True) + "\n" + ",".join(SWEEP_COLUMNS) + "\n"
        text += "".join(",".join(r) + "\n" for r in rows)
        _write(out / "sweep.csv", text)
        print(text, end="")
        return EXIT_OK

    if args.instance_dir:
        if args.instance or args.kind:
            raise UsageError("--instance-dir excludes --instance and --kind")
        paths = sorted(Path(args.instance_dir).glob("*.json"))
        if not paths:
            raise UsageError(f"no instance files in {args.instance_dir}")
        sources = [(load_instance(p), p.stem) for p in paths]
    else:
        sources = [_instance(args)]

    jobs = []
    for inst, inst_id in sources:
        mechs = [_mechanism(args, inst)]
        if args.compare:
            mechs.append(_mechanism(args, inst, kind=args.compare))
        jobs.append((inst, inst_id, mechs, args.cap))

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_analyze_one, jobs))
    else:
        results = [_analyze_one(j) for j in jobs]

    rows, summary, failed = [], [], False
    for inst_id, inst, reports in results:
        meta = _meta(args, inst)
        meta["mechanisms"] = [r.mechanism for r in reports]
        payload = {"meta": meta, "instance_id": inst_id,
                   "reports": [r.to_json_obj(args.precision) for r in reports]}
        _write(out / f"report-{inst_id}.json", _dump(payload))
        line = [inst_id, str(inst.n), str(inst.m)]
        for rep in reports:
            rows.extend(rep.csv_rows(inst_id, args.precision))
            line += [str(rep.poa_ratio(args.precision)), str(rep.pos_ratio(args.precision))]
            failed |= not rep.all_passed
            for chk in rep.bound_checks:
                if not chk.passed:
                    log.error("%s: %s violated (%s > %s)", inst_id, chk.name, chk.observed, chk.theoretical)
        summary.append(line)
        _print_report(inst_id, reports, args.precision)

    meta = _meta(args)
    distinct = {json.dumps(r.mechanism, sort_keys=True) for _, _, reps in results for r in reps}
    meta["mechanisms"] = [json.loads(x) for x in sorted(distinct)]
    header = "# " + json.dumps(meta, sort_keys=True) + "\n"
    _write(out / "equilibria.csv", header + csv_text(rows))
    cols = ["instance_id", "n", "m"]
    for rep in results[0][2]:
        tag = rep.mechanism["kind"]
        cols += [f"poa_{tag}", f"pos_{tag}"]
    _write(out / "summary.csv", header + ",".join(cols) + "\n" + "".join(",".join(r) + "\n" for r in summary))
    return EXIT_FAILED if failed else EXIT_OK


def _print_report(inst_id: str, reports, precision: int) -> None:
    for rep in reports:
        kind = rep.mechanism["kind"]
        label = kind if kind == "makespan" else f"{kind}(d={rep.d})"
        print(f"{inst_id}  {label}: {len(rep.equilibria)} equilibria, "
              f"opt={format_fraction(rep.opt_makespan)}, "
              f"PoA={rep.poa_ratio(precision)}, PoS={rep.pos_ratio(precision)}")
        for chk in rep.bound_checks:
            status = "pass" if chk.passed else "FAIL"
            print(f"    {status}  {chk.name:<32} observed {chk.observed} <= {chk.theoretical}")


def cmd_verify(args) -> int:
    names = args.suite or list(SUITES)
    ds = [int(x) for x in args.d.split(",")] if args.d != "auto" else [2, 3]
    results = run_suites(names, seed=args.seed, ds=ds, cases=args.cases)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (recorded in outputs)")
    common.add_argument("--out-dir", default="out", help="directory for output files")
    common.add_argument("--precision", type=int, default=12, help="significant digits for decimals")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP, help="max candidate assignments to enumerate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="coordmech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"coordmech {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate an instance file")
    _add_gen_options(p, required=True)
    p.add_argument("--out", help="output file (default: OUT_DIR/instance-DIGEST.json)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", parents=[common], help="run best-response dynamics")
    p.add_argument("--instance", help="cml-1 instance file")
    _add_gen_options(p, required=False)
    _add_mech_options(p)
    p.add_argument("--order", choices=ORDERS, default="round-robin")
    p.add_argument("--max-iter", type=int, help="move budget (default 10 n m^2)")
    p.add_argument("--start", default="min-weight", help="'min-weight' or an assignment file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", parents=[common], help="enumerate equilibria and check bounds")
    p.add_argument("--instance", help="cml-1 instance file")
    p.add_argument("--instance-dir", help="analyze every *.json instance in a directory")
    _add_gen_options(p, required=False)
    _add_mech_options(p)
    p.add_argument("--compare", choices=("dcoord", "ccoord", "makespan"), help="second mechanism")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for batch mode")
    p.add_argument("--sweep", help="comma-separated machine counts for a worst-ratio sweep")
    p.add_argument("--sweep-n", type=int, default=5, help="jobs per sweep instance")
    p.add_argument("--sweep-count", type=int, default=20, help="instances per machine count")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", parents=[common], help="run the randomized property suites")
    p.add_argument("--suite", action="append", choices=list(SUITES), help="suite to run (repeatable)")
    p.add_argument("--d", default="auto", help="comma-separated degrees (default 2,3)")
    p.add_argument("--cases", type=int, help="cases per suite and degree")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, InstanceError, MechanismError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

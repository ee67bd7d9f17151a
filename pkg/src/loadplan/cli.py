"""Command-line entry point tying the toolkit into reproducible runs.

Exit codes: 0 success, 1 user error (bad arguments, bad files), 2 internal
error. Every randomized subcommand requires an explicit --seed. Output
artifacts of solve/datagen/train carry no wall-clock content, so identical
commands with identical seeds write byte-identical files; timings go to
stdout and to the evaluation CSVs only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from loadplan.datagen import generate_dataset, generate_sweep, load_dataset, save_dataset
from loadplan.formulations import plan_to_json, solve_gdo, solve_model1
from loadplan.greedy import greedy_solve
from loadplan.metrics import EVAL_CSV_HEADER, aggregate_reports, evaluate, report_csv_rows
from loadplan.network import (
    ParseError,
    Scenario,
    ValidationError,
    load_instance,
    restrict_scenario,
    save_instance,
)
from loadplan.proxy import SEARCH_GRID, TrainingConfig, load_model, proxy_solve, save_model, train

log = logging.getLogger("loadplan")


class UserError(Exception):
    """Problem the caller can fix (file missing, bad flag combination)."""


def _read_instance(path: str):
    try:
        with open(path, "rb") as fh:
            return load_instance(fh)
    except FileNotFoundError as exc:
        raise UserError(f"instance file not found: {path}") from exc
    except (ParseError, ValidationError) as exc:
        raise UserError(f"invalid instance {path}: {exc}") from exc


def _attach_reference(inst, reference_path):
    if reference_path is None:
        if inst.reference_plan is None:
            raise UserError("a reference plan is required (embed one or pass --reference)")
        return inst
    try:
        with open(reference_path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
    except FileNotFoundError as exc:
        raise UserError(f"reference file not found: {reference_path}") from exc
    doc = json.loads(save_instance(inst))
    doc["reference_plan"] = entries
    return load_instance(json.dumps(doc))


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_solve(args) -> int:
    inst = _read_instance(args.instance)
    t0 = time.perf_counter()
    if args.mode == "mip":
        res, plan = solve_model1(inst, args.time_limit)
        extra = f"status={res.status.value} bound={res.best_bound}"
        if args.solve_log:
            from loadplan.mip import write_solve_log

            write_solve_log(res, args.solve_log)
    elif args.mode == "gdo":
        inst = _attach_reference(inst, args.reference)
        g = solve_gdo(inst, args.time_limit)
        plan = g.plan
        extra = (
            f"distance={g.hamming_distance} diversion={g.diversion_total:.6g} "
            f"budget={g.z_star}"
        )
    elif args.mode == "greedy":
        result = greedy_solve(inst)
        plan = result.plan
        extra = f"iterations={result.iterations}"
        if args.trace:
            _write(args.trace, result.trace_csv(inst))
    else:  # proxy
        if not args.model:
            raise UserError("--mode proxy requires --model")
        model = load_model(args.model)
        plan, report, timings = proxy_solve(model, inst, args.time_limit)
        extra = (
            f"inference_s={timings['inference_s']:.4f} "
            f"restoration_s={timings['restoration_s']:.4f} "
            f"added_pairs={len(report.added)}"
        )
        if args.restoration_report:
            _write(args.restoration_report, report.to_json(inst))
    wall = time.perf_counter() - t0
    if args.out:
        _write(args.out, plan_to_json(inst, plan))
    print(f"mode={args.mode} cost={plan.objective} time_s={wall:.3f} {extra}")
    return 0


def cmd_restrict(args) -> int:
    inst = _read_instance(args.instance)
    scenario = Scenario(args.scenario)
    out = restrict_scenario(inst, scenario)
    _write(args.out, save_instance(out))
    print(f"scenario={scenario.value} commodities={out.num_commodities} -> {args.out}")
    return 0


def cmd_datagen(args) -> int:
    ref = _attach_reference(_read_instance(args.ref), args.reference)

    def progress(done, total):
        if done % 50 == 0 or done == total:
            print(f"labeled {done}/{total}", file=sys.stderr)

    ds = generate_dataset(
        ref, args.n, args.seed, stage_time_limit=args.stage_time_limit,
        progress=progress, jobs=args.jobs,
    )
    save_dataset(ds, args.out_dir)
    print(
        f"n={args.n} seed={args.seed} failed={ds.n_failed} "
        f"splits={{train:{len(ds.splits['train'])},val:{len(ds.splits['val'])},"
        f"test:{len(ds.splits['test'])}}} -> {args.out_dir}"
    )
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    data = ds.to_training_data()
    base = TrainingConfig(seed=args.seed, epochs=args.epochs)
    grid = SEARCH_GRID if args.grid == "full" else None
    model, history = train(data, base, grid)
    save_model(model, args.out_model)
    if args.loss_curve:
        _write(args.loss_curve, history.to_csv())
    best_val = min(history.val_loss) if history.val_loss else float("nan")
    cfg = history.config
    print(
        f"trained lr={cfg.learning_rate} layers={cfg.hidden_layers} "
        f"hidden={cfg.hidden_dim} best_val={best_val:.6f} -> {args.out_model}"
    )
    return 0


def _eval_one(work):
    """Per-instance evaluation work; top-level so worker processes can run it."""
    inst, label, methods, model, time_limit = work
    plans = {}
    times = {}
    t = time.perf_counter()
    res, mip_plan = solve_model1(inst, time_limit)
    times["mip"] = time.perf_counter() - t
    plans["mip"] = mip_plan
    if "gdo" in methods:
        t = time.perf_counter()
        plans["gdo"] = solve_gdo(inst, time_limit).plan
        times["gdo"] = time.perf_counter() - t
    if "greedy" in methods:
        t = time.perf_counter()
        plans["greedy"] = greedy_solve(inst).plan
        times["greedy"] = time.perf_counter() - t
    if "proxy" in methods:
        t = time.perf_counter()
        plan, _, _ = proxy_solve(model, inst, time_limit)
        plans["proxy"] = plan
        times["proxy"] = time.perf_counter() - t
    if "mip" not in methods:
        plans.pop("mip")
    return evaluate(
        inst, plans, z_star=res.objective, times=times, instance_label=label
    )


def cmd_eval(args) -> int:
    ds = load_dataset(args.data)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    known = {"mip", "gdo", "greedy", "proxy"}
    bad = set(methods) - known
    if bad:
        raise UserError(f"unknown methods: {sorted(bad)} (choose from {sorted(known)})")
    model = None
    if "proxy" in methods:
        if not args.model:
            raise UserError("evaluating the proxy requires --model")
        model = load_model(args.model)

    work = [
        (item.instance, f"{item.index:05d}", methods, model, args.time_limit)
        for item in ds.instances_of_split(args.split)
    ]
    if args.jobs > 1 and len(work) > 1:
        import multiprocessing

        with multiprocessing.Pool(processes=args.jobs) as pool:
            reports = list(pool.imap(_eval_one, work))
    else:
        reports = [_eval_one(w) for w in work]
    rows = [EVAL_CSV_HEADER]
    for rep in reports:
        rows.extend(report_csv_rows(rep))
    _write(args.report, "\n".join(rows) + "\n")
    summary = {
        method: {
            "geomean_gap": agg.geomean_gap,
            "geomean_delta": agg.geomean_delta,
            "geomean_time_s": agg.geomean_time_s,
            "n": agg.n,
        }
        for method, agg in aggregate_reports(reports).items()
    }
    summary_path = args.report + ".summary.json"
    _write(summary_path, json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_sweep(args) -> int:
    ref = _read_instance(args.ref)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    model = None
    if "proxy" in methods:
        if not args.model:
            raise UserError("sweeping the proxy requires --model")
        model = load_model(args.model)
    if "gdo" in methods and ref.reference_plan is None:
        raise UserError("sweeping gdo requires a reference plan on the instance")

    rows = ["step,scale,total_volume,method,cost,y_json"]
    for step, (scale, inst) in enumerate(generate_sweep(ref, args.steps, args.scale_from, args.scale_to)):
        for method in methods:
            if method == "mip":
                _, plan = solve_model1(inst, args.time_limit)
            elif method == "gdo":
                plan = solve_gdo(inst, args.time_limit).plan
            elif method == "greedy":
                plan = greedy_solve(inst).plan
            elif method == "proxy":
                plan, _, _ = proxy_solve(model, inst, args.time_limit)
            else:
                raise UserError(f"unknown method {method!r}")
            y_json = json.dumps(
                {
                    f"{inst.sort_pairs[s].name}|{inst.trailer_types[v].name}": n
                    for (s, v), n in sorted(plan.y.items())
                    if n
                },
                sort_keys=True,
            )
            quoted = '"' + y_json.replace('"', '""') + '"'
            rows.append(
                f"{step},{scale!r},{inst.total_volume()!r},{method},{plan.objective!r},{quoted}"
            )
    _write(args.out, "\n".join(rows) + "\n")
    print(f"steps={args.steps} methods={','.join(methods)} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from loadplan.service import create_app

    app = create_app(store_dir=args.store, model_path=args.model, solver_slots=args.slots)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loadplan", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one instance and write the plan JSON")
    ps.add_argument("--mode", choices=["mip", "gdo", "greedy", "proxy"], required=True)
    ps.add_argument("--instance", required=True)
    ps.add_argument("--reference", help="reference plan JSON to attach (gdo)")
    ps.add_argument("--time-limit", type=float, default=30.0)
    ps.add_argument("--out", help="plan JSON output path")
    ps.add_argument("--model", help="proxy checkpoint path")
    ps.add_argument("--trace", help="greedy per-iteration CSV path")
    ps.add_argument("--restoration-report", help="proxy restoration report path")
    ps.add_argument("--solve-log", help="incumbent/bound CSV path (mip mode)")
    ps.set_defaults(func=cmd_solve)

    pr = sub.add_parser("restrict", help="restrict compatible paths per scenario")
    pr.add_argument("--instance", required=True)
    pr.add_argument(
        "--scenario", choices=[s.value for s in Scenario], required=True
    )
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_restrict)

    pd = sub.add_parser("datagen", help="generate labeled perturbed instances")
    pd.add_argument("--ref", required=True, help="reference instance JSON")
    pd.add_argument("--reference", help="reference plan JSON to attach")
    pd.add_argument("--n", type=int, required=True)
    pd.add_argument("--seed", type=int, required=True)
    pd.add_argument("--out-dir", required=True)
    pd.add_argument("--stage-time-limit", type=float, default=10.0)
    pd.add_argument("--jobs", type=int, default=1, help="parallel labeling processes")
    pd.set_defaults(func=cmd_datagen)

    pt = sub.add_parser("train", help="train the proxy on a generated dataset")
    pt.add_argument("--data", required=True, help="dataset directory")
    pt.add_argument("--grid", choices=["full", "single"], default="full")
    pt.add_argument("--seed", type=int, required=True)
    pt.add_argument("--epochs", type=int, default=150)
    pt.add_argument("--out-model", required=True)
    pt.add_argument("--loss-curve", help="loss curve CSV path")
    pt.set_defaults(func=cmd_train)

    pe = sub.add_parser("eval", help="score methods on a dataset split")
    pe.add_argument("--data", required=True)
    pe.add_argument("--methods", default="mip,gdo,greedy,proxy")
    pe.add_argument("--split", choices=["train", "val", "test"], default="test")
    pe.add_argument("--model", help="proxy checkpoint path")
    pe.add_argument("--time-limit", type=float, default=30.0)
    pe.add_argument("--report", required=True, help="CSV output path")
    pe.add_argument("--jobs", type=int, default=1, help="parallel evaluation processes")
    pe.set_defaults(func=cmd_eval)

    pw = sub.add_parser("sweep", help="volume sweep CSV for stability plots")
    pw.add_argument("--ref", required=True)
    pw.add_argument("--steps", type=int, required=True)
    pw.add_argument("--scale-from", type=float, default=0.8)
    pw.add_argument("--scale-to", type=float, default=1.2)
    pw.add_argument("--methods", default="mip,gdo")
    pw.add_argument("--model")
    pw.add_argument("--time-limit", type=float, default=30.0)
    pw.add_argument("--out", required=True)
    pw.set_defaults(func=cmd_sweep)

    pv = sub.add_parser("serve", help="run the what-if HTTP service")
    pv.add_argument("--store", required=True, help="instance/solution store directory")
    pv.add_argument("--model", help="proxy checkpoint for what-if solves")
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--port", type=int, default=8800)
    pv.add_argument("--slots", type=int, default=2, help="concurrent solver budget")
    pv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DLPP_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # internal error: full trace for bug reports
        logging.exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())

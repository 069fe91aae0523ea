"""Command-line entry point: run, sweep, analyze, validate."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from . import analysis
from .energy import PowerProfile
from .experiment import (
    RECIPES,
    load_sweep,
    make_sweep,
    recipe,
    results_rows,
    run_experiment,
    run_scenario,
    write_experiment,
    write_results_csv,
)
from .mac import airtime_us
from .metrics import avg_e2e_delay, energy_metrics, pdr
from .packet import CID_BYTES
from .scenario import ScenarioError, load_scenario, parse_seeds, with_overrides
from .trace import metrics_from_trace, read_trace, validate_trace


def _seeds(args, default):
    return parse_seeds(args.seed) if args.seed else default


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.protocol:
        scenario = with_overrides(scenario, {"scenario.protocol": args.protocol})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for seed in _seeds(args, scenario.seeds):
        trace_path = out / f"{scenario.name}_{scenario.protocol}_seed{seed}.trace.jsonl" if args.trace else None
        res = run_scenario(scenario, seed, trace_path)
        results.append(res)
        rec = res.record
        avg, nec = energy_metrics(rec)
        print(f"seed {seed}: pdr={_f(pdr(rec))} delay_s={_f(avg_e2e_delay(rec))} "
              f"tec_j={rec.tec_j:.6g} nec_j={_f(nec)} dup_tx={rec.duplicate_tx}")
    path = out / f"{scenario.name}_results.csv"
    write_results_csv(results_rows(scenario.name, results), path)
    print(f"wrote {path}")
    return 0


def _f(v) -> str:
    return "n/a" if v is None else f"{v:.6g}"


def cmd_sweep(args) -> int:
    if args.sweep in RECIPES:
        sweep = recipe(args.sweep, duration_s=args.duration if args.duration else 100.0)
    else:
        sweep = load_sweep(args.sweep)
    base, axes = sweep.base, dict(sweep.axes)
    if args.protocol:
        base = with_overrides(base, {"scenario.protocol": args.protocol})
        if "scenario.protocol" in axes:
            axes["scenario.protocol"] = (args.protocol,)
    if args.duration:
        base = dataclasses.replace(base, sim_duration_s=args.duration)
    sweep = make_sweep(sweep.name, base, axes, _seeds(args, sweep.seeds))
    n_runs = len(sweep.points()) * len(sweep.seeds)
    print(f"{sweep.name}: {len(sweep.points())} points x {len(sweep.seeds)} seeds = {n_runs} runs")
    results = run_experiment(sweep, jobs=args.jobs)
    for path in write_experiment(sweep, results, args.out_dir):
        print(f"wrote {path}")
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cands = [float(v) for v in args.candidates.split(",")]
    rows = []
    for hops in range(1, args.max_hops + 1):
        profile = analysis.HopLinkProfile.uniform(cands, hops)
        p_o = analysis.opportunistic_delivery_prob(profile)
        p_u = analysis.best_link_unicast_prob(profile)
        rows.append({"n_hops": hops, "p_opportunistic": p_o, "p_unicast": p_u})
    _emit(rows, out / "delivery_probability.csv")

    power = PowerProfile()
    cid_air_s = airtime_us(CID_BYTES) / 1e6
    e_tx, e_rx = power.p_tx_w * cid_air_s, power.p_rx_w * cid_air_s
    rows = []
    for side in args.grid_sides:
        n = side * side
        rows.append({"n_nodes": n, "e_tx_j": e_tx, "e_rx_j": e_rx,
                     "bound_j": analysis.cid_energy_bound(n, e_tx, e_rx)})
    _emit(rows, out / "cid_energy_bound.csv")
    return 0


def _emit(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"# {path}")
    print(",".join(rows[0]))
    for r in rows:
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in r.values()))


def cmd_validate(args) -> int:
    events = read_trace(args.trace)
    problems = validate_trace(events)
    rec = metrics_from_trace(events)
    print(f"events={len(events)} sent={rec.sent_by_sources} received={rec.received_at_sink} "
          f"pdr={_f(pdr(rec))} tec_j={rec.tec_j:.6g}")
    for p in problems:
        print(f"VIOLATION: {p}")
    print("ok" if not problems else f"{len(problems)} violation(s)")
    return 0 if not problems else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opser", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", help="seed list, e.g. 3 or 1..10 or 1,4,7")
        p.add_argument("--out-dir", default="results")
        p.add_argument("--protocol", choices=("opser", "oppbcast", "greedy_unicast"))

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("scenario")
    common(p)
    p.add_argument("--trace", action="store_true", help="write a JSON-lines trace per seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help=f"run a sweep file or a recipe ({', '.join(RECIPES)})")
    p.add_argument("sweep")
    common(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--duration", type=float, help="override simulated seconds per run")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="closed-form delivery probability and CID energy tables")
    p.add_argument("--out-dir", default="results")
    p.add_argument("--candidates", default="0.3,0.4,0.5", help="link probabilities of one hop")
    p.add_argument("--max-hops", type=int, default=10)
    p.add_argument("--grid-sides", type=int, nargs="+", default=[5, 7, 9, 11])
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="check a trace file offline")
    p.add_argument("trace")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Single runs, parameter sweeps and results files."""

from __future__ import annotations

import csv
import itertools
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .baselines import GreedyUnicastNode, OppBcastNode
from .forwarding import OpserNode
from .metrics import MetricsRecord, avg_e2e_delay, energy_metrics, pdr
from .network import Network
from .scenario import (
    SECTIONS,
    Scenario,
    ScenarioError,
    build_topology,
    new_config_parser,
    parse_seeds,
    scenario_fields,
    scenario_from_config,
    with_overrides,
)
from .trace import write_trace

NODE_CLASSES = {
    "opser": OpserNode,
    "oppbcast": OppBcastNode,
    "greedy_unicast": GreedyUnicastNode,
}

METRIC_COLUMNS = ("pdr", "avg_delay_s", "tec_j", "avg_energy_j", "nec_j", "duplicate_tx",
                  "duplicates_at_sink", "caf_count")


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    record: MetricsRecord
    cid_snapshot: dict | None = None
    point: dict[str, str] = field(default_factory=dict)

    def row(self, scenario_id: str) -> dict:
        avg_energy, nec = energy_metrics(self.record)
        r = {
            "scenario_id": scenario_id,
            "seed": self.seed,
            "protocol": self.scenario.protocol,
            "n_nodes": self.record.n_nodes,
            "packet_rate": self.scenario.traffic.packet_rate_pps,
            "pdr": pdr(self.record),
            "avg_delay_s": avg_e2e_delay(self.record),
            "tec_j": self.record.tec_j,
            "avg_energy_j": avg_energy,
            "nec_j": nec,
            "duplicate_tx": self.record.duplicate_tx,
            "duplicates_at_sink": self.record.duplicates_at_sink,
            "caf_count": self.record.caf_count,
        }
        for reason, n in self.record.drops_by_reason.items():
            r[f"drops_{reason}"] = n
        r.update(self.point)
        return r


def build_network(scenario: Scenario, seed: int, trace: bool = False) -> Network:
    layout = build_topology(scenario, seed)
    net = Network(
        layout.positions,
        layout.sink_id,
        NODE_CLASSES[scenario.protocol],
        seed=seed,
        prop=scenario.radio,
        csma=scenario.mac,
        power=scenario.energy,
        proto=scenario.protocol_params,
        e_initial_j=scenario.e_initial_j,
        traffic_start_s=scenario.traffic.start_s,
        data_bytes=scenario.traffic.payload_bytes,
        be_override=scenario.be_override,
        trace=trace,
        meta={"scenario": scenario.name},
    )
    net.start_cid()
    for src in layout.sources:
        net.add_cbr_source(src, scenario.traffic.packet_rate_pps, scenario.traffic.start_s,
                           scenario.traffic_stop_s)
    return net


def run_scenario(scenario: Scenario, seed: int, trace_path: str | Path | None = None) -> RunResult:
    net = build_network(scenario, seed, trace=trace_path is not None)
    record = net.run_until(scenario.sim_duration_s)
    if trace_path is not None:
        write_trace(net.records, trace_path)
    return RunResult(scenario, seed, record, net.cid_snapshot)


# ------------------------------------------------------------------ sweeps

@dataclass(frozen=True)
class Sweep:
    name: str
    base: Scenario
    axes: tuple[tuple[str, tuple[str, ...]], ...]
    seeds: tuple[int, ...]

    def points(self) -> list[dict[str, str]]:
        keys = [k for k, _ in self.axes]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in self.axes))]


def make_sweep(name: str, base: Scenario, axes: dict[str, Iterable[str]],
               seeds: Iterable[int]) -> Sweep:
    seeds = tuple(seeds)
    if not seeds:
        raise ScenarioError("sweep needs at least one seed")
    known = scenario_fields(base)
    norm = []
    for key, values in axes.items():
        if key not in known:
            raise ScenarioError(f"invalid sweep key {key!r}")
        values = tuple(str(v).strip() for v in values)
        if not values:
            raise ScenarioError(f"sweep key {key!r} has no values")
        norm.append((key, values))
    sweep = Sweep(name, base, tuple(norm), seeds)
    # every point must build before anything runs
    for point in sweep.points():
        with_overrides(base, point)
    return sweep


def _split_values(text: str) -> list[str]:
    # commas separate sweep values; tuple-valued keys write "a; b" for one value
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_sweep(text: str) -> Sweep:
    """A scenario file plus a ``[sweep]`` section of ``section.key = v1, v2``."""
    cp = new_config_parser()
    cp.read_string(text)
    if not cp.has_section("sweep"):
        raise ScenarioError("sweep file needs a [sweep] section")
    sweep_sec = dict(cp["sweep"])
    cp.remove_section("sweep")
    extra = [s for s in cp.sections() if s not in SECTIONS]
    if extra:
        raise ScenarioError(f"unknown sections {extra}")
    base = scenario_from_config(cp)
    name = sweep_sec.pop("name", base.name)
    seeds_text = sweep_sec.pop("seeds", None)
    seeds = base.seeds if seeds_text is None else parse_seeds(seeds_text)
    axes = {k: [v.replace(";", ",") for v in _split_values(text)] for k, text in sweep_sec.items()}
    return make_sweep(name, base, axes, seeds)


def load_sweep(path: str | Path) -> Sweep:
    return parse_sweep(Path(path).read_text())


def _run_point(args) -> RunResult:
    scenario, seed, point = args
    result = run_scenario(scenario, seed)
    result.point = point
    return result


def run_experiment(sweep: Sweep, jobs: int = 1) -> list[RunResult]:
    tasks = []
    for point in sweep.points():
        scenario = with_overrides(sweep.base, point)
        for seed in sweep.seeds:
            tasks.append((scenario, seed, point))
    if jobs <= 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point, tasks))


def point_id(sweep_name: str, point: dict[str, str]) -> str:
    if not point:
        return sweep_name
    return sweep_name + "[" + ",".join(f"{k}={v}" for k, v in point.items()) + "]"


def results_rows(name: str, results: list[RunResult]) -> list[dict]:
    return [r.row(point_id(name, r.point)) for r in results]


def _columns(rows: list[dict], lead: Iterable[str]) -> list[str]:
    cols = list(lead)
    extra = sorted({k for r in rows for k in r} - set(cols))
    drops = [c for c in extra if c.startswith("drops_")]
    return cols + drops + [c for c in extra if c not in drops]


def write_results_csv(rows: list[dict], path: str | Path) -> None:
    lead = ("scenario_id", "seed", "protocol", "n_nodes", "packet_rate") + METRIC_COLUMNS
    cols = _columns(rows, lead)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval=0, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})


def aggregate(rows: list[dict], group_by: Iterable[str]) -> list[dict]:
    """Mean and sample std of each metric across seeds, per sweep point."""
    group_by = list(group_by)
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in group_by), []).append(r)
    out = []
    for key, members in groups.items():
        agg = dict(zip(group_by, key))
        agg["runs"] = len(members)
        for m in METRIC_COLUMNS:
            vals = [r[m] for r in members if r[m] is not None]
            agg[f"{m}_mean"] = statistics.fmean(vals) if vals else None
            agg[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)
        out.append(agg)
    return out


def write_aggregate_csv(rows: list[dict], path: str | Path) -> None:
    cols = list(rows[0]) if rows else ["runs"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})


def write_experiment(sweep: Sweep, results: list[RunResult], out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = results_rows(sweep.name, results)
    results_path = out / f"{sweep.name}_results.csv"
    agg_path = out / f"{sweep.name}_aggregate.csv"
    write_results_csv(rows, results_path)
    group = ["protocol", "n_nodes", "packet_rate"] + [k for k, _ in sweep.axes]
    group = list(dict.fromkeys(group))
    write_aggregate_csv(aggregate(rows, group), agg_path)
    return results_path, agg_path


# ----------------------------------------------------------------- recipes

# square grids standing in for an unpublished list of network sizes
NODE_SWEEP_SIDES = ("5", "7", "9", "11")
RECIPES = ("backoff_vs_size", "packet_rate", "network_size")


def recipe(name: str, seeds: Iterable[int] = range(1, 11), duration_s: float = 100.0) -> Sweep:
    """Built-in study designs over seeds; every recipe uses the 10 m grid."""
    base = Scenario(name=name, sim_duration_s=duration_s)
    if name == "backoff_vs_size":
        base = with_overrides(base, {"traffic.sources": "all"})
        axes = {"topology.side": NODE_SWEEP_SIDES, "mac.be_override": ("2, 4", "3, 5", "4, 6", "5, 7")}
    elif name == "packet_rate":
        axes = {"traffic.packet_rate_pps": ("1.0", "2.0", "3.0", "4.0", "5.0"),
                "scenario.protocol": ("opser", "oppbcast", "greedy_unicast")}
    elif name == "network_size":
        axes = {"topology.side": NODE_SWEEP_SIDES, "scenario.protocol": ("opser", "oppbcast")}
    else:
        raise ScenarioError(f"unknown recipe {name!r}; choose from {RECIPES}")
    return make_sweep(name, base, axes, seeds)



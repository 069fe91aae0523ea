"""JSON-lines event traces: persistence, metric replay and offline checks.

Each line is one object with ``t`` (microseconds), ``node`` and ``ev`` plus
event-specific fields.  Python's JSON float encoding is the shortest
round-tripping repr, so values replayed from a file are bit-identical.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from pathlib import Path
from typing import IO, Iterable

from .metrics import MetricsRecord, build_record

ENERGY_TOLERANCE_J = 1e-12


def trace_lines(records: Iterable[tuple]) -> Iterable[str]:
    for t, node, ev, fields in records:
        yield json.dumps({"t": t, "node": node, "ev": ev, **fields}, separators=(",", ":"))


def write_trace(records: Iterable[tuple], dest: str | Path | IO[str]) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w") as fh:
            write_trace(records, fh)
        return
    for line in trace_lines(records):
        dest.write(line)
        dest.write("\n")


def read_trace(src: str | Path | IO[str]) -> list[dict]:
    if isinstance(src, (str, Path)):
        with open(src) as fh:
            return read_trace(fh)
    return [json.loads(line) for line in src if line.strip()]


def metrics_from_trace(events: list[dict]) -> MetricsRecord:
    sent = 0
    delays: list[int] = []
    dups = 0
    caf = 0
    drops: Counter = Counter()
    forwards: Counter = Counter()
    energies = []
    for e in events:
        ev = e["ev"]
        if ev == "gen":
            sent += 1
        elif ev == "deliver":
            if e["dup"]:
                dups += 1
            else:
                delays.append(e["delay_us"])
        elif ev == "caf":
            caf += 1
        elif ev == "drop":
            drops[e["reason"]] += 1
        elif ev == "fwd":
            forwards[(e["src"], e["pid"], e["trig"])] += 1
        elif ev == "energy":
            energies.append((e["node"], e["e_initial"], e["e_rem"]))
    energies.sort(key=lambda x: x[0])
    return build_record(
        sent=sent,
        delays_us=delays,
        energies=[(a, b) for _, a, b in energies],
        duplicates_at_sink=dups,
        duplicate_tx=sum(c - 1 for c in forwards.values() if c > 1),
        caf_count=caf,
        drops=dict(drops),
    )


def validate_trace(events: list[dict]) -> list[str]:
    """Check protocol and accounting invariants; returns human-readable violations."""
    problems: list[str] = []
    meta = next((e for e in events if e["ev"] == "meta"), None)
    sink = meta["sink"] if meta else None

    last_t = -1
    for e in events:
        if e["t"] < last_t:
            problems.append(f"time goes backwards at t={e['t']}")
            break
        last_t = e["t"]

    # each node sends every CID round at most once
    cid_tx = Counter((e["node"], e["seq"]) for e in events if e["ev"] == "tx" and e["frame"] == "CID")
    for (node, seq), n in sorted(cid_tx.items()):
        if n > 1:
            problems.append(f"node {node} sent CID seq {seq} {n} times")

    # energy conservation per node
    for e in events:
        if e["ev"] == "energy":
            spent = e["tx"] + e["rx"] + e["idle"] + e["sleep"]
            if abs((e["e_initial"] - e["e_rem"]) - spent) > ENERGY_TOLERANCE_J:
                problems.append(f"node {e['node']} energy not conserved")
            if not 0 <= e["e_rem"] <= e["e_initial"]:
                problems.append(f"node {e['node']} remaining energy out of range")

    # unique first deliveries
    delivered = Counter((e["src"], e["pid"]) for e in events if e["ev"] == "deliver" and not e["dup"])
    for key, n in delivered.items():
        if n > 1:
            problems.append(f"packet {key} delivered first {n} times")

    # holding timers set by one reception fire in priority order
    rounds: dict = defaultdict(list)
    for e in events:
        if e["ev"] == "dhd_set" and e.get("prio") is not None:
            rounds[(e["src"], e["pid"], e["trig"], e["t"])].append((e["prio"], e["fire"], e["node"]))
    for key, cands in rounds.items():
        for p, fp, n in cands:
            for q, fq, m in cands:
                if p < q and not fp < fq:
                    problems.append(f"priority {p} at node {n} fires after priority {q} at node {m} for {key}")

    # mode selection soundness
    for e in events:
        if e["ev"] == "mode":
            if e["mode"] == "unicast" and e["max_tv"] < 0.5:
                problems.append(f"node {e['node']} unicast without a trusted neighbour at t={e['t']}")
            if e["route"] == "Failed" and e["mode"] != "opportunistic":
                problems.append(f"node {e['node']} ignored a failed route at t={e['t']}")

    # corona level never increases along a forwarding step
    cl = {e["node"]: e["cl"] for e in events if e["ev"] == "cid_cl"}
    if sink is not None:
        cl[sink] = 1
    for e in events:
        if e["ev"] == "fwd":
            mine, theirs = cl.get(e["node"]), cl.get(e["trig"])
            if mine is not None and theirs is not None and mine > theirs:
                problems.append(f"node {e['node']} (CL {mine}) relayed from higher-level node "
                                f"{e['trig']} (CL {theirs})")
    return problems

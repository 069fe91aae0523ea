"""Scenario files, topology generation and source placement.

Scenarios are INI files (``configparser``) with one section per concern.
Reals are written with ``repr`` so that parse -> serialize -> parse is exact.
"""

from __future__ import annotations

import configparser
import enum
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .energy import PowerProfile
from .engine import RngStream, Stream
from .mac import CsmaConfig
from .protocol import OpserConfig
from .radio import PropagationParams

PROTOCOLS = ("opser", "oppbcast", "greedy_unicast")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GridTopology:
    rows: int = 11
    cols: int = 11
    spacing_m: float = 10.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ScenarioError("grid needs at least one row and one column")
        if not self.spacing_m > 0:
            raise ScenarioError("grid spacing must be positive")

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class RandomTopology:
    n: int = 50
    width_m: float = 100.0
    height_m: float = 100.0

    def __post_init__(self):
        if self.n < 1:
            raise ScenarioError("random topology needs at least one node")
        if not (self.width_m > 0 and self.height_m > 0):
            raise ScenarioError("field dimensions must be positive")

    @property
    def n_nodes(self) -> int:
        return self.n


@dataclass(frozen=True)
class TrafficConfig:
    # "extreme" picks the source_count nodes farthest from the sink,
    # "all" makes every non-sink node a source, "explicit" uses source_ids
    sources: str = "extreme"
    source_count: int = 4
    source_ids: tuple[int, ...] = ()
    packet_rate_pps: float = 5.0
    payload_bytes: int = 70
    start_s: float = 2.0
    # None stops traffic DRAIN_S before the end of the run
    stop_s: float | None = None

    def __post_init__(self):
        if self.sources not in ("extreme", "all", "explicit"):
            raise ScenarioError(f"unknown source rule {self.sources!r}")
        if self.sources == "explicit" and not self.source_ids:
            raise ScenarioError("explicit source rule needs source_ids")
        if self.source_count < 0:
            raise ScenarioError("source_count must be non-negative")
        if not self.packet_rate_pps > 0:
            raise ScenarioError("packet rate must be positive")
        if self.payload_bytes <= 0:
            raise ScenarioError("payload must be positive")
        if self.start_s < 0:
            raise ScenarioError("traffic start must be non-negative")


DRAIN_S = 2.0


@dataclass(frozen=True)
class Scenario:
    name: str = "grid121"
    protocol: str = "opser"
    sim_duration_s: float = 100.0
    seeds: tuple[int, ...] = (1,)
    topology: GridTopology | RandomTopology = field(default_factory=GridTopology)
    # "corner", "center" or "x,y" (the node nearest that point)
    sink: str = "corner"
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    radio: PropagationParams = field(default_factory=PropagationParams)
    mac: CsmaConfig = field(default_factory=CsmaConfig)
    energy: PowerProfile = field(default_factory=PowerProfile)
    e_initial_j: float = 3.6
    be_override: tuple[int, int] | None = None
    protocol_params: OpserConfig = field(default_factory=OpserConfig)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if not self.sim_duration_s > 0:
            raise ScenarioError("sim duration must be positive")
        if not self.e_initial_j > 0:
            raise ScenarioError("initial energy must be positive")
        _sink_point(self.sink, self.topology)

    @property
    def traffic_stop_s(self) -> float:
        if self.traffic.stop_s is not None:
            return self.traffic.stop_s
        return max(self.traffic.start_s, self.sim_duration_s - DRAIN_S)


# ------------------------------------------------------------------ topology

def _sink_point(sink: str, topo) -> tuple[float, float]:
    if isinstance(topo, GridTopology):
        w, h = (topo.cols - 1) * topo.spacing_m, (topo.rows - 1) * topo.spacing_m
    else:
        w, h = topo.width_m, topo.height_m
    if sink == "corner":
        return 0.0, 0.0
    if sink == "center":
        return w / 2, h / 2
    try:
        x, y = (float(v) for v in sink.split(","))
    except ValueError:
        raise ScenarioError(f"sink must be corner, center or 'x,y', got {sink!r}") from None
    if not (0 <= x <= w and 0 <= y <= h):
        raise ScenarioError("sink coordinates lie outside the field")
    return x, y


def grid_positions(topo: GridTopology) -> list[tuple[float, float]]:
    s = topo.spacing_m
    return [(c * s, r * s) for r in range(topo.rows) for c in range(topo.cols)]


def random_positions(topo: RandomTopology, seed: int) -> list[tuple[float, float]]:
    rng = RngStream(seed, (0, int(Stream.TOPOLOGY)))
    taken: set[tuple[int, int]] = set()
    out = []
    while len(out) < topo.n:
        x, y = rng.uniform(0.0, topo.width_m), rng.uniform(0.0, topo.height_m)
        cell = (round(x * 100), round(y * 100))
        if cell in taken:
            continue  # same spot at 1 cm resolution: draw again
        taken.add(cell)
        out.append((x, y))
    return out


@dataclass(frozen=True)
class Layout:
    positions: tuple[tuple[float, float], ...]
    sink_id: int
    sources: tuple[int, ...]


def _nearest(positions, point) -> int:
    px, py = point
    return min(range(len(positions)), key=lambda i: (math.hypot(positions[i][0] - px, positions[i][1] - py), i))


def build_topology(scenario: Scenario, seed: int) -> Layout:
    topo = scenario.topology
    positions = grid_positions(topo) if isinstance(topo, GridTopology) else random_positions(topo, seed)
    sink_id = _nearest(positions, _sink_point(scenario.sink, topo))
    traffic = scenario.traffic
    others = [i for i in range(len(positions)) if i != sink_id]
    if traffic.sources == "all":
        sources = others
    elif traffic.sources == "explicit":
        for s in traffic.source_ids:
            if not 0 <= s < len(positions):
                raise ScenarioError(f"source {s} does not exist")
            if s == sink_id:
                raise ScenarioError("the sink cannot be a source")
        sources = list(traffic.source_ids)
    else:
        sx, sy = positions[sink_id]
        far = sorted(others, key=lambda i: (-math.hypot(positions[i][0] - sx, positions[i][1] - sy), i))
        sources = sorted(far[:traffic.source_count])
    return Layout(tuple(positions), sink_id, tuple(sources))


# ------------------------------------------------------------- serialization

def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _coerce(text: str, default, name: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if isinstance(default, enum.Enum):
            return type(default)(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ScenarioError(f"bad value for {name}: {text!r}") from None
    return text


def _section_from(cls, section: configparser.SectionProxy | dict, prefix: str):
    base = cls()
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, text in section.items():
        if key not in known:
            raise ScenarioError(f"unknown key {prefix}.{key}")
        kwargs[key] = _coerce(text, getattr(base, key), f"{prefix}.{key}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid [{prefix}] section: {exc}") from None


def _int_tuple(text: str, name: str) -> tuple[int, ...]:
    text = text.strip()
    if not text or text.lower() == "none":
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ScenarioError(f"bad integer list for {name}: {text!r}") from None


def parse_seeds(text: str) -> tuple[int, ...]:
    """Comma list of seeds; ``a..b`` expands to an inclusive range."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = (int(v) for v in part.split(".."))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ScenarioError(f"bad seed list: {text!r}") from None
    return tuple(out)


SECTIONS = ("scenario", "topology", "traffic", "radio", "mac", "energy", "protocol")


def scenario_from_config(cp: configparser.ConfigParser) -> Scenario:
    for name in cp.sections():
        if name not in SECTIONS and name != "sweep":
            raise ScenarioError(f"unknown section [{name}]")
    base = Scenario()
    sc = dict(cp["scenario"]) if cp.has_section("scenario") else {}
    kwargs: dict = {}
    for key, text in sc.items():
        if key in ("name", "protocol", "sink"):
            kwargs[key] = text.strip()
        elif key == "sim_duration_s":
            kwargs[key] = _coerce(text, 0.0, "scenario.sim_duration_s")
        elif key == "e_initial_j":
            kwargs[key] = _coerce(text, 0.0, "scenario.e_initial_j")
        elif key == "seeds":
            kwargs[key] = parse_seeds(text)
        else:
            raise ScenarioError(f"unknown key scenario.{key}")
    if cp.has_section("topology"):
        topo = dict(cp["topology"])
        kind = topo.pop("kind", "grid").strip()
        if "sink" in topo:
            kwargs["sink"] = topo.pop("sink").strip()
        if kind == "grid":
            kwargs["topology"] = _section_from(GridTopology, topo, "topology")
        elif kind == "random":
            kwargs["topology"] = _section_from(RandomTopology, topo, "topology")
        else:
            raise ScenarioError(f"unknown topology kind {kind!r}")
    if cp.has_section("traffic"):
        tr = dict(cp["traffic"])
        ids = _int_tuple(tr.pop("source_ids", ""), "traffic.source_ids")
        stop = tr.pop("stop_s", "none").strip()
        traffic = _section_from(TrafficConfig, tr, "traffic")
        stop_v = None if stop.lower() == "none" else _coerce(stop, 0.0, "traffic.stop_s")
        try:
            kwargs["traffic"] = replace(traffic, source_ids=ids, stop_s=stop_v)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    if cp.has_section("radio"):
        kwargs["radio"] = _section_from(PropagationParams, cp["radio"], "radio")
    if cp.has_section("mac"):
        mac = dict(cp["mac"])
        override = mac.pop("be_override", "none").strip()
        if override.lower() != "none":
            pair = _int_tuple(override, "mac.be_override")
            if len(pair) != 2:
                raise ScenarioError("mac.be_override needs 'min, max'")
            kwargs["be_override"] = pair
        kwargs["mac"] = _section_from(CsmaConfig, mac, "mac")
    if cp.has_section("energy"):
        en = dict(cp["energy"])
        if "e_initial_j" in en:
            kwargs["e_initial_j"] = _coerce(en.pop("e_initial_j"), 0.0, "energy.e_initial_j")
        kwargs["energy"] = _section_from(PowerProfile, en, "energy")
    if cp.has_section("protocol"):
        kwargs["protocol_params"] = _section_from(OpserConfig, cp["protocol"], "protocol")
    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def new_config_parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))


def parse_scenario(text: str) -> Scenario:
    cp = new_config_parser()
    cp.read_string(text)
    return scenario_from_config(cp)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def scenario_to_config(s: Scenario) -> configparser.ConfigParser:
    cp = new_config_parser()
    cp["scenario"] = {
        "name": s.name,
        "protocol": s.protocol,
        "sim_duration_s": _fmt(s.sim_duration_s),
        "seeds": _fmt(s.seeds),
    }
    topo = {"kind": "grid" if isinstance(s.topology, GridTopology) else "random", "sink": s.sink}
    topo.update({f.name: _fmt(getattr(s.topology, f.name)) for f in fields(s.topology)})
    cp["topology"] = topo
    cp["traffic"] = {f.name: _fmt(getattr(s.traffic, f.name)) for f in fields(s.traffic)}
    cp["radio"] = {f.name: _fmt(getattr(s.radio, f.name)) for f in fields(s.radio)}
    mac = {f.name: _fmt(getattr(s.mac, f.name)) for f in fields(s.mac)}
    mac["be_override"] = _fmt(s.be_override)
    cp["mac"] = mac
    energy = {"e_initial_j": _fmt(s.e_initial_j)}
    energy.update({f.name: _fmt(getattr(s.energy, f.name)) for f in fields(s.energy)})
    cp["energy"] = energy
    cp["protocol"] = {f.name: _fmt(getattr(s.protocol_params, f.name))
                      for f in fields(s.protocol_params)}
    return cp


def serialize_scenario(s: Scenario) -> str:
    buf = io.StringIO()
    scenario_to_config(s).write(buf)
    return buf.getvalue()


def with_overrides(s: Scenario, overrides: dict[str, str]) -> Scenario:
    """Apply ``section.key -> text`` overrides by rewriting the INI form.

    ``topology.side`` sets rows and cols together; ``topology.kind`` is applied
    first and resets the topology fields to that kind's defaults.
    """
    cp = scenario_to_config(s)
    items = sorted(overrides.items(), key=lambda kv: kv[0] != "topology.kind")
    for dotted, text in items:
        section, _, key = dotted.partition(".")
        if dotted == "topology.kind":
            kind = text.strip()
            cls = {"grid": GridTopology, "random": RandomTopology}.get(kind)
            if cls is None:
                raise ScenarioError(f"unknown topology kind {kind!r}")
            sink = cp["topology"]["sink"]
            cp["topology"] = {"kind": kind, "sink": sink, **{f.name: _fmt(f.default) for f in fields(cls)}}
        elif dotted == "topology.side" and "rows" in cp["topology"]:
            cp["topology"]["rows"] = text
            cp["topology"]["cols"] = text
        elif cp.has_section(section) and key in cp[section]:
            cp[section][key] = text
        else:
            raise ScenarioError(f"invalid key {dotted!r}")
    return scenario_from_config(cp)


def scenario_fields(s: Scenario) -> dict[str, str]:
    """Flat ``section.key -> text`` view, used to validate sweep keys."""
    cp = scenario_to_config(s)
    out = {f"{sec}.{k}": v for sec in cp.sections() for k, v in cp[sec].items()}
    out["topology.side"] = cp["topology"].get("rows", "")
    return out

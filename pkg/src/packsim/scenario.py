"""Scenario files: YAML with a few nested sections, defaults filled in.

Overrides use dotted keys (``tcp.variant=vegas``) or the short aliases in
``ALIASES`` (``variant=vegas``, ``speed=20``).
"""
import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .tcp import VARIANTS

DEFAULTS = {
    "name": "unnamed",
    "duration_s": 360.0,
    "seed": 1,
    "area_w": 1000.0,
    "area_h": 1000.0,
    "nodes": None,
    "flows": None,
    "faults": [],
    "radio": {
        "range_m": 250.0,
        "cs_range_m": 250.0,
        "link_rate_bps": 2_000_000.0,
        "mac_retries": 4,
        "ifq_len": 50,
        "topology_refresh_s": 0.1,
    },
    "mobility": {
        "model": "static",
        "v_min": 1.0,
        "v_max": 0.0,
        "pause_s": 100.0,
    },
    "routing": {
        "protocol": "aodv",
        "pack": False,
        "rreq_retries": 3,
        "rreq_ttl": 35,
        "discovery_timeout_s": 1.0,
        "route_lifetime_s": 10.0,
        "min_allowable_hc": 3,
        "phc_rounding": "ceil",
        "repair_ttl": 1,
        "repair_timeout_s": 0.2,
        "repair_retries": 2,
        "proxy_error_window_s": 2.0,
        "proxy_error_threshold": 3,
    },
    "tcp": {
        "variant": "newreno",
        "mss_bytes": 1000,
        "init_ssthresh_bytes": 65536,
        "rwnd_segments": 65,
        "vegas_alpha": 2.0,
        "vegas_beta": 4.0,
        "ww_filter_gain": 0.1,
    },
    "trace": {
        "enabled": False,
    },
}

ALIASES = {
    "variant": "tcp.variant",
    "routing": "routing.protocol",
    "pack": "routing.pack",
    "speed": "mobility.v_max",
    "speed_mps": "mobility.v_max",
    "duration": "duration_s",
}

BUNDLED = ("grid7x7", "mobile30")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    config: dict
    overrides: dict

    @property
    def seed(self):
        return self.config["seed"]

    @property
    def variant(self):
        return self.config["tcp"]["variant"]

    @property
    def routing(self):
        return self.config["routing"]["protocol"]

    @property
    def pack(self):
        return self.config["routing"]["pack"]

    @property
    def speed(self):
        mob = self.config["mobility"]
        return mob["v_max"] if mob["model"] == "rwp" else 0.0

    def with_overrides(self, overrides):
        merged = dict(self.overrides)
        merged.update(overrides)
        base = copy.deepcopy(self.config)
        for key, value in overrides.items():
            set_key(base, key, value)
        return Scenario(self.name, validate(base), merged)


def _merge(defaults, given, path=""):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ScenarioError(f"unknown key {where!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ScenarioError(f"{where!r} must be a section")
            out[key] = _merge(defaults[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_value(text):
    if not isinstance(text, str):
        return text
    return yaml.safe_load(text)


def set_key(config, dotted, value):
    dotted = ALIASES.get(dotted, dotted)
    parts = dotted.split(".")
    target = config
    defaults = DEFAULTS
    for p in parts[:-1]:
        if p not in target or not isinstance(target[p], dict):
            raise ScenarioError(f"unknown key {dotted!r}")
        target = target[p]
        defaults = defaults.get(p, {})
    last = parts[-1]
    if last not in target and last not in defaults:
        raise ScenarioError(f"unknown key {dotted!r}")
    value = parse_value(value)
    if dotted == "mobility.v_max" and value and config["mobility"]["model"] == "static":
        raise ScenarioError("speed override needs a mobile (rwp) scenario")
    target[last] = value


def validate(cfg):
    if cfg["duration_s"] <= 0:
        raise ScenarioError("duration_s must be positive")
    if cfg["nodes"] is None:
        raise ScenarioError("scenario has no 'nodes' section")
    if cfg["flows"] is None:
        raise ScenarioError("scenario has no 'flows' section")
    r = cfg["routing"]
    if r["protocol"] not in ("aodv", "part"):
        raise ScenarioError(f"routing.protocol must be aodv or part, got {r['protocol']!r}")
    if r["pack"] and r["protocol"] != "part":
        raise ScenarioError("PACK is built on PART: pack=true requires routing.protocol=part")
    if r["phc_rounding"] not in ("ceil", "floor"):
        raise ScenarioError("routing.phc_rounding must be ceil or floor")
    if cfg["tcp"]["variant"] not in VARIANTS:
        raise ScenarioError(f"tcp.variant must be one of {VARIANTS}")
    mob = cfg["mobility"]
    if mob["model"] not in ("static", "rwp"):
        raise ScenarioError("mobility.model must be static or rwp")
    if mob["model"] == "rwp" and mob["v_max"] > 0 and mob["v_min"] > mob["v_max"]:
        mob["v_min"] = mob["v_max"]
    if mob["pause_s"] in ("inf", "infinity"):
        mob["pause_s"] = math.inf
    nodes = cfg["nodes"]
    if not isinstance(nodes, dict) or len(nodes) != 1:
        raise ScenarioError("nodes must be one of {grid: ..}, {chain: ..}, {random: n}, "
                            "{positions: [...]}")
    kind = next(iter(nodes))
    if kind not in ("grid", "chain", "random", "positions"):
        raise ScenarioError(f"unknown node layout {kind!r}")
    flows = cfg["flows"]
    if isinstance(flows, dict):
        if set(flows) - {"random", "start_s", "stagger_s"}:
            raise ScenarioError(f"unknown keys in flows: {sorted(set(flows) - {'random', 'start_s', 'stagger_s'})}")
    elif isinstance(flows, list):
        for f in flows:
            if set(f) - {"src", "dst", "start_s"} or "src" not in f or "dst" not in f:
                raise ScenarioError(f"flow entries need src, dst[, start_s]: {f!r}")
    else:
        raise ScenarioError("flows must be a list or a {random: n} section")
    for f in cfg["faults"]:
        if set(f) != {"node", "flow", "seqno"}:
            raise ScenarioError(f"fault entries need node, flow, seqno: {f!r}")
    return cfg


def from_dict(data, name=None):
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    cfg = validate(_merge(DEFAULTS, data))
    return Scenario(name or cfg["name"], cfg, {})


def load_scenario(path_or_name, overrides=None):
    """Load a scenario file or a bundled scenario by name."""
    path = Path(str(path_or_name))
    if path.exists():
        text = path.read_text()
    elif str(path_or_name) in BUNDLED:
        text = resources.files("packsim.scenarios").joinpath(f"{path_or_name}.yaml").read_text()
    else:
        raise ScenarioError(f"no scenario file or bundled scenario named {path_or_name!r}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path_or_name}: {exc}") from exc
    sc = from_dict(data)
    if overrides:
        sc = sc.with_overrides(overrides)
    return sc


def parse_overrides(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out

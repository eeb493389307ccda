"""Scenario files: loading, validation, overrides and expansion into sweep points.

A scenario is a nested YAML mapping.  Anything left out is taken from the
bundled ``default_scenario.yaml``; keys that the default does not know are
rejected so that typos never pass silently.
"""
from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from . import distributions as dists
from .analytic import DelayProfile, UeClassParams
from .attack import AttackConfig
from .network import LinkDelays, NetworkConfig
from .rrc import RrcTimers
from .sim import SimPoint
from .traffic import WebModelParams

ENGINES = ("simulation", "analytic", "both")
# list-valued sweep axes; a scalar given for one of these is wrapped
SWEEP_KEYS = {("population", "attacker_fractions"), ("rrc", "pch_enabled"),
              ("attack", "tau_mean_s"), ("simulation", "seeds")}
# short names accepted by --set
ALIASES = {
    "attacker_fraction": "population.attacker_fractions",
    "attacker_fractions": "population.attacker_fractions",
    "tau_mean_s": "attack.tau_mean_s",
    "pch_enabled": "rrc.pch_enabled",
    "n_ues": "population.n_ues",
    "seeds": "simulation.seeds",
    "engine": "engine",
}


class SchemaError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


def default_dict() -> dict:
    text = resources.files("rrcstorm").joinpath("data/default_scenario.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base: dict, upd: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in upd.items():
        p = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise SchemaError(p, "unknown key")
        if isinstance(base[key], dict) and path != "web":
            if not isinstance(val, dict):
                raise SchemaError(p, "expected a mapping")
            out[key] = _merge(base[key], val, p)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    if "=" not in item:
        raise SchemaError(item, "override must look like key=value")
    key, raw = item.split("=", 1)
    key = ALIASES.get(key.strip(), key.strip())
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise SchemaError(key, f"cannot parse value {raw!r}") from exc
    return key.split("."), value


def apply_overrides(data: dict, overrides) -> dict:
    data = copy.deepcopy(data)
    for item in overrides or ():
        keys, value = parse_override(item)
        node = data
        for i, k in enumerate(keys[:-1]):
            if not isinstance(node, dict) or k not in node:
                raise SchemaError(".".join(keys[:i + 1]), "unknown key")
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise SchemaError(".".join(keys), "unknown key")
        node[keys[-1]] = value
    return data


def _num(data, path, lo=None, hi=None, integer=False, positive=False):
    node = data
    for k in path.split("."):
        node = node[k]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise SchemaError(path, f"expected a number, got {node!r}")
    if integer and int(node) != node:
        raise SchemaError(path, "expected an integer")
    if positive and not node > 0:
        raise SchemaError(path, "must be > 0")
    if lo is not None and node < lo:
        raise SchemaError(path, f"must be >= {lo}")
    if hi is not None and node > hi:
        raise SchemaError(path, f"must be <= {hi}")
    return node


def validate(data: dict) -> dict:
    """Type and range checks on a merged scenario.  Returns ``data`` with sweep
    axes normalised to lists."""
    for sec, key in SWEEP_KEYS:
        if not isinstance(data[sec][key], list):
            data[sec][key] = [data[sec][key]]
        if not data[sec][key]:
            raise SchemaError(f"{sec}.{key}", "must not be empty")
    if data["engine"] not in ENGINES:
        raise SchemaError("engine", f"must be one of {ENGINES}")
    _num(data, "population.n_ues", lo=1, integer=True)
    for i, f in enumerate(data["population"]["attacker_fractions"]):
        if isinstance(f, bool) or not isinstance(f, (int, float)) or not 0 <= f <= 1:
            raise SchemaError(f"population.attacker_fractions[{i}]", "must be a number in [0, 1]")
    for i, t in enumerate(data["attack"]["tau_mean_s"]):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or t < 0:
            raise SchemaError(f"attack.tau_mean_s[{i}]", "must be a number >= 0")
    for i, p in enumerate(data["rrc"]["pch_enabled"]):
        if not isinstance(p, bool):
            raise SchemaError(f"rrc.pch_enabled[{i}]", "must be true or false")
    for i, s in enumerate(data["simulation"]["seeds"]):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise SchemaError(f"simulation.seeds[{i}]", "must be a non-negative integer")
    for k in ("t1_s", "t2_pch_enabled_s", "t2_pch_disabled_s", "t3_s", "buffer_threshold_bytes"):
        _num(data, f"rrc.{k}", positive=True)
    if data["attack"]["kind"] not in ("dch", "fach"):
        raise SchemaError("attack.kind", "must be 'dch' or 'fach'")
    for k in ("payload_small_bytes", "payload_burst_bytes"):
        _num(data, f"attack.{k}", positive=True)
    a0 = _num(data, "attack.activation_start_s", lo=0)
    a1 = _num(data, "attack.activation_end_s", lo=a0)
    if not isinstance(data["attack"]["kickstart"], bool):
        raise SchemaError("attack.kickstart", "must be true or false")
    for k in ("ue_rnc_delay_s", "rnc_sgsn_delay_s", "sgsn_ggsn_delay_s", "ggsn_server_delay_s"):
        _num(data, f"network.{k}", lo=0)
    for k in ("fach_rate_bps", "dch_rate_bps"):
        _num(data, f"network.{k}", positive=True)
    _num(data, "network.rate_jitter", lo=0, hi=0.99)
    _num(data, "network.n_node_bs", lo=1, integer=True)
    _num(data, "network.n_servers", lo=1, integer=True)
    _num(data, "rnc.k_servers", lo=1, integer=True)
    _num(data, "rnc.transition_service_s", positive=True)
    _num(data, "rnc.other_service_s", positive=True)
    _num(data, "rnc.capacity_reference_ues", positive=True)
    for key in WebModelParams.KEYS:
        try:
            dists.from_dict(data["web"][key], WebModelParams.KEYS[key][1])
        except (dists.BadDistribution, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"web.{key}", str(exc)) from None
    _num(data, "web.initial_session_delay_factor", lo=0)
    for k in ("lambda_l_per_s", "lambda_h_per_s", "mu_l_per_s", "mu_h_per_s"):
        _num(data, f"analytic.{k}", lo=0)
    _num(data, "analytic.processing_scale", positive=True)
    _num(data, "analytic.tau_floor_s", positive=True)
    _num(data, "analytic.damping", lo=0, hi=1, positive=True)
    _num(data, "analytic.tolerance", positive=True)
    _num(data, "analytic.max_iterations", lo=1, integer=True)
    dur = _num(data, "simulation.duration_s", positive=True)
    w0 = _num(data, "simulation.window_start_s", lo=0)
    w1 = _num(data, "simulation.window_end_s", hi=dur)
    if not w1 > w0:
        raise SchemaError("simulation.window_end_s", "window must have positive length")
    if w0 < a1 and any(f > 0 for f in data["population"]["attacker_fractions"]):
        raise SchemaError("simulation.window_start_s",
                          "measurement window must start after the last attacker activation")
    if not isinstance(data["simulation"]["trace"], bool):
        raise SchemaError("simulation.trace", "must be true or false")
    return data


@dataclass(frozen=True)
class Point:
    """One sweep coordinate; the join key between the two engines."""

    tau_mean_s: float
    attacker_fraction: float
    pch: bool

    @property
    def key(self):
        return (float(self.tau_mean_s), float(self.attacker_fraction), bool(self.pch))


class Scenario:
    def __init__(self, data: dict):
        self.data = validate(data)

    @classmethod
    def load(cls, path=None, overrides=None) -> "Scenario":
        data = default_dict()
        if path is not None:
            try:
                user = yaml.safe_load(Path(path).read_text()) or {}
            except yaml.YAMLError as exc:
                raise SchemaError(str(path), f"not valid YAML: {exc}") from None
            if not isinstance(user, dict):
                raise SchemaError("", "scenario must be a mapping")
            user.pop("manifest", None)
            data = _merge(data, user)
        return cls(apply_overrides(data, overrides))

    def __getitem__(self, section):
        return self.data[section]

    @property
    def engine(self) -> str:
        return self.data["engine"]

    @property
    def n_ues(self) -> int:
        return int(self.data["population"]["n_ues"])

    @property
    def seeds(self) -> list[int]:
        return [int(s) for s in self.data["simulation"]["seeds"]]

    def points(self) -> list[Point]:
        """Sweep grid ordered by pch, fraction, tau.  Zero-fraction points keep
        every tau so the grid stays rectangular."""
        d = self.data
        return [Point(float(t), float(f), bool(p)) for p, f, t in itertools.product(
            d["rrc"]["pch_enabled"], d["population"]["attacker_fractions"], d["attack"]["tau_mean_s"])]

    # -- component configs ------------------------------------------------
    def timers(self, pch: bool) -> RrcTimers:
        r = self.data["rrc"]
        return RrcTimers(float(r["t1_s"]),
                         float(r["t2_pch_enabled_s"] if pch else r["t2_pch_disabled_s"]),
                         float(r["t3_s"]))

    def links(self) -> LinkDelays:
        n = self.data["network"]
        return LinkDelays(float(n["ue_rnc_delay_s"]), float(n["rnc_sgsn_delay_s"]),
                          float(n["sgsn_ggsn_delay_s"]), float(n["ggsn_server_delay_s"]))

    def service_times(self) -> tuple[float, float]:
        """RNC class service times slowed down for the simulated population."""
        r = self.data["rnc"]
        scale = float(r["capacity_reference_ues"]) / self.n_ues
        return float(r["transition_service_s"]) * scale, float(r["other_service_s"]) * scale

    def network_config(self, pch: bool) -> NetworkConfig:
        n = self.data["network"]
        st, so = self.service_times()
        return NetworkConfig(
            pch_enabled=pch, timers=self.timers(pch),
            theta=float(self.data["rrc"]["buffer_threshold_bytes"]), links=self.links(),
            fach_rate_bps=float(n["fach_rate_bps"]), dch_rate_bps=float(n["dch_rate_bps"]),
            rate_jitter=float(n["rate_jitter"]), k_servers=int(self.data["rnc"]["k_servers"]),
            transition_service_s=st, other_service_s=so,
            n_node_bs=int(n["n_node_bs"]), n_servers=int(n["n_servers"]))

    def attack_config(self, tau: float) -> AttackConfig:
        a = self.data["attack"]
        return AttackConfig(kind=a["kind"], tau_mean=float(tau),
                            payload_small=float(a["payload_small_bytes"]),
                            payload_burst=float(a["payload_burst_bytes"]),
                            activation_window=(float(a["activation_start_s"]),
                                               float(a["activation_end_s"])),
                            kickstart=bool(a["kickstart"]),
                            theta=float(self.data["rrc"]["buffer_threshold_bytes"]))

    def web_params(self) -> WebModelParams:
        return WebModelParams.from_scenario(self.data["web"])

    def sim_point(self, point: Point, seed: int) -> SimPoint:
        s = self.data["simulation"]
        return SimPoint(n_ues=self.n_ues, attacker_fraction=point.attacker_fraction,
                        network=self.network_config(point.pch),
                        attack=self.attack_config(point.tau_mean_s), web=self.web_params(),
                        duration=float(s["duration_s"]),
                        window=(float(s["window_start_s"]), float(s["window_end_s"])),
                        seed=int(seed))

    def normal_params(self) -> UeClassParams:
        a = self.data["analytic"]
        return UeClassParams(float(a["lambda_l_per_s"]), float(a["lambda_h_per_s"]),
                             float(a["mu_l_per_s"]), float(a["mu_h_per_s"]))

    def delay_profile(self) -> DelayProfile:
        st, so = self.service_times()
        n = self.data["network"]
        prof = DelayProfile.from_links(float(n["ue_rnc_delay_s"]), st, so)
        return prof.scaled_processing(float(self.data["analytic"]["processing_scale"]))

    def manifest(self, extra: dict | None = None) -> dict:
        out = copy.deepcopy(self.data)
        if extra:
            out["manifest"] = extra
        return out

    def dump(self, extra: dict | None = None) -> str:
        return yaml.safe_dump(self.manifest(extra), sort_keys=False)

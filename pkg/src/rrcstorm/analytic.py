"""Closed-form signalling model of a UE population.

A continuous-time Markov chain describes one UE's behaviour (normal usage
plus optional misbehaving triggers).  Its stationary distribution gives the
per-UE signalling rate towards the RNC and the core network.  An M/M/K
approximation of the RNC signalling server couples the UEs through the mean
queueing delay ``w``, which is found by damped fixed-point iteration.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .rrc import RrcTimers, TransitionSpec, transition_table


class DegenerateModel(ValueError):
    pass


class SingularModel(ValueError):
    pass


class Saturated(ArithmeticError):
    """Raised when the offered load reaches the server capacity (rho >= 1)."""


NORMAL = "normal"
ATTACK = "attack"

ALL_CODES = ("IF", "ID", "PF", "PD", "FD", "DF", "FP", "FI", "PI")


@dataclass(frozen=True)
class UeClassParams:
    """Per-UE rates (1/s).  ``inv_tau_*`` are the misbehaving trigger rates."""

    lambda_l: float
    lambda_h: float
    mu_l: float
    mu_h: float
    inv_tau_l: float = 0.0
    inv_tau_h: float = 0.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{k} must be finite and >= 0, got {v}")

    @property
    def is_normal(self) -> bool:
        return self.inv_tau_l == 0 and self.inv_tau_h == 0

    def with_attack(self, kind: str, tau_mean: float, tau_floor: float = 1e-3) -> "UeClassParams":
        """Same user plus a FACH or DCH attack with mean reaction delay ``tau_mean``.

        ``tau_mean = 0`` is clamped to ``tau_floor`` since the chain needs a
        finite rate.
        """
        rate = 1.0 / max(tau_mean, tau_floor)
        if kind == "dch":
            return replace(self, inv_tau_h=rate)
        if kind == "fach":
            return replace(self, inv_tau_l=rate)
        raise ValueError(f"unknown attack kind {kind!r}")


@dataclass(frozen=True)
class DelayProfile:
    """Per-transition fixed delays (s), keyed by transition code such as ``"IF"``.

    ``comm_delay`` sums link delays over the transition's RAN messages,
    ``proc_delay_rnc`` the RNC processing of those messages and
    ``proc_delay_other`` processing elsewhere.  ``per_msg_proc_rnc`` holds
    the two RNC message-class service times.
    """

    comm_delay: Mapping[str, float]
    proc_delay_rnc: Mapping[str, float]
    proc_delay_other: Mapping[str, float]
    per_msg_proc_rnc: Mapping[str, float]

    @classmethod
    def from_links(cls, link_delay: float, transition_service: float, other_service: float,
                   other_delay: float = 0.0) -> "DelayProfile":
        specs = _all_specs()
        comm, proc, other = {}, {}, {}
        for code, spec in specs.items():
            comm[code] = spec.ran_msgs * link_delay
            proc[code] = (spec.effecting_msgs * transition_service
                          + (spec.ran_msgs - spec.effecting_msgs) * other_service)
            other[code] = other_delay
        for table in (comm, proc, other):
            if any(v < 0 for v in table.values()):
                raise ValueError("delays must be >= 0")
        return cls(comm, proc, other,
                   {"transition": transition_service, "other": other_service})

    def scaled_processing(self, factor: float) -> "DelayProfile":
        return DelayProfile(
            dict(self.comm_delay),
            {k: v * factor for k, v in self.proc_delay_rnc.items()},
            dict(self.proc_delay_other),
            {k: v * factor for k, v in self.per_msg_proc_rnc.items()})


def _all_specs() -> dict[str, TransitionSpec]:
    specs = {}
    for pch in (False, True):
        for spec in transition_table(pch).values():
            specs[spec.code] = spec
    return specs


def _costs_by_code(costs) -> dict[str, TransitionSpec]:
    if costs is None:
        return _all_specs()
    out = {}
    for key, spec in costs.items():
        out[spec.code if isinstance(key, tuple) else key] = spec
    return out


# --- chain construction ------------------------------------------------------

# waiting state -> transition code
WAITING = {
    "S_IF": "IF", "S_ID": "ID", "S_PF": "PF", "S_PD": "PD",
    "S_FD": "FD", "S_FDL": "FD", "S_DF": "DF", "S_FP": "FP", "S_FI": "FI", "S_PI": "PI",
}


def behavior_states(pch_enabled: bool) -> tuple[str, ...]:
    """State labels of the chain for one mode.

    ``S_FDL`` is the FACH->DCH waiting state entered from ``FL``; it is kept
    apart from ``S_FD`` (entered from ``F0``) because the two route to
    different DCH substates on an attack-triggered promotion.
    """
    if pch_enabled:
        return ("I", "P", "F0", "FL", "D0", "DL", "DH",
                "S_IF", "S_ID", "S_PF", "S_PD", "S_FD", "S_FDL", "S_DF", "S_FP", "S_PI")
    return ("I", "F0", "FL", "D0", "DL", "DH",
            "S_IF", "S_ID", "S_FD", "S_FDL", "S_DF", "S_FI")


@dataclass
class CtmcModel:
    states: tuple[str, ...]
    Q: np.ndarray
    pch_enabled: bool

    def index(self, name: str) -> int:
        return self.states.index(name)

    def rate(self, src: str, dst: str) -> float:
        return float(self.Q[self.index(src), self.index(dst)])


def transition_delay(xy: str, w: float, costs, delays: DelayProfile) -> float:
    """Mean completion time of transition ``xy`` when each RNC message waits ``w``."""
    if w < 0:
        raise ValueError("w must be >= 0")
    spec = _costs_by_code(costs)[xy]
    return (spec.ran_msgs * w + delays.comm_delay[xy] + delays.proc_delay_rnc[xy]
            + delays.proc_delay_other[xy])


def build_generator(params: UeClassParams, timers: RrcTimers, delays: DelayProfile,
                    w: float, pch_enabled: bool, costs=None) -> CtmcModel:
    if w < 0:
        raise ValueError("w must be >= 0")
    if not (timers.t1 > 0 and timers.t2 > 0 and timers.t3 > 0):
        raise DegenerateModel("inactivity timers must be positive")
    costs = _costs_by_code(costs if costs is not None else transition_table(pch_enabled))
    states = behavior_states(pch_enabled)
    idx = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))

    def add(src, dst, rate):
        if rate > 0:
            Q[idx[src], idx[dst]] += rate

    a_l = params.lambda_l + params.inv_tau_l
    a_h = params.lambda_h + params.inv_tau_h
    p_l = params.lambda_l / a_l if a_l > 0 else 1.0   # exit to the active substate
    p_h = params.lambda_h / a_h if a_h > 0 else 1.0

    add("I", "S_IF", a_l)
    add("I", "S_ID", a_h)
    add("F0", "S_FD", a_h)
    add("FL", "S_FDL", a_h)
    add("F0", "FL", params.lambda_l)
    add("FL", "F0", params.mu_l)
    add("D0", "DL", params.lambda_l)
    add("D0", "DH", params.lambda_h)
    add("DL", "D0", params.mu_l)
    add("DH", "D0", params.mu_h)
    add("D0", "S_DF", 1.0 / timers.t1)
    if pch_enabled:
        add("P", "S_PF", a_l)
        add("P", "S_PD", a_h)
        add("P", "S_PI", 1.0 / timers.t3)
        add("F0", "S_FP", 1.0 / timers.t2)
    else:
        add("F0", "S_FI", 1.0 / timers.t2)

    def sigma(code):
        d = transition_delay(code, w, costs, delays)
        if not d > 0:
            raise DegenerateModel(f"transition {code} has zero duration")
        return 1.0 / d

    exits = {
        "S_IF": [("FL", p_l), ("F0", 1 - p_l)],
        "S_ID": [("DH", p_h), ("D0", 1 - p_h)],
        "S_FD": [("DH", p_h), ("D0", 1 - p_h)],
        "S_FDL": [("DH", p_h), ("DL", 1 - p_h)],
        "S_DF": [("F0", 1.0)],
    }
    if pch_enabled:
        exits.update({
            "S_PF": [("FL", p_l), ("F0", 1 - p_l)],
            "S_PD": [("DH", p_h), ("D0", 1 - p_h)],
            "S_FP": [("P", 1.0)],
            "S_PI": [("I", 1.0)],
        })
    else:
        exits["S_FI"] = [("I", 1.0)]
    for wait_state, routes in exits.items():
        s = sigma(WAITING[wait_state])
        for dst, p in routes:
            add(wait_state, dst, s * p)

    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return CtmcModel(states, Q, pch_enabled)


# --- stationary solution -----------------------------------------------------

@dataclass
class StationaryDistribution:
    states: tuple[str, ...]
    pi: np.ndarray
    residual: float = 0.0

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.pi[self.states.index(name)])
        except ValueError:
            return 0.0

    def as_dict(self) -> dict[str, float]:
        return {s: float(p) for s, p in zip(self.states, self.pi)}


def _reach(adj: np.ndarray, start: int) -> set[int]:
    seen = {start}
    todo = deque([start])
    while todo:
        i = todo.popleft()
        for j in np.flatnonzero(adj[i]):
            j = int(j)
            if j not in seen:
                seen.add(j)
                todo.append(j)
    return seen


def stationary_distribution(model: CtmcModel, start: str | int | None = None) -> StationaryDistribution:
    """Solve pi Q = 0 on the component reachable from ``start`` (default ``I``)."""
    Q = np.asarray(model.Q, dtype=float)
    n = Q.shape[0]
    if start is None:
        start = model.states.index("I") if "I" in model.states else 0
    elif isinstance(start, str):
        start = model.states.index(start)
    adj = (Q > 0) & ~np.eye(n, dtype=bool)
    fwd = _reach(adj, start)
    back = _reach(adj.T, start)
    if fwd - back:
        raise SingularModel("reachable states do not form a single closed class: "
                            + ", ".join(model.states[i] for i in sorted(fwd - back)))
    comp = np.array(sorted(fwd))
    pi = np.zeros(n)
    if comp.size == 1:
        pi[comp[0]] = 1.0
    else:
        sub = Q[np.ix_(comp, comp)]
        A = sub.T.copy()
        A[-1, :] = 1.0
        b = np.zeros(comp.size)
        b[-1] = 1.0
        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SingularModel(str(exc)) from exc
        pi[comp] = np.clip(x, 0.0, None)
        pi /= pi.sum()
    residual = float(np.abs(pi @ Q).max())
    return StationaryDistribution(model.states, pi, residual)


# --- signalling loads --------------------------------------------------------

def _rc(costs, code):
    spec = costs.get(code)
    return (spec.ran_msgs, spec.cn_msgs) if spec is not None else (0, 0)


def ran_load(pi: StationaryDistribution, params: UeClassParams, costs, timers: RrcTimers,
             pch_enabled: bool) -> float:
    """Mean RNC signalling rate (msg/s) generated by one UE."""
    costs = _costs_by_code(costs)
    r = {code: _rc(costs, code)[0] for code in ALL_CODES}
    a_l = params.lambda_l + params.inv_tau_l
    a_h = params.lambda_h + params.inv_tau_h
    to_p = 1.0 if pch_enabled else 0.0
    to_i = 1.0 - to_p
    return (pi["I"] * (a_l * r["IF"] + a_h * r["ID"])
            + pi["P"] * (a_l * r["PF"] + a_h * r["PD"])
            + (pi["F0"] + pi["FL"]) * a_h * r["FD"]
            + pi["D0"] / timers.t1 * r["DF"]
            + pi["F0"] / timers.t2 * (r["FP"] * to_p + r["FI"] * to_i)
            + pi["P"] / timers.t3 * r["PI"] * to_p)


def cn_load(pi: StationaryDistribution, params: UeClassParams, costs, timers: RrcTimers,
            pch_enabled: bool) -> float:
    """Mean SGSN signalling rate (msg/s) generated by one UE."""
    costs = _costs_by_code(costs)
    c = {code: _rc(costs, code)[1] for code in ALL_CODES}
    a_l = params.lambda_l + params.inv_tau_l
    a_h = params.lambda_h + params.inv_tau_h
    to_p = 1.0 if pch_enabled else 0.0
    return (pi["I"] * (a_l * c["IF"] + a_h * c["ID"])
            + pi["F0"] / timers.t2 * c["FI"] * (1.0 - to_p)
            + pi["P"] / timers.t3 * c["PI"] * to_p)


def transition_fluxes(model: CtmcModel, pi: StationaryDistribution) -> dict[str, float]:
    """Stationary rate of entering each waiting state, summed per transition code."""
    flows = pi.pi[:, None] * model.Q
    np.fill_diagonal(flows, 0.0)
    inflow = flows.sum(axis=0)
    out: dict[str, float] = {}
    for i, s in enumerate(model.states):
        if s in WAITING:
            out[WAITING[s]] = out.get(WAITING[s], 0.0) + float(inflow[i])
    return out


def mmk_wait(big_gamma: float, nu: float, k: int) -> float:
    """Mean queueing delay of an M/M/K server with arrival rate ``big_gamma``."""
    if big_gamma < 0 or not nu > 0 or k < 1:
        raise ValueError("need big_gamma >= 0, nu > 0, k >= 1")
    if big_gamma == 0:
        return 0.0
    rho = big_gamma / (k * nu)
    if rho >= 1:
        raise Saturated(f"rho = {rho:.4g} >= 1")
    a = k * rho
    term, head = 1.0, 0.0
    for i in range(k):
        head += term
        term *= a / (i + 1)
    tail = term / (1.0 - rho)          # (K rho)^K / (K! (1 - rho))
    return tail / (k * nu - big_gamma) / (head + tail)


def effective_service_rate(per_transition_loads: Mapping[tuple[str, str], float],
                           populations: Mapping[str, float], delays: DelayProfile,
                           costs=None) -> float:
    """Equivalent RNC service rate for the current message mix.

    ``per_transition_loads[(cls, xy)]`` is the per-UE message rate due to
    transition ``xy``.  Each such message costs the mean per-message RNC
    processing of that transition.  With no load the rate of a
    transition-effecting message is returned.
    """
    costs = _costs_by_code(costs)
    total = 0.0
    work = 0.0
    for (cls, code), load in per_transition_loads.items():
        m = populations.get(cls, 0.0)
        if m == 0 or load == 0:
            continue
        r = costs[code].ran_msgs
        total += m * load
        work += m * load * delays.proc_delay_rnc[code] / r
    if total == 0 or work == 0:
        return 1.0 / delays.per_msg_proc_rnc["transition"]
    return total / work


# --- congestion fixed point --------------------------------------------------

@dataclass
class ClassLoad:
    gamma_r: float
    gamma_c: float
    per_transition: dict[str, float]   # msg/s per UE due to each transition
    pi: StationaryDistribution


def class_load(params: UeClassParams, timers: RrcTimers, delays: DelayProfile, w: float,
               pch_enabled: bool) -> ClassLoad:
    costs = transition_table(pch_enabled)
    model = build_generator(params, timers, delays, w, pch_enabled, costs)
    pi = stationary_distribution(model)
    fluxes = transition_fluxes(model, pi)
    by_code = _costs_by_code(costs)
    per = {code: f * by_code[code].ran_msgs for code, f in fluxes.items()}
    return ClassLoad(ran_load(pi, params, costs, timers, pch_enabled),
                     cn_load(pi, params, costs, timers, pch_enabled), per, pi)


@dataclass
class CongestionSolution:
    w: float
    gamma_r_normal: float
    gamma_r_attack: float
    gamma_c_normal: float
    gamma_c_attack: float
    big_gamma_r: float
    nu: float
    rho: float
    iterations: int
    converged: bool
    m_normal: float = 0.0
    m_attack: float = 0.0
    pi_normal: StationaryDistribution | None = field(default=None, repr=False)
    pi_attack: StationaryDistribution | None = field(default=None, repr=False)

    @property
    def big_gamma_c(self) -> float:
        return self.m_normal * self.gamma_c_normal + self.m_attack * self.gamma_c_attack


def _evaluate(w, normal, attack, m_normal, m_attack, timers, delays, pch_enabled, k):
    ln = class_load(normal, timers, delays, w, pch_enabled)
    la = class_load(attack, timers, delays, w, pch_enabled)
    big_gamma = m_normal * ln.gamma_r + m_attack * la.gamma_r
    loads = {(NORMAL, c): v for c, v in ln.per_transition.items()}
    loads.update({(ATTACK, c): v for c, v in la.per_transition.items()})
    nu = effective_service_rate(loads, {NORMAL: m_normal, ATTACK: m_attack}, delays)
    return ln, la, big_gamma, nu, big_gamma / (k * nu)


def solve_congestion(normal: UeClassParams, attack: UeClassParams, m_normal: float,
                     m_attack: float, timers: RrcTimers, delays: DelayProfile,
                     pch_enabled: bool, k_servers: int = 1, damping: float = 0.5,
                     tol: float = 1e-9, max_iter: int = 10_000) -> CongestionSolution:
    """Find the RNC queueing delay consistent with the load it induces.

    Iterates ``w <- (1 - a) w + a * mmk_wait(Gamma(w), nu(w), K)`` from
    ``w = 0``.  While the offered load is above capacity the target is
    pushed upwards geometrically.  The damping factor is halved whenever the
    iterates start to oscillate without shrinking.
    """
    if m_normal < 0 or m_attack < 0 or m_normal + m_attack == 0:
        raise ValueError("populations must be >= 0 and not both zero")
    args = (normal, attack, m_normal, m_attack, timers, delays, pch_enabled, k_servers)
    alpha = damping
    w = 0.0
    prev_step = None
    best = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        _, _, big_gamma, nu, rho = _evaluate(w, *args)
        if rho >= 1:
            target = 2.0 * w + 1.0 / nu
        else:
            target = mmk_wait(big_gamma, nu, k_servers)
        resid = abs(target - w)
        if rho < 1 and (best is None or resid < best[0]):
            best = (resid, w)
        w_new = (1 - alpha) * w + alpha * target
        step = w_new - w
        if prev_step is not None and step * prev_step < 0 and abs(step) > 0.5 * abs(prev_step):
            alpha *= 0.5
        prev_step = step
        done = abs(step) <= tol * max(w, 1e-6)
        w = w_new
        if done:
            converged = True
            break
    if not converged and best is not None:
        w = best[1]
    ln, la, big_gamma, nu, rho = _evaluate(w, *args)
    if rho >= 1:
        converged = False
    return CongestionSolution(
        w=w, gamma_r_normal=ln.gamma_r, gamma_r_attack=la.gamma_r,
        gamma_c_normal=ln.gamma_c, gamma_c_attack=la.gamma_c, big_gamma_r=big_gamma,
        nu=nu, rho=rho, iterations=it, converged=converged,
        m_normal=m_normal, m_attack=m_attack, pi_normal=ln.pi, pi_attack=la.pi)

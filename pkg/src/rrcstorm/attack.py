"""Misbehaving applications that re-trigger promotions after RRC demotions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .des import ACTIVATION, ATTACK, POPULATION, RngStream
from .rrc import RrcState


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "dch"                  # "dch" or "fach"
    tau_mean: float = 0.0              # mean reaction delay after a demotion (s)
    payload_small: float = 200.0
    payload_burst: float = 2000.0
    activation_window: tuple[float, float] = (1200.0, 1800.0)
    kickstart: bool = True
    theta: float = 1500.0

    def __post_init__(self):
        if self.kind not in ("dch", "fach"):
            raise ValueError(f"attack kind must be 'dch' or 'fach', got {self.kind!r}")
        if not self.payload_small < self.theta <= self.payload_burst:
            raise ValueError("need payload_small < theta <= payload_burst")
        if self.tau_mean < 0:
            raise ValueError("tau_mean must be >= 0")
        lo, hi = self.activation_window
        if lo > hi:
            raise ValueError("activation window start after end")

    @property
    def trigger_state(self) -> RrcState:
        return RrcState.DCH if self.kind == "dch" else RrcState.FACH

    @property
    def payload(self) -> float:
        return self.payload_burst if self.kind == "dch" else self.payload_small


class AttackApp:
    """Reacts to every demotion out of the targeted state.

    Pending reactions are never cancelled: if the UE keeps falling to PCH or
    Idle before the payload leaves, the payload pays the larger promotion.
    """

    def __init__(self, net, ue, config: AttackConfig, rng, n_servers: int):
        self.net = net
        self.sim = net.sim
        self.ue = ue
        self.config = config
        self.rng = rng
        self.n_servers = n_servers
        self.active = False
        self.reactions: list[float] = []
        self.sent = 0
        ue.listeners.append(self.on_rrc_transition)

    def activate(self):
        self.active = True
        if self.config.kickstart:
            self._send()

    def on_rrc_transition(self, src: RrcState, dst: RrcState):
        if self.active and dst < src and src is self.config.trigger_state:
            self.on_rrc_demotion(src, dst)

    def on_rrc_demotion(self, src: RrcState, dst: RrcState):
        tau = self.config.tau_mean
        delay = self.rng.exponential(tau) if tau > 0 else 0.0
        self.reactions.append(delay)
        self.sim.schedule(self.sim.now + delay, self._send, target=self.ue.id, kind="attack")

    def _send(self):
        self.rng.integers(self.n_servers)   # destination; signalling cost does not depend on it
        self.sent += 1
        self.net.uplink(self.ue, self.config.payload, None, None)


def activate_population(n_ues: int, fraction: float, window: tuple[float, float],
                        seed: int) -> list[tuple[int, float]]:
    """Choose ``floor(fraction * n_ues)`` misbehaving UEs and their activation times.

    UEs are ranked by one seeded permutation, so a larger fraction always
    contains the attackers of a smaller one.  Activation times come from
    per-UE streams.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("attacker fraction must lie in [0, 1]")
    k = int(np.floor(fraction * n_ues + 1e-9))
    if k == 0:
        return []
    order = RngStream(seed, (0, POPULATION)).gen.permutation(n_ues)
    chosen = sorted(int(u) for u in order[:k])
    lo, hi = window
    out = []
    for ue in chosen:
        rng = RngStream(seed, (1 + ue, ACTIVATION))
        out.append((ue, float(rng.uniform(lo, hi))))
    return out


def attack_stream(seed: int, ue_id: int) -> RngStream:
    return RngStream(seed, (1 + ue_id, ATTACK))

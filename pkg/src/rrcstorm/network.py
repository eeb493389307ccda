"""Event-driven model of the radio access and packet core network.

UEs own an RRC state machine and a data radio bearer (one FIFO transmission
server per direction).  The RNC owns a signalling server shared by all UEs;
every RAN signalling message of a transition is queued there in FIFO order
with a constant per-class service time.  Core network messages are counted
but not queued.  Wired hops add fixed delays.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from . import rrc
from .des import CHANNEL, RngStream, Simulator
from .metrics import DCH_BUSY, DCH_IDLE, FACH_BUSY, FACH_IDLE, RunTrace
from .rrc import RrcState, RrcTimers, TransitionSpec

IDLE, PCH, FACH, DCH = RrcState.IDLE, RrcState.PCH, RrcState.FACH, RrcState.DCH


class TransitionInFlight(RuntimeError):
    pass


@dataclass(frozen=True)
class LinkDelays:
    """One-way delays (s) of the hops between the UE and an Internet server."""

    ue_rnc: float = 0.002
    rnc_sgsn: float = 0.001
    sgsn_ggsn: float = 0.001
    ggsn_server: float = 0.005

    def __post_init__(self):
        if min(self.ue_rnc, self.rnc_sgsn, self.sgsn_ggsn, self.ggsn_server) < 0:
            raise ValueError("link delays must be >= 0")

    @property
    def rnc_server(self) -> float:
        return self.rnc_sgsn + self.sgsn_ggsn + self.ggsn_server


@dataclass(frozen=True)
class NetworkConfig:
    pch_enabled: bool = False
    timers: RrcTimers = field(default_factory=lambda: RrcTimers.defaults(False))
    theta: float = 1500.0
    links: LinkDelays = field(default_factory=LinkDelays)
    fach_rate_bps: float = 32_000.0
    dch_rate_bps: float = 2_000_000.0
    rate_jitter: float = 0.1
    k_servers: int = 1
    transition_service_s: float = 0.004
    other_service_s: float = 0.001
    n_node_bs: int = 7
    n_servers: int = 10


class RncSignallingServer:
    """FIFO queue in front of ``k`` identical servers, constant service per class.

    Arrivals are handed over in time order, so the start time of each
    message is known on arrival.
    """

    def __init__(self, k: int, service_transition: float, service_other: float):
        if k < 1:
            raise ValueError("need at least one server")
        self.k = k
        self.service = (service_transition, service_other)
        self._free = [0.0] * k
        self.served = 0
        self.busy_time = 0.0

    def serve(self, now: float, transition_effecting: bool) -> tuple[float, float]:
        """Admit a message arriving ``now``; return ``(start, done)``."""
        free = self._free
        svc = self.service[0] if transition_effecting else self.service[1]
        start = free[0] if free[0] > now else now
        done = start + svc
        heapq.heapreplace(free, done)
        self.served += 1
        self.busy_time += svc
        return start, done

    @property
    def backlog_until(self) -> float:
        return min(self._free)


class Packet:
    __slots__ = ("remaining", "callback", "arg", "jitter")

    def __init__(self, size, callback, arg):
        self.remaining = size
        self.callback = callback
        self.arg = arg
        self.jitter = None


class BearerQueue:
    """One direction of a radio bearer: FIFO queue plus a transmission server.

    A rate change while a packet is on air applies to the rest of that packet.
    """

    __slots__ = ("net", "ue", "queue", "bytes", "rate", "tx_rate", "started", "done_ev", "on_done")

    def __init__(self, net, ue, on_done):
        self.net = net
        self.ue = ue
        self.queue: deque[Packet] = deque()
        self.bytes = 0.0
        self.rate = 0.0
        self.tx_rate = 0.0
        self.started = 0.0
        self.done_ev = None
        self.on_done = on_done

    @property
    def transmitting(self) -> bool:
        return self.done_ev is not None

    def enqueue(self, size, callback, arg):
        self.queue.append(Packet(size, callback, arg))
        self.bytes += size
        if self.done_ev is None and self.rate > 0:
            self._start()

    def _start(self):
        pkt = self.queue[0]
        if pkt.jitter is None:
            pkt.jitter = self.net.jitter(self.ue)
        self.tx_rate = self.rate * pkt.jitter
        sim = self.net.sim
        self.started = sim.now
        self.done_ev = sim.schedule(sim.now + pkt.remaining * 8.0 / self.tx_rate, self._done)
        self.net.update_bucket(self.ue)

    def _done(self):
        pkt = self.queue.popleft()
        self.bytes -= pkt.remaining
        if self.bytes < 1e-9:
            self.bytes = 0.0
        self.done_ev = None
        if self.queue and self.rate > 0:
            self._start()
        else:
            self.net.update_bucket(self.ue)
        self.on_done(self.ue, pkt)

    def set_rate(self, rate: float):
        if rate == self.rate:
            return
        if self.done_ev is not None:
            sim = self.net.sim
            sent = (sim.now - self.started) * self.tx_rate / 8.0
            pkt = self.queue[0]
            sent = min(sent, pkt.remaining)
            pkt.remaining -= sent
            self.bytes -= sent
            sim.cancel(self.done_ev)
            self.done_ev = None
        self.rate = rate
        if rate > 0 and self.queue:
            self._start()


class UE:
    def __init__(self, net, ue_id: int, attacker: bool = False):
        self.id = ue_id
        self.attacker = attacker
        self.state = IDLE
        self.inflight: TransitionSpec | None = None
        self.timer_ev = None
        self.ul = BearerQueue(net, self, net._uplink_done)
        self.dl = BearerQueue(net, self, net._downlink_done)
        self.listeners = []          # called as f(src, dst) after each transition
        self.bucket = None
        self.bucket_since = 0.0
        self.transitions_done = 0

    @property
    def pending_bytes(self) -> float:
        return max(self.ul.bytes, self.dl.bytes)

    @property
    def has_data(self) -> bool:
        return bool(self.ul.queue or self.dl.queue)

    def __repr__(self):
        return f"UE({self.id}, {self.state.name}{', attacker' if self.attacker else ''})"


class Network:
    def __init__(self, sim: Simulator, config: NetworkConfig, n_ues: int, seed: int = 0,
                 trace: RunTrace | None = None):
        self.sim = sim
        self.cfg = config
        self.seed = seed
        self.trace = trace if trace is not None else RunTrace(n_ues, config.k_servers)
        self.table = rrc.transition_table(config.pch_enabled)
        self.rnc = RncSignallingServer(config.k_servers, config.transition_service_s,
                                       config.other_service_s)
        self.ues = [UE(self, i) for i in range(n_ues)]
        self._jitter_rng = {}
        self._state_rate = {FACH: config.fach_rate_bps, DCH: config.dch_rate_bps}
        self._timer_len = {DCH: (rrc.Timer.T1, config.timers.t1),
                           FACH: (rrc.Timer.T2, config.timers.t2)}
        if config.pch_enabled:
            self._timer_len[PCH] = (rrc.Timer.T3, config.timers.t3)
        self.ran_count = 0
        self.cn_count = 0
        self.transition_log: list[tuple[float, int, RrcState, RrcState]] | None = None

    # -- randomness ---------------------------------------------------------
    def jitter(self, ue: UE) -> float:
        j = self.cfg.rate_jitter
        if j <= 0:
            return 1.0
        rng = self._jitter_rng.get(ue.id)
        if rng is None:
            rng = self._jitter_rng[ue.id] = RngStream(self.seed, (1 + ue.id, CHANNEL))
        return 1.0 + j * (2.0 * rng.random() - 1.0)

    # -- data plane ---------------------------------------------------------
    def uplink(self, ue: UE, nbytes: float, callback, arg):
        """Queue ``nbytes`` at the UE; ``callback(arg)`` fires on arrival at the server."""
        if not nbytes > 0:
            raise ValueError("payload must be positive")
        ue.ul.enqueue(nbytes, callback, arg)
        self._on_data(ue)

    def downlink(self, ue: UE, nbytes: float, server_delay: float, callback, arg):
        """Server sends ``nbytes`` after ``server_delay``; ``callback(arg)`` fires at the UE."""
        delay = server_delay + self.cfg.links.rnc_server + self.cfg.links.ue_rnc
        self.sim.schedule(self.sim.now + delay, self._downlink_arrive, ue, nbytes, callback, arg,
                          target=ue.id, kind="dl_arrive")

    def _downlink_arrive(self, ue, nbytes, callback, arg):
        ue.dl.enqueue(nbytes, callback, arg)
        self._on_data(ue)

    def _uplink_done(self, ue: UE, pkt: Packet):
        if pkt.callback is not None:
            delay = self.cfg.links.ue_rnc + self.cfg.links.rnc_server
            self.sim.schedule(self.sim.now + delay, pkt.callback, pkt.arg, target=ue.id,
                              kind="ul_deliver")
        self._maybe_arm_timer(ue)

    def _downlink_done(self, ue: UE, pkt: Packet):
        if pkt.callback is not None:
            pkt.callback(pkt.arg)
        self._maybe_arm_timer(ue)

    # -- RRC control --------------------------------------------------------
    def _on_data(self, ue: UE):
        if ue.inflight is not None:
            return            # coalesced; re-evaluated when the transition completes
        if ue.timer_ev is not None:
            self.sim.cancel(ue.timer_ev)
            ue.timer_ev = None
        action = rrc.on_uplink_data(ue.state, ue.pending_bytes, self.cfg.theta)
        if isinstance(action, rrc.Promote):
            self.execute_transition(ue, action.to)

    def _maybe_arm_timer(self, ue: UE):
        if ue.inflight is not None or ue.timer_ev is not None or ue.has_data:
            return
        entry = self._timer_len.get(ue.state)
        if entry is not None:
            timer, length = entry
            ue.timer_ev = self.sim.schedule(self.sim.now + length, self._timer_expired, ue, timer,
                                            target=ue.id, kind="inactivity")

    def inactivity_monitor(self, ue: UE):
        """Re-arm the current state's inactivity timer if the bearer is idle."""
        if ue.timer_ev is not None:
            self.sim.cancel(ue.timer_ev)
            ue.timer_ev = None
        self._maybe_arm_timer(ue)

    def _timer_expired(self, ue: UE, timer):
        ue.timer_ev = None
        if ue.inflight is not None or ue.has_data:
            return
        dst = rrc.on_timer_expiry(ue.state, timer, self.cfg.pch_enabled)
        self.execute_transition(ue, dst)

    def execute_transition(self, ue: UE, dst: RrcState):
        if ue.inflight is not None:
            raise TransitionInFlight(f"UE {ue.id} already in {ue.inflight.code}")
        spec = self.table.get((ue.state, dst))
        if spec is None:
            raise rrc.IllegalTransition(f"{ue.state.name}->{dst.name}")
        if ue.timer_ev is not None:
            self.sim.cancel(ue.timer_ev)
            ue.timer_ev = None
        ue.inflight = spec
        now = self.sim.now
        if spec.cn_msgs:
            self.cn_count += spec.cn_msgs
            self.trace.cn_messages(ue.id, now, spec.cn_msgs)
        self._apply_rate(ue)
        self.update_bucket(ue)
        self.sim.schedule(now + self.cfg.links.ue_rnc, self._message_at_rnc, ue, spec, 0,
                          target=ue.id, kind="rrc_msg")
        return spec

    def _message_at_rnc(self, ue: UE, spec: TransitionSpec, n: int):
        now = self.sim.now
        effecting = n == min(1, spec.ran_msgs - 1)
        start, done = self.rnc.serve(now, effecting)
        self.ran_count += 1
        self.trace.ran_message(ue.id, now, start, done)
        if n + 1 < spec.ran_msgs:
            self.sim.schedule(done + self.cfg.links.ue_rnc, self._message_at_rnc, ue, spec, n + 1,
                              target=ue.id, kind="rrc_msg")
        else:
            self.sim.schedule(done, self._complete_transition, ue, spec, target=ue.id,
                              kind="rrc_done")

    def _complete_transition(self, ue: UE, spec: TransitionSpec):
        now = self.sim.now
        ue.state = spec.dst
        ue.inflight = None
        ue.transitions_done += 1
        self.trace.transition(now, ue.id, spec.src, spec.dst)
        if self.transition_log is not None:
            self.transition_log.append((now, ue.id, spec.src, spec.dst))
        self._apply_rate(ue)
        self.update_bucket(ue)
        for listener in ue.listeners:
            listener(spec.src, spec.dst)
        if ue.inflight is None:
            if ue.has_data:
                self._on_data(ue)
            else:
                self._maybe_arm_timer(ue)

    # -- bearer rates and occupancy -----------------------------------------
    def rate_for(self, ue: UE) -> float:
        """Data rate of the UE's bearer.  During a transition the lower of the
        two states applies, and nothing flows if either end is Idle or PCH."""
        if ue.inflight is not None:
            low = min(ue.inflight.src, ue.inflight.dst)
            return self._state_rate.get(low, 0.0)
        return self._state_rate.get(ue.state, 0.0)

    def _apply_rate(self, ue: UE):
        r = self.rate_for(ue)
        ue.ul.set_rate(r)
        ue.dl.set_rate(r)

    def bucket_of(self, ue: UE):
        if ue.inflight is not None:
            src = ue.inflight.src
            return FACH_IDLE if src is FACH else DCH_IDLE if src is DCH else None
        if ue.state is FACH:
            return FACH_BUSY if (ue.ul.done_ev or ue.dl.done_ev) else FACH_IDLE
        if ue.state is DCH:
            return DCH_BUSY if (ue.ul.done_ev or ue.dl.done_ev) else DCH_IDLE
        return None

    def update_bucket(self, ue: UE):
        b = self.bucket_of(ue)
        if b != ue.bucket:
            now = self.sim.now
            if ue.bucket is not None:
                self.trace.occupancy(ue.id, ue.bucket, ue.bucket_since, now)
            ue.bucket = b
            ue.bucket_since = now

    def close(self, t_end: float):
        """Flush open occupancy intervals at the end of a run."""
        for ue in self.ues:
            if ue.bucket is not None:
                self.trace.occupancy(ue.id, ue.bucket, ue.bucket_since, t_end)
                ue.bucket_since = t_end
        self.trace.duration = t_end

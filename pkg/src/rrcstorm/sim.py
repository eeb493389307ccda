"""One simulation run: build the network, attach applications, measure."""
from __future__ import annotations

from dataclasses import dataclass, field

from .attack import AttackApp, AttackConfig, activate_population, attack_stream
from .des import TRAFFIC, RngStream, Simulator
from .metrics import MetricsFrame, RunTrace, record_window
from .network import Network, NetworkConfig
from .traffic import WebBrowsingApp, WebModelParams


@dataclass(frozen=True)
class SimPoint:
    n_ues: int = 200
    attacker_fraction: float = 0.0
    network: NetworkConfig = field(default_factory=NetworkConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    web: WebModelParams = field(default_factory=WebModelParams)
    duration: float = 3600.0
    window: tuple[float, float] = (1800.0, 3600.0)
    seed: int = 1


@dataclass
class RunResult:
    trace: RunTrace
    frame: MetricsFrame
    net: Network
    events: int


def simulate(point: SimPoint, keep_log: bool = False) -> RunResult:
    sim = Simulator()
    trace = RunTrace(point.n_ues, point.network.k_servers)
    net = Network(sim, point.network, point.n_ues, seed=point.seed, trace=trace)
    if keep_log:
        net.transition_log = []
    n_servers = point.network.n_servers

    def page_done(ue, req):
        trace.page(ue.id, req.t_request, max(req.completion_times))

    for ue in net.ues:
        app = WebBrowsingApp(net, ue, point.web, RngStream(point.seed, (1 + ue.id, TRAFFIC)),
                             n_servers, on_page_done=page_done)
        app.start()
    for ue_id, t_act in activate_population(point.n_ues, point.attacker_fraction,
                                            point.attack.activation_window, point.seed):
        ue = net.ues[ue_id]
        ue.attacker = True
        trace.attacker[ue_id] = True
        trace.activation[ue_id] = t_act
        app = AttackApp(net, ue, point.attack, attack_stream(point.seed, ue_id), n_servers)
        sim.schedule(t_act, app.activate, target=ue_id, kind="attack_activate")

    stats = sim.run_until(point.duration)
    net.close(point.duration)
    return RunResult(trace, record_window(trace, point.window), net, stats.events_processed)

"""Interactive web browsing workload (random and scripted modes)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from . import distributions as dists
from .distributions import Constant, Histogram, TruncatedExponential, TruncatedNormal, Uniform

KB = 1000.0


class UnorderedTrace(ValueError):
    pass


@dataclass(frozen=True)
class WebModelParams:
    """Browsing model parameters in seconds and bytes."""

    activity_period: object = Constant(24 * 3600.0)
    activation_delay: object = Uniform(60.0, 600.0)
    initial_session_delay_factor: float = 0.5
    pages_per_session: object = TruncatedNormal(10.0, 5.0, 2.0)
    inter_session: object = TruncatedNormal(1200.0, 600.0, 120.0)
    inter_request: object = TruncatedExponential(60.0, 10.0, 600.0)
    request_len: object = TruncatedNormal(600.0, 100.0, 300.0)
    main_page_len: object = Histogram((0, 10 * KB, 50 * KB, 200 * KB, 500 * KB),
                                      (0.3, 0.4, 0.25, 0.05))
    image_len: object = TruncatedExponential(50 * KB, 1.2 * KB, 400 * KB)
    text_len: object = Histogram((0, 5 * KB, 25 * KB, 100 * KB), (0.5, 0.4, 0.1))
    objects_per_page: object = Histogram((0, 5, 15, 40, 100), (0.3, 0.4, 0.25, 0.05))
    image_ratio: object = Uniform(0.1, 0.5)
    client_proc: object = TruncatedNormal(0.050, 0.010, 0.0)
    server_proc: object = TruncatedNormal(0.004, 0.001, 0.001)

    # scenario key -> (field, unit scale to seconds / bytes)
    KEYS = {
        "activity_period_h": ("activity_period", 3600.0),
        "activation_delay_min": ("activation_delay", 60.0),
        "pages_per_session": ("pages_per_session", 1.0),
        "inter_session_min": ("inter_session", 60.0),
        "inter_request_s": ("inter_request", 1.0),
        "request_len_bytes": ("request_len", 1.0),
        "main_page_len_kb": ("main_page_len", KB),
        "image_len_kb": ("image_len", KB),
        "text_len_kb": ("text_len", KB),
        "objects_per_page": ("objects_per_page", 1.0),
        "image_ratio": ("image_ratio", 1.0),
        "client_proc_ms": ("client_proc", 1e-3),
        "server_proc_ms": ("server_proc", 1e-3),
    }

    @classmethod
    def from_scenario(cls, web: dict) -> "WebModelParams":
        kwargs = {"initial_session_delay_factor": float(web["initial_session_delay_factor"])}
        for key, (name, scale) in cls.KEYS.items():
            kwargs[name] = dists.from_dict(web[key], scale)
        return cls(**kwargs)


def count(x: float) -> int:
    """Integer count from a continuous sample (round half up, never negative)."""
    return max(0, int(math.floor(x + 0.5)))


@dataclass
class PagePlan:
    main_len: float
    main_server_delay: float
    client_delay: float
    object_request_lens: list[float]
    objects: list[tuple[str, float, float]]   # (kind, size_bytes, server_delay_s)

    @property
    def n_images(self) -> int:
        return sum(1 for kind, _, _ in self.objects if kind == "image")


@dataclass
class PageRequest:
    t_request: float
    server: int
    request_len: float
    plan: PagePlan | None = None
    received: int = 0
    completion_times: list[float] = field(default_factory=list)

    @property
    def response_time(self) -> float:
        return max(self.completion_times) - self.t_request


def build_page_response(request: PageRequest | None, params: WebModelParams, rng) -> PagePlan:
    n_e = int(math.floor(params.objects_per_page.sample(rng)))
    ratio = params.image_ratio.sample(rng)
    n_img = min(n_e, count(n_e * ratio))
    objects = []
    for i in range(n_e):
        if i < n_img:
            objects.append(("image", params.image_len.sample(rng), params.server_proc.sample(rng)))
        else:
            objects.append(("text", params.text_len.sample(rng), params.server_proc.sample(rng)))
    return PagePlan(
        main_len=params.main_page_len.sample(rng),
        main_server_delay=params.server_proc.sample(rng),
        client_delay=params.client_proc.sample(rng),
        object_request_lens=[params.request_len.sample(rng) for _ in range(n_e)],
        objects=objects,
    )


class WebBrowsingApp:
    """Browsing user bound to one UE.

    Main page requests are issued on a fixed schedule that does not wait
    for responses.  Embedded objects are requested together after the client
    has processed the main page, and the server answers them in order over
    the same connection.
    """

    def __init__(self, net, ue, params: WebModelParams, rng, n_servers: int, on_page_done=None):
        self.net = net
        self.sim = net.sim
        self.ue = ue
        self.params = params
        self.rng = rng
        self.n_servers = n_servers
        self.on_page_done = on_page_done
        self.active_until = -1.0
        self.remaining = 0
        self.requests_issued = 0
        self.sessions_started = 0
        self.schedule_log: list[tuple[float, str]] | None = None

    # -- random mode --------------------------------------------------------
    def start(self, at: float = 0.0):
        delay = self.params.activation_delay.sample(self.rng)
        self.sim.schedule(at + delay, self._activate, target=self.ue.id, kind="web_activate")

    def _activate(self):
        p = self.params
        period = p.activity_period.sample(self.rng)
        self.active_until = self.sim.now + period
        if period < 24 * 3600.0:
            self.sim.schedule(self.sim.now + 24 * 3600.0, self._activate, target=self.ue.id)
        first_gap = p.initial_session_delay_factor * p.inter_session.sample(self.rng)
        self.sim.schedule(self.sim.now + first_gap, self._start_session, target=self.ue.id,
                          kind="web_session")

    def _start_session(self):
        if self.sim.now > self.active_until:
            return
        self.sessions_started += 1
        self.remaining = max(1, count(self.params.pages_per_session.sample(self.rng)))
        self.next_browsing_event()

    def next_browsing_event(self):
        """Issue the current main request and schedule whatever comes next."""
        if self.sim.now > self.active_until:
            return
        self.request_page()
        self.remaining -= 1
        if self.remaining > 0:
            gap = self.params.inter_request.sample(self.rng)
            self.sim.schedule(self.sim.now + gap, self.next_browsing_event, target=self.ue.id,
                              kind="web_request")
        else:
            gap = self.params.inter_session.sample(self.rng)
            self.sim.schedule(self.sim.now + gap, self._start_session, target=self.ue.id,
                              kind="web_session")

    # -- scripted mode ------------------------------------------------------
    def replay_script(self, trace: Iterable[tuple[float, str]]):
        return replay_script(self, trace)

    # -- one page -----------------------------------------------------------
    def request_page(self) -> PageRequest:
        server = int(self.rng.integers(self.n_servers))
        req = PageRequest(self.sim.now, server, self.params.request_len.sample(self.rng))
        self.requests_issued += 1
        if self.schedule_log is not None:
            self.schedule_log.append((self.sim.now, "page"))
        self.net.uplink(self.ue, req.request_len, self._main_at_server, req)
        return req

    def _main_at_server(self, req: PageRequest):
        req.plan = plan = build_page_response(req, self.params, self.rng)
        self.net.downlink(self.ue, plan.main_len, plan.main_server_delay, self._main_received, req)

    def _main_received(self, req: PageRequest):
        req.completion_times.append(self.sim.now)
        if not req.plan.objects:
            self._finish(req)
            return
        self.sim.schedule(self.sim.now + req.plan.client_delay, self._request_objects, req,
                          target=self.ue.id, kind="web_objects")

    def _request_objects(self, req: PageRequest):
        self.net.uplink(self.ue, sum(req.plan.object_request_lens), self._objects_at_server, req)

    def _objects_at_server(self, req: PageRequest):
        ready = 0.0
        for _, size, proc in req.plan.objects:
            ready += proc
            self.net.downlink(self.ue, size, ready, self._object_received, req)

    def _object_received(self, req: PageRequest):
        req.received += 1
        req.completion_times.append(self.sim.now)
        if req.received == len(req.plan.objects):
            self._finish(req)

    def _finish(self, req: PageRequest):
        if self.on_page_done is not None:
            self.on_page_done(self.ue, req)


def replay_script(app: WebBrowsingApp, trace: Iterable[tuple[float, str]]) -> int:
    """Schedule scripted page requests at exactly the listed times."""
    trace = list(trace)
    last = -math.inf
    for t, action in trace:
        if t < last:
            raise UnorderedTrace(f"trace time {t} after {last}")
        if action != "page":
            raise ValueError(f"unknown scripted action {action!r}")
        last = t
    for t, _ in trace:
        app.sim.schedule(t, app.request_page, target=app.ue.id, kind="web_script")
    return len(trace)


def read_script(path) -> list[tuple[float, str]]:
    """Parse a ``time_s,action`` script file.  Blank lines and ``#`` comments are skipped."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if line.lower().startswith("time_s"):
                continue
            try:
                t, action = (x.strip() for x in line.split(","))
                out.append((float(t), action))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'time_s,action'") from None
    return out

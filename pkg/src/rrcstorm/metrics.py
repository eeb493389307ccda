"""Run trace accumulation and windowed measurement frames."""
from __future__ import annotations

import math
from array import array
from dataclasses import asdict, dataclass, fields

import numpy as np

from .rrc import RrcState

FACH_BUSY, FACH_IDLE, DCH_BUSY, DCH_IDLE = range(4)
BUCKETS = ("fach_busy", "fach_idle", "dch_busy", "dch_idle")


class EmptyWindow(ValueError):
    pass


class RunTrace:
    """Append-only columns filled by the network while a run is in progress.

    RAN messages are stamped when the RNC finishes serving them, CN messages
    when the transition that needs them starts.  Each message is counted
    once, at the RNC.
    """

    def __init__(self, n_ues: int, k_servers: int = 1):
        self.n_ues = n_ues
        self.k_servers = k_servers
        self.attacker = np.zeros(n_ues, dtype=bool)
        self.activation: dict[int, float] = {}
        self.duration = 0.0
        # RNC signalling server, one row per RAN message
        self.rnc_arrival = array("d")
        self.rnc_start = array("d")
        self.rnc_done = array("d")
        self.rnc_ue = array("l")
        # core network messages
        self.cn_time = array("d")
        self.cn_ue = array("l")
        # completed RRC transitions
        self.tr_time = array("d")
        self.tr_ue = array("l")
        self.tr_src = array("b")
        self.tr_dst = array("b")
        # completed web pages
        self.page_ue = array("l")
        self.page_request = array("d")
        self.page_done = array("d")
        # channel occupancy intervals
        self.occ_ue = array("l")
        self.occ_bucket = array("b")
        self.occ_t0 = array("d")
        self.occ_t1 = array("d")

    def ran_message(self, ue_id, arrival, start, done):
        self.rnc_arrival.append(arrival)
        self.rnc_start.append(start)
        self.rnc_done.append(done)
        self.rnc_ue.append(ue_id)

    def cn_messages(self, ue_id, t, n):
        for _ in range(n):
            self.cn_time.append(t)
            self.cn_ue.append(ue_id)

    def transition(self, t, ue_id, src, dst):
        self.tr_time.append(t)
        self.tr_ue.append(ue_id)
        self.tr_src.append(int(src))
        self.tr_dst.append(int(dst))

    def page(self, ue_id, t_request, t_done):
        self.page_ue.append(ue_id)
        self.page_request.append(t_request)
        self.page_done.append(t_done)

    def occupancy(self, ue_id, bucket, t0, t1):
        if t1 > t0:
            self.occ_ue.append(ue_id)
            self.occ_bucket.append(bucket)
            self.occ_t0.append(t0)
            self.occ_t1.append(t1)

    def transitions(self):
        """Completed transitions as ``(time, ue, src, dst)`` tuples."""
        return [(t, u, RrcState(s), RrcState(d)) for t, u, s, d in
                zip(self.tr_time, self.tr_ue, self.tr_src, self.tr_dst)]

    def write_event_trace(self, fh):
        """Line-oriented RRC trace: ``time_s,entity,event,from,to``."""
        fh.write("time_s,entity,event,from,to\n")
        for t, u, s, d in self.transitions():
            fh.write(f"{t:.6f},ue{u},rrc_transition,{s.name},{d.name}\n")


@dataclass
class MetricsFrame:
    ran_msgs_per_s: float = 0.0
    cn_msgs_per_s: float = 0.0
    rnc_queue_wait_mean_s: float = 0.0
    rnc_queue_len_mean: float = 0.0
    rnc_arrival_rate_per_s: float = 0.0
    rnc_utilization: float = 0.0
    app_response_time_mean_s: float = 0.0
    pages_completed: float = 0.0
    ran_per_ue_normal: float = 0.0
    ran_per_ue_attack: float = 0.0
    cn_per_ue_normal: float = 0.0
    cn_per_ue_attack: float = 0.0
    fach_busy_normal: float = 0.0
    fach_idle_normal: float = 0.0
    dch_busy_normal: float = 0.0
    dch_idle_normal: float = 0.0
    fach_busy_attack: float = 0.0
    fach_idle_attack: float = 0.0
    dch_busy_attack: float = 0.0
    dch_idle_attack: float = 0.0

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _overlap(t0, t1, a, b):
    return np.clip(np.minimum(t1, b) - np.maximum(t0, a), 0.0, None)


def record_window(trace: RunTrace, window: tuple[float, float]) -> MetricsFrame:
    """Normalise the run's counters over ``window`` (seconds)."""
    a, b = map(float, window)
    length = b - a
    if not length > 0 or a < 0 or (trace.duration and b > trace.duration + 1e-9):
        raise EmptyWindow(f"bad window {window} for a run of {trace.duration} s")
    attacker = trace.attacker
    n_attack = int(attacker.sum())
    n_normal = trace.n_ues - n_attack
    f = MetricsFrame()

    done = np.frombuffer(trace.rnc_done, dtype=float)
    arrival = np.frombuffer(trace.rnc_arrival, dtype=float)
    start = np.frombuffer(trace.rnc_start, dtype=float)
    rnc_ue = np.frombuffer(trace.rnc_ue, dtype=np.int_)
    in_win = (done >= a) & (done < b)
    f.ran_msgs_per_s = float(in_win.sum()) / length
    if n_normal:
        f.ran_per_ue_normal = float((in_win & ~attacker[rnc_ue]).sum()) / length / n_normal
    if n_attack:
        f.ran_per_ue_attack = float((in_win & attacker[rnc_ue]).sum()) / length / n_attack
    arrived = (arrival >= a) & (arrival < b)
    f.rnc_arrival_rate_per_s = float(arrived.sum()) / length
    if arrived.any():
        f.rnc_queue_wait_mean_s = float((start[arrived] - arrival[arrived]).mean())
    f.rnc_queue_len_mean = float(_overlap(arrival, start, a, b).sum()) / length
    f.rnc_utilization = float(_overlap(start, done, a, b).sum()) / length / trace.k_servers

    cn_t = np.frombuffer(trace.cn_time, dtype=float)
    cn_ue = np.frombuffer(trace.cn_ue, dtype=np.int_)
    cn_in = (cn_t >= a) & (cn_t < b)
    f.cn_msgs_per_s = float(cn_in.sum()) / length
    if n_normal:
        f.cn_per_ue_normal = float((cn_in & ~attacker[cn_ue]).sum()) / length / n_normal
    if n_attack:
        f.cn_per_ue_attack = float((cn_in & attacker[cn_ue]).sum()) / length / n_attack

    p_ue = np.frombuffer(trace.page_ue, dtype=np.int_)
    p_req = np.frombuffer(trace.page_request, dtype=float)
    p_done = np.frombuffer(trace.page_done, dtype=float)
    pages = (p_req >= a) & (p_req < b) & ~attacker[p_ue]
    f.pages_completed = float(pages.sum())
    if pages.any():
        f.app_response_time_mean_s = float((p_done[pages] - p_req[pages]).mean())

    per_ue = per_ue_occupancy(trace, (a, b))
    for i, name in enumerate(BUCKETS):
        if n_normal:
            setattr(f, f"{name}_normal", float(per_ue[~attacker, i].mean()))
        if n_attack:
            setattr(f, f"{name}_attack", float(per_ue[attacker, i].mean()))
    return f


def per_ue_occupancy(trace: RunTrace, window: tuple[float, float]) -> np.ndarray:
    """``(n_ues, 4)`` array of bucket time fractions over ``window``."""
    a, b = window
    o_ue = np.frombuffer(trace.occ_ue, dtype=np.int_)
    o_b = np.frombuffer(trace.occ_bucket, dtype=np.int8).astype(np.int_)
    dur = _overlap(np.frombuffer(trace.occ_t0, dtype=float),
                   np.frombuffer(trace.occ_t1, dtype=float), a, b)
    out = np.zeros((trace.n_ues, 4))
    np.add.at(out, (o_ue, o_b), dur)
    return out / (b - a)


def aggregate_runs(frames: list[MetricsFrame]) -> tuple[MetricsFrame, MetricsFrame]:
    """Per-field mean and standard error of the mean."""
    if not frames:
        raise ValueError("need at least one frame")
    names = MetricsFrame.field_names()
    data = np.array([[getattr(fr, n) for n in names] for fr in frames], dtype=float)
    mean = data.mean(axis=0)
    if len(frames) > 1:
        se = data.std(axis=0, ddof=1) / math.sqrt(len(frames))
    else:
        se = np.zeros(len(names))
    return (MetricsFrame(**dict(zip(names, map(float, mean)))),
            MetricsFrame(**dict(zip(names, map(float, se)))))

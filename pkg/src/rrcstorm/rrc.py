"""RRC protocol state machine for a UMTS-like radio access network.

Pure functions over immutable tables. Both the network simulator and the
analytic engine use this module as the single source of transition costs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Union


class RrcState(enum.IntEnum):
    IDLE = 0
    PCH = 1
    FACH = 2
    DCH = 3

    @property
    def connected(self) -> bool:
        return self is not RrcState.IDLE

    @property
    def short(self) -> str:
        return "IPFD"[self.value]


class Trigger(enum.Enum):
    TRAFFIC = "uplink_or_downlink_traffic"
    BUFFER_THRESHOLD = "buffer_threshold"
    TIMER_T1 = "timer_t1"
    TIMER_T2 = "timer_t2"
    TIMER_T3 = "timer_t3"


class Timer(enum.Enum):
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"


class IllegalTransition(ValueError):
    pass


class TimerStateMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RrcTimers:
    """Inactivity timers in seconds: T1 guards DCH, T2 guards FACH, T3 guards PCH."""

    t1: float = 6.0
    t2: float = 12.0
    t3: float = 1200.0

    def __post_init__(self):
        for name in ("t1", "t2", "t3"):
            if not getattr(self, name) > 0:
                raise ValueError(f"timer {name} must be positive, got {getattr(self, name)}")

    @classmethod
    def defaults(cls, pch_enabled: bool) -> "RrcTimers":
        return cls(t1=6.0, t2=4.0 if pch_enabled else 12.0, t3=1200.0)

    def for_timer(self, timer: Timer) -> float:
        return {Timer.T1: self.t1, Timer.T2: self.t2, Timer.T3: self.t3}[timer]


@dataclass(frozen=True)
class BufferThreshold:
    theta: float = 1500.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("buffer threshold must be positive")


@dataclass(frozen=True)
class TransitionSpec:
    src: RrcState
    dst: RrcState
    ran_msgs: int
    cn_msgs: int
    trigger: Trigger
    # number of RNC messages that actually (de)allocate resources; 2 for the
    # composite promotions, 1 otherwise
    effecting_msgs: int = 1

    @property
    def code(self) -> str:
        return self.src.short + self.dst.short

    @property
    def is_promotion(self) -> bool:
        return self.dst > self.src

    @property
    def is_composite(self) -> bool:
        return self.effecting_msgs > 1


I, P, F, D = RrcState.IDLE, RrcState.PCH, RrcState.FACH, RrcState.DCH

# (src, dst, r_xy, c_xy, trigger, only_when_pch) ; None = both modes
_TABLE_ROWS = [
    (I, F, 15, 5, Trigger.TRAFFIC, None),
    (P, F, 3, 0, Trigger.TRAFFIC, True),
    (F, D, 7, 0, Trigger.BUFFER_THRESHOLD, None),
    (D, F, 5, 0, Trigger.TIMER_T1, None),
    (F, I, 5, 3, Trigger.TIMER_T2, False),
    (F, P, 3, 0, Trigger.TIMER_T2, True),
    (P, I, 6, 3, Trigger.TIMER_T3, True),
]


@lru_cache(maxsize=2)
def transition_table(pch_enabled: bool) -> dict[tuple[RrcState, RrcState], TransitionSpec]:
    """All legal transitions for the given mode, keyed by (src, dst).

    Includes the composite promotions IDLE->DCH and PCH->DCH, whose costs are
    the concatenation of the promotion to FACH and FACH->DCH.
    """
    table: dict[tuple[RrcState, RrcState], TransitionSpec] = {}
    for src, dst, r, c, trig, only in _TABLE_ROWS:
        if only is None or only == pch_enabled:
            table[(src, dst)] = TransitionSpec(src, dst, r, c, trig)
    fd = table[(F, D)]
    for src in (I, P):
        if (src, F) in table:
            up = table[(src, F)]
            table[(src, D)] = TransitionSpec(
                src, D, up.ran_msgs + fd.ran_msgs, up.cn_msgs + fd.cn_msgs,
                Trigger.BUFFER_THRESHOLD, effecting_msgs=2)
    return table


def transition_by_code(code: str, pch_enabled: bool) -> TransitionSpec:
    for spec in transition_table(pch_enabled).values():
        if spec.code == code:
            return spec
    raise IllegalTransition(f"{code} is not legal with pch_enabled={pch_enabled}")


def transition_cost(src: RrcState, dst: RrcState, pch_enabled: bool) -> tuple[int, int]:
    """Return ``(ran_msgs, cn_msgs)`` for a legal transition."""
    try:
        spec = transition_table(pch_enabled)[(RrcState(src), RrcState(dst))]
    except KeyError:
        raise IllegalTransition(
            f"{RrcState(src).name}->{RrcState(dst).name} is not legal "
            f"with pch_enabled={pch_enabled}") from None
    return spec.ran_msgs, spec.cn_msgs


# --- actions -----------------------------------------------------------------

@dataclass(frozen=True)
class Promote:
    to: RrcState


class _Simple(enum.Enum):
    RESET_INACTIVITY_TIMER = "reset"
    NO_OP = "noop"


ResetInactivityTimer = _Simple.RESET_INACTIVITY_TIMER
NoOp = _Simple.NO_OP
Action = Union[Promote, _Simple]


def on_uplink_data(state: RrcState, pending_bytes: float, theta: float | BufferThreshold) -> Action:
    """Reaction of the RNC to data waiting on a UE's radio link.

    Used for both directions: downlink promotions share the uplink costs.
    """
    if pending_bytes < 0:
        raise ValueError("pending_bytes must be >= 0")
    if isinstance(theta, BufferThreshold):
        theta = theta.theta
    if state in (RrcState.IDLE, RrcState.PCH):
        return Promote(RrcState.FACH)
    if state is RrcState.FACH:
        if pending_bytes >= theta:
            return Promote(RrcState.DCH)
        return ResetInactivityTimer
    return ResetInactivityTimer


_ARMED = {RrcState.DCH: Timer.T1, RrcState.FACH: Timer.T2, RrcState.PCH: Timer.T3}


def armed_timer(state: RrcState) -> Timer | None:
    """The inactivity timer that runs while the UE sits in ``state``."""
    return _ARMED.get(state)


def on_timer_expiry(state: RrcState, timer: Timer, pch_enabled: bool) -> RrcState:
    if _ARMED.get(state) is not timer:
        raise TimerStateMismatch(f"timer {timer.value} is not armed in {state.name}")
    if state is RrcState.DCH:
        return RrcState.FACH
    if state is RrcState.FACH:
        return RrcState.PCH if pch_enabled else RrcState.IDLE
    if not pch_enabled:
        raise TimerStateMismatch("PCH is disabled")
    return RrcState.IDLE


def demotion_chain(start: RrcState, pch_enabled: bool) -> list[RrcState]:
    """States visited from ``start`` when no traffic ever arrives."""
    chain = [start]
    while (timer := armed_timer(chain[-1])) is not None:
        if chain[-1] is RrcState.PCH and not pch_enabled:
            break
        chain.append(on_timer_expiry(chain[-1], timer, pch_enabled))
    return chain

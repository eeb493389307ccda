"""Distribution specifications used by the workload models.

Truncated distributions are sampled by rejection, never by clamping, so the
shape inside the bounds is preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class BadDistribution(ValueError):
    pass


@dataclass(frozen=True)
class Constant:
    value: float

    def sample(self, rng) -> float:
        return self.value

    def sample_n(self, rng, n: int) -> np.ndarray:
        return np.full(n, float(self.value))

    def bounds(self):
        return self.value, self.value


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low <= self.high:
            raise BadDistribution(f"uniform needs low <= high, got ({self.low}, {self.high})")

    def sample(self, rng) -> float:
        return self.low + (self.high - self.low) * rng.random()

    def sample_n(self, rng, n):
        return rng.uniform(self.low, self.high, n)

    def bounds(self):
        return self.low, self.high


def _check_range(lo, hi):
    if lo is not None and hi is not None and lo > hi:
        raise BadDistribution(f"min {lo} > max {hi}")


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    sd: float
    min: float | None = None
    max: float | None = None

    def __post_init__(self):
        if not self.sd > 0:
            raise BadDistribution("truncated normal needs sd > 0")
        _check_range(self.min, self.max)

    def _ok(self, x):
        return (self.min is None or x >= self.min) and (self.max is None or x <= self.max)

    def sample(self, rng) -> float:
        for _ in range(100_000):
            x = rng.normal(self.mean, self.sd)
            if self._ok(x):
                return float(x)
        raise BadDistribution(f"rejection sampling failed for {self}")

    def sample_n(self, rng, n):
        return _reject_n(lambda k: rng.normal(self.mean, self.sd, k), self.min, self.max, n)

    def bounds(self):
        return (-math.inf if self.min is None else self.min,
                math.inf if self.max is None else self.max)


@dataclass(frozen=True)
class TruncatedExponential:
    mean: float
    min: float = 0.0
    max: float | None = None

    def __post_init__(self):
        if not self.mean > 0:
            raise BadDistribution("truncated exponential needs mean > 0")
        _check_range(self.min, self.max)

    def sample(self, rng) -> float:
        lo = self.min if self.min is not None else 0.0
        hi = math.inf if self.max is None else self.max
        for _ in range(100_000):
            x = rng.exponential(self.mean)
            if lo <= x <= hi:
                return float(x)
        raise BadDistribution(f"rejection sampling failed for {self}")

    def sample_n(self, rng, n):
        return _reject_n(lambda k: rng.exponential(self.mean, k), self.min, self.max, n)

    def bounds(self):
        return (self.min or 0.0, math.inf if self.max is None else self.max)


@dataclass(frozen=True)
class Histogram:
    """Piecewise-uniform density: pick a bin by weight, then uniform inside it."""

    edges: tuple[float, ...]
    weights: tuple[float, ...]
    _cum: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        weights = tuple(float(w) for w in self.weights)
        if len(weights) == 0 or len(edges) != len(weights) + 1:
            raise BadDistribution("histogram needs len(edges) == len(weights) + 1 >= 2")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise BadDistribution("histogram edges must increase")
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise BadDistribution("histogram weights must be >= 0 with positive sum")
        total = sum(weights)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cum", tuple(np.cumsum(weights) / total))

    def sample(self, rng) -> float:
        u = rng.random()
        i = int(np.searchsorted(self._cum, u, side="right"))
        i = min(i, len(self.weights) - 1)
        lo, hi = self.edges[i], self.edges[i + 1]
        return lo + (hi - lo) * rng.random()

    def sample_n(self, rng, n):
        i = np.searchsorted(self._cum, rng.random(n), side="right")
        i = np.minimum(i, len(self.weights) - 1)
        edges = np.asarray(self.edges)
        lo, hi = edges[i], edges[i + 1]
        return lo + (hi - lo) * rng.random(n)

    def bounds(self):
        return self.edges[0], self.edges[-1]


def _reject_n(draw, lo, hi, n):
    out = np.empty(0)
    while out.size < n:
        x = draw(max(2 * (n - out.size), 1024))
        if lo is not None:
            x = x[x >= lo]
        if hi is not None:
            x = x[x <= hi]
        out = np.concatenate([out, x])
    return out[:n]


Distribution = Constant | Uniform | TruncatedNormal | TruncatedExponential | Histogram


def from_dict(d: dict[str, Any], scale: float = 1.0):
    """Build a distribution from a scenario entry such as
    ``{"kind": "truncated_normal", "mean": 10, "sd": 5, "min": 2}``.

    ``scale`` converts the entry's unit into seconds or bytes.
    """
    if not isinstance(d, dict) or "kind" not in d:
        raise BadDistribution(f"distribution entry needs a 'kind': {d!r}")
    kind = d["kind"]
    rest = {k: v for k, v in d.items() if k != "kind"}

    def s(x):
        return None if x is None else float(x) * scale

    try:
        if kind == "constant":
            dist = Constant(s(rest.pop("value")))
        elif kind == "uniform":
            dist = Uniform(s(rest.pop("low")), s(rest.pop("high")))
        elif kind == "truncated_normal":
            dist = TruncatedNormal(s(rest.pop("mean")), s(rest.pop("sd")),
                                   s(rest.pop("min", None)), s(rest.pop("max", None)))
        elif kind == "truncated_exponential":
            dist = TruncatedExponential(s(rest.pop("mean")), s(rest.pop("min", 0.0)),
                                        s(rest.pop("max", None)))
        elif kind == "histogram":
            dist = Histogram(tuple(s(e) for e in rest.pop("edges")),
                             tuple(float(w) for w in rest.pop("weights")))
        else:
            raise BadDistribution(f"unknown distribution kind {kind!r}")
    except KeyError as exc:
        raise BadDistribution(f"{kind}: missing parameter {exc}") from None
    if rest:
        raise BadDistribution(f"{kind}: unexpected parameters {sorted(rest)}")
    return dist


def to_dict(dist, scale: float = 1.0) -> dict[str, Any]:
    """Inverse of :func:`from_dict`."""
    def s(x):
        return None if x is None else x / scale

    if isinstance(dist, Constant):
        return {"kind": "constant", "value": s(dist.value)}
    if isinstance(dist, Uniform):
        return {"kind": "uniform", "low": s(dist.low), "high": s(dist.high)}
    if isinstance(dist, TruncatedNormal):
        out = {"kind": "truncated_normal", "mean": s(dist.mean), "sd": s(dist.sd)}
        if dist.min is not None:
            out["min"] = s(dist.min)
        if dist.max is not None:
            out["max"] = s(dist.max)
        return out
    if isinstance(dist, TruncatedExponential):
        out = {"kind": "truncated_exponential", "mean": s(dist.mean), "min": s(dist.min)}
        if dist.max is not None:
            out["max"] = s(dist.max)
        return out
    if isinstance(dist, Histogram):
        return {"kind": "histogram", "edges": [s(e) for e in dist.edges],
                "weights": list(dist.weights)}
    raise TypeError(f"not a distribution: {dist!r}")

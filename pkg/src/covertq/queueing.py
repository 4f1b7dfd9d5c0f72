"""Single-server FIFO queue primitives.

The channel is a work-conserving single-server queue started empty: packet k
arrives ``A_k`` after packet k-1, waits if the server is busy, then occupies
the server for ``S_k``.  Departure epochs obey the Lindley-type recursion

    d_k = max(d_{k-1}, t_k) + S_k,      t_k = A_1 + ... + A_k,

with d_0 = 0.  The idle gap seen by packet k is U_k = max(0, t_k - d_{k-1}),
so the inter-departure time decomposes as D_k = U_k + S_k.

All sequences are in seconds; rates are per second.  The recursion is kept in
its sequential form on purpose: reassociating the arithmetic (e.g. a prefix-max
formulation) changes last-ulp rounding, and downstream consumers rely on the
exact float semantics of this evaluation order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StructuralError, UnsupportedLawError

__all__ = [
    "TimeSequence",
    "ServiceKind",
    "ServiceModel",
    "QueueParams",
    "sample_service",
    "poisson_arrivals",
    "departure_epochs",
    "push_through_queue",
    "simulate_channel",
]


def _as_times(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise StructuralError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise StructuralError(f"{what} must contain at least one element")
    if not np.all(np.isfinite(arr)):
        raise StructuralError(f"{what} must be finite")
    if np.any(arr < 0.0):
        raise StructuralError(f"{what} must be non-negative")
    return arr


@dataclass(frozen=True)
class TimeSequence:
    """Immutable 1-d array of non-negative gap times (seconds)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_times(self.values, "time sequence").copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def __iter__(self):
        return iter(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def epochs(self) -> np.ndarray:
        """Cumulative times t_k = x_1 + ... + x_k."""
        return np.cumsum(self.values)


class ServiceKind(enum.Enum):
    EXPONENTIAL = "exponential"
    ERLANG = "erlang"
    UNIFORM = "uniform"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class ServiceModel:
    """Service-time law with unit-mean-free parameterization by rate.

    ``rate`` is always the reciprocal mean service time (packets/second):

    - exponential: Exp(rate)
    - erlang: sum of ``shape`` Exp(shape*rate) stages, mean 1/rate
    - uniform: Uniform(1/rate - halfwidth, 1/rate + halfwidth)
    - deterministic: point mass at 1/rate (no density)
    """

    kind: ServiceKind
    rate: float
    shape: int | None = None
    halfwidth: float | None = None

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ParameterError(f"service rate must be positive and finite, got {self.rate}")
        if self.kind is ServiceKind.ERLANG:
            if self.shape is None or self.shape < 1 or self.shape != int(self.shape):
                raise ParameterError(f"erlang shape must be a positive integer, got {self.shape}")
        elif self.shape is not None:
            raise ParameterError(f"shape only applies to erlang, got kind={self.kind.value}")
        if self.kind is ServiceKind.UNIFORM:
            if self.halfwidth is None or not (0.0 < self.halfwidth <= 1.0 / self.rate):
                # support must stay inside [0, inf)
                raise ParameterError(
                    f"uniform halfwidth must lie in (0, 1/rate], got {self.halfwidth}"
                )
        elif self.halfwidth is not None:
            raise ParameterError(f"halfwidth only applies to uniform, got kind={self.kind.value}")

    @classmethod
    def exponential(cls, rate: float) -> "ServiceModel":
        return cls(ServiceKind.EXPONENTIAL, rate)

    @classmethod
    def erlang(cls, rate: float, shape: int) -> "ServiceModel":
        return cls(ServiceKind.ERLANG, rate, shape=shape)

    @classmethod
    def uniform(cls, rate: float, halfwidth: float) -> "ServiceModel":
        return cls(ServiceKind.UNIFORM, rate, halfwidth=halfwidth)

    @classmethod
    def deterministic(cls, rate: float) -> "ServiceModel":
        return cls(ServiceKind.DETERMINISTIC, rate)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def has_density(self) -> bool:
        return self.kind is not ServiceKind.DETERMINISTIC

    def sample(self, rng: np.random.Generator, n: int) -> TimeSequence:
        """Draw n i.i.d. service times."""
        if n < 1:
            raise StructuralError(f"need n >= 1 service times, got {n}")
        if self.kind is ServiceKind.EXPONENTIAL:
            x = rng.exponential(1.0 / self.rate, size=n)
        elif self.kind is ServiceKind.ERLANG:
            k = int(self.shape)
            x = rng.gamma(k, 1.0 / (k * self.rate), size=n)
        elif self.kind is ServiceKind.UNIFORM:
            m = 1.0 / self.rate
            x = rng.uniform(m - self.halfwidth, m + self.halfwidth, size=n)
        else:
            x = np.full(n, 1.0 / self.rate)
        return TimeSequence(x)

    def log_density(self, x) -> np.ndarray:
        """Elementwise log density; -inf outside the support.

        Raises for the deterministic law, which has no density with respect to
        Lebesgue measure.
        """
        if self.kind is ServiceKind.DETERMINISTIC:
            raise UnsupportedLawError("deterministic service law has no density")
        x = np.asarray(x, dtype=np.float64)
        if self.kind is ServiceKind.EXPONENTIAL:
            out = math.log(self.rate) - self.rate * x
            return np.where(x >= 0.0, out, -np.inf)
        if self.kind is ServiceKind.ERLANG:
            k = int(self.shape)
            theta = k * self.rate  # stage rate
            safe = np.where(x > 0.0, x, 1.0)  # keep log() off the invalid domain
            out = (
                k * math.log(theta)
                - math.lgamma(k)
                + (k - 1) * np.log(safe)
                - theta * x
            )
            return np.where(x > 0.0, out, -np.inf)
        # uniform
        m = 1.0 / self.rate
        lo, hi = m - self.halfwidth, m + self.halfwidth
        level = -math.log(2.0 * self.halfwidth)
        return np.where((x >= lo) & (x <= hi), level, -np.inf)


@dataclass(frozen=True)
class QueueParams:
    """Channel parameters: one service law, queue started empty at time 0."""

    service: ServiceModel


def sample_service(model: ServiceModel, rng: np.random.Generator, n: int) -> TimeSequence:
    """Draw n i.i.d. service times from the given law."""
    return model.sample(rng, n)


def poisson_arrivals(rate: float, n: int, rng: np.random.Generator) -> TimeSequence:
    """Inter-arrival gaps of a Poisson process: n i.i.d. Exp(rate) draws."""
    if not (rate > 0.0 and math.isfinite(rate)):
        raise ParameterError(f"arrival rate must be positive and finite, got {rate}")
    if n < 1:
        raise StructuralError(f"need n >= 1 arrivals, got {n}")
    return TimeSequence(rng.exponential(1.0 / rate, size=n))


def departure_epochs(arrival_gaps, service_times):
    """Departure epochs d_k and idle gaps U_k for given arrivals and services.

    Parameters
    ----------
    arrival_gaps, service_times : array-like, same length
        Inter-arrival gaps A_k and service times S_k.

    Returns
    -------
    (d, u) : pair of float64 arrays
        d[k] is the k-th departure epoch, u[k] = max(0, t_k - d_{k-1}).

    The loop is the definitional recursion; each step is one add, one max and
    one add, so the result is bit-reproducible across runs and platforms that
    share IEEE-754 double semantics.
    """
    a = _as_times(arrival_gaps, "arrival gaps")
    s = _as_times(service_times, "service times")
    if a.size != s.size:
        raise StructuralError(f"length mismatch: {a.size} arrivals vs {s.size} services")
    n = a.size
    d = np.empty(n)
    u = np.empty(n)
    t = 0.0
    prev = 0.0
    for k in range(n):
        t += a[k]
        gap = t - prev
        u[k] = gap if gap > 0.0 else 0.0
        start = prev if prev > t else t
        prev = start + s[k]
        d[k] = prev
    return d, u


def push_through_queue(arrivals: TimeSequence, services: TimeSequence):
    """Run packets through the queue.

    Returns ``(departures, idles)``: inter-departure gaps D_k (as a
    TimeSequence) and the idle gaps U_k.  Identities: D_k = U_k + S_k up to
    last-ulp rounding, and sum(D) = last departure epoch.
    """
    d, u = departure_epochs(arrivals.values, services.values)
    gaps = np.diff(d, prepend=0.0)
    return TimeSequence(gaps), TimeSequence(u)


def simulate_channel(
    arrivals: TimeSequence, params: QueueParams, rng: np.random.Generator
) -> TimeSequence:
    """Sample service times from the channel law and push arrivals through."""
    services = params.service.sample(rng, len(arrivals))
    departures, _ = push_through_queue(arrivals, services)
    return departures

"""Channel transition law and information density.

For a FIFO queue fed with inter-arrival gaps A and observed inter-departure
gaps D, the service times are recovered deterministically:

    U_k = max(0, t_k - d_{k-1}),    s_k = D_k - U_k,

with t, d the cumulative arrival/departure epochs.  The conditional density of
D given A is then the product of the service density at the s_k, and it is
-inf exactly when some reconstructed s_k leaves the service law's support
(e.g. a departure before the corresponding arrival).

The reference measure for information densities is the stationary no-message
output: a Poisson process of the arrival rate (Burke's theorem for the
exponential-service queue), i.e. i.i.d. Exp(rate) gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StructuralError
from .queueing import (
    QueueParams,
    ServiceKind,
    ServiceModel,
    TimeSequence,
    poisson_arrivals,
    simulate_channel,
)

__all__ = [
    "InfoDensitySample",
    "conditional_log_density",
    "conditional_log_density_batch",
    "poisson_log_density",
    "info_density_sample",
    "sample_info_densities",
]


@dataclass(frozen=True)
class InfoDensitySample:
    """One block's information density, normalized per packet (nats/packet)."""

    per_packet_value: float
    n: int
    feasible: bool


def _reconstruct_services(arrivals: TimeSequence, departures: TimeSequence):
    if len(arrivals) != len(departures):
        raise StructuralError(
            f"length mismatch: {len(arrivals)} arrivals vs {len(departures)} departures"
        )
    t = arrivals.epochs
    d = departures.epochs
    dprev = np.empty_like(d)
    dprev[0] = 0.0
    dprev[1:] = d[:-1]
    u = np.maximum(t - dprev, 0.0)
    return departures.values - u


def conditional_log_density(
    arrivals: TimeSequence, departures: TimeSequence, model: ServiceModel
) -> float:
    """log p(D | A) under the given service law; -inf for infeasible D."""
    s = _reconstruct_services(arrivals, departures)
    return float(model.log_density(s).sum())


def conditional_log_density_batch(
    arrival_epochs: np.ndarray, departures: TimeSequence, model: ServiceModel
) -> np.ndarray:
    """log p(D | A_c) for many candidate arrival sequences at once.

    Parameters
    ----------
    arrival_epochs : (n, C) float array
        Column c holds candidate c's cumulative arrival epochs.  Packet-major
        layout so each per-packet slice is contiguous.
    departures : TimeSequence of length n
    model : ServiceModel with a density

    Returns
    -------
    (C,) array of log densities, -inf where infeasible.
    """
    ta = np.asarray(arrival_epochs, dtype=np.float64)
    if ta.ndim != 2:
        raise StructuralError(f"arrival epochs must be 2-d, got shape {ta.shape}")
    n = len(departures)
    if ta.shape[0] != n:
        raise StructuralError(
            f"length mismatch: {ta.shape[0]} packet rows vs {n} departures"
        )
    d = departures.epochs
    gaps = departures.values
    count = ta.shape[1]
    buf = np.empty(count)
    if model.kind is ServiceKind.EXPONENTIAL:
        # hot path (codebook-sized scans): accumulate sum(s_k) and a
        # feasibility mask in place instead of per-packet log densities
        rate = model.rate
        ssum = np.zeros(count)
        feasible = np.ones(count, dtype=bool)
        mask = np.empty(count, dtype=bool)
        prev = 0.0
        for k in range(n):
            # s_k = D_k - max(0, t_k - d_{k-1}) for every candidate
            np.subtract(ta[k], prev, out=buf)
            np.maximum(buf, 0.0, out=buf)
            np.subtract(gaps[k], buf, out=buf)
            np.greater_equal(buf, 0.0, out=mask)
            np.logical_and(feasible, mask, out=feasible)
            np.add(ssum, buf, out=ssum)
            prev = d[k]
        scores = n * math.log(rate) - rate * ssum
        scores[~feasible] = -np.inf
        return scores
    scores = np.zeros(count)
    prev = 0.0
    for k in range(n):
        np.subtract(ta[k], prev, out=buf)
        np.maximum(buf, 0.0, out=buf)
        np.subtract(gaps[k], buf, out=buf)
        scores += model.log_density(buf)
        prev = d[k]
    return scores


def poisson_log_density(gaps: TimeSequence, rate: float) -> float:
    """log of the i.i.d. Exp(rate) product density of the given gaps."""
    if not (rate > 0.0 and math.isfinite(rate)):
        raise ParameterError(f"rate must be positive and finite, got {rate}")
    x = gaps.values
    return float(x.size * math.log(rate) - rate * x.sum())


def info_density_sample(
    arrivals: TimeSequence,
    departures: TimeSequence,
    model: ServiceModel,
    reference_rate: float,
) -> InfoDensitySample:
    """Per-packet information density of one block.

    (1/n) * [log p(D|A; model) - log q(D; Exp(reference_rate) gaps)], in
    nats/packet.  ``feasible`` is False (and the value -inf) when D cannot
    have been produced from A under the model.
    """
    n = len(departures)
    cond = conditional_log_density(arrivals, departures, model)
    if not math.isfinite(cond):
        return InfoDensitySample(per_packet_value=-math.inf, n=n, feasible=False)
    ref = poisson_log_density(departures, reference_rate)
    return InfoDensitySample(per_packet_value=(cond - ref) / n, n=n, feasible=True)


def sample_info_densities(
    n: int,
    arrival_rate: float,
    model: ServiceModel,
    trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte Carlo draws of the per-packet information density.

    Each trial sends a fresh Poisson(arrival_rate) block through the queue and
    scores it against the Exp(arrival_rate) reference.  Returns the
    (trials,)-array of per-packet values.
    """
    if trials < 1:
        raise ParameterError(f"need trials >= 1, got {trials}")
    params = QueueParams(model)
    out = np.empty(trials)
    for t in range(trials):
        arrivals = poisson_arrivals(arrival_rate, n, rng)
        departures = simulate_channel(arrivals, params, rng)
        out[t] = info_density_sample(arrivals, departures, model, arrival_rate).per_packet_value
    return out

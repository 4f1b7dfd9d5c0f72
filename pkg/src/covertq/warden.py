"""Adversarial observer: likelihood-ratio detection of codebook use.

The observer taps the departure process of its own queue (service law
``model``) and must decide whether the arrivals were a stationary Poisson
process (no message) or a uniformly chosen codeword from a codebook it knows
in full — but without the key, so the alternative hypothesis is the uniform
mixture over the *entire* codebook:

    llr(D) = log[ (1/|B|) sum_c p(D | codeword c) ] - log q(D),

with q the product-Exp(arrival_rate) stationary law.  Detection quality is
summarized by the rank AUC of the llr scores and a plug-in estimate of the
total-variation distance (the best achievable advantage of any threshold test
on the llr).

No operation here takes a key argument; the observer never has one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .codec import Codebook, encode
from .errors import ParameterError
from .laws import (
    InfoDensitySample,
    conditional_log_density_batch,
    info_density_sample,
    poisson_log_density,
)
from .queueing import (
    QueueParams,
    ServiceModel,
    TimeSequence,
    poisson_arrivals,
    simulate_channel,
)

__all__ = [
    "Hypothesis",
    "DetectionTrial",
    "DetectionReport",
    "willie_llr",
    "run_detection_trials",
    "summarize_detection",
    "detection_experiment",
    "rank_auc",
    "auc_stderr",
    "tv_distance_estimate",
    "info_density_willie",
]


class Hypothesis(enum.Enum):
    NO_MESSAGE = "no-message"
    MESSAGE = "message"


@dataclass(frozen=True)
class DetectionTrial:
    hypothesis: Hypothesis
    observation: TimeSequence
    llr: float


@dataclass(frozen=True)
class DetectionReport:
    auc: float
    tv_estimate: float
    trials_per_hypothesis: int
    codebook_total_bits: int


def willie_llr(
    book: Codebook,
    observation: TimeSequence,
    model: ServiceModel,
    arrival_rate: float,
) -> float:
    """Mixture-vs-stationary log likelihood ratio of one observed block."""
    scores = conditional_log_density_batch(book.arrival_epochs, observation, model)
    top = float(scores.max())
    if not math.isfinite(top):
        mixture = -math.inf  # no codeword could have produced this block
    else:
        mixture = top + math.log(np.exp(scores - top).sum()) - math.log(scores.size)
    return mixture - poisson_log_density(observation, arrival_rate)


def run_detection_trials(
    book: Codebook,
    model: ServiceModel,
    arrival_rate: float,
    trials: int,
    rng: np.random.Generator,
) -> list[DetectionTrial]:
    """Score ``trials`` blocks per hypothesis through the observer's queue."""
    if trials < 1:
        raise ParameterError(f"need trials >= 1, got {trials}")
    params = QueueParams(model)
    out = []
    for _ in range(trials):
        message = int(rng.integers(book.num_messages))
        key = int(rng.integers(book.num_keys))
        tx = encode(book, message, key, rng)
        departures = simulate_channel(tx.codeword, params, rng)
        out.append(
            DetectionTrial(
                hypothesis=Hypothesis.MESSAGE,
                observation=departures,
                llr=willie_llr(book, departures, model, arrival_rate),
            )
        )
        arrivals = poisson_arrivals(arrival_rate, book.n, rng)
        departures = simulate_channel(arrivals, params, rng)
        out.append(
            DetectionTrial(
                hypothesis=Hypothesis.NO_MESSAGE,
                observation=departures,
                llr=willie_llr(book, departures, model, arrival_rate),
            )
        )
    return out


def _split_scores(trials: list[DetectionTrial]):
    null = np.array([t.llr for t in trials if t.hypothesis is Hypothesis.NO_MESSAGE])
    alt = np.array([t.llr for t in trials if t.hypothesis is Hypothesis.MESSAGE])
    if null.size == 0 or alt.size == 0:
        raise ParameterError("need trials under both hypotheses")
    return null, alt


def rank_auc(null_scores, alt_scores) -> float:
    """P[alt score > null score] with tie-halving (Mann-Whitney statistic)."""
    x0 = np.asarray(null_scores, dtype=np.float64)
    x1 = np.asarray(alt_scores, dtype=np.float64)
    order = np.sort(x0)
    # count, for each alt score, how many null scores fall strictly below/at it
    below = np.searchsorted(order, x1, side="left")
    at_or_below = np.searchsorted(order, x1, side="right")
    wins = below + 0.5 * (at_or_below - below)
    return float(wins.sum() / (x0.size * x1.size))


def auc_stderr(null_scores, alt_scores) -> float:
    """DeLong-style standard error of the rank AUC."""
    x0 = np.asarray(null_scores, dtype=np.float64)
    x1 = np.asarray(alt_scores, dtype=np.float64)
    o0, o1 = np.sort(x0), np.sort(x1)
    # placement values: each alt score's quantile among nulls and vice versa
    v10 = (
        np.searchsorted(o0, x1, side="left")
        + 0.5 * (np.searchsorted(o0, x1, side="right") - np.searchsorted(o0, x1, side="left"))
    ) / x0.size
    v01 = 1.0 - (
        np.searchsorted(o1, x0, side="left")
        + 0.5 * (np.searchsorted(o1, x0, side="right") - np.searchsorted(o1, x0, side="left"))
    ) / x1.size
    var = v10.var(ddof=1) / x1.size + v01.var(ddof=1) / x0.size
    return float(math.sqrt(max(var, 0.0)))


def tv_distance_estimate(null_scores, alt_scores) -> float:
    """Plug-in total-variation estimate: sup_t [F_null(t) - F_alt(t)].

    Equals the best advantage max_t (TPR - FPR) of thresholding the scores,
    which converges to the total variation between the two llr laws.
    """
    x0 = np.asarray(null_scores, dtype=np.float64)
    x1 = np.asarray(alt_scores, dtype=np.float64)
    o0, o1 = np.sort(x0), np.sort(x1)
    grid = np.concatenate([o0, o1])
    f0 = np.searchsorted(o0, grid, side="right") / x0.size
    f1 = np.searchsorted(o1, grid, side="right") / x1.size
    return float(max(0.0, np.max(f0 - f1)))


def summarize_detection(trials: list[DetectionTrial], book: Codebook) -> DetectionReport:
    null, alt = _split_scores(trials)
    return DetectionReport(
        auc=rank_auc(null, alt),
        tv_estimate=tv_distance_estimate(null, alt),
        trials_per_hypothesis=min(null.size, alt.size),
        codebook_total_bits=book.bits_message + book.bits_dummy + book.bits_key,
    )


def detection_experiment(
    book: Codebook,
    model: ServiceModel,
    arrival_rate: float,
    trials: int,
    rng: np.random.Generator,
) -> DetectionReport:
    """Full detection run: simulate, score, and summarize both hypotheses."""
    if trials < 100:
        raise ParameterError(f"need trials >= 100 for a stable summary, got {trials}")
    return summarize_detection(
        run_detection_trials(book, model, arrival_rate, trials, rng), book
    )


def info_density_willie(
    arrivals: TimeSequence,
    departures: TimeSequence,
    model: ServiceModel,
    arrival_rate: float,
) -> InfoDensitySample:
    """Per-packet information density as seen through the observer's queue."""
    return info_density_sample(arrivals, departures, model, arrival_rate)

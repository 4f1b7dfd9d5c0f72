"""Experiment harness: configuration, deterministic runs, result emission.

Determinism contract: every parameter point draws its randomness from
``SeedSequence([master_seed, experiment_code, param_index, stream])`` — pure
value-derived entropy, never spawn order or worker identity.  Parallelism is
across parameter points and rows are merged in parameter order, so a run is
byte-identical for any worker count.

Numbers are emitted with 9 significant digits, in a fixed column order, as CSV
or JSON lines.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import codec, laws, rates, warden
from .errors import ConfigError, InstabilityError, OutputError
from .queueing import QueueParams, ServiceKind, ServiceModel, simulate_channel

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ResultRow",
    "run",
    "emit",
    "load_rows",
    "reproduce_metric",
    "service_to_dict",
    "service_from_dict",
]

EXPERIMENTS = ("region_table", "info_density", "decode_sweep", "detection_sweep")
_EXPERIMENT_CODE = {name: i for i, name in enumerate(EXPERIMENTS)}
_BOOK_STREAM = 1 << 20  # stream id reserved for codebook seeds
_FORMATS = ("csv", "jsonlines")


def service_to_dict(model: ServiceModel) -> dict:
    out = {"kind": model.kind.value, "rate": model.rate}
    if model.shape is not None:
        out["shape"] = model.shape
    if model.halfwidth is not None:
        out["halfwidth"] = model.halfwidth
    return out


def service_from_dict(payload: dict) -> ServiceModel:
    try:
        kind = ServiceKind(payload["kind"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad service law spec: {payload!r}") from exc
    return ServiceModel(
        kind=kind,
        rate=payload["rate"],
        shape=payload.get("shape"),
        halfwidth=payload.get("halfwidth"),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run: channel rates, sweep lists, trial budget, seed."""

    experiment: str
    arrival_rate: float
    mu1: float
    mu2: float
    willie_service: ServiceModel | None = None
    n_list: tuple[int, ...] = ()
    width_list: tuple[tuple[int, int, int], ...] = ()
    trials: int = 1000
    master_seed: int = 0
    output_path: str | None = None
    output_format: str = "csv"
    workers: int = 1
    enumeration_cap_bits: int = codec.CODEBOOK_CAP_BITS

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        for name in ("arrival_rate", "mu1", "mu2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if self.arrival_rate >= min(self.mu1, self.mu2):
            raise InstabilityError(
                f"arrival rate {self.arrival_rate} >= min service rate "
                f"{min(self.mu1, self.mu2)}: no stationary regime"
            )
        if self.willie_service is None:
            object.__setattr__(self, "willie_service", ServiceModel.exponential(self.mu2))
        if not math.isclose(self.willie_service.rate, self.mu2, rel_tol=1e-12):
            raise ConfigError(
                f"willie_service rate {self.willie_service.rate} must equal mu2={self.mu2}"
            )
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(
            self, "width_list", tuple(tuple(int(b) for b in w) for w in self.width_list)
        )
        if any(n < 1 for n in self.n_list):
            raise ConfigError(f"n_list entries must be >= 1, got {self.n_list}")
        if any(len(w) != 3 or any(b < 0 for b in w) for w in self.width_list):
            raise ConfigError(f"width_list entries must be 3 non-negative ints, got {self.width_list}")
        if self.experiment in ("info_density", "decode_sweep", "detection_sweep") and not self.n_list:
            raise ConfigError(f"{self.experiment} needs a non-empty n_list")
        if self.experiment in ("decode_sweep", "detection_sweep") and not self.width_list:
            raise ConfigError(f"{self.experiment} needs a non-empty width_list")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")
        if self.output_format not in _FORMATS:
            raise ConfigError(f"output_format must be one of {_FORMATS}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        payload = dict(payload)
        known = set(cls.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(payload.get("willie_service"), dict):
            payload["willie_service"] = service_from_dict(payload["willie_service"])
        if "n_list" in payload:
            payload["n_list"] = tuple(payload["n_list"])
        if "width_list" in payload:
            payload["width_list"] = tuple(tuple(w) for w in payload["width_list"])
        try:
            return cls(**payload)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(payload)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    metric: str
    params: dict
    value: float
    stderr: float
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "metric": self.metric,
            "params": self.params,
            "value": _round9(self.value),
            "stderr": _round9(self.stderr),
            "trials": self.trials,
            "seed": self.seed,
        }


def _round9(x: float) -> float:
    if not math.isfinite(x):
        return x
    return float(f"{x:.9g}")


def _fmt9(x: float) -> str:
    return f"{x:.9g}"


def _point_rng(config: ExperimentConfig, param_index: int, stream: int) -> np.random.Generator:
    code = _EXPERIMENT_CODE[config.experiment]
    return np.random.default_rng(
        np.random.SeedSequence([config.master_seed, code, param_index, stream])
    )


def _book_seed(config: ExperimentConfig, param_index: int) -> int:
    code = _EXPERIMENT_CODE[config.experiment]
    seq = np.random.SeedSequence([config.master_seed, code, param_index, _BOOK_STREAM])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _base_params(config: ExperimentConfig) -> dict:
    return {
        "arrival_rate": config.arrival_rate,
        "mu1": config.mu1,
        "mu2": config.mu2,
        "willie_kind": config.willie_service.kind.value,
    }


def _region_spec(config: ExperimentConfig) -> rates.RegionSpec:
    if config.willie_service.kind is ServiceKind.EXPONENTIAL:
        return rates.RegionSpec(mu1=config.mu1, mu2=config.mu2)
    return rates.RegionSpec(
        mu1=config.mu1,
        mu2=config.mu2,
        kind=rates.RegionKind.MG1,
        willie_service=config.willie_service,
    )


def param_points(config: ExperimentConfig) -> list[dict]:
    """Enumerate the parameter points the experiment sweeps over."""
    if config.experiment == "region_table":
        return [{}]
    if config.experiment == "info_density":
        return [{"side": side, "n": n} for side in ("bob", "willie") for n in config.n_list]
    points = []
    for n in config.n_list:
        for widths in config.width_list:
            points.append(
                {
                    "n": n,
                    "bits_message": widths[0],
                    "bits_dummy": widths[1],
                    "bits_key": widths[2],
                }
            )
    return points


def _row(config, metric, params, value, stderr, trials) -> ResultRow:
    return ResultRow(
        experiment=config.experiment,
        metric=metric,
        params=params,
        value=float(value),
        stderr=float(stderr),
        trials=int(trials),
        seed=config.master_seed,
    )


def _run_region_table(config: ExperimentConfig, param_index: int) -> list[ResultRow]:
    lam = config.arrival_rate
    spec = _region_spec(config)
    base = _base_params(config)
    capacity = rates.covert_capacity(lam, config.mu1)
    divergence = spec.willie_divergence()
    rows = [
        _row(config, "covert_capacity", base, capacity, 0.0, 1),
        _row(config, "min_key_rate", base, rates.min_key_rate_mm1(lam, config.mu1, config.mu2), 0.0, 1),
        _row(config, "willie_divergence", base, divergence, 0.0, 1),
        _row(config, "no_key_needed", base, 1.0 if rates.no_key_needed(spec) else 0.0, 0.0, 1),
    ]
    # boundary of the (R, R_K) region, sampled on a message-rate grid
    threshold = lam * (math.log(config.mu2 / config.mu1) + divergence)
    for j in range(21):
        r = capacity * j / 20.0
        if spec.kind is rates.RegionKind.MM1:
            rk = max(0.0, threshold)
        else:
            rk = max(0.0, threshold - r)
        params = dict(base, message_rate=r)
        rows.append(_row(config, "boundary_key_rate", params, rk, 0.0, 1))
    return rows


def _run_info_density(config: ExperimentConfig, param_index: int) -> list[ResultRow]:
    point = param_points(config)[param_index]
    side, n = point["side"], point["n"]
    model = (
        ServiceModel.exponential(config.mu1) if side == "bob" else config.willie_service
    )
    rng = _point_rng(config, param_index, 0)
    samples = laws.sample_info_densities(n, config.arrival_rate, model, config.trials, rng)
    finite = samples[np.isfinite(samples)]
    params = dict(_base_params(config), **point)
    t = config.trials
    if finite.size == 0:
        return [_row(config, "feasible_fraction", params, 0.0, 0.0, t)]
    std = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
    return [
        _row(config, "mean_per_packet", params, finite.mean(), std / math.sqrt(finite.size), t),
        _row(config, "std_per_packet", params, std, 0.0, t),
        _row(config, "percentile_01", params, np.percentile(finite, 1.0), 0.0, t),
        _row(config, "percentile_99", params, np.percentile(finite, 99.0), 0.0, t),
        _row(config, "feasible_fraction", params, finite.size / samples.size, 0.0, t),
    ]


def _binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def _run_decode_sweep(config: ExperimentConfig, param_index: int) -> list[ResultRow]:
    point = param_points(config)[param_index]
    n = point["n"]
    widths = (point["bits_message"], point["bits_dummy"], point["bits_key"])
    params = dict(_base_params(config), **point)
    lam = config.arrival_rate
    bob = ServiceModel.exponential(config.mu1)
    rng = _point_rng(config, param_index, 0)
    t = config.trials

    if sum(widths) > config.enumeration_cap_bits:
        # beyond the enumeration cap: certify the ML error instead of simulating
        samples = laws.sample_info_densities(n, lam, bob, t, rng)
        pair_bits = widths[0] + widths[1]
        bounds = codec.random_coding_error_bounds(
            samples, n, pair_bits, codec.mm1_log_output_ratio_bound(lam, config.mu1)
        )
        return [
            _row(config, "ml_error_upper_bound", params, bounds.upper,
                 _binomial_se(bounds.upper, t), t),
            _row(config, "ml_error_lower_bound", params, bounds.lower,
                 _binomial_se(bounds.lower, t), t),
        ]

    book = codec.generate_codebook(
        n, *widths, arrival_rate=lam, seed=_book_seed(config, param_index),
        max_codewords=1 << config.enumeration_cap_bits,
    )
    queue = QueueParams(bob)
    message_errors = 0
    pair_errors = 0
    for _ in range(t):
        w = int(rng.integers(book.num_messages))
        k = int(rng.integers(book.num_keys))
        tx = codec.encode(book, w, k, rng)
        departures = simulate_channel(tx.codeword, queue, rng)
        result = codec.decode(book, departures, k, bob)
        if result.message != w:
            message_errors += 1
        if result.message != w or result.dummy != tx.dummy:
            pair_errors += 1
    p_msg = message_errors / t
    p_pair = pair_errors / t
    return [
        _row(config, "message_error_rate", params, p_msg, _binomial_se(p_msg, t), t),
        _row(config, "pair_error_rate", params, p_pair, _binomial_se(p_pair, t), t),
    ]


def _run_detection_sweep(config: ExperimentConfig, param_index: int) -> list[ResultRow]:
    point = param_points(config)[param_index]
    n = point["n"]
    widths = (point["bits_message"], point["bits_dummy"], point["bits_key"])
    params = dict(_base_params(config), **point)
    lam = config.arrival_rate
    rng = _point_rng(config, param_index, 0)
    book = codec.generate_codebook(
        n, *widths, arrival_rate=lam, seed=_book_seed(config, param_index),
        max_codewords=1 << config.enumeration_cap_bits,
    )
    trials = warden.run_detection_trials(book, config.willie_service, lam, config.trials, rng)
    null = np.array([x.llr for x in trials if x.hypothesis is warden.Hypothesis.NO_MESSAGE])
    alt = np.array([x.llr for x in trials if x.hypothesis is warden.Hypothesis.MESSAGE])
    auc = warden.rank_auc(null, alt)
    tv = warden.tv_distance_estimate(null, alt)
    # crude plug-in SE for the ECDF sup-gap
    tv_se = math.sqrt(0.5 / null.size + 0.5 / alt.size) / 2.0
    t = config.trials
    rows = [
        _row(config, "auc", params, auc, warden.auc_stderr(null, alt), t),
        _row(config, "tv_estimate", params, tv, tv_se, t),
    ]
    # a null block no codeword could have produced scores llr = -inf; keep the
    # emitted moments finite and report that mass separately
    finite_null = null[np.isfinite(null)]
    rows.append(
        _row(config, "llr_infeasible_fraction", params,
             1.0 - finite_null.size / null.size, 0.0, t)
    )
    for name, scores in (("mean_llr_null", finite_null), ("mean_llr_message", alt)):
        if scores.size > 1:
            rows.append(
                _row(config, name, params, scores.mean(),
                     scores.std(ddof=1) / math.sqrt(scores.size), t)
            )
    return rows


_RUNNERS = {
    "region_table": _run_region_table,
    "info_density": _run_info_density,
    "decode_sweep": _run_decode_sweep,
    "detection_sweep": _run_detection_sweep,
}


def _run_point(config: ExperimentConfig, param_index: int) -> list[ResultRow]:
    return _RUNNERS[config.experiment](config, param_index)


def run(config: ExperimentConfig) -> list[ResultRow]:
    """Execute the experiment and return rows in deterministic order."""
    indices = range(len(param_points(config)))
    if config.workers == 1:
        chunks = [_run_point(config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_point, config, i) for i in indices]
            chunks = [f.result() for f in futures]  # merge in param order
    return [row for chunk in chunks for row in chunk]


def reproduce_metric(config: ExperimentConfig, row: ResultRow) -> float:
    """Re-run a single row's parameter point and return the same metric.

    The row's (experiment, params, seed) fully determine the value; this is
    the reproducibility contract behind every emitted row.
    """
    config = replace(config, experiment=row.experiment, master_seed=row.seed, workers=1)
    for i, point in enumerate(param_points(config)):
        merged = dict(_base_params(config), **point)
        if config.experiment == "region_table":
            match = {k: v for k, v in row.params.items() if k in merged} == merged
        else:
            match = merged == row.params
        if match:
            for candidate in _run_point(config, i):
                if candidate.metric == row.metric and candidate.params == row.params:
                    return candidate.value
    raise ConfigError(f"row does not correspond to a parameter point: {row}")


_COLUMNS = ("experiment", "metric", "params", "value", "stderr", "trials", "seed")


def emit(rows: list[ResultRow], path: str, output_format: str = "csv"):
    """Write rows to ``path`` as CSV or JSON lines (9 significant digits)."""
    if output_format not in _FORMATS:
        raise ConfigError(f"output_format must be one of {_FORMATS}")
    try:
        with open(path, "w", newline="") as fh:
            if output_format == "csv":
                writer = csv.writer(fh)
                writer.writerow(_COLUMNS)
                for row in rows:
                    writer.writerow(
                        [
                            row.experiment,
                            row.metric,
                            json.dumps(row.params, sort_keys=True, separators=(",", ":")),
                            _fmt9(row.value),
                            _fmt9(row.stderr),
                            row.trials,
                            row.seed,
                        ]
                    )
            else:
                for row in rows:
                    payload = row.to_dict()
                    payload["params"] = dict(sorted(payload["params"].items()))
                    fh.write(json.dumps(payload, separators=(",", ":")))
                    fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write results to {path}: {exc}") from exc


def load_rows(path: str, output_format: str = "csv") -> list[ResultRow]:
    """Parse rows previously written by ``emit``."""
    if output_format not in _FORMATS:
        raise ConfigError(f"output_format must be one of {_FORMATS}")
    rows = []
    try:
        with open(path, newline="") as fh:
            if output_format == "csv":
                for record in csv.DictReader(fh):
                    rows.append(
                        ResultRow(
                            experiment=record["experiment"],
                            metric=record["metric"],
                            params=json.loads(record["params"]),
                            value=float(record["value"]),
                            stderr=float(record["stderr"]),
                            trials=int(record["trials"]),
                            seed=int(record["seed"]),
                        )
                    )
            else:
                for line in fh:
                    if not line.strip():
                        continue
                    payload = json.loads(line)
                    rows.append(ResultRow(**payload))
    except OSError as exc:
        raise OutputError(f"cannot read results from {path}: {exc}") from exc
    return rows

"""Deterministic experiment runner and CSV emitters.

Configuration is JSON with the following schema::

    {
      "name": "experiment1",        # optional, used in output file names
      "m": 2,                       # domain size
      "counts": [400, 600],         # population count per value 0..m-1
      "schedule": {...},            # see below
      "trials": 100,
      "seed": 9444860727793176065   # 64-bit master seed
    }

with three schedule kinds::

    {"kind": "list",           "epsilons": [0.1, 0.5, 1.0]}
    {"kind": "linear",         "start": 0.1, "stop": 1.0, "stride": 0.1}
    {"kind": "noisy-sampling", "eps_alpha": 1.0, "eps_beta": 0.5, "rounds": 10}

Reproducibility contract: a run is a pure function of (config, seed).  Each
trial draws from its own stream split off the master seed, trials are reduced
in index order, and floats are serialized with 17 significant digits, so
outputs are byte-identical for any ``threads`` setting.  All theoretical
columns come from `estimation` / `rappor` / `inference`; nothing is re-derived
here.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import check_count
from .errors import ConfigError
from .estimation import (
    estimate_poly,
    frequency_estimate_covariance,
    histogram,
    variance_binary_estimate,
)
from .inference import ATTACK_METHODS, attack_guesses_matrix, balanced_subset, min_error_rate
from .mechanism import relax_kernel, relax_step_batch, rr_distribution, sample_rr_batch
from .rappor import (
    decode_noisy_sampling_counts,
    noisy_sampling_schedule,
    rappor_params,
    simulate_noisy_sampling_batch,
    variance_noisy_sampling,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "RapporComparison",
    "config_from_dict",
    "load_config",
    "simulate_experiment",
    "compare_noisy_sampling",
    "kernel_table_rows",
    "write_rounds_csv",
    "write_attacks_csv",
    "write_rappor_csv",
    "write_kernel_table_csv",
    "write_audit_csv",
]

DEFAULT_TABLE_EPSILONS = (0.1, 0.5, 1.0, 2.0, 10.0)
DEFAULT_TABLE_DOMAINS = tuple(range(3, 11))


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the JSON form."""

    name: str
    m: int
    counts: tuple
    epsilons: tuple
    trials: int
    seed: int
    eps_alpha: float = None
    eps_beta: float = None

    @property
    def n_objects(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class ExperimentResult:
    """Per-round aggregates across trials, plus the raw per-trial arrays."""

    config: ExperimentConfig
    epsilons: tuple
    est_mean: np.ndarray        # (rounds, m)
    est_var: np.ndarray         # (rounds, m), across trials, ddof=1
    var_theory: np.ndarray      # (rounds, m)
    err_mean: np.ndarray        # (rounds, methods)
    err_std: np.ndarray         # (rounds, methods), ddof=1
    floor: np.ndarray           # (rounds,)
    lo_mle_identical: bool
    estimates: np.ndarray       # (trials, rounds, m)
    errors: np.ndarray          # (trials, rounds, methods)


@dataclass(frozen=True)
class RapporComparison:
    """Relaxation vs repeated noisy sampling at matched privacy, per round."""

    config: ExperimentConfig
    eps_ns: np.ndarray            # (rounds,)
    var_relax_emp: np.ndarray     # (rounds,), ddof=1 across trials
    var_relax_theory: np.ndarray
    var_noisy_emp: np.ndarray
    var_noisy_theory: np.ndarray
    relax_estimates: np.ndarray   # (trials, rounds)
    noisy_estimates: np.ndarray   # (trials, rounds)


def _cfg_fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _require(raw: dict, key: str, kind, path: str):
    if key not in raw:
        _cfg_fail(f"{path}.{key}", "missing required field")
    value = raw[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        _cfg_fail(f"{path}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _build_schedule(raw: dict, path: str):
    kind = _require(raw, "kind", str, path)
    if kind == "list":
        epsilons = _require(raw, "epsilons", list, path)
        if not epsilons:
            _cfg_fail(f"{path}.epsilons", "must be non-empty")
        out = []
        for i, e in enumerate(epsilons):
            if not isinstance(e, (int, float)) or isinstance(e, bool) or not e > 0:
                _cfg_fail(f"{path}.epsilons[{i}]", "must be a positive number")
            out.append(float(e))
        if any(b < a for a, b in zip(out, out[1:])):
            _cfg_fail(f"{path}.epsilons", "must be non-decreasing")
        return tuple(out), None, None
    if kind == "linear":
        start = _require(raw, "start", float, path)
        stop = _require(raw, "stop", float, path)
        stride = _require(raw, "stride", float, path)
        if start <= 0:
            _cfg_fail(f"{path}.start", "must be positive")
        if stop < start:
            _cfg_fail(f"{path}.stop", "must be >= start")
        if stride <= 0:
            _cfg_fail(f"{path}.stride", "must be positive")
        rounds = int(np.floor((stop - start) / stride + 1e-9)) + 1
        if rounds > 100_000:
            _cfg_fail(f"{path}.stride", f"produces {rounds} rounds (limit 100000)")
        return tuple(start + i * stride for i in range(rounds)), None, None
    if kind == "noisy-sampling":
        eps_alpha = _require(raw, "eps_alpha", float, path)
        eps_beta = _require(raw, "eps_beta", float, path)
        rounds = _require(raw, "rounds", int, path)
        if eps_alpha <= 0:
            _cfg_fail(f"{path}.eps_alpha", "must be positive")
        if eps_beta <= 0:
            _cfg_fail(f"{path}.eps_beta", "must be positive")
        if rounds < 1:
            _cfg_fail(f"{path}.rounds", "must be at least 1")
        return tuple(noisy_sampling_schedule(eps_alpha, eps_beta, rounds)), eps_alpha, eps_beta
    _cfg_fail(f"{path}.kind", f"unknown schedule kind {kind!r}")


def config_from_dict(raw: dict, source: str = "config") -> ExperimentConfig:
    """Validate a parsed JSON object into an ExperimentConfig."""
    if not isinstance(raw, dict):
        _cfg_fail(source, "top-level value must be an object")
    name = raw.get("name", "experiment")
    if not isinstance(name, str) or not name or not all(
        c.isalnum() or c in "-_" for c in name
    ):
        _cfg_fail(f"{source}.name", "must be a non-empty [A-Za-z0-9_-] string")
    m = _require(raw, "m", int, source)
    if m < 2:
        _cfg_fail(f"{source}.m", "must be at least 2")
    counts = _require(raw, "counts", list, source)
    if len(counts) != m:
        _cfg_fail(f"{source}.counts", f"must list exactly m={m} counts")
    for i, c in enumerate(counts):
        if not isinstance(c, int) or isinstance(c, bool) or c < 1:
            _cfg_fail(f"{source}.counts[{i}]", "must be an integer >= 1")
    schedule_raw = _require(raw, "schedule", dict, source)
    epsilons, eps_alpha, eps_beta = _build_schedule(schedule_raw, f"{source}.schedule")
    trials = _require(raw, "trials", int, source)
    if trials < 1:
        _cfg_fail(f"{source}.trials", "must be at least 1")
    seed = _require(raw, "seed", int, source)
    if not 0 <= seed < 2**64:
        _cfg_fail(f"{source}.seed", "must fit in 64 bits")
    known = {"name", "m", "counts", "schedule", "trials", "seed"}
    for key in raw:
        if key not in known:
            _cfg_fail(f"{source}.{key}", "unknown field")
    return ExperimentConfig(
        name=name,
        m=m,
        counts=tuple(counts),
        epsilons=epsilons,
        trials=trials,
        seed=seed,
        eps_alpha=eps_alpha,
        eps_beta=eps_beta,
    )


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw, source=str(path))


def _with_seed(config: ExperimentConfig, seed) -> ExperimentConfig:
    if seed is None or seed == config.seed:
        return config
    if not 0 <= int(seed) < 2**64:
        raise ConfigError(f"seed: must fit in 64 bits, got {seed}")
    return ExperimentConfig(
        name=config.name,
        m=config.m,
        counts=config.counts,
        epsilons=config.epsilons,
        trials=config.trials,
        seed=int(seed),
        eps_alpha=config.eps_alpha,
        eps_beta=config.eps_beta,
    )


def _truth_vector(config: ExperimentConfig) -> np.ndarray:
    return np.repeat(np.arange(config.m, dtype=np.int64), config.counts)


def _trial_streams(config: ExperimentConfig):
    return np.random.SeedSequence(config.seed).spawn(config.trials)


def _run_trials(fn, trials: int, threads: int):
    threads = check_count(threads, "threads")
    if threads == 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def simulate_experiment(config: ExperimentConfig, seed=None, threads: int = 1) -> ExperimentResult:
    """Run the relaxation experiment: estimates plus attack error rates per round.

    Per trial and round, the population's outputs are decoded into a frequency
    estimate, and all four inference methods are scored on a balanced subset
    drawn once per trial.
    """
    config = _with_seed(config, seed)
    m, epsilons = config.m, config.epsilons
    rounds = len(epsilons)
    truth = _truth_vector(config)
    kernels = [relax_kernel(a, b, m) for a, b in zip(epsilons, epsilons[1:])]
    dist0 = rr_distribution(epsilons[0], m)
    streams = _trial_streams(config)

    def one_trial(t):
        rng = np.random.default_rng(streams[t])
        outputs = np.empty((truth.size, rounds), dtype=np.int64)
        outputs[:, 0] = sample_rr_batch(truth, dist0, rng)
        for i, kernel in enumerate(kernels, start=1):
            outputs[:, i] = relax_step_batch(kernel, truth, outputs[:, i - 1], rng)
        subset = balanced_subset(truth, m, rng)
        est = np.empty((rounds, m))
        errs = np.empty((rounds, len(ATTACK_METHODS)))
        agree = True
        for r in range(rounds):
            est[r] = estimate_poly(histogram(outputs[:, r], m), epsilons[r]).estimate
            guesses = attack_guesses_matrix(outputs[:, : r + 1], epsilons[: r + 1], m)
            for k, method in enumerate(ATTACK_METHODS):
                errs[r, k] = np.mean(guesses[method][subset] != truth[subset])
            agree = agree and np.array_equal(guesses["last_output"], guesses["mle"])
        return est, errs, agree

    results = _run_trials(one_trial, config.trials, threads)
    estimates = np.stack([r[0] for r in results])
    errors = np.stack([r[1] for r in results])
    lo_mle_identical = all(r[2] for r in results)

    true_freq = np.asarray(config.counts, dtype=float) / config.n_objects
    var_theory = np.stack(
        [
            np.diag(frequency_estimate_covariance(true_freq, eps, config.n_objects))
            for eps in epsilons
        ]
    )
    ddof = 1 if config.trials > 1 else 0
    return ExperimentResult(
        config=config,
        epsilons=epsilons,
        est_mean=estimates.mean(axis=0),
        est_var=estimates.var(axis=0, ddof=ddof),
        var_theory=var_theory,
        err_mean=errors.mean(axis=0),
        err_std=errors.std(axis=0, ddof=ddof),
        floor=np.array([min_error_rate(eps, m) for eps in epsilons]),
        lo_mle_identical=lo_mle_identical,
        estimates=estimates,
        errors=errors,
    )


def compare_noisy_sampling(config: ExperimentConfig, seed=None, threads: int = 1) -> RapporComparison:
    """Head-to-head variance of relaxation vs repeated noisy sampling.

    Requires a binary domain and a noisy-sampling schedule so both pipelines
    sit at the same privacy parameter after every round.  Round k decodes the
    relaxation outputs at eps_ns(k) and the first k noisy samples of each
    client.
    """
    config = _with_seed(config, seed)
    if config.m != 2:
        raise ConfigError("compare-rappor: m must be 2 (per-bit comparison)")
    if config.eps_alpha is None:
        raise ConfigError('compare-rappor: schedule kind must be "noisy-sampling"')
    params = rappor_params(config.eps_alpha, config.eps_beta)
    epsilons = config.epsilons
    rounds = len(epsilons)
    truth = _truth_vector(config)
    n = truth.size
    kernels = [relax_kernel(a, b, 2) for a, b in zip(epsilons, epsilons[1:])]
    dist0 = rr_distribution(epsilons[0], 2)
    streams = _trial_streams(config)

    def one_trial(t):
        rng = np.random.default_rng(streams[t])
        outputs = np.empty((n, rounds), dtype=np.int64)
        outputs[:, 0] = sample_rr_batch(truth, dist0, rng)
        for i, kernel in enumerate(kernels, start=1):
            outputs[:, i] = relax_step_batch(kernel, truth, outputs[:, i - 1], rng)
        counts = simulate_noisy_sampling_batch(truth, params, rounds, rng)
        relax_est = np.empty(rounds)
        noisy_est = np.empty(rounds)
        for r in range(rounds):
            relax_est[r] = estimate_poly(histogram(outputs[:, r], 2), epsilons[r]).estimate[1]
            noisy_est[r] = decode_noisy_sampling_counts(counts[:, r], r + 1, params)
        return relax_est, noisy_est

    results = _run_trials(one_trial, config.trials, threads)
    relax_estimates = np.stack([r[0] for r in results])
    noisy_estimates = np.stack([r[1] for r in results])
    ddof = 1 if config.trials > 1 else 0
    return RapporComparison(
        config=config,
        eps_ns=np.asarray(epsilons),
        var_relax_emp=relax_estimates.var(axis=0, ddof=ddof),
        var_relax_theory=np.array([variance_binary_estimate(e, n) for e in epsilons]),
        var_noisy_emp=noisy_estimates.var(axis=0, ddof=ddof),
        var_noisy_theory=np.array(
            [variance_noisy_sampling(params, n, k) for k in range(1, rounds + 1)]
        ),
        relax_estimates=relax_estimates,
        noisy_estimates=noisy_estimates,
    )


def kernel_table_rows(eps_values=DEFAULT_TABLE_EPSILONS, domain_sizes=DEFAULT_TABLE_DOMAINS) -> list:
    """Kernel entries for every consecutive parameter pair and domain size.

    The first grid value only seeds the first transition; rows are
    (m, eps_prev, eps_next, p_aa, p_bb, p_ba).
    """
    rows = []
    for m in domain_sizes:
        for eps_prev, eps_next in zip(eps_values, eps_values[1:]):
            k = relax_kernel(eps_prev, eps_next, m)
            rows.append((m, eps_prev, eps_next, k.p_aa, k.p_bb, k.p_ba))
    return rows


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_rounds_csv(result: ExperimentResult, path) -> Path:
    """Full per-round table: estimates, variances, attack errors, floor."""
    m = result.config.m
    header = ["round", "epsilon"]
    for j in range(m):
        header += [f"est_mean_{j}", f"est_var_{j}", f"est_var_theory_{j}"]
    for method in ATTACK_METHODS:
        header += [f"err_{method}_mean", f"err_{method}_std"]
    header.append("min_error_rate")
    rows = []
    for r, eps in enumerate(result.epsilons):
        row = [r + 1, eps]
        for j in range(m):
            row += [result.est_mean[r, j], result.est_var[r, j], result.var_theory[r, j]]
        for k in range(len(ATTACK_METHODS)):
            row += [result.err_mean[r, k], result.err_std[r, k]]
        row.append(result.floor[r])
        rows.append(row)
    return _write_csv(path, header, rows)


def write_attacks_csv(result: ExperimentResult, path) -> Path:
    """Attack-only view of the per-round table."""
    header = ["round", "epsilon"]
    for method in ATTACK_METHODS:
        header += [f"err_{method}_mean", f"err_{method}_std"]
    header.append("min_error_rate")
    rows = []
    for r, eps in enumerate(result.epsilons):
        row = [r + 1, eps]
        for k in range(len(ATTACK_METHODS)):
            row += [result.err_mean[r, k], result.err_std[r, k]]
        row.append(result.floor[r])
        rows.append(row)
    return _write_csv(path, header, rows)


def write_rappor_csv(comparison: RapporComparison, path) -> Path:
    header = [
        "K",
        "eps_ns",
        "var_relax_empirical",
        "var_relax_theory",
        "var_noisy_empirical",
        "var_noisy_theory",
    ]
    rows = [
        (
            k + 1,
            comparison.eps_ns[k],
            comparison.var_relax_emp[k],
            comparison.var_relax_theory[k],
            comparison.var_noisy_emp[k],
            comparison.var_noisy_theory[k],
        )
        for k in range(len(comparison.eps_ns))
    ]
    return _write_csv(path, header, rows)


def write_kernel_table_csv(rows, path) -> Path:
    return _write_csv(path, ["m", "eps_prev", "eps_next", "p_aa", "p_bb", "p_ba"], rows)


def write_audit_csv(checks, path) -> Path:
    rows = [(c.name, c.worst, c.bound, "pass" if c.passed else "fail") for c in checks]
    return _write_csv(path, ["check", "worst", "bound", "status"], rows)

"""Unbiased frequency and mean estimators for (relaxed) randomized responses.

Estimates are deliberately not clamped to [0, 1]: clamping would break
unbiasedness.  Covariances use the closed-form per-object response covariance;
`estimate_poly` plugs the decoded frequencies into it, while
`frequency_estimate_covariance` accepts a known composition for theoretical
reference values.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._util import EPSILON_CAP, check_count, check_domain_size, check_epsilon, check_value
from .errors import IllConditionedError, ParameterError

__all__ = [
    "Histogram",
    "PerturbationMatrix",
    "FrequencyEstimate",
    "histogram",
    "estimate_binary",
    "perturbation_matrix",
    "estimate_poly",
    "response_covariance",
    "frequency_estimate_covariance",
    "variance_binary_estimate",
    "discretize_mean",
    "estimate_mean",
]


@dataclass(frozen=True)
class Histogram:
    """Counts of observed responses per domain value."""

    counts: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class PerturbationMatrix:
    """Channel matrix P of a randomized response and its closed-form inverse.

    ``matrix[i, j]`` is the probability of observing value i when the true
    value is j.  The inverse uses the diagonal-plus-rank-one form, which stays
    exact where generic inversion would lose digits at small eps.
    """

    epsilon: float
    m: int
    matrix: np.ndarray
    inverse: np.ndarray


@dataclass(frozen=True)
class FrequencyEstimate:
    """Debiased frequency vector with its plug-in covariance."""

    estimate: np.ndarray
    covariance: np.ndarray
    epsilon: float
    n: int


def histogram(responses, m: int) -> Histogram:
    """Tally responses (integers in [0, m)) into a Histogram."""
    m = check_domain_size(m)
    responses = np.asarray(responses, dtype=np.int64)
    if responses.size == 0:
        raise ParameterError("responses must be non-empty")
    if responses.min() < 0 or responses.max() >= m:
        raise ParameterError(f"responses must all be in [0, {m})")
    counts = np.bincount(responses, minlength=m)
    return Histogram(counts=counts, n=int(responses.size))


def _growth(eps: float) -> float:
    """e^eps - 1, raising if it underflows to something unusable."""
    g = math.expm1(min(eps, EPSILON_CAP))
    if g <= 0.0 or not math.isfinite((math.exp(min(eps, EPSILON_CAP)) + 1.0) / g):
        raise IllConditionedError(f"epsilon={eps} is too small to debias responses")
    return g


def estimate_binary(lambda_b, eps: float):
    """Debias an observed frequency of ones from a binary randomized response.

    Accepts a scalar or an array of observed frequencies in [0, 1]; the result
    may fall outside [0, 1], which keeps the estimator unbiased.
    """
    eps = check_epsilon(eps)
    lam = np.asarray(lambda_b, dtype=float)
    if np.any(lam < 0.0) or np.any(lam > 1.0):
        raise ParameterError("observed frequency must be in [0, 1]")
    g = _growth(eps)
    out = ((g + 2.0) * lam - 1.0) / g
    return float(out) if np.ndim(lambda_b) == 0 else out


def perturbation_matrix(eps: float, m: int) -> PerturbationMatrix:
    """Channel matrix of the ``eps``-randomized response over ``m`` values."""
    eps = check_epsilon(eps)
    m = check_domain_size(m)
    big = math.exp(min(eps, EPSILON_CAP))
    p = np.full((m, m), 1.0 / (big + m - 1))
    np.fill_diagonal(p, big / (big + m - 1))
    scale = (big + m - 1) / _growth(eps)
    if not math.isfinite(scale):
        raise IllConditionedError(f"epsilon={eps} makes the channel numerically singular")
    inv = np.full((m, m), -scale / (big + m - 1))
    np.fill_diagonal(inv, scale * (1.0 - 1.0 / (big + m - 1)))
    return PerturbationMatrix(epsilon=eps, m=m, matrix=p, inverse=inv)


def response_covariance(eps: float, m: int, x: int) -> np.ndarray:
    """Covariance of the one-hot response indicator for an object with value ``x``."""
    eps = check_epsilon(eps)
    m = check_domain_size(m)
    x = check_value(x, m, "x")
    big = math.exp(min(eps, EPSILON_CAP))
    cov = np.full((m, m), -1.0)
    cov[x, :] = -big
    cov[:, x] = -big
    idx = np.arange(m)
    cov[idx, idx] = big + m - 2
    cov[x, x] = big * (m - 1)
    cov /= (big + m - 1) ** 2
    return cov


def _mixture_response_covariance(weights, eps: float, m: int) -> np.ndarray:
    cov = np.zeros((m, m))
    for value, w in enumerate(weights):
        if w != 0.0:
            cov += w * response_covariance(eps, m, value)
    return cov


def estimate_poly(hist: Histogram, eps: float) -> FrequencyEstimate:
    """Debias a response histogram into a frequency estimate with covariance.

    The covariance plugs the decoded frequencies into the per-object response
    covariance; when the true composition is known, prefer
    `frequency_estimate_covariance` for the theoretical value.
    """
    pm = perturbation_matrix(eps, hist.m)
    n = check_count(hist.n, "n")
    counts = np.asarray(hist.counts, dtype=float)
    if np.any(counts < 0) or abs(float(counts.sum()) - n) > 1e-6 * n:
        raise ParameterError("histogram counts must be non-negative and sum to n")
    est = pm.inverse @ (counts / n)
    cov_h = n * _mixture_response_covariance(est, pm.epsilon, pm.m)
    cov = pm.inverse @ cov_h @ pm.inverse.T / n**2
    return FrequencyEstimate(estimate=est, covariance=cov, epsilon=pm.epsilon, n=n)


def frequency_estimate_covariance(freq, eps: float, n: int) -> np.ndarray:
    """Covariance of the decoded estimate for a population with composition ``freq``."""
    freq = np.asarray(freq, dtype=float)
    n = check_count(n, "n")
    if abs(float(freq.sum()) - 1.0) > 1e-9:
        raise ParameterError("composition must sum to 1")
    pm = perturbation_matrix(eps, len(freq))
    cov_per_object = _mixture_response_covariance(freq, pm.epsilon, pm.m)
    return pm.inverse @ cov_per_object @ pm.inverse.T / n


def variance_binary_estimate(eps: float, n: int) -> float:
    """Variance of the debiased frequency of ones over ``n`` binary responses."""
    eps = check_epsilon(eps)
    n = check_count(n, "n")
    return math.exp(min(eps, EPSILON_CAP)) / (n * _growth(eps) ** 2)


def discretize_mean(value: float, l: float, h: float, rng: np.random.Generator) -> float:
    """Round a bounded value to one of the interval endpoints, unbiasedly."""
    l, h = float(l), float(h)
    if not l < h:
        raise ParameterError(f"interval must satisfy l < h, got [{l}, {h}]")
    value = float(value)
    if not l <= value <= h:
        raise ParameterError(f"value {value} outside [{l}, {h}]")
    return h if rng.random() < (value - l) / (h - l) else l


def estimate_mean(lambda_h: float, eps: float, l: float, h: float) -> float:
    """Debiased mean of a population discretized to {l, h} and randomized.

    Uses the interval-width coefficient so the estimator stays unbiased; with
    l = 0, h = 1 it reduces exactly to `estimate_binary`.
    """
    l, h = float(l), float(h)
    if not l < h:
        raise ParameterError(f"interval must satisfy l < h, got [{l}, {h}]")
    return l + (h - l) * estimate_binary(lambda_h, eps)

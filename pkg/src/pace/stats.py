"""Rank and effect-size statistics used by the evaluation pipeline.

Three primitives cover everything the analysis needs:

* :func:`mann_whitney_u` — two-sample rank test of stochastic dominance.
  Exact p by enumeration of rank assignments for small tie-free samples,
  normal approximation with tie and continuity corrections otherwise.
* :func:`hedges_g` — bias-corrected standardized mean difference.
* :func:`ks_normality` — Kolmogorov-Smirnov test against a normal with
  *estimated* mean and SD. Because parameters are fitted from the sample,
  the classical KS null distribution does not apply; the p-value comes
  from a seeded Monte Carlo over refitted normal resamples instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, groupby
from typing import Sequence

import numpy as np
from scipy.special import ndtr

EXACT_SIZE_LIMIT = 16  # combined sample size above which enumeration stops

ALTERNATIVES = ("two_sided", "a_less", "a_greater")


class Method(str, Enum):
    EXACT = "exact"
    NORMAL_APPROX = "normal_approx"
    MONTE_CARLO = "monte_carlo"


class EmptySampleError(ValueError):
    """A test was handed an empty sample."""


class DegenerateEffectError(ValueError):
    """Effect size is undefined: zero pooled variance with unequal means."""


class ZeroVarianceError(ValueError):
    """A normality test needs a sample with positive variance."""


@dataclass(frozen=True)
class StatResult:
    """A test statistic with its p-value and how the p was obtained.

    ``n2`` is 0 for one-sample tests.
    """

    statistic: float
    p_value: float
    method: Method
    n1: int
    n2: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value out of [0, 1]: {self.p_value}")


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------


def _midranks(pooled: Sequence[float]) -> list[float]:
    """Fractional ranks (1-based); ties share the mean of their rank block."""
    order = sorted(range(len(pooled)), key=pooled.__getitem__)
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _exact_tail_probs(ranks_a: Sequence[float], n1: int, n2: int) -> tuple[float, float]:
    """P(U <= u_obs) and P(U >= u_obs) by enumerating rank subsets.

    Only valid without ties, where ranks are a permutation of 1..n1+n2 and
    every assignment of n1 ranks to the first sample is equally likely.
    """
    u_obs = sum(ranks_a) - n1 * (n1 + 1) / 2.0
    total = 0
    n_le = 0
    n_ge = 0
    offset = n1 * (n1 + 1) / 2.0
    for subset in combinations(range(1, n1 + n2 + 1), n1):
        u = sum(subset) - offset
        total += 1
        if u <= u_obs + 1e-9:
            n_le += 1
        if u >= u_obs - 1e-9:
            n_ge += 1
    return n_le / total, n_ge / total


def _normal_tail_probs(
    u_a: float, n1: int, n2: int, tie_sizes: Sequence[int]
) -> tuple[float, float]:
    """P(U <= u_a) and P(U >= u_a) under the tie-corrected normal approximation.

    Continuity correction: 0.5 toward the mean on each tail.
    """
    n = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = sum(t**3 - t for t in tie_sizes) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return 1.0, 1.0  # every pooled value identical: no evidence either way
    sd = math.sqrt(var)
    p_le = float(ndtr((u_a + 0.5 - mu) / sd))
    p_ge = float(ndtr((mu - u_a + 0.5) / sd))
    return p_le, p_ge


def mann_whitney_u(
    a: Sequence[float], b: Sequence[float], alternative: str = "two_sided"
) -> StatResult:
    """Mann-Whitney U test; reported statistic is min(U_a, U_b).

    U_a counts pairs (x in a, y in b) with x > y, ties counted half.
    ``alternative`` is one of ``two_sided``, ``a_less`` (a stochastically
    smaller than b), or ``a_greater``. The exact enumeration runs when the
    combined size is at most 16 and no ties are present; otherwise the
    normal approximation with tie and continuity corrections is used and
    reported as such.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise EmptySampleError("mann_whitney_u requires both samples non-empty")

    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    ranks_a = ranks[:n1]
    u_a = sum(ranks_a) - n1 * (n1 + 1) / 2.0
    u_b = n1 * n2 - u_a

    tie_sizes = [len(list(group)) for _, group in groupby(sorted(pooled))]
    has_ties = any(t > 1 for t in tie_sizes)

    if n1 + n2 <= EXACT_SIZE_LIMIT and not has_ties:
        p_le, p_ge = _exact_tail_probs(ranks_a, n1, n2)
        method = Method.EXACT
    else:
        p_le, p_ge = _normal_tail_probs(u_a, n1, n2, tie_sizes)
        method = Method.NORMAL_APPROX

    if alternative == "a_less":
        p = p_le
    elif alternative == "a_greater":
        p = p_ge
    else:
        p = min(1.0, 2.0 * min(p_le, p_ge))

    return StatResult(
        statistic=min(u_a, u_b), p_value=min(1.0, p), method=method, n1=n1, n2=n2
    )


# ---------------------------------------------------------------------------
# Hedges' g
# ---------------------------------------------------------------------------


def hedges_g(a: Sequence[float], b: Sequence[float]) -> float:
    """Bias-corrected standardized mean difference.

    g = J * (mean(a) - mean(b)) / s_pooled, with sample (n-1) variances,
    s_pooled^2 = ((n1-1) s1^2 + (n2-1) s2^2) / (n1+n2-2) and small-sample
    correction J = 1 - 3 / (4 (n1+n2) - 9).
    """
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise EmptySampleError("hedges_g requires at least 2 values per sample")
    mean_a = sum(a) / n1
    mean_b = sum(b) / n2
    var_a = sum((x - mean_a) ** 2 for x in a) / (n1 - 1)
    var_b = sum((x - mean_b) ** 2 for x in b) / (n2 - 1)
    pooled_var = ((n1 - 1) * var_a + (n2 - 1) * var_b) / (n1 + n2 - 2)
    diff = mean_a - mean_b
    if pooled_var == 0.0:
        if diff == 0.0:
            return 0.0
        raise DegenerateEffectError(
            "pooled variance is zero but means differ; effect size is unbounded"
        )
    correction = 1.0 - 3.0 / (4.0 * (n1 + n2) - 9.0)
    return correction * diff / math.sqrt(pooled_var)


# ---------------------------------------------------------------------------
# KS normality (estimated parameters, Monte Carlo p)
# ---------------------------------------------------------------------------


def _ks_statistic_sorted(z: np.ndarray) -> float:
    """Sup gap between the ECDF and Phi over already-sorted standardized data.

    At each point both one-sided gaps (ECDF steps from above and below)
    are taken; D is the max over all of them.
    """
    n = z.shape[-1]
    cdf = ndtr(z)
    steps_hi = np.arange(1, n + 1) / n
    steps_lo = np.arange(0, n) / n
    d_plus = np.max(steps_hi - cdf, axis=-1)
    d_minus = np.max(cdf - steps_lo, axis=-1)
    return np.maximum(d_plus, d_minus)


def ks_normality(
    x: Sequence[float], replicates: int = 10_000, seed: int = 0
) -> StatResult:
    """KS normality test with mean and SD estimated from the sample.

    D is computed against Phi((x - mean) / sd) with the sample's own
    estimates (sd with n-1 denominator). Since the reference distribution
    is fitted, p comes from Monte Carlo: draw ``replicates`` normal samples
    of the same size, refit parameters on each, recompute D, and report
    (1 + #{D* >= D}) / (replicates + 1). Deterministic for a fixed seed.
    """
    n = len(x)
    if n < 4:
        raise EmptySampleError(f"ks_normality requires at least 4 values, got {n}")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    data = np.asarray(x, dtype=float)
    sd = float(np.std(data, ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("sample variance is zero; normality is undefined")
    z = np.sort((data - data.mean()) / sd)
    d_obs = float(_ks_statistic_sorted(z))

    # D is invariant to the true location/scale once parameters are
    # re-estimated, so standard normal draws suffice for the null.
    rng = np.random.default_rng(seed)
    batch = 2_000  # bound memory at ~batch*n floats
    exceed = 0
    remaining = replicates
    while remaining > 0:
        m = min(batch, remaining)
        sims = rng.standard_normal((m, n))
        sims = (sims - sims.mean(axis=1, keepdims=True)) / sims.std(axis=1, ddof=1, keepdims=True)
        sims.sort(axis=1)
        d_sim = _ks_statistic_sorted(sims)
        exceed += int(np.count_nonzero(d_sim >= d_obs))
        remaining -= m
    p = (1 + exceed) / (replicates + 1)

    return StatResult(
        statistic=d_obs, p_value=p, method=Method.MONTE_CARLO, n1=n, n2=0
    )

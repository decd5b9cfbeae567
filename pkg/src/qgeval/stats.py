"""Nonparametric tests and correlation machinery.

Everything here is pure-Python and deterministic. The two Wilcoxon tests
switch between an exact null distribution (full enumeration, computed by
dynamic programming over rank subsets) and a tie/continuity-corrected
normal approximation; the exactness bound keeps enumeration instant at
desk scale. Ties force the approximation, because with ties the
enumeration distribution is no longer distribution-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EXACT_LIMIT = 12
ALTERNATIVES = ("greater", "less", "two_sided")


class DegenerateInputError(ValueError):
    """The data admits no informative test (constant sample, all-zero diffs)."""


@dataclass(frozen=True)
class PairedSample:
    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("PairedSample requires at least one pair")
        for x, y in self.pairs:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("PairedSample values must be finite")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str  # "exact", "normal_approx" or "t"
    alternative: str
    n: tuple[int, ...]

    __test__ = False  # not a pytest class despite the name


def _check_alternative(alternative: str) -> None:
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


def _two_sided(p_greater: float, p_less: float) -> float:
    return min(1.0, 2.0 * min(p_greater, p_less))


# ---------------------------------------------------------------------------
# Ranking and correlation coefficients
# ---------------------------------------------------------------------------

def rank_with_ties(values: Sequence[float]) -> list[float]:
    """Midranks: tied values share the average of the ranks they span."""
    vals = list(values)
    if not vals:
        raise ValueError("rank_with_ties requires at least one value")
    if any(not math.isfinite(v) for v in vals):
        raise ValueError("rank_with_ties requires finite values")
    order = sorted(range(len(vals)), key=lambda i: vals[i])
    ranks = [0.0] * len(vals)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        midrank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def _check_xy(x: Sequence[float], y: Sequence[float], min_n: int = 3) -> None:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < min_n:
        raise ValueError(f"need at least {min_n} points, got {len(x)}")
    for v in list(x) + list(y):
        if not math.isfinite(v):
            raise ValueError("inputs must be finite")


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    _check_xy(x, y)
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise DegenerateInputError("pearson of a constant sequence")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rho: Pearson correlation of midranks."""
    _check_xy(x, y)
    return pearson(rank_with_ties(x), rank_with_ties(y))


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall tau-b (tie-corrected); equals tau-a when there are no ties."""
    _check_xy(x, y)
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom_x = n0 - _tie_pair_count(x)
    denom_y = n0 - _tie_pair_count(y)
    if denom_x == 0 or denom_y == 0:
        raise DegenerateInputError("kendall_tau of an all-tied sequence")
    return (concordant - discordant) / math.sqrt(denom_x * denom_y)


def _tie_pair_count(values: Sequence[float]) -> int:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return sum(c * (c - 1) // 2 for c in counts.values())


# ---------------------------------------------------------------------------
# Exact null distributions (dynamic programming over rank subsets)
# ---------------------------------------------------------------------------

def _subset_sum_counts(total_ranks: int, subset_size: int) -> list[int]:
    """counts[s] = number of `subset_size`-subsets of {1..total_ranks} with sum s."""
    max_sum = total_ranks * (total_ranks + 1) // 2
    table = [[0] * (max_sum + 1) for _ in range(subset_size + 1)]
    table[0][0] = 1
    for rank in range(1, total_ranks + 1):
        for k in range(min(rank, subset_size), 0, -1):
            row, prev = table[k], table[k - 1]
            for s in range(max_sum, rank - 1, -1):
                if prev[s - rank]:
                    row[s] += prev[s - rank]
    return table[subset_size]


def _signed_rank_counts(n: int) -> list[int]:
    """counts[s] = number of sign patterns over ranks {1..n} with positive-rank sum s."""
    max_sum = n * (n + 1) // 2
    counts = [0] * (max_sum + 1)
    counts[0] = 1
    for rank in range(1, n + 1):
        for s in range(max_sum, rank - 1, -1):
            counts[s] += counts[s - rank]
    return counts


# ---------------------------------------------------------------------------
# Wilcoxon rank-sum (two independent samples)
# ---------------------------------------------------------------------------

def wilcoxon_rank_sum(
    x: Sequence[float],
    y: Sequence[float],
    alternative: str = "greater",
) -> TestResult:
    """Rank-sum test on H0: the two samples share a distribution.

    `alternative="greater"` asks whether x is stochastically larger than y.
    Exact p by full enumeration when len(x)+len(y) <= EXACT_LIMIT and the
    pooled sample has no ties, otherwise a normal approximation with tie
    and continuity corrections.
    """
    _check_alternative(alternative)
    if len(x) == 0 or len(y) == 0:
        raise ValueError("wilcoxon_rank_sum requires non-empty samples")
    pooled = list(x) + list(y)
    if any(not math.isfinite(v) for v in pooled):
        raise ValueError("samples must be finite")
    n, m = len(x), len(y)
    total = n + m
    ranks = rank_with_ties(pooled)
    w = math.fsum(ranks[:n])
    has_ties = len(set(pooled)) != total

    if total <= EXACT_LIMIT and not has_ties:
        counts = _subset_sum_counts(total, n)
        denom = math.comb(total, n)
        w_int = round(w)
        p_greater = sum(counts[s] for s in range(w_int, len(counts))) / denom
        p_less = sum(counts[s] for s in range(0, w_int + 1)) / denom
        method = "exact"
    else:
        mean = n * (total + 1) / 2
        tie_term = math.fsum(c**3 - c for c in _value_counts(pooled))
        var = n * m / 12 * ((total + 1) - tie_term / (total * (total - 1)))
        if var <= 0:
            p_greater = p_less = 1.0
        else:
            sd = math.sqrt(var)
            p_greater = 1.0 - normal_cdf((w - mean - 0.5) / sd)
            p_less = normal_cdf((w - mean + 0.5) / sd)
        method = "normal_approx"

    p = {"greater": p_greater, "less": p_less, "two_sided": _two_sided(p_greater, p_less)}[alternative]
    return TestResult(statistic=w, p_value=min(1.0, p), method=method,
                      alternative=alternative, n=(n, m))


def _value_counts(values: Sequence[float]) -> list[int]:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return list(counts.values())


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank (paired sample)
# ---------------------------------------------------------------------------

def wilcoxon_signed_rank(sample: PairedSample, alternative: str = "greater") -> TestResult:
    """Signed-rank test on the paired differences d = y - x.

    `alternative="greater"` asks whether d is shifted above zero. Zero
    differences are dropped (Wilcoxon convention); all-zero input is
    degenerate. Exact p by sign-pattern enumeration when the remaining
    n <= EXACT_LIMIT and no absolute differences tie.
    """
    _check_alternative(alternative)
    diffs = [y - x for x, y in sample.pairs if y != x]
    if not diffs:
        raise DegenerateInputError("all paired differences are zero")
    n = len(diffs)
    abs_ranks = rank_with_ties([abs(d) for d in diffs])
    w_plus = math.fsum(r for d, r in zip(diffs, abs_ranks) if d > 0)
    has_ties = len({abs(d) for d in diffs}) != n

    if n <= EXACT_LIMIT and not has_ties:
        counts = _signed_rank_counts(n)
        denom = 2**n
        w_int = round(w_plus)
        p_greater = sum(counts[s] for s in range(w_int, len(counts))) / denom
        p_less = sum(counts[s] for s in range(0, w_int + 1)) / denom
        method = "exact"
    else:
        mean = n * (n + 1) / 4
        tie_term = math.fsum(c**3 - c for c in _value_counts([abs(d) for d in diffs]))
        var = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48
        if var <= 0:
            p_greater = p_less = 1.0
        else:
            sd = math.sqrt(var)
            p_greater = 1.0 - normal_cdf((w_plus - mean - 0.5) / sd)
            p_less = normal_cdf((w_plus - mean + 0.5) / sd)
        method = "normal_approx"

    p = {"greater": p_greater, "less": p_less, "two_sided": _two_sided(p_greater, p_less)}[alternative]
    return TestResult(statistic=w_plus, p_value=min(1.0, p), method=method,
                      alternative=alternative, n=(n,))


# ---------------------------------------------------------------------------
# Williams test for two dependent correlations sharing a variable
# ---------------------------------------------------------------------------

def williams_test(r12: float, r13: float, r23: float, n: int,
                  alternative: str = "greater") -> TestResult:
    """Williams (1959) t test of H0: rho13 = rho23.

    r13 and r23 are the two competing correlations against the shared
    variable; r12 is the correlation between the two competitors, which
    carries the dependence. One-tailed p in the direction r13 > r23 by
    default; t has n - 3 degrees of freedom.
    """
    _check_alternative(alternative)
    for name, r in (("r12", r12), ("r13", r13), ("r23", r23)):
        if not -1.0 < r < 1.0:
            raise ValueError(f"{name} must lie in (-1, 1), got {r}")
    if n < 4:
        raise ValueError(f"williams_test needs n >= 4, got {n}")
    det = 1 - r12**2 - r13**2 - r23**2 + 2 * r12 * r13 * r23
    if det < -1e-9:
        raise ValueError(f"inconsistent correlation triple (determinant {det:.3g} < 0)")
    det = max(det, 0.0)
    df = n - 3
    denom_sq = 2 * det * (n - 1) / df + ((r13 + r23) ** 2 / 4) * (1 - r12) ** 3
    if denom_sq <= 0:
        raise ValueError("degenerate Williams denominator")
    t = (r13 - r23) * math.sqrt((n - 1) * (1 + r12)) / math.sqrt(denom_sq)
    p_greater = 1.0 - t_cdf(t, df)
    p_less = t_cdf(t, df)
    p = {"greater": p_greater, "less": p_less, "two_sided": _two_sided(p_greater, p_less)}[alternative]
    return TestResult(statistic=t, p_value=p, method="t", alternative=alternative, n=(n,))


# ---------------------------------------------------------------------------
# Distribution functions
# ---------------------------------------------------------------------------

def normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if not math.isfinite(z):
        raise ValueError("normal_cdf requires a finite argument")
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def t_cdf(t: float, df: float) -> float:
    """Student-t CDF via the regularized incomplete beta function."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if not math.isfinite(t):
        raise ValueError("t_cdf requires a finite argument")
    if t == 0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * _betainc(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1) / (a + b + 2):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, 1.0 - x) / b


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h

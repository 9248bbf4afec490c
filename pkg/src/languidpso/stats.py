"""Error and alpha metrics, significance tests and comparison summaries.

The pipeline for one pure/languid variant pair is::

    summaries = mean_error(...)                       # per arm and function
    row = compare_pair(summary_X, summary_XL)         # best vs best
    counts = summarize_comparisons(rows)              # N_L, N^_L, N_X, N^_X, N^_0

``alpha_rating`` is positive when the languid arm (``XL``) has the smaller
mean error. All tests are one-sided in the direction of the arm with the
smaller mean error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import special
from scipy.stats import t as _student_t

__all__ = [
    "ComparisonRow",
    "SampleSummary",
    "ShapiroResult",
    "SummaryCounts",
    "alpha_rating",
    "alpha_summary",
    "compare_pair",
    "format_rows_csv",
    "format_rows_text",
    "format_summary_text",
    "histogram_alpha",
    "mean_error",
    "shapiro_wilk",
    "summarize_comparisons",
    "t_test_one_sided",
    "wilcoxon_one_sided",
]

ERROR_TOLERANCE = 1e-9
EXACT_WILCOXON_MAX = 16

REPORT_COLUMNS = (
    "function", "n_X", "w0_X", "c_X", "version_X", "eps_X",
    "n_XL", "w0_XL", "c_XL", "version_XL", "eps_XL",
    "alpha", "H1", "test", "p", "significant",
)


# ---------------------------------------------------------------------------
# errors and alpha
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleSummary:
    """Per-run errors of one arm on one function and their mean."""

    values: np.ndarray
    mean: float
    size: int

    @classmethod
    def from_errors(cls, errors) -> "SampleSummary":
        values = np.asarray(errors, dtype=float).reshape(-1)
        if values.size == 0:
            raise ValueError("need at least one run")
        return cls(values, float(np.mean(values)), int(values.size))


def mean_error(final_bests, f_star: float) -> SampleSummary:
    """Errors ``f_best - f_star`` of a set of runs.

    Errors within ``1e-9`` below zero are floating noise and are clamped to
    zero; anything further below ``f_star`` means the optimum value is wrong.
    """
    bests = np.asarray(final_bests, dtype=float).reshape(-1)
    if bests.size == 0:
        raise ValueError("mean_error needs at least one run")
    errors = bests - f_star
    if np.any(errors < -ERROR_TOLERANCE) or np.any(np.isnan(errors)):
        raise ValueError("final best below the known optimum (or NaN)")
    return SampleSummary.from_errors(np.maximum(errors, 0.0))


def alpha_rating(eps_X: float, eps_XL: float) -> float:
    """Relative difference of the two mean errors, in ``[-2, 2]``; 0 when both are 0."""
    if eps_X < 0 or eps_XL < 0:
        raise ValueError("errors must be non-negative")
    total = eps_X + eps_XL
    if total == 0:
        return 0.0
    return float(np.clip((eps_X - eps_XL) / (0.5 * total), -2.0, 2.0))


def alpha_summary(alphas) -> tuple[float, int]:
    """``(alpha_avg, N_alpha+)``: mean alpha and the number of strictly positive alphas."""
    a = np.asarray(alphas, dtype=float).reshape(-1)
    if a.size == 0:
        raise ValueError("alpha_summary needs at least one value")
    return float(np.mean(a)), int(np.count_nonzero(a > 0))


def histogram_alpha(alphas, bins: int = 20):
    """Equal-width histogram over ``[-2, 2]``.

    Returns ``[((lo, hi), count), ...]``; each bin is half-open except the
    last, which also holds ``alpha = 2``.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    a = np.clip(np.asarray(alphas, dtype=float).reshape(-1), -2.0, 2.0)
    counts, edges = np.histogram(a, bins=bins, range=(-2.0, 2.0))
    return [((float(lo), float(hi)), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


# ---------------------------------------------------------------------------
# Shapiro-Wilk (Royston's approximation, algorithm AS R94)
# ---------------------------------------------------------------------------

_SW_G = (-2.273, 0.459)
_SW_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_SW_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_SW_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_SW_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_SW_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_SW_C6 = (-0.4803, -0.082676, 0.0030302)


def _poly(coef, x: float) -> float:
    """``coef[0] + coef[1] x + coef[2] x**2 + ...``"""
    out = 0.0
    for c in reversed(coef):
        out = out * x + c
    return out


class ShapiroResult(NamedTuple):
    W: float
    p: float
    degenerate: bool = False


def _sw_coefficients(n: int) -> np.ndarray:
    """The ``n // 2`` antisymmetric weights for the largest-minus-smallest pairs."""
    nn2 = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    m = special.ndtri((np.arange(1, nn2 + 1) - 0.375) / (n + 0.25))
    summ2 = 2.0 * float(np.sum(m**2))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = np.empty(nn2)
    a[0] = _poly(_SW_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a[1] = _poly(_SW_C2, rsn) - m[1] / ssumm2
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a[0] ** 2 - 2.0 * a[1] ** 2))
        start = 2
    else:
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a[0] ** 2))
        start = 1
    a[start:] = -m[start:] / fac
    return a


def shapiro_wilk(sample) -> ShapiroResult:
    """Shapiro-Wilk W statistic and its approximate p-value.

    Coefficients and the normalizing transformation of ``log(1 - W)``
    follow Royston (1995). A zero-variance sample has no defined W; it is
    reported as ``W = 1, p = 0`` with ``degenerate=True`` so that callers
    treat it as non-normal.

    Parameters
    ----------
    sample : array_like
        Between 3 and 5000 values.
    """
    x = np.sort(np.asarray(sample, dtype=float).reshape(-1))
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    if x[-1] - x[0] <= 1e-19 * max(1.0, abs(x[0])):
        return ShapiroResult(1.0, 0.0, True)

    a = _sw_coefficients(n)
    nn2 = n // 2
    # centre and scale first: W is location/scale invariant and this keeps
    # the sums well conditioned
    xs = (x - np.mean(x)) / (x[-1] - x[0])
    ssq = float(np.sum(xs**2))
    numerator = float(np.sum(a * (xs[::-1][:nn2] - xs[:nn2])))
    W = min(numerator**2 / ssq, 1.0)

    if n == 3:
        W = max(W, 0.75)
        p = 6.0 / math.pi * (math.asin(math.sqrt(W)) - math.pi / 3.0)
        return ShapiroResult(W, min(max(p, 0.0), 1.0))

    w1 = math.log1p(-W) if W < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_SW_G, n)
        if w1 >= gamma:
            return ShapiroResult(W, 1e-99)
        y = -math.log(gamma - w1)
        mean = _poly(_SW_C3, n)
        sd = math.exp(_poly(_SW_C4, n))
    else:
        y = w1
        ln = math.log(n)
        mean = _poly(_SW_C5, ln)
        sd = math.exp(_poly(_SW_C6, ln))
    if math.isinf(y):
        return ShapiroResult(W, 1.0)
    return ShapiroResult(W, float(special.ndtr(-(y - mean) / sd)))


# ---------------------------------------------------------------------------
# one-sided two-sample tests; alternative: a is better (smaller) than b
# ---------------------------------------------------------------------------


def t_test_one_sided(a, b) -> float:
    """Welch t-test p-value for ``mean(a) < mean(b)``.

    Uses the unequal-variance statistic with Welch-Satterthwaite degrees of
    freedom and the lower tail of Student's t. If both samples have zero
    variance the result is 0.5 for equal means and 0 or 1 otherwise.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size < 2 or b.size < 2:
        raise ValueError("t-test needs at least two values per sample")
    ma, mb = float(np.mean(a)), float(np.mean(b))
    va = float(np.var(a, ddof=1)) / a.size
    vb = float(np.var(b, ddof=1)) / b.size
    se2 = va + vb
    if se2 == 0.0:
        if ma == mb:
            return 0.5
        return 0.0 if ma < mb else 1.0
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    return float(_student_t.cdf(t, df))


def _midranks(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks (1-based) and the sizes of the tie groups."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    sizes = np.diff(np.r_[starts, values.size])
    avg = starts + (sizes + 1) / 2.0
    ranks = np.empty(values.size)
    ranks[order] = np.repeat(avg, sizes)
    return ranks, sizes


def _rank_sum_counts(m: int, N: int) -> list[int]:
    """``counts[s]``: number of ``m``-subsets of ``{1..N}`` whose sum is ``s``."""
    max_sum = m * (2 * N - m + 1) // 2
    # ways[j][s]: j-subsets of the ranks seen so far with sum s
    ways = [[0] * (max_sum + 1) for _ in range(m + 1)]
    ways[0][0] = 1
    for r in range(1, N + 1):
        for j in range(min(r, m), 0, -1):
            prev, cur = ways[j - 1], ways[j]
            for s in range(max_sum, r - 1, -1):
                if prev[s - r]:
                    cur[s] += prev[s - r]
    return ways[m]


def wilcoxon_exact_cdf(w: int, m: int, n: int) -> float:
    """``P(W <= w)`` for the rank sum of ``m`` out of ``m + n`` untied observations."""
    counts = _rank_sum_counts(m, m + n)
    w = min(int(math.floor(w)), len(counts) - 1)
    if w < 0:
        return 0.0
    return sum(counts[: w + 1]) / math.comb(m + n, m)


def wilcoxon_one_sided(a, b) -> float:
    """Wilcoxon rank-sum p-value for ``a`` stochastically smaller than ``b``.

    The statistic is the midrank sum of ``a``. The null distribution is
    exact when ``len(a) + len(b) <= 16`` and there are no ties; otherwise a
    normal approximation with tie-corrected variance and a 0.5 continuity
    correction is used. When every value is tied the result is 1.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = a.size, b.size
    if m < 1 or n < 1:
        raise ValueError("rank-sum test needs non-empty samples")
    ranks, ties = _midranks(np.concatenate([a, b]))
    w = float(np.sum(ranks[:m]))
    N = m + n
    if N <= EXACT_WILCOXON_MAX and np.all(ties == 1):
        return wilcoxon_exact_cdf(int(round(w)), m, n)
    mean = m * (N + 1) / 2.0
    tie_term = float(np.sum(ties.astype(float) ** 3 - ties)) / (N * (N - 1)) if N > 1 else 0.0
    var = m * n / 12.0 * ((N + 1) - tie_term)
    if var <= 0.0:
        return 1.0
    z = (w - mean + 0.5) / math.sqrt(var)
    return float(special.ndtr(z))


# ---------------------------------------------------------------------------
# comparisons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    """Best pure configuration versus best languid configuration on one function.

    ``config_X``/``config_XL`` are ``(n, w0, c, version)`` tuples (or
    ``None`` when unknown). ``H1`` names the arm with the smaller mean
    error; ``test`` is ``"t-test"``, ``"wilcoxon"`` or ``"none"`` (ties).
    """

    function: str
    config_X: tuple | None
    config_XL: tuple | None
    eps_X: float
    eps_XL: float
    alpha: float
    H1: str
    test: str
    p: float | None
    significant: bool

    def as_dict(self) -> dict:
        cx = self.config_X or (None,) * 4
        cl = self.config_XL or (None,) * 4
        return {
            "function": self.function,
            "n_X": cx[0], "w0_X": cx[1], "c_X": cx[2], "version_X": cx[3], "eps_X": self.eps_X,
            "n_XL": cl[0], "w0_XL": cl[1], "c_XL": cl[2], "version_XL": cl[3], "eps_XL": self.eps_XL,
            "alpha": self.alpha, "H1": self.H1, "test": self.test, "p": self.p,
            "significant": self.significant,
        }


def compare_pair(runs_X: SampleSummary, runs_XL: SampleSummary, level: float = 0.05,
                 function: str = "", config_X=None, config_XL=None) -> ComparisonRow:
    """Direction, test choice and significance for one function.

    ``H1`` is the arm with the smaller mean error. When both samples pass a
    Shapiro-Wilk normality check at ``level`` a one-sided Welch t-test is
    used, otherwise a one-sided Wilcoxon rank-sum test. Exactly equal means
    give a tie with no test.
    """
    eps_X, eps_XL = runs_X.mean, runs_XL.mean
    alpha = alpha_rating(max(eps_X, 0.0), max(eps_XL, 0.0))
    if eps_X == eps_XL:
        return ComparisonRow(function, config_X, config_XL, eps_X, eps_XL, alpha, "tie", "none", None, False)
    if eps_XL < eps_X:
        h1, better, worse = "XL", runs_XL.values, runs_X.values
    else:
        h1, better, worse = "X", runs_X.values, runs_XL.values
    if _is_normal(better, level) and _is_normal(worse, level):
        test, p = "t-test", t_test_one_sided(better, worse)
    else:
        test, p = "wilcoxon", wilcoxon_one_sided(better, worse)
    return ComparisonRow(function, config_X, config_XL, eps_X, eps_XL, alpha, h1, test, p, p < level)


def _is_normal(values: np.ndarray, level: float) -> bool:
    if values.size < 3:
        return False
    res = shapiro_wilk(values)
    return not res.degenerate and res.p >= level


class SummaryCounts(NamedTuple):
    """``N_L, N^_L, N_X, N^_X, N^_0``; the hatted counts are significant rows."""

    N_L: int
    N_L_sig: int
    N_X: int
    N_X_sig: int
    N_0: int

    @property
    def total(self) -> int:
        return self.N_L_sig + self.N_X_sig + self.N_0


def summarize_comparisons(rows: Sequence[ComparisonRow]) -> SummaryCounts:
    if len(rows) == 0:
        raise ValueError("no comparison rows")
    n_l = sum(r.H1 == "XL" for r in rows)
    n_x = sum(r.H1 == "X" for r in rows)
    n_l_sig = sum(r.H1 == "XL" and r.significant for r in rows)
    n_x_sig = sum(r.H1 == "X" and r.significant for r in rows)
    return SummaryCounts(n_l, n_l_sig, n_x, n_x_sig, len(rows) - n_l_sig - n_x_sig)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_rows_csv(rows: Iterable[ComparisonRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        d = row.as_dict()
        writer.writerow([_cell(d[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def _short(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.4e}" if value != 0 and (abs(value) < 1e-2 or abs(value) >= 1e4) else f"{value:.4f}"
    return str(value)


def format_rows_text(rows: Iterable[ComparisonRow]) -> str:
    """Aligned table in the column order of the CSV report."""
    table = [list(REPORT_COLUMNS)] + [[_short(row.as_dict()[c]) for c in REPORT_COLUMNS] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(REPORT_COLUMNS))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in table) + "\n"


def format_summary_text(rows: Sequence[ComparisonRow]) -> str:
    counts = summarize_comparisons(rows)
    alpha_avg, n_plus = alpha_summary([r.alpha for r in rows])
    return (
        f"alpha_avg={alpha_avg:.3f} N_alpha+={n_plus} "
        f"N_L={counts.N_L} N^_L={counts.N_L_sig} N_X={counts.N_X} N^_X={counts.N_X_sig} "
        f"N^_0={counts.N_0} total={counts.total}\n"
    )

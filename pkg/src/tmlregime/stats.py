"""Residual diagnostics: normality and goodness-of-fit tests, the ARCH LM test
and a rescaled-range Hurst exponent.

Every test returns a :class:`TestResult`. Decisions are reported at the
levels in :data:`ALPHAS`; with a p-value ``p`` the test rejects at ``alpha``
when ``p < alpha``, so decisions are nested across levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import NumericalError, ValidationError

ALPHAS = (0.01, 0.05, 0.10)
CDF_CLIP = 1e-12


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: float | None
    reject_at: tuple = ()
    extra: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this as a test class

    def as_dict(self) -> dict:
        return {"name": self.name, "statistic": self.statistic, "p_value": self.p_value,
                "reject_at": {f"{a:g}": r for a, r in self.reject_at}, **self.extra}


def _result(name: str, statistic: float, p_value: float | None, **extra) -> TestResult:
    if not math.isfinite(statistic):
        raise NumericalError(f"{name}: statistic is not finite")
    if p_value is not None:
        p_value = float(min(max(p_value, 0.0), 1.0))
        decisions = tuple((a, bool(p_value < a)) for a in ALPHAS)
    else:
        decisions = ()
    return TestResult(name, float(statistic), p_value, decisions, extra)


def _sample(samples, min_n: int, name: str) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_n:
        raise ValidationError(f"{name} needs at least {min_n} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} needs finite observations")
    return x


def _merge_small(expected: np.ndarray, observed: np.ndarray, min_expected: float):
    """Merge adjacent bins left to right until each expected count reaches ``min_expected``.

    A short remainder at the right end is folded into the last merged bin.
    """
    exp_out, obs_out = [], []
    e_acc = o_acc = 0.0
    for e, o in zip(expected, observed):
        e_acc += e
        o_acc += o
        if e_acc >= min_expected:
            exp_out.append(e_acc)
            obs_out.append(o_acc)
            e_acc = o_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_out:
            exp_out[-1] += e_acc
            obs_out[-1] += o_acc
        else:
            exp_out.append(e_acc)
            obs_out.append(o_acc)
    return np.array(exp_out), np.array(obs_out)


def pearson_chi2_normal(samples, n_bins: int = 50, min_expected: float = 5.0) -> TestResult:
    """Pearson chi-square test of normality with equal-probability bins.

    The normal law is fitted by maximum likelihood (sample mean and biased
    standard deviation). Bins are equally likely under the fit; bins whose
    expected count falls below ``min_expected`` are merged with their right
    neighbours. The p-value uses ``bins - 3`` degrees of freedom.
    """
    if n_bins < 4:
        raise ValidationError("n_bins must be at least 4")
    x = _sample(samples, 8 * n_bins, "chi-square test")
    mu, sd = float(x.mean()), float(x.std())
    if not sd > 0:
        raise ValidationError("chi-square test is undefined for a constant sample")
    inner = sps.norm.ppf(np.arange(1, n_bins) / n_bins, loc=mu, scale=sd)
    observed = np.bincount(np.searchsorted(inner, x, side="right"), minlength=n_bins).astype(float)
    expected = np.full(n_bins, x.size / n_bins)
    expected, observed = _merge_small(expected, observed, min_expected)
    k = expected.size
    dof = k - 3
    if dof < 1:
        raise ValidationError(f"only {k} bins remain after merging; need at least 4")
    stat = float(np.sum((observed - expected) ** 2 / expected))
    return _result("pearson_chi2", stat, float(sps.chi2.sf(stat, dof)), dof=dof, bins=k,
                   bins_requested=n_bins, merged=n_bins - k, fitted_mean=mu, fitted_std=sd)


def jarque_bera(samples) -> TestResult:
    """``JB = n/6 (S^2 + (K - 3)^2 / 4)`` with moment skewness and kurtosis; chi-square(2) p-value."""
    x = _sample(samples, 20, "Jarque-Bera test")
    if not np.ptp(x) > 0:
        raise ValidationError("Jarque-Bera test is undefined for a constant sample")
    s = float(sps.skew(x))
    k = float(sps.kurtosis(x, fisher=False))
    stat = x.size / 6.0 * (s * s + (k - 3.0) ** 2 / 4.0)
    return _result("jarque_bera", stat, float(sps.chi2.sf(stat, 2)), skewness=s, kurtosis=k)


def _cdf_values(x_sorted: np.ndarray, cdf) -> tuple[np.ndarray, int]:
    u = np.asarray(cdf(x_sorted), dtype=float)
    if u.shape != x_sorted.shape or np.any(np.isnan(u)):
        raise NumericalError("cdf must return one finite value per sample")
    clipped = int(np.sum((u < CDF_CLIP) | (u > 1.0 - CDF_CLIP)))
    return np.clip(u, CDF_CLIP, 1.0 - CDF_CLIP), clipped


def kolmogorov_smirnov(samples, cdf, fitted: bool = False) -> TestResult:
    """Kolmogorov-Smirnov distance ``D`` against ``cdf``.

    ``statistic`` is the raw ``D``; ``extra['scaled']`` is ``sqrt(n) D``, the
    form used when comparing against tables of scaled distances. The p-value
    is the asymptotic Kolmogorov tail; it is marked approximate when the
    cdf's parameters were estimated from the same sample.
    """
    x = np.sort(_sample(samples, 1, "Kolmogorov-Smirnov test"))
    n = x.size
    u = np.asarray(cdf(x), dtype=float)
    if u.shape != x.shape or np.any(np.isnan(u)):
        raise NumericalError("cdf must return one finite value per sample")
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    scaled = math.sqrt(n) * d
    return _result("kolmogorov_smirnov", d, float(sps.kstwobign.sf(scaled)), scaled=scaled, n=n,
                   approximate=bool(fitted))


def ad_inf_cdf(z: float) -> float:
    """Limiting distribution function of the Anderson-Darling statistic for a fully specified cdf.

    Uses the two-piece approximation of Marsaglia and Marsaglia (2004),
    accurate to a few units in the sixth decimal.
    """
    if z <= 0:
        return 0.0
    if z < 2.0:
        poly = 2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z
        return math.exp(-1.2337141 / z) / math.sqrt(z) * poly
    inner = 1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z
    return math.exp(-math.exp(inner))


def anderson_darling(samples, cdf, fitted: bool = False) -> TestResult:
    """Anderson-Darling ``A^2`` against ``cdf``.

    Cdf values are clipped to ``[1e-12, 1 - 1e-12]``; the number of clipped
    points is reported. The p-value is the limiting law for a fully
    specified cdf and is flagged approximate when ``fitted`` is true.
    """
    x = np.sort(_sample(samples, 1, "Anderson-Darling test"))
    n = x.size
    u, clipped = _cdf_values(x, cdf)
    i = np.arange(1, n + 1)
    a2 = -n - float(np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1])))) / n
    return _result("anderson_darling", a2, 1.0 - ad_inf_cdf(a2), n=n, clipped=clipped,
                   approximate=bool(fitted))


def engle_arch(residuals, lags: int = 12) -> TestResult:
    """Engle's LM test for ARCH effects.

    Regresses ``e_t^2`` on an intercept and ``e_{t-1}^2 .. e_{t-lags}^2``;
    the statistic is ``n' R^2`` with ``n' = n - lags`` usable rows, compared
    with chi-square(``lags``).
    """
    if lags < 1:
        raise ValidationError("lags must be at least 1")
    e = _sample(residuals, 10 * lags + 1, "Engle ARCH test")
    y2 = e * e
    target = y2[lags:]
    n_eff = target.size
    if not np.ptp(target) > 0:
        return _result("engle_arch", 0.0, 1.0, lags=lags, n_eff=n_eff, r_squared=0.0)
    design = np.column_stack([np.ones(n_eff)] + [y2[lags - k:-k] for k in range(1, lags + 1)])
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise NumericalError(f"ARCH regression is singular (rank {rank} < {design.shape[1]})")
    resid = target - design @ coef
    tss = float(np.sum((target - target.mean()) ** 2))
    r2 = max(0.0, 1.0 - float(resid @ resid) / tss)
    stat = n_eff * r2
    return _result("engle_arch", stat, float(sps.chi2.sf(stat, lags)), lags=lags, n_eff=n_eff, r_squared=r2)


@dataclass(frozen=True)
class HurstResult:
    hurst: float
    intercept: float
    window_sizes: tuple
    rescaled_ranges: tuple

    def as_dict(self) -> dict:
        return {"hurst": self.hurst, "intercept": self.intercept, "method": "rescaled_range",
                "window_sizes": list(self.window_sizes), "rescaled_ranges": list(self.rescaled_ranges)}


def hurst_window_grid(n: int, min_window: int = 16, n_sizes: int = 20, min_windows: int = 4) -> np.ndarray:
    """Log-spaced window sizes from ``min_window`` up to ``n // min_windows``, deduplicated after rounding."""
    top = n // min_windows
    if top < min_window:
        raise ValidationError(f"series of length {n} is too short for windows of at least {min_window}")
    return np.unique(np.floor(np.logspace(math.log10(min_window), math.log10(top), n_sizes)).astype(int))


def hurst_rs(series, min_window: int = 16, n_sizes: int = 20, min_windows: int = 4) -> HurstResult:
    """Rescaled-range Hurst exponent.

    For each window size the series is cut into non-overlapping windows;
    each window contributes ``R / S``, the range of its mean-adjusted
    cumulative sum over its (biased) standard deviation. The largest size
    still fits ``min_windows`` windows, which keeps the top of the grid from
    resting on one or two ranges. ``H`` is the OLS
    slope of ``log mean(R/S)`` on ``log size``. Windows with zero spread are
    skipped.
    """
    x = _sample(series, 256, "Hurst estimate")
    if not np.ptp(x) > 0:
        raise ValidationError("Hurst exponent is undefined for a constant series")
    sizes, rs = [], []
    for s in hurst_window_grid(x.size, min_window, n_sizes, min_windows):
        blocks = x[: (x.size // s) * s].reshape(-1, s)
        dev = blocks - blocks.mean(axis=1, keepdims=True)
        cum = np.cumsum(dev, axis=1)
        r = cum.max(axis=1) - cum.min(axis=1)
        sd = dev.std(axis=1)
        ok = sd > 0
        if np.any(ok):
            sizes.append(int(s))
            rs.append(float(np.mean(r[ok] / sd[ok])))
    if len(sizes) < 2:
        raise NumericalError("too few usable window sizes for a Hurst regression")
    slope, intercept = np.polyfit(np.log(sizes), np.log(rs), 1)
    return HurstResult(float(slope), float(intercept), tuple(sizes), tuple(rs))


__all__ = [
    "ALPHAS", "HurstResult", "TestResult", "ad_inf_cdf", "anderson_darling", "engle_arch", "hurst_rs",
    "hurst_window_grid", "jarque_bera", "kolmogorov_smirnov", "pearson_chi2_normal",
]

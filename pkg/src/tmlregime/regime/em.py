"""EM calibration of the two-regime model, plus regime labelling and residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..errors import NumericalError, RegimeCollapseError, ValidationError
from ..ghdist import GHParams, logpdf, moments
from .filtering import FilterOutput, forward, kim_smooth, update_transitions
from .model import (LEVEL_FLOOR, RegimeModel, TransitionMatrix, base_log_density, effective_level,
                    shifted_log_density)


@dataclass(frozen=True)
class EMConfig:
    tol: float = 1e-6
    max_iter: int = 500
    level_floor: float = LEVEL_FLOOR
    level_policy: str = "floor"
    monotone_slack: float = 1e-8
    n_starts: int = 1
    jitter: float = 0.25
    seed: int = 0
    shifted_innovation: GHParams | None = None
    # "estimate": stationary law on the first pass, then the smoothed first-day
    # posterior (keeps EM monotone); "stationary": stationary law of the current P
    initial_probs: str = "estimate"


@dataclass
class EMResult:
    model: RegimeModel
    trace: list
    converged: bool
    iterations: int
    filter_output: FilterOutput | None = None
    n_floored: int = 0
    init_probs: np.ndarray | None = None
    start_index: int = 0
    starts_tried: int = 1
    start_errors: list = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return self.trace[-1]["loglik"]

    @property
    def smoothed(self) -> np.ndarray:
        return self.filter_output.smoothed


def _values(series) -> np.ndarray:
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("regime calibration needs a series of length >= 2")
    if not np.all(np.isfinite(x)):
        raise ValidationError("regime calibration needs a complete, finite series")
    return x


class StandardizedShock:
    """Zero-mean, unit-variance version of a GH-family law, used as a shifted-regime shock."""

    def __init__(self, params: GHParams):
        self.params = params
        self.mean, var = moments(params)
        self.sd = math.sqrt(var)

    def logpdf(self, e):
        return math.log(self.sd) + logpdf(self.params, self.mean + self.sd * np.asarray(e, dtype=float))


def _shifted_logdens(mu_l, sigma_l, x_prev, x_now, shock: StandardizedShock | None):
    if shock is None:
        return shifted_log_density(mu_l, sigma_l, x_prev, x_now)
    return shock.logpdf((x_now - x_prev - mu_l) / sigma_l) - math.log(sigma_l)


def log_density_matrix(x, model: RegimeModel, floor: float = LEVEL_FLOOR, policy: str = "floor",
                       shock: StandardizedShock | None = None) -> np.ndarray:
    x_prev, x_now = x[:-1], x[1:]
    return np.column_stack([
        base_log_density(model.kappa, model.sigma_m, x_prev, x_now, floor, policy),
        _shifted_logdens(model.mu_l, model.sigma_l, x_prev, x_now, shock),
    ])


def hamilton_filter(series, model: RegimeModel, init_probs=None, floor: float = LEVEL_FLOOR,
                    policy: str = "floor", shock: StandardizedShock | None = None) -> FilterOutput:
    """Filtered regime probabilities and the log-likelihood of the series.

    ``init_probs`` defaults to the stationary distribution of the transition
    matrix and applies to the first observation.
    """
    x = _values(series)
    init = model.trans.stationary() if init_probs is None else np.asarray(init_probs, dtype=float)
    return forward(log_density_matrix(x, model, floor, policy, shock), model.trans, init)


def e_step(series, model: RegimeModel, init_probs=None, floor: float = LEVEL_FLOOR, policy: str = "floor",
           shock: StandardizedShock | None = None) -> FilterOutput:
    return kim_smooth(hamilton_filter(series, model, init_probs, floor, policy, shock))


def _weights(smoothed, regime: int, n: int) -> np.ndarray:
    sm = np.asarray(smoothed, dtype=float)
    w = sm[:, regime] if sm.ndim == 2 else (sm if regime == 0 else 1.0 - sm)
    if w.size == n:
        w = w[1:]
    if w.size != n - 1:
        raise ValidationError("smoothed probabilities do not match the series length")
    total = w.sum()
    if not total > 0:
        raise RegimeCollapseError(f"regime {regime + 1} has zero posterior weight")
    return w


def m_step_base(series, smoothed, floor: float = LEVEL_FLOOR, policy: str = "floor"):
    """Weighted maximum likelihood update ``(sigma_m, kappa)`` for the base regime.

    Without flooring this is the weighted mean of the relative increments
    ``(x_t - x_{t-1}) / x_{t-1}`` for kappa, and the weighted RMS of the
    standardized residuals for sigma_m. A floored lagged level enters as a
    weighted least squares term, which is still the exact maximizer.
    """
    x = _values(series)
    w = _weights(smoothed, 0, x.size)
    x_prev, x_now = x[:-1], x[1:]
    level = effective_level(x_prev, floor, policy)
    # ratios are formed before squaring so that tiny levels do not underflow
    ratio = x_prev / level
    step = (x_now - x_prev) / level
    denom = np.sum(w * ratio * ratio)
    if not denom > 0:
        raise RegimeCollapseError("base regime has no informative lagged levels")
    kappa = float(np.sum(w * ratio * step) / denom)
    resid = step - kappa * ratio
    sigma = math.sqrt(float(np.sum(w * resid * resid) / np.sum(w)))
    return sigma, kappa


def m_step_shifted(series, smoothed):
    """Weighted mean and RMS of the increments: ``(mu_l, sigma_l)``."""
    x = _values(series)
    w = _weights(smoothed, 1, x.size)
    inc = np.diff(x)
    total = np.sum(w)
    mu = float(np.sum(w * inc) / total)
    sigma = math.sqrt(float(np.sum(w * (inc - mu) ** 2) / total))
    return mu, sigma


def _m_step_shifted_shock(x, smoothed, current: RegimeModel, shock: StandardizedShock):
    w = _weights(smoothed, 1, x.size)
    x_prev, x_now = x[:-1], x[1:]

    def negq(theta):
        mu, log_s = theta
        with np.errstate(all="ignore"):
            v = -np.sum(w * _shifted_logdens(mu, math.exp(log_s), x_prev, x_now, shock))
        return v if np.isfinite(v) else np.inf

    starts = [np.array([current.mu_l, math.log(current.sigma_l)])]
    mu_g, s_g = m_step_shifted(x, smoothed)
    if s_g > 0:
        starts.append(np.array([mu_g, math.log(s_g)]))
    best = min((optimize.minimize(negq, s, method="Nelder-Mead",
                                  options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000}) for s in starts),
               key=lambda r: r.fun)
    if best.fun > negq(starts[0]):
        return current.mu_l, current.sigma_l
    return float(best.x[0]), math.exp(best.x[1])


def m_step(series, fo: FilterOutput, current: RegimeModel, floor: float = LEVEL_FLOOR,
           policy: str = "floor", shock: StandardizedShock | None = None) -> RegimeModel:
    x = _values(series)
    sigma_m, kappa = m_step_base(x, fo.smoothed, floor, policy)
    if shock is None:
        mu_l, sigma_l = m_step_shifted(x, fo.smoothed)
    else:
        mu_l, sigma_l = _m_step_shifted_shock(x, fo.smoothed, current, shock)
    trans = update_transitions(fo, current.trans)
    if not (sigma_m > 0 and sigma_l > 0):
        raise RegimeCollapseError("a regime volatility collapsed to zero", last_model=current)
    return RegimeModel(kappa, sigma_m, mu_l, sigma_l, trans)


def initial_model(series, floor: float = LEVEL_FLOOR) -> RegimeModel:
    """Data-driven starting point: no-intercept AR(1) for the base regime,
    increment mean/std for the shifted regime, sticky symmetric transitions."""
    x = _values(series)
    x_prev, x_now = x[:-1], x[1:]
    slope = float(np.dot(x_prev, x_now) / np.dot(x_prev, x_prev)) if np.any(x_prev) else 1.0
    resid = x_now - slope * x_prev
    level = np.maximum(np.abs(x_prev), floor)
    sigma_m = float(np.sqrt(np.mean(resid**2) / np.mean(level**2)))
    inc = np.diff(x)
    sigma_l = float(inc.std()) or 1.0
    return RegimeModel(slope - 1.0, max(sigma_m, 1e-8), float(inc.mean()), sigma_l,
                       TransitionMatrix.from_stay(0.95, 0.95))


def jittered(model: RegimeModel, rng: np.random.Generator, scale: float) -> RegimeModel:
    f = np.exp(scale * rng.standard_normal(4))
    p11, p22 = np.clip([model.trans.p11, model.trans.p22] + 0.05 * scale * rng.standard_normal(2), 0.5, 0.999)
    return RegimeModel(model.kappa * f[0], model.sigma_m * f[1], model.mu_l + scale * model.sigma_l * math.log(f[2]),
                       model.sigma_l * f[3], TransitionMatrix.from_stay(p11, p22))


def _probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or np.any(p < 0) or not p.sum() > 0:
        raise ValidationError(f"initial regime probabilities must be two non-negative numbers, got {p}")
    return p / p.sum()


def _run(x, init: RegimeModel, config: EMConfig, shock, init_probs=None) -> EMResult:
    model = init
    trace = []
    prev_ll = None
    converged = False
    fo = None
    if config.initial_probs not in ("estimate", "stationary"):
        raise ValidationError(f"unknown initial_probs option {config.initial_probs!r}")
    init_probs = model.trans.stationary() if init_probs is None else _probs(init_probs)
    for it in range(1, config.max_iter + 1):
        if config.initial_probs == "stationary":
            init_probs = model.trans.stationary()
        used_init = init_probs
        fo = e_step(x, model, init_probs, config.level_floor, config.level_policy, shock)
        ll = fo.loglik
        trace.append({"iteration": it, "loglik": ll, "params": model.as_dict()})
        if prev_ll is not None:
            if ll < prev_ll - config.monotone_slack:
                raise NumericalError(
                    f"EM log-likelihood decreased by {prev_ll - ll:.3e} at iteration {it}; "
                    "the M-step is inconsistent with the E-step"
                )
            if abs(ll - prev_ll) < config.tol:
                converged = True
                break
        prev_ll = ll
        init_probs = fo.smoothed[0].copy()
        try:
            model = m_step(x, fo, model, config.level_floor, config.level_policy, shock)
        except RegimeCollapseError as exc:
            exc.last_model = model
            raise
    n_floored = int(np.sum(np.abs(x[:-1]) <= config.level_floor))
    return EMResult(model, trace, converged, len(trace), fo, n_floored, used_init)


def em_calibrate(series, init: RegimeModel | None = None, config: EMConfig | None = None,
                 init_probs=None) -> EMResult:
    """Calibrate the regime model by expectation-maximization.

    Alternates filter/smoother passes with closed-form parameter updates
    until the log-likelihood changes by less than ``config.tol``. With
    ``n_starts > 1`` additional jittered initializations are tried and the
    run with the highest final log-likelihood is returned.

    The first-day regime distribution starts at ``init_probs`` (default: the
    stationary law of the initial transition matrix). With
    ``config.initial_probs == "estimate"`` it is re-estimated each iteration
    as the smoothed first-day posterior, which is its exact maximizer and
    keeps the log-likelihood monotone; ``"stationary"`` ties it to the
    current transition matrix instead.

    Raises
    ------
    RegimeCollapseError
        Every start ended with a regime losing all posterior weight.
    NumericalError
        The log-likelihood decreased (beyond ``monotone_slack``) in a run.
    """
    config = config or EMConfig()
    x = _values(series)
    init = init or initial_model(x, config.level_floor)
    shock = StandardizedShock(config.shifted_innovation) if config.shifted_innovation is not None else None
    rng = np.random.default_rng(config.seed)
    inits = [init] + [jittered(init, rng, config.jitter) for _ in range(config.n_starts - 1)]
    best, errors = None, []
    for k, start in enumerate(inits):
        try:
            res = _run(x, start, config, shock, init_probs)
        except RegimeCollapseError as exc:
            if len(inits) == 1:
                raise
            errors.append(f"start {k}: {exc}")
            continue
        res.start_index = k
        if best is None or res.loglik > best.loglik:
            best = res
    if best is None:
        raise RegimeCollapseError("all EM starts collapsed: " + "; ".join(errors))
    best.starts_tried = len(inits)
    best.start_errors = errors
    return best


def classify_regimes(smoothed, threshold: float = 0.8) -> np.ndarray:
    """Label days ``"extreme"`` where ``P(S_t = 2) > threshold``, else ``"normal"``."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")
    sm = np.asarray(smoothed, dtype=float)
    prob_extreme = sm[:, 1] if sm.ndim == 2 else sm
    return np.where(prob_extreme > threshold, "extreme", "normal")


@dataclass
class RegimeResiduals:
    """Standardized one-step residuals of each regime with their posterior weights.

    ``pooled`` is the unstandardized residual ``x_t - E[x_t | x_{t-1}]``
    with the conditional mean averaged over the smoothed regime
    probabilities.
    """

    base: np.ndarray
    shifted: np.ndarray
    base_weight: np.ndarray
    shifted_weight: np.ndarray
    pooled: np.ndarray

    def classified(self, regime: int, threshold: float = 0.5) -> np.ndarray:
        eps, w = (self.base, self.base_weight) if regime == 1 else (self.shifted, self.shifted_weight)
        return eps[w > threshold]


def extract_regime_residuals(series, model: RegimeModel, smoothed, floor: float = LEVEL_FLOOR) -> RegimeResiduals:
    x = _values(series)
    sm = np.asarray(smoothed, dtype=float)
    if sm.shape != (x.size, 2):
        raise ValidationError("smoothed probabilities must have shape (len(series), 2)")
    x_prev, x_now = x[:-1], x[1:]
    level = effective_level(x_prev, floor, "floor")
    mean_base = (1.0 + model.kappa) * x_prev
    mean_shift = x_prev + model.mu_l
    eps_m = (x_now - mean_base) / (model.sigma_m * level)
    eps_l = (x_now - mean_shift) / model.sigma_l
    w1, w2 = sm[1:, 0], sm[1:, 1]
    pooled = x_now - (w1 * mean_base + w2 * mean_shift)
    return RegimeResiduals(eps_m, eps_l, w1, w2, pooled)


__all__ = [
    "EMConfig", "EMResult", "RegimeResiduals", "StandardizedShock", "classify_regimes", "e_step",
    "em_calibrate", "extract_regime_residuals", "hamilton_filter", "initial_model", "log_density_matrix",
    "m_step", "m_step_base", "m_step_shifted",
]

"""Maximum likelihood fitting of the GH family by multi-start simplex search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..errors import ConvergenceError, ValidationError
from .density import FAMILIES, GHParams, logpdf, moments


@dataclass(frozen=True)
class FitOptions:
    n_starts: int = 8
    maxiter: int = 3000
    xatol: float = 1e-7
    fatol: float = 1e-9
    polish_rounds: int = 4


@dataclass(frozen=True)
class FitResult:
    params: GHParams
    loglik: float
    iterations: int
    converged: bool
    start_points_used: int
    n: int = 0
    start_logliks: list = field(default_factory=list, compare=False)

    def as_dict(self) -> dict:
        return {"params": self.params.as_dict(), "loglik": self.loglik, "iterations": self.iterations,
                "converged": self.converged, "start_points_used": self.start_points_used, "n": self.n}


def loglik(p: GHParams, x) -> float:
    with np.errstate(all="ignore"):
        return float(np.sum(logpdf(p, x)))


# Unconstrained coordinates: alpha = exp(a), beta = alpha tanh(b), delta = exp(d),
# plus nu (GH) or log nu (VG).
def _unpack(theta, family: str) -> GHParams:
    if family == "VG":
        a, b, mu, n = theta
        alpha = math.exp(a)
        return GHParams.vg(math.exp(n), alpha, alpha * math.tanh(b), mu)
    if family == "GH":
        a, b, mu, d, nu = theta
    else:
        a, b, mu, d = theta
    alpha = math.exp(a)
    beta = alpha * math.tanh(b)
    delta = math.exp(d)
    if family == "NIG":
        return GHParams.nig(alpha, beta, mu, delta)
    if family == "HYP":
        return GHParams.hyp(alpha, beta, mu, delta)
    return GHParams.gh(nu, alpha, beta, mu, delta)


def _pack(p: GHParams) -> np.ndarray:
    a = math.log(p.alpha)
    b = math.atanh(p.beta / p.alpha)
    if p.family == "VG":
        return np.array([a, b, p.mu, math.log(p.nu)])
    head = [a, b, p.mu, math.log(p.delta)]
    return np.array(head + [p.nu] if p.family == "GH" else head)


def _moment_matched(family: str, nu: float, alpha: float, beta: float) -> GHParams:
    """Member with the given shape whose mean is 0 and variance is 1 (or as close as it gets)."""
    if family == "VG":
        g2 = alpha**2 - beta**2
        nu = 1.0 / (2.0 / g2 + 4.0 * beta**2 / g2**2)
        p = GHParams.vg(nu, alpha, beta, 0.0)
    else:
        def build(log_delta):
            d = math.exp(log_delta)
            if family == "NIG":
                return GHParams.nig(alpha, beta, 0.0, d)
            if family == "HYP":
                return GHParams.hyp(alpha, beta, 0.0, d)
            return GHParams.gh(nu, alpha, beta, 0.0, d)

        res = optimize.minimize_scalar(lambda ld: math.log(moments(build(ld))[1]) ** 2,
                                       bounds=(-8.0, 8.0), method="bounded")
        p = build(res.x)
    mean = moments(p)[0]
    return GHParams(p.family, p.nu, p.alpha, p.beta, -mean, p.delta)


def _starts(family: str, skew: float, n_starts: int) -> list[GHParams]:
    sign = 1.0 if skew >= 0 else -1.0
    steep = (0.8, 1.5, 3.0, 6.0)
    tilt = (0.0, 0.3 * sign)
    nus = (1.0, -0.5, 2.0, -1.5)
    out = []
    for k in range(n_starts):
        alpha = steep[k % 4] * (1 + k // 8)
        b = tilt[(k // 4) % 2]
        nu = {"NIG": -0.5, "HYP": 1.0, "VG": 1.0}.get(family, nus[k % 4])
        out.append(_moment_matched(family, nu, alpha, alpha * math.tanh(b)))
    return out


def fit_normal(samples) -> FitResult:
    x = np.asarray(samples, dtype=float)
    p = GHParams.normal(float(x.mean()), float(x.std()))
    return FitResult(p, loglik(p, x), 0, True, 0, int(x.size))


def fit_mle(samples, family: str, options: FitOptions | None = None) -> FitResult:
    """Fit ``family`` to ``samples`` by maximum likelihood.

    The data are standardized, each start point is refined by Nelder-Mead
    in unconstrained coordinates, the best start is polished by restarting
    the simplex until the log-likelihood stops improving, and the result is
    mapped back to the original scale.

    Raises
    ------
    ValidationError
        Fewer than 50 samples, non-finite samples or a constant sample.
    ConvergenceError
        No start point produced a finite log-likelihood.
    """
    options = options or FitOptions()
    if family not in FAMILIES:
        raise ValidationError(f"unknown family {family!r}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 50:
        raise ValidationError(f"MLE fitting needs at least 50 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("samples contain non-finite values")
    loc, scale = float(x.mean()), float(x.std())
    if scale == 0.0:
        raise ValidationError("cannot fit a distribution to a constant sample")
    if family == "Normal":
        return fit_normal(x)

    z = (x - loc) / scale
    skew = float(np.mean(z**3))

    def objective(theta):
        try:
            value = -loglik(_unpack(theta, family), z)
        except (ValidationError, OverflowError, ValueError):
            return np.inf
        return value if np.isfinite(value) else np.inf

    nm = {"maxiter": options.maxiter, "xatol": options.xatol, "fatol": options.fatol}
    results = []
    iterations = 0
    for start in _starts(family, skew, options.n_starts):
        res = optimize.minimize(objective, _pack(start), method="Nelder-Mead", options=nm)
        iterations += res.nit
        results.append(res)
    finite = [r for r in results if np.isfinite(r.fun)]
    if not finite:
        raise ConvergenceError(f"{family}: every start point diverged",
                               {"start_values": [float(r.fun) for r in results]})
    best = min(finite, key=lambda r: r.fun)
    converged = bool(best.success)
    for _ in range(options.polish_rounds):
        res = optimize.minimize(objective, best.x, method="Nelder-Mead", options=nm)
        iterations += res.nit
        improved = best.fun - res.fun
        if res.fun <= best.fun:
            best = res
        converged = bool(res.success)
        if improved < options.fatol:
            break
    params = _unpack(best.x, family).affine(scale, loc)
    return FitResult(params, loglik(params, x), iterations, converged, len(results), int(x.size),
                     [-float(r.fun) - x.size * math.log(scale) for r in results])

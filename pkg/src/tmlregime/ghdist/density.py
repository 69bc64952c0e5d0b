"""Generalized hyperbolic family: parameters, densities, cdf, MGF and moments.

Families and their parameter conventions (``mu`` location, ``delta`` scale,
``alpha`` steepness, ``beta`` asymmetry, ``nu`` shape):

=======  =======================  ==============================
family   fixed                    constraints
=======  =======================  ==============================
GH       --                       alpha > |beta|, delta > 0
NIG      nu = -1/2                alpha > |beta|, delta > 0
HYP      nu = 1                   alpha > |beta|, delta > 0
VG       delta = 0                alpha > |beta|, nu > 0
Normal   delta is the std. dev.   delta > 0
=======  =======================  ==============================

The GH density uses ``sqrt(delta**2 + (x - mu)**2)`` inside the Bessel
function; with a minus sign the density would not be real-valued away from
``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, special

from ..errors import NumericalError, ValidationError
from .bessel import log_bessel_k

FAMILIES = ("GH", "NIG", "HYP", "VG", "Normal")
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GHParams:
    family: str
    nu: float
    alpha: float
    beta: float
    mu: float
    delta: float

    def __post_init__(self):
        validate(self)

    @classmethod
    def gh(cls, nu, alpha, beta, mu, delta):
        return cls("GH", float(nu), float(alpha), float(beta), float(mu), float(delta))

    @classmethod
    def nig(cls, alpha, beta, mu, delta):
        return cls("NIG", -0.5, float(alpha), float(beta), float(mu), float(delta))

    @classmethod
    def hyp(cls, alpha, beta, mu, delta):
        return cls("HYP", 1.0, float(alpha), float(beta), float(mu), float(delta))

    @classmethod
    def vg(cls, nu, alpha, beta, mu):
        return cls("VG", float(nu), float(alpha), float(beta), float(mu), 0.0)

    @classmethod
    def normal(cls, mu, sigma):
        return cls("Normal", math.nan, math.nan, 0.0, float(mu), float(sigma))

    @property
    def gamma(self) -> float:
        """sqrt(alpha^2 - beta^2)."""
        return math.sqrt((self.alpha - self.beta) * (self.alpha + self.beta))

    def affine(self, a: float, b: float) -> "GHParams":
        """Law of ``a * X + b`` for ``a > 0``."""
        if not a > 0:
            raise ValidationError("affine map needs a positive scale")
        if self.family == "Normal":
            return replace(self, mu=a * self.mu + b, delta=a * self.delta)
        return replace(self, alpha=self.alpha / a, beta=self.beta / a, mu=a * self.mu + b, delta=a * self.delta)

    def as_dict(self) -> dict:
        return {"family": self.family, "nu": self.nu, "alpha": self.alpha, "beta": self.beta,
                "mu": self.mu, "delta": self.delta}

    @classmethod
    def from_dict(cls, d: dict) -> "GHParams":
        def f(key):
            v = d.get(key)
            return math.nan if v is None else float(v)
        return cls(d["family"], f("nu"), f("alpha"), f("beta"), f("mu"), f("delta"))


def validate(p: GHParams) -> None:
    if p.family not in FAMILIES:
        raise ValidationError(f"unknown family {p.family!r}; expected one of {FAMILIES}")
    if not math.isfinite(p.mu):
        raise ValidationError("mu must be finite")
    if p.family == "Normal":
        if not (math.isfinite(p.delta) and p.delta > 0):
            raise ValidationError("Normal family needs a positive standard deviation (delta)")
        return
    if not (math.isfinite(p.alpha) and p.alpha > 0):
        raise ValidationError(f"{p.family}: alpha must be positive, got {p.alpha}")
    if not (math.isfinite(p.beta) and abs(p.beta) < p.alpha):
        raise ValidationError(f"{p.family}: need |beta| < alpha, got alpha={p.alpha}, beta={p.beta}")
    if not math.isfinite(p.nu):
        raise ValidationError(f"{p.family}: nu must be finite")
    if p.family == "VG":
        if p.delta != 0.0:
            raise ValidationError("VG: delta must be 0")
        if not p.nu > 0:
            raise ValidationError(f"VG: nu must be positive, got {p.nu}")
        return
    if not (math.isfinite(p.delta) and p.delta > 0):
        raise ValidationError(f"{p.family}: delta must be positive, got {p.delta}")
    if p.family == "NIG" and p.nu != -0.5:
        raise ValidationError("NIG: nu is fixed at -1/2")
    if p.family == "HYP" and p.nu != 1.0:
        raise ValidationError("HYP: nu is fixed at 1")


def logpdf(p: GHParams, x):
    x = np.asarray(x, dtype=float)
    r = x - p.mu
    if p.family == "Normal":
        out = -0.5 * LOG_2PI - math.log(p.delta) - 0.5 * (r / p.delta) ** 2
    elif p.family == "NIG":
        q = np.hypot(p.delta, r)
        out = (math.log(p.alpha * p.delta / math.pi) + p.delta * p.gamma + p.beta * r
               + log_bessel_k(1.0, p.alpha * q) - np.log(q))
    elif p.family == "HYP":
        g = p.gamma
        out = (math.log(g / (2.0 * p.alpha * p.delta)) - float(log_bessel_k(1.0, p.delta * g))
               - p.alpha * np.hypot(p.delta, r) + p.beta * r)
    elif p.family == "GH":
        g, nu = p.gamma, p.nu
        q = np.hypot(p.delta, r)
        log_norm = (nu * math.log(g) - 0.5 * LOG_2PI - (nu - 0.5) * math.log(p.alpha)
                    - nu * math.log(p.delta) - float(log_bessel_k(nu, p.delta * g)))
        out = log_norm + (nu - 0.5) * np.log(q) + p.beta * r + log_bessel_k(nu - 0.5, p.alpha * q)
    else:
        out = _vg_logpdf(p, r)
    return out[()] if np.ndim(out) == 0 else out


def _vg_logpdf(p: GHParams, r: np.ndarray) -> np.ndarray:
    lam = p.nu - 0.5
    log_norm = (2.0 * p.nu * math.log(p.gamma) - 0.5 * math.log(math.pi) - special.gammaln(p.nu)
                - lam * math.log(2.0 * p.alpha))
    shape = np.shape(r)
    r = np.atleast_1d(r)
    a = np.abs(r)
    out = np.empty_like(a)
    pos = a > 0
    out[pos] = log_norm + lam * np.log(a[pos]) + log_bessel_k(lam, p.alpha * a[pos]) + p.beta * r[pos]
    if lam > 0:
        # |r|^lam K_lam(alpha |r|) -> Gamma(lam) 2^(lam - 1) alpha^(-lam)
        out[~pos] = log_norm + special.gammaln(lam) + (lam - 1.0) * math.log(2.0) - lam * math.log(p.alpha)
    else:
        out[~pos] = np.inf
    return out.reshape(shape)


def pdf(p: GHParams, x):
    with np.errstate(over="ignore"):
        return np.exp(logpdf(p, x))


def moments(p: GHParams) -> tuple[float, float]:
    """Mean and variance of the distribution."""
    if p.family == "Normal":
        return p.mu, p.delta**2
    g = p.gamma
    if p.family == "VG":
        ew = 2.0 * p.nu / g**2
        vw = 4.0 * p.nu / g**4
    else:
        # mixing moments E[W^k] = (delta/gamma)^k K_{nu+k}(zeta) / K_nu(zeta), in logs so
        # that tiny zeta (near the VG boundary) neither overflows nor underflows
        zeta = p.delta * g
        log_scale = math.log(p.delta) - math.log(g)
        lk = float(log_bessel_k(p.nu, zeta))
        ew = math.exp(log_scale + float(log_bessel_k(p.nu + 1.0, zeta)) - lk)
        ew2 = math.exp(2.0 * log_scale + float(log_bessel_k(p.nu + 2.0, zeta)) - lk)
        vw = max(ew2 - ew**2, 0.0)
    return p.mu + p.beta * ew, ew + p.beta**2 * vw


def log_mgf(p: GHParams, z):
    z = np.asarray(z, dtype=float)
    if p.family == "Normal":
        out = p.mu * z + 0.5 * (p.delta * z) ** 2
        return out[()] if out.ndim == 0 else out
    shifted = p.beta + z
    if np.any(np.abs(shifted) >= p.alpha):
        raise ValidationError(
            f"MGF of {p.family} is finite only for |beta + z| < alpha, i.e. "
            f"{-p.alpha - p.beta:.6g} < z < {p.alpha - p.beta:.6g}"
        )
    g = p.gamma
    gz = np.sqrt((p.alpha - shifted) * (p.alpha + shifted))
    if p.family == "NIG":
        out = p.mu * z + p.delta * (g - gz)
    elif p.family == "VG":
        out = p.mu * z + 2.0 * p.nu * (np.log(g) - np.log(gz))
    else:
        out = (p.mu * z + p.nu * (np.log(g) - np.log(gz))
               + log_bessel_k(p.nu, p.delta * gz) - float(log_bessel_k(p.nu, p.delta * g)))
    return out[()] if np.ndim(out) == 0 else out


def mgf(p: GHParams, z):
    """E[exp(zX)], defined for ``|beta + z| < alpha``."""
    return np.exp(log_mgf(p, z))


# 20-point Gauss-Legendre on [-1, 1] for narrow cdf panels
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _quad(p: GHParams, a: float, b: float, tol: float = 1e-12) -> float:
    val, err = integrate.quad(lambda t: float(pdf(p, t)), a, b, epsabs=tol, epsrel=1e-10, limit=200)
    if not np.isfinite(val) or err > 1e-8:
        raise NumericalError(f"cdf quadrature on [{a}, {b}] reached only {err:.2e} accuracy")
    return val


def cdf(p: GHParams, x):
    """P(X <= x) by quadrature of the density.

    Mass below ``mu`` comes from one adaptive integral over (-inf, mu]; the
    remaining mass is accumulated panel by panel between the sorted
    evaluation points, with fixed Gauss-Legendre on panels that are narrow
    relative to the distribution's scale and adaptive quadrature elsewhere
    (including any panel touching ``mu``, where VG may be singular).
    """
    x = np.asarray(x, dtype=float)
    if p.family == "Normal":
        out = special.ndtr((x - p.mu) / p.delta)
        return out[()] if out.ndim == 0 else out
    flat = x.ravel()
    finite = np.isfinite(flat)
    result = np.where(flat > 0, 1.0, 0.0)
    if finite.any():
        scale = math.sqrt(moments(p)[1])
        pts = flat[finite]
        knots, inverse = np.unique(np.append(pts, p.mu), return_inverse=True)
        i_mu = int(np.searchsorted(knots, p.mu))
        lo, hi = knots[:-1], knots[1:]
        width = hi - lo
        pieces = np.zeros(width.size)
        narrow = (width <= 0.25 * scale) & (lo != p.mu) & (hi != p.mu)
        if narrow.any():
            mid, half = 0.5 * (lo[narrow] + hi[narrow]), 0.5 * width[narrow]
            nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
            pieces[narrow] = half * (pdf(p, nodes) @ _GL_WEIGHTS)
        for k in np.flatnonzero(~narrow):
            pieces[k] = _quad(p, lo[k], hi[k])
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        below_mu = _quad(p, -np.inf, p.mu)
        values = below_mu + cum - cum[i_mu]
        result[finite] = np.clip(values[inverse[:-1]], 0.0, 1.0)
    out = result.reshape(x.shape)
    return out[()] if out.ndim == 0 else out

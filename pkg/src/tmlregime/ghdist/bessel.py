"""Modified Bessel function of the second (third) kind, K_nu(x), for real order.

Values come from the exponentially scaled AMOS routine (``scipy.special.kve``)
so that ``log K`` stays finite far beyond the range where ``K`` itself
underflows. Where even the scaled value overflows (tiny ``x``, large order)
the leading small-argument term is used instead.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from ..errors import ValidationError


def _check_domain(x: np.ndarray) -> None:
    if np.any(~(x > 0)):
        raise ValidationError("K_nu(x) is only defined here for x > 0")


def log_bessel_k(nu, x):
    """Natural log of K_nu(x), computed without forming K_nu(x)."""
    nu = np.abs(np.asarray(nu, dtype=float))
    x = np.asarray(x, dtype=float)
    _check_domain(x)
    if nu.ndim == 0 and nu == 0.5:
        # closed form sqrt(pi / (2x)) e^{-x}
        out = 0.5 * np.log(np.pi / (2.0 * x)) - x
        return out[()] if out.ndim == 0 else out
    nu, x = np.broadcast_arrays(nu, x)
    with np.errstate(divide="ignore", over="ignore"):
        if nu.size and np.all(nu == nu.flat[0]) and nu.flat[0] in (0.0, 1.0):
            # integer orders with dedicated (much faster) scaled routines
            scaled = special.k0e(x) if nu.flat[0] == 0.0 else special.k1e(x)
        else:
            scaled = special.kve(nu, x)
        out = np.asarray(np.log(scaled) - x, dtype=float)
    bad = ~np.isfinite(out)
    if np.any(bad):
        # K_nu(x) ~ Gamma(nu) 2^(nu-1) x^(-nu) as x -> 0 for nu > 0
        nb, xb = nu[bad], x[bad]
        small = special.gammaln(nb) + (nb - 1.0) * np.log(2.0) - nb * np.log(xb)
        out = out.copy()
        out[bad] = np.where(nb > 0, small, np.log(-np.log(xb / 2.0) - np.euler_gamma))
    return out[()] if out.ndim == 0 else out


def bessel_k(nu, x, with_flag: bool = False):
    """K_nu(x) for real ``nu`` and ``x > 0``.

    Results below the smallest double underflow to 0. With ``with_flag`` a
    boolean array marking those entries is returned alongside the values.
    """
    logk = np.asarray(log_bessel_k(nu, x))
    with np.errstate(over="ignore", under="ignore"):
        values = np.exp(logk)
    underflow = (values == 0.0) & np.isfinite(logk)
    values = values[()] if values.ndim == 0 else values
    if with_flag:
        return values, (underflow[()] if underflow.ndim == 0 else underflow)
    return values


def bessel_k_ratio(nu_num, nu_den, x):
    """K_{nu_num}(x) / K_{nu_den}(x), stable for large x."""
    return np.exp(log_bessel_k(nu_num, x) - log_bessel_k(nu_den, x))

"""Exact sampling through the normal variance-mean mixture representation.

``X = mu + beta * W + sqrt(W) * Z`` with ``Z ~ N(0, 1)`` and ``W`` drawn
from a generalized inverse Gaussian law GIG(nu, chi=delta^2, psi=alpha^2 -
beta^2); for VG the mixing law degenerates to Gamma(nu, rate=psi/2) and for
NIG to an inverse Gaussian.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import NumericalError, ValidationError
from .density import GHParams


_GIG_LIMIT_B = 1e-8


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_mixing(p: GHParams, n: int, rng: np.random.Generator) -> np.ndarray:
    psi = p.gamma**2
    if p.family == "VG":
        return rng.gamma(shape=p.nu, scale=2.0 / psi, size=n)
    if p.family == "NIG":
        return rng.wald(mean=p.delta / p.gamma, scale=p.delta**2, size=n)
    chi = p.delta**2
    b = np.sqrt(chi * psi)
    if b < _GIG_LIMIT_B and p.nu != 0.0:
        # GIG(nu, chi, psi) tends to Gamma(nu, rate psi/2) (nu > 0) or to the
        # reciprocal of Gamma(-nu, rate chi/2) (nu < 0) as chi * psi -> 0; the
        # neglected term changes the law by O(b^(2|nu|))
        if p.nu > 0:
            return rng.gamma(shape=p.nu, scale=2.0 / psi, size=n)
        return 1.0 / rng.gamma(shape=-p.nu, scale=2.0 / chi, size=n)
    try:
        return stats.geninvgauss.rvs(p.nu, b, scale=np.sqrt(chi / psi), size=n, random_state=rng)
    except RuntimeError as exc:
        raise NumericalError(f"GIG sampling failed for nu={p.nu}, b={b:.3g}: {exc}") from exc


def sample(p: GHParams, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` variates; identical ``seed`` gives identical output."""
    if n < 1:
        raise ValidationError("sample size must be at least 1")
    rng = _rng(seed)
    if p.family == "Normal":
        return rng.normal(p.mu, p.delta, size=n)
    w = sample_mixing(p, n, rng)
    z = rng.standard_normal(n)
    return p.mu + p.beta * w + np.sqrt(w) * z

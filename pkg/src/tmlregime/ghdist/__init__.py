"""Generalized hyperbolic distributions (GH, NIG, HYP, VG) and the normal."""

from .bessel import bessel_k, log_bessel_k
from .density import FAMILIES, GHParams, cdf, log_mgf, logpdf, mgf, moments, pdf
from .fit import FitOptions, FitResult, fit_mle, fit_normal, loglik
from .sampling import sample

__all__ = [
    "FAMILIES", "FitOptions", "FitResult", "GHParams", "bessel_k", "cdf", "fit_mle", "fit_normal",
    "log_bessel_k", "log_mgf", "logpdf", "loglik", "mgf", "moments", "pdf", "sample",
]

"""Two-regime model parameters and the one-step conditional densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

LEVEL_FLOOR = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic 2x2 matrix, ``p_ij = P(S_t = j | S_{t-1} = i)``."""

    p11: float
    p12: float
    p21: float
    p22: float

    def __post_init__(self):
        for name in ("p11", "p12", "p21", "p22"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"transition probability {name}={v} outside [0, 1]")
        if abs(self.p11 + self.p12 - 1.0) > 1e-15 or abs(self.p21 + self.p22 - 1.0) > 1e-15:
            raise ValidationError("transition matrix rows must sum to 1")

    @classmethod
    def from_stay(cls, p11: float, p22: float) -> "TransitionMatrix":
        p11, p22 = float(p11), float(p22)
        return cls(p11, 1.0 - p11, 1.0 - p22, p22)

    @classmethod
    def from_array(cls, a) -> "TransitionMatrix":
        a = np.asarray(a, dtype=float)
        return cls.from_stay(a[0, 0] / a[0].sum(), a[1, 1] / a[1].sum())

    def as_array(self) -> np.ndarray:
        return np.array([[self.p11, self.p12], [self.p21, self.p22]])

    def stationary(self) -> np.ndarray:
        """Stationary distribution; uniform when the chain never switches."""
        leave = self.p12 + self.p21
        if leave == 0.0:
            return np.array([0.5, 0.5])
        return np.array([self.p21 / leave, self.p12 / leave])

    def swapped(self) -> "TransitionMatrix":
        return TransitionMatrix(self.p22, self.p21, self.p12, self.p11)


@dataclass(frozen=True)
class RegimeModel:
    """Base regime: ``x_t = (1 + kappa) x_{t-1} + sigma_m x_{t-1} e_t``;
    shifted regime: ``x_t = x_{t-1} + mu_l + sigma_l e_t``."""

    kappa: float
    sigma_m: float
    mu_l: float
    sigma_l: float
    trans: TransitionMatrix

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and math.isfinite(self.mu_l)):
            raise ValidationError("kappa and mu_l must be finite")
        if not (self.sigma_m > 0 and math.isfinite(self.sigma_m)):
            raise ValidationError(f"sigma_m must be positive, got {self.sigma_m}")
        if not (self.sigma_l > 0 and math.isfinite(self.sigma_l)):
            raise ValidationError(f"sigma_l must be positive, got {self.sigma_l}")

    def as_dict(self) -> dict:
        return {"sigma_1": self.sigma_m, "kappa": self.kappa, "mu": self.mu_l, "sigma_2": self.sigma_l,
                "P11": self.trans.p11, "P22": self.trans.p22}

    @classmethod
    def from_dict(cls, d: dict) -> "RegimeModel":
        return cls(float(d["kappa"]), float(d["sigma_1"]), float(d["mu"]), float(d["sigma_2"]),
                   TransitionMatrix.from_stay(d["P11"], d["P22"]))


def effective_level(x_prev, floor: float = LEVEL_FLOOR, policy: str = "floor") -> np.ndarray:
    """``|x_prev|`` bounded below by ``floor``; with ``policy='error'`` a small level raises."""
    level = np.abs(np.asarray(x_prev, dtype=float))
    small = level <= floor
    if np.any(small):
        if policy == "error":
            raise ValidationError(
                f"{int(small.sum())} lagged level(s) within {floor:g} of zero make the base regime degenerate"
            )
        if policy != "floor":
            raise ValidationError(f"unknown level policy {policy!r}")
        level = np.maximum(level, floor)
    return level


def base_log_density(kappa, sigma_m, x_prev, x_now, floor: float = LEVEL_FLOOR, policy: str = "floor"):
    x_prev = np.asarray(x_prev, dtype=float)
    sd = sigma_m * effective_level(x_prev, floor, policy)
    z = (np.asarray(x_now, dtype=float) - (1.0 + kappa) * x_prev) / sd
    with np.errstate(over="ignore"):
        out = -_HALF_LOG_2PI - np.log(sd) - 0.5 * z * z
    return out[()] if out.ndim == 0 else out


def base_density(kappa, sigma_m, x_prev, x_now, floor: float = LEVEL_FLOOR, policy: str = "floor"):
    """Gaussian density, mean ``(1 + kappa) x_prev``, std ``sigma_m |x_prev|``."""
    return np.exp(base_log_density(kappa, sigma_m, x_prev, x_now, floor, policy))


def shifted_log_density(mu_l, sigma_l, x_prev, x_now):
    if not sigma_l > 0:
        raise ValidationError("sigma_l must be positive")
    z = (np.asarray(x_now, dtype=float) - np.asarray(x_prev, dtype=float) - mu_l) / sigma_l
    out = -_HALF_LOG_2PI - math.log(sigma_l) - 0.5 * z * z
    return out[()] if np.ndim(out) == 0 else out


def shifted_density(mu_l, sigma_l, x_prev, x_now):
    """Gaussian density, mean ``x_prev + mu_l``, std ``sigma_l``."""
    return np.exp(shifted_log_density(mu_l, sigma_l, x_prev, x_now))

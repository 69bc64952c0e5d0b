"""Monte Carlo paths of the discretized two-regime model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ghdist import GHParams, moments, sample
from .regime import RegimeModel
from .seasonal import SeasonalParams, reseasonalize


@dataclass(frozen=True)
class SimulationSpec:
    model: RegimeModel
    n_days: int
    n_paths: int = 1
    seed: int = 0
    initial_value: float = 0.0
    seasonal: SeasonalParams | None = None
    deseasonalize_mode: str = "full"
    innovation: GHParams | None = None  # None: Gaussian shifted-regime shocks
    standardize_innovation: bool = True
    initial_regime: int | None = None  # 1 or 2; None draws from the stationary law
    start_day: int = 1
    allow_unstable: bool = False

    def __post_init__(self):
        if self.n_days < 1 or self.n_paths < 1:
            raise ValidationError("n_days and n_paths must be at least 1")
        if self.initial_regime not in (None, 1, 2):
            raise ValidationError("initial_regime must be 1, 2 or None")


@dataclass
class SimulationResult:
    t_tilde: np.ndarray  # (n_paths, n_days)
    regimes: np.ndarray  # (n_paths, n_days), values 1 or 2
    temperature: np.ndarray
    spec: SimulationSpec

    def rows(self):
        """``(path_id, day, regime, t_tilde, temperature)`` tuples for CSV export."""
        n_paths, n_days = self.t_tilde.shape
        for i in range(n_paths):
            for d in range(n_days):
                yield (i, self.spec.start_day + d, int(self.regimes[i, d]),
                       float(self.t_tilde[i, d]), float(self.temperature[i, d]))


def _shifted_shocks(spec: SimulationSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.innovation is None:
        return rng.standard_normal(n)
    draws = sample(spec.innovation, n, rng)
    if not spec.standardize_innovation:
        return draws
    mean, var = moments(spec.innovation)
    return (draws - mean) / math.sqrt(var)


def simulate_path(spec: SimulationSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    m = spec.model
    p = m.trans.as_array()
    n = spec.n_days
    u0 = rng.random()
    u = rng.random(n)
    eps_base = rng.standard_normal(n)
    eps_shift = _shifted_shocks(spec, n, rng)
    if spec.initial_regime is None:
        state = 0 if u0 < m.trans.stationary()[0] else 1
    else:
        state = spec.initial_regime - 1
    x = float(spec.initial_value)
    out = np.empty(n)
    regimes = np.empty(n, dtype=np.int8)
    for t in range(n):
        state = 0 if u[t] < p[state, 0] else 1
        if state == 0:
            x = x * (1.0 + m.kappa) + m.sigma_m * x * eps_base[t]
        else:
            x = x + m.mu_l + m.sigma_l * eps_shift[t]
        out[t] = x
        regimes[t] = state + 1
    return out, regimes


def simulate_paths(spec: SimulationSpec) -> SimulationResult:
    """Simulate ``n_paths`` independent paths of ``n_days`` steps.

    Path ``i`` draws from its own child of ``SeedSequence(seed)``, so the
    first ``k`` paths do not depend on ``n_paths``. The deseasonalized paths
    are recomposed with ``spec.seasonal`` when it is given.

    Raises
    ------
    ValidationError
        ``|1 + kappa| >= 1`` (explosive base regime) unless ``allow_unstable``.
    """
    if abs(1.0 + spec.model.kappa) >= 1.0 and not spec.allow_unstable:
        raise ValidationError(
            f"|1 + kappa| = {abs(1.0 + spec.model.kappa):.4g} >= 1 makes the base regime explosive; "
            "pass allow_unstable to simulate anyway"
        )
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_paths)
    t_tilde = np.empty((spec.n_paths, spec.n_days))
    regimes = np.empty((spec.n_paths, spec.n_days), dtype=np.int8)
    for i, child in enumerate(children):
        t_tilde[i], regimes[i] = simulate_path(spec, np.random.default_rng(child))
    if spec.seasonal is not None:
        temperature = reseasonalize(t_tilde, spec.seasonal, spec.deseasonalize_mode, spec.start_day)
    else:
        temperature = t_tilde.copy()
    return SimulationResult(t_tilde, regimes, temperature, spec)

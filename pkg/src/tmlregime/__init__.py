"""Regime-switching daily temperature modelling.

Deseasonalization, EM calibration of a two-regime mean-reverting / Levy
model, generalized hyperbolic residual fits, goodness-of-fit diagnostics and
temperature index (CAT, GDD) computation and simulation.
"""

__version__ = "0.1.0"

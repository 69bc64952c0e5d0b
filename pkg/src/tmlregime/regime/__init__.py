"""Two-regime (mean-reverting / drifting) temperature model and its EM calibration."""

from .em import (EMConfig, EMResult, RegimeResiduals, StandardizedShock, classify_regimes, e_step,
                 em_calibrate, extract_regime_residuals, hamilton_filter, initial_model, m_step,
                 m_step_base, m_step_shifted)
from .filtering import (FilterOutput, expected_transition_counts, forward, joint_smoothed, kim_smooth,
                        update_transitions)
from .model import (LEVEL_FLOOR, RegimeModel, TransitionMatrix, base_density, base_log_density,
                    shifted_density, shifted_log_density)

__all__ = [
    "EMConfig", "EMResult", "FilterOutput", "LEVEL_FLOOR", "RegimeModel", "RegimeResiduals",
    "StandardizedShock", "TransitionMatrix", "base_density", "base_log_density", "classify_regimes",
    "e_step", "em_calibrate", "expected_transition_counts", "extract_regime_residuals", "forward",
    "hamilton_filter", "initial_model", "joint_smoothed", "kim_smooth", "m_step", "m_step_base",
    "m_step_shifted", "shifted_density", "shifted_log_density", "update_transitions",
]

"""Hamilton filter, Kim smoother and the transition-probability update.

Everything runs in log space on a generic ``(N - 1, 2)`` matrix of one-step
log densities, so the recursions know nothing about the regime dynamics.
Row 0 of every probability array is the first observation, which has no
predecessor; its predicted and filtered probabilities are the initial
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, RegimeCollapseError
from .model import TransitionMatrix


@dataclass
class FilterOutput:
    predicted: np.ndarray
    filtered: np.ndarray
    loglik: float
    loglik_terms: np.ndarray
    log_predicted: np.ndarray
    log_filtered: np.ndarray
    trans: TransitionMatrix
    smoothed: np.ndarray | None = None
    log_smoothed: np.ndarray | None = None

    def __len__(self):
        return self.filtered.shape[0]


def _log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def _lse2(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if a == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


def forward(log_dens: np.ndarray, trans: TransitionMatrix, init_probs) -> FilterOutput:
    """Hamilton filter over precomputed one-step log densities.

    ``log_dens[t - 1, i]`` is ``log f(x_t | x_{t-1}, S_t = i)`` for
    ``t = 1 .. N - 1``. Raises :class:`NumericalError` when both regimes give
    zero likelihood at some step.
    """
    log_dens = np.asarray(log_dens, dtype=float)
    n = log_dens.shape[0] + 1
    (l11, l12), (l21, l22) = _log(trans.as_array()).tolist()
    init = np.asarray(init_probs, dtype=float)
    log_pred = np.empty((n, 2))
    log_filt = np.empty((n, 2))
    terms = np.zeros(n)
    log_pred[0] = log_filt[0] = _log(init / init.sum())
    f0, f1 = log_filt[0].tolist()
    dens = log_dens.tolist()
    pred_rows, filt_rows = [], []
    for t in range(1, n):
        p0 = _lse2(f0 + l11, f1 + l21)
        p1 = _lse2(f0 + l12, f1 + l22)
        d0, d1 = dens[t - 1]
        j0, j1 = p0 + d0, p1 + d1
        total = _lse2(j0, j1)
        if not math.isfinite(total):
            raise NumericalError(f"zero total likelihood at observation index {t}")
        terms[t] = total
        f0, f1 = j0 - total, j1 - total
        pred_rows.append((p0, p1))
        filt_rows.append((f0, f1))
    if n > 1:
        log_pred[1:] = pred_rows
        log_filt[1:] = filt_rows
    return FilterOutput(np.exp(log_pred), np.exp(log_filt), float(np.sum(terms)), terms,
                        log_pred, log_filt, trans)


def _safe_diff(a: np.ndarray, b: np.ndarray, where: str) -> np.ndarray:
    """``a - b`` in log space with (-inf) - (-inf) taken as -inf."""
    both = np.isneginf(a) & np.isneginf(b)
    if np.any(np.isneginf(b) & ~np.isneginf(a)):
        raise NumericalError(f"zero predicted probability with positive smoothed mass at {where}")
    with np.errstate(invalid="ignore"):
        out = a - b
    out[both] = -np.inf
    return out


def _ratio(s: float, p: float, t: int) -> float:
    if p == -math.inf:
        if s == -math.inf:
            return -math.inf
        raise NumericalError(f"zero predicted probability with positive smoothed mass at index {t}")
    return s - p


def kim_smooth(fo: FilterOutput, trans: TransitionMatrix | None = None) -> FilterOutput:
    """Backward recursion for ``P(S_t | all data)``; fills ``fo.smoothed`` in place and returns ``fo``."""
    trans = trans or fo.trans
    (l11, l12), (l21, l22) = _log(trans.as_array()).tolist()
    n = len(fo)
    filt = fo.log_filtered.tolist()
    pred = fo.log_predicted.tolist()
    s0, s1 = filt[-1]
    rows = [(s0, s1)]
    for t in range(n - 2, -1, -1):
        r0 = _ratio(s0, pred[t + 1][0], t + 1)
        r1 = _ratio(s1, pred[t + 1][1], t + 1)
        a = filt[t][0] + _lse2(l11 + r0, l12 + r1)
        b = filt[t][1] + _lse2(l21 + r0, l22 + r1)
        norm = _lse2(a, b)
        s0, s1 = a - norm, b - norm
        rows.append((s0, s1))
    log_sm = np.array(rows[::-1])
    fo.log_smoothed = log_sm
    fo.smoothed = np.exp(log_sm)
    return fo


def joint_smoothed(fo: FilterOutput, trans: TransitionMatrix | None = None) -> np.ndarray:
    """``P(S_{t-1} = i, S_t = j | all data)`` as an ``(N - 1, 2, 2)`` array."""
    if fo.log_smoothed is None:
        raise NumericalError("joint probabilities need smoothed output; run kim_smooth first")
    trans = trans or fo.trans
    log_p = _log(trans.as_array())
    ratio = _safe_diff(fo.log_smoothed[1:], fo.log_predicted[1:], "joint step")
    log_joint = fo.log_filtered[:-1, :, None] + log_p[None, :, :] + ratio[:, None, :]
    return np.exp(log_joint)


def expected_transition_counts(fo: FilterOutput, trans: TransitionMatrix | None = None) -> np.ndarray:
    return joint_smoothed(fo, trans).sum(axis=0)


def update_transitions(fo: FilterOutput, trans: TransitionMatrix | None = None) -> TransitionMatrix:
    """Expected transition counts divided by expected visits to the origin regime."""
    counts = expected_transition_counts(fo, trans)
    visits = counts.sum(axis=1)
    if np.any(visits <= 0):
        raise RegimeCollapseError(f"regime {int(np.argmin(visits)) + 1} is never visited; transitions undefined")
    return TransitionMatrix.from_stay(counts[0, 0] / visits[0], counts[1, 1] / visits[1])

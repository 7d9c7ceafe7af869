"""Time-dependent ROC curves and AUC for right-censored data.

Cases at horizon t are subjects with an observed event by t; controls are
subjects still event-free. Censoring before t is handled with fractional
weights from a marker-conditional Kaplan-Meier estimate, so a subject censored
early counts partially as a case and partially as a control.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .coxfit import cumulative_hazard, kernel_values
from .data import Dataset
from .em import FittedModel, e_step

__all__ = [
    "MARKER_MODES",
    "default_marker_bandwidth",
    "compute_marker",
    "conditional_survival",
    "censoring_weights",
    "sensitivity_specificity",
    "RocCurve",
    "roc_curve",
    "auc",
]

MARKER_MODES = ("cox_linear_predictor", "mixture_posterior_lp", "mixture_event_prob")


def default_marker_bandwidth(markers: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 1.06 * sd(markers) * n^(-1/5)."""
    m = np.asarray(markers, dtype=float)
    n = m.size
    s = float(m.std(ddof=1)) if n > 1 else 0.0
    if s <= 0.0:
        return 1.0
    return 1.06 * s * n ** (-0.2)


def compute_marker(model: FittedModel, data: Dataset, mode: str, t: float | None = None) -> np.ndarray:
    """Model-based risk marker per subject; larger values mean higher risk.

    Modes
    -----
    cox_linear_predictor
        beta.x for a single-component model only.
    mixture_posterior_lp
        Responsibility-weighted linear predictor sum_k s_ik beta_k.x_i, with
        responsibilities evaluated on `data`.
    mixture_event_prob
        Model event probability by t: 1 - sum_k pi_k exp(-exp(beta_k.x) Lambda_k(t)).
    """
    if mode not in MARKER_MODES:
        raise ValueError(f"unknown marker mode {mode!r}; expected one of {MARKER_MODES}")
    params = model.params
    if mode == "cox_linear_predictor":
        if params.K != 1:
            raise ValueError("cox_linear_predictor requires a single-component model")
        return data.x @ params.components[0].beta
    if mode == "mixture_posterior_lp":
        S = e_step(data, params)
        lp = np.column_stack([data.x @ comp.beta for comp in params.components])
        return np.sum(S * lp, axis=1)
    if t is None:
        raise ValueError("mixture_event_prob requires an evaluation time")
    surv = np.zeros(data.n)
    for pi_k, comp in zip(params.pi, params.components):
        lam = cumulative_hazard(comp.baseline, float(t))
        with np.errstate(over="ignore"):
            risk = np.exp(data.x @ comp.beta)
        surv += pi_k * np.exp(-np.where(lam > 0, risk * lam, 0.0))
    return 1.0 - surv


class _ConditionalKM:
    """Kernel-weighted Kaplan-Meier survival, one curve per subject's marker.

    The factor at event time s for subject i is
    1 - sum_j K_h(M_j - M_i) I(y_j = s, d_j = 1) / sum_j K_h(M_j - M_i) I(y_j >= s);
    a factor with an empty risk set is skipped with a warning.
    """

    def __init__(self, markers: np.ndarray, data: Dataset, bandwidth: float, kernel: str = "gaussian"):
        m = np.asarray(markers, dtype=float)
        if m.shape != (data.n,):
            raise ValueError("markers must be a 1-d array with one entry per record")
        if not np.all(np.isfinite(m)):
            raise ValueError("markers must be finite")
        if not bandwidth > 0:
            raise ValueError("marker bandwidth must be positive")
        self.times = np.unique(data.y[data.delta == 1])
        with np.errstate(invalid="ignore"):
            u = (m[None, :] - m[:, None]) / bandwidth
        if not np.all(np.isfinite(u)):
            # infinite bandwidth: every weight collapses to K(0)
            u = np.zeros_like(u)
        w = kernel_values(kernel, u)

        order = np.argsort(data.y, kind="stable")
        y_sorted = data.y[order]
        w_sorted = w[:, order]
        # suffix sums give the weighted risk set mass at each event time
        suffix = np.cumsum(w_sorted[:, ::-1], axis=1)[:, ::-1]
        start = np.searchsorted(y_sorted, self.times, side="left")
        den = suffix[:, start]

        ev = data.delta == 1
        ev_pos = np.searchsorted(self.times, data.y[ev])
        num = np.zeros_like(den)
        np.add.at(num.T, ev_pos, w[:, ev].T)

        empty = den <= 0.0
        if np.any(empty):
            warnings.warn("empty weighted risk set; the corresponding factor is skipped", stacklevel=3)
        factors = np.where(empty, 1.0, 1.0 - num / np.where(empty, 1.0, den))
        self.curves = np.cumprod(factors, axis=1)

    def at_time(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        if idx < 0:
            return np.ones(self.curves.shape[0])
        return self.curves[:, idx]

    def at_own_times(self, y: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, y, side="right") - 1
        out = np.ones(self.curves.shape[0])
        has = idx >= 0
        rows = np.nonzero(has)[0]
        out[rows] = self.curves[rows, idx[rows]]
        return out


def conditional_survival(
    markers: np.ndarray,
    data: Dataset,
    t: float,
    bandwidth: float | None = None,
    kernel: str = "gaussian",
) -> np.ndarray:
    """Kernel-conditional Kaplan-Meier survival at time t, one value per subject."""
    h = default_marker_bandwidth(markers) if bandwidth is None else float(bandwidth)
    km = _ConditionalKM(markers, data, h, kernel)
    return km.at_time(float(t))


def censoring_weights(
    markers: np.ndarray,
    data: Dataset,
    t: float,
    bandwidth: float | None = None,
    kernel: str = "gaussian",
) -> np.ndarray:
    """Case weight W_i at horizon t.

    W = 0 for subjects beyond t or censored exactly at t, W = 1 for events by
    t, and W = 1 - S(t|M_i)/S(Y_i|M_i) for subjects censored before t.
    """
    m = np.asarray(markers, dtype=float)
    y = data.y
    delta = data.delta
    t = float(t)
    W = np.zeros(data.n)
    W[(y <= t) & (delta == 1)] = 1.0
    frac = (y < t) & (delta == 0)
    if np.any(frac):
        h = default_marker_bandwidth(m) if bandwidth is None else float(bandwidth)
        km = _ConditionalKM(m, data, h, kernel)
        s_t = km.at_time(t)[frac]
        s_y = km.at_own_times(y)[frac]
        zero = s_y <= 0.0
        if np.any(zero):
            warnings.warn("conditional survival vanished at a censoring time; weight set to 1", stacklevel=2)
        ratio = np.where(zero, 0.0, s_t / np.where(zero, 1.0, s_y))
        W[frac] = np.clip(1.0 - ratio, 0.0, 1.0)
    return W


def sensitivity_specificity(
    markers: np.ndarray, weights: np.ndarray, threshold: float
) -> tuple[float, float]:
    """Weighted sensitivity P(M > c | case) and specificity P(M <= c | control)."""
    m = np.asarray(markers, dtype=float)
    w = np.asarray(weights, dtype=float)
    total_case = float(w.sum())
    total_ctrl = float((1.0 - w).sum())
    if total_case <= 0:
        raise ValueError("no case mass at this horizon: every weight is zero")
    if total_ctrl <= 0:
        raise ValueError("no control mass at this horizon: every weight is one")
    sens = float(np.sum(w * (m > threshold))) / total_case
    spec = float(np.sum((1.0 - w) * (m <= threshold))) / total_ctrl
    return sens, spec


@dataclass(frozen=True)
class RocCurve:
    """ROC polygon at one horizon: descending thresholds with infinite sentinels."""

    thresholds: np.ndarray
    sensitivity: np.ndarray
    one_minus_specificity: np.ndarray


def roc_curve(markers: np.ndarray, weights: np.ndarray) -> RocCurve:
    """Weighted ROC curve over all distinct marker thresholds.

    The first point is (0, 0) at threshold +inf and the last is (1, 1) at
    threshold -inf; both coordinates are nondecreasing along the curve.
    """
    m = np.asarray(markers, dtype=float)
    w = np.asarray(weights, dtype=float)
    if m.shape != w.shape or m.ndim != 1:
        raise ValueError("markers and weights must be matching 1-d arrays")
    total_case = float(w.sum())
    total_ctrl = float((1.0 - w).sum())
    if total_case <= 0:
        raise ValueError("no case mass at this horizon: every weight is zero")
    if total_ctrl <= 0:
        raise ValueError("no control mass at this horizon: every weight is one")
    uniq = np.unique(m)
    thresholds = np.concatenate(([np.inf], uniq[::-1], [-np.inf]))
    desc = np.argsort(-m, kind="stable")
    case_cum = np.concatenate(([0.0], np.cumsum(w[desc])))
    ctrl_cum = np.concatenate(([0.0], np.cumsum((1.0 - w)[desc])))
    m_asc = m[desc][::-1]
    greater = m.size - np.searchsorted(m_asc, thresholds, side="right")
    sens = case_cum[greater] / total_case
    one_minus_spec = ctrl_cum[greater] / total_ctrl
    return RocCurve(thresholds=thresholds, sensitivity=sens, one_minus_specificity=one_minus_spec)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC polygon."""
    return float(trapezoid(curve.sensitivity, curve.one_minus_specificity))

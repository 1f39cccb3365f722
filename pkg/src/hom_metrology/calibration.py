"""Calibration of the nuisance parameters (gamma, N, alpha, sigma).

Loss and pair number come from a window far outside the dip; visibility
from the deepest point of a partial dip scan; the width from a straight-line
fit to the scan after each point is mapped through the (sigma-free)
normalised-delay estimator, which turns the Gaussian dip into a vee.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .estimation import INTERIOR, Branch, CoincidenceCounts, mle_normalized
from .fisher import peak_delay_numeric
from .units import AS_PER_FS, AS_PER_PS


class CalibrationError(ValueError):
    """A calibration stage failed; ``stage`` names which one."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ScanRecord:
    tau_ground_truth_as: float
    counts: CoincidenceCounts


@dataclass(frozen=True)
class SigmaFit:
    sigma_ps: float
    fit_residual: float
    intercept: float
    n_used: int
    n_excluded: int


@dataclass(frozen=True)
class CalibrationRecord:
    gamma_hat: float
    n_hat: float
    alpha_hat: float
    sigma_hat_ps: float
    s_star: float
    center_as: float
    dip_center_as: float
    fit_window_fs: float
    fit_residual: float
    n_fit_points: int
    n_excluded: int
    alpha_smoothing: int
    covers_dip_center: bool

    def to_dict(self):
        return asdict(self)


def estimate_gamma(far_counts: CoincidenceCounts) -> float:
    """Loss rate from counts taken far outside the dip, clipped to [0, 1)."""
    denom = far_counts.n1 + 3.0 * far_counts.n2
    if denom == 0:
        raise CalibrationError("gamma", "N1 + 3 N2 = 0; no detections far from the dip")
    g = (far_counts.n1 - far_counts.n2) / denom
    return min(max(g, 0.0), math.nextafter(1.0, 0.0))


def estimate_n(far_counts: CoincidenceCounts, gamma: float) -> float:
    """Incident pairs behind a window of counts: ``(N1 + N2) / (1 - gamma^2)``."""
    if not 0.0 <= gamma < 1.0:
        raise CalibrationError("n", f"gamma must lie in [0, 1), got {gamma}")
    return far_counts.detected / (1.0 - gamma * gamma)


def _sorted(scan):
    return sorted(scan, key=lambda r: r.tau_ground_truth_as)


def smoothed_n2(scan, window: int = 1) -> np.ndarray:
    """Centred moving average of N2 along the scan (sorted by delay).

    The window shrinks at the scan ends so every point keeps a value.
    """
    n2 = np.array([r.counts.n2 for r in _sorted(scan)], dtype=float)
    if window <= 1:
        return n2
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(n2)])
    idx = np.arange(len(n2))
    lo = np.clip(idx - half, 0, len(n2))
    hi = np.clip(idx + half + 1, 0, len(n2))
    return (csum[hi] - csum[lo]) / (hi - lo)


def estimate_alpha(scan, n: float, gamma: float, smoothing: int = 1) -> float:
    """Visibility from the minimum coincidence count across a dip scan.

    ``smoothing > 1`` takes the minimum of a moving average of N2 instead of
    the raw minimum, trading a small upward bias in the minimum for
    robustness to count noise.
    """
    if not scan:
        raise CalibrationError("alpha", "empty scan")
    if not n > 0:
        raise CalibrationError("alpha", f"pair number must be positive, got {n}")
    n2_min = float(smoothed_n2(scan, smoothing).min())
    a = 1.0 - 2.0 * n2_min / (n * (gamma - 1.0) ** 2)
    return min(max(a, 0.0), 1.0)


def straightened_dip(scan, alpha, gamma, s_max=10.0):
    """Map each record to ``(tau, |s|)`` and return (tau, s, interior mask)."""
    rec = _sorted(scan)
    tau = np.array([r.tau_ground_truth_as for r in rec], dtype=float)
    n1 = np.array([r.counts.n1 for r in rec], dtype=float)
    n2 = np.array([r.counts.n2 for r in rec], dtype=float)
    s, code = mle_normalized(n1, n2, alpha, gamma, s_max)
    return tau, s, code == INTERIOR


MIN_FIT_POINTS = 5


def _line_fit(tau, s):
    design = np.column_stack([np.ones_like(tau), tau])
    coef, *_ = np.linalg.lstsq(design, s, rcond=None)
    resid = s - design @ coef
    return coef[0], coef[1], float(np.sqrt(np.mean(resid ** 2)))


def estimate_sigma(scan, alpha: float, gamma: float, window_fs: float = 7.0,
                   center_as: float = 0.0, branch: Branch = Branch.POSITIVE,
                   s_max: float = 10.0, apex_as: float | None = None) -> SigmaFit:
    """Dip width from a linear fit of the straightened dip.

    Points within ``window_fs / 2`` of ``center_as`` are mapped to signed
    normalised delays (on ``branch``) and regressed on the stage delay by
    ordinary least squares; ``sigma`` is the inverse slope. Clamped points
    are excluded and counted. ``fit_residual`` is the RMS residual in ``s``.
    When ``apex_as`` (the dip centre) is given, points on the far side of it
    belong to the other branch of the vee and are left out of the window.
    """
    tau, s, interior = straightened_dip(scan, alpha, gamma, s_max)
    in_window = np.abs(tau - center_as) <= 0.5 * window_fs * AS_PER_FS
    if apex_as is not None:
        in_window &= branch.sign * (tau - apex_as) >= 0.0
    use = in_window & interior
    n_excluded = int((in_window & ~interior).sum())
    if use.sum() < MIN_FIT_POINTS:
        raise CalibrationError(
            "sigma", f"only {int(use.sum())} usable points in the fit window (need {MIN_FIT_POINTS})")
    intercept, slope, resid = _line_fit(tau[use], branch.sign * s[use])
    if slope * branch.sign <= 0:
        raise CalibrationError("sigma", "fitted slope has the wrong sign for the requested branch")
    return SigmaFit(abs(1.0 / slope) / AS_PER_PS, resid, intercept, int(use.sum()), n_excluded)


def _provisional_sigma(tau, s, interior, dip_center_as):
    """Width from a broad fit of the positive flank, used to place the window."""
    use = interior & (tau > dip_center_as) & (s > 0.2) & (s < 1.2)
    if use.sum() < MIN_FIT_POINTS:
        raise CalibrationError("sigma", "too few scan points on the positive flank of the dip")
    intercept, slope, _ = _line_fit(tau[use], s[use])
    if slope <= 0:
        raise CalibrationError("sigma", "positive flank does not rise")
    return intercept, slope


def calibrate(far_counts: CoincidenceCounts, scan, window_fs: float = 7.0,
              alpha_smoothing: int = 5, s_max: float = 10.0) -> CalibrationRecord:
    """Run the full calibration chain gamma -> N -> alpha -> s* -> sigma.

    The fit window is centred where the straightened positive flank reaches
    ``s*``: first from a broad provisional fit, then once more from the
    windowed fit itself.
    """
    gamma = estimate_gamma(far_counts)
    n_hat = estimate_n(far_counts, gamma)
    alpha = estimate_alpha(scan, n_hat, gamma, alpha_smoothing)
    if alpha <= 0.0:
        raise CalibrationError("alpha", "no dip visible in the scan")
    s_star = peak_delay_numeric(alpha, gamma)

    ordered = _sorted(scan)
    smooth = smoothed_n2(ordered, alpha_smoothing)
    i_min = int(np.argmin(smooth))
    dip_center = ordered[i_min].tau_ground_truth_as
    covers = 0 < i_min < len(ordered) - 1

    tau, s, interior = straightened_dip(ordered, alpha, gamma, s_max)
    intercept, slope = _provisional_sigma(tau, s, interior, dip_center)
    center = (s_star - intercept) / slope
    fit = estimate_sigma(ordered, alpha, gamma, window_fs, center, Branch.POSITIVE, s_max, dip_center)
    center = (s_star - fit.intercept) * fit.sigma_ps * AS_PER_PS
    fit = estimate_sigma(ordered, alpha, gamma, window_fs, center, Branch.POSITIVE, s_max, dip_center)

    return CalibrationRecord(
        gamma_hat=gamma,
        n_hat=n_hat,
        alpha_hat=alpha,
        sigma_hat_ps=fit.sigma_ps,
        s_star=s_star,
        center_as=float(center),
        dip_center_as=float(dip_center),
        fit_window_fs=window_fs,
        fit_residual=fit.fit_residual,
        n_fit_points=fit.n_used,
        n_excluded=fit.n_excluded,
        alpha_smoothing=alpha_smoothing,
        covers_dip_center=covers,
    )

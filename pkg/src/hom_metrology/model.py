"""Forward statistical model of a lossy Hong-Ou-Mandel interferometer.

For a photon pair at normalised delay ``s = tau / sigma`` the number of
detectors that click is 0, 1 or 2 with probabilities

    P2 = (1 - gamma)^2 (1 - alpha exp(-s^2)) / 2
    P1 = (1 - gamma)^2 ((1 + 3 gamma) / (1 - gamma) + alpha exp(-s^2)) / 2
    P0 = gamma^2

where ``alpha`` is the dip visibility and ``gamma`` the per-photon loss
probability. All functions accept scalars or numpy arrays for ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .units import AS_PER_PS


class ModelDomainError(ValueError):
    """A model parameter or argument is outside its allowed range."""


@dataclass(frozen=True)
class ModelParams:
    """Nuisance parameters of the coincidence model.

    Attributes
    ----------
    alpha : float
        Visibility (maximum indistinguishability), in [0, 1].
    gamma : float
        Per-photon loss probability, in [0, 1).
    sigma_ps : float
        Dip width in picoseconds; each Gaussian temporal mode has standard
        deviation ``sigma / sqrt(8)``.
    """

    alpha: float
    gamma: float
    sigma_ps: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ModelDomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ModelDomainError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.sigma_ps > 0.0 or not np.isfinite(self.sigma_ps):
            raise ModelDomainError(f"sigma_ps must be positive, got {self.sigma_ps}")

    @property
    def sigma_as(self) -> float:
        return self.sigma_ps * AS_PER_PS

    @property
    def bunch_ratio(self) -> float:
        """(1 + 3 gamma) / (1 - gamma), the far-from-dip ratio N1/N2 offset."""
        return (1.0 + 3.0 * self.gamma) / (1.0 - self.gamma)


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Probabilities that 0, 1 or 2 detectors click for one photon pair."""

    p0: np.ndarray | float
    p1: np.ndarray | float
    p2: np.ndarray | float

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.p0, self.p1, self.p2))


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ModelDomainError(f"alpha must lie in [0, 1], got {alpha}")


def dip_depth_term(s, alpha):
    """Return ``1 - alpha * exp(-s^2)`` without cancellation near ``s = 0``."""
    s = np.asarray(s, dtype=float)
    # (1 - alpha) - alpha * expm1(-s^2) keeps relative accuracy as alpha -> 1
    out = (1.0 - alpha) - alpha * np.expm1(-s * s)
    return out if out.ndim else float(out)


def coincidence_probability_lossless(s, alpha):
    """Coincidence probability ``(1 - alpha exp(-s^2)) / 2`` with no loss."""
    _check_alpha(alpha)
    return 0.5 * dip_depth_term(s, alpha)


def outcome_probabilities(s, params: ModelParams) -> OutcomeProbabilities:
    """Outcome probabilities (P0, P1, P2) at normalised delay ``s``.

    P1 is taken as the complement of P0 and P2 (P0 + P1 + P2 = 1 by
    construction); it equals the closed form to rounding.
    """
    gamma = params.gamma
    k = (1.0 - gamma) ** 2
    p2 = 0.5 * k * np.asarray(dip_depth_term(s, params.alpha))
    p0 = gamma * gamma
    p1 = (1.0 - p0) - p2
    if p2.ndim == 0:
        return OutcomeProbabilities(p0, float(p1), float(p2))
    return OutcomeProbabilities(np.full_like(p2, p0), p1, p2)


def expected_counts(s, params: ModelParams, n_pairs):
    """Expected (N1, N2) for ``n_pairs`` incident pairs (noiseless counts)."""
    probs = outcome_probabilities(s, params)
    return n_pairs * probs.p1, n_pairs * probs.p2


def normalized_delay_from_time(tau_as, sigma_ps):
    """Convert a delay in attoseconds to ``s = tau / sigma``."""
    if not sigma_ps > 0:
        raise ModelDomainError(f"sigma_ps must be positive, got {sigma_ps}")
    return np.asarray(tau_as, dtype=float) / (sigma_ps * AS_PER_PS) if np.ndim(tau_as) else tau_as / (sigma_ps * AS_PER_PS)


def time_from_normalized_delay(s, sigma_ps):
    """Inverse of :func:`normalized_delay_from_time`, result in attoseconds."""
    if not sigma_ps > 0:
        raise ModelDomainError(f"sigma_ps must be positive, got {sigma_ps}")
    return np.asarray(s, dtype=float) * (sigma_ps * AS_PER_PS) if np.ndim(s) else s * (sigma_ps * AS_PER_PS)

"""Delay estimation from coincidence counts.

The maximum-likelihood condition ``N1 P2 = N2 P1`` inverts in closed form to

    s = sqrt(ln(alpha (N1 + N2) / D)),    D = N1 - N2 (1 + 3 gamma) / (1 - gamma).

A uniform prior on ``[-s_max, s_max]`` turns this into a MAP estimator that
returns ``s_max`` when ``D <= 0``. When ``0 < alpha (N1 + N2) / D <= 1`` the
observed dip is deeper than the model can produce and the estimate sits at
``s = 0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .fisher import _fisher_s
from .model import ModelParams
from .rng import stream
from .units import AS_PER_PS


class InvalidCountsError(ValueError):
    pass


class ClampedEstimateError(ValueError):
    def __init__(self, sides):
        super().__init__(f"clamped estimate(s) cannot enter a differential: {', '.join(sides)}")
        self.sides = tuple(sides)


class Branch(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def sign(self) -> float:
        return 1.0 if self is Branch.POSITIVE else -1.0


class Status(str, enum.Enum):
    INTERIOR = "interior"
    CLAMPED_AT_SMAX = "clamped_at_smax"
    CLAMPED_AT_ZERO = "clamped_at_zero"


# integer codes used by the vectorised path
INTERIOR, CLAMPED_AT_SMAX, CLAMPED_AT_ZERO = 0, 1, 2
STATUS_BY_CODE = (Status.INTERIOR, Status.CLAMPED_AT_SMAX, Status.CLAMPED_AT_ZERO)


@dataclass(frozen=True)
class CoincidenceCounts:
    """Observed tallies for one integration window.

    Counts may be real-valued so that noiseless expected counts can be fed
    through the same estimators.
    """

    n1: float
    n2: float

    def __post_init__(self):
        for name in ("n1", "n2"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidCountsError(f"{name} must be a finite non-negative count, got {v}")

    @property
    def detected(self):
        return self.n1 + self.n2


@dataclass(frozen=True)
class EstimatorConfig:
    s_max: float = 10.0

    def __post_init__(self):
        if not self.s_max > 0:
            raise ValueError(f"s_max must be positive, got {self.s_max}")


@dataclass(frozen=True)
class DelayEstimate:
    s_hat: float
    tau_hat_as: float
    variance_as2: float
    branch: Branch
    status: Status

    @property
    def is_interior(self) -> bool:
        return self.status is Status.INTERIOR


def mle_normalized(n1, n2, alpha, gamma, s_max=10.0):
    """Vectorised MAP estimate of ``|s|`` and integer status codes.

    ``n1 + n2`` must be positive wherever an estimate is wanted; windows
    with no detections are returned clamped at ``s_max``.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    d = n1 - n2 * ((1.0 + 3.0 * gamma) / (1.0 - gamma))
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = alpha * (n1 + n2) / d
    positive = d > 0.0
    interior = positive & (arg > 1.0)
    s_hat = np.where(interior, np.sqrt(np.log(np.where(interior, arg, 1.0))), 0.0)
    s_hat = np.where(positive, s_hat, s_max)
    status = np.where(interior, INTERIOR, np.where(positive, CLAMPED_AT_ZERO, CLAMPED_AT_SMAX))
    return s_hat, status


def crb_variance(s, params: ModelParams, n_pairs) -> float:
    """Cramer-Rao variance ``1 / (N F_tau(s))`` in as^2.

    Returns ``inf`` where the Fisher information vanishes (the dip bottom
    for ``alpha < 1``, or far outside the dip where it underflows).
    """
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    f_s = _fisher_s(s, params.alpha, params.gamma)
    f_tau_as = f_s / params.sigma_as ** 2
    with np.errstate(divide="ignore"):
        out = np.where(f_tau_as > 0.0, 1.0 / (n_pairs * np.where(f_tau_as > 0, f_tau_as, 1.0)), np.inf)
    # alpha = 1, s = 0: F is undefined but its limit is finite and maximal
    out = np.where(np.isnan(f_s), params.sigma_as ** 2 / (2.0 * n_pairs), out)
    return out if out.ndim else float(out)


def mle_estimate(counts: CoincidenceCounts, params: ModelParams,
                 config: EstimatorConfig = EstimatorConfig(),
                 branch: Branch = Branch.POSITIVE, n_pairs=None) -> DelayEstimate:
    """Estimate the delay from one window of counts.

    ``n_pairs`` (incident pairs) sets the plug-in CRB variance; when omitted
    it is inferred as ``(N1 + N2) / (1 - gamma^2)``.
    """
    if counts.detected <= 0:
        raise InvalidCountsError("need at least one detection (n1 + n2 >= 1)")
    if params.alpha == 0.0:
        raise ValueError("alpha = 0 leaves the delay unidentifiable")
    s_abs, code = mle_normalized(counts.n1, counts.n2, params.alpha, params.gamma, config.s_max)
    s_hat = branch.sign * float(s_abs)
    if n_pairs is None:
        n_pairs = counts.detected / (1.0 - params.gamma ** 2)
    variance = crb_variance(s_hat, params, max(n_pairs, 1.0))
    return DelayEstimate(
        s_hat=s_hat,
        tau_hat_as=s_hat * params.sigma_as,
        variance_as2=variance,
        branch=branch,
        status=STATUS_BY_CODE[int(code)],
    )


def differential_estimate(in_est: DelayEstimate, out_est: DelayEstimate):
    """``(tau_in - tau_out, var_in + var_out)`` for two interior estimates."""
    clamped = [side for side, e in (("in", in_est), ("out", out_est)) if not e.is_interior]
    if clamped:
        raise ClampedEstimateError(clamped)
    return in_est.tau_hat_as - out_est.tau_hat_as, in_est.variance_as2 + out_est.variance_as2


def pooled_precision(per_window_variance_as2, m_windows) -> float:
    """Standard error of the mean of ``m_windows`` independent estimates."""
    if m_windows < 1:
        raise ValueError(f"m_windows must be >= 1, got {m_windows}")
    return math.sqrt(per_window_variance_as2 / m_windows)


@dataclass(frozen=True)
class BiasReport:
    bias_as: float
    stderr_as: float
    clamp_rate: float
    trials: int
    interior_trials: int


def bias_diagnostic(true_s, params: ModelParams, n_pairs: int, trials: int, seed: int,
                    config: EstimatorConfig = EstimatorConfig()) -> BiasReport:
    """Monte Carlo bias of the delay estimator at a fixed true delay.

    Each trial draws one window from its own seeded stream. Clamped
    estimates are left out of the mean and reported as a clamp rate.
    """
    from .bench import sample_counts_many

    if trials < 100:
        raise ValueError("bias_diagnostic needs at least 100 trials")
    n1, n2 = sample_counts_many(np.full(trials, float(true_s)), params, n_pairs,
                                [stream(seed, 2, t) for t in range(trials)])
    s_abs, code = mle_normalized(n1, n2, params.alpha, params.gamma, config.s_max)
    sign = 1.0 if true_s >= 0 else -1.0
    ok = code == INTERIOR
    err_as = (sign * s_abs[ok] - true_s) * params.sigma_as
    m = int(ok.sum())
    bias = float(err_as.mean()) if m else math.nan
    stderr = float(err_as.std(ddof=1) / math.sqrt(m)) if m > 1 else math.nan
    return BiasReport(bias, stderr, 1.0 - m / trials, trials, m)


def tau_from_s(s_hat, params: ModelParams):
    return s_hat * params.sigma_ps * AS_PER_PS

"""Fisher information of the lossy HOM model and the optimal operating point.

The per-pair information about the normalised delay is the three-outcome sum

    F_s = sum_i (dP_i/ds)^2 / P_i
        = (dP2/ds)^2 (1 - gamma^2) / (P1 P2),

since dP0/ds = 0 and dP1/ds = -dP2/ds. Information about ``tau`` in ps^-2 is
``F_s / sigma^2``. For ``gamma = 0`` this reduces to
``4 alpha^2 s^2 / (exp(2 s^2) - alpha^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams, dip_depth_term, outcome_probabilities
from .special import lambert_w_principal
from .units import AS_PER_PS

PEAK_BRACKET = (1e-6, 3.0)
PEAK_XTOL = 1e-12


class FisherUndefinedError(ValueError):
    """Fisher information requested where the model makes it undefined.

    This happens only at ``alpha = 1, s = 0`` where P2 vanishes (the open
    circle of a perfect-visibility dip).
    """


class PeakSearchError(RuntimeError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


def _fisher_s(s, alpha, gamma):
    """Vectorised F_s with NaN at undefined points."""
    s = np.asarray(s, dtype=float)
    k = (1.0 - gamma) ** 2
    x = np.asarray(dip_depth_term(s, alpha))
    p2 = 0.5 * k * x
    p1 = (1.0 - gamma * gamma) - p2
    dp2 = k * alpha * s * np.exp(-s * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = dp2 * dp2 * (1.0 - gamma * gamma) / (p1 * p2)
    out = np.where(p2 > 0.0, out, np.nan)
    return out


def fisher_information_s(s, params: ModelParams):
    """Per-pair Fisher information about the dimensionless delay ``s``.

    Raises
    ------
    FisherUndefinedError
        If any requested point is the undefined point (``alpha = 1, s = 0``).
    """
    out = _fisher_s(s, params.alpha, params.gamma)
    if np.any(np.isnan(out)):
        raise FisherUndefinedError("Fisher information is undefined at alpha=1, s=0")
    return out if out.ndim else float(out)


def fisher_information(s, params: ModelParams):
    """Per-pair Fisher information about ``tau``, in ps^-2."""
    return fisher_information_s(s, params) / params.sigma_ps ** 2


def fisher_information_sum(s, params: ModelParams, ds=1e-6):
    """Three-outcome sum evaluated with central differences.

    Reference path for checking :func:`fisher_information_s`; it shares only
    :func:`~hom_metrology.model.outcome_probabilities` with the closed form.
    """
    s = np.asarray(s, dtype=float)
    here = outcome_probabilities(s, params).as_array()
    up = outcome_probabilities(s + ds, params).as_array()
    down = outcome_probabilities(s - ds, params).as_array()
    deriv = (up - down) / (2.0 * ds)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(here > 0, deriv * deriv / here, 0.0)
    out = terms.sum(axis=0)
    return out if out.ndim else float(out)


def _log_fisher_slope(s, alpha, gamma):
    """d/ds log F_s, written to avoid cancellation between 2/s and P2'/P2."""
    u = s * s
    e = math.exp(-u)
    k = (1.0 - gamma) ** 2
    x = (1.0 - alpha) - alpha * math.expm1(-u)
    # 1 - exp(-u) (1 + u), by series when u is small
    if u < 1e-3:
        q = u * u * (0.5 - u / 3.0 + u * u / 8.0 - u ** 3 / 30.0)
    else:
        q = -math.expm1(-u) - u * e
    y = (1.0 - alpha) + alpha * q  # x - alpha s^2 e
    p1 = (1.0 - gamma * gamma) - 0.5 * k * x
    return 2.0 * y / (s * x) - 4.0 * s + k * alpha * s * e / p1


def peak_delay_closed_form(alpha: float) -> float:
    """Lossless peak-information delay via the Lambert W function."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    w = lambert_w_principal(-(alpha * alpha) / math.e)
    return math.sqrt(max(w + 1.0, 0.0)) / math.sqrt(2.0)


def peak_delay_numeric(alpha: float, gamma: float) -> float:
    """Peak-information delay by root-finding the slope of log F_s.

    F_s is unimodal on ``s > 0`` for this model family, so the maximiser is
    the unique sign change of its log-derivative inside ``PEAK_BRACKET``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    lo, hi = PEAK_BRACKET
    if alpha == 1.0:
        return 0.0
    f_lo = _log_fisher_slope(lo, alpha, gamma)
    f_hi = _log_fisher_slope(hi, alpha, gamma)
    if f_lo <= 0.0:
        return 0.0
    if f_hi >= 0.0:
        raise PeakSearchError("no sign change of dF/ds in the search bracket", 0)
    root, info = brentq(
        _log_fisher_slope, lo, hi, args=(alpha, gamma),
        xtol=PEAK_XTOL, rtol=4 * np.finfo(float).eps, maxiter=200, full_output=True,
        disp=False,
    )
    if not info.converged:
        raise PeakSearchError("peak search did not converge", info.iterations)
    return root


def peak_information_delay(params: ModelParams, method: str = "auto") -> float:
    """Positive normalised delay ``s*`` that maximises the Fisher information.

    ``method="auto"`` uses the Lambert-W closed form when ``gamma == 0`` and a
    numeric search otherwise; ``"closed_form"`` and ``"numeric"`` force one
    route (the closed form only exists for ``gamma == 0``).
    """
    if method == "auto":
        method = "closed_form" if params.gamma == 0.0 else "numeric"
    if method == "closed_form":
        if params.gamma != 0.0:
            raise ValueError("closed form peak only exists for gamma = 0")
        return peak_delay_closed_form(params.alpha)
    if method == "numeric":
        return peak_delay_numeric(params.alpha, params.gamma)
    raise ValueError(f"unknown method {method!r}")


def peak_fisher_information(params: ModelParams) -> float:
    """F_tau at the optimal operating point, ps^-2.

    For ``alpha = 1`` this is the ``s -> 0`` limit.
    """
    s_star = peak_information_delay(params)
    if s_star == 0.0:
        s_star = 1e-8
    return fisher_information(s_star, params)


@dataclass(frozen=True)
class InformationProfile:
    """Fisher information sampled on a grid of delays.

    ``fisher_per_pair`` is NaN where ``defined`` is False.
    """

    delays_as: np.ndarray
    fisher_per_pair: np.ndarray
    defined: np.ndarray
    peak_delay_as: float
    peak_value: float


def information_profile(params: ModelParams, delays_as) -> InformationProfile:
    delays_as = np.atleast_1d(np.asarray(delays_as, dtype=float))
    s = delays_as / params.sigma_as
    values = _fisher_s(s, params.alpha, params.gamma) / params.sigma_ps ** 2
    defined = ~np.isnan(values)
    if defined.any():
        i = int(np.nanargmax(values))
        peak_delay, peak_value = float(delays_as[i]), float(values[i])
    else:
        peak_delay, peak_value = math.nan, math.nan
    return InformationProfile(delays_as, values, defined, peak_delay, peak_value)


@dataclass(frozen=True)
class DynamicRange:
    """Delay interval on the positive branch where F >= threshold * F(s*).

    The negative branch is the mirror image ``(-upper_as, -lower_as)``.
    """

    lower_as: float
    upper_as: float
    threshold_fraction: float
    peak_delay_as: float

    @property
    def width_as(self) -> float:
        return self.upper_as - self.lower_as

    @property
    def negative_branch(self) -> tuple[float, float]:
        return (-self.upper_as, -self.lower_as)


def dynamic_range(params: ModelParams, threshold_fraction: float = 0.1) -> DynamicRange:
    """Usable delay interval around the peak-information point.

    Endpoints are roots of ``F(s) - threshold * F(s*)`` on either side of
    ``s*``. As the threshold goes to zero the endpoints approach the points
    where F underflows.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError(f"threshold_fraction must lie in (0, 1), got {threshold_fraction}")
    a, g = params.alpha, params.gamma
    s_star = peak_information_delay(params)
    f_peak = float(_fisher_s(max(s_star, 1e-8), a, g))
    level = threshold_fraction * f_peak

    def excess(s):
        return float(_fisher_s(s, a, g)) - level

    if s_star == 0.0:
        lower = 0.0
    else:
        lo = s_star
        while excess(lo) > 0.0 and lo > 1e-300:
            lo *= 1e-3
        lower = 0.0 if excess(lo) > 0.0 else brentq(excess, lo, s_star, xtol=1e-15, rtol=1e-13)
    hi = max(s_star, 1.0)
    while excess(hi) > 0.0:
        hi *= 2.0
    upper = brentq(excess, max(s_star, 1e-8), hi, xtol=1e-15, rtol=1e-13)
    sig = params.sigma_as
    return DynamicRange(lower * sig, upper * sig, threshold_fraction, s_star * sig)


def peak_delay_table(alphas, gammas=(0.0, 0.5, 0.9)):
    """s* against visibility for several loss rates, shape (len(gammas), len(alphas))."""
    table = np.empty((len(gammas), len(alphas)))
    for i, g in enumerate(gammas):
        for j, a in enumerate(alphas):
            table[i, j] = peak_delay_numeric(a, g) if g else peak_delay_closed_form(a)
    return table


def nominal_operating_delay_as(params: ModelParams) -> float:
    """Delay in attoseconds that places the interferometer at +s*."""
    return peak_information_delay(params) * params.sigma_ps * AS_PER_PS

"""HOM dip with single-photon phase fringes switched on by a rotated source.

Rotating the down-conversion frame by ``theta`` relative to the PBS lets
which-path information leak out and adds fringes at twice the optical
frequency to the coincidence probability. No loss is modelled: the
observable is the two-outcome coincidence/bunch split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .fisher import FisherUndefinedError, fisher_information, peak_information_delay
from .model import ModelDomainError, ModelParams
from .units import AS_PER_PS


@dataclass(frozen=True)
class FringeParams:
    theta_rad: float
    nu_thz: float

    def __post_init__(self):
        if not 0.0 <= self.theta_rad <= math.pi / 2:
            raise ModelDomainError(f"theta_rad must lie in [0, pi/2], got {self.theta_rad}")
        if not self.nu_thz > 0.0:
            raise ModelDomainError(f"nu_thz must be positive, got {self.nu_thz}")

    @classmethod
    def from_degrees(cls, theta_deg, nu_thz):
        return cls(math.radians(theta_deg), nu_thz)


def _lossless(params: ModelParams) -> None:
    if params.gamma != 0.0:
        raise ModelDomainError("the fringe model carries no loss; use gamma = 0")


def fringe_coincidence_probability(tau_as, params: ModelParams, fringe: FringeParams):
    _lossless(params)
    t = np.asarray(tau_as, dtype=float) / AS_PER_PS
    sig = params.sigma_ps
    env = params.alpha * np.exp(-t * t / sig ** 2)
    s2 = math.sin(2.0 * fringe.theta_rad) ** 2
    cos2 = np.cos(2.0 * math.pi * fringe.nu_thz * t) ** 2
    out = 0.5 * (s2 * (env + 1.0) * cos2 - env + 1.0)
    return out if out.ndim else float(out)


def _fringe_fisher(t, alpha, sig, theta, nu):
    s2 = math.sin(2.0 * theta) ** 2
    grow = np.exp(t * t / sig ** 2)
    cos2 = np.cos(2.0 * math.pi * nu * t) ** 2
    num = 4.0 * (
        math.pi * nu * sig ** 2 * s2 * (alpha + grow) * np.sin(4.0 * math.pi * nu * t)
        + alpha * t * s2 * cos2
        - alpha * t
    ) ** 2
    den = sig ** 4 * (alpha + grow) * (s2 * cos2 - 1.0) * (s2 * (alpha + grow) * cos2 - alpha + grow)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -num / den
    return np.where(den != 0.0, out, np.nan)


def fringe_fisher_information_array(tau_as, params: ModelParams, fringe: FringeParams):
    """Vectorised fringe Fisher information in ps^-2, NaN where undefined."""
    _lossless(params)
    t = np.asarray(tau_as, dtype=float) / AS_PER_PS
    return _fringe_fisher(t, params.alpha, params.sigma_ps, fringe.theta_rad, fringe.nu_thz)


def fringe_fisher_information(tau_as, params: ModelParams, fringe: FringeParams):
    """Fisher information about ``tau`` (ps^-2) per pair with fringes on.

    Raises
    ------
    FisherUndefinedError
        Where a denominator vanishes (coincidence probability 0 or 1).
    """
    out = fringe_fisher_information_array(tau_as, params, fringe)
    if np.any(np.isnan(out)):
        raise FisherUndefinedError("fringe Fisher information undefined at requested delay")
    return out if out.ndim else float(out)


def fringe_fisher_information_45(tau_as, params: ModelParams, nu_thz: float):
    """The ``theta = 45 deg`` special case, written in its reduced form."""
    _lossless(params)
    t = np.asarray(tau_as, dtype=float) / AS_PER_PS
    a, sig = params.alpha, params.sigma_ps
    grow = np.exp(t * t / sig ** 2)
    ph = 2.0 * math.pi * nu_thz * t
    num = 8.0 * (a * t * np.sin(ph) - 2.0 * math.pi * nu_thz * sig ** 2 * (a + grow) * np.cos(ph)) ** 2
    den = sig ** 4 * (a + grow) * (a * (np.cos(2.0 * ph) - 1.0) + grow * (np.cos(2.0 * ph) + 3.0))
    out = num / den
    return out if out.ndim else float(out)


def two_outcome_fisher(tau_as, params: ModelParams, fringe: FringeParams, dt_as=1e-3):
    """(dPc/dtau)^2 / (Pc (1 - Pc)) by central differences, ps^-2."""
    tau_as = np.asarray(tau_as, dtype=float)
    pc = np.asarray(fringe_coincidence_probability(tau_as, params, fringe))
    up = np.asarray(fringe_coincidence_probability(tau_as + dt_as, params, fringe))
    down = np.asarray(fringe_coincidence_probability(tau_as - dt_as, params, fringe))
    dpc = (up - down) / (2.0 * dt_as / AS_PER_PS)
    out = dpc * dpc / (pc * (1.0 - pc))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FringePeak:
    tau_as: float
    fisher: float


def fringe_peak(params: ModelParams, fringe: FringeParams, max_sigmas=4.0,
                samples_per_period=64) -> FringePeak:
    """Global maximum over ``tau > 0`` of the fringe Fisher information.

    A grid at ``samples_per_period`` points per fringe period locates the
    best lobe; a bounded scalar search then polishes it.
    """
    _lossless(params)
    if fringe.theta_rad == 0.0:
        s_star = peak_information_delay(params)
        tau = s_star * params.sigma_as
        return FringePeak(tau, fisher_information(max(s_star, 1e-8), params))
    period_as = AS_PER_PS / (2.0 * fringe.nu_thz)
    span = max_sigmas * params.sigma_as
    n = int(math.ceil(span / period_as * samples_per_period)) + 1
    grid = np.linspace(0.0, span, n)[1:]
    values = fringe_fisher_information_array(grid, params, fringe)
    i = int(np.nanargmax(values))
    step = grid[1] - grid[0]
    lo, hi = max(grid[i] - step, 1e-9), grid[i] + step
    res = minimize_scalar(
        lambda t: -float(fringe_fisher_information_array(t, params, fringe)),
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-9},
    )
    best_t, best_f = (res.x, -res.fun) if -res.fun >= values[i] else (grid[i], values[i])
    return FringePeak(float(best_t), float(best_f))


@dataclass(frozen=True)
class FringeGain:
    fisher_ratio: float
    precision_ratio: float
    peak_fringe: FringePeak
    peak_hom: FringePeak


def fringe_information_gain(params: ModelParams, theta_rad: float, nu_thz: float) -> FringeGain:
    """Peak Fisher information with fringes at ``theta`` relative to ``theta = 0``."""
    on = fringe_peak(params, FringeParams(theta_rad, nu_thz))
    off = fringe_peak(params, FringeParams(0.0, nu_thz))
    ratio = on.fisher / off.fisher
    return FringeGain(ratio, math.sqrt(ratio), on, off)

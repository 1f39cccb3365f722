"""Synthetic bench: seeded count generation, drift, and the in/out protocol.

Counts for one window are a multinomial draw over (N0, N1, N2), generated
as two sequential binomials (N0, then N2 given the survivors) so the cost
per window does not grow with the number of pairs. Both binomials use
inverse-CDF sampling from per-window uniforms: two runs with the same seed
but slightly different delays (e.g. with and without drift) then see
common random numbers, which is what makes paired comparisons sharp.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from . import rng as rngmod
from .estimation import (
    INTERIOR, STATUS_BY_CODE, EstimatorConfig, crb_variance, mle_normalized, pooled_precision,
)
from .fisher import nominal_operating_delay_as
from .model import ModelParams, outcome_probabilities
from .units import AS_PER_FS, AS_PER_NM


class ProtocolAbort(RuntimeError):
    """Too many windows hit an estimator boundary for the run to be usable."""

    def __init__(self, message, clamped, windows):
        super().__init__(message)
        self.clamped = clamped
        self.windows = windows


def _binomial_ppf(u, n, p):
    u, n, p = np.broadcast_arrays(np.asarray(u, float), np.asarray(n, float), np.asarray(p, float))
    out = binom.ppf(u, n, np.clip(p, 0.0, 1.0))
    out = np.where(p <= 0.0, 0.0, out)
    out = np.where(p >= 1.0, n, out)
    return np.where(n <= 0, 0.0, out)


def _uniform_pairs(rngs):
    # 1 - U lies in (0, 1], avoiding ppf(0) = -1
    return np.array([1.0 - g.random(2) for g in rngs]).reshape(-1, 2)


def _as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return rngmod.stream(seed, rngmod.COUNTS, 0, 0)


def sample_counts_many(s, params: ModelParams, n_pairs, rngs):
    """Counts (N1, N2) for many windows, one generator per window."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    u = _uniform_pairs(rngs)
    probs = outcome_probabilities(s, params)
    p0 = params.gamma ** 2
    n_pairs = np.broadcast_to(np.asarray(n_pairs, dtype=float), s.shape)
    n0 = _binomial_ppf(u[:, 0], n_pairs, np.full(s.shape, p0))
    p2_given_detected = np.asarray(probs.p2) / (1.0 - p0)
    n2 = _binomial_ppf(u[:, 1], n_pairs - n0, p2_given_detected)
    n1 = n_pairs - n0 - n2
    return n1.astype(np.int64), n2.astype(np.int64)


def sample_counts(s, params: ModelParams, n_pairs: int, seed):
    """Draw one window of counts; ``seed`` is an int or a Generator.

    Returns
    -------
    CoincidenceCounts
    """
    from .estimation import CoincidenceCounts

    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    n1, n2 = sample_counts_many([s], params, n_pairs, [_as_generator(seed)])
    return CoincidenceCounts(int(n1[0]), int(n2[0]))


class DriftModel(str, enum.Enum):
    NONE = "none"
    RANDOM_WALK = "random_walk"


@dataclass(frozen=True)
class DriftConfig:
    """Slow common-mode delay drift.

    ``total_drift_fs`` is the RMS (over realisations) of the excursion at the
    end of the run. ``step_fs``, when given, fixes the per-period step
    standard deviation instead.
    """

    model: DriftModel = DriftModel.NONE
    total_drift_fs: float = 0.0
    step_fs: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "model", DriftModel(self.model))
        if self.total_drift_fs < 0 or (self.step_fs is not None and self.step_fs < 0):
            raise ValueError("drift magnitudes must be non-negative")

    @classmethod
    def random_walk(cls, total_drift_fs):
        return cls(DriftModel.RANDOM_WALK, total_drift_fs)

    def step_std_fs(self, m_windows):
        if self.step_fs is not None:
            return self.step_fs
        return self.total_drift_fs / math.sqrt(m_windows)


def drift_trace(config: DriftConfig, m_windows: int, seed: int) -> np.ndarray:
    """Per-period additive delay offsets in attoseconds.

    Both windows of a period share the same offset.
    """
    if m_windows < 1:
        raise ValueError("m_windows must be >= 1")
    if config.model is DriftModel.NONE:
        return np.zeros(m_windows)
    g = rngmod.stream(seed, rngmod.DRIFT, 0, 0)
    steps = g.standard_normal(m_windows) * config.step_std_fs(m_windows) * AS_PER_FS
    return np.cumsum(steps)


@dataclass(frozen=True)
class ProtocolConfig:
    """Settings for an in/out switching run.

    ``operating_delay_as`` defaults to ``+s* sigma`` of the estimator's
    parameters; the ``out`` window sits there and ``in`` is displaced by
    ``delta_tau_as``.
    """

    pairs_per_window: int
    m_windows: int
    delta_tau_as: float
    operating_delay_as: float | None = None
    switch_period_ms: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.pairs_per_window < 1 or self.m_windows < 1:
            raise ValueError("pairs_per_window and m_windows must be positive")
        if not math.isfinite(self.delta_tau_as):
            raise ValueError("delta_tau_as must be finite")


@dataclass
class ProtocolResult:
    """Outcome of :func:`run_protocol`.

    Per-window arrays have length ``m_windows``;  cumulative traces and
    ``delta_tau_as`` cover only the periods where both windows were interior.
    """

    delta_tau_hat_as: float
    pooled_precision_as: float
    per_window_precision_as: float
    empirical_precision_as: float
    true_delta_tau_as: float
    operating_delay_as: float
    m_valid: int
    clamp_counts: dict
    drift_as: np.ndarray
    tau_in_hat_as: np.ndarray
    tau_out_hat_as: np.ndarray
    var_in_as2: np.ndarray
    var_out_as2: np.ndarray
    status_in: np.ndarray
    status_out: np.ndarray
    valid: np.ndarray
    delta_tau_as: np.ndarray
    cumulative_in_as: np.ndarray
    cumulative_out_as: np.ndarray
    cumulative_delta_as: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def accuracy_as(self) -> float:
        return abs(self.delta_tau_hat_as - self.true_delta_tau_as)


def _simulate_windows(s, params, n_pairs, seed, periods, side, n_jobs):
    def chunk(idx):
        gens = [rngmod.stream(seed, rngmod.COUNTS, int(p), side) for p in periods[idx]]
        return sample_counts_many(s[idx], params, n_pairs, gens)

    if n_jobs <= 1:
        return chunk(slice(None))
    parts = np.array_split(np.arange(len(periods)), n_jobs)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        results = list(pool.map(chunk, parts))
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def run_protocol(params: ModelParams, protocol: ProtocolConfig, drift: DriftConfig = DriftConfig(),
                 estimator_params: ModelParams | None = None,
                 config: EstimatorConfig = EstimatorConfig(),
                 n_jobs: int = 1, max_clamp_fraction: float = 0.5) -> ProtocolResult:
    """Simulate ``m_windows`` in/out periods and estimate the differential delay.

    ``params`` generates the counts; ``estimator_params`` (default: the same)
    is what the analysis assumes, e.g. a calibration result.

    Raises
    ------
    ProtocolAbort
        If more than ``max_clamp_fraction`` of all windows clamp.
    """
    est = estimator_params or params
    m = protocol.m_windows
    n = protocol.pairs_per_window
    op = protocol.operating_delay_as
    if op is None:
        op = nominal_operating_delay_as(est)
    offsets = drift_trace(drift, m, protocol.seed)
    tau_out = op + offsets
    tau_in = op + protocol.delta_tau_as + offsets
    periods = np.arange(m)

    sig = params.sigma_as
    n1_in, n2_in = _simulate_windows(tau_in / sig, params, n, protocol.seed, periods, 0, n_jobs)
    n1_out, n2_out = _simulate_windows(tau_out / sig, params, n, protocol.seed, periods, 1, n_jobs)

    s_in, code_in = mle_normalized(n1_in, n2_in, est.alpha, est.gamma, config.s_max)
    s_out, code_out = mle_normalized(n1_out, n2_out, est.alpha, est.gamma, config.s_max)
    # positive branch by construction of the operating point
    t_in, t_out = s_in * est.sigma_as, s_out * est.sigma_as
    v_in = np.asarray(crb_variance(s_in, est, n))
    v_out = np.asarray(crb_variance(s_out, est, n))

    clamped_in = code_in != INTERIOR
    clamped_out = code_out != INTERIOR
    n_clamped = int(clamped_in.sum() + clamped_out.sum())
    clamp_counts = {
        STATUS_BY_CODE[c].value: int((code_in == c).sum() + (code_out == c).sum())
        for c in (1, 2)
    }
    if n_clamped > max_clamp_fraction * 2 * m:
        raise ProtocolAbort(
            f"{n_clamped} of {2 * m} windows clamped; operating point is badly chosen",
            n_clamped, 2 * m,
        )
    valid = ~(clamped_in | clamped_out)
    m_valid = int(valid.sum())
    d = (t_in - t_out)[valid]
    vd = (v_in + v_out)[valid]
    mean_var = float(vd.mean())
    counts_so_far = np.arange(1, m_valid + 1)

    return ProtocolResult(
        delta_tau_hat_as=float(d.mean()),
        pooled_precision_as=pooled_precision(mean_var, m_valid),
        per_window_precision_as=math.sqrt(mean_var),
        empirical_precision_as=float(d.std(ddof=1) / math.sqrt(m_valid)) if m_valid > 1 else math.nan,
        true_delta_tau_as=protocol.delta_tau_as,
        operating_delay_as=float(op),
        m_valid=m_valid,
        clamp_counts=clamp_counts,
        drift_as=offsets,
        tau_in_hat_as=t_in,
        tau_out_hat_as=t_out,
        var_in_as2=v_in,
        var_out_as2=v_out,
        status_in=code_in,
        status_out=code_out,
        valid=valid,
        delta_tau_as=d,
        cumulative_in_as=np.cumsum(t_in[valid]) / counts_so_far,
        cumulative_out_as=np.cumsum(t_out[valid]) / counts_so_far,
        cumulative_delta_as=np.cumsum(d) / counts_so_far,
        extra={"pairs_per_window": n, "m_windows": m, "seed": protocol.seed},
    )


@dataclass(frozen=True)
class WedgeGeometry:
    conversion_nm_per_um: float = 17.0
    refractive_index: float = 1.5

    def __post_init__(self):
        if not (self.conversion_nm_per_um > 0 and self.refractive_index > 0):
            raise ValueError("wedge geometry values must be positive")


def wedge_delay(translation_um: float, geometry: WedgeGeometry = WedgeGeometry()):
    """Delay (as) and glass length (nm) for a wedge translation.

    The conversion factor gives optical path per micrometre translation;
    glass length is that path over the refractive index.
    """
    path_nm = translation_um * geometry.conversion_nm_per_um
    return path_nm * AS_PER_NM, path_nm / geometry.refractive_index



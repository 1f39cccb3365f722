import math

import numpy as np
import pytest

from hom_metrology import rng
from hom_metrology.bench import sample_counts, sample_counts_many
from hom_metrology.calibration import (
    CalibrationError, ScanRecord, calibrate, estimate_alpha, estimate_gamma, estimate_n,
    estimate_sigma, smoothed_n2, straightened_dip,
)
from hom_metrology.estimation import CoincidenceCounts
from hom_metrology.fisher import peak_information_delay
from hom_metrology.model import ModelParams, expected_counts

REF = ModelParams(0.63, 0.87, 0.03)
SCAN_TAUS = np.arange(-5_000.0, 30_000.1, 100.0)


def exact_counts(s, params, n):
    return CoincidenceCounts(*(float(v) for v in expected_counts(s, params, n)))


def exact_scan(params, n, taus=SCAN_TAUS):
    return [ScanRecord(float(t), exact_counts(t / params.sigma_as, params, n)) for t in taus]


def noisy_scan(params, n, seed, taus=SCAN_TAUS):
    gens = [rng.stream(seed, rng.REPEATS, i, 1) for i in range(len(taus))]
    n1, n2 = sample_counts_many(taus / params.sigma_as, params, n, gens)
    return [ScanRecord(float(t), CoincidenceCounts(int(a), int(b))) for t, a, b in zip(taus, n1, n2)]


def test_gamma_examples():
    assert estimate_gamma(CoincidenceCounts(640, 320)) == pytest.approx(0.2, rel=1e-15)
    assert estimate_gamma(CoincidenceCounts(500, 500)) == 0.0
    assert estimate_gamma(exact_counts(12.0, ModelParams(0.9, 0.87, 0.03), 870_000)) == \
        pytest.approx(0.87, rel=1e-12)
    assert estimate_gamma(CoincidenceCounts(100, 200)) == 0.0  # clipped
    with pytest.raises(CalibrationError) as info:
        estimate_gamma(CoincidenceCounts(0, 0))
    assert info.value.stage == "gamma"


def test_n_examples():
    assert estimate_n(CoincidenceCounts(640, 320), 0.2) == pytest.approx(1000.0, rel=1e-14)
    assert estimate_n(CoincidenceCounts(640, 320), 0.0) == 960
    assert estimate_n(CoincidenceCounts(0, 0), 0.5) == 0.0


def _flat_scan(n2_values, n1=500.0):
    return [ScanRecord(float(i), CoincidenceCounts(n1, float(v))) for i, v in enumerate(n2_values)]


def test_alpha_examples():
    assert estimate_alpha(_flat_scan([400, 100, 300]), 1000, 0.0) == pytest.approx(0.8, rel=1e-15)
    assert estimate_alpha(_flat_scan([400, 0, 300]), 1000, 0.0) == 1.0
    n, g = 1000.0, 0.3
    assert estimate_alpha(_flat_scan([n * (1 - g) ** 2 / 2] * 3), n, g) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(CalibrationError):
        estimate_alpha([], 1000, 0.0)


def test_smoothing_moving_average():
    scan = _flat_scan([10, 20, 30, 40, 50])
    np.testing.assert_allclose(smoothed_n2(scan, 3), [15, 20, 30, 40, 45])
    np.testing.assert_array_equal(smoothed_n2(scan, 1), [10, 20, 30, 40, 50])


@pytest.mark.parametrize("params", [REF, ModelParams(0.92, 0.87, 0.06), ModelParams(1.0, 0.0, 0.03),
                                    ModelParams(0.75, 0.5, 0.02)])
def test_each_estimator_exact_on_expected_counts(params):
    n = 1e7
    far = exact_counts(10.0, params, n)
    taus = np.arange(-5_000.0, 6 * params.sigma_as, 100.0)
    scan = exact_scan(params, n, taus)
    g = estimate_gamma(far)
    assert g == pytest.approx(params.gamma, rel=1e-9, abs=1e-12)
    assert estimate_n(far, g) == pytest.approx(n, rel=1e-9)
    assert estimate_alpha(scan, n, g) == pytest.approx(params.alpha, rel=1e-9)
    center = peak_information_delay(params) * params.sigma_as
    fit = estimate_sigma(scan, params.alpha, params.gamma, 7.0, center, apex_as=0.0)
    assert fit.sigma_ps == pytest.approx(params.sigma_ps, rel=1e-6)
    assert fit.fit_residual < 1e-9
    rec = calibrate(far, scan, alpha_smoothing=1)
    assert rec.gamma_hat == pytest.approx(params.gamma, rel=1e-9, abs=1e-12)
    assert rec.n_hat == pytest.approx(n, rel=1e-9)
    assert rec.alpha_hat == pytest.approx(params.alpha, rel=1e-9)
    assert rec.sigma_hat_ps == pytest.approx(params.sigma_ps, rel=1e-6)
    assert rec.fit_residual < 1e-9
    assert rec.covers_dip_center


def test_window_restricted_to_branch_side_of_apex():
    params = ModelParams(1.0, 0.0, 0.03)
    scan = exact_scan(params, 1e7)
    fit = estimate_sigma(scan, 1.0, 0.0, 7.0, 0.0, apex_as=0.0)
    # 0 .. 3.5 fs at 0.1 fs steps; the apex itself clamps at zero and is excluded
    assert fit.n_used == 35 and fit.n_excluded == 1


def test_window_centred_on_peak_information_point():
    n = 1e7
    rec = calibrate(exact_counts(10.0, REF, n), exact_scan(REF, n), alpha_smoothing=1)
    assert rec.fit_window_fs == 7.0
    assert rec.center_as == pytest.approx(rec.s_star * REF.sigma_as, rel=1e-9)
    assert rec.n_fit_points == 70
    assert rec.to_dict()["alpha_smoothing"] == 1


def test_scan_missing_dip_centre_biases_alpha_low_and_is_flagged():
    n = 1e7
    far = exact_counts(10.0, REF, n)
    scan = exact_scan(REF, n, np.arange(6_000.0, 30_000.1, 100.0))
    rec = calibrate(far, scan, alpha_smoothing=1)
    assert rec.alpha_hat < REF.alpha
    assert not rec.covers_dip_center


def test_sigma_errors():
    n = 1e7
    scan = exact_scan(REF, n, np.arange(0.0, 2_000.0, 1_000.0))
    with pytest.raises(CalibrationError) as info:
        estimate_sigma(scan, REF.alpha, REF.gamma, 7.0, 1_000.0)
    assert info.value.stage == "sigma"


def test_clamped_points_excluded():
    n = 1e7
    scan = exact_scan(REF, n)
    # far-from-dip records at s = 10 clamp; put the window over them
    far_scan = scan + [ScanRecord(300_000.0 + 100 * i, exact_counts(10.0, REF, n)) for i in range(10)]
    center = peak_information_delay(REF) * REF.sigma_as
    fit = estimate_sigma(far_scan, REF.alpha, REF.gamma, 7.0, center)
    assert fit.n_excluded == 0
    tau, s, interior = straightened_dip(far_scan, REF.alpha, REF.gamma)
    assert (~interior).sum() >= 10


def test_order_invariance():
    scan = noisy_scan(REF, 1_000_000, seed=4)
    shuffled = list(np.random.default_rng(0).permutation(np.array(scan, dtype=object)))
    far = sample_counts(10.0, REF, 1_000_000, seed=4)
    assert calibrate(far, scan) == calibrate(far, shuffled)
    assert estimate_alpha(scan, 1e6, 0.87) == estimate_alpha(shuffled, 1e6, 0.87)
    # alpha depends only on the multiset of N2 values: relabel the delays
    relabelled = [ScanRecord(float(i), r.counts) for i, r in enumerate(shuffled)]
    assert estimate_alpha(relabelled, 1e6, 0.87) == estimate_alpha(scan, 1e6, 0.87)


def test_noisy_pipeline_recovers_reference_parameters():
    n = 10_000_000
    rec = calibrate(sample_counts(10.0, REF, n, seed=7), noisy_scan(REF, n, seed=7))
    assert rec.gamma_hat == pytest.approx(REF.gamma, rel=0.01)
    assert rec.n_hat == pytest.approx(n, rel=0.01)
    assert rec.alpha_hat == pytest.approx(REF.alpha, rel=0.02)
    assert rec.sigma_hat_ps == pytest.approx(REF.sigma_ps, rel=0.03)


def test_wide_dip_scan_within_fit_error():
    # Fig. 2 style scan (sigma = 0.07 ps, 3.72e5 pairs per point, 1 fs steps)
    params = ModelParams(0.92, 0.87, 0.07)
    taus = np.arange(-150_000.0, 150_001.0, 1_000.0)
    rec = calibrate(sample_counts(10.0, params, 372_000, seed=0), noisy_scan(params, 372_000, 0, taus))
    tau, _, interior = straightened_dip(noisy_scan(params, 372_000, 0, taus), rec.alpha_hat, rec.gamma_hat)
    used = interior & (np.abs(tau - rec.center_as) <= 3_500.0)
    n_used = int(used.sum())
    slope = 1.0 / (rec.sigma_hat_ps * 1e6)
    slope_se = rec.fit_residual * math.sqrt(n_used / (n_used - 2)) / math.sqrt(
        np.sum((tau[used] - tau[used].mean()) ** 2))
    sigma_rel_se = slope_se / slope
    assert abs(rec.sigma_hat_ps / params.sigma_ps - 1.0) <= 3 * sigma_rel_se


def _log_slope(ns, errors):
    return np.polyfit(np.log10(ns), np.log10(errors), 1)[0]


@pytest.mark.slow
def test_error_scales_as_inverse_sqrt_n():
    ns = np.array([1e4, 1e6, 1e8])
    rms = {k: [] for k in ("gamma", "n", "alpha", "sigma")}
    center = peak_information_delay(REF) * REF.sigma_as
    for n in ns:
        e = {k: [] for k in rms}
        for r in range(100):
            far = sample_counts(10.0, REF, int(n), rng.stream(r, rng.REPEATS, 9_999, 0))
            g = estimate_gamma(far)
            e["gamma"].append(g - REF.gamma)
            e["n"].append(estimate_n(far, g) / n - 1.0)
            scan = noisy_scan(REF, int(n), r)
            e["alpha"].append(estimate_alpha(scan, n, REF.gamma) - REF.alpha)
            fit = estimate_sigma(scan, REF.alpha, REF.gamma, 7.0, center)
            e["sigma"].append(fit.sigma_ps / REF.sigma_ps - 1.0)
        for k in rms:
            rms[k].append(math.sqrt(np.mean(np.square(e[k]))))
    for k, v in rms.items():
        assert _log_slope(ns, v) == pytest.approx(-0.5, abs=0.1), k

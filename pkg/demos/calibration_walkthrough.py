"""
Calibrating the nuisance parameters from a scan
===============================================

Before any delay is measured we need gamma, N, alpha and sigma. Loss and
pair number come from a window parked far outside the dip, visibility from
the deepest point of a scan, and the width from a straight-line fit once
each scan point is pushed through the delay estimator (the dip becomes a
vee).
"""
import numpy as np

from _plotting import figure_saver, parse_args
from hom_metrology import ModelParams, calibrate, rng
from hom_metrology.bench import sample_counts, sample_counts_many
from hom_metrology.calibration import ScanRecord, straightened_dip
from hom_metrology.estimation import CoincidenceCounts

args = parse_args(__doc__.strip().splitlines()[0])

truth = ModelParams(0.63, 0.87, 0.03)
n_pairs = 10_000_000

# a partial scan from just below the dip centre out past s = 1, 0.1 fs steps
taus = np.arange(-5_000.0, 30_000.1, 100.0)
gens = [rng.stream(0, rng.REPEATS, i, 1) for i in range(len(taus))]
n1, n2 = sample_counts_many(taus / truth.sigma_as, truth, n_pairs, gens)
scan = [ScanRecord(t, CoincidenceCounts(int(a), int(b))) for t, a, b in zip(taus, n1, n2)]
far = sample_counts(10.0, truth, n_pairs, seed=1)

rec = calibrate(far, scan)
for name, est, true in [("gamma", rec.gamma_hat, truth.gamma), ("N", rec.n_hat, n_pairs),
                        ("alpha", rec.alpha_hat, truth.alpha), ("sigma_ps", rec.sigma_hat_ps, truth.sigma_ps)]:
    print(f"{name:>8}: {est:.6g}  (true {true:.6g}, error {100 * (est / true - 1):+.2f}%)")
print(f"fit window {rec.fit_window_fs} fs centred at {rec.center_as:.0f} as, "
      f"{rec.n_fit_points} points, RMS residual {rec.fit_residual:.2e} in s")

# %%
# The straightened dip: linear in tau on each side of the apex.
tau, s, ok = straightened_dip(scan, rec.alpha_hat, rec.gamma_hat)

saver = figure_saver(args.save)
if saver:
    plt, save = saver
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    ax[0].plot(taus / 1e3, n2, ".", ms=2)
    ax[0].set(xlabel="delay (fs)", ylabel="N2 (coincidences)")
    ax[1].plot(tau[ok] / 1e3, s[ok], ".", ms=2)
    lo, hi = rec.center_as - 3_500, rec.center_as + 3_500
    ax[1].axvspan(lo / 1e3, hi / 1e3, alpha=0.2, label="fit window")
    ax[1].set(xlabel="delay (fs)", ylabel="|s~|")
    ax[1].legend()
    save(fig, "calibration.png")

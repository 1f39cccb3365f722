"""
Phase fringes on top of the dip
===============================

Rotating the down-conversion source against the polarising beamsplitter
lets single-photon phase fringes through, oscillating at twice the optical
frequency. Their steep slopes carry far more information than the slow
Gaussian envelope of the dip.
"""
import math

import numpy as np

from _plotting import figure_saver, parse_args
from hom_metrology import ModelParams
from hom_metrology.fringe import FringeParams, fringe_fisher_information_array, fringe_information_gain

args = parse_args(__doc__.strip().splitlines()[0])

params = ModelParams(0.63, 0.0, 0.033)
for theta in (5.0, 15.0, 30.0, 45.0):
    gain = fringe_information_gain(params, math.radians(theta), 371.0)
    print(f"theta={theta:4.1f} deg: peak F ratio {gain.fisher_ratio:9.0f}, "
          f"precision gain {gain.precision_ratio:6.1f}x at {gain.peak_fringe.tau_as:.1f} as")

saver = figure_saver(args.save)
if saver:
    plt, save = saver
    tau = np.linspace(1.0, 60_000.0, 40_000)
    fig, ax = plt.subplots(figsize=(7, 4))
    for theta in (0.0, 10.0, 45.0):
        f = fringe_fisher_information_array(tau, params, FringeParams.from_degrees(theta, 371.0))
        ax.semilogy(tau / 1e3, f, lw=0.6, label=f"theta={theta:g} deg")
    ax.set(xlabel="delay (fs)", ylabel="F per pair (ps$^{-2}$)", ylim=(1e-2, None))
    ax.legend()
    save(fig, "phase_fringes.png")

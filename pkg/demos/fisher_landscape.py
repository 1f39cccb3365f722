"""
Where does a HOM dip carry the most information?
================================================

The dip bottom is the worst place to sit: the coincidence rate is flat
there. The Fisher information peaks on the flank, at a normalised delay
s* that moves out towards the inflection point 1/sqrt(2) as the
visibility drops, and a little back in as loss grows.
"""
import numpy as np

from _plotting import figure_saver, parse_args
from hom_metrology import ModelParams, dynamic_range, information_profile, peak_information_delay
from hom_metrology.fisher import peak_delay_table

args = parse_args(__doc__.strip().splitlines()[0])

# the reference parameter set: 63% visibility, 87% loss, 30 fs width
params = ModelParams(alpha=0.63, gamma=0.87, sigma_ps=0.03)
s_star = peak_information_delay(params)
print(f"s* = {s_star:.4f}  ->  operate at {s_star * params.sigma_as:.0f} as from the dip centre")

dr = dynamic_range(params, threshold_fraction=0.1)
print(f"F above 10% of its peak for {dr.lower_as:.0f} .. {dr.upper_as:.0f} as "
      f"({dr.width_as / params.sigma_as:.2f} sigma wide)")

# %%
# Information per pair against delay for a few visibilities.
tau = np.linspace(-90_000, 90_000, 1801)
profiles = {a: information_profile(ModelParams(a, 0.0, 0.03), tau) for a in (0.5, 0.8, 0.95, 1.0)}
for a, prof in profiles.items():
    print(f"alpha={a:4.2f}: peak {prof.peak_value:8.1f} ps^-2 at {prof.peak_delay_as:8.0f} as")

# %%
# s* against visibility: the lossless curve follows the Lambert-W closed form.
alphas = np.linspace(0.01, 1.0, 200)
gammas = (0.0, 0.5, 0.9)
table = peak_delay_table(alphas, gammas)
for g, row in zip(gammas, table):
    print(f"gamma={g}: s*(alpha=0.01)={row[0]:.4f}, s*(alpha=0.5)={np.interp(0.5, alphas, row):.4f}")

saver = figure_saver(args.save)
if saver:
    plt, save = saver
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    for a, prof in profiles.items():
        ax[0].plot(tau / 1e3, prof.fisher_per_pair, label=f"alpha={a}")
    ax[0].set(xlabel="delay (fs)", ylabel="F per pair (ps$^{-2}$)")
    ax[0].legend()
    for g, row in zip(gammas, table):
        ax[1].plot(alphas, row, label=f"gamma={g}")
    ax[1].axhline(1 / np.sqrt(2), color="grey", ls=":")
    ax[1].set(xlabel="visibility alpha", ylabel="s*")
    ax[1].legend()
    save(fig, "fisher_landscape.png")

"""Shared helper: figures are optional and only written when asked for."""
import argparse
from pathlib import Path


def parse_args(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--save", metavar="DIR", help="write figures (PNG) into this directory")
    return p.parse_args()


def figure_saver(save_dir):
    if not save_dir:
        return None
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(save_dir)
    out.mkdir(parents=True, exist_ok=True)

    def save(fig, name):
        fig.savefig(out / name, dpi=120, bbox_inches="tight")
        plt.close(fig)
        print(f"wrote {out / name}")

    return plt, save

"""Command-line entry point: ``hom-metrology <command> [flags]``.

Commands: scan, calibrate, sense, fisher, fringe, table. Every flag can also
be given in a ``key=value`` file passed with ``--config`` (the header of any
CSV written by this tool works too); explicit flags win over the file. The
default seed comes from ``HOM_METROLOGY_SEED`` when set.

Exit status: 0 success, 2 usage error, 3 input format error, 4 numerical
abort (clamped protocol, failed calibration or peak search).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import DriftConfig, ProtocolAbort, ProtocolConfig, run_protocol, sample_counts_many
from .calibration import CalibrationError, ScanRecord, calibrate
from .estimation import STATUS_BY_CODE, CoincidenceCounts
from .fisher import (
    FisherUndefinedError, PeakSearchError, dynamic_range, information_profile,
    peak_delay_table, peak_information_delay,
)
from .formats import (
    SCAN_COLUMNS, FormatError, RunManifest, atomic_write_text, parse_key_value_config,
    read_scan_csv, render_csv, scan_rows, write_csv, write_json, write_manifest_sidecar,
)
from .fringe import FringeParams, fringe_coincidence_probability, fringe_fisher_information_array, fringe_peak
from .model import ModelDomainError, ModelParams
from .rng import REPEATS, stream
from .table import MANIFEST_COLUMNS, REFERENCE_ROWS, TABLE_COLUMNS, manifest_rows, read_manifest, run_table
from .units import AS_PER_FS, as_to_nm, nm_to_as

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "HOM_METROLOGY_SEED"

# bookkeeping flags that are not echoed into output manifests
_NOT_CONFIG = {"command", "config", "func"}


class UsageError(Exception):
    pass


def _model_flags(p, alpha=0.63, gamma=0.87, sigma_ps=0.03):
    g = p.add_argument_group("model")
    g.add_argument("--alpha", type=float, default=alpha, help="visibility in [0, 1]")
    g.add_argument("--gamma", type=float, default=gamma, help="per-photon loss in [0, 1)")
    g.add_argument("--sigma-ps", type=float, default=sigma_ps, help="dip width (ps)")


def _grid_flags(p, tau_min_fs=-90.0, tau_max_fs=90.0, points=181):
    g = p.add_argument_group("delay grid")
    g.add_argument("--tau-min-fs", type=float, default=tau_min_fs)
    g.add_argument("--tau-max-fs", type=float, default=tau_max_fs)
    g.add_argument("--points", type=int, default=points)


def _grid(args):
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.points == 1:
        return np.array([args.tau_min_fs * AS_PER_FS])
    return np.linspace(args.tau_min_fs, args.tau_max_fs, args.points) * AS_PER_FS


def _params(args):
    return ModelParams(args.alpha, args.gamma, args.sigma_ps)


def _manifest(args):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG and k != "seed"}
    return RunManifest(args.command, config, getattr(args, "seed", None))


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# --- commands -------------------------------------------------------------

def cmd_scan(args):
    params = _params(args)
    taus = _grid(args)
    if args.pairs < 1:
        raise UsageError("--pairs must be >= 1")
    gens = [stream(args.seed, REPEATS, i, 0) for i in range(len(taus))]
    n1, n2 = sample_counts_many(taus / params.sigma_as, params, args.pairs, gens)
    scan = [ScanRecord(float(t), CoincidenceCounts(int(a), int(b))) for t, a, b in zip(taus, n1, n2)]
    manifest = _manifest(args)
    manifest.start()
    write_csv(args.out, SCAN_COLUMNS, scan_rows(scan, params, args.pairs), manifest)
    manifest.finish()
    manifest.outputs = [str(args.out)]
    write_manifest_sidecar(args.out, manifest)
    return EXIT_OK


def cmd_calibrate(args):
    scan = read_scan_csv(args.scan)
    far = read_scan_csv(args.far)
    # several far windows are averaged, so N stays per window like the scan points
    per = len(far)
    far_counts = CoincidenceCounts(sum(r.counts.n1 for r in far) / per,
                                   sum(r.counts.n2 for r in far) / per)
    record = calibrate(far_counts, scan, args.window_fs, args.alpha_smoothing, args.s_max)
    out = record.to_dict()
    out["far_windows"] = per
    manifest = _manifest(args)
    manifest.start()
    write_json(args.out, {"manifest": manifest.deterministic_dict(), "calibration": out,
                          "exclusions": {"clamped_in_window": record.n_excluded}})
    manifest.finish()
    manifest.outputs = [str(args.out)]
    write_manifest_sidecar(args.out, manifest)
    return EXIT_OK


def _load_calibration(path):
    try:
        payload = json.loads(Path(path).read_text())
        cal = payload["calibration"]
        return ModelParams(cal["alpha_hat"], cal["gamma_hat"], cal["sigma_hat_ps"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FormatError(path, None, f"not a calibration JSON: {exc}") from exc


def cmd_sense(args):
    truth = _params(args)
    est = _load_calibration(args.calibration) if args.calibration else truth
    if args.delta_as is not None and args.delta_nm is not None:
        raise UsageError("give only one of --delta-as / --delta-nm")
    if args.delta_as is not None:
        delta_as = args.delta_as
    else:
        delta_nm = args.delta_nm if args.delta_nm is not None else 10.0
        # sign convention of the measurement table: +10 nm displacement is -33.3 as
        delta_as = -nm_to_as(delta_nm, args.refractive_index)
    drift = DriftConfig.random_walk(args.drift_fs) if args.drift_fs > 0 else DriftConfig()
    protocol = ProtocolConfig(args.pairs_per_window, args.windows, delta_as, seed=args.seed)
    res = run_protocol(truth, protocol, drift, estimator_params=est, n_jobs=args.jobs)

    n = args.refractive_index
    edges = np.histogram_bin_edges(np.concatenate([res.tau_in_hat_as[res.valid],
                                                   res.tau_out_hat_as[res.valid]]), bins=args.hist_bins)
    h_in, _ = np.histogram(res.tau_in_hat_as[res.valid], bins=edges)
    h_out, _ = np.histogram(res.tau_out_hat_as[res.valid], bins=edges)
    summary = {
        "expected_as": delta_as,
        "measured_as": res.delta_tau_hat_as,
        "accuracy_as": res.accuracy_as,
        "precision_as": res.pooled_precision_as,
        "per_window_precision_as": res.per_window_precision_as,
        "empirical_precision_as": res.empirical_precision_as,
        "expected_nm": as_to_nm(delta_as, n),
        "measured_nm": as_to_nm(res.delta_tau_hat_as, n),
        "accuracy_nm": as_to_nm(res.accuracy_as, n),
        "precision_nm": as_to_nm(res.pooled_precision_as, n),
        "operating_delay_as": res.operating_delay_as,
        "m_windows": args.windows,
        "m_valid": res.m_valid,
        "clamp_counts": res.clamp_counts,
        "pairs_per_window": args.pairs_per_window,
        "total_pairs": 2 * args.windows * args.pairs_per_window,
        "estimator_params": {"alpha": est.alpha, "gamma": est.gamma, "sigma_ps": est.sigma_ps},
        "histogram": {"bin_edges_as": edges, "counts_in": h_in, "counts_out": h_out},
    }
    manifest = _manifest(args)
    manifest.start()
    write_json(args.out_json, {"manifest": manifest.deterministic_dict(), "result": summary})
    outputs = [str(args.out_json)]
    if args.out_csv:
        write_csv(args.out_csv, WINDOW_COLUMNS, _window_rows(res), manifest)
        outputs.append(str(args.out_csv))
    manifest.finish()
    manifest.outputs = outputs
    write_manifest_sidecar(args.out_json, manifest)
    return EXIT_OK


WINDOW_COLUMNS = (
    "period", "drift_as", "tau_in_hat_as", "tau_out_hat_as", "var_in_as2", "var_out_as2",
    "status_in", "status_out", "delta_tau_hat_as", "cum_tau_in_as", "cum_tau_out_as",
    "cum_delta_tau_as",
)


def _window_rows(res):
    j = 0
    for p in range(len(res.valid)):
        ok = bool(res.valid[p])
        row = [p, res.drift_as[p], res.tau_in_hat_as[p], res.tau_out_hat_as[p],
               res.var_in_as2[p], res.var_out_as2[p],
               STATUS_BY_CODE[res.status_in[p]].value, STATUS_BY_CODE[res.status_out[p]].value]
        if ok:
            row += [res.delta_tau_as[j], res.cumulative_in_as[j], res.cumulative_out_as[j],
                    res.cumulative_delta_as[j]]
            j += 1
        else:
            row += [None] * 4
        yield row


def cmd_fisher(args):
    params = _params(args)
    taus = _grid(args)
    prof = information_profile(params, taus)
    s_star = peak_information_delay(params)
    rng_ = dynamic_range(params, args.threshold) if params.alpha > 0 else None
    manifest = _manifest(args)
    header = manifest.header_items() + [
        ("s_star", s_star),
        ("peak_delay_as", s_star * params.sigma_as),
        ("peak_fisher_per_pair", _peak_value(params, s_star)),
        ("dynamic_range_as", f"{rng_.lower_as!r}:{rng_.upper_as!r}" if rng_ else ""),
        ("units.fisher_per_pair", "ps^-2"),
    ]
    rows = []
    for t, f, ok in zip(prof.delays_as, prof.fisher_per_pair, prof.defined):
        total = f * args.pairs if (ok and args.pairs) else None
        rows.append((t, t / params.sigma_as, f if ok else None, total, ok))
    manifest.start()
    atomic_write_text(args.out, render_csv(
        ("tau_as", "s", "fisher_per_pair", "total_fisher", "defined"), rows, header))
    outputs = [str(args.out)]
    if args.ystar_out:
        alphas = np.linspace(args.ystar_alpha_min, 1.0, args.ystar_points)
        gammas = [float(g) for g in args.ystar_gammas.split(",")]
        table = peak_delay_table(alphas, gammas)
        cols = ["alpha"] + [f"s_star_gamma_{g:g}" for g in gammas]
        write_csv(args.ystar_out, cols, [[a, *table[:, j]] for j, a in enumerate(alphas)], manifest)
        outputs.append(str(args.ystar_out))
    manifest.finish()
    manifest.outputs = outputs
    write_manifest_sidecar(args.out, manifest)
    return EXIT_OK


def _peak_value(params, s_star):
    from .fisher import fisher_information
    return fisher_information(max(s_star, 1e-8), params)


def cmd_fringe(args):
    params = ModelParams(args.alpha, 0.0, args.sigma_ps)
    taus = _grid(args)
    thetas = [float(t) for t in args.theta_deg.split(",")]
    hom = information_profile(params, taus)
    manifest = _manifest(args)
    header = manifest.header_items() + [("units.fisher_per_pair", "ps^-2")]
    peaks = {}
    for th in thetas:
        pk = fringe_peak(params, FringeParams.from_degrees(th, args.nu_thz))
        peaks[th] = pk
        header += [(f"peak_tau_as.theta_{th:g}", pk.tau_as), (f"peak_fisher.theta_{th:g}", pk.fisher)]
    base = fringe_peak(params, FringeParams(0.0, args.nu_thz)).fisher
    for th in thetas:
        header.append((f"peak_ratio_vs_theta_0.theta_{th:g}", peaks[th].fisher / base))
    rows = []
    for th in thetas:
        fr = FringeParams.from_degrees(th, args.nu_thz)
        pc = np.atleast_1d(fringe_coincidence_probability(taus, params, fr))
        f = np.atleast_1d(fringe_fisher_information_array(taus, params, fr))
        for t, p, v, h, hd in zip(taus, pc, f, hom.fisher_per_pair, hom.defined):
            ok = bool(np.isfinite(v))
            rows.append((th, t, p, v if ok else None, h if hd else None, ok))
    manifest.start()
    atomic_write_text(args.out, render_csv(
        ("theta_deg", "tau_as", "p_c", "fisher_per_pair", "hom_fisher_per_pair", "defined"),
        rows, header))
    manifest.finish()
    manifest.outputs = [str(args.out)]
    write_manifest_sidecar(args.out, manifest)
    return EXIT_OK


def cmd_table(args):
    if args.write_default_manifest:
        write_csv(args.write_default_manifest, MANIFEST_COLUMNS, manifest_rows())
        return EXIT_OK
    rows = read_manifest(args.manifest) if args.manifest else list(REFERENCE_ROWS)
    if args.seed:
        rows = [r.__class__(**{**r.__dict__, "seed": r.seed + args.seed}) for r in rows]
    records, avg = run_table(rows, args.budget_scale, args.windows, args.drift_fs, args.jobs)
    manifest = _manifest(args)
    manifest.start()
    table_rows = [[r.get(c) for c in TABLE_COLUMNS] for r in records + [avg]]
    write_csv(args.out, TABLE_COLUMNS, table_rows, manifest)
    manifest.finish()
    manifest.outputs = [str(args.out)]
    write_manifest_sidecar(args.out, manifest)
    failed = [r for r in records if r["status"] != "ok"]
    for r in failed:
        print(f"row {r['label']!r} (seed {r['seed']}): {r['status']}", file=sys.stderr)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="hom-metrology", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key=value file mirroring the flags")
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("scan", help="simulate a dip scan")
    common(p)
    _model_flags(p, alpha=0.92, gamma=0.87, sigma_ps=0.06)
    _grid_flags(p, -150.0, 150.0, 61)
    p.add_argument("--pairs", type=int, default=372_000, help="incident pairs per scan point")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("calibrate", help="estimate gamma, N, alpha, sigma from scan files")
    common(p, seed=False)
    p.add_argument("--scan", required=True, help="dip scan CSV")
    p.add_argument("--far", required=True, help="far-from-dip CSV (scan format)")
    p.add_argument("--window-fs", type=float, default=7.0)
    p.add_argument("--alpha-smoothing", type=int, default=5)
    p.add_argument("--s-max", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sense", help="run the in/out differential protocol")
    common(p)
    _model_flags(p)
    p.add_argument("--calibration", help="calibration JSON used as the estimator's parameters")
    p.add_argument("--delta-nm", type=float, default=None, help="sample displacement (nm)")
    p.add_argument("--delta-as", type=float, default=None, help="true differential delay (as)")
    p.add_argument("--refractive-index", type=float, default=1.0)
    p.add_argument("--pairs-per-window", type=int, default=20_000)
    p.add_argument("--windows", type=int, default=10_000, help="number of in/out periods")
    p.add_argument("--drift-fs", type=float, default=2.0)
    p.add_argument("--hist-bins", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-json", required=True)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("fisher", help="Fisher information profile and s* table")
    common(p, seed=False)
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--pairs", type=float, default=None, help="also emit N * F")
    p.add_argument("--threshold", type=float, default=0.1, help="dynamic-range threshold fraction")
    p.add_argument("--ystar-out", help="write s* against alpha here")
    p.add_argument("--ystar-gammas", default="0,0.5,0.9")
    p.add_argument("--ystar-points", type=int, default=100)
    p.add_argument("--ystar-alpha-min", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("fringe", help="Fisher information with phase fringes")
    common(p, seed=False)
    p.add_argument("--alpha", type=float, default=0.63)
    p.add_argument("--sigma-ps", type=float, default=0.033)
    p.add_argument("--nu-thz", type=float, default=371.0)
    p.add_argument("--theta-deg", default="0,45", help="comma-separated angles")
    _grid_flags(p, -100.0, 100.0, 20001)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fringe)

    p = sub.add_parser("table", help="synthetic re-run of the measurement table")
    common(p)
    p.add_argument("--manifest", help="row manifest CSV (default: built-in rows)")
    p.add_argument("--write-default-manifest", metavar="PATH", help="write the built-in manifest and exit")
    p.add_argument("--budget-scale", type=float, default=1e-3)
    p.add_argument("--windows", type=int, default=10_000)
    p.add_argument("--drift-fs", type=float, default=2.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)
    return parser, sub


def _apply_config(parser, sub, argv):
    """Parse twice: once to find the command and config, then with file defaults."""
    args = parser.parse_args(argv)
    subparser = sub.choices[args.command]
    defaults = {}
    if getattr(args, "config", None):
        try:
            raw = parse_key_value_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        actions = {a.dest: a for a in subparser._actions}
        for key, value in raw.items():
            if key in _NOT_CONFIG or key not in actions:
                if key in ("s_star", "peak_delay_as", "peak_fisher_per_pair", "dynamic_range_as") \
                        or key.startswith(("units.", "peak_")):
                    continue
                raise UsageError(f"{args.config}: unknown key {key!r} for '{args.command}'")
            act = actions[key]
            if value == "":
                defaults[key] = None
                continue
            try:
                defaults[key] = act.type(value) if act.type else value
            except ValueError:
                raise UsageError(f"{args.config}: bad value for {key!r}: {value!r}") from None
    if "seed" in {a.dest for a in subparser._actions} and "seed" not in defaults:
        defaults["seed"] = _default_seed()
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser, sub = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        # required flags may come from the config file
        for p in sub.choices.values():
            for a in p._actions:
                if a.dest in ("out", "out_json", "scan", "far"):
                    a.required = False
        args = _apply_config(parser, sub, argv)
        missing = [flag for flag, dest in (("--out", "out"), ("--out-json", "out_json"),
                                           ("--scan", "scan"), ("--far", "far"))
                   if hasattr(args, dest) and getattr(args, dest) is None
                   and not (args.command == "table" and args.write_default_manifest)]
        if missing:
            raise UsageError(f"missing required flag(s): {', '.join(missing)}")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, ModelDomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ProtocolAbort, CalibrationError, PeakSearchError, FisherUndefinedError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

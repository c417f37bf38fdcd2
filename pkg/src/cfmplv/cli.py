"""Command-line entry point: ``cfmplv <subcommand> [options]``.

Options can also come from ``--config file.json``; explicit flags win over
the file, and the file wins over built-in defaults. Every artifact written
carries the resolved configuration, either inline (JSON outputs) or in a
``<file>.json`` sidecar (CSV and binary outputs).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .errors import CfmError
from .experiment import DEFAULT_LEVELS, NOISE_KINDS, SyntheticConfig, run_experiment, simulate_base
from .gibbs import ChainConfig, PosteriorChain, run_chain
from .phase_data import CsvLayout, PhaseDataset, TimeGrid, load_dataset, save_dataset
from .plv import naive_plv, posterior_plv, summarize, summarize_point
from .priors import Hyperparams
from .report import build_report
from .signal_phase import BandSpec, RawSignal, extract
from .spline_basis import SplineConfig, evaluate_grid, make_config

log = logging.getLogger("cfmplv")


class UsageError(Exception):
    """Bad flag values discovered after parsing; exits with status 2."""


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _write_sidecar(path, config):
    with open(str(path) + ".json", "w") as fh:
        json.dump(config, fh, indent=2)


def _resolve(args, section, key, default, flag=None):
    value = getattr(args, flag or key, None)
    if value is not None:
        return value
    return args.file_config.get(section, {}).get(key, default)


def _threads(args):
    value = getattr(args, "threads", None)
    if value is None:
        value = args.file_config.get("chain", {}).get("threads")
    if value is None:
        value = os.environ.get("CFM_THREADS", 1)
    try:
        value = int(value)
    except ValueError:
        raise UsageError(f"threads must be an integer, got {value!r}") from None
    if value < 1:
        raise UsageError(f"threads must be positive, got {value}")
    return value


def chain_config(args):
    return ChainConfig(
        burnin=int(_resolve(args, "chain", "burnin", 1000)),
        samples=int(_resolve(args, "chain", "samples", 1000)),
        thin=int(_resolve(args, "chain", "thin", 1)),
        seed=int(_resolve(args, "chain", "seed", 0)),
        threads=_threads(args),
    )


def hyperparams(args):
    return Hyperparams.from_dict({**Hyperparams().to_dict(), **args.file_config.get("hyper", {})})


def spline_config(args, domain=(0.0, 1.0)):
    section = dict(args.file_config.get("basis", {}))
    if getattr(args, "degree", None) is not None:
        section["degree"] = args.degree
    if getattr(args, "knots", None) is not None:
        section.pop("knots", None)
        section["n_knots"] = args.knots
    return SplineConfig.from_dict(section, domain)


def _add_chain_flags(p):
    g = p.add_argument_group("sampler")
    g.add_argument("--burnin", type=int, help="burn-in sweeps (default 1000)")
    g.add_argument("--samples", type=int, help="post-burn-in sweeps (default 1000)")
    g.add_argument("--thin", type=int, help="keep every n-th draw (default 1)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--threads", type=int, help="worker count; falls back to $CFM_THREADS")


def _add_basis_flags(p):
    g = p.add_argument_group("basis")
    g.add_argument("--degree", type=int, help="spline degree (default 3)")
    g.add_argument("--knots", type=int, help="number of interior knots (default 10)")


def _synthetic_config(args):
    section = args.file_config.get("simulate", {})
    defaults = SyntheticConfig()

    def pick(key, flag=None):
        v = getattr(args, flag or key, None)
        return section.get(key, getattr(defaults, key)) if v is None else v

    beta = pick("beta")
    if isinstance(beta, str):
        beta = _floats(beta)
    return SyntheticConfig(
        n=int(pick("n")), p=int(pick("p")), T=int(pick("T")),
        degree=int(pick("degree")), n_knots=int(pick("n_knots", "knots")),
        beta=tuple(float(b) for b in beta), tau2=float(pick("tau2")),
        gamma2=float(pick("gamma2")), sigma2=float(pick("sigma2")),
        seed=int(pick("seed", "sim_seed")),
    )


def _add_synthetic_flags(p, seed_flag):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--n", type=int, help="subjects (default 10)")
    g.add_argument("--p", type=int, help="channels (default 10)")
    g.add_argument("--T", type=int, help="time points (default 100)")
    g.add_argument("--beta", help="comma-separated fixed basis means (default pi,8pi)")
    g.add_argument("--tau2", type=float, help="subject-level spread per basis function")
    g.add_argument("--gamma2", type=float, help="channel-level spread per basis function")
    g.add_argument("--sigma2", type=float, help="measurement noise variance")
    g.add_argument(seed_flag, dest="sim_seed", type=int, help="generator seed")


def cmd_simulate(args):
    cfg = _synthetic_config(args)
    data, basis, truth = simulate_base(cfg)
    save_dataset(data, args.out)
    config = {"command": "simulate", "synthetic": {**cfg.__dict__, "beta": list(cfg.beta)},
              "basis": basis.config.to_dict(), "shape": [data.n, data.p, data.T]}
    _write_sidecar(args.out, config)
    if args.truth:
        with open(args.truth, "w") as fh:
            json.dump({"config": config, **truth.to_dict()}, fh)
    log.info("wrote %s (n=%d, p=%d, T=%d)", args.out, data.n, data.p, data.T)
    return 0


def cmd_extract_phase(args):
    band = BandSpec.parse(args.band)
    subjects = []
    for path in args.input:
        samples = np.loadtxt(path, delimiter=",", ndmin=2)
        subjects.append(extract(RawSignal(samples, args.fs), band, args.take))
    shapes = {s.values.shape for s in subjects}
    if len(shapes) != 1:
        raise UsageError(f"inputs disagree in shape: {sorted(shapes)}")
    values = np.concatenate([s.values for s in subjects], axis=0)
    data = PhaseDataset(values, subjects[0].grid, subjects[0].meta)
    save_dataset(data, args.out)
    _write_sidecar(args.out, {"command": "extract-phase", "inputs": args.input, "fs": args.fs,
                              "band": [band.low, band.high], "take": args.take,
                              "meta": data.meta})
    return 0


def _load(path, wrap_on_load=False):
    return load_dataset(path, CsvLayout(wrap_on_load=wrap_on_load))


def cmd_fit(args):
    data = _load(args.data, args.wrap_on_load)
    spline = spline_config(args, data.grid.domain)
    basis = evaluate_grid(spline, data.grid)
    cc = chain_config(args)
    chain = run_chain(data, basis, hyperparams(args), cc)
    chain.save(args.out, extra={"command": "fit", "data": args.data})
    log.info("wrote %s (%d draws, posterior mean sigma2 %.4g)", args.out, chain.n_draws,
             chain.sigma2.mean())
    return 0


def cmd_plv(args):
    threshold = float(_resolve(args, "plv", "threshold", 0.7))
    cut = float(_resolve(args, "plv", "cut", 0.5))
    if args.chain:
        chain = PosteriorChain.load(args.chain)
        grid = TimeGrid(chain.grid_points)
        basis = evaluate_grid(chain.basis_config, grid)
        summary = summarize(posterior_plv(chain, basis), threshold, cut)
        config = {"command": "plv", "method": "cfm", "chain": args.chain,
                  "chain_config": chain.sidecar()}
    else:
        data = _load(args.data, args.wrap_on_load)
        summary = summarize_point(naive_plv(data)[1], threshold)
        config = {"command": "plv", "method": "direct", "data": args.data}
    config.update(threshold=threshold, cut=cut)
    if args.out_csv:
        summary.write_csv(args.out_csv)
        _write_sidecar(args.out_csv, config)
    if args.out_json:
        summary.write_json(args.out_json, config)
    if not args.out_csv and not args.out_json:
        json.dump({"config": config, "pairs": summary.records()}, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def cmd_experiment(args):
    threshold = float(_resolve(args, "experiment", "threshold", 0.7))
    cut = float(_resolve(args, "experiment", "cut", 0.5))
    kinds = args.noise or args.file_config.get("experiment", {}).get("noise") or list(NOISE_KINDS)
    if isinstance(kinds, str):
        kinds = [kinds]
    levels = args.levels
    if levels is None:
        levels = args.file_config.get("experiment", {}).get("levels")
    if isinstance(levels, str):
        levels = _floats(levels)
    noise = {k: (levels if levels is not None else DEFAULT_LEVELS[k]) for k in kinds}
    cc = chain_config(args)
    seed = int(_resolve(args, "experiment", "seed", cc.seed))
    base = _load(args.data, args.wrap_on_load) if args.data else None
    spline = None
    if base is not None or args.degree is not None or args.knots is not None \
            or "basis" in args.file_config:
        domain = base.grid.domain if base is not None else (0.0, 1.0)
        spline = spline_config(args, domain)
    report = run_experiment(base=base, synthetic=None if base else _synthetic_config(args),
                            noise=noise, spline=spline, hyper=hyperparams(args),
                            chain_config=cc, threshold=threshold, cut=cut, seed=seed)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    report.write_json(report_path)
    report.write_tables(args.out)
    for name in ("curves.csv", "calibration.csv", "table.csv"):
        _write_sidecar(os.path.join(args.out, name), report.config)
    build_report(report_path, args.out, figures=not args.no_figures)
    log.info("wrote experiment outputs to %s", args.out)
    return 0


def cmd_report(args):
    for path in build_report(args.report, args.out, figures=not args.no_figures):
        print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfmplv", description="Model-based phase locking values from circular phase data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of default options")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a synthetic phase dataset")
    _add_synthetic_flags(p, "--seed")
    _add_basis_flags(p)
    p.add_argument("--out", required=True, help="dataset path (.csv or .cfm)")
    p.add_argument("--truth", help="write the generative truth as JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract-phase", help="band-pass + Hilbert phase of raw signals")
    p.add_argument("--input", nargs="+", required=True,
                   help="CSV files (rows = channels, columns = samples), one per subject")
    p.add_argument("--fs", type=float, required=True, help="sampling rate in Hz")
    p.add_argument("--band", required=True, help="pass band as low:high in Hz")
    p.add_argument("--take", type=int, help="keep only the first T samples")
    p.add_argument("--out", required=True, help="dataset path (.csv or .cfm)")
    p.set_defaults(func=cmd_extract_phase)

    p = sub.add_parser("fit", help="run the Gibbs sampler on a phase dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--wrap-on-load", action="store_true", help="reduce out-of-range phases mod 2pi")
    p.add_argument("--out", required=True, help="chain file; a .json sidecar is written next to it")
    _add_chain_flags(p)
    _add_basis_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plv", help="PLV summaries and edge list")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--chain", help="fitted chain (model-based PLV)")
    src.add_argument("--data", help="phase dataset (naive PLV)")
    p.add_argument("--wrap-on-load", action="store_true")
    p.add_argument("--threshold", type=float, help="PLV threshold (default 0.7)")
    p.add_argument("--cut", type=float, help="edge when P(PLV >= threshold) >= cut (default 0.5)")
    p.add_argument("--out-csv", help="edge list CSV")
    p.add_argument("--out-json", help="full summaries as JSON")
    p.set_defaults(func=cmd_plv)

    p = sub.add_parser("experiment", help="noise-injection robustness and calibration study")
    p.add_argument("--data", help="clean base dataset; synthetic data is generated if omitted")
    p.add_argument("--wrap-on-load", action="store_true")
    p.add_argument("--noise", action="append", choices=NOISE_KINDS,
                   help="noise kind, repeatable (default both)")
    p.add_argument("--levels", type=_floats, help="comma-separated noise levels")
    p.add_argument("--threshold", type=float)
    p.add_argument("--cut", type=float)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    _add_chain_flags(p)
    _add_basis_flags(p)
    _add_synthetic_flags(p, "--sim-seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="figure data, gnuplot scripts and PNGs from report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args.file_config = {}
    try:
        if args.config:
            with open(args.config) as fh:
                args.file_config = json.load(fh)
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CfmError, ValueError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

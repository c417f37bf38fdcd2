"""Noise-robustness and calibration experiments.

A clean dataset is corrupted with Gaussian or uniform phase noise at a
series of levels. Naive and model-based PLV estimates from each noisy copy
are scored against a reference ("grand truth") PLV by absolute error,
threshold classification (TPR, F1) and, for the model, calibration of the
exceedance probabilities.
"""

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .gibbs import ChainConfig, run_chain
from .phase_data import PhaseDataset, TimeGrid, simulate_dataset, validate, wrap
from .plv import naive_plv, posterior_plv, summarize
from .priors import Hyperparams
from .spline_basis import SplineConfig, evaluate_grid, make_config

log = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian", "uniform")
DEFAULT_LEVELS = {
    "gaussian": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
    "uniform": (0.2, 0.4, 0.6, 0.8, 1.0, 1.2),
}
CALIBRATION_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    level: float

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not self.level > 0:
            raise ValueError(f"noise level must be positive, got {self.level}")


def inject_noise(dataset, spec, seed=None):
    """Add i.i.d. noise to every observation and wrap back into ``[0, 2*pi)``."""
    rng = np.random.default_rng(seed)
    shape = dataset.values.shape
    if spec.kind == "gaussian":
        eps = rng.normal(0.0, spec.level, shape)
    else:
        eps = rng.uniform(-spec.level, spec.level, shape)
    return PhaseDataset(wrap(dataset.values + eps), dataset.grid, dict(dataset.meta))


def upper_pairs(matrix):
    m = np.asarray(matrix)
    k, kp = np.triu_indices(m.shape[0], 1)
    return m[k, kp]


def error_curves(truth_plv, estimates):
    """Mean and 5%/95% quantiles of ``|estimate - truth|`` over all pairs.

    ``estimates`` maps a noise level to a PLV matrix.
    """
    truth = upper_pairs(truth_plv)
    rows = []
    for level, est in estimates.items():
        err = np.abs(upper_pairs(est) - truth)
        q05, q95 = np.quantile(err, [0.05, 0.95], method="linear")
        rows.append({"level": float(level), "mean": float(err.mean()),
                     "q05": float(q05), "q95": float(q95), "n_pairs": int(err.size)})
    return rows


@dataclass(frozen=True)
class ClassificationMetrics:
    tpr: object   # float, or None when there are no true positives to find
    f1: object    # float, or None when TP + FP + FN == 0
    tp: int
    fp: int
    fn: int
    tn: int


def classification_metrics(truth_plv, decisions, threshold=0.7):
    """TPR and F1 of edge decisions against ``truth_plv >= threshold``.

    Both arguments are per-pair vectors (or full matrices, reduced to their
    upper triangles).
    """
    truth = np.asarray(truth_plv)
    dec = np.asarray(decisions, dtype=bool)
    if truth.ndim == 2:
        truth, dec = upper_pairs(truth), upper_pairs(dec)
    actual = truth >= threshold
    tp = int(np.sum(actual & dec))
    fp = int(np.sum(~actual & dec))
    fn = int(np.sum(actual & ~dec))
    tn = int(np.sum(~actual & ~dec))
    tpr = tp / (tp + fn) if tp + fn else None
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else None
    return ClassificationMetrics(tpr, f1, tp, fp, fn, tn)


def calibration_table(exceedance, truth_plv, threshold=0.7, edges=CALIBRATION_EDGES):
    """Mean exceedance probability and empirical exceedance frequency per bin.

    Bins are half-open ``[lo, hi)`` except the last, which is closed.
    Empty bins are kept with ``count = 0`` and ``None`` statistics.
    """
    p = np.asarray(exceedance, dtype=float)
    truth = np.asarray(truth_plv, dtype=float)
    if truth.ndim == 2:
        truth = upper_pairs(truth)
    hit = truth >= threshold
    idx = np.clip(np.searchsorted(edges, p, side="right") - 1, 0, len(edges) - 2)
    rows = []
    for b in range(len(edges) - 1):
        sel = idx == b
        count = int(sel.sum())
        rows.append({
            "bin_low": edges[b], "bin_high": edges[b + 1], "count": count,
            "mean_p": float(p[sel].mean()) if count else None,
            "empirical_freq": float(hit[sel].mean()) if count else None,
        })
    return rows


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings for a synthetic base dataset.

    ``tau2`` / ``gamma2`` give the subject- and channel-level spread of each
    basis function at its largest value on the grid, so every function
    contributes on the same phase scale regardless of its magnitude.
    """

    n: int = 10
    p: int = 10
    T: int = 100
    degree: int = 3
    n_knots: int = 10
    beta: tuple = (np.pi, 8 * np.pi)
    tau2: float = 0.02
    gamma2: float = 0.4
    sigma2: float = 0.01
    seed: int = 0

    def variance_scales(self, basis_values):
        peak2 = np.max(basis_values ** 2, axis=1)
        return self.tau2 / peak2, self.gamma2 / peak2

    def beta_vector(self, L):
        beta = np.zeros(L)
        beta[:len(self.beta)] = self.beta
        return beta


def simulate_base(cfg):
    """Base dataset, basis and generative truth for :class:`SyntheticConfig`."""
    spline = make_config(cfg.degree, cfg.n_knots)
    basis = evaluate_grid(spline, TimeGrid.uniform(cfg.T))
    tau2, gamma2 = cfg.variance_scales(basis.values)
    data, truth = simulate_dataset(cfg.n, cfg.p, basis, seed=cfg.seed,
                                   beta=cfg.beta_vector(basis.L), tau2=tau2,
                                   gamma2=gamma2, sigma2=cfg.sigma2)
    return data, basis, truth


@dataclass
class ExperimentReport:
    config: dict
    truth: dict
    cells: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def read_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        return cls(d["config"], d["truth"], d["cells"])

    def write_tables(self, outdir):
        """``curves.csv``, ``calibration.csv`` and the TPR/F1 ``table.csv``."""
        with open(f"{outdir}/curves.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "level", "method", "mean_abs_error", "q05", "q95"])
            for c in self.cells:
                for method in ("cfm", "direct"):
                    e = c[method]["error"]
                    w.writerow([c["kind"], c["level"], method, e["mean"], e["q05"], e["q95"]])
        with open(f"{outdir}/calibration.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "level", "bin_low", "bin_high", "count", "mean_p", "empirical_freq"])
            for c in self.cells:
                for r in c["calibration"]:
                    w.writerow([c["kind"], c["level"], r["bin_low"], r["bin_high"], r["count"],
                                _blank(r["mean_p"]), _blank(r["empirical_freq"])])
            for kind, rows in self.pooled_calibration().items():
                for r in rows:
                    w.writerow([kind, "all", r["bin_low"], r["bin_high"], r["count"],
                                _blank(r["mean_p"]), _blank(r["empirical_freq"])])
        with open(f"{outdir}/table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "level", "tpr_cfm", "tpr_direct", "f1_cfm", "f1_direct"])
            for c in self.cells:
                w.writerow([c["kind"], c["level"],
                            _pct(c["cfm"]["tpr"]), _pct(c["direct"]["tpr"]),
                            _pct(c["cfm"]["f1"]), _pct(c["direct"]["f1"])])

    def pooled_calibration(self):
        """Calibration per noise kind over all levels together."""
        out = {}
        for kind in dict.fromkeys(c["kind"] for c in self.cells):
            cells = [c for c in self.cells if c["kind"] == kind]
            p = np.concatenate([c["p_exceed"] for c in cells])
            truth = np.concatenate([upper_pairs(np.asarray(self.truth["plv"]))] * len(cells))
            out[kind] = calibration_table(p, truth, self.config["threshold"])
        return out


def _blank(x):
    return "" if x is None else x


def _pct(x):
    return "NA" if x is None else f"{100 * x:.1f}"


def _cell_seed(master, kind, index):
    return int(np.random.SeedSequence([master, NOISE_KINDS.index(kind), index]).generate_state(1)[0])


def _method_block(truth_plv, estimate, decisions, threshold):
    m = classification_metrics(truth_plv, decisions, threshold)
    return {"error": error_curves(truth_plv, {0: estimate})[0],
            "tpr": m.tpr, "f1": m.f1, "counts": {"tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn},
            "plv": upper_pairs(estimate).tolist()}


def fit_plv(data, basis, hyper, chain_config, threshold, cut):
    chain = run_chain(data, basis, hyper, chain_config)
    draws = posterior_plv(chain, basis)
    return summarize(draws, threshold, cut), chain


def run_experiment(base=None, synthetic=None, noise=None, spline=None,
                   hyper=Hyperparams(), chain_config=ChainConfig(),
                   threshold=0.7, cut=0.5, seed=0):
    """Run the full noise-injection protocol.

    Independent (kind, level) cells run in ``chain_config.threads`` worker
    processes; each cell has its own seed, so results do not depend on the
    worker count.

    Parameters
    ----------
    base : PhaseDataset, optional
        Observed data. Its grand truth is the model-based PLV fitted to the
        clean data.
    synthetic : SyntheticConfig, optional
        Used when ``base`` is None. The grand truth is then the PLV of the
        generative clean phases.
    noise : dict
        Maps a noise kind to its list of levels. Defaults to the standard
        Gaussian and uniform grids.
    spline : SplineConfig, optional
        Basis for the fitted model; defaults to the synthetic generator's
        basis or a cubic basis with 10 knots.
    """
    noise = DEFAULT_LEVELS if noise is None else noise
    config = {"threshold": threshold, "cut": cut, "seed": seed, "hyper": hyper.to_dict(),
              "chain": chain_config.to_dict(),
              "noise": {k: [float(x) for x in v] for k, v in noise.items()}}

    if base is None:
        synthetic = synthetic or SyntheticConfig()
        base, gen_basis, gen_truth = simulate_base(synthetic)
        config["synthetic"] = asdict(synthetic)
        spline = spline or gen_basis.config
    else:
        validate(base)
        spline = spline or make_config(3, 10, base.grid.domain)
    basis = evaluate_grid(spline, base.grid)
    config["basis"] = spline.to_dict()

    _, naive_clean = naive_plv(base)
    clean_summary, _ = fit_plv(base, basis, hyper, chain_config, threshold, cut)
    cfm_clean = clean_summary.matrix("point")
    if synthetic is not None:
        truth_plv = naive_plv(PhaseDataset(gen_truth.clean_phase, base.grid))[1]
        source = "generative"
    else:
        truth_plv = cfm_clean
        source = "model"
    truth_pairs = upper_pairs(truth_plv)
    truth = {"source": source, "plv": truth_plv.tolist(), "naive_clean": naive_clean.tolist(),
             "cfm_clean": cfm_clean.tolist(), "n_pairs": int(truth_pairs.size),
             "n_positive": int(np.sum(truth_pairs >= threshold))}
    report = ExperimentReport(config, truth)

    jobs = [(kind, i, float(level)) for kind, levels in noise.items()
            for i, level in enumerate(levels)]
    args = [(base, basis, hyper, chain_config, truth_plv, threshold, cut,
             _cell_seed(seed, kind, i), kind, level) for kind, i, level in jobs]
    workers = min(chain_config.threads, len(args))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            report.cells.extend(pool.map(_run_cell, args))
    else:
        report.cells.extend(map(_run_cell, args))
    return report


def _run_cell(args):
    base, basis, hyper, chain_config, truth_plv, threshold, cut, cell_seed, kind, level = args
    noisy = inject_noise(base, NoiseSpec(kind, level), cell_seed)
    _, direct = naive_plv(noisy)
    cc = ChainConfig(chain_config.burnin, chain_config.samples, chain_config.thin,
                     cell_seed, chain_config.threads)
    summary, _ = fit_plv(noisy, basis, hyper, cc, threshold, cut)
    cfm = summary.matrix("point")
    cell = {
        "kind": kind, "level": level, "seed": cell_seed,
        "direct": _method_block(truth_plv, direct, direct >= threshold, threshold),
        "cfm": _method_block(truth_plv, cfm, summary.matrix("edge").astype(bool), threshold),
        "p_exceed": summary.p_exceed.tolist(),
        "calibration": calibration_table(summary.p_exceed, upper_pairs(truth_plv), threshold),
    }
    log.info("%s b=%g: MAE cfm=%.4f direct=%.4f", kind, level,
             cell["cfm"]["error"]["mean"], cell["direct"]["error"]["mean"])
    return cell

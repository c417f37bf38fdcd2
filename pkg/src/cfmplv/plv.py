"""Phase locking values: naive, posterior, and posterior summaries."""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyChain
from .phase_data import TWO_PI


def _plv_from_phase(theta):
    """PLV matrices for phases ``theta[..., k, j]``; returns ``[..., k, k']``."""
    z = np.exp(1j * theta)
    T = theta.shape[-1]
    m = np.abs(z @ np.conj(np.swapaxes(z, -1, -2))) / T
    # enforce exact symmetry and the unit diagonal, which rounding breaks
    p = m.shape[-1]
    iu = np.triu_indices(p, 1)
    m[..., iu[1], iu[0]] = m[..., iu[0], iu[1]]
    m[..., np.arange(p), np.arange(p)] = 1.0
    return np.clip(m, 0.0, 1.0)


def plv_pair(theta_a, theta_b):
    """PLV between two phase sequences, summing cosines and sines of the differences."""
    d = np.asarray(theta_a, dtype=float) - np.asarray(theta_b, dtype=float)
    return float(np.hypot(np.cos(d).sum(), np.sin(d).sum()) / d.size)


def naive_plv(dataset):
    """PLV computed directly from the observed phases.

    Returns
    -------
    per_subject : ndarray, shape (n, p, p)
    averaged : ndarray, shape (p, p)
        Mean of ``per_subject`` over subjects.
    """
    per_subject = _plv_from_phase(dataset.values)
    return per_subject, per_subject.mean(axis=0)


def posterior_plv(chain, basis, check_wrap=False, chunk=None):
    """Subject-averaged PLV for every retained draw, shape ``(S, p, p)``.

    The denoised phase of a draw is ``a @ B - 2*pi*Z``. The wrap term is an
    integer number of turns and drops out of the PLV, so it is skipped;
    ``check_wrap=True`` recomputes with it and raises if the two differ by
    more than 1e-12.
    """
    if chain.n_draws == 0:
        raise EmptyChain("chain holds no draws")
    S, n, p, L = chain.a.shape
    B = basis.values
    if B.shape[0] != L or B.shape[1] != chain.Z.shape[-1]:
        raise DimensionMismatch(
            f"chain has L={L}, T={chain.Z.shape[-1]} but basis is {B.shape}")
    if chunk is None:
        chunk = max(1, int(4e6 // max(1, n * p * B.shape[1])))
    out = np.empty((S, p, p))
    for lo in range(0, S, chunk):
        hi = min(S, lo + chunk)
        theta = chain.a[lo:hi] @ B
        out[lo:hi] = _plv_from_phase(theta).mean(axis=1)
        if check_wrap:
            with_z = _plv_from_phase(theta - TWO_PI * chain.Z[lo:hi]).mean(axis=1)
            err = np.abs(with_z - out[lo:hi]).max()
            if err > 1e-12:
                raise AssertionError(f"wrap term changed PLV by {err:.3g}")
    return out


@dataclass
class PlvSummary:
    """Per-pair posterior summaries over the upper triangle ``k < k'``.

    ``ci_low <= point <= ci_high`` is typical but not guaranteed: a strongly
    skewed posterior can put its mean outside the central interval.
    """

    k: np.ndarray
    kprime: np.ndarray
    point: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    p_exceed: np.ndarray
    edge: np.ndarray
    threshold: float
    decision_cut: float

    @property
    def n_pairs(self):
        return self.k.size

    def matrix(self, field="point"):
        p = int(max(self.kprime.max(), self.k.max())) + 1 if self.n_pairs else 1
        m = np.ones((p, p))
        vals = getattr(self, field)
        m[self.k, self.kprime] = vals
        m[self.kprime, self.k] = vals
        return m

    def records(self):
        return [
            {"k": int(a), "kprime": int(b), "plv_mean": float(m), "ci_low": float(lo),
             "ci_high": float(hi), "p_exceed": float(pe), "edge": bool(e)}
            for a, b, m, lo, hi, pe, e in zip(self.k, self.kprime, self.point, self.ci_low,
                                              self.ci_high, self.p_exceed, self.edge)
        ]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "kprime", "plv_mean", "ci_low", "ci_high", "p_exceed", "edge"])
            for r in self.records():
                w.writerow([r["k"], r["kprime"], repr(r["plv_mean"]), repr(r["ci_low"]),
                            repr(r["ci_high"]), repr(r["p_exceed"]), int(r["edge"])])

    def write_json(self, path, config=None):
        doc = {"threshold": self.threshold, "decision_cut": self.decision_cut,
               "pairs": self.records()}
        if config is not None:
            doc["config"] = config
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)


def summarize(draws, threshold=0.7, decision_cut=0.5, level=0.95):
    """Posterior mean, central credible interval and exceedance per pair.

    ``draws`` has shape ``(S, p, p)``. Quantiles interpolate linearly between
    order statistics. Exceedance uses ``>= threshold`` and an edge is
    declared when the exceedance is ``>= decision_cut``.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 3 or draws.shape[0] == 0:
        raise EmptyChain(f"need a nonempty (S, p, p) stack of draws, got shape {draws.shape}")
    p = draws.shape[1]
    k, kp = np.triu_indices(p, 1)
    pairs = draws[:, k, kp]
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(pairs, [tail, 1.0 - tail], axis=0, method="linear")
    p_exceed = (pairs >= threshold).mean(axis=0)
    return PlvSummary(k=k, kprime=kp, point=pairs.mean(axis=0), ci_low=lo, ci_high=hi,
                      p_exceed=p_exceed, edge=p_exceed >= decision_cut,
                      threshold=threshold, decision_cut=decision_cut)


def summarize_point(plv_matrix, threshold=0.7):
    """Degenerate summary for a single PLV matrix (e.g. the naive estimate)."""
    return summarize(np.asarray(plv_matrix)[None], threshold=threshold, decision_cut=0.5)

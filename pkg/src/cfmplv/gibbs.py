"""Gibbs sampler for the hierarchical wrapped functional model.

The model for subject ``s``, channel ``k`` and time ``j`` is::

    Y[s,k,j] + 2*pi*Z[s,k,j] = sum_l a[s,k,l] B[l,j] + eps,  eps ~ N(0, sigma2)
    a[s,k,l] ~ N(mu[k,l], tau2[l]),   mu[k,l] ~ N(beta[l], gamma2[l])

Each ``update_*`` function draws one block from its full conditional. They
modify the state in place and return it, so a sweep reads as a chain of
calls. Every block is vectorised over its conditionally independent units,
which is why the ``threads`` setting never changes the numbers produced.
"""

import json
import logging
import struct
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from .errors import FactorizationError, ParseError
from .phase_data import TWO_PI
from .priors import Hyperparams, sample_inverse_gamma
from .spline_basis import SplineConfig
from .wrapped_normal import choose_truncation, dominant_wrap_count, sample_wrap_count

log = logging.getLogger(__name__)

UPDATE_ORDER = ("a", "mu", "beta", "tau2", "gamma2", "sigma2", "Z")

CHAIN_MAGIC = b"CFC1"

__all__ = [
    "Hyperparams", "ModelState", "ChainConfig", "PosteriorChain", "UPDATE_ORDER",
    "coefficient_conditional", "update_coefficients", "update_mu", "update_beta", "update_tau2", "update_gamma2",
    "update_sigma2", "update_wrap_counts", "sweep", "initialize", "run_chain",
]


@dataclass
class ModelState:
    a: np.ndarray        # (n, p, L)
    mu: np.ndarray       # (p, L)
    beta: np.ndarray     # (L,)
    tau2: np.ndarray     # (L,)
    gamma2: np.ndarray   # (L,)
    sigma2: float
    Z: np.ndarray        # (n, p, T) integers

    def copy(self):
        return ModelState(self.a.copy(), self.mu.copy(), self.beta.copy(), self.tau2.copy(),
                          self.gamma2.copy(), float(self.sigma2), self.Z.copy())


@dataclass(frozen=True)
class ChainConfig:
    burnin: int = 1000
    samples: int = 1000
    thin: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.burnin < 0:
            raise ValueError(f"burnin must be nonnegative, got {self.burnin}")
        if self.samples < 1 or self.thin < 1:
            raise ValueError(f"samples and thin must be positive, got {self.samples}, {self.thin}")
        if self.threads < 1:
            raise ValueError(f"threads must be positive, got {self.threads}")

    @property
    def n_draws(self):
        return self.samples // self.thin

    def to_dict(self):
        return {**asdict(self), "update_order": list(UPDATE_ORDER)}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: int(d[k]) for k in ("burnin", "samples", "thin", "seed", "threads") if k in d})


def _factor_precision(basis_values, tau2, sigma2):
    """Return ``(cov, root)`` with ``cov = A^-1`` and ``root root^T = A^-1``."""
    A = basis_values @ basis_values.T / sigma2 + np.diag(1.0 / tau2)
    try:
        chol = linalg.cholesky(A, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise FactorizationError(f"coefficient precision not positive definite: {exc}") from None
    inv_chol = linalg.solve_triangular(chol, np.eye(A.shape[0]), lower=True)
    root = inv_chol.T
    return root @ inv_chol, root


def _coefficient_rhs(state, Y, B):
    return (Y + TWO_PI * state.Z) @ B.T / state.sigma2 + state.mu / state.tau2


def coefficient_conditional(state, Y, B):
    """Mean ``(n, p, L)`` and shared covariance ``(L, L)`` of the coefficient conditional."""
    cov, _ = _factor_precision(B, state.tau2, state.sigma2)
    return (cov @ _coefficient_rhs(state, Y, B)[..., None])[..., 0], cov


def update_coefficients(state, Y, B, rng, shared_factor=True):
    """Draw every ``a[s,k,:]`` from ``N(A^-1 b_sk, A^-1)``.

    ``A = B B^T / sigma2 + diag(1/tau2)`` does not depend on ``(s, k)``, so
    it is factorised once. ``shared_factor=False`` refactorises per unit and
    exists only to check that the shortcut changes nothing; both paths apply
    the factor through the same stacked matmul so they agree bit for bit.
    """
    n, p, L = state.a.shape
    rhs = _coefficient_rhs(state, Y, B)
    xi = rng.standard_normal((n, p, L))
    if shared_factor:
        cov, root = _factor_precision(B, state.tau2, state.sigma2)
        state.a = (cov @ rhs[..., None] + root @ xi[..., None])[..., 0]
    else:
        a = np.empty_like(state.a)
        for s in range(n):
            for k in range(p):
                cov, root = _factor_precision(B, state.tau2, state.sigma2)
                a[s, k] = (cov @ rhs[s, k][None, :, None]
                           + root @ xi[s, k][None, :, None])[0, :, 0]
        state.a = a
    return state


def update_mu(state, rng):
    n = state.a.shape[0]
    prec = n / state.tau2 + 1.0 / state.gamma2
    mean = (state.a.sum(axis=0) / state.tau2 + state.beta / state.gamma2) / prec
    state.mu = mean + rng.standard_normal(mean.shape) / np.sqrt(prec)
    return state


def update_beta(state, hyper, rng):
    p = state.mu.shape[0]
    prec = p / state.gamma2 + 1.0 / hyper.B0
    mean = (state.mu.sum(axis=0) / state.gamma2 + hyper.A0 / hyper.B0) / prec
    state.beta = mean + rng.standard_normal(mean.shape) / np.sqrt(prec)
    return state


def update_tau2(state, hyper, rng):
    n, p, _ = state.a.shape
    shape = hyper.nu_tau + n * p / 2.0
    rate = hyper.eta_tau + 0.5 * ((state.a - state.mu) ** 2).sum(axis=(0, 1))
    state.tau2 = sample_inverse_gamma(shape, rate, rng)
    return state


def update_gamma2(state, hyper, rng):
    p = state.mu.shape[0]
    shape = hyper.nu_gamma + p / 2.0
    rate = hyper.eta_gamma + 0.5 * ((state.mu - state.beta) ** 2).sum(axis=0)
    state.gamma2 = sample_inverse_gamma(shape, rate, rng)
    return state


def update_sigma2(state, Y, B, hyper, rng):
    resid = Y - state.a @ B + TWO_PI * state.Z
    shape = hyper.nu_sigma + resid.size / 2.0
    rate = hyper.eta_sigma + 0.5 * float(np.sum(resid * resid))
    state.sigma2 = float(sample_inverse_gamma(shape, rate, rng))
    return state


def update_wrap_counts(state, Y, B, rng):
    """Resample every wrap count from its discrete full conditional.

    The support half-width comes from :func:`choose_truncation` at the
    current ``sigma2`` and is centred on each entry's most likely count.
    """
    resid = Y - state.a @ B
    m_trunc = choose_truncation(state.sigma2)
    state.Z = sample_wrap_count(resid, state.sigma2, m_trunc, rng,
                                center=dominant_wrap_count(resid))
    return state


def sweep(state, Y, B, hyper, rng):
    """One full pass over the seven blocks in :data:`UPDATE_ORDER`."""
    update_coefficients(state, Y, B, rng)
    update_mu(state, rng)
    update_beta(state, hyper, rng)
    update_tau2(state, hyper, rng)
    update_gamma2(state, hyper, rng)
    update_sigma2(state, Y, B, hyper, rng)
    update_wrap_counts(state, Y, B, rng)
    return state


def _aligned_unwrap(Y):
    # continuity unwrap, then shift whole tracks by 2*pi so their means sit
    # within half a period of the pooled reference
    U = np.unwrap(Y, axis=-1)
    means = U.mean(axis=-1)
    ref = np.angle(np.exp(1j * means).mean())
    U -= TWO_PI * np.rint((means - ref) / TWO_PI)[..., None]
    return U


def initialize(data, basis):
    """Deterministic starting state from least-squares fits to unwrapped tracks.

    Wrap counts start at the values implied by the unwrapping, so the first
    coefficient update sees the same continuous tracks the fit was made on.
    """
    Y, B = data.values, basis.values
    U = _aligned_unwrap(Y)
    gram = B @ B.T
    try:
        chol = linalg.cholesky(gram, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"basis Gram matrix is singular: {exc}") from None
    n, p, T = Y.shape
    L = B.shape[0]
    a = linalg.cho_solve((chol, True), (U @ B.T).reshape(-1, L).T).T.reshape(n, p, L)
    mu = a.mean(axis=0)
    return ModelState(
        a=a, mu=mu, beta=mu.mean(axis=0), tau2=np.ones(L), gamma2=np.ones(L), sigma2=0.25,
        Z=np.rint((U - Y) / TWO_PI).astype(np.int64),
    )


@dataclass
class PosteriorChain:
    """Retained draws of ``(a, Z, sigma2)`` plus traces of the hyper-level parameters."""

    a: np.ndarray          # (S, n, p, L)
    Z: np.ndarray          # (S, n, p, T), smallest signed integer type that fits
    sigma2: np.ndarray     # (S,)
    beta: np.ndarray       # (S, L)
    tau2: np.ndarray       # (S, L)
    gamma2: np.ndarray     # (S, L)
    config: ChainConfig
    hyper: Hyperparams
    basis_config: SplineConfig
    grid_points: np.ndarray

    @property
    def n_draws(self):
        return self.a.shape[0]

    def sidecar(self):
        return {
            "format": "CFC1",
            "shape": dict(zip(("draws", "n", "p", "L", "T"), self.a.shape[:4] + self.Z.shape[3:])),
            "chain": self.config.to_dict(),
            "seed": self.config.seed,
            "hyper": self.hyper.to_dict(),
            "basis": self.basis_config.to_dict(),
            "grid": self.grid_points.tolist(),
            "z_dtype": self.Z.dtype.str,
        }

    def save(self, path, extra=None):
        """Write the binary chain to ``path`` and a JSON sidecar to ``path + '.json'``."""
        S, n, p, L = self.a.shape
        T = self.Z.shape[3]
        with open(path, "wb") as fh:
            fh.write(CHAIN_MAGIC)
            fh.write(struct.pack("<IIIIIB3x", S, n, p, L, T, self.Z.dtype.itemsize))
            for arr, dt in ((self.a, "<f8"), (self.Z, f"<i{self.Z.dtype.itemsize}"),
                            (self.sigma2, "<f8"), (self.beta, "<f8"),
                            (self.tau2, "<f8"), (self.gamma2, "<f8")):
                fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())
        meta = self.sidecar()
        if extra:
            meta.update(extra)
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        with open(path, "rb") as fh:
            raw = fh.read()
        if raw[:4] != CHAIN_MAGIC:
            raise ParseError(f"bad chain magic {raw[:4]!r}")
        S, n, p, L, T, zb = struct.unpack("<IIIIIB3x", raw[4:28])
        offset = 28
        arrays = []
        for shape, dt in (((S, n, p, L), "<f8"), ((S, n, p, T), f"<i{zb}"), ((S,), "<f8"),
                          ((S, L), "<f8"), ((S, L), "<f8"), ((S, L), "<f8")):
            count = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype=dt, count=count, offset=offset).reshape(shape)
            offset += count * arr.itemsize
            arrays.append(arr.astype(arr.dtype.newbyteorder("=")))
        if offset != len(raw):
            raise ParseError(f"chain file has {len(raw) - offset} trailing bytes")
        return cls(*arrays,
                   config=ChainConfig.from_dict(meta["chain"]),
                   hyper=Hyperparams.from_dict(meta["hyper"]),
                   basis_config=SplineConfig.from_dict(meta["basis"]),
                   grid_points=np.asarray(meta["grid"], dtype=float))


def _smallest_int(Z):
    peak = int(np.abs(Z).max()) if Z.size else 0
    for dt in (np.int8, np.int16, np.int32):
        if peak <= np.iinfo(dt).max:
            return Z.astype(dt)
    return Z


def run_chain(data, basis, hyper=Hyperparams(), config=ChainConfig(), state=None):
    """Run ``burnin + samples`` sweeps and keep every ``thin``-th post-burn-in draw.

    Bit-reproducible for a fixed ``config.seed``.
    """
    Y, B = data.values, basis.values
    if Y.shape[2] != B.shape[1]:
        raise ValueError(f"data has T={Y.shape[2]} but basis has {B.shape[1]} columns")
    n, p, T = Y.shape
    L = B.shape[0]
    rng = np.random.default_rng(config.seed)
    state = initialize(data, basis) if state is None else state.copy()

    S = config.n_draws
    a = np.empty((S, n, p, L))
    Z = np.empty((S, n, p, T), dtype=np.int16)
    traces = {k: np.empty((S, L)) for k in ("beta", "tau2", "gamma2")}
    sigma2 = np.empty(S)

    kept = 0
    total = config.burnin + config.samples
    for it in range(total):
        sweep(state, Y, B, hyper, rng)
        post = it - config.burnin + 1
        if post > 0 and post % config.thin == 0 and kept < S:
            a[kept] = state.a
            if Z.dtype == np.int16 and np.abs(state.Z).max() > np.iinfo(np.int16).max:
                Z = Z.astype(np.int64)
            Z[kept] = state.Z
            sigma2[kept] = state.sigma2
            for k, tr in traces.items():
                tr[kept] = getattr(state, k)
            kept += 1
        if (it + 1) % 500 == 0:
            log.debug("sweep %d/%d sigma2=%.4g", it + 1, total, state.sigma2)

    return PosteriorChain(a=a, Z=_smallest_int(Z), sigma2=sigma2, **traces,
                          config=config, hyper=hyper, basis_config=basis.config,
                          grid_points=basis.grid.points.copy())

"""Phase dataset containers, validation, file I/O and the synthetic generator.

Observations are circular values stored in the half-open interval
``[0, 2*pi)`` and indexed ``[subject, channel, time]``.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidHyperparams,
    NonIncreasingGrid,
    OutOfRangePhase,
    ParseError,
    ValidationError,
)
from .priors import Hyperparams, sample_inverse_gamma

TWO_PI = 2.0 * np.pi

DATASET_MAGIC = b"CFM1"


def wrap(x):
    """Reduce values modulo 2*pi into ``[0, 2*pi)``.

    ``np.mod`` can round tiny negative inputs up to exactly ``2*pi``; those
    are mapped to 0 so the half-open convention always holds.
    """
    r = np.mod(x, TWO_PI)
    if np.ndim(r) == 0:
        return 0.0 if r >= TWO_PI else float(r)
    r[r >= TWO_PI] = 0.0
    return r


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    @property
    def count(self):
        return int(self.points.shape[0])

    @property
    def domain(self):
        return float(self.points[0]), float(self.points[-1])

    @classmethod
    def uniform(cls, T, start=0.0, stop=1.0):
        """``T`` equally spaced points on ``[start, stop]``."""
        return cls(np.linspace(start, stop, T))

    def validate(self):
        if self.points.ndim != 1 or self.count < 2:
            raise DimensionMismatch(f"time grid needs at least 2 points, got {self.points.shape}")
        bad = np.flatnonzero(np.diff(self.points) <= 0)
        if bad.size:
            raise NonIncreasingGrid(bad[0] + 1)


@dataclass(frozen=True)
class PhaseDataset:
    """Circular observations ``Y[s, k, j]`` on a shared time grid.

    ``meta`` carries non-numerical annotations such as the physical sampling
    rate or the number of boundary samples flagged unreliable.
    """

    values: np.ndarray
    grid: TimeGrid
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def T(self):
        return self.values.shape[2]

    def __eq__(self, other):
        if not isinstance(other, PhaseDataset):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.grid.points, other.grid.points)
        )

    @classmethod
    def from_array(cls, values, grid=None, meta=None):
        values = np.asarray(values, dtype=float)
        if grid is None:
            grid = TimeGrid.uniform(values.shape[-1])
        return cls(values, grid, dict(meta or {}))


@dataclass(frozen=True)
class GenerativeTruth:
    """Known quantities behind a simulated dataset."""

    a: np.ndarray
    mu: np.ndarray
    beta: np.ndarray
    tau2: np.ndarray
    gamma2: np.ndarray
    sigma2: float
    clean_phase: np.ndarray

    def to_dict(self):
        return {
            "a": self.a.tolist(),
            "mu": self.mu.tolist(),
            "beta": self.beta.tolist(),
            "tau2": self.tau2.tolist(),
            "gamma2": self.gamma2.tolist(),
            "sigma2": float(self.sigma2),
            "clean_phase": self.clean_phase.tolist(),
        }


def validate(dataset):
    """Check every dataset invariant, raising on the first violation.

    Returns the dataset unchanged so calls can be chained.
    """
    dataset.grid.validate()
    values = dataset.values
    if values.ndim != 3:
        raise DimensionMismatch(f"values must be 3-D [subject, channel, time], got ndim={values.ndim}")
    if min(values.shape) < 1:
        raise DimensionMismatch(f"empty axis in shape {values.shape}")
    if values.shape[2] != dataset.grid.count:
        raise DimensionMismatch(
            f"{values.shape[2]} time samples but grid has {dataset.grid.count} points"
        )
    bad = ~((values >= 0.0) & (values < TWO_PI))
    if bad.any():
        idx = np.unravel_index(np.flatnonzero(bad)[0], values.shape)
        raise OutOfRangePhase(idx, values[idx])
    return dataset


@dataclass(frozen=True)
class CsvLayout:
    """Column mapping for :func:`load_csv`.

    With ``header=True`` columns are referenced by name, otherwise by
    integer position. A ``None`` subject/channel/time column means that axis
    has a single entry (or, for time, is given by row order).
    """

    subject: object = "subject"
    channel: object = "channel"
    time: object = "time_index"
    value: object = "phase"
    header: bool = True
    wrap_on_load: bool = False

    @classmethod
    def single_column(cls, wrap_on_load=False):
        return cls(subject=None, channel=None, time=None, value=0, header=False,
                   wrap_on_load=wrap_on_load)


def _column_index(spec, header_row):
    if spec is None:
        return None
    if header_row is None:
        return int(spec)
    try:
        return header_row.index(spec)
    except ValueError:
        raise ParseError(f"missing column {spec!r} in header {header_row}", line=1) from None


def load_csv(path, layout=CsvLayout(), grid=None):
    """Read a long-format phase file into a validated :class:`PhaseDataset`."""
    with open(path, newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh))]
    rows = [(ln, row) for ln, row in rows if row and any(c.strip() for c in row)]
    header = None
    if layout.header:
        if not rows:
            raise ParseError("empty file")
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    cols = [_column_index(c, header) for c in (layout.subject, layout.channel, layout.time)]
    vcol = _column_index(layout.value, header)

    entries = []
    for order, (ln, row) in enumerate(rows):
        try:
            idx = [0 if c is None else int(row[c]) for c in cols[:2]]
            idx.append(order if cols[2] is None else int(row[cols[2]]))
            v = float(row[vcol])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"cannot parse row {row!r}: {exc}", line=ln) from None
        if min(idx) < 0:
            raise ParseError(f"negative index in row {row!r}", line=ln)
        entries.append((idx, v, ln))
    if not entries:
        raise ParseError("no data rows")

    if cols[2] is None:
        # row order gives time, counted separately for each (subject, channel)
        counters = {}
        for e in entries:
            key = (e[0][0], e[0][1])
            e[0][2] = counters.get(key, 0)
            counters[key] = e[0][2] + 1

    n, p, T = (max(e[0][a] for e in entries) + 1 for a in range(3))
    values = np.full((n, p, T), np.nan)
    for (s, k, j), v, ln in entries:
        if not np.isnan(values[s, k, j]):
            raise ParseError(f"duplicate entry for (s, k, j) = {(s, k, j)}", line=ln)
        values[s, k, j] = v
    if np.isnan(values).any():
        missing = np.unravel_index(np.flatnonzero(np.isnan(values))[0], values.shape)
        raise DimensionMismatch(f"no value for (s, k, j) = {tuple(int(i) for i in missing)}")
    if layout.wrap_on_load:
        values = wrap(values)
    return validate(PhaseDataset.from_array(values, grid))


def save_csv(dataset, path):
    """Write ``dataset`` in long format with full round-trip precision."""
    n, p, T = dataset.values.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "channel", "time_index", "phase"])
        for s in range(n):
            for k in range(p):
                for j in range(T):
                    w.writerow([s, k, j, repr(float(dataset.values[s, k, j]))])


def save_binary(dataset, path):
    """Write the ``CFM1`` container: magic, u32 n, p, T, row-major little-endian f64."""
    n, p, T = dataset.values.shape
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<III", n, p, T))
        fh.write(np.ascontiguousarray(dataset.values, dtype="<f8").tobytes())


def load_binary(path, grid=None):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != DATASET_MAGIC:
        raise ParseError(f"bad magic {raw[:4]!r}, expected {DATASET_MAGIC!r}")
    n, p, T = struct.unpack("<III", raw[4:16])
    body = raw[16:]
    if len(body) != 8 * n * p * T:
        raise DimensionMismatch(f"payload has {len(body)} bytes, header implies {8 * n * p * T}")
    values = np.frombuffer(body, dtype="<f8").reshape(n, p, T).astype(float)
    return validate(PhaseDataset.from_array(values, grid))


def load_dataset(path, layout=CsvLayout()):
    """Load by extension: ``.cfm`` binary, anything else long-format CSV."""
    if str(path).endswith(".cfm"):
        return load_binary(path)
    return load_csv(path, layout)


def save_dataset(dataset, path):
    if str(path).endswith(".cfm"):
        save_binary(dataset, path)
    else:
        save_csv(dataset, path)


def _fixed_or_drawn(value, L, draw, name):
    if value is None:
        return draw()
    out = np.broadcast_to(np.asarray(value, dtype=float), (L,)).copy()
    if name != "beta" and (out < 0).any():
        raise InvalidHyperparams(f"fixed {name} must be nonnegative")
    return out


def simulate_dataset(n, p, basis, hyper=Hyperparams(), seed=None, *,
                     beta=None, tau2=None, gamma2=None, sigma2=None):
    """Sample a dataset from the hierarchical wrapped functional model.

    Any of ``beta``, ``tau2``, ``gamma2`` (scalars or length-L arrays) and
    ``sigma2`` may be fixed; the rest are drawn from their priors. Fixed
    variances may be zero, which switches off that source of randomness.

    Returns
    -------
    dataset : PhaseDataset
    truth : GenerativeTruth
    """
    if n < 1 or p < 1:
        raise ValueError(f"n and p must be positive, got n={n}, p={p}")
    B = basis.values
    L, T = B.shape
    rng = np.random.default_rng(seed)

    beta = _fixed_or_drawn(beta, L, lambda: rng.normal(hyper.A0, np.sqrt(hyper.B0), L), "beta")
    gamma2 = _fixed_or_drawn(
        gamma2, L, lambda: sample_inverse_gamma(hyper.nu_gamma, hyper.eta_gamma, rng, L), "gamma2")
    tau2 = _fixed_or_drawn(
        tau2, L, lambda: sample_inverse_gamma(hyper.nu_tau, hyper.eta_tau, rng, L), "tau2")
    if sigma2 is None:
        sigma2 = float(sample_inverse_gamma(hyper.nu_sigma, hyper.eta_sigma, rng))
    elif sigma2 < 0:
        raise InvalidHyperparams("fixed sigma2 must be nonnegative")

    mu = rng.normal(beta, np.sqrt(gamma2), size=(p, L))
    a = rng.normal(mu, np.sqrt(tau2), size=(n, p, L))
    smooth = a @ B
    noisy = smooth + rng.normal(0.0, np.sqrt(sigma2), size=smooth.shape)

    dataset = PhaseDataset(wrap(noisy), basis.grid)
    truth = GenerativeTruth(a=a, mu=mu, beta=beta, tau2=tau2, gamma2=gamma2,
                            sigma2=float(sigma2), clean_phase=wrap(smooth))
    return dataset, truth

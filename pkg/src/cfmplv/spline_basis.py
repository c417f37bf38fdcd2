"""Truncated power spline basis.

The basis holds the polynomial terms ``1, t, ..., t^q`` followed by one
truncated power ``(t - knot)_+^q`` per knot, so ``L = q + K + 1``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .phase_data import TimeGrid

MAX_BASIS = 30
WARN_BASIS = 20


@dataclass(frozen=True)
class SplineConfig:
    degree: int
    knots: tuple
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        if self.degree < 0:
            raise ValueError(f"degree must be nonnegative, got {self.degree}")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"empty domain {self.domain}")
        k = np.asarray(self.knots)
        if k.size and (np.any(np.diff(k) <= 0) or k[0] <= lo or k[-1] >= hi):
            raise ValueError(f"knots must be strictly increasing inside {self.domain}: {self.knots}")
        if self.n_basis > MAX_BASIS:
            raise ValueError(f"L={self.n_basis} exceeds the cap of {MAX_BASIS} basis functions")
        if self.n_basis > WARN_BASIS:
            warnings.warn(
                f"L={self.n_basis} truncated power functions; the basis is poorly conditioned",
                stacklevel=3,
            )

    @property
    def n_basis(self):
        return self.degree + len(self.knots) + 1

    def to_dict(self):
        return {"degree": self.degree, "knots": list(self.knots), "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d, domain=(0.0, 1.0)):
        """Accept either an explicit ``knots`` list or ``n_knots``."""
        degree = int(d.get("degree", 3))
        domain = tuple(d.get("domain", domain))
        if "knots" in d:
            return cls(degree, tuple(d["knots"]), domain)
        return make_config(degree, int(d.get("n_knots", 10)), domain)


@dataclass(frozen=True)
class BasisMatrix:
    """Basis evaluated on a grid; ``values[l, j] = B_l(t_j)``."""

    values: np.ndarray
    config: SplineConfig
    grid: TimeGrid

    @property
    def L(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]


def make_config(q=3, K=10, domain=(0.0, 1.0)):
    """Place ``K`` equally spaced knots strictly inside ``domain``."""
    lo, hi = float(domain[0]), float(domain[1])
    knots = tuple(lo + k * (hi - lo) / (K + 1) for k in range(1, K + 1))
    return SplineConfig(q, knots, (lo, hi))


def _design(config, t):
    t = np.asarray(t, dtype=float)
    q = config.degree
    poly = [t ** l for l in range(q + 1)]
    if q == 0:
        trunc = [(t >= k).astype(float) for k in config.knots]
    else:
        trunc = [np.maximum(t - k, 0.0) ** q for k in config.knots]
    return np.stack(poly + trunc, axis=0)


def evaluate(config, t, clamp=False):
    """Evaluate all ``L`` basis functions at a scalar ``t``.

    With ``degree=0`` the truncated terms are right-continuous steps and
    ``0**0`` is taken as 1, so the first function is always the constant.
    Points outside the domain raise unless ``clamp`` is set.
    """
    lo, hi = config.domain
    if not lo <= t <= hi:
        if not clamp:
            raise DomainError(f"t={t} outside domain {config.domain}")
        t = min(max(t, lo), hi)
    return _design(config, t)


def evaluate_grid(config, grid, clamp=False):
    pts = grid.points
    lo, hi = config.domain
    if (pts < lo).any() or (pts > hi).any():
        if not clamp:
            raise DomainError(f"grid [{pts.min()}, {pts.max()}] outside domain {config.domain}")
        pts = np.clip(pts, lo, hi)
    return BasisMatrix(_design(config, pts), config, grid)


def default_basis(T, degree=3, n_knots=10):
    grid = TimeGrid.uniform(T)
    return evaluate_grid(make_config(degree, n_knots, grid.domain), grid)

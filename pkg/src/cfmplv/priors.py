"""Prior hyperparameters and inverse-gamma helpers."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidHyperparams


@dataclass(frozen=True)
class Hyperparams:
    """Conjugate prior settings.

    ``beta_l ~ N(A0, B0)``; ``tau_l^2``, ``gamma_l^2`` and ``sigma^2`` are
    inverse gamma with the given shape (``nu_*``) and rate (``eta_*``).
    """

    A0: float = 0.0
    B0: float = 100.0
    nu_tau: float = 2.0
    eta_tau: float = 2.0
    nu_gamma: float = 2.0
    eta_gamma: float = 2.0
    nu_sigma: float = 2.0
    eta_sigma: float = 2.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value):
                raise InvalidHyperparams(f"{name} must be finite, got {value}")
            if name != "A0" and value <= 0:
                raise InvalidHyperparams(f"{name} must be positive, got {value}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(v) for k, v in d.items()})


def sample_inverse_gamma(shape, rate, rng, size=None):
    """Draw from IG(shape, rate), density proportional to x^(-shape-1) exp(-rate/x)."""
    if size is None:
        size = np.broadcast_shapes(np.shape(shape), np.shape(rate)) or None
    return rate / rng.gamma(shape, 1.0, size=size)

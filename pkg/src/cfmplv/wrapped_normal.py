"""Wrapped normal density and the latent wrap-count augmentation.

A wrapped normal variable is ``Y = W mod 2*pi`` with ``W ~ N(mean, sigma2)``.
Pairing ``Y`` with the integer ``Z`` that satisfies ``Y + 2*pi*Z = W`` turns
the likelihood into an ordinary Gaussian one, which is what makes the
Gibbs sampler conjugate.
"""

import math

import numpy as np
from scipy.special import logsumexp

from .errors import NonpositiveVariance
from .phase_data import TWO_PI


def _check_variance(sigma2):
    if not np.all(np.asarray(sigma2) > 0):
        raise NonpositiveVariance(f"sigma2 must be positive, got {sigma2}")


def log_augmented_density(y, z, mean, sigma2):
    """Log joint density of an observation and its wrap count."""
    _check_variance(sigma2)
    r = np.asarray(y) - np.asarray(mean) + TWO_PI * np.asarray(z)
    return -0.5 * np.log(TWO_PI * sigma2) - r * r / (2.0 * sigma2)


def augmented_density(y, z, mean, sigma2):
    return np.exp(log_augmented_density(y, z, mean, sigma2))


def wrapped_density(y, mean, sigma2, m_trunc):
    """Wrapped normal density truncated to wrap counts ``-m_trunc..m_trunc``.

    Broadcasts over ``y``, ``mean`` and ``sigma2``; the sum is done in log
    space.
    """
    _check_variance(sigma2)
    m = np.arange(-m_trunc, m_trunc + 1)
    y = np.asarray(y, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    r = (y - np.asarray(mean, dtype=float))[..., None] + TWO_PI * m
    logf = logsumexp(-r * r / (2.0 * sigma2[..., None]), axis=-1) - 0.5 * np.log(TWO_PI * sigma2)
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def choose_truncation(sigma2):
    """Smallest symmetric support bound that keeps omitted terms below e^-18."""
    _check_variance(sigma2)
    return max(1, math.ceil((6.0 * math.sqrt(sigma2) + TWO_PI) / TWO_PI))


def wrap_count_weights(residual, sigma2, m_trunc, center=0):
    """Support and normalised probabilities of the wrap count.

    ``residual`` is the observation minus the current smooth fit. The support
    is ``center + (-m_trunc..m_trunc)``; ``center`` may be an array matching
    ``residual``.
    """
    _check_variance(sigma2)
    r = np.asarray(residual, dtype=float)[..., None]
    support = np.asarray(center)[..., None] + np.arange(-m_trunc, m_trunc + 1)
    d = r + TWO_PI * support
    logw = -d * d / (2.0 * sigma2)
    logw -= logsumexp(logw, axis=-1, keepdims=True)
    return support, np.exp(logw)


def dominant_wrap_count(residual):
    """Integer whose wrap best cancels ``residual`` (the mode of the weights)."""
    return np.rint(-np.asarray(residual) / TWO_PI).astype(np.int64)


def sample_wrap_count(residual, sigma2, m_trunc, rng, center=0):
    """Draw wrap counts with probability proportional to
    ``exp(-(residual + 2*pi*m)^2 / (2*sigma2))``.

    Vectorised over ``residual``. With the default ``center=0`` the result
    lies in ``[-m_trunc, m_trunc]``; passing ``dominant_wrap_count(residual)``
    centres the window on the mode instead, which keeps the support small
    when the smooth fit sits several periods away from ``[0, 2*pi)``.
    """
    _check_variance(sigma2)
    r = np.asarray(residual, dtype=float)
    center = np.broadcast_to(np.asarray(center, dtype=np.int64), r.shape)
    d = r[..., None] + TWO_PI * (center[..., None] + np.arange(-m_trunc, m_trunc + 1))
    logw = -d * d / (2.0 * sigma2)
    logw -= logw.max(axis=-1, keepdims=True)
    cdf = np.cumsum(np.exp(logw), axis=-1)
    u = rng.random(r.shape) * cdf[..., -1]
    idx = (cdf < u[..., None]).sum(axis=-1)
    out = center + idx - m_trunc
    return int(out) if out.ndim == 0 else out

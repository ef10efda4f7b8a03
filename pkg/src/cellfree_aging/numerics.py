"""
Special functions and small statistical helpers.

Everything here is a pure function of its inputs. `bessel_j0` and
`jakes_rho` accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError

SPEED_OF_LIGHT = 2.998e8  # m/s

# Streams for `make_rng`. Channels and noise never share a stream, so switching
# the noise off does not shift the channel draws.
STREAM_UE_POSITIONS = 1
STREAM_SHADOWING = 2
STREAM_CHANNELS = 3
STREAM_NOISE = 4

_SERIES_LIMIT = 8.0
_SERIES_TERMS = 40

# Rational approximations of the Hankel asymptotic amplitudes P(x), Q(x) for
# x > 5 (Cephes j0.c, S. L. Moshier).
_PP = (7.96936729297347051624e-4, 8.28352392107440799803e-2,
       1.23953371646414299388e0, 5.44725003058768775090e0,
       8.74716500199817011941e0, 5.30324038235394892183e0,
       9.99999999999999997821e-1)
_PQ = (9.24408810558863637013e-4, 8.56288474354474431428e-2,
       1.25352743901058953537e0, 5.47097740330417105182e0,
       8.76190883237069594232e0, 5.30605288235394617618e0,
       1.00000000000000000218e0)
_QP = (-1.13663838898469149931e-2, -1.28252718670509318512e0,
       -1.95539544257735972385e1, -9.32060152123768231369e1,
       -1.77681167980488050595e2, -1.47077505154951170175e2,
       -5.14105326766599330220e1, -6.05014350600728481186e0)
# leading coefficient 1 is implicit
_QQ = (6.43178256118178023184e1, 8.56430025976980587198e2,
       3.88240183605401609683e3, 7.24046774195652478189e3,
       5.93072701187316984827e3, 2.06209331660327847417e3,
       2.42005740240291393179e2)


def _polevl(x, coef):
    out = np.full_like(x, coef[0])
    for c in coef[1:]:
        out = out * x + c
    return out


def _p1evl(x, coef):
    out = x + coef[0]
    for c in coef[1:]:
        out = out * x + c
    return out


def _j0_series(x):
    # sum_k (-x^2/4)^k / (k!)^2
    u = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * u / (k * k)
        total = total + term
    return total


def _j0_asymptotic(x):
    w = 5.0 / x
    q = w * w
    p = _polevl(q, _PP) / _polevl(q, _PQ)
    q = _polevl(q, _QP) / _p1evl(q, _QQ)
    xn = x - 0.25 * math.pi
    return math.sqrt(2.0 / math.pi) * (p * np.cos(xn) - w * q * np.sin(xn)) / np.sqrt(x)


def bessel_j0(x):
    """
    Zeroth-order Bessel function of the first kind.

    Power series for ``|x| < 8``, rational Hankel asymptotics beyond. Absolute
    error stays below 1e-9 up to ``|x| = 1e4``.

    Parameters
    ----------
    x : float or array_like
        Argument(s). Must be finite.

    Returns
    -------
    float or np.ndarray
        J0(x), with the shape of `x`.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("bessel_j0 requires finite input")
    ax = np.abs(np.atleast_1d(arr))
    out = np.empty_like(ax)
    small = ax < _SERIES_LIMIT
    if np.any(small):
        out[small] = _j0_series(ax[small])
    if np.any(~small):
        out[~small] = _j0_asymptotic(ax[~small])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def jakes_rho(v, f_c, T_s, n):
    """Jakes temporal correlation J0(2*pi*v*f_c*n*T_s/c) at symbol lag `n`."""
    v_arr = np.asarray(v, dtype=float)
    n_arr = np.asarray(n, dtype=float)
    if np.any(v_arr < 0):
        raise DomainError("velocity must be non-negative")
    if np.any(n_arr < 0):
        raise DomainError("symbol index must be non-negative")
    if f_c <= 0 or T_s <= 0:
        raise DomainError("carrier frequency and symbol time must be positive")
    arg = 2.0 * math.pi * v_arr * f_c * n_arr * T_s / SPEED_OF_LIGHT
    return bessel_j0(arg)


def rho_bar(rho):
    """Innovation weight sqrt(1 - rho^2) of the aging model."""
    r = np.asarray(rho, dtype=float)
    if np.any(np.abs(r) > 1.0):
        raise DomainError("|rho| must not exceed 1")
    out = np.sqrt(1.0 - r * r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Real samples plus the histogram grid used to compare them to a Gaussian."""

    samples: np.ndarray
    bin_count: int = 100
    support: tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if not np.all(np.isfinite(s)):
            raise DomainError("samples must be finite")
        if self.bin_count < 2:
            raise DomainError("bin_count must be at least 2")
        lo, hi = self.support
        if not hi > lo:
            raise DomainError("support must satisfy hi > lo")
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_samples(cls, samples, bin_count: int = 100, width: float = 5.0):
        """Histogram over sample mean +/- `width` sample standard deviations."""
        s = np.asarray(samples, dtype=float).ravel()
        mu = float(np.mean(s)) if s.size else 0.0
        sd = float(np.std(s)) if s.size else 0.0
        if sd == 0.0:
            sd = max(abs(mu), 1.0) * 1e-6
        return cls(s, bin_count, (mu - width * sd, mu + width * sd))


def kl_divergence(p: EmpiricalDistribution, gaussian_mean: float,
                  gaussian_var: float, eps: float = 1e-12) -> float:
    """
    Histogram estimate of KL(P_sim || N(gaussian_mean, gaussian_var)) in nats.

    `p.samples` are binned into `p.bin_count` equal-width bins on `p.support`
    and the bin masses are compared with the exact Gaussian mass of each bin.
    Neither histogram is renormalised after the additive `eps` smoothing.
    """
    if gaussian_var <= 0:
        raise DomainError("gaussian_var must be positive")
    n = p.samples.size
    if n < 1000:
        raise InsufficientDataError(f"need at least 1000 samples, got {n}")
    edges = np.linspace(p.support[0], p.support[1], p.bin_count + 1)
    counts, _ = np.histogram(p.samples, bins=edges)
    p_mass = counts / n + eps
    sd = math.sqrt(gaussian_var)
    cdf = np.array([0.5 * math.erfc(-(e - gaussian_mean) / (sd * math.sqrt(2.0)))
                    for e in edges])
    q_mass = np.diff(cdf) + eps
    return float(max(np.sum(p_mass * np.log(p_mass / q_mass)), 0.0))


def percentile(values: Sequence[float], q: float) -> float:
    """q-quantile with linear interpolation between order statistics."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("percentile of an empty list")
    if not 0.0 <= q <= 1.0:
        raise DomainError("q must lie in [0, 1]")
    return float(np.quantile(arr, q, method="linear"))


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream identified by (seed, *keys)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def complex_gaussian(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, variance) samples; `variance` broadcasts."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    # interleaved (re, im) pairs viewed as complex: no complex temporaries
    z = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
    z *= scale
    return z

"""
Brute-force Monte-Carlo oracle.

Draws small-scale fading, runs uplink training, downlink beamformed training
and data-phase channel aging sample by sample, and estimates every
expectation that enters the closed-form SINRs. Nothing here calls into the
closed-form modules; the statistics the UE needs for its downlink MMSE rule
are recomputed locally.

Array layout for cell-free draws: (draw, AP m, UE k, antenna l).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .errors import InsufficientDataError
from .numerics import (STREAM_CHANNELS, STREAM_NOISE, EmpiricalDistribution,
                       complex_gaussian, kl_divergence, make_rng)

DEFAULT_CHUNK = 5000


class Accumulator:
    """Running sum / sum-of-squares of real arrays of a fixed shape."""

    def __init__(self):
        self.n = 0
        self.s = None
        self.ss = None

    def add(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=float)
        if self.s is None:
            self.s = np.zeros(batch.shape[1:])
            self.ss = np.zeros(batch.shape[1:])
        self.s += batch.sum(axis=0)
        self.ss += (batch * batch).sum(axis=0)
        self.n += batch.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.s / self.n

    @property
    def stderr(self) -> np.ndarray:
        var = np.maximum(self.ss / self.n - self.mean**2, 0.0)
        return np.sqrt(var / max(self.n - 1, 1))


@dataclass
class Estimate:
    mean: np.ndarray
    stderr: np.ndarray


@dataclass
class ChannelRealization:
    """A batch of channel draws: g[n] = rho[n] g0 + rho_bar[n] z[n]."""

    g0: np.ndarray
    innovations: Dict[int, np.ndarray]
    rho: Dict[int, np.ndarray]
    g_hat: Optional[np.ndarray] = None

    def channel_at(self, n: int) -> np.ndarray:
        if n == 0:
            return self.g0
        r = self.rho[n]
        if np.all(r == 1.0):
            return self.g0
        shape = (1,) * (self.g0.ndim - 2) + (-1, 1)
        # UE axis is second to last
        r = np.asarray(r).reshape(shape)
        rb = np.sqrt(np.maximum(1.0 - r * r, 0.0))
        return r * self.g0 + rb * self.innovations[n]


def draw_channels(beta, L: int, rho_by_n: Dict[int, np.ndarray], n_draws: int,
                  rng: np.random.Generator) -> ChannelRealization:
    """
    i.i.d. Rayleigh channels with per-entry variance beta_mk plus one
    independent innovation per requested symbol index.
    """
    beta = np.asarray(beta, dtype=float)
    var = beta[None, :, :, None]
    shape = (n_draws,) + beta.shape + (L,)
    g0 = complex_gaussian(rng, shape, var)
    innovations = {n: complex_gaussian(rng, shape, var) for n in sorted(rho_by_n) if n != 0}
    return ChannelRealization(g0, innovations, dict(rho_by_n))


def pilot_matrix(indices, tau: int) -> np.ndarray:
    """Columns are the orthonormal pilots (rows of I_tau) assigned to each UE."""
    idx = np.asarray(indices, dtype=int)
    P = np.zeros((tau, idx.size))
    P[idx, np.arange(idx.size)] = 1.0
    return P


def simulate_uplink_estimation(g0: np.ndarray, up_index, tau_up: int, E_up: float,
                               c: np.ndarray, rng: Optional[np.random.Generator],
                               used_pilots_only: bool = False) -> np.ndarray:
    """
    Received pilot matrix per AP, despreading with each UE's pilot, MMSE scaling.

    Pass ``rng=None`` to switch the receiver noise off. With
    `used_pilots_only`, the received matrix keeps only the pilot dimensions
    some UE transmits on; the others are discarded by despreading anyway, so
    the estimates have the same distribution at a fraction of the cost.
    """
    D, M, K, L = g0.shape
    up = np.asarray(up_index, dtype=int)
    if used_pilots_only:
        _, up = np.unique(up, return_inverse=True)
        Phi = pilot_matrix(up, int(up.max()) + 1 if up.size else 0)
    else:
        Phi = pilot_matrix(up, tau_up)  # tau x K
    amp = math.sqrt(tau_up * E_up)
    # Y_m = sqrt(tau E) sum_k g_mk phi_k^H + W_m,  shape (D, M, L, tau)
    Y = amp * (g0.transpose(0, 1, 3, 2) @ Phi.T)
    if rng is not None:
        Y = Y + complex_gaussian(rng, Y.shape)
    y_desp = (Y @ Phi).transpose(0, 1, 3, 2)
    return np.asarray(c)[None, :, :, None] * y_desp


def _precoders(g_hat: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return np.sqrt(eta)[None, :, :, None] * g_hat.conj()


def effective_downlink_channel(g_n: np.ndarray, g_hat: np.ndarray, eta) -> np.ndarray:
    """d_kk'[n] = sum_m sqrt(eta_mk') g_mk[n]^T conj(ghat_mk'), shape (D, K, K)."""
    D, M, K, L = g_n.shape
    a = g_n.transpose(0, 2, 1, 3).reshape(D, K, M * L)
    b = _precoders(g_hat, np.asarray(eta)).transpose(0, 2, 1, 3).reshape(D, K, M * L)
    return a @ b.transpose(0, 2, 1)


def ue_side_statistics(beta, gamma, eta, L: int):
    """
    Statistics a UE needs to form its downlink MMSE estimate.

    Returns (mean_gain[k] = E{d_kk}, var[k, k'] = Var{d_kk'}), evaluated AP by AP.
    """
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    M, K = beta.shape
    mean_gain = np.zeros(K)
    var = np.zeros((K, K))
    for m in range(M):
        for k in range(K):
            mean_gain[k] += L * math.sqrt(eta[m, k]) * gamma[m, k]
            for kp in range(K):
                var[k, kp] += L * eta[m, kp] * gamma[m, kp] * beta[m, k]
    return mean_gain, var


def simulate_downlink_training(g0: np.ndarray, g_hat: np.ndarray, eta, dp_index,
                               tau_dp: int, E_dp: float, mean_gain, var,
                               rng: Optional[np.random.Generator]) -> np.ndarray:
    """
    Beamformed downlink pilots, UE despreading and the affine MMSE rule.

    Returns the estimates dhat_kk, shape (D, K).
    """
    D, M, K, L = g0.shape
    Psi = pilot_matrix(dp_index, tau_dp)
    amp = math.sqrt(tau_dp * E_dp)
    # X_m = sqrt(tau E) sum_k sqrt(eta_mk) conj(ghat_mk) psi_k^H, shape (D, M, L, tau)
    X = amp * (_precoders(g_hat, np.asarray(eta)).transpose(0, 1, 3, 2) @ Psi.T)
    # y_k = sum_m g_mk^T X_m, shape (D, K, tau)
    y = g0.transpose(0, 2, 1, 3).reshape(D, K, M * L) @ X.reshape(D, M * L, tau_dp)
    if rng is not None:
        y = y + complex_gaussian(rng, y.shape)
    y_desp = (y * Psi.T[None]).sum(axis=-1)
    share = pilot_matrix(dp_index, tau_dp).T @ pilot_matrix(dp_index, tau_dp)
    coef = amp * np.diag(var) / (1.0 + tau_dp * E_dp * np.sum(var * share, axis=1))
    return mean_gain[None, :] + coef[None, :] * (y_desp - amp * mean_gain[None, :])


@dataclass
class AppendixTerms:
    """Empirical expectations for one symbol index n (cell-free)."""

    n: int
    rho: np.ndarray
    dhat_power: Estimate      # E|dhat_kk|^2            [K]
    cross_power: Estimate     # E|d_kk'[n]|^2           [K, K]
    error_power: Estimate     # E|dtilde_kk|^2          [K]
    innovation_power: Estimate  # E|z_kk[n]|^2          [K]
    mean_re: Estimate         # Re E d_kk[n]            [K]
    mean_im: Estimate
    variance: np.ndarray      # Var d_kk[n] (sample)    [K]
    decorrelation: Dict[str, Estimate] = field(default_factory=dict)

    def sinr_dt(self, E_d: float) -> np.ndarray:
        r2 = self.rho**2
        num = r2 * self.dhat_power.mean
        cross = self.cross_power.mean
        others = cross.sum(axis=1) - np.diag(cross)
        den = (others + r2 * self.error_power.mean
               + (1.0 - r2) * self.innovation_power.mean + 1.0 / E_d)
        return num / den

    def sinr_scsi(self, E_d: float) -> np.ndarray:
        mean_sq = self.mean_re.mean**2 + self.mean_im.mean**2
        cross = self.cross_power.mean
        others = cross.sum(axis=1) - np.diag(cross)
        return mean_sq / (others + self.variance + 1.0 / E_d)


def appendix_terms(beta, L: int, gamma, eta, c, up_index, dp_index, tau_up: int,
                   tau_dp: int, E_up: float, E_dp: float, rho_by_n: Dict[int, np.ndarray],
                   n_draws: int, seed: int, chunk: int = DEFAULT_CHUNK,
                   min_draws: int = 10_000) -> Dict[int, AppendixTerms]:
    """
    Ensemble estimates of E|dhat_kk|^2, E|d_kk'[n]|^2, E|dtilde_kk|^2 and
    E|z_kk[n]|^2 for every n in `rho_by_n`, with standard errors.

    Also tracks the cross-covariances of (dhat, dtilde, z) that must vanish.
    """
    if n_draws < min_draws:
        raise InsufficientDataError(f"need at least {min_draws} draws, got {n_draws}")
    beta = np.asarray(beta, dtype=float)
    mean_gain, var = ue_side_statistics(beta, gamma, eta, L)
    ch_rng = make_rng(seed, STREAM_CHANNELS)
    nz_rng = make_rng(seed, STREAM_NOISE)
    ns = sorted(rho_by_n)
    acc = {n: {key: Accumulator() for key in
               ("dhat", "cross", "err", "z", "re", "im", "c_he", "c_hz", "c_ez")}
           for n in ns}
    prod = {n: np.zeros((4, beta.shape[1]), dtype=complex) for n in ns}
    done = 0
    while done < n_draws:
        D = min(chunk, n_draws - done)
        real = draw_channels(beta, L, rho_by_n, D, ch_rng)
        g_hat = simulate_uplink_estimation(real.g0, up_index, tau_up, E_up, c, nz_rng)
        d0 = effective_downlink_channel(real.g0, g_hat, eta)
        if tau_dp > 0:
            dhat = simulate_downlink_training(real.g0, g_hat, eta, dp_index, tau_dp, E_dp,
                                              mean_gain, var, nz_rng)
        else:
            dhat = np.broadcast_to(mean_gain, (D, beta.shape[1]))
        d_own = np.diagonal(d0, axis1=1, axis2=2)
        err = d_own - dhat
        dhat_c = dhat - mean_gain[None, :]
        for n in ns:
            a = acc[n]
            if n == 0:
                d_n = d0
                z_own = np.zeros_like(d_own)
            else:
                d_n = effective_downlink_channel(real.channel_at(n), g_hat, eta)
                z = effective_downlink_channel(real.innovations[n], g_hat, eta)
                z_own = np.diagonal(z, axis1=1, axis2=2)
            own_n = np.diagonal(d_n, axis1=1, axis2=2)
            a["dhat"].add(np.abs(dhat) ** 2)
            a["cross"].add(np.abs(d_n) ** 2)
            a["err"].add(np.abs(err) ** 2)
            a["z"].add(np.abs(z_own) ** 2)
            a["re"].add(own_n.real)
            a["im"].add(own_n.imag)
            a["c_he"].add(np.abs(dhat_c * err.conj()))
            a["c_hz"].add(np.abs(dhat_c * z_own.conj()))
            a["c_ez"].add(np.abs(err * z_own.conj()))
            prod[n] += np.stack([
                (dhat_c * err.conj()).sum(axis=0),
                (dhat_c * z_own.conj()).sum(axis=0),
                (err * z_own.conj()).sum(axis=0),
                (np.abs(own_n) ** 2).sum(axis=0)])
        done += D
    out = {}
    for n in ns:
        a = acc[n]
        prods = prod[n] / n_draws
        est = {k: Estimate(v.mean, v.stderr) for k, v in a.items()}
        mean_sq = est["re"].mean ** 2 + est["im"].mean ** 2
        variance = prods[3].real - mean_sq
        decor = {}
        # |E[x y*]| against its standard error, bounded by E|x y*| / sqrt(N)
        for i, key in enumerate(("c_he", "c_hz", "c_ez")):
            acc_abs = a[key]
            rms = np.sqrt(acc_abs.ss / acc_abs.n)
            decor[key] = Estimate(np.abs(prods[i]), rms / math.sqrt(n_draws))
        out[n] = AppendixTerms(n, np.asarray(rho_by_n[n], dtype=float), est["dhat"],
                               est["cross"], est["err"], est["z"], est["re"], est["im"],
                               variance, decor)
    return out


def mmse_orthogonality(beta, L: int, c, up_index, tau_up: int, E_up: float,
                       n_draws: int, seed: int, chunk: int = DEFAULT_CHUNK) -> Estimate:
    """Per-(m, k) |E[ghat * conj(g - ghat)]| with its standard error."""
    beta = np.asarray(beta, dtype=float)
    ch_rng = make_rng(seed, STREAM_CHANNELS)
    nz_rng = make_rng(seed, STREAM_NOISE)
    s = np.zeros(beta.shape, dtype=complex)
    ss = np.zeros(beta.shape)
    done = 0
    while done < n_draws:
        D = min(chunk, n_draws - done)
        real = draw_channels(beta, L, {}, D, ch_rng)
        g_hat = simulate_uplink_estimation(real.g0, up_index, tau_up, E_up, c, nz_rng)
        prod = g_hat * (real.g0 - g_hat).conj()  # one sample per antenna
        s += prod.sum(axis=(0, 3))
        ss += (np.abs(prod) ** 2).sum(axis=(0, 3))
        done += D
    N = n_draws * L
    mean = s / N
    var = np.maximum(ss / N - np.abs(mean) ** 2, 0.0)
    return Estimate(np.abs(mean), np.sqrt(var / N))


@dataclass
class ChannelStatistics:
    """Ensemble mean, variance and pseudo-variance of d_kk'[n], each K x K."""

    mean: np.ndarray
    variance: np.ndarray
    pseudo_variance: np.ndarray
    n_draws: int


def effective_channel_statistics(beta, L: int, c, eta, up_index, tau_up: int, E_up: float,
                                 rho_n, n_draws: int, seed: int,
                                 chunk: int = DEFAULT_CHUNK) -> ChannelStatistics:
    """Sample moments of the effective downlink channel at one symbol index."""
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[1]
    ch_rng = make_rng(seed, STREAM_CHANNELS)
    nz_rng = make_rng(seed, STREAM_NOISE)
    s1 = np.zeros((K, K), dtype=complex)
    s_abs = np.zeros((K, K))
    s_sq = np.zeros((K, K), dtype=complex)
    done = 0
    while done < n_draws:
        D = min(chunk, n_draws - done)
        real = draw_channels(beta, L, {1: rho_n}, D, ch_rng)
        g_hat = simulate_uplink_estimation(real.g0, up_index, tau_up, E_up, c, nz_rng)
        d = effective_downlink_channel(real.channel_at(1), g_hat, eta)
        s1 += d.sum(axis=0)
        s_abs += (np.abs(d) ** 2).sum(axis=0)
        s_sq += (d * d).sum(axis=0)
        done += D
    mean = s1 / n_draws
    return ChannelStatistics(mean, s_abs / n_draws - np.abs(mean) ** 2,
                             s_sq / n_draws - mean**2, n_draws)


def gaussianity_study(beta, L: int, c, eta, up_index, tau_up: int, E_up: float,
                      pairs: Sequence[tuple[int, int]], n_draws: int, seed: int,
                      bin_count: int = 100, chunk: int = DEFAULT_CHUNK) -> Dict[str, float]:
    """
    Histogram KL distance between d_kk[0], d_kk'[0] (real and imaginary parts
    separately) and moment-matched Gaussians, averaged over `pairs` (k, k').

    Only the uplink-pilot groups of the UEs involved are simulated; ``c`` and
    ``eta`` are taken from the full network.
    """
    up = np.asarray(up_index, dtype=int)
    beta = np.asarray(beta, dtype=float)
    totals = {"own_re": 0.0, "own_im": 0.0, "cross_re": 0.0, "cross_im": 0.0}
    for pi, (k, kp) in enumerate(pairs):
        sub = np.flatnonzero(np.isin(up, [up[k], up[kp]]))
        pos = {u: i for i, u in enumerate(sub)}
        b, cc, ee = beta[:, sub], np.asarray(c)[:, sub], np.asarray(eta)[:, sub]
        ch_rng = make_rng(seed, STREAM_CHANNELS, pi)
        nz_rng = make_rng(seed, STREAM_NOISE, pi)
        own, cross = [], []
        done = 0
        while done < n_draws:
            D = min(chunk, n_draws - done)
            real = draw_channels(b, L, {}, D, ch_rng)
            g_hat = simulate_uplink_estimation(real.g0, up[sub], tau_up, E_up, cc, nz_rng,
                                               used_pilots_only=True)
            d = effective_downlink_channel(real.g0, g_hat, ee)
            own.append(d[:, pos[k], pos[k]])
            cross.append(d[:, pos[k], pos[kp]])
            done += D
        for name, x in (("own", np.concatenate(own)), ("cross", np.concatenate(cross))):
            for part, vals in (("re", x.real), ("im", x.imag)):
                dist = EmpiricalDistribution.from_samples(vals, bin_count)
                totals[f"{name}_{part}"] += kl_divergence(dist, float(vals.mean()), float(vals.var()))
    return {key: v / len(pairs) for key, v in totals.items()}


# ---------------------------------------------------------------------------
# Cellular oracle.  Draw layout: (draw, BS j, cell l, UE k, antenna).


@dataclass
class CellularTerms:
    n: int
    rho: np.ndarray                 # [l, k]
    dhat_power: Estimate            # E|dhat^l_lkk|^2        [l, k]
    interference: Estimate          # sum of E|d^l'_lki[n]|^2 over (l', i) != (l, k)
    error_power: Estimate           # E|dtilde^l_lkk|^2
    innovation_power: Estimate      # E|z_llkk[n]|^2
    own_mean_sq: np.ndarray         # |E d^l_lkk[n]|^2
    own_variance: np.ndarray        # Var d^l_lkk[n]

    def sinr_dt(self, E_d: float) -> np.ndarray:
        r2 = self.rho**2
        num = r2 * self.dhat_power.mean
        den = (self.interference.mean + r2 * self.error_power.mean
               + (1.0 - r2) * self.innovation_power.mean + 1.0 / E_d)
        return num / den

    def sinr_scsi(self, E_d: float) -> np.ndarray:
        return self.own_mean_sq / (self.interference.mean + self.own_variance + 1.0 / E_d)


def _cell_d(g: np.ndarray, g_hat_own: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """d[D, l', l, k, i] = sqrt(eta_l'i) g^l'_lk^T conj(ghat^l'_l'i)."""
    w = np.sqrt(eta)[None, :, :, None] * g_hat_own.conj()  # [D, l', i, M]
    D, J, Lc, Kc, M = g.shape
    out = g.reshape(D, J, Lc * Kc, M) @ w.transpose(0, 1, 3, 2)
    return out.reshape(D, J, Lc, Kc, -1)


def cellular_terms(beta3, M_c: int, gamma3, eta, tau_up: int, tau_dp: int, E_up: float,
                   E_dp: float, rho_by_n: Dict[int, np.ndarray], n_draws: int, seed: int,
                   chunk: int = 2000) -> Dict[int, CellularTerms]:
    """
    Ensemble estimates of the expectations behind the cellular SINRs.

    `beta3`, `gamma3` are [j, l, k]; `rho_by_n[n]` is [l, k].
    """
    beta3 = np.asarray(beta3, dtype=float)
    gamma3 = np.asarray(gamma3, dtype=float)
    eta = np.asarray(eta, dtype=float)
    L_c, _, K_c = beta3.shape
    dg = np.arange(L_c)
    snr_up = tau_up * E_up
    c3 = math.sqrt(snr_up) * beta3 / (snr_up * beta3.sum(axis=1, keepdims=True) + 1.0)
    c_own = c3[dg, dg, :]  # BS l estimating its own UE_lk
    g_own_var = gamma3[dg, dg, :]
    # UE-side statistics for the downlink MMSE rule
    amp_mean = M_c * np.sqrt(eta) * g_own_var  # E d^l'_l'k,l'k   [l', k]
    means = amp_mean[:, None, :] * beta3 / beta3[dg, dg, :][:, None, :]  # E d^l'_lkk
    var_of = M_c * (eta * g_own_var)[:, None, :] * beta3
    own_mean = amp_mean
    own_var = var_of[dg, dg, :]
    snr_dp = tau_dp * E_dp
    coef = math.sqrt(snr_dp) * own_var / (1.0 + snr_dp * var_of.sum(axis=0))
    pilot_offset = math.sqrt(snr_dp) * means.sum(axis=0)

    ch_rng = make_rng(seed, STREAM_CHANNELS)
    nz_rng = make_rng(seed, STREAM_NOISE)
    Phi = pilot_matrix(np.arange(K_c), tau_up)
    Psi = pilot_matrix(np.arange(K_c), max(tau_dp, 1))
    ns = sorted(rho_by_n)
    acc = {n: {k: Accumulator() for k in ("dhat", "intf", "err", "z", "re", "im", "pw")}
           for n in ns}
    done = 0
    while done < n_draws:
        D = min(chunk, n_draws - done)
        shape = (D, L_c, L_c, K_c, M_c)
        var = beta3[None, :, :, :, None]
        g0 = complex_gaussian(ch_rng, shape, var)
        z = {n: complex_gaussian(ch_rng, shape, var) for n in ns if n != 0}
        # uplink: Y_j = sqrt(tau E) sum_{l', i'} g^j_l'i' phi_i'^H + W_j   (D, j, M, tau)
        Y = math.sqrt(snr_up) * (g0.sum(axis=2).transpose(0, 1, 3, 2) @ Phi.T)
        Y = Y + complex_gaussian(nz_rng, Y.shape)
        y_desp = (Y @ Phi).transpose(0, 1, 3, 2)
        g_hat_own = c_own[None, :, :, None] * y_desp  # [D, j, i, M]
        d0 = _cell_d(g0, g_hat_own, eta)
        if tau_dp > 0:
            W = np.sqrt(eta)[None, :, :, None] * g_hat_own.conj()
            X = math.sqrt(snr_dp) * (W.transpose(0, 1, 3, 2) @ Psi.T)  # (D, j, M, tau)
            y_dp = sum(g0[:, j].reshape(D, L_c * K_c, M_c) @ X[:, j] for j in range(L_c))
            y_dp = y_dp.reshape(D, L_c, K_c, -1)
            y_dp = y_dp + complex_gaussian(nz_rng, y_dp.shape)
            y_desp_dp = (y_dp * Psi.T[None, None]).sum(axis=-1)
            dhat = own_mean[None] + coef[None] * (y_desp_dp - pilot_offset[None])
        else:
            dhat = np.broadcast_to(own_mean, (D, L_c, K_c))
        # d0[:, l', l, k, i] with l' = l and i = k  ->  [D, l, k]
        d0_own = np.stack([d0[:, l, l, :, :][:, np.arange(K_c), np.arange(K_c)]
                           for l in range(L_c)], axis=1)
        err = d0_own - dhat
        for n in ns:
            r = np.asarray(rho_by_n[n], dtype=float)[None, None, :, :, None]
            if n == 0:
                d_n = d0
                z_own = np.zeros_like(d0_own)
            else:
                g_n = r * g0 + np.sqrt(1.0 - r * r) * z[n]
                d_n = _cell_d(g_n, g_hat_own, eta)
                zd = _cell_d(z[n], g_hat_own, eta)
                z_own = np.stack([zd[:, l, l, :, :][:, np.arange(K_c), np.arange(K_c)]
                                  for l in range(L_c)], axis=1)
            own_n = np.stack([d_n[:, l, l, :, :][:, np.arange(K_c), np.arange(K_c)]
                              for l in range(L_c)], axis=1)
            total = (np.abs(d_n) ** 2).sum(axis=(1, 4))  # [D, l, k] over l', i
            a = acc[n]
            a["dhat"].add(np.abs(dhat) ** 2)
            a["intf"].add(total - np.abs(own_n) ** 2)
            a["err"].add(np.abs(err) ** 2)
            a["z"].add(np.abs(z_own) ** 2)
            a["re"].add(own_n.real)
            a["im"].add(own_n.imag)
            a["pw"].add(np.abs(own_n) ** 2)
        done += D
    out = {}
    for n in ns:
        a = acc[n]
        mean_sq = a["re"].mean ** 2 + a["im"].mean ** 2
        out[n] = CellularTerms(
            n, np.asarray(rho_by_n[n], dtype=float),
            Estimate(a["dhat"].mean, a["dhat"].stderr),
            Estimate(a["intf"].mean, a["intf"].stderr),
            Estimate(a["err"].mean, a["err"].stderr),
            Estimate(a["z"].mean, a["z"].stderr),
            mean_sq, a["pw"].mean - mean_sq)
    return out

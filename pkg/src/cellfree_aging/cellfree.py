"""
Closed-form downlink SINR / SE of a cell-free network with channel aging.

Arrays follow the (AP m, UE k) layout: `beta`, `gamma`, `eta` are M x K.
Pilot Gram matrices are K x K with 0/1 entries. A rho table has shape
(K, n_symbols) and holds rho_k[n] for the absolute symbol index n of the frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DegenerateAPError, DimensionError, DomainError
from .numerics import jakes_rho


@dataclass(frozen=True)
class EstimationStats:
    c: np.ndarray
    gamma: np.ndarray
    eta: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ChannelMoments:
    """Second-order statistics of the effective downlink channel d_kk'[n].

    `mean0` and `pseudo0` are the mean and pseudo-variance at rho = 1; the
    per-symbol values scale them by rho_k[n] and rho_k[n]**2 respectively.
    `error_var` is varsigma_kk - kappa_k, the variance of the UE-side
    estimation error, evaluated without the cancellation of the difference.
    """

    mean0: np.ndarray
    varsigma: np.ndarray
    pseudo0: np.ndarray
    kappa: np.ndarray
    error_var: np.ndarray

    def mu(self, rho_n) -> np.ndarray:
        """Mean matrix mu_kk'[n] for a length-K vector of rho_k[n]."""
        return np.asarray(rho_n)[:, None] * self.mean0

    def pseudo(self, rho_n) -> np.ndarray:
        return np.asarray(rho_n)[:, None] ** 2 * self.pseudo0


def rho_table(velocities, f_c: float, T_s: float, n_symbols: int) -> np.ndarray:
    """rho_k[n] for every UE and n = 0 .. n_symbols-1, shape (K, n_symbols)."""
    v = np.asarray(velocities, dtype=float)
    n = np.arange(n_symbols, dtype=float)
    return jakes_rho(v[:, None], f_c, T_s, n[None, :]).reshape(v.size, n_symbols)


def uplink_estimation_stats(beta, up_gram, tau_up: int, E_up: float) -> EstimationStats:
    """MMSE scaling c_mk and estimate variance gamma_mk for every AP-UE pair."""
    beta = np.asarray(beta, dtype=float)
    G = np.asarray(up_gram, dtype=float)
    snr = tau_up * E_up
    # sum_k' beta_mk' |phi_k'^H phi_k|^2
    contamination = beta @ (G * G)
    c = np.sqrt(snr) * beta / (snr * contamination + 1.0)
    gamma = np.sqrt(snr) * c * beta
    return EstimationStats(c, gamma)


def uniform_power_control(gamma, L: int) -> np.ndarray:
    """Full-power equal split: eta_mk = 1 / (L * sum_k' gamma_mk')."""
    gamma = np.asarray(gamma, dtype=float)
    row = gamma.sum(axis=1)
    if np.any(row <= 0):
        bad = np.flatnonzero(row <= 0).tolist()
        raise DegenerateAPError(f"APs {bad} have zero estimated channel energy")
    return np.repeat((1.0 / (L * row))[:, None], gamma.shape[1], axis=1)


def estimation_stats(beta, up_gram, tau_up: int, E_up: float, L: int) -> EstimationStats:
    s = uplink_estimation_stats(beta, up_gram, tau_up, E_up)
    return EstimationStats(s.c, s.gamma, uniform_power_control(s.gamma, L))


def downlink_channel_moments(beta, gamma, eta, up_gram, dp_gram, tau_dp: int,
                             E_dp: float, L: int) -> ChannelMoments:
    """
    Mean, variance and pseudo-variance of d_kk'[n], and the variance kappa_k
    of the UE-side downlink channel estimate.

    All outputs are K x K (indexed [k, k']) except `kappa` (length K).
    """
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    Gu = np.asarray(up_gram, dtype=float)
    Gd = np.asarray(dp_gram, dtype=float)
    # ratio[m, k, k'] = beta_mk / beta_mk'
    ratio = beta[:, :, None] / beta[:, None, :]
    w = L * np.sqrt(eta) * gamma  # [m, k']
    mean0 = np.einsum("mj,mkj->kj", w, ratio) * Gu
    varsigma = beta.T @ (L * eta * gamma)
    pseudo0 = np.einsum("mj,mkj->kj", L * eta * gamma**2, ratio**2) * Gu**2
    snr = tau_dp * E_dp
    own = np.diag(varsigma)
    total = np.sum(varsigma * Gd**2, axis=1)
    den = 1.0 + snr * total
    kappa = snr * own**2 / den
    # own - kappa = own (1 + snr (total - own)) / den; total - own sums only the others
    others = np.sum(varsigma * Gd**2, axis=1, where=~np.eye(len(own), dtype=bool))
    error_var = own * (1.0 + snr * others) / den
    return ChannelMoments(mean0, varsigma, pseudo0, kappa, error_var)


def _sinr_parts(moments: ChannelMoments):
    m0 = moments.mean0
    off = ~np.eye(m0.shape[0], dtype=bool)
    coherent = np.diag(m0) ** 2
    mean_leak = np.sum(m0**2, axis=1, where=off)  # sum_{k' != k} of squared cross means
    var_others = np.sum(moments.varsigma, axis=1, where=off)
    return coherent, mean_leak, var_others, np.diag(moments.varsigma)


def sinr_dt_table(moments: ChannelMoments, E_d: float, rho) -> np.ndarray:
    """SINR with downlink training for every UE and every column of `rho` (K x N)."""
    coh, leak, var_o, var_s = _sinr_parts(moments)
    r2 = np.asarray(rho, dtype=float) ** 2
    kap = moments.kappa[:, None]
    num = r2 * E_d * (coh[:, None] + kap)
    # varsigma_kk - rho^2 kappa_k, split so nothing cancels
    self_term = (1.0 - r2) * var_s[:, None] + r2 * moments.error_var[:, None]
    den = E_d * (var_o[:, None] + r2 * leak[:, None]) + E_d * self_term + 1.0
    return num / den


def sinr_scsi_table(moments: ChannelMoments, E_d: float, rho) -> np.ndarray:
    """SINR with statistical CSI only, same layout as `sinr_dt_table`."""
    coh, leak, var_o, var_s = _sinr_parts(moments)
    r2 = np.asarray(rho, dtype=float) ** 2
    num = r2 * E_d * coh[:, None]
    den = E_d * (var_o[:, None] + r2 * leak[:, None]) + E_d * var_s[:, None] + 1.0
    return num / den


def sinr_dt(k: int, n: int, moments: ChannelMoments, E_d: float, rho) -> float:
    """Downlink-training SINR of UE `k` at symbol `n` (rho is the K x N table)."""
    col = np.asarray(rho, dtype=float)[:, n:n + 1]
    return float(sinr_dt_table(moments, E_d, col)[k, 0])


def sinr_scsi(k: int, n: int, moments: ChannelMoments, E_d: float, rho) -> float:
    col = np.asarray(rho, dtype=float)[:, n:n + 1]
    return float(sinr_scsi_table(moments, E_d, col)[k, 0])


def se_per_symbol(sinr):
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise DomainError("SINR must be non-negative")
    out = np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


def average_se_dt(per_symbol_se, tau_up: int, tau_dp: int, tau_dd: int) -> float:
    """Frame-average SE with downlink training.

    `per_symbol_se` holds SE[n] for n = tau_up + tau_dp, ..., tau_frame - 1.
    """
    trace = np.asarray(per_symbol_se, dtype=float).ravel()
    if trace.size != tau_dd:
        raise DimensionError(f"trace has {trace.size} symbols, expected tau_dd={tau_dd}")
    if tau_dd == 0:
        return 0.0
    return float(trace.sum() / (tau_up + tau_dp + tau_dd))


def average_se_scsi(per_symbol_se, tau_up: int, tau_dd: int) -> float:
    """Frame-average SE with statistical CSI; data runs from n = tau_up."""
    return average_se_dt(per_symbol_se, tau_up, 0, tau_dd)


def average_se_curve(se_table, data_start: int, tau_dd_values: Iterable[int]) -> np.ndarray:
    """
    Frame-average SE of every UE for several data lengths at once.

    `se_table` is K x N with SE[n] at absolute symbol n; the frame is
    ``data_start + tau_dd`` long. Returns an array (len(tau_dd_values), K).
    """
    se = np.asarray(se_table, dtype=float)
    csum = np.concatenate([np.zeros((se.shape[0], 1)), np.cumsum(se, axis=1)], axis=1)
    out = []
    for tdd in tau_dd_values:
        end = data_start + int(tdd)
        if end > se.shape[1]:
            raise DimensionError(f"SE table covers {se.shape[1]} symbols, need {end}")
        total = csum[:, end] - csum[:, data_start]
        out.append(total / end if tdd > 0 else np.zeros(se.shape[0]))
    return np.array(out)


def sum_se(per_ue_average) -> float:
    return float(np.sum(np.asarray(per_ue_average, dtype=float)))


def optimal_tau_dd(evaluator: Callable[[int], float], grid) -> tuple[int, float]:
    """Grid point maximising `evaluator`; ties go to the smaller tau_dd."""
    best = None
    for t in sorted(grid):
        val = evaluator(t)
        if best is None or val > best[1]:
            best = (t, val)
    if best is None:
        raise DomainError("empty tau_dd grid")
    return best

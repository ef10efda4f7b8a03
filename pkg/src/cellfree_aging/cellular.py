"""
Closed-form downlink SINR of a multi-cell massive MIMO network with pilot
reuse one, channel aging and (optionally) beamformed downlink pilots.

Three-index arrays are laid out ``[j, l, k]``: observing BS j, serving cell l,
UE k of that cell. So ``beta[j, l, k]`` is the large-scale coefficient
between BS j and UE_lk. Per-UE arrays are ``[l, k]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAPError, DimensionError
from .scenario import Cellular, Deployment


@dataclass(frozen=True)
class CellularStats:
    beta: np.ndarray   # [j, l, k]
    gamma: np.ndarray  # [j, l, k]
    eta: np.ndarray    # [j, i]: BS j -> its own UE i
    kappa: np.ndarray  # [l, k]
    M_c: int
    error_var: np.ndarray = None  # own beam variance minus kappa, [l, k]

    def __post_init__(self):
        if self.error_var is None:
            own = self.M_c * self.eta * self.serving_gamma * self.serving_beta
            object.__setattr__(self, "error_var", own - self.kappa)

    @property
    def serving_gamma(self) -> np.ndarray:
        """gamma^l_lk, shape [l, k]."""
        L_c = self.gamma.shape[0]
        return self.gamma[np.arange(L_c), np.arange(L_c), :]

    @property
    def serving_beta(self) -> np.ndarray:
        L_c = self.beta.shape[0]
        return self.beta[np.arange(L_c), np.arange(L_c), :]


def split_beta(beta, L_c: int, K_c: int) -> np.ndarray:
    """Reshape a (L_c, L_c*K_c) cell-major beta matrix to [j, l, k]."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (L_c, L_c * K_c):
        raise DimensionError(f"beta has shape {beta.shape}, expected {(L_c, L_c * K_c)}")
    return beta.reshape(L_c, L_c, K_c)


def cellular_estimation_stats(beta, tau_up: int, E_up: float) -> np.ndarray:
    """MMSE estimate variances gamma^j_lk under pilot reuse one."""
    beta = np.asarray(beta, dtype=float)
    snr = tau_up * E_up
    # UE_lk shares its pilot with UE_l'k of every cell l'
    contamination = beta.sum(axis=1, keepdims=True)
    c = np.sqrt(snr) * beta / (snr * contamination + 1.0)
    return np.sqrt(snr) * c * beta


def cellular_power_control(gamma, M_c: int) -> np.ndarray:
    """eta_ji = 1 / (M_c * sum_i' gamma^j_ji'), full power at every BS."""
    gamma = np.asarray(gamma, dtype=float)
    L_c = gamma.shape[0]
    own = gamma[np.arange(L_c), np.arange(L_c), :]
    total = own.sum(axis=1)
    if np.any(total <= 0):
        raise DegenerateAPError("a BS has zero estimated channel energy")
    return np.repeat((1.0 / (M_c * total))[:, None], own.shape[1], axis=1)


def cellular_kappa(beta, gamma, eta, M_c: int, tau_dp: int, E_dp: float) -> np.ndarray:
    """Variance of the UE-side downlink channel estimate, shape [l, k]."""
    return _kappa_and_error(beta, gamma, eta, M_c, tau_dp, E_dp)[0]


def _kappa_and_error(beta, gamma, eta, M_c, tau_dp, E_dp):
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    L_c = beta.shape[0]
    d = np.arange(L_c)
    g_own = gamma[d, d, :]  # gamma^l'_l'k  [l', k]
    snr = tau_dp * E_dp
    # var_of[l', l, k] = M_c eta_l'k gamma^l'_l'k beta^l'_lk: variance of BS l''s
    # pilot beam for UE_l'k as seen by UE_lk
    var_of = M_c * (eta * g_own)[:, None, :] * beta
    own = var_of[d, d, :]
    den = 1.0 + snr * var_of.sum(axis=0)
    others = var_of.sum(axis=0, where=~np.eye(L_c, dtype=bool)[:, :, None])
    return snr * own**2 / den, own * (1.0 + snr * others) / den


def cellular_stats(beta, M_c: int, tau_up: int, tau_dp: int, E_up: float,
                   E_dp: float) -> CellularStats:
    gamma = cellular_estimation_stats(beta, tau_up, E_up)
    eta = cellular_power_control(gamma, M_c)
    kappa, error_var = _kappa_and_error(beta, gamma, eta, M_c, tau_dp, E_dp)
    return CellularStats(np.asarray(beta, dtype=float), gamma, eta, kappa, M_c, error_var)


def stats_from_deployment(dep: Deployment, topology: Cellular, tau_up: int,
                          tau_dp: int) -> CellularStats:
    beta = split_beta(dep.beta, topology.L_c, topology.K_c)
    return cellular_stats(beta, topology.M_c, tau_up, tau_dp, dep.E_up, dep.E_dp)


def _sinr_parts(stats: CellularStats):
    beta, eta, M_c = stats.beta, stats.eta, stats.M_c
    d = np.arange(beta.shape[0])
    g_own = stats.serving_gamma
    coherent = (M_c * np.sqrt(eta) * g_own) ** 2
    # sum_l' sum_i M_c eta_l'i gamma^l'_l'i beta^l'_lk
    L_c, _, K_c = beta.shape
    # terms[j, i, l, k] = M_c eta_ji gamma^j_ji beta^j_lk
    terms = (M_c * eta * g_own)[:, :, None, None] * beta[:, None, :, :]
    own_var = M_c * eta * g_own * stats.serving_beta
    # everything except the UE's own beam, summed directly rather than total - own
    is_own = (np.eye(L_c, dtype=bool)[:, None, :, None]
              & np.eye(K_c, dtype=bool)[None, :, None, :])
    var_others = terms.sum(axis=(0, 1), where=~is_own)
    # inter-cell coherent leakage from the co-pilot UEs of the other cells
    amp = M_c * np.sqrt(eta) * g_own  # [l', k]
    own_beta = beta[d, d, :]  # beta^l'_l'k
    leak_terms = (amp[:, None, :] * beta / own_beta[:, None, :]) ** 2  # [l', l, k]
    leak = leak_terms.sum(axis=0, where=~np.eye(L_c, dtype=bool)[:, :, None])
    return coherent, var_others, leak, own_var


def cellular_sinr_dt_table(stats: CellularStats, E_d: float, rho) -> np.ndarray:
    """
    Downlink-training SINR of every UE_lk at every symbol.

    `rho` has shape (L_c, K_c, N); the result has the same shape.
    """
    coh, var_others, leak, own_var = _sinr_parts(stats)
    r2 = np.asarray(rho, dtype=float) ** 2
    kap = stats.kappa[..., None]
    num = r2 * (coh[..., None] + kap)
    # total variance - rho^2 kappa, split so that nothing cancels
    rest = var_others[..., None] + (1.0 - r2) * own_var[..., None]
    den = rest + r2 * stats.error_var[..., None] + r2 * leak[..., None] + 1.0 / E_d
    return num / den


def cellular_sinr_scsi_table(stats: CellularStats, E_d: float, rho) -> np.ndarray:
    coh, var_others, leak, own_var = _sinr_parts(stats)
    r2 = np.asarray(rho, dtype=float) ** 2
    num = r2 * coh[..., None]
    den = (var_others + own_var)[..., None] + r2 * leak[..., None] + 1.0 / E_d
    return num / den


def cellular_sinr_dt(l: int, k: int, n: int, stats: CellularStats, E_d: float, rho) -> float:
    col = np.asarray(rho, dtype=float)[..., n:n + 1]
    return float(cellular_sinr_dt_table(stats, E_d, col)[l, k, 0])


def cellular_sinr_scsi(l: int, k: int, n: int, stats: CellularStats, E_d: float, rho) -> float:
    col = np.asarray(rho, dtype=float)[..., n:n + 1]
    return float(cellular_sinr_scsi_table(stats, E_d, col)[l, k, 0])

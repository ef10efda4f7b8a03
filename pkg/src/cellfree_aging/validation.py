"""
Closed form vs Monte-Carlo comparison tables and the invariant self-test.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import cellfree as cf
from . import cellular as cl
from . import montecarlo as mc
from .numerics import jakes_rho, make_rng
from .pilots import make_pilot_book
from .scenario import CellFree, Cellular, ScenarioConfig, build_deployment

DESK_CELLFREE = ScenarioConfig(topology=CellFree(M=25, L=2), K=8, tau_up=4, tau_dp=4, v_max=45)
DESK_CELLULAR = ScenarioConfig(topology=Cellular(L_c=2, M_c=30, K_c=4), K=8, tau_up=4, tau_dp=4,
                               v_max=45)
ORACLE_SYMBOLS = (0, 100, 400)
SE_SIGMAS = 3.0
SINR_REL_TOL = 0.03
# ~420 rows at 3 SE each give about one false alarm per seed under the null,
# so the reference tables use a fixed seed
ORACLE_SEED = 1


@dataclass
class OracleRow:
    term: str
    index: str
    n: int
    closed_form: float
    estimate: float
    stderr: float
    tolerance: str
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _se_row(term, index, n, closed, est, se) -> OracleRow:
    closed, est, se = float(closed), float(est), float(se)
    return OracleRow(term, index, n, closed, est, se, f"{SE_SIGMAS:g} SE",
                     abs(est - closed) <= SE_SIGMAS * se)


def _rel_row(term, index, n, closed, est) -> OracleRow:
    closed, est = float(closed), float(est)
    return OracleRow(term, index, n, closed, est, float("nan"), f"{SINR_REL_TOL:.0%} rel",
                     abs(est / closed - 1.0) <= SINR_REL_TOL)


def cellfree_oracle(config: ScenarioConfig, seed: int, n_draws: int = 100_000,
                    symbols: Sequence[int] = ORACLE_SYMBOLS, realization_seed: int = 1
                    ) -> List[OracleRow]:
    """Compare every expectation term and both SINRs with their closed forms."""
    L = config.topology.L
    dep = build_deployment(config, rng_seed=realization_seed)
    book = make_pilot_book(dep.beta, config.tau_up, config.tau_dp)
    st = cf.estimation_stats(dep.beta, book.up_gram, config.tau_up, dep.E_up, L)
    mom = cf.downlink_channel_moments(dep.beta, st.gamma, st.eta, book.up_gram, book.dp_gram,
                                      config.tau_dp, dep.E_dp, L)
    rho = cf.rho_table(dep.velocities, config.f_c, config.symbol_time, max(symbols) + 1)
    terms = mc.appendix_terms(dep.beta, L, st.gamma, st.eta, st.c, book.up_index,
                              book.dp_index, config.tau_up, config.tau_dp, dep.E_up, dep.E_dp,
                              {n: rho[:, n] for n in symbols}, n_draws, seed)
    K = config.K
    own_mean = np.diag(mom.mean0)
    own_var = np.diag(mom.varsigma)
    rows = []
    for n in symbols:
        t = terms[n]
        mu = mom.mu(rho[:, n])
        for k in range(K):
            if n == symbols[0]:
                rows.append(_se_row("E|dhat_kk|^2", f"{k}", n, own_mean[k] ** 2 + mom.kappa[k],
                                    t.dhat_power.mean[k], t.dhat_power.stderr[k]))
                rows.append(_se_row("E|dtilde_kk|^2", f"{k}", n, mom.error_var[k],
                                    t.error_power.mean[k], t.error_power.stderr[k]))
            for kp in range(K):
                rows.append(_se_row("E|d_kk'[n]|^2", f"{k},{kp}", n,
                                    mom.varsigma[k, kp] + mu[k, kp] ** 2,
                                    t.cross_power.mean[k, kp], t.cross_power.stderr[k, kp]))
            if n > 0:
                rows.append(_se_row("E|z_kk[n]|^2", f"{k}", n, own_var[k],
                                    t.innovation_power.mean[k], t.innovation_power.stderr[k]))
                for name, est in t.decorrelation.items():
                    rows.append(_se_row(f"|cov {name}|", f"{k}", n, 0.0, est.mean[k],
                                        est.stderr[k]))
        dt = cf.sinr_dt_table(mom, dep.E_d, rho[:, n:n + 1])[:, 0]
        sc = cf.sinr_scsi_table(mom, dep.E_d, rho[:, n:n + 1])[:, 0]
        for k, (a, b) in enumerate(zip(t.sinr_dt(dep.E_d), t.sinr_scsi(dep.E_d))):
            rows.append(_rel_row("SINR DT", f"{k}", n, dt[k], a))
            rows.append(_rel_row("SINR sCSI", f"{k}", n, sc[k], b))
    return rows


def cellular_oracle(config: ScenarioConfig, seed: int, n_draws: int = 100_000,
                    symbols: Sequence[int] = ORACLE_SYMBOLS, realization_seed: int = 1
                    ) -> List[OracleRow]:
    topo = config.topology
    dep = build_deployment(config, rng_seed=realization_seed)
    stats = cl.stats_from_deployment(dep, topo, config.tau_up, config.tau_dp)
    rho = cf.rho_table(dep.velocities, config.f_c, config.symbol_time, max(symbols) + 1)
    rho = rho.reshape(topo.L_c, topo.K_c, -1)
    terms = mc.cellular_terms(stats.beta, topo.M_c, stats.gamma, stats.eta, config.tau_up,
                              config.tau_dp, dep.E_up, dep.E_dp,
                              {n: rho[:, :, n] for n in symbols}, n_draws, seed)
    coh, var_others, leak, own_var = cl._sinr_parts(stats)
    rows = []
    for n in symbols:
        t = terms[n]
        r2 = rho[:, :, n] ** 2
        dt = cl.cellular_sinr_dt_table(stats, dep.E_d, rho[:, :, n:n + 1])[..., 0]
        sc = cl.cellular_sinr_scsi_table(stats, dep.E_d, rho[:, :, n:n + 1])[..., 0]
        est_dt, est_sc = t.sinr_dt(dep.E_d), t.sinr_scsi(dep.E_d)
        for l in range(topo.L_c):
            for k in range(topo.K_c):
                idx = f"{l},{k}"
                if n == symbols[0]:
                    rows.append(_se_row("E|dhat|^2", idx, n, coh[l, k] + stats.kappa[l, k],
                                        t.dhat_power.mean[l, k], t.dhat_power.stderr[l, k]))
                    rows.append(_se_row("E|dtilde|^2", idx, n, stats.error_var[l, k],
                                        t.error_power.mean[l, k], t.error_power.stderr[l, k]))
                rows.append(_se_row("interference", idx, n,
                                    var_others[l, k] + r2[l, k] * leak[l, k],
                                    t.interference.mean[l, k], t.interference.stderr[l, k]))
                if n > 0:
                    rows.append(_se_row("E|z[n]|^2", idx, n, own_var[l, k],
                                        t.innovation_power.mean[l, k],
                                        t.innovation_power.stderr[l, k]))
                rows.append(_rel_row("SINR DT", idx, n, dt[l, k], est_dt[l, k]))
                rows.append(_rel_row("SINR sCSI", idx, n, sc[l, k], est_sc[l, k]))
    return rows


def oracle_suite(config: Optional[ScenarioConfig] = None, seed: int = ORACLE_SEED,
                 n_draws: int = 100_000) -> List[OracleRow]:
    """Oracle table for `config`, or for both desk instances when None."""
    if config is None:
        return (cellfree_oracle(DESK_CELLFREE, seed, n_draws)
                + cellular_oracle(DESK_CELLULAR, seed, n_draws))
    if config.is_cellular:
        return cellular_oracle(config, seed, n_draws)
    return cellfree_oracle(config, seed, n_draws)


# ---------------------------------------------------------------------------
# Invariant self-test


def static_cellfree_sinr(beta, gamma, eta, up_gram, dp_gram, snr_dp, E_d, L):
    """Aging-free SINRs written out term by term: (dt, scsi) per UE."""
    M, K = beta.shape

    def var(k, kp):
        return sum(L * eta[m, kp] * gamma[m, kp] * beta[m, k] for m in range(M))

    dt, sc = np.zeros(K), np.zeros(K)
    for k in range(K):
        a = sum(L * np.sqrt(eta[m, k]) * gamma[m, k] for m in range(M))
        own = var(k, k)
        others = sum(var(k, kp) for kp in range(K) if kp != k)
        dp_others = sum(var(k, kp) * dp_gram[k, kp] for kp in range(K) if kp != k)
        kappa = snr_dp * own * own / (1.0 + snr_dp * (own + dp_others))
        error = own * (1.0 + snr_dp * dp_others) / (1.0 + snr_dp * (own + dp_others))
        leak = 0.0
        for kp in range(K):
            if kp != k and up_gram[k, kp]:
                leak += sum(L * np.sqrt(eta[m, kp]) * gamma[m, kp] * beta[m, k] / beta[m, kp]
                            for m in range(M)) ** 2
        dt[k] = (a * a + kappa) / (others + leak + error + 1.0 / E_d)
        sc[k] = a * a / (others + leak + own + 1.0 / E_d)
    return dt, sc


def selftest(n_deployments: int = 20, seed: int = 0) -> List[dict]:
    """Fast invariant checks; every row has `name`, `passed`, `detail`."""
    rows = []
    rho = float(jakes_rho(100 / 3.6, 2e9, 1e-6, 20))
    rows.append({"name": "jakes anchor", "passed": bool(abs(rho - 0.99986) <= 1e-4),
                 "detail": f"rho={rho:.6f}"})
    rng = make_rng(seed, 99)
    viol = checked = 0
    worst_static = worst_power = 0.0
    cross_ok = True
    for i in range(n_deployments):
        s = int(rng.integers(2**31))
        cfg = DESK_CELLFREE.with_(v_max=float(rng.uniform(0, 85)))
        dep = build_deployment(cfg, rng_seed=s)
        book = make_pilot_book(dep.beta, cfg.tau_up, cfg.tau_dp)
        cross_ok &= book.cross_orthogonal()
        st = cf.estimation_stats(dep.beta, book.up_gram, cfg.tau_up, dep.E_up, 2)
        worst_power = max(worst_power, np.abs(2 * (st.eta * st.gamma).sum(axis=1) - 1).max())
        mom = cf.downlink_channel_moments(dep.beta, st.gamma, st.eta, book.up_gram,
                                          book.dp_gram, cfg.tau_dp, dep.E_dp, 2)
        r = cf.rho_table(dep.velocities, cfg.f_c, cfg.symbol_time, 600)
        a, b = cf.sinr_dt_table(mom, dep.E_d, r), cf.sinr_scsi_table(mom, dep.E_d, r)
        viol += int(np.count_nonzero(a < b))
        checked += a.size
        ones = np.ones((cfg.K, 1))
        ref_dt, ref_sc = static_cellfree_sinr(dep.beta, st.gamma, st.eta, book.up_gram,
                                              book.dp_gram, cfg.tau_dp * dep.E_dp, dep.E_d, 2)
        got_dt = cf.sinr_dt_table(mom, dep.E_d, ones)[:, 0]
        got_sc = cf.sinr_scsi_table(mom, dep.E_d, ones)[:, 0]
        worst_static = max(worst_static, np.abs(got_dt / ref_dt - 1).max(),
                           np.abs(got_sc / ref_sc - 1).max())
        ccfg = DESK_CELLULAR.with_(v_max=cfg.v_max)
        cdep = build_deployment(ccfg, rng_seed=s)
        stats = cl.stats_from_deployment(cdep, ccfg.topology, ccfg.tau_up, ccfg.tau_dp)
        cr = cf.rho_table(cdep.velocities, ccfg.f_c, ccfg.symbol_time, 600).reshape(2, 4, -1)
        a = cl.cellular_sinr_dt_table(stats, cdep.E_d, cr)
        b = cl.cellular_sinr_scsi_table(stats, cdep.E_d, cr)
        viol += int(np.count_nonzero(a < b))
        checked += a.size
    rows.append({"name": "dominance dt >= scsi", "passed": viol == 0,
                 "detail": f"{viol} violations in {checked}"})
    rows.append({"name": "static reduction", "passed": bool(worst_static <= 1e-12),
                 "detail": f"max rel err {worst_static:.2e}"})
    rows.append({"name": "full power", "passed": bool(worst_power <= 1e-12),
                 "detail": f"max rel err {worst_power:.2e}"})
    rows.append({"name": "pilot cross-orthogonality", "passed": bool(cross_ok), "detail": ""})
    return rows

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellfree_aging import cellfree as cf
from cellfree_aging import cellular as cl
from cellfree_aging.numerics import make_rng
from cellfree_aging.scenario import Cellular, ScenarioConfig, build_deployment

DESK = ScenarioConfig(topology=Cellular(L_c=2, M_c=30, K_c=4), K=8, tau_up=4, tau_dp=4, v_max=45)


def desk_stats(seed, tau_dp=4):
    dep = build_deployment(DESK, seed)
    return dep, cl.stats_from_deployment(dep, DESK.topology, 4, tau_dp)


def test_single_cell_reduces_to_cell_free():
    beta = make_rng(0).uniform(0.1, 1, (1, 3))
    g_cell = cl.cellular_estimation_stats(beta.reshape(1, 1, 3), 3, 2.0)
    g_cf = cf.uplink_estimation_stats(beta, np.eye(3), 3, 2.0).gamma
    assert np.allclose(g_cell.reshape(1, 3), g_cf, rtol=1e-14)


def test_gamma_limits():
    beta = np.ones((2, 2, 1))
    assert np.allclose(cl.cellular_estimation_stats(beta, 1, 1e14), 0.5, rtol=1e-9)
    assert np.all(cl.cellular_estimation_stats(beta, 1, 0.0) == 0)


def test_kappa_limits():
    beta = make_rng(1).uniform(0.1, 1, (1, 1, 2))
    gamma = cl.cellular_estimation_stats(beta, 2, 10.0)
    eta = cl.cellular_power_control(gamma, 20)
    kap = cl.cellular_kappa(beta, gamma, eta, 20, 2, 1e14)
    assert np.allclose(kap, 20 * eta * gamma[0, 0] * beta[0, 0], rtol=1e-9)
    assert np.all(cl.cellular_kappa(beta, gamma, eta, 20, 0, 1.0) == 0)


def test_invariants():
    for seed in range(10):
        _, s = desk_stats(seed)
        assert np.all(s.gamma > 0) and np.all(s.gamma <= s.beta)
        assert np.all(s.kappa >= 0)
        full = 30 * (s.eta * s.serving_gamma).sum(axis=1)
        assert np.allclose(full, 1.0, atol=1e-12)


def test_sinr_zero_when_fully_aged():
    dep, s = desk_stats(2)
    rho = np.zeros((2, 4, 1))
    assert np.all(cl.cellular_sinr_dt_table(s, dep.E_d, rho) == 0)


def test_static_reduction():
    # rho = 1 against the same expression written without any aging factor
    dep, s = desk_stats(3)
    coh = (30 * np.sqrt(s.eta) * s.serving_gamma) ** 2
    per_bs = 30 * (s.eta * s.serving_gamma).sum(axis=1)
    interf = np.zeros((2, 4))
    for l in range(2):
        for k in range(4):
            interf[l, k] = sum(per_bs[j] * s.beta[j, l, k] for j in range(2))
            for lp in range(2):
                if lp != l:
                    interf[l, k] += (30 * np.sqrt(s.eta[lp, k]) * s.gamma[lp, lp, k]
                                     * s.beta[lp, l, k] / s.beta[lp, lp, k]) ** 2
    ones = np.ones((2, 4, 1))
    want_dt = (coh + s.kappa) / (interf - s.kappa + 1 / dep.E_d)
    want_sc = coh / (interf + 1 / dep.E_d)
    assert np.allclose(cl.cellular_sinr_dt_table(s, dep.E_d, ones)[..., 0], want_dt, rtol=1e-10)
    assert np.allclose(cl.cellular_sinr_scsi_table(s, dep.E_d, ones)[..., 0], want_sc, rtol=1e-12)


def test_no_downlink_pilots_equal_sinrs():
    dep, s = desk_stats(4, tau_dp=0)
    rho = cf.rho_table(dep.velocities, 2e9, 1e-6, 50).reshape(2, 4, 50)
    assert np.allclose(cl.cellular_sinr_dt_table(s, dep.E_d, rho),
                       cl.cellular_sinr_scsi_table(s, dep.E_d, rho), rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 0.95), st.floats(1e-3, 0.05))
def test_dominance_and_monotone(seed, r2, delta):
    dep, s = desk_stats(seed)
    a = np.full((2, 4, 1), np.sqrt(r2))
    b = np.full((2, 4, 1), np.sqrt(r2 + delta))
    dt_a, dt_b = cl.cellular_sinr_dt_table(s, dep.E_d, a), cl.cellular_sinr_dt_table(s, dep.E_d, b)
    sc_a, sc_b = cl.cellular_sinr_scsi_table(s, dep.E_d, a), cl.cellular_sinr_scsi_table(s, dep.E_d, b)
    assert np.all(dt_a >= sc_a) and np.all(dt_b >= sc_b)
    assert np.all(dt_b > dt_a) and np.all(sc_b > sc_a)


def test_colocated_agreement_with_cell_free():
    # one cell, one UE == one AP with L = M_c antennas
    beta = np.array([[[2e-9]]])
    s = cl.cellular_stats(beta, 16, 1, 1, 1e11, 1e12)
    st_ = cf.estimation_stats(beta[0], np.eye(1), 1, 1e11, 16)
    mom = cf.downlink_channel_moments(beta[0], st_.gamma, st_.eta, np.eye(1), np.eye(1), 1,
                                      1e12, 16)
    rho = np.array([[0.9]])
    assert cl.cellular_sinr_dt_table(s, 1e12, rho[None])[0, 0, 0] == pytest.approx(
        cf.sinr_dt_table(mom, 1e12, rho)[0, 0], rel=1e-12)
    assert cl.cellular_sinr_scsi_table(s, 1e12, rho[None])[0, 0, 0] == pytest.approx(
        cf.sinr_scsi_table(mom, 1e12, rho)[0, 0], rel=1e-12)


def test_single_entry_accessors():
    dep, s = desk_stats(5)
    rho = cf.rho_table(dep.velocities, 2e9, 1e-6, 20).reshape(2, 4, 20)
    assert cl.cellular_sinr_dt(1, 2, 7, s, dep.E_d, rho) == cl.cellular_sinr_dt_table(s, dep.E_d, rho)[1, 2, 7]
    assert cl.cellular_sinr_scsi(1, 2, 7, s, dep.E_d, rho) == cl.cellular_sinr_scsi_table(s, dep.E_d, rho)[1, 2, 7]

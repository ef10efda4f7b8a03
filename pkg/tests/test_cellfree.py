import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellfree_aging import cellfree as cf
from cellfree_aging import montecarlo as mc
from cellfree_aging.errors import DegenerateAPError, DimensionError, DomainError
from cellfree_aging.numerics import make_rng
from cellfree_aging.pilots import gram, make_pilot_book
from cellfree_aging.scenario import CellFree, ScenarioConfig, build_deployment
from cellfree_aging.validation import static_cellfree_sinr

DESK = ScenarioConfig(topology=CellFree(M=25, L=2), K=8, tau_up=4, tau_dp=4, v_max=45)


def desk_moments(seed, tau_dp=4, cfg=DESK):
    dep = build_deployment(cfg, seed)
    book = make_pilot_book(dep.beta, cfg.tau_up, tau_dp)
    st_ = cf.estimation_stats(dep.beta, book.up_gram, cfg.tau_up, dep.E_up, cfg.topology.L)
    mom = cf.downlink_channel_moments(dep.beta, st_.gamma, st_.eta, book.up_gram,
                                      book.dp_gram, tau_dp, dep.E_dp, cfg.topology.L)
    return dep, book, st_, mom


def test_gamma_hand_example():
    s = cf.uplink_estimation_stats(np.ones((1, 2)), np.ones((2, 2)), 1, 1.0)
    assert np.allclose(s.gamma, 1 / 3)


def test_gamma_limits():
    beta = make_rng(0).uniform(0.1, 1, (3, 4))
    assert np.allclose(cf.uplink_estimation_stats(beta, np.eye(4), 1, 1e12).gamma, beta, rtol=1e-9)
    assert np.all(cf.uplink_estimation_stats(beta, np.eye(4), 1, 0.0).gamma == 0)


def test_power_control():
    g = make_rng(1).uniform(0.1, 1, (5, 6))
    eta = cf.uniform_power_control(g, 2)
    assert np.allclose((eta * g).sum(axis=1), 0.5, atol=1e-12)
    assert np.allclose(eta, eta[:, :1])
    g2 = g.copy()
    g2[0] *= 2
    assert np.allclose(cf.uniform_power_control(g2, 2)[0], eta[0] / 2)
    assert cf.uniform_power_control(np.array([[0.25]]), 4)[0, 0] == pytest.approx(1.0)
    g[3] = 0
    with pytest.raises(DegenerateAPError):
        cf.uniform_power_control(g, 2)


def test_kappa_perfect_training_limit():
    dep, book, st_, _ = desk_moments(2)
    mom = cf.downlink_channel_moments(dep.beta, st_.gamma, st_.eta, book.up_gram, np.eye(8),
                                      4, 1e15, 2)
    assert np.allclose(mom.kappa, np.diag(mom.varsigma), rtol=1e-9)


def test_orthogonal_cross_terms_vanish():
    dep, book, st_, mom = desk_moments(3)
    cross = (book.up_gram == 0)
    assert np.all(mom.mean0[cross] == 0) and np.all(mom.pseudo0[cross] == 0)


def test_moment_invariants():
    for seed in range(10):
        _, _, st_, mom = desk_moments(seed)
        assert np.all(st_.gamma > 0) and np.all(mom.varsigma > 0)
        assert np.all(mom.kappa >= 0) and np.all(mom.kappa <= np.diag(mom.varsigma))
        assert np.all(np.abs(mom.pseudo0) <= mom.varsigma)
        assert np.allclose(mom.error_var, np.diag(mom.varsigma) - mom.kappa)


def test_small_instance_moments_against_simulation():
    beta = np.ones((2, 2))
    up = np.array([0, 0])
    st_ = cf.estimation_stats(beta, gram(up), 1, 1.0, 1)
    assert np.allclose(st_.gamma, 1 / 3)
    mom = cf.downlink_channel_moments(beta, st_.gamma, st_.eta, gram(up), np.eye(2), 2, 1.0, 1)
    rho = np.array([0.8, 0.6])
    emp = mc.effective_channel_statistics(beta, 1, st_.c, st_.eta, up, 1, 1.0, rho,
                                          100_000, seed=5)
    assert np.allclose(emp.mean.real, mom.mu(rho), rtol=0.02)
    assert np.allclose(emp.variance, mom.varsigma, rtol=0.02)
    assert np.allclose(emp.pseudo_variance.real, mom.pseudo(rho), rtol=0.02, atol=0.02 * mom.varsigma)


def test_sinr_zero_when_fully_aged():
    _, _, _, mom = desk_moments(4)
    dep = build_deployment(DESK, 4)
    rho = np.zeros((8, 1))
    assert np.all(cf.sinr_dt_table(mom, dep.E_d, rho) == 0)
    assert np.all(cf.sinr_scsi_table(mom, dep.E_d, rho) == 0)


def test_static_reduction_and_single_entry():
    dep, book, st_, mom = desk_moments(5)
    ref_dt, ref_sc = static_cellfree_sinr(dep.beta, st_.gamma, st_.eta, book.up_gram,
                                          book.dp_gram, 4 * dep.E_dp, dep.E_d, 2)
    ones = np.ones((8, 3))
    assert np.allclose(cf.sinr_dt_table(mom, dep.E_d, ones), ref_dt[:, None], rtol=1e-12)
    assert np.allclose(cf.sinr_scsi_table(mom, dep.E_d, ones), ref_sc[:, None], rtol=1e-12)
    rho = cf.rho_table(dep.velocities, 2e9, 1e-6, 50)
    assert cf.sinr_dt(3, 40, mom, dep.E_d, rho) == cf.sinr_dt_table(mom, dep.E_d, rho)[3, 40]
    assert cf.sinr_scsi(3, 40, mom, dep.E_d, rho) == cf.sinr_scsi_table(mom, dep.E_d, rho)[3, 40]


def test_no_downlink_pilots_means_equal_sinrs():
    dep, _, _, mom = desk_moments(6, tau_dp=0)
    assert np.all(mom.kappa == 0)
    rho = cf.rho_table(dep.velocities, 2e9, 1e-6, 100)
    assert np.allclose(cf.sinr_dt_table(mom, dep.E_d, rho), cf.sinr_scsi_table(mom, dep.E_d, rho),
                       rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 0.95), st.floats(1e-3, 0.05))
def test_sinr_dominance_and_monotone_in_rho(seed, r2, delta):
    dep, _, _, mom = desk_moments(seed)
    a = np.full((8, 1), np.sqrt(r2))
    b = np.full((8, 1), np.sqrt(r2 + delta))
    dt_a, dt_b = cf.sinr_dt_table(mom, dep.E_d, a), cf.sinr_dt_table(mom, dep.E_d, b)
    sc_a, sc_b = cf.sinr_scsi_table(mom, dep.E_d, a), cf.sinr_scsi_table(mom, dep.E_d, b)
    assert np.all(dt_a >= sc_a) and np.all(dt_b >= sc_b)
    assert np.all(dt_b > dt_a) and np.all(sc_b > sc_a)


def test_se_per_symbol():
    assert [cf.se_per_symbol(s) for s in (0.0, 1.0, 3.0)] == [0.0, 1.0, 2.0]
    with pytest.raises(DomainError):
        cf.se_per_symbol(-0.1)


def test_average_se():
    assert cf.average_se_dt(np.full(100, 2.0), 10, 10, 100) == pytest.approx(200 / 120)
    assert cf.average_se_dt([], 10, 10, 0) == 0.0
    ramp = np.arange(50, dtype=float)
    assert cf.average_se_dt(ramp, 4, 6, 50) == pytest.approx(sum(range(50)) / 60)
    assert cf.average_se_scsi(np.full(100, 2.0), 10, 100) == pytest.approx(200 / 110)
    assert cf.average_se_scsi([], 10, 0) == 0.0
    assert cf.average_se_scsi(ramp, 4, 50) == pytest.approx(sum(range(50)) / 54)
    with pytest.raises(DimensionError):
        cf.average_se_dt(np.ones(5), 1, 1, 6)


def test_average_se_curve_matches_direct_sum():
    se = make_rng(3).uniform(0, 5, (4, 120))
    curve = cf.average_se_curve(se, 20, [0, 10, 100])
    assert np.allclose(curve[0], 0)
    for row, tdd in zip(curve[1:], (10, 100)):
        direct = [cf.average_se_dt(se[k, 20:20 + tdd], 12, 8, tdd) for k in range(4)]
        assert np.allclose(row, direct, rtol=1e-12)


def test_sum_se():
    assert cf.sum_se([1, 2, 3]) == 6
    assert cf.sum_se([]) == 0
    assert cf.sum_se([3, 1, 2]) == cf.sum_se([1, 2, 3])


def test_optimal_tau_dd():
    assert cf.optimal_tau_dd(lambda t: 1.0, [70]) == (70, 1.0)
    f = lambda t: t / (t + 20) * 2 ** (-t / 300)
    grid = list(range(10, 701, 10))
    best = max(grid, key=lambda t: (f(t), -t))
    assert cf.optimal_tau_dd(f, grid)[0] == best
    assert cf.optimal_tau_dd(lambda t: 1.0, [30, 10, 20])[0] == 10
    with pytest.raises(DomainError):
        cf.optimal_tau_dd(f, [])


def test_rho_table():
    r = cf.rho_table([0.0, 85.0], 2e9, 1e-6, 30)
    assert r.shape == (2, 30)
    assert np.all(r[0] == 1) and r[1, 0] == 1 and np.all(np.diff(r[1]) < 0)

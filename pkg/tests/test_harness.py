import json

import numpy as np
import pytest

from cellfree_aging import cellfree as cf
from cellfree_aging import harness as hs
from cellfree_aging.errors import ConfigError, InfeasiblePilotAssignment
from cellfree_aging.pilots import make_pilot_book
from cellfree_aging.scenario import CellFree, Cellular, ScenarioConfig, build_deployment

BASE = ScenarioConfig(topology=CellFree(M=25, L=2), K=8, tau_up=4, tau_dp=4, tau_dd=200,
                      v_max=45, seed=17)


def spec(**kw):
    args = dict(name="t", base=BASE, parameter="v_max", values=[5, 45, 85],
                schemes=("CF-DT", "CF-sCSI"), realizations=4)
    args.update(kw)
    return hs.ExperimentSpec(**args)


def test_aggregation_identity():
    rep = hs.run_experiment(spec(parameter=None, values=[], realizations=1))
    dep = build_deployment(BASE, rng_seed=hs.realization_seed(17, 0))
    book = make_pilot_book(dep.beta, 4, 4)
    st = cf.estimation_stats(dep.beta, book.up_gram, 4, dep.E_up, 2)
    mom = cf.downlink_channel_moments(dep.beta, st.gamma, st.eta, book.up_gram, book.dp_gram,
                                      4, dep.E_dp, 2)
    rho = cf.rho_table(dep.velocities, BASE.f_c, BASE.symbol_time, 208)
    se_dt = cf.se_per_symbol(cf.sinr_dt_table(mom, dep.E_d, rho))
    se_sc = cf.se_per_symbol(cf.sinr_scsi_table(mom, dep.E_d, rho))
    want_dt = [cf.average_se_dt(se_dt[k, 8:208], 4, 4, 200) for k in range(8)]
    want_sc = [cf.average_se_scsi(se_sc[k, 4:204], 4, 200) for k in range(8)]
    assert np.allclose(rep.raw["CF-DT"][0, 0], want_dt, rtol=1e-12)
    assert np.allclose(rep.raw["CF-sCSI"][0, 0], want_sc, rtol=1e-12)
    assert rep.mean_sum_se("CF-DT")[0] == pytest.approx(cf.sum_se(want_dt), rel=1e-12)


def test_deterministic_and_thread_independent():
    a = hs.run_experiment(spec())
    b = hs.run_experiment(spec(), threads=3)
    for s in a.schemes:
        assert np.array_equal(a.raw[s], b.raw[s])


def test_report_shapes_and_dominance():
    rep = hs.run_experiment(spec())
    assert rep.raw["CF-DT"].shape == (3, 4, 8)
    assert rep.dominance_checked > 0 and rep.dominance_violations == 0


def test_speed_sweep_decreasing():
    rep = hs.run_experiment(spec(base=BASE.with_(tau_dd=500), schemes=("CF-DT",),
                                 realizations=50))
    assert np.all(np.diff(rep.ninety_likely("CF-DT")) < 0)


def test_tau_dd_group_matches_separate_runs():
    grouped = hs.run_experiment(spec(parameter="tau_dd", values=[50, 300]))
    single = hs.run_experiment(spec(parameter=None, values=[], base=BASE.with_(tau_dd=300)))
    for s in grouped.schemes:
        assert np.allclose(grouped.raw[s][1], single.raw[s][0], rtol=1e-12)


def test_cellular_report():
    base = ScenarioConfig(topology=Cellular(L_c=2, M_c=30, K_c=4), K=8, tau_up=4, tau_dp=4,
                          seed=2)
    rep = hs.run_experiment(hs.ExperimentSpec("c", base, "tau_dd", [100, 400],
                                              ("Cell-DT", "Cell-sCSI"), 3))
    assert rep.raw["Cell-sCSI"].shape == (2, 3, 8)
    assert rep.dominance_violations == 0


def test_spec_validation_names_value():
    with pytest.raises(ConfigError, match="2:2"):
        spec(parameter="pilot_split", values=[(4, 4), (2, 2)])
    with pytest.raises(ConfigError):
        spec(schemes=("Cell-DT",))
    with pytest.raises(ConfigError):
        spec(realizations=0)
    with pytest.raises(ConfigError):
        spec(parameter="bandwidth")


def test_infeasible_assignment_names_value(monkeypatch):
    monkeypatch.setattr("cellfree_aging.pilots.assign_uplink_pilots",
                        lambda beta, tau: np.zeros(beta.shape[1], dtype=int))
    with pytest.raises(InfeasiblePilotAssignment, match="sweep value 45"):
        hs.run_experiment(spec(values=[45], realizations=1))


def test_spec_file_round_trip(tmp_path):
    import yaml

    s = spec(parameter="densification", values=[(25, 2), (50, 1)])
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump(s.to_dict()))
    again = hs.load_spec(p)
    assert again == s


def test_emit_round_trip(tmp_path):
    rep = hs.run_experiment(spec())
    files = hs.emit_results(rep, tmp_path)
    assert {f.name for f in files} == {"t_CF-DT.csv", "t_CF-DT_raw.csv", "t_CF-sCSI.csv",
                                       "t_CF-sCSI_raw.csv"}
    meta, header, rows = hs.read_table(tmp_path / "t_CF-DT.csv")
    assert meta["seed"] == 17 and meta["config_hash"] == BASE.config_hash()
    assert header == ["value", "se_90_likely", "mean_sum_se"]
    assert all(len(r) == 3 for r in rows)
    assert [r[1] for r in rows] == rep.ninety_likely("CF-DT").tolist()
    assert [r[2] for r in rows] == rep.mean_sum_se("CF-DT").tolist()


def test_aggregates_recomputed_from_raw_bitwise(tmp_path):
    rep = hs.run_experiment(spec())
    hs.emit_results(rep, tmp_path)
    raw = hs.raw_from_file(tmp_path / "t_CF-sCSI_raw.csv")
    for i, v in enumerate(rep.values):
        a = raw[hs.format_value(v)]
        assert np.array_equal(a, rep.raw["CF-sCSI"][i])
        assert np.quantile(a.ravel(), 0.1) == rep.ninety_likely("CF-sCSI")[i]
        assert a.sum(axis=1).mean() == rep.mean_sum_se("CF-sCSI")[i]


def test_emit_json(tmp_path):
    rep = hs.run_experiment(spec(realizations=2))
    (f,) = [f for f in hs.emit_results(rep, tmp_path, "json") if "sCSI" in f.name]
    doc = json.loads(f.read_text())
    assert doc["rows"][0][1] == rep.ninety_likely("CF-sCSI")[0]
    assert np.array_equal(np.array(doc["raw"]["85"]), rep.raw["CF-sCSI"][2])


def test_empty_report_is_header_only(tmp_path):
    rep = hs.SEReport("empty", "v_max", [], ("CF-DT",), {"CF-DT": np.zeros((0, 0, 8))},
                      0, "h", 0)
    hs.emit_results(rep, tmp_path)
    lines = (tmp_path / "empty_CF-DT.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1] == "value,se_90_likely,mean_sum_se"


def test_emit_io_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rep = hs.run_experiment(spec(realizations=1))
    with pytest.raises(OSError, match=str(blocker)):
        hs.emit_results(rep, blocker / "sub")


def test_emitted_csv_bit_identical_across_runs(tmp_path):
    for d in ("a", "b"):
        hs.emit_results(hs.run_experiment(spec()), tmp_path / d)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


@pytest.mark.parametrize("fig", hs.FIGURES)
def test_figure_specs_valid(fig):
    for scale in ("desk", "paper"):
        specs = hs.figure_specs(fig, scale)
        assert specs and all(s.realizations == (50 if scale == "desk" else 400) for s in specs)


def test_figure_suite_runs():
    reports = hs.figure_suite("F8", "desk", realizations=2)
    assert reports[0].values == [(25, 4), (100, 1)]


def test_value_formatting():
    assert hs.format_value((10, 20)) == "10:20"
    assert hs.parse_value("10:20") == (10, 20)
    assert hs.format_value(45.0) == "45"
    assert hs.parse_value("2.5") == 2.5

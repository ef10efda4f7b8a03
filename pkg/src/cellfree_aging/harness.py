"""
Experiment runner: realizations x sweep values x schemes -> per-UE average SE.

A realization draws fresh UE positions and shadowing from a seed derived from
the base seed and the realization index. All sweep values of one realization
share that seed (common random numbers), so sweep curves are not jittered by
independent deployments.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import cellfree as cf
from . import cellular as cl
from .errors import ConfigError, InfeasiblePilotAssignment
from .pilots import make_pilot_book
from .scenario import CellFree, Cellular, ScenarioConfig, build_deployment

SCHEMES = ("CF-DT", "CF-sCSI", "Cell-DT", "Cell-sCSI")
SWEEP_PARAMETERS = ("v_max", "tau_dd", "pilot_split", "densification")


def realization_seed(base_seed: int, index: int) -> int:
    """Independent 32-bit seed for realization `index`."""
    return int(np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1)[0])


def format_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return ":".join(format_value(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def parse_value(text: str):
    parts = [float(p) if "." in p or "e" in p.lower() else int(p) for p in text.split(":")]
    return tuple(parts) if len(parts) > 1 else parts[0]


def apply_sweep(base: ScenarioConfig, parameter: Optional[str], value) -> ScenarioConfig:
    """Config for one sweep value."""
    if parameter is None:
        return base
    if parameter == "v_max":
        return base.with_(v_max=float(value))
    if parameter == "tau_dd":
        return base.with_(tau_dd=int(value))
    if parameter == "pilot_split":
        up, dp = value
        return base.with_(tau_up=int(up), tau_dp=int(dp))
    if parameter == "densification":
        if base.is_cellular:
            raise ConfigError("densification sweeps need a cell-free base config")
        M, L = value
        return base.with_(M=int(M), L=int(L))
    raise ConfigError(f"unknown sweep parameter {parameter!r}")


@dataclass
class ExperimentSpec:
    name: str
    base: ScenarioConfig
    parameter: Optional[str] = None
    values: list = field(default_factory=list)
    schemes: tuple = ("CF-DT", "CF-sCSI")
    realizations: int = 50
    oracle: bool = False

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.values = [tuple(v) if isinstance(v, list) else v for v in self.values]
        self.validate()

    def validate(self) -> None:
        if self.realizations < 1:
            raise ConfigError("realizations must be at least 1")
        if self.parameter is not None and self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown schemes {bad}")
        want_cell = any(s.startswith("Cell-") for s in self.schemes)
        want_cf = any(s.startswith("CF-") for s in self.schemes)
        if (want_cell and not self.base.is_cellular) or (want_cf and self.base.is_cellular):
            raise ConfigError("schemes do not match the topology of the base config")
        for v in self.sweep_values():
            try:
                cfg = apply_sweep(self.base, self.parameter, v)
            except (ConfigError, TypeError, ValueError) as exc:
                raise ConfigError(f"sweep value {format_value(v)}: {exc}") from exc
            if any(s.endswith("-DT") for s in self.schemes) and cfg.tau_dp < 1:
                raise ConfigError(f"sweep value {format_value(v)}: DT needs tau_dp >= 1")

    def sweep_values(self) -> list:
        return list(self.values) if self.parameter is not None else [None]

    def with_realizations(self, n: int) -> "ExperimentSpec":
        return replace(self, realizations=int(n))

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d.update(name=self.name, schemes=list(self.schemes), realizations=self.realizations,
                 oracle=self.oracle)
        if self.parameter is not None:
            d["sweep"] = {"parameter": self.parameter,
                          "values": [list(v) if isinstance(v, tuple) else v for v in self.values]}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        name = data.pop("name", "experiment")
        schemes = data.pop("schemes", None)
        realizations = int(data.pop("realizations", 50))
        oracle = bool(data.pop("oracle", False))
        sweep = data.pop("sweep", None) or {}
        base = ScenarioConfig.from_dict(data)
        if schemes is None:
            schemes = ("Cell-DT", "Cell-sCSI") if base.is_cellular else ("CF-DT", "CF-sCSI")
        unknown = set(sweep) - {"parameter", "values"}
        if unknown:
            raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(name, base, sweep.get("parameter"), list(sweep.get("values", [])),
                   tuple(schemes), realizations, oracle)


def load_spec(path) -> ExperimentSpec:
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return ExperimentSpec.from_dict(data)


@dataclass
class SEReport:
    """
    Per-UE average SE for every (scheme, sweep value, realization).

    ``raw[scheme]`` has shape (n_values, realizations, K).
    """

    name: str
    parameter: Optional[str]
    values: list
    schemes: tuple
    raw: Dict[str, np.ndarray]
    seed: int
    config_hash: str
    realizations: int
    runtime: float = 0.0
    dominance_checked: int = 0
    dominance_violations: int = 0
    oracle: list = field(default_factory=list)

    def ninety_likely(self, scheme: str) -> np.ndarray:
        """SE exceeded by 90% of all (realization, UE) samples, per sweep value."""
        r = self.raw[scheme]
        return np.array([np.quantile(r[i].ravel(), 0.1) for i in range(r.shape[0])])

    def mean_sum_se(self, scheme: str) -> np.ndarray:
        r = self.raw[scheme]
        return np.array([r[i].sum(axis=1).mean() for i in range(r.shape[0])])

    def value_index(self, value) -> int:
        target = format_value(value)
        for i, v in enumerate(self.values):
            if format_value(v) == target:
                return i
        raise KeyError(value)


# ---------------------------------------------------------------------------


def _cf_tables(cfg: ScenarioConfig, dep, n_symbols: int, want_dt: bool):
    """Per-symbol SINR tables (K x N) for both schemes of one cell-free drop."""
    topo = cfg.topology
    tau_dp = cfg.tau_dp if want_dt else 0
    book = make_pilot_book(dep.beta, cfg.tau_up, tau_dp)
    st = cf.estimation_stats(dep.beta, book.up_gram, cfg.tau_up, dep.E_up, topo.L)
    mom = cf.downlink_channel_moments(dep.beta, st.gamma, st.eta, book.up_gram, book.dp_gram,
                                      tau_dp, dep.E_dp, topo.L)
    rho = cf.rho_table(dep.velocities, cfg.f_c, cfg.symbol_time, n_symbols)
    return cf.sinr_dt_table(mom, dep.E_d, rho), cf.sinr_scsi_table(mom, dep.E_d, rho)


def _cell_tables(cfg: ScenarioConfig, dep, n_symbols: int, want_dt: bool):
    topo = cfg.topology
    stats = cl.stats_from_deployment(dep, topo, cfg.tau_up, cfg.tau_dp if want_dt else 0)
    rho = cf.rho_table(dep.velocities, cfg.f_c, cfg.symbol_time, n_symbols)
    rho = rho.reshape(topo.L_c, topo.K_c, n_symbols)
    dt = cl.cellular_sinr_dt_table(stats, dep.E_d, rho).reshape(cfg.K, n_symbols)
    sc = cl.cellular_sinr_scsi_table(stats, dep.E_d, rho).reshape(cfg.K, n_symbols)
    return dt, sc


def evaluate_realization(spec: ExperimentSpec, index: int):
    """
    Per-UE average SE of every (scheme, sweep value) for one realization.

    Returns (values[scheme] -> (n_values, K), dominance_checked, violations).
    Sweep values differing only in tau_dd share one SINR table.
    """
    seed = realization_seed(spec.base.seed, index)
    sweep = spec.sweep_values()
    out = {s: [None] * len(sweep) for s in spec.schemes}
    groups: Dict[str, list] = {}
    for i, v in enumerate(sweep):
        try:
            cfg = apply_sweep(spec.base, spec.parameter, v)
        except ConfigError as exc:
            raise ConfigError(f"sweep value {format_value(v)}: {exc}") from exc
        key = json.dumps(cfg.with_(tau_dd=0).to_dict(), sort_keys=True)
        groups.setdefault(key, []).append((i, cfg))
    want_dt = any(s.endswith("-DT") for s in spec.schemes)
    checked = violations = 0
    for members in groups.values():
        cfg0 = members[0][1]
        max_dd = max(c.tau_dd for _, c in members)
        n_symbols = cfg0.tau_up + (cfg0.tau_dp if want_dt else 0) + max_dd
        dep = build_deployment(cfg0, rng_seed=seed)
        try:
            if cfg0.is_cellular:
                dt, sc = _cell_tables(cfg0, dep, n_symbols, want_dt)
            else:
                dt, sc = _cf_tables(cfg0, dep, n_symbols, want_dt)
        except InfeasiblePilotAssignment as exc:
            vals = ", ".join(format_value(sweep[i]) for i, _ in members)
            raise InfeasiblePilotAssignment(f"sweep value {vals}: {exc}") from exc
        prefix = "Cell-" if cfg0.is_cellular else "CF-"
        if want_dt:
            start = cfg0.tau_up + cfg0.tau_dp
            seg_dt, seg_sc = dt[:, start:], sc[:, start:]
            checked += seg_dt.size
            violations += int(np.count_nonzero(seg_dt < seg_sc))
        for i, cfg in members:
            if prefix + "DT" in out:
                start = cfg.tau_up + cfg.tau_dp
                se = np.log2(1.0 + dt[:, :start + cfg.tau_dd])
                out[prefix + "DT"][i] = cf.average_se_curve(se, start, [cfg.tau_dd])[0]
            if prefix + "sCSI" in out:
                # the sCSI frame has no downlink pilots, so symbol n of its data
                # phase is the n-th symbol after uplink training
                se = np.log2(1.0 + sc[:, :cfg.tau_up + cfg.tau_dd])
                out[prefix + "sCSI"][i] = cf.average_se_curve(se, cfg.tau_up, [cfg.tau_dd])[0]
    return {s: np.array(v) for s, v in out.items()}, checked, violations


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> SEReport:
    """Evaluate all realizations (in parallel if asked) and merge in index order."""
    t0 = time.perf_counter()
    indices = range(spec.realizations)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: evaluate_realization(spec, r), indices))
    else:
        results = [evaluate_realization(spec, r) for r in indices]
    n_values = len(spec.sweep_values())
    raw = {}
    for s in spec.schemes:
        per_real = [res[0][s] for res in results]  # each (n_values, K)
        raw[s] = np.stack(per_real, axis=1) if per_real else np.zeros((n_values, 0, spec.base.K))
    report = SEReport(
        spec.name, spec.parameter, spec.sweep_values(), spec.schemes, raw, spec.base.seed,
        spec.base.config_hash(), spec.realizations,
        dominance_checked=sum(r[1] for r in results),
        dominance_violations=sum(r[2] for r in results))
    if spec.oracle:
        from .validation import oracle_suite

        report.oracle = [row.to_dict() for row in oracle_suite(spec.base, seed=spec.base.seed)]
    report.runtime = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# Figure presets

DESK = dict(cf=CellFree(M=25, L=2), K=8, tau=4, realizations=50,
            cell=Cellular(L_c=4, M_c=20, K_c=2), dense=[(25, 4), (100, 1)])
PAPER = dict(cf=CellFree(M=100, L=4), K=40, tau=10, realizations=400,
             cell=Cellular(L_c=4, M_c=100, K_c=10), dense=[(100, 4), (400, 1)])
FIGURES = ("F4", "F5", "F6ab", "F7", "F8", "F9ab", "F10ab")
V_GRID = [5, 25, 45, 65, 85]
TAU_DD_GRID = list(range(10, 701, 10))
FIGURE_SEED = 2021


def _scale(scale: str) -> dict:
    if scale == "desk":
        return DESK
    if scale == "paper":
        return PAPER
    raise ConfigError(f"unknown scale {scale!r}")


def _cf_base(p: dict, contaminated: bool = True, scheme: str = "DT", **kw) -> ScenarioConfig:
    """PC: tau_up = tau_dp = tau. NoPC: orthogonal uplink pilots (tau = K); sCSI sends none downlink."""
    tau = p["tau"] if contaminated else p["K"]
    tau_dp = tau if scheme == "DT" else 0
    return ScenarioConfig(topology=p["cf"], K=p["K"], tau_up=tau, tau_dp=tau_dp,
                          seed=FIGURE_SEED, **kw)


def _cell_base(p: dict, **kw) -> ScenarioConfig:
    topo = p["cell"]
    return ScenarioConfig(topology=topo, K=topo.L_c * topo.K_c, tau_up=topo.K_c,
                          tau_dp=topo.K_c, seed=FIGURE_SEED, **kw)


def figure_specs(fig_id: str, scale: str = "desk") -> List[ExperimentSpec]:
    """Preconfigured experiments behind one figure."""
    p = _scale(scale)
    R = p["realizations"]
    specs = []
    if fig_id == "F4":
        # SE vs v_max: {PC, NoPC} x tau_dd {200, 500}, both schemes
        for pc in (True, False):
            tag = "PC" if pc else "NoPC"
            for tdd in (200, 500):
                if pc:
                    specs.append(ExperimentSpec(f"F4_{tag}_tdd{tdd}", _cf_base(p, tau_dd=tdd),
                                                "v_max", V_GRID, ("CF-DT", "CF-sCSI"), R))
                else:
                    for sch in ("DT", "sCSI"):
                        specs.append(ExperimentSpec(
                            f"F4_{tag}_{sch}_tdd{tdd}", _cf_base(p, False, sch, tau_dd=tdd),
                            "v_max", V_GRID, (f"CF-{sch}",), R))
    elif fig_id == "F5":
        for v in (5, 45, 85):
            specs.append(ExperimentSpec(f"F5_v{v}", _cf_base(p, v_max=v), "tau_dd",
                                        TAU_DD_GRID, ("CF-DT", "CF-sCSI"), R))
    elif fig_id == "F6ab":
        # (a) DT and (b) sCSI, with and without pilot contamination, vs tau_dd
        for part, sch in (("a", "DT"), ("b", "sCSI")):
            for pc in (True, False):
                for v in (5, 85):
                    tag = "PC" if pc else "NoPC"
                    specs.append(ExperimentSpec(f"F6{part}_{tag}_v{v}",
                                                _cf_base(p, pc, sch, v_max=v), "tau_dd",
                                                TAU_DD_GRID, (f"CF-{sch}",), R))
    elif fig_id == "F7":
        splits = [(5, 25), (10, 20), (15, 15), (20, 10), (25, 5)]
        for v in (5, 45, 85):
            specs.append(ExperimentSpec(f"F7_v{v}", _cf_base(p, v_max=v, tau_dd=500),
                                        "pilot_split", splits, ("CF-DT",), R))
    elif fig_id == "F8":
        specs.append(ExperimentSpec("F8", _cf_base(p, v_max=5, tau_dd=500), "densification",
                                    p["dense"], ("CF-DT", "CF-sCSI"), R))
    elif fig_id == "F9ab":
        # sum SE vs v_max for both densification variants, (a) PC (b) NoPC
        for part, pc in (("a", True), ("b", False)):
            for M, L in p["dense"]:
                for sch in ("DT", "sCSI"):
                    base = _cf_base(p, pc, sch, tau_dd=500).with_(M=M, L=L)
                    specs.append(ExperimentSpec(f"F9{part}_M{M}_L{L}_{sch}", base, "v_max",
                                                V_GRID, (f"CF-{sch}",), R))
    elif fig_id == "F10ab":
        specs.append(ExperimentSpec("F10a", _cell_base(p, tau_dd=500), "v_max", V_GRID,
                                    ("Cell-DT", "Cell-sCSI"), R))
        specs.append(ExperimentSpec("F10b", _cell_base(p, v_max=45), "tau_dd", TAU_DD_GRID,
                                    ("Cell-DT", "Cell-sCSI"), R))
    else:
        raise ConfigError(f"unknown figure id {fig_id!r}; choose from {FIGURES}")
    return specs


def figure_suite(fig_id: str, scale: str = "desk", threads: int = 1,
                 realizations: Optional[int] = None) -> List[SEReport]:
    specs = figure_specs(fig_id, scale)
    if realizations is not None:
        specs = [s.with_realizations(realizations) for s in specs]
    return [run_experiment(s, threads) for s in specs]


# ---------------------------------------------------------------------------
# Output


def _metadata(report: SEReport, scheme: str) -> dict:
    return {"name": report.name, "scheme": scheme, "parameter": report.parameter,
            "seed": report.seed, "config_hash": report.config_hash,
            "realizations": report.realizations}


def _stem(report: SEReport, scheme: str) -> str:
    return f"{report.name}_{scheme}"


def emit_results(report: SEReport, path, fmt: str = "csv") -> List[Path]:
    """
    Write one table per scheme under directory `path`.

    CSV: ``<name>_<scheme>.csv`` (sweep value, 90%-likely SE, mean sum SE)
    behind ``#``-prefixed JSON metadata, plus ``<name>_<scheme>_raw.csv``
    with one row per (value, realization, UE). JSON: one file per scheme
    holding metadata, table and raw values.
    """
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    out = Path(path)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for s in report.schemes:
            meta = _metadata(report, s)
            r = report.raw[s]
            q90, msum = (report.ninety_likely(s), report.mean_sum_se(s)) if r.size else ([], [])
            rows = [[format_value(v), float(a), float(b)] for v, a, b in zip(report.values, q90, msum)]
            if fmt == "json":
                f = out / f"{_stem(report, s)}.json"
                doc = {"metadata": meta, "columns": ["value", "se_90_likely", "mean_sum_se"],
                       "rows": rows,
                       "raw": {format_value(v): r[i].tolist() for i, v in enumerate(report.values)}}
                f.write_text(json.dumps(doc, indent=1))
                written.append(f)
                continue
            f = out / f"{_stem(report, s)}.csv"
            with open(f, "w", newline="") as fh:
                fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
                w = csv.writer(fh)
                w.writerow(["value", "se_90_likely", "mean_sum_se"])
                for row in rows:
                    w.writerow([row[0], repr(row[1]), repr(row[2])])
            written.append(f)
            f_raw = out / f"{_stem(report, s)}_raw.csv"
            with open(f_raw, "w", newline="") as fh:
                fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
                w = csv.writer(fh)
                w.writerow(["value", "realization", "ue", "se"])
                for i, v in enumerate(report.values):
                    for j in range(r.shape[1]):
                        for k in range(r.shape[2]):
                            w.writerow([format_value(v), j, k, repr(float(r[i, j, k]))])
            written.append(f_raw)
    except OSError as exc:
        raise OSError(f"cannot write results under {out}: {exc}") from exc
    return written


def read_table(path):
    """Parse a file written by `emit_results` -> (metadata, header, rows)."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        return doc["metadata"], doc["columns"], doc["rows"]
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = json.loads(first[1:]) if first.startswith("#") else {}
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[row[0]] + [float(x) if "." in x or "e" in x else int(x) for x in row[1:]]
                for row in reader]
    return meta, header, rows


def raw_from_file(path) -> Dict[str, np.ndarray]:
    """Per-value arrays (realizations, K) from a raw companion CSV."""
    _, _, rows = read_table(path)
    by_value: Dict[str, dict] = {}
    for v, j, k, se in rows:
        by_value.setdefault(v, {})[(j, k)] = se
    out = {}
    for v, cells in by_value.items():
        R = max(j for j, _ in cells) + 1
        K = max(k for _, k in cells) + 1
        a = np.empty((R, K))
        for (j, k), se in cells.items():
            a[j, k] = se
        out[v] = a
    return out

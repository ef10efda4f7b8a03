"""
Network geometry, large-scale fading and normalised SNRs.

A `ScenarioConfig` fully describes one network; `build_deployment` turns it
plus a seed into a `Deployment` (positions, beta, velocities, SNRs).
Cellular deployments order UEs cell-major: UE k of cell l sits at column
``l * K_c + k`` of `beta`, and `Deployment.serving` records the cell.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigError
from .numerics import STREAM_SHADOWING, STREAM_UE_POSITIONS, make_rng

# Pathloss / shadowing constants of the 3GPP-style urban microcell model used
# for cell-free studies: beta_dB = -30.5 - 36.7 log10(d_3D) + 4 dB shadowing.
PATHLOSS_INTERCEPT_DB = -30.5
PATHLOSS_EXPONENT_DB = 36.7
SHADOWING_STD_DB = 4.0
HEIGHT_DIFFERENCE_M = 10.0
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class CellFree:
    M: int = 100
    L: int = 4

    @property
    def n_transmitters(self) -> int:
        return self.M

    @property
    def antennas(self) -> int:
        return self.L


@dataclass(frozen=True)
class Cellular:
    L_c: int = 4
    M_c: int = 100
    K_c: int = 10

    @property
    def n_transmitters(self) -> int:
        return self.L_c

    @property
    def antennas(self) -> int:
        return self.M_c


Topology = Union[CellFree, Cellular]


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical, geometric and frame parameters of one network."""

    topology: Topology = field(default_factory=CellFree)
    K: int = 40
    area_side: float = 1000.0  # m
    f_c: float = 2e9  # Hz
    bandwidth: float = 1e6  # Hz
    noise_figure: float = 9.0  # dB
    ap_power: float = 0.2  # W
    ue_power: float = 0.1  # W
    tau_up: int = 10
    tau_dp: int = 10
    tau_dd: int = 500
    v_max: float = 45.0  # m/s
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def is_cellular(self) -> bool:
        return isinstance(self.topology, Cellular)

    @property
    def symbol_time(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def tau_frame_dt(self) -> int:
        return self.tau_up + self.tau_dp + self.tau_dd

    @property
    def tau_frame_scsi(self) -> int:
        return self.tau_up + self.tau_dd

    def validate(self) -> None:
        t = self.topology
        if self.K < 0:
            raise ConfigError("K must be non-negative")
        if self.area_side <= 0:
            raise ConfigError("area_side must be positive")
        if min(self.f_c, self.bandwidth, self.ap_power, self.ue_power) <= 0:
            raise ConfigError("frequencies and powers must be positive")
        if self.tau_up < 1 or self.tau_dp < 0 or self.tau_dd < 0:
            raise ConfigError("need tau_up >= 1, tau_dp >= 0, tau_dd >= 0")
        if self.v_max < 0:
            raise ConfigError("v_max must be non-negative")
        if isinstance(t, CellFree):
            if t.M < 1 or t.L < 1:
                raise ConfigError("M and L must be positive")
            if t.M * t.L < 2 * self.K:
                raise ConfigError(f"need M*L >= 2K, got M*L={t.M * t.L}, K={self.K}")
            if self.tau_dp > 0 and self.tau_up * self.tau_dp < self.K:
                raise ConfigError(
                    f"tau_up*tau_dp={self.tau_up * self.tau_dp} < K={self.K}: "
                    "cross-orthogonal downlink pilots are infeasible")
        elif isinstance(t, Cellular):
            if t.L_c < 1 or t.M_c < 1 or t.K_c < 1:
                raise ConfigError("L_c, M_c, K_c must be positive")
            if t.L_c * t.K_c != self.K:
                raise ConfigError(f"L_c*K_c={t.L_c * t.K_c} must equal K={self.K}")
            if t.M_c < 2 * t.K_c:
                raise ConfigError("need M_c >= 2 K_c")
            if self.tau_up < t.K_c or (self.tau_dp and self.tau_dp < t.K_c):
                raise ConfigError("cellular pilots need tau_up, tau_dp >= K_c")
        else:
            raise ConfigError(f"unknown topology {t!r}")

    def with_(self, **changes) -> "ScenarioConfig":
        """Copy with some fields replaced; `M`, `L`, ... update the topology."""
        topo_keys = {f.name for f in fields(type(self.topology))}
        topo_changes = {k: changes.pop(k) for k in list(changes) if k in topo_keys}
        topo = replace(self.topology, **topo_changes) if topo_changes else self.topology
        return replace(self, topology=topo, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        kind = "cellular" if self.is_cellular else "cell_free"
        d["topology"] = {"type": kind, **asdict(self.topology)}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        topo = data.pop("topology", None)
        if topo is not None:
            topo = dict(topo)
            kind = topo.pop("type", "cell_free")
            topo_cls = {"cell_free": CellFree, "cellular": Cellular}.get(kind)
            if topo_cls is None:
                raise ConfigError(f"unknown topology type {kind!r}")
            bad = set(topo) - {f.name for f in fields(topo_cls)}
            if bad:
                raise ConfigError(f"unknown topology keys: {sorted(bad)}")
            data["topology"] = topo_cls(**topo)
        return cls(**data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path) -> ScenarioConfig:
    """Read a ScenarioConfig from a YAML or JSON file."""
    import yaml

    with open(Path(path)) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return ScenarioConfig.from_dict(data)


@dataclass(frozen=True)
class Deployment:
    """One drop of transmitters and UEs.

    `beta` has shape (number of APs or BSs, K), linear scale.
    """

    ap_positions: np.ndarray
    ue_positions: np.ndarray
    beta: np.ndarray
    velocities: np.ndarray
    E_up: float
    E_dp: float
    E_d: float
    serving: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return self.beta.shape[1]


def grid_shape(n: int) -> tuple[int, int]:
    """(columns, rows) of the smallest near-square grid holding `n` cells."""
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    return cols, rows


def _grid_cells(n: int, side: float):
    cols, rows = grid_shape(n)
    w, h = side / cols, side / rows
    cells = []
    for i in range(n):
        r, c = divmod(i, cols)
        cells.append((c * w, r * h, w, h))
    return cells


def place_grid(n: int, area_side: float) -> np.ndarray:
    """Centres of the first `n` cells (row-major) of a near-square grid."""
    if area_side <= 0:
        raise ConfigError("area_side must be positive")
    cells = _grid_cells(n, area_side)
    return np.array([(x + w / 2, y + h / 2) for x, y, w, h in cells], dtype=float).reshape(n, 2)


def place_aps_grid(config: ScenarioConfig) -> np.ndarray:
    """AP (or BS) positions on a uniform grid, one per grid-cell centre.

    A perfect-square count gives a sqrt(M) x sqrt(M) grid. Other counts fall
    back to ceil(sqrt(M)) columns filled row-major.
    """
    return place_grid(config.topology.n_transmitters, config.area_side)


def place_ues_uniform(config: ScenarioConfig, rng_seed: Optional[int] = None) -> np.ndarray:
    """K i.i.d. uniform UE positions over the square area."""
    seed = config.seed if rng_seed is None else rng_seed
    rng = make_rng(seed, STREAM_UE_POSITIONS)
    return rng.uniform(0.0, config.area_side, size=(config.K, 2))


def large_scale_fading(d, shadow_draw=0.0, height: float = HEIGHT_DIFFERENCE_M,
                       shadowing_std: float = SHADOWING_STD_DB):
    """
    Linear large-scale fading coefficient for horizontal distance `d` (m).

    `shadow_draw` is a standard-normal variate scaled by `shadowing_std` dB.
    Broadcasts over array inputs.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ConfigError("distance must be non-negative")
    d3 = np.maximum(np.sqrt(d * d + height * height), MIN_DISTANCE_M)
    beta_db = (PATHLOSS_INTERCEPT_DB - PATHLOSS_EXPONENT_DB * np.log10(d3)
               + shadowing_std * np.asarray(shadow_draw, dtype=float))
    out = 10.0 ** (beta_db / 10.0)
    return float(out) if out.ndim == 0 else out


def noise_power_dbm(config: ScenarioConfig) -> float:
    return -174.0 + 10.0 * math.log10(config.bandwidth) + config.noise_figure


def normalized_snrs(config: ScenarioConfig) -> tuple[float, float, float]:
    """(E_up, E_dp, E_d): transmit powers over receiver noise power, linear."""
    n0_w = 10.0 ** ((noise_power_dbm(config) - 30.0) / 10.0)
    e_up = config.ue_power / n0_w
    e_d = config.ap_power / n0_w
    return e_up, e_d, e_d


def _beta_matrix(tx: np.ndarray, ues: np.ndarray, shadow: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(tx[:, None, :] - ues[None, :, :], axis=-1)
    return large_scale_fading(d, shadow)


def _shadow_draws(seed: int, n_tx: int, K: int, shadowing: bool) -> np.ndarray:
    if not shadowing:
        return np.zeros((n_tx, K))
    return make_rng(seed, STREAM_SHADOWING).standard_normal((n_tx, K))


def build_cellfree(config: ScenarioConfig, rng_seed: Optional[int] = None,
                   shadowing: bool = True) -> Deployment:
    if config.is_cellular:
        raise ConfigError("build_cellfree needs a CellFree topology")
    seed = config.seed if rng_seed is None else rng_seed
    aps = place_aps_grid(config)
    ues = place_ues_uniform(config, seed)
    beta = _beta_matrix(aps, ues, _shadow_draws(seed, len(aps), config.K, shadowing))
    e_up, e_dp, e_d = normalized_snrs(config)
    return Deployment(aps, ues, beta, np.full(config.K, float(config.v_max)), e_up, e_dp, e_d)


def build_cellular(config: ScenarioConfig, rng_seed: Optional[int] = None,
                   shadowing: bool = True) -> Deployment:
    """BSs at the centres of an equal-area grid partition; K_c UEs uniform in each cell."""
    if not config.is_cellular:
        raise ConfigError("build_cellular needs a Cellular topology")
    topo = config.topology
    if topo.L_c * topo.K_c != config.K:
        raise ConfigError("L_c*K_c must equal K")
    seed = config.seed if rng_seed is None else rng_seed
    rng = make_rng(seed, STREAM_UE_POSITIONS)
    cells = _grid_cells(topo.L_c, config.area_side)
    bs = np.array([(x + w / 2, y + h / 2) for x, y, w, h in cells])
    ues = np.empty((config.K, 2))
    for l, (x, y, w, h) in enumerate(cells):
        u = rng.uniform(0.0, 1.0, size=(topo.K_c, 2))
        ues[l * topo.K_c:(l + 1) * topo.K_c] = np.column_stack((x + w * u[:, 0], y + h * u[:, 1]))
    beta = _beta_matrix(bs, ues, _shadow_draws(seed, topo.L_c, config.K, shadowing))
    e_up, e_dp, e_d = normalized_snrs(config)
    serving = np.repeat(np.arange(topo.L_c), topo.K_c)
    return Deployment(bs, ues, beta, np.full(config.K, float(config.v_max)),
                      e_up, e_dp, e_d, serving)


def build_deployment(config: ScenarioConfig, rng_seed: Optional[int] = None,
                     shadowing: bool = True) -> Deployment:
    if config.is_cellular:
        return build_cellular(config, rng_seed, shadowing)
    return build_cellfree(config, rng_seed, shadowing)

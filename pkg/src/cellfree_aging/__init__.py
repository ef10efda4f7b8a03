"""Downlink spectral efficiency of cell-free and cellular massive MIMO under channel aging."""

from .cellfree import (ChannelMoments, EstimationStats, average_se_dt, average_se_scsi,
                       downlink_channel_moments, estimation_stats, rho_table, sinr_dt,
                       sinr_scsi, uniform_power_control, uplink_estimation_stats)
from .cellular import CellularStats, cellular_sinr_dt, cellular_sinr_scsi, cellular_stats
from .errors import (ConfigError, DegenerateAPError, DimensionError, DomainError,
                     InfeasiblePilotAssignment, InsufficientDataError)
from .harness import ExperimentSpec, SEReport, emit_results, figure_suite, run_experiment
from .numerics import bessel_j0, jakes_rho, kl_divergence
from .pilots import PilotBook, make_pilot_book
from .scenario import CellFree, Cellular, Deployment, ScenarioConfig, build_deployment

__version__ = "0.1.0"

"""Compressive wideband spectrum sensing on a channel/time-slot lattice."""
from .detection import MethodKind, channel_test, estimate_power_grid, transpose_estimate
from .experiment import ExperimentConfig, default_config, load_config, run_experiment
from .grid import GridConfig, OccupancyMap, PowerGrid, grid_power, stft, threshold_occupancy
from .measurement import MeasurementOp, apply_A, apply_A_adjoint, build_op, estimate_rip_delta
from .metrics import auc, power_savings_report, roc, wasted_fraction_at
from .recovery import BpdnConfig, bpdn_solve
from .scenario import InterfererSpec, Scenario, generate, random_scenario

__version__ = "0.1.0"

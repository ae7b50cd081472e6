"""Simulation and benchmarking of distributed IRS phase optimization in
multi-cell uplink/downlink networks."""

from .topology import SystemConfig, NetworkRealization, draw_realization, compose_channel
from .codebook import Codebook, build_codebook, reconstruct_canonical, synthesize_yw
from .airlink import PilotSet, TrainingRecord, gen_pilots, simulate_ul_training
from .filters import FilterBank, CsiEstimate, ls_filter, mmse_filter, estimate_csi
from .objectives import (
    ObjectiveContext,
    direct_objective,
    ls_objective,
    csi_objective,
    true_sinr,
)
from .phaseopt import OptimizerSettings, optimize_phases
from .schemes import SCHEMES, SchemeResult, TrialSeeds, run_scheme
from .harness import ExperimentSpec, ResultTable, load_config, run_experiment, emit_csv

__version__ = "0.1.0"

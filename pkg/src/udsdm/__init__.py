"""Uncertainty-driven synopsis dissemination for edge nodes."""

from .baselines import HoltState, bm_decide, holt_update, pm_decide
from .decision import Decision, DecisionPolicy, NodeState, decide, fuse, on_disseminate, phase_offset
from .fuzzy import FuzzySystem, IT2Set, infer_dod, km_type_reduce, membership
from .ingest import build_streams, parse_dataset, parse_line, synthesize_lab_file
from .lstm import LstmCell, LstmState, TrainConfig, forecast3, gradient_check, lstm_step, train
from .metrics import MetricsReport, compute_delta, compute_phi, compute_psi, report
from .simulator import ModelCache, SimConfig, compare, run, run_experiments
from .synopsis import NormalizationCalibration, Synopsis, normalize_quantum, update_quantum, update_synopsis

__version__ = "0.1.0"

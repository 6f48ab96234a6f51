"""Simulation and correlated-error detection for twin-field QKD."""

from . import pipeline
from .config import ExperimentConfig, load_config, parse_config
from .detection import detection_report, ensemble_M, t_tail_probability
from .errors import (
    ConfigError,
    DegenerateSet,
    FitDegenerate,
    InvalidModel,
    MissingLabel,
    NoCounts,
    ProtocolViolation,
    SingularMatrix,
)
from .measurement import InterferometerModel
from .pauli import deviation_matrix, invert_transpose, pair_expectation, predict_expectations
from .protocol import Schedule, assemble_expectations, run_experiment, run_trial
from .states import PhasePlan, bloch_from_phase, bloch_randomized, build_prep_matrix

__version__ = "0.1.0"

"""Sliding-window regression with clipped RNNs on stationary mixing sequences."""

from .data import MixingConfig, gen_sequence, make_blocks, make_subblocks, sliding_windows, stationary_windows
from .erm import ERMResult, TrainConfig, TrainingDivergedError, predict_last, train_erm, train_erm_detailed
from .experiment import (
    RateExperimentResult,
    RegressionTask,
    RiskEstimate,
    excess_risk,
    make_dataset,
    mean_sinusoid,
    rate_experiment,
)
from .theory import Schedule, ScheduleRangeError, covering_bound, schedule_exponents, theory_schedule

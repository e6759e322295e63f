"""Solvers for L1/ridge-regularized empirical risk over sparse data.

The package centers on an accelerated variance-reduced block coordinate
method in two interchangeable forms: a full-vector implementation
(`reference.avrbcd1_run`) that mirrors the update equations, and an
operation-lean one (`fast.avrbcd2_run`) whose inner loop cost scales with
the sampled rows and block only.  Baseline solvers, a benchmark CLI, and
the supporting data/model/schedule machinery round it out.
"""
from .data import (
    BlockPartition,
    LibsvmParseError,
    SparseDataset,
    make_lowrank_regression,
    make_partition,
    make_sparse_classification,
    parse_libsvm,
    serialize_libsvm,
    sparsity,
)
from .fast import EpochStateFast, avrbcd2_run
from .model import (
    ErmModel,
    LossKind,
    Problem,
    SmoothnessProfile,
    logistic,
    ridge_logistic,
    squared_error,
)
from .records import CostCounters, RunRecord
from .reference import (
    avrbcd1_run,
    katyusha_run,
    mrbcd2_run,
    mrbcd3_run,
    svrg_run,
)
from .regularizer import Regularizer, l1, prox_block, prox_full, zero
from .rng import RngStream
from .schedule import (
    ScheduleConfig,
    ScheduleParams,
    WeightTracker,
    advance_epoch,
    init_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "CostCounters",
    "EpochStateFast",
    "ErmModel",
    "LibsvmParseError",
    "LossKind",
    "Problem",
    "Regularizer",
    "RngStream",
    "RunRecord",
    "ScheduleConfig",
    "ScheduleParams",
    "SmoothnessProfile",
    "SparseDataset",
    "WeightTracker",
    "advance_epoch",
    "avrbcd1_run",
    "avrbcd2_run",
    "init_schedule",
    "katyusha_run",
    "l1",
    "logistic",
    "make_lowrank_regression",
    "make_partition",
    "make_sparse_classification",
    "mrbcd2_run",
    "mrbcd3_run",
    "parse_libsvm",
    "prox_block",
    "prox_full",
    "ridge_logistic",
    "serialize_libsvm",
    "sparsity",
    "squared_error",
    "svrg_run",
    "zero",
]

"""The eight field-metadata tasks shared by predictors, labels, and evaluation."""

from enum import Enum


class Task(str, Enum):
    MSR_DIM = "msr_dim"
    NATURAL_KEY = "natural_key"
    COMMON_BREAKDOWN = "common_breakdown"
    COMMON_MEASURE = "common_measure"
    DIM_TYPE = "dim_type"
    MSR_TYPE = "msr_type"
    MSR_PAIR = "msr_pair"
    AGG = "agg"


FIELD_TASKS = (
    Task.MSR_DIM,
    Task.NATURAL_KEY,
    Task.COMMON_BREAKDOWN,
    Task.COMMON_MEASURE,
    Task.DIM_TYPE,
    Task.MSR_TYPE,
    Task.AGG,
)

ROLE_TASKS = (Task.NATURAL_KEY, Task.COMMON_BREAKDOWN, Task.COMMON_MEASURE)

ALL_TASKS = tuple(Task)

MSR = "MSR"
DIM = "DIM"

"""Signalling storms in a UMTS-like radio access network: an event-driven
simulator and a CTMC/queueing model of the same system."""

from .analytic import CongestionSolution, UeClassParams, solve_congestion
from .metrics import MetricsFrame, aggregate_runs, record_window
from .rrc import RrcState, RrcTimers, transition_table
from .scenario import Scenario, SchemaError
from .sim import SimPoint, simulate

__all__ = ["CongestionSolution", "MetricsFrame", "RrcState", "RrcTimers", "Scenario",
           "SchemaError", "SimPoint", "UeClassParams", "aggregate_runs", "record_window",
           "simulate", "solve_congestion", "transition_table"]
__version__ = "0.1.0"

"""railsched: exact train rescheduling for disrupted rail networks."""

from .core import (Block, Closure, DisruptionScenario, Instance, InstanceError,
                   ModelConfig, Node, RailNetwork, Stop, TimeGrid, TrainService,
                   baseline_objective, load_instance, load_scenario,
                   save_instance, to_interval, to_minute)
from .criticality import (AggregationResult, CriticalityRecord, Weights,
                          aggregate, criticality_index, normalized_degree,
                          normalized_demand, rank_nodes)
from .model import (ClosureGrid, RescheduleModel, build_adjusted, build_basic,
                    identify_affected, materialize_closures)
from .solution import ScheduleSolution, load_solution, schedule_from_entries
from .solver import (BruteForceCapError, SolverTimeout, brute_force, export_mps,
                     solve)
from .validate import DelayReport, ViolationReport, check, delays, mutate_and_check
from .render import render_diagram

__version__ = "0.1.0"

__all__ = [
    "Block", "Closure", "DisruptionScenario", "Instance", "InstanceError",
    "ModelConfig", "Node", "RailNetwork", "Stop", "TimeGrid", "TrainService",
    "baseline_objective", "load_instance", "load_scenario", "save_instance",
    "to_interval", "to_minute",
    "AggregationResult", "CriticalityRecord", "Weights", "aggregate",
    "criticality_index", "normalized_degree", "normalized_demand", "rank_nodes",
    "ClosureGrid", "RescheduleModel", "build_adjusted", "build_basic",
    "identify_affected", "materialize_closures",
    "ScheduleSolution", "load_solution", "schedule_from_entries",
    "BruteForceCapError", "SolverTimeout", "brute_force", "export_mps", "solve",
    "DelayReport", "ViolationReport", "check", "delays", "mutate_and_check",
    "render_diagram",
]

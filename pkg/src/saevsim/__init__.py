"""Dispatch simulation and scheduling for shared automated electric vehicle fleets."""

from .baselines import PolicyId, make_policy, nearest_fcfs
from .network import BatteryModel, CostModel, RoadGraph, Zone, build_customer_nodes, dispatch_cost, sssp
from .scenario import Scenario, illustrative_example, load_scenario, save_scenario
from .scheduler import MDPPPolicy, SchedulerConfig, solve_batch
from .sim import Simulator, run

__all__ = [
    "BatteryModel", "CostModel", "MDPPPolicy", "PolicyId", "RoadGraph", "Scenario", "SchedulerConfig",
    "Simulator", "Zone", "build_customer_nodes", "dispatch_cost", "illustrative_example", "load_scenario",
    "make_policy", "nearest_fcfs", "run", "save_scenario", "solve_batch", "sssp",
]
__version__ = "0.1.0"

"""Simulate collective communication on reconfigurable photonic interconnects."""

from .collectives import Schedule, bucket_schedule, dex_schedule, make_schedule, rhd_schedule, ring_schedule
from .cost_model import CostParams, round_cost, schedule_cost
from .planner import PlannerInput, ReconfigPlan, brute_force_plan, plan
from .topology import Topology, make_topology, round_topology, shortest_path

__version__ = "0.1.0"

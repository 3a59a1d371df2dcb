"""spraywatch: passive gray-failure detection for packet-sprayed fabrics.

A library in three layers:

  topology / sim / workload   packet-level model of a leaf-spine fabric
  spray / spraycheck          per-packet spraying and the passive
                              per-spine balance check that turns spray
                              statistics into failure reports
  monitor / harness           fleet-level localization of reported
                              failures, plus experiment drivers
"""

from .topology import Topology, Link, build_fat_tree, set_link_state
from .spray import spray_select
from .spraycheck import (
    compute_threshold,
    weighted_thresholds,
    MeasureSelector,
    DeficitDetector,
    DetectorConfig,
    PathFailureReport,
)
from .sim import Sim, SimConfig, SimTrace, ScenarioError, run_scenario
from .workload import (
    FlowSpec,
    ring_flows,
    permutation_flows,
    bisection_flow,
    bisection_traffic,
    encode_announcement,
    decode_announcement,
)
from .monitor import FleetMonitor, LocalizedFailure

__version__ = "0.1.0"

__all__ = [
    "Topology", "Link", "build_fat_tree", "set_link_state",
    "spray_select",
    "compute_threshold", "weighted_thresholds",
    "MeasureSelector", "DeficitDetector", "DetectorConfig", "PathFailureReport",
    "Sim", "SimConfig", "SimTrace", "ScenarioError", "run_scenario",
    "FlowSpec", "ring_flows", "permutation_flows", "bisection_flow",
    "bisection_traffic", "encode_announcement", "decode_announcement",
    "FleetMonitor", "LocalizedFailure",
    "__version__",
]

"""Dynamic load planning toolkit for a single parcel terminal.

Computes trailer (load) plans and commodity flow splits via exact MIP
optimization, goal-directed two-stage optimization against a reference plan,
a learned proxy with MIP feasibility restoration, and a greedy baseline,
plus the data generation and consistency metrics needed to compare them.
"""

from loadplan.network import (
    Commodity,
    Instance,
    NodeId,
    ReferencePlan,
    Scenario,
    ServiceClass,
    Sort,
    SortPair,
    TrailerType,
    diversion_cost,
    epsilon_weight,
    load_instance,
    restrict_scenario,
    save_instance,
)

__version__ = "0.1.0"

__all__ = [
    "Commodity",
    "Instance",
    "NodeId",
    "ReferencePlan",
    "Scenario",
    "ServiceClass",
    "Sort",
    "SortPair",
    "TrailerType",
    "diversion_cost",
    "epsilon_weight",
    "load_instance",
    "restrict_scenario",
    "save_instance",
    "__version__",
]

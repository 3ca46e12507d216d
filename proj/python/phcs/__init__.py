"""Preemptive merge coordination: scheduling kernel and traffic harness."""

from ._phcs import (
    Schedule,
    ScenarioConfig,
    Task,
    TemporalConfig,
    ZoneLabel,
    classify_zone,
    compare,
    deadlines_for,
    generate_demand,
    is_conflicting,
    is_submittable,
    measure_capacity,
    run_scenario,
    try_approve,
)

__all__ = [
    "Schedule",
    "ScenarioConfig",
    "Task",
    "TemporalConfig",
    "ZoneLabel",
    "classify_zone",
    "compare",
    "deadlines_for",
    "generate_demand",
    "is_conflicting",
    "is_submittable",
    "measure_capacity",
    "run_scenario",
    "try_approve",
]

"""evfeeder: unbalanced four-wire LV feeder simulation of EV charging strategies."""

from .charging import (
    ChargeSchedule,
    ChargeWindow,
    ZonePlan,
    ev_power_frame,
    load_zone_plan,
    schedule_semi_smart,
    schedule_timer,
    schedule_uncontrolled,
    schedule_zoned,
)
from .loads import (
    BaseLoadCurve,
    EvDistributions,
    EvSpec,
    FleetSpec,
    HouseholdLoad,
    charge_duration_slots,
    default_base_curve,
    load_base_curve,
    load_fleet,
    sample_fleet,
    sample_household_loads,
)
from .metrics import (
    ScenarioReport,
    compare_scenarios,
    energy_losses,
    max_neutral_voltage,
    worst_bus_voltages,
)
from .network import (
    FeederFormatError,
    LineSegment,
    NetworkTopology,
    TopologyError,
    children,
    load_topology,
)
from .powerflow import (
    InfeasibleInjectionError,
    NetworkState,
    kcl_residual,
    solve_direct,
    solve_sweep,
)
from .scenario import (
    STRATEGIES,
    ScenarioConfig,
    SimulationError,
    run_scenario,
    run_sweep,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BaseLoadCurve",
    "ChargeSchedule",
    "ChargeWindow",
    "EvDistributions",
    "EvSpec",
    "FeederFormatError",
    "FleetSpec",
    "HouseholdLoad",
    "InfeasibleInjectionError",
    "LineSegment",
    "NetworkState",
    "NetworkTopology",
    "STRATEGIES",
    "ScenarioConfig",
    "ScenarioReport",
    "SimulationError",
    "TopologyError",
    "ZonePlan",
    "charge_duration_slots",
    "children",
    "compare_scenarios",
    "default_base_curve",
    "energy_losses",
    "ev_power_frame",
    "kcl_residual",
    "load_base_curve",
    "load_fleet",
    "load_topology",
    "load_zone_plan",
    "max_neutral_voltage",
    "run_scenario",
    "run_sweep",
    "sample_fleet",
    "sample_household_loads",
    "schedule_semi_smart",
    "schedule_timer",
    "schedule_uncontrolled",
    "schedule_zoned",
    "solve_direct",
    "solve_sweep",
    "validate",
    "worst_bus_voltages",
]

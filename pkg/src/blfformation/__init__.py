"""Formation-preserving multi-agent target tracking with barrier Lyapunov functions."""

from .control import ControlCommand, LocalView, SaturationSpec, blf_control, qlf_control, saturate
from .engine import (
    MetricsReport,
    Scenario,
    Trace,
    cyclic_order,
    detect_reorder,
    gamma_metric,
    lyapunov_monitor,
    run,
    summarize,
)
from .formation import EdgeBounds, FormationGraph, in_admissible_set, neighbors, validate_graph
from .potentials import (
    Gains,
    PotentialReport,
    barrier_gradient,
    barrier_potential,
    combined_potential,
    quadratic_gradient,
    quadratic_potential,
    target_gradient,
    target_potential,
)
from .scenario_file import PRESETS, load_preset, load_scenario, parse_scenario, write_scenario
from .world import (
    ChainedTarget,
    CircularTarget,
    IntegrationSpec,
    LinearTarget,
    NoiseSpec,
    StationaryTarget,
    SwarmState,
    guarded_step,
    observe,
    step,
    target_state,
)

__version__ = "0.1.0"

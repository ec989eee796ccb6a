"""Fluid-antenna RIS-NOMA downlink simulator and sum-rate optimizer."""

from .ao import AoSolution, alternating_optimize, complexity_estimate, evaluate
from .channel import (
    ChannelRealization,
    bessel_j0,
    fas_port_steering,
    jakes_correlation,
    load_realization,
    sample_realization,
    save_realization,
    ula_steering,
    upa_steering,
)
from .experiments import SCHEMES, SweepSpec, preset, read_csv, run_sweep, run_trial, write_csv
from .phases import (
    PhaseSolution,
    dc_objective,
    gaussian_randomize,
    optimize_phases,
    sca_loop,
    sca_minorant,
    solve_inner,
)
from .placement import pso_optimize, step_swarm
from .ports import baseline_port, best_port, spacing_ok
from .rate import (
    LiftedForm,
    MismatchedChannel,
    PortIndex,
    RateReport,
    apply_ipcsi,
    effective_gain,
    lift_matrix,
    noma_rates,
    oma_rates,
)
from .scenario import (
    Box,
    ScenarioConfig,
    direction_cosines,
    distance,
    geometry_at,
    load_config,
    make_config,
)

__version__ = "0.1.0"

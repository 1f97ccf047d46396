"""bohmlab: spin-dependent Bohmian arrival-time ensembles and the
flat-foliation detection / signaling protocols built on top of them."""

__version__ = "0.1.0"

from .spacetime import (  # noqa: F401
    BoostSpec,
    Event4,
    FoliationNormal,
    SimultaneousPair,
    TemporalOrder,
    boost,
    check_triad_independence,
    foliation_time,
    minkowski_dot,
    rapidity_between,
    solve_normal,
    temporal_order,
)
from .fields import (  # noqa: F401
    AliceFirst,
    BobFirst,
    BranchWeights,
    SpinAxis,
    WaveguideModel,
    backflow_predicate,
    conditional_velocity,
    convective_velocity,
    initial_density,
    mixed_velocity,
    scenario_velocity,
    velocity_field,
    weights,
)
from .trajectories import (  # noqa: F401
    ArrivalRecord,
    IntegratorConfig,
    integrate_until_crossing,
    trajectory_trace,
)
from .ensemble import (  # noqa: F401
    ArrivalHistogram,
    ClassifierConfig,
    DistributionClass,
    arrival_distribution,
    calibrate_classifier,
    classify,
    empirical_tau_max,
    equivariance_check,
    flash_eta,
    ks_statistic,
    run_ensemble,
    sample_initial,
    set_threads,
    sg_outcome,
)
from .protocol import (  # noqa: F401
    FoliationReport,
    HiddenFoliation,
    LabGeometry,
    RunRecord,
    SearchConfig,
    SignalReport,
    aggregate_events,
    calibrate_signaling,
    default_orientations,
    detect_foliation,
    simulate_run,
    standard_geometry,
    switch_search,
    transmit_bits,
)

"""Exact and numerical verification of CTMCs against deterministic timed automata."""

from .markov import (
    Ctmc,
    Dtmc,
    TimedPath,
    bottom_sccs,
    dtmc_reachability,
    embedded_dtmc,
    generator_matrix,
    sample_timed_path,
    transient_matrix,
)
from .product import (
    Dmta,
    DmtaEdge,
    build_product,
    cylinder_probability,
    one_jump_probability,
)
from .grid import (
    ConvergenceError,
    GridSpec,
    ValueField,
    check_time_bounded,
    dump_field_csv,
    grid_reach_probability,
    solve_grid,
    value_iterate,
)
from .muller import (
    AcceptingBsccSet,
    QualitativeResult,
    accepting_bsccs,
    check_muller,
    qualitative_check,
)
from .formats import (
    FormatError,
    ctmc_from_dict,
    ctmc_to_dict,
    dta_from_dict,
    dta_to_dict,
    load_ctmc,
    load_dta,
    save_ctmc,
    save_dta,
)
from .report import PhaseTimer, VerificationReport
from .simulate import Estimate, SimConfig, simulate_acceptance
from .verify import OptionsError, verify
from .single_clock import (
    Partition,
    Subgraph,
    assemble_and_solve,
    augmented_ctmc,
    compute_transients,
    partition_region_graph,
    solve_single_clock,
)
from .regions import (
    MarkovEdge,
    PdpState,
    Region,
    RegionGraph,
    boundary_hit_time,
    build_region_graph,
    embedded_jump_probability,
    export_dot,
    prune_region_graph,
    region_of,
    sample_valuation,
    simplify_region_graph,
)
from .timed import (
    TRUE,
    ClockAtom,
    ClockConstraint,
    DeterminismError,
    Dta,
    DtaEdge,
    FiniteAcceptance,
    Interval,
    MullerAcceptance,
    dta_step,
    guard_enabled_interval,
    max_constant,
    time_bound_transform,
    validate_dta,
)

__version__ = "0.1.0"

__all__ = [
    "Ctmc",
    "Dtmc",
    "TimedPath",
    "bottom_sccs",
    "dtmc_reachability",
    "embedded_dtmc",
    "generator_matrix",
    "sample_timed_path",
    "transient_matrix",
    "Dmta",
    "DmtaEdge",
    "build_product",
    "cylinder_probability",
    "one_jump_probability",
    "ConvergenceError",
    "GridSpec",
    "ValueField",
    "check_time_bounded",
    "dump_field_csv",
    "grid_reach_probability",
    "solve_grid",
    "value_iterate",
    "AcceptingBsccSet",
    "QualitativeResult",
    "accepting_bsccs",
    "check_muller",
    "qualitative_check",
    "FormatError",
    "ctmc_from_dict",
    "ctmc_to_dict",
    "dta_from_dict",
    "dta_to_dict",
    "load_ctmc",
    "load_dta",
    "save_ctmc",
    "save_dta",
    "PhaseTimer",
    "VerificationReport",
    "Estimate",
    "SimConfig",
    "simulate_acceptance",
    "OptionsError",
    "verify",
    "Partition",
    "Subgraph",
    "assemble_and_solve",
    "augmented_ctmc",
    "compute_transients",
    "partition_region_graph",
    "solve_single_clock",
    "MarkovEdge",
    "PdpState",
    "Region",
    "RegionGraph",
    "boundary_hit_time",
    "build_region_graph",
    "embedded_jump_probability",
    "export_dot",
    "prune_region_graph",
    "region_of",
    "sample_valuation",
    "simplify_region_graph",
    "TRUE",
    "ClockAtom",
    "ClockConstraint",
    "DeterminismError",
    "Dta",
    "DtaEdge",
    "FiniteAcceptance",
    "Interval",
    "MullerAcceptance",
    "dta_step",
    "guard_enabled_interval",
    "max_constant",
    "time_bound_transform",
    "validate_dta",
    "__version__",
]

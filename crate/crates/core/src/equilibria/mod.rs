//! LP core, equilibrium polytopes, Nash enumeration and Stackelberg values.

pub mod lp;
pub mod nash;
pub mod polytope;
pub mod stackelberg;

pub use lp::{lp_solve, Constraint, Direction, LinearSystem, LpOutcome, LpSolution};
pub use nash::{mixed_nash_support_enumeration, pure_nash_profiles};
pub use polytope::{
    build_ced_system, build_hannan_system, build_system, l1_distance_to_set, l1_projection,
    min_or_max_over_polytope, PolytopeOptimum, Projection, SetKind,
};
pub use stackelberg::{
    correlated_stackelberg_value, hannan_stackelberg_value, mixed_stackelberg_values,
    pure_stackelberg_values, stackelberg_report, ChainCheck, ChainLink, Method,
    PureStackelberg, Response, StackelbergReport, StackelbergValue, DEFAULT_GRID_RESOLUTION,
};

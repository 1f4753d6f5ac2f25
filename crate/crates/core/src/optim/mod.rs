//! Dense LP solver and the distance problems built on it.

mod distance;
mod simplex;

pub use distance::{chebyshev_distance, chebyshev_distance_with, l1_distance, l1_distance_with, SpanDistance};
pub use simplex::{
    solve_lp, solve_lp_with, Constraint, LinearProgram, LpSolution, LpStatus, PivotRule, Relation, SimplexOptions,
    VarBound, DEFAULT_CONSTRAINT_CAP,
};

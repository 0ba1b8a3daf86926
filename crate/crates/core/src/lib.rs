//! Dual representations of quasiconvex conditional maps on finite
//! probability spaces.
//!
//! The crate evaluates conditional maps atom by atom, computes the dual
//! functionals `K`, `R` and `H`, certifies that the primal value matches the
//! dual supremum to tolerance, and cross-checks everything against slow
//! brute-force grid oracles. See the `harness` module for the seeded
//! property-test suite that ties the pieces together.

pub mod dual_engine;
pub mod harness;
pub mod maps;
pub mod oracle;
pub mod prob_core;
pub mod rng;
pub mod solvers;

pub use dual_engine::{
    duality_gap, fenchel_conjugate, glue_density, h_value, k_value, r_value, restrict_to_p_g,
    AtomReport, DualReport, EngineError,
};
pub use harness::{
    gen_instance, run_property_suite, CheckResult, FailureRecord, FamilyKind, Instance,
    SuiteReport, CHECK_REGISTRY,
};
pub use maps::{cce_evaluate, MapError, MapSpec, Orientation, Transform, Utility};
pub use oracle::{
    enumerate_partitions, equality_k, grid_k, grid_support, slope_bound, GridCfg, OracleError,
};
pub use prob_core::{
    cond_expect, dyadic_partition, ess_sup_on, is_measurable, AtomValue, Density, FiniteSpace,
    Partition, PerAtom, ProbError, Rv,
};
pub use rng::Rng;
pub use solvers::{
    bisect, simplex_search, BisectResult, BisectStatus, SimplexOutcome, SolverCfg,
};

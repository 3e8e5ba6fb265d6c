mod checks;
mod generators;
mod report;
mod run;
mod scenario;

pub use checks::{run_invariants, InvariantSuite, CONSERVATION_TOL, SEMIGROUP_TOL, VACUUM_TOL};
pub use generators::{noise_for_kernel, FieldGen, KernelGen};
pub use report::{
    compare, Check, ComparisonReport, DualityEstimate, MethodFailure, PairComparison,
};
pub use run::{
    match_residual, run_scenario, ADJOINTNESS_TOL, MATCH_TOL, MAX_BLOWUP_FRACTION, RATIO_TOL,
};
pub use scenario::{method_matrix, Caps, LatticeParams, Method, Scenario, ScenarioName, Tolerance};

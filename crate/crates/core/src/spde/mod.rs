//! Euler-Maruyama integration of lattice SPDEs and ensemble moments.

mod ensemble;
mod spec;

pub use ensemble::{
    ensemble, ensemble_exp_moment, ensemble_halving, ensemble_product_moment, EnsembleEstimate,
    HalvingEstimate,
};
pub use spec::{
    build_match_kernel, em_step, integrate, integrate_recorded, rk4_integrate, step_count, Drift,
    NoiseOperatorSpec, NoiseSpec, Scheme, SpdeSpec, Stepper, DEFAULT_BLOWUP_CEILING,
};

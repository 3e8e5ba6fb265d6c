//! Truncated Fock-space realization of the Doi operators.

mod basis;
pub mod expm;
mod ladder;
mod operator;
mod oracle;
mod states;

pub use basis::FockBasis;
pub use expm::{expm_action, expm_dense, taylor_expmv, DENSE_LIMIT};
pub use ladder::{
    geometric_diffusion_terms, ladder_liouvillian, ladder_matrix, ladder_terms, LadderTerm,
};
pub use operator::{assemble_liouvillian, cap_states, OperatorMatrix, Role, Which};
pub use oracle::{
    check_conservation, evolve, raw_braket, BraketResult, ConservationMode, FockOracle,
    DEFAULT_LEAKAGE_BOUND,
};
pub use states::{
    basis_vector, coherent_vector, dot, flat_coherent_vector, occupation_weight, pure_state_vector,
    MINUS, MINUS_NORM_SQ,
};

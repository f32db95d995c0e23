//! Fisher information of the joint transmit/channel model, its rank deficiency, prior
//! information from scores, Bayesian FIM inversion and smoothing-error diagnostics.
//!
//! Parameter ordering: `φ = [x; h]` with `x = [vec X_1; …; vec X_{n_f}]` (`X_f` is
//! `t_s × n_t`, index `t + t_s·k`) and `h = [vec H_1; …; vec H_{n_f}]` (`H_f` is `n_t × n_r`,
//! index `k + n_t·r`).

pub mod bound;
pub mod diagnostics;
pub mod error;
pub mod fim;
pub mod prior;

pub use bound::{bcrb, bfim, real_embedding, BcrbResult, Bfim, PriorTerm, FIM_CALIBRATION};
pub use diagnostics::{appendix_b_diagnostics, DiagnosticRow, DiagnosticsTable};
pub use error::FimError;
pub use fim::{
    assemble_fim, null_vectors, verify_rank_deficiency, FimMatrix, NullBasis, RankCheck,
};
pub use prior::{
    gaussian_prior_fim, prior_fim, prior_fim_gmm, smoothed_gaussian_prior_fim,
    smoothed_real_precision, wirtinger_from_real,
};

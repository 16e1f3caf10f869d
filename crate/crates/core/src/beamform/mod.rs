//! Per-BS transmit beamforming for a fixed user association.
//!
//! The weighted sum rate is handled by the quadratic transform, the CRB
//! constraint by an augmented Lagrangian over auxiliaries `(C, q)`, and the
//! resulting quartic penalty by majorization, leaving a convex QCQP in `w`
//! per round.

mod admm;
mod cq;
mod fp;
mod mm;
mod qcqp;

pub use admm::{
    admm_solve, admm_solve_with, dual_penalty_update, history_csv_string, init_beamformer, write_history_csv,
    AdmmOptions, AdmmRecord, AdmmResult, AdmmState,
};
pub use cq::{solve_cq, CqSolution};
pub use fp::{
    assemble_f, fp_objective, fp_objective_upsilon, fp_update_b, fp_update_upsilon, weighted_rate, FpAssembly,
};
pub use mm::{mm_bounds, MmBounds, PenaltyBlock};
pub use qcqp::{project, solve_w, HalfSpace, SnrConstraint, WObjective, WSolve, WSolveOptions};

//! Linear rational-expectations models with QZ-based equilibrium selection.
//!
//! The crate solves models of the form
//!
//! ```text
//! A0 z_t = A1 E_t[z_{t+1}] + B eps_t + c
//! ```
//!
//! where the first `n_s` entries of `z_t` are predetermined. It provides:
//!
//! - a validated model container with JSON (de)serialization ([`model`]),
//! - a complex-arithmetic QZ (generalized Schur) decomposition with
//!   eigenvalue classification and stable-first reordering ([`qz`]),
//! - equilibrium selection operators: Blanchard–Kahn, minimal-variance, and
//!   fiscal-anchoring, plus a determinacy map over policy-rule grids
//!   ([`selectors`]),
//! - piecewise-linear solving under an occasionally binding constraint
//!   ([`occbin`]),
//! - simulation, impulse responses, stationary variance, residual checks, and
//!   path comparison ([`verify`]).

pub mod error;
pub mod model;
pub mod qz;
pub mod occbin;
pub mod selectors;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    load_model, new_model, nk_model, nk_model_textbook, nk_model_with_rate, save_model,
    scalar_forward_model, taylor_threshold, LinearREModel, NKParams, SCHEMA_VERSION,
};
pub use qz::{
    classify, qz_decompose, qz_decompose_with, reorder_stable_first, EigenvalueClass,
    GeneralizedEigenvalue, QzFactorization, QzOptions, C64,
};
pub use selectors::{
    augment_fiscal, determinacy_map, diagnose, ricardian_threshold, select_bk, select_fa,
    select_mv, CellClass, Determinacy, Diagnostics, EigReport, FaSelection, FiscalParams,
    FiscalRoles, MapCell, MapTable, MvSelection, Selection, SelectOptions, SolvabilityChecks,
    StateSpaceSolution,
};
pub use occbin::{
    check_complementarity, piecewise_residuals, piecewise_solve, regime_update, solve_occbin,
    zlb_regime_pair, ComplementarityReport, Constraint, OccbinOptions, OccbinPath, Regime,
    RegimeSpec,
};
pub use verify::{
    compare_paths, impulse_response, residual_check, simulate, sunspot_augmented,
    unconditional_variance, DiffReport, PathTable, ResidualMode, ResidualReport, SimResult,
    VarDiff,
};

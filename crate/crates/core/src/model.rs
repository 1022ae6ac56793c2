//! Validated container for linear rational-expectations models
//!
//! ```text
//! A0 z_t = A1 E_t[z_{t+1}] + B eps_t + c
//! ```
//!
//! with the first `n_s` variables predetermined, plus builders for the
//! bundled three-equation monetary model and JSON (de)serialization.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema version written to and required from model JSON files.
pub const SCHEMA_VERSION: u64 = 1;

/// Entries of `A1` smaller than this (relative to the matrix scale) are
/// treated as structural zeros when classifying rows.
const STRUCTURAL_ZERO_REL: f64 = 1e-14;

/// A linear rational-expectations model in canonical form.
///
/// Variables are ordered predetermined-first: indices `0..n_s` are states
/// (their date-t values are functions of history and the date-t innovation),
/// the rest are non-predetermined ("jumps").
#[derive(Clone, Debug, PartialEq)]
pub struct LinearREModel {
    names: Vec<String>,
    shock_names: Vec<String>,
    n_s: usize,
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    params: BTreeMap<String, f64>,
}

impl LinearREModel {
    /// Number of variables.
    pub fn n(&self) -> usize {
        self.names.len()
    }

    /// Number of predetermined variables.
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Number of non-predetermined (jump) variables.
    pub fn n_j(&self) -> usize {
        self.n() - self.n_s
    }

    /// Number of exogenous shocks.
    pub fn n_shocks(&self) -> usize {
        self.shock_names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn shock_names(&self) -> &[String] {
        &self.shock_names
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Index of a variable by name.
    pub fn name_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Rows that define next-period states: `A1` touches no jump column but
    /// does touch a state column. Their shock entries are dated with the
    /// left-hand state (the realized row `s_{t+1} = ... + B_i eps_{t+1}`);
    /// all other rows hold at date t in conditional mean with `B_i eps_t`.
    pub fn state_evolution_rows(&self) -> Vec<usize> {
        let scale = self.a1.amax().max(1.0);
        let tol = STRUCTURAL_ZERO_REL * scale;
        (0..self.n())
            .filter(|&i| {
                let jumps_zero = (self.n_s..self.n()).all(|j| self.a1[(i, j)].abs() <= tol);
                let states_present = (0..self.n_s).any(|j| self.a1[(i, j)].abs() > tol);
                jumps_zero && states_present
            })
            .collect()
    }
}

fn check_finite(tag: &str, it: impl Iterator<Item = f64>) -> Result<()> {
    for (k, v) in it.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry(format!(
                "{tag} contains a non-finite value at flat index {k}"
            )));
        }
    }
    Ok(())
}

/// Validate and assemble a model. This is the only way to construct
/// [`LinearREModel`], so every instance satisfies the shape and finiteness
/// invariants.
#[allow(clippy::too_many_arguments)]
pub fn new_model(
    names: Vec<String>,
    shock_names: Vec<String>,
    n_s: usize,
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    params: BTreeMap<String, f64>,
) -> Result<LinearREModel> {
    let n = names.len();
    let k = shock_names.len();
    if n == 0 {
        return Err(Error::InvalidModel("model must declare at least one variable".into()));
    }
    if a0.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "a0 is {}x{}, expected {n}x{n}",
            a0.nrows(),
            a0.ncols()
        )));
    }
    if a1.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "a1 is {}x{}, expected {n}x{n}",
            a1.nrows(),
            a1.ncols()
        )));
    }
    if b.shape() != (n, k) {
        return Err(Error::DimensionMismatch(format!(
            "b is {}x{}, expected {n}x{k} (one column per shock)",
            b.nrows(),
            b.ncols()
        )));
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "c has length {}, expected {n}",
            c.len()
        )));
    }
    if n_s > n {
        return Err(Error::DimensionMismatch(format!(
            "n_s = {n_s} exceeds the variable count {n}"
        )));
    }
    check_finite("a0", a0.iter().copied())?;
    check_finite("a1", a1.iter().copied())?;
    check_finite("b", b.iter().copied())?;
    check_finite("c", c.iter().copied())?;
    for (name, v) in &params {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry(format!("params[{name}] is non-finite")));
        }
    }
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::InvalidModel(format!("variable {i} has an empty name")));
        }
        if names[..i].contains(name) {
            return Err(Error::InvalidModel(format!("duplicate variable name `{name}`")));
        }
    }
    for (i, name) in shock_names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::InvalidModel(format!("shock {i} has an empty name")));
        }
        if shock_names[..i].contains(name) {
            return Err(Error::InvalidModel(format!("duplicate shock name `{name}`")));
        }
    }
    Ok(LinearREModel {
        names,
        shock_names,
        n_s,
        a0,
        a1,
        b,
        c,
        params,
    })
}

/// Calibration of the bundled three-equation monetary model:
/// Euler/IS curve, Phillips curve, interest-rate rule
/// `i_t = phi_pi * pi_t + phi_y * y_t`, and an AR(1) natural rate with
/// persistence `rho` driven by the single shock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NKParams {
    /// Inverse intertemporal elasticity (Euler-curve slope), > 0.
    pub sigma: f64,
    /// Discount factor, in (0, 1].
    pub beta: f64,
    /// Phillips-curve slope, > 0.
    pub kappa: f64,
    /// Rule response to inflation, >= 0.
    pub phi_pi: f64,
    /// Rule response to output, >= 0.
    pub phi_y: f64,
    /// Natural-rate persistence, in [0, 1).
    pub rho: f64,
}

impl Default for NKParams {
    fn default() -> Self {
        NKParams {
            sigma: 1.0,
            beta: 0.99,
            kappa: 0.02,
            phi_pi: 1.5,
            phi_y: 0.0,
            rho: 0.9,
        }
    }
}

impl NKParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma,
            self.beta,
            self.kappa,
            self.phi_pi,
            self.phi_y,
            self.rho,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParams(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParams(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.phi_pi < 0.0 {
            return Err(Error::InvalidParams(format!("phi_pi must be >= 0, got {}", self.phi_pi)));
        }
        if self.phi_y < 0.0 {
            return Err(Error::InvalidParams(format!("phi_y must be >= 0, got {}", self.phi_y)));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParams(format!("rho must be in [0, 1), got {}", self.rho)));
        }
        Ok(())
    }

    fn to_map(self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("sigma".into(), self.sigma);
        m.insert("beta".into(), self.beta);
        m.insert("kappa".into(), self.kappa);
        m.insert("phi_pi".into(), self.phi_pi);
        m.insert("phi_y".into(), self.phi_y);
        m.insert("rho".into(), self.rho);
        m
    }
}

/// Canonical encoding of the monetary model: variables `(rn, y, pi)` with the
/// natural rate predetermined (`n_s = 1`).
///
/// The natural-rate row is the conditional-mean identity
/// `rho * rn_t = E_t[rn_{t+1}]` with the shock loading the date-t+1
/// innovation (realized: `rn_{t+1} = rho * rn_t + eps_{t+1}`), so the AR(1)
/// contributes the stable transition root `rho`. Note a forward-dated
/// encoding `rn_t = rho * E_t[rn_{t+1}] + eps_t` (see
/// [`nk_model_textbook`]) would instead contribute the *unstable* root
/// `1/rho` and misclassify the model.
pub fn nk_model(p: &NKParams) -> Result<LinearREModel> {
    p.validate()?;
    let s = p.sigma;
    let a0 = DMatrix::from_row_slice(
        3,
        3,
        &[
            p.rho, 0.0, 0.0, //
            -1.0 / s, 1.0 + p.phi_y / s, p.phi_pi / s, //
            0.0, -p.kappa, 1.0,
        ],
    );
    let a1 = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0, 0.0, 0.0, //
            0.0, 1.0, 1.0 / s, //
            0.0, 0.0, p.beta,
        ],
    );
    let b = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    let c = DVector::zeros(3);
    new_model(
        vec!["rn".into(), "y".into(), "pi".into()],
        vec!["eps_rn".into()],
        1,
        a0,
        a1,
        b,
        c,
        p.to_map(),
    )
}

/// The same model in the layout commonly typeset in references: variables
/// `(y, pi, rn)` and a forward-dated natural-rate row
/// `rn_t = rho * E_t[rn_{t+1}] + eps_t`.
///
/// Provided for cross-checking printed matrices entry by entry. Not suitable
/// for solving: the predetermined variable sits last (violating the
/// states-first convention this crate's selectors assume) and the
/// forward-dated AR row contributes the transition root `1/rho` instead of
/// `rho`.
pub fn nk_model_textbook(p: &NKParams) -> Result<LinearREModel> {
    p.validate()?;
    let s = p.sigma;
    let a0 = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 + p.phi_y / s, p.phi_pi / s, -1.0 / s, //
            -p.kappa, 1.0, 0.0, //
            0.0, 0.0, 1.0,
        ],
    );
    let a1 = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0, 1.0 / s, 0.0, //
            0.0, p.beta, 0.0, //
            0.0, 0.0, p.rho,
        ],
    );
    let b = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
    let c = DVector::zeros(3);
    new_model(
        vec!["y".into(), "pi".into(), "rn".into()],
        vec!["eps_rn".into()],
        1,
        a0,
        a1,
        b,
        c,
        p.to_map(),
    )
}

/// Monetary model with the policy rate kept explicit: variables
/// `(rn, y, pi, R)` with `n_s = 1` and the rule row `R_t = phi_pi * pi_t +
/// phi_y * y_t`. Substituting the rule row into the Euler row reproduces
/// [`nk_model`]. The rate column is absent from `A1`, so the pencil carries
/// one infinite eigenvalue (a static variable).
///
/// This is the form used for regime experiments where the rule row is
/// replaced (e.g. a pegged rate at a lower bound).
pub fn nk_model_with_rate(p: &NKParams) -> Result<LinearREModel> {
    p.validate()?;
    let s = p.sigma;
    let a0 = DMatrix::from_row_slice(
        4,
        4,
        &[
            p.rho, 0.0, 0.0, 0.0, //
            -1.0 / s, 1.0, 0.0, 1.0 / s, //
            0.0, -p.kappa, 1.0, 0.0, //
            0.0, -p.phi_y, -p.phi_pi, 1.0,
        ],
    );
    let a1 = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 1.0 / s, 0.0, //
            0.0, 0.0, p.beta, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ],
    );
    let b = DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
    let c = DVector::zeros(4);
    new_model(
        vec!["rn".into(), "y".into(), "pi".into(), "R".into()],
        vec!["eps_rn".into()],
        1,
        a0,
        a1,
        b,
        c,
        p.to_map(),
    )
}

/// Scalar purely forward-looking model `y_t = coeff * E_t[y_{t+1}] + eps_t`
/// with `|coeff| < 1`: no predetermined variables, transition root
/// `1/coeff` outside the unit circle, so the unique bounded solution is
/// `y_t = eps_t`.
pub fn scalar_forward_model(coeff: f64) -> Result<LinearREModel> {
    if !coeff.is_finite() || coeff.abs() >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "forward coefficient must satisfy |coeff| < 1, got {coeff}"
        )));
    }
    let mut params = BTreeMap::new();
    params.insert("coeff".into(), coeff);
    new_model(
        vec!["y".into()],
        vec!["eps".into()],
        0,
        DMatrix::from_row_slice(1, 1, &[1.0]),
        DMatrix::from_row_slice(1, 1, &[coeff]),
        DMatrix::from_row_slice(1, 1, &[1.0]),
        DVector::zeros(1),
        params,
    )
}

/// Documented inflation-response threshold `1 + ((1 - beta)/kappa) * phi_y`.
///
/// On the `phi_y = 0` line this equals 1 and coincides with the computed
/// determinacy boundary of the bundled model. For `phi_y > 0` the computed
/// boundary is `1 - ((1 - beta)/kappa) * phi_y` (output response *relaxes*
/// the inflation-response requirement); this helper deliberately reproduces
/// the documented formula as stated, and the map tests compare the two.
pub fn taylor_threshold(beta: f64, kappa: f64, phi_y: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!("beta must be in (0, 1], got {beta}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParams(format!("kappa must be > 0, got {kappa}")));
    }
    if !(phi_y >= 0.0 && phi_y.is_finite()) {
        return Err(Error::InvalidParams(format!("phi_y must be >= 0, got {phi_y}")));
    }
    Ok(1.0 + (1.0 - beta) / kappa * phi_y)
}

// --- JSON schema ---

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u64,
    names: Vec<String>,
    shock_names: Vec<String>,
    n_s: usize,
    a0: Vec<Vec<f64>>,
    a1: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<f64>,
    params: BTreeMap<String, f64>,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(tag: &str, rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(ncols_if_empty, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != nc {
            return Err(Error::Parse(format!(
                "field `{tag}`: row {i} has {} entries, expected {nc} (rows must be rectangular)",
                r.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.concat();
    Ok(DMatrix::from_row_slice(nr, nc, &flat))
}

/// Serialize a model to the JSON schema (`schema_version` 1, row-major
/// nested arrays).
pub fn save_model(model: &LinearREModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        names: model.names.clone(),
        shock_names: model.shock_names.clone(),
        n_s: model.n_s,
        a0: matrix_to_rows(&model.a0),
        a1: matrix_to_rows(&model.a1),
        b: matrix_to_rows(&model.b),
        c: model.c.iter().copied().collect(),
        params: model.params.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Load and validate a model from the JSON schema. The schema version is
/// checked before anything else; missing fields are reported by name.
pub fn load_model(path: &Path) -> Result<LinearREModel> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("top level must be a JSON object".into()))?;
    let version = obj
        .get("schema_version")
        .ok_or_else(|| Error::Parse("missing field `schema_version`".into()))?
        .as_u64()
        .ok_or_else(|| Error::Parse("field `schema_version` must be a non-negative integer".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let n = file.names.len();
    let k = file.shock_names.len();
    let a0 = rows_to_matrix("a0", &file.a0, n)?;
    let a1 = rows_to_matrix("a1", &file.a1, n)?;
    let b = rows_to_matrix("b", &file.b, k)?;
    let c = DVector::from_vec(file.c);
    new_model(
        file.names,
        file.shock_names,
        file.n_s,
        a0,
        a1,
        b,
        c,
        file.params,
    )
}

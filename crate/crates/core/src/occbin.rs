//! Two-regime piecewise-linear perfect-foresight solver for occasionally
//! binding constraints.
//!
//! A [`RegimeSpec`] holds a reference model (constraint slack) and an
//! alternative model (constraint binding), sharing variables, ordering and
//! shocks. Paths are deviations from the reference steady state. The solver
//! alternates between solving a piecewise-linear perfect-foresight path for
//! a guessed regime sequence and re-classifying each period from the
//! constraint, until the sequence is a fixed point.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::model::LinearREModel;
use crate::selectors::{select_bk, SelectOptions, Selection, StateSpaceSolution};

/// Linear constraint `weights . z_t + offset > 0` marking the reference
/// regime as valid; the boundary (exactly zero) counts as binding.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub weights: DVector<f64>,
    pub offset: f64,
}

/// A two-regime piecewise-linear model.
#[derive(Clone, Debug)]
pub struct RegimeSpec {
    /// Model when the constraint is slack; must be determinate and have a
    /// zero constant term (paths are deviations from its steady state).
    pub reference: LinearREModel,
    /// Model when the constraint binds (e.g. a pegged rate expressed
    /// through the affine constant).
    pub alternative: LinearREModel,
    pub constraint: Constraint,
}

impl RegimeSpec {
    /// Structural agreement between the regimes plus constraint shape.
    pub fn validate(&self) -> Result<()> {
        let r = &self.reference;
        let a = &self.alternative;
        if r.names() != a.names() || r.shock_names() != a.shock_names() || r.n_s() != a.n_s() {
            return Err(Error::InvalidModel(
                "regimes must share variable names, ordering and shocks".to_string(),
            ));
        }
        if r.state_evolution_rows() != a.state_evolution_rows() {
            return Err(Error::InvalidModel(
                "regimes must share the same state-evolution rows".to_string(),
            ));
        }
        if self.constraint.weights.len() != r.n() {
            return Err(Error::DimensionMismatch(format!(
                "constraint weight vector has length {}, model has {} variables",
                self.constraint.weights.len(),
                r.n()
            )));
        }
        if !self.constraint.offset.is_finite()
            || self.constraint.weights.iter().any(|w| !w.is_finite())
        {
            return Err(Error::NonFiniteEntry("constraint".to_string()));
        }
        if r.c().amax() > 0.0 {
            return Err(Error::InvalidModel(
                "reference regime must have a zero constant term (paths are deviations \
                 from its steady state)"
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// Which regime governs a period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Reference,
    Alternative,
}

/// Converged (or diagnostic) output of the regime iteration.
#[derive(Clone, Debug)]
pub struct OccbinPath {
    pub horizon: usize,
    /// `horizon x n` deviations path; row `t` holds `z_t`.
    pub z_path: DMatrix<f64>,
    pub regimes: Vec<Regime>,
    pub iterations: usize,
    pub converged: bool,
    /// Hash of each visited regime sequence, in visit order (cycle
    /// evidence on failure).
    pub history: Vec<u64>,
}

/// Options for [`solve_occbin`].
#[derive(Clone, Debug)]
pub struct OccbinOptions {
    pub max_iter: usize,
    /// Initial regime sequence; `None` means all-reference.
    pub guess: Option<Vec<Regime>>,
    /// Error if the converged sequence still binds within this many
    /// trailing periods (the horizon clipped the spell).
    pub tail_window: usize,
    pub select: SelectOptions,
}

impl Default for OccbinOptions {
    fn default() -> Self {
        OccbinOptions {
            max_iter: 100,
            guess: None,
            tail_window: 10,
            select: SelectOptions::default(),
        }
    }
}

/// Width of the numerical boundary band: binding periods satisfy the
/// constraint with equality only up to linear-solve rounding, so slack
/// within this band of zero counts as the boundary (hence binding). An
/// exact `> 0` test would re-classify such periods from rounding noise and
/// the regime iteration could never reach an exact fixed point.
const BOUNDARY_BAND: f64 = 1e-12;

/// Classify each period of a path from the constraint: strictly positive
/// slack means reference, the boundary (within rounding) and below mean
/// the alternative regime.
pub fn regime_update(z_path: &DMatrix<f64>, rs: &RegimeSpec) -> Vec<Regime> {
    let d = &rs.constraint.weights;
    (0..z_path.nrows())
        .map(|t| {
            let slack: f64 = (0..z_path.ncols()).map(|j| d[j] * z_path[(t, j)]).sum::<f64>()
                + rs.constraint.offset;
            if slack > BOUNDARY_BAND {
                Regime::Reference
            } else {
                Regime::Alternative
            }
        })
        .collect()
}

fn reference_policy(rs: &RegimeSpec, opts: &SelectOptions) -> Result<StateSpaceSolution> {
    match select_bk(&rs.reference, opts)? {
        Selection::Determinate { solution, .. } => Ok(solution),
        Selection::Indeterminate { .. } => Err(Error::InvalidModel(
            "reference regime must be determinate (it is indeterminate)".to_string(),
        )),
        Selection::NoStable { .. } => Err(Error::InvalidModel(
            "reference regime must be determinate (it has no stable solution)".to_string(),
        )),
    }
}

/// Per-period backward recursion data: `z_t = f[t] s_t + g[t]`.
struct AffinePath {
    f: Vec<DMatrix<f64>>,
    g: Vec<DVector<f64>>,
}

/// Backward pass: construct the time-varying affine policy for a fixed
/// regime sequence and known shock path.
fn backward_pass(
    regimes: &[Regime],
    rs: &RegimeSpec,
    shock_path: &DMatrix<f64>,
    ref_sol: &StateSpaceSolution,
) -> Result<AffinePath> {
    let horizon = regimes.len();
    let n = rs.reference.n();
    let n_s = rs.reference.n_s();
    let d_rows = rs.reference.state_evolution_rows();
    if d_rows.len() != n_s {
        return Err(Error::ImpactConstructionFailed(format!(
            "model declares {n_s} predetermined variables but has {} state-evolution rows",
            d_rows.len()
        )));
    }
    let nd_rows: Vec<usize> = (0..n).filter(|i| !d_rows.contains(i)).collect();

    let mut f_term = DMatrix::<f64>::zeros(n, n_s);
    for i in 0..n_s {
        f_term[(i, i)] = 1.0;
    }
    f_term
        .view_mut((n_s, 0), (n - n_s, n_s))
        .copy_from(&ref_sol.p);

    let shock_at = |t: usize| -> DVector<f64> {
        if t < shock_path.nrows() {
            shock_path.row(t).transpose()
        } else {
            DVector::zeros(shock_path.ncols())
        }
    };

    let mut f: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); horizon];
    let mut g: Vec<DVector<f64>> = vec![DVector::zeros(0); horizon];

    let mut f_next = f_term.clone();
    let mut g_next = DVector::<f64>::zeros(n);
    for t in (0..horizon).rev() {
        let model = match regimes[t] {
            Regime::Reference => &rs.reference,
            Regime::Alternative => &rs.alternative,
        };
        let a0 = model.a0();
        let a1 = model.a1();
        let b = model.b();
        let c = model.c();

        // States next period from this period's realized rows:
        // gamma s_{t+1} = A0[D,:] z_t + B[D,:] eps_{t+1} - c[D].
        let mut gamma = DMatrix::<f64>::zeros(n_s, n_s);
        let mut a0_d = DMatrix::<f64>::zeros(n_s, n);
        let mut b_d = DMatrix::<f64>::zeros(n_s, b.ncols());
        let mut c_d = DVector::<f64>::zeros(n_s);
        for (k, &i) in d_rows.iter().enumerate() {
            for j in 0..n_s {
                gamma[(k, j)] = a1[(i, j)];
            }
            for j in 0..n {
                a0_d[(k, j)] = a0[(i, j)];
            }
            for j in 0..b.ncols() {
                b_d[(k, j)] = b[(i, j)];
            }
            c_d[k] = c[i];
        }
        let gamma_lu = gamma.lu();
        if !gamma_lu.is_invertible() {
            return Err(Error::SingularRecursionStep { t });
        }

        // Substitute z_{t+1} = f_next s_{t+1} + g_next into the
        // expectational rows and collect the z_t terms.
        let s_next_of_z = gamma_lu
            .solve(&a0_d)
            .ok_or(Error::SingularRecursionStep { t })?;
        let eps_next = shock_at(t + 1);
        let s_next_shift = gamma_lu
            .solve(&(&b_d * &eps_next - &c_d))
            .ok_or(Error::SingularRecursionStep { t })?;

        let eps_t = shock_at(t);
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut rhs_g = DVector::<f64>::zeros(n);
        for i in 0..n_s {
            m[(i, i)] = 1.0;
        }
        for (k, &i) in nd_rows.iter().enumerate() {
            let row = n_s + k;
            // a1_i . f_next, an n_s-vector.
            let mut a1f = DVector::<f64>::zeros(n_s);
            for j in 0..n_s {
                a1f[j] = (0..n).map(|l| a1[(i, l)] * f_next[(l, j)]).sum();
            }
            for j in 0..n {
                let coupling: f64 = (0..n_s).map(|l| a1f[l] * s_next_of_z[(l, j)]).sum();
                m[(row, j)] = a0[(i, j)] - coupling;
            }
            let a1g: f64 = (0..n).map(|l| a1[(i, l)] * g_next[l]).sum();
            let a1fs: f64 = (0..n_s).map(|l| a1f[l] * s_next_shift[l]).sum();
            let beps: f64 = (0..b.ncols()).map(|k2| b[(i, k2)] * eps_t[k2]).sum();
            rhs_g[row] = a1fs + a1g + beps + c[i];
        }

        let m_lu = m.lu();
        if !m_lu.is_invertible() {
            return Err(Error::SingularRecursionStep { t });
        }
        let mut rhs_f = DMatrix::<f64>::zeros(n, n_s);
        for i in 0..n_s {
            rhs_f[(i, i)] = 1.0;
        }
        let f_t = m_lu
            .solve(&rhs_f)
            .ok_or(Error::SingularRecursionStep { t })?;
        let g_t = m_lu
            .solve(&rhs_g)
            .ok_or(Error::SingularRecursionStep { t })?;

        f[t] = f_t.clone();
        g[t] = g_t.clone();
        f_next = f_t;
        g_next = g_t;
    }

    Ok(AffinePath { f, g })
}

/// States implied by this period's realized rows, one step forward:
/// `s_{t+1} = gamma^{-1} (A0[D,:] z_t + B[D,:] eps_{t+1} - c[D])`.
fn step_states(
    model: &LinearREModel,
    d_rows: &[usize],
    z_t: &DVector<f64>,
    eps_next: &DVector<f64>,
    t: usize,
) -> Result<DVector<f64>> {
    let n_s = model.n_s();
    let mut gamma = DMatrix::<f64>::zeros(n_s, n_s);
    let mut rhs = DVector::<f64>::zeros(n_s);
    for (k, &i) in d_rows.iter().enumerate() {
        for j in 0..n_s {
            gamma[(k, j)] = model.a1()[(i, j)];
        }
        let drive: f64 = (0..model.n()).map(|j| model.a0()[(i, j)] * z_t[j]).sum();
        let shock: f64 = (0..model.n_shocks())
            .map(|k2| model.b()[(i, k2)] * eps_next[k2])
            .sum();
        rhs[k] = drive + shock - model.c()[i];
    }
    gamma
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularRecursionStep { t })
}

/// Perfect-foresight path for a fixed regime sequence. The sequence must
/// end in the reference regime (the continuation beyond the horizon is the
/// reference policy). Row `t` of the result holds `z_t` in deviations.
pub fn piecewise_solve(
    regimes: &[Regime],
    rs: &RegimeSpec,
    shock_path: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    rs.validate()?;
    piecewise_solve_with(regimes, rs, shock_path, &SelectOptions::default())
}

fn piecewise_solve_with(
    regimes: &[Regime],
    rs: &RegimeSpec,
    shock_path: &DMatrix<f64>,
    opts: &SelectOptions,
) -> Result<DMatrix<f64>> {
    let horizon = regimes.len();
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be positive".to_string()));
    }
    if regimes[horizon - 1] != Regime::Reference {
        return Err(Error::TerminalNotSlack);
    }
    let n = rs.reference.n();
    if shock_path.ncols() != rs.reference.n_shocks() || shock_path.nrows() != horizon {
        return Err(Error::DimensionMismatch(format!(
            "shock path is {}x{}, expected {horizon}x{}",
            shock_path.nrows(),
            shock_path.ncols(),
            rs.reference.n_shocks()
        )));
    }
    let ref_sol = reference_policy(rs, opts)?;
    let affine = backward_pass(regimes, rs, shock_path, &ref_sol)?;
    let d_rows = rs.reference.state_evolution_rows();

    let mut z_path = DMatrix::<f64>::zeros(horizon, n);
    // Entry: the pre-period is the reference steady state, so period-0
    // states come from the reference realized rows driven by eps_0.
    let zero = DVector::<f64>::zeros(n);
    let eps0 = shock_path.row(0).transpose();
    let mut s = step_states(&rs.reference, &d_rows, &zero, &eps0, 0)?;
    for t in 0..horizon {
        let z_t = &affine.f[t] * &s + &affine.g[t];
        z_path.row_mut(t).copy_from(&z_t.transpose());
        if t + 1 < horizon {
            let model = match regimes[t] {
                Regime::Reference => &rs.reference,
                Regime::Alternative => &rs.alternative,
            };
            let eps_next = shock_path.row(t + 1).transpose();
            s = step_states(model, &d_rows, &z_t, &eps_next, t)?;
        }
    }
    Ok(z_path)
}

fn sequence_hash(regimes: &[Regime]) -> u64 {
    let mut h = DefaultHasher::new();
    regimes.hash(&mut h);
    h.finish()
}

/// Iterate piecewise solving and regime re-classification from an initial
/// guess until the regime sequence is a fixed point.
pub fn solve_occbin(
    rs: &RegimeSpec,
    shock_path: &DMatrix<f64>,
    horizon: usize,
    opts: &OccbinOptions,
) -> Result<OccbinPath> {
    rs.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be positive".to_string()));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidParams(
            "max_iter must be positive".to_string(),
        ));
    }
    let mut regimes = match &opts.guess {
        Some(g) => {
            if g.len() != horizon {
                return Err(Error::DimensionMismatch(format!(
                    "guess has length {}, horizon is {horizon}",
                    g.len()
                )));
            }
            g.clone()
        }
        None => vec![Regime::Reference; horizon],
    };

    let mut visited: Vec<Vec<Regime>> = vec![regimes.clone()];
    let mut history: Vec<u64> = vec![sequence_hash(&regimes)];

    for iter in 1..=opts.max_iter {
        let z_path = piecewise_solve_with(&regimes, rs, shock_path, &opts.select)?;
        let updated = regime_update(&z_path, rs);

        if updated == regimes {
            let tail = opts.tail_window.min(horizon);
            if regimes[horizon - tail..]
                .iter()
                .any(|r| *r == Regime::Alternative)
            {
                return Err(Error::BindingNearHorizonEnd {
                    window: opts.tail_window,
                });
            }
            return Ok(OccbinPath {
                horizon,
                z_path,
                regimes,
                iterations: iter,
                converged: true,
                history,
            });
        }
        if let Some(pos) = visited.iter().position(|seq| *seq == updated) {
            // Revisiting an earlier (non-current) sequence: the iteration
            // is trapped in a loop of period two or more.
            return Err(Error::CycleDetected {
                period: visited.len() - pos,
            });
        }
        history.push(sequence_hash(&updated));
        visited.push(updated.clone());
        regimes = updated;
    }
    Err(Error::MaxIterations {
        max_iter: opts.max_iter,
    })
}

/// Largest absolute residual of the regime-specific structural equations
/// along a piecewise path (perfect foresight, shocks zero beyond the given
/// path). The continuation beyond the horizon follows the reference policy.
pub fn piecewise_residuals(
    regimes: &[Regime],
    rs: &RegimeSpec,
    shock_path: &DMatrix<f64>,
    z_path: &DMatrix<f64>,
) -> Result<f64> {
    rs.validate()?;
    let horizon = regimes.len();
    if z_path.nrows() != horizon || z_path.ncols() != rs.reference.n() {
        return Err(Error::DimensionMismatch(
            "path dimensions do not match the regime sequence and model".to_string(),
        ));
    }
    let n = rs.reference.n();
    let n_s = rs.reference.n_s();
    let d_rows: std::collections::BTreeSet<usize> =
        rs.reference.state_evolution_rows().into_iter().collect();
    let ref_sol = reference_policy(rs, &SelectOptions::default())?;

    // One virtual period beyond the horizon: states step forward under the
    // terminal regime's realized rows (zero shocks), jumps follow the
    // reference policy.
    let d_rows_vec: Vec<usize> = d_rows.iter().copied().collect();
    let z_last = z_path.row(horizon - 1).transpose();
    let model_last = match regimes[horizon - 1] {
        Regime::Reference => &rs.reference,
        Regime::Alternative => &rs.alternative,
    };
    let s_after = step_states(
        model_last,
        &d_rows_vec,
        &z_last,
        &DVector::zeros(rs.reference.n_shocks()),
        horizon,
    )?;
    let mut z_after = DVector::<f64>::zeros(n);
    for i in 0..n_s {
        z_after[i] = s_after[i];
    }
    let j_after = &ref_sol.p * &s_after;
    for i in 0..n - n_s {
        z_after[n_s + i] = j_after[i];
    }

    let shock_at = |t: usize| -> DVector<f64> {
        if t < shock_path.nrows() {
            shock_path.row(t).transpose()
        } else {
            DVector::zeros(shock_path.ncols())
        }
    };

    let mut worst = 0.0f64;
    for t in 0..horizon {
        let model = match regimes[t] {
            Regime::Reference => &rs.reference,
            Regime::Alternative => &rs.alternative,
        };
        let z_t = z_path.row(t).transpose();
        let z_next = if t + 1 < horizon {
            z_path.row(t + 1).transpose()
        } else {
            z_after.clone()
        };
        let eps_t = shock_at(t);
        let eps_next = shock_at(t + 1);
        for i in 0..n {
            let lhs: f64 = (0..n).map(|j| model.a0()[(i, j)] * z_t[j]).sum();
            let mut rhs: f64 = (0..n).map(|j| model.a1()[(i, j)] * z_next[j]).sum();
            if d_rows.contains(&i) {
                rhs -= (0..model.n_shocks())
                    .map(|k| model.b()[(i, k)] * eps_next[k])
                    .sum::<f64>();
            } else {
                rhs += (0..model.n_shocks())
                    .map(|k| model.b()[(i, k)] * eps_t[k])
                    .sum::<f64>();
            }
            rhs += model.c()[i];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Complementarity audit of a converged path.
#[derive(Clone, Debug, Serialize)]
pub struct ComplementarityReport {
    /// Constraint slack `d . z_t + e` per period.
    pub slack: Vec<f64>,
    /// Largest violation: negative slack in reference periods, distance
    /// from the boundary in binding periods.
    pub max_violation: f64,
    pub worst_t: Option<usize>,
    /// Periods whose regime differs from the previous period's.
    pub switches: Vec<usize>,
}

/// Build the two-regime lower-bound experiment for the monetary model with
/// an explicit policy rate ([`crate::model::nk_model_with_rate`]): the
/// reference regime keeps the rule row, the alternative pins the rate at
/// its bound. In deviations the bound is `Rhat_t = -e` with
/// `e = 1/beta - 1` (the steady-state level rate), and the constraint
/// slack `Rhat_t + e` is the level rate itself.
pub fn zlb_regime_pair(p: &crate::model::NKParams) -> Result<RegimeSpec> {
    let reference = crate::model::nk_model_with_rate(p)?;
    let bound = 1.0 / p.beta - 1.0;
    let n = reference.n();
    let rate = n - 1;
    let mut a0 = reference.a0().clone_owned();
    let a1 = reference.a1().clone_owned();
    let mut b = reference.b().clone_owned();
    let mut c = reference.c().clone_owned();
    for j in 0..n {
        a0[(rate, j)] = 0.0;
    }
    a0[(rate, rate)] = 1.0;
    for k in 0..reference.n_shocks() {
        b[(rate, k)] = 0.0;
    }
    c[rate] = -bound;
    let alternative = crate::model::new_model(
        reference.names().to_vec(),
        reference.shock_names().to_vec(),
        reference.n_s(),
        a0,
        a1,
        b,
        c,
        reference.params().clone(),
    )?;
    let mut weights = DVector::<f64>::zeros(n);
    weights[rate] = 1.0;
    Ok(RegimeSpec {
        reference,
        alternative,
        constraint: Constraint {
            weights,
            offset: bound,
        },
    })
}

/// Evaluate constraint complementarity along a path: reference periods
/// need nonnegative slack, binding periods must sit on the boundary.
pub fn check_complementarity(path: &OccbinPath, rs: &RegimeSpec) -> ComplementarityReport {
    let d = &rs.constraint.weights;
    let n = d.len().min(path.z_path.ncols());
    let mut slack = Vec::with_capacity(path.horizon);
    let mut max_violation = 0.0f64;
    let mut worst_t = None;
    for t in 0..path.horizon {
        let v: f64 =
            (0..n).map(|j| d[j] * path.z_path[(t, j)]).sum::<f64>() + rs.constraint.offset;
        slack.push(v);
        let violation = match path.regimes[t] {
            Regime::Reference => (-v).max(0.0),
            Regime::Alternative => v.abs(),
        };
        if violation > max_violation {
            max_violation = violation;
            worst_t = Some(t);
        }
    }
    let switches = (1..path.horizon)
        .filter(|&t| path.regimes[t] != path.regimes[t - 1])
        .collect();
    ComplementarityReport {
        slack,
        max_violation,
        worst_t,
        switches,
    }
}

//! Equilibrium selection on a decomposed model: determinacy diagnostics,
//! the unique-stable-solution selector, the minimal-variance selector for
//! indeterminate models, and the fiscal-augmentation selector.
//!
//! All selectors share one pipeline: QZ-decompose the pencil, reorder stable
//! eigenvalues first, compare the stable count against the number of
//! predetermined variables, and (when a solution is selected) read the
//! policy and transition matrices off the leading Schur columns.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LinearREModel;
use crate::qz::{
    qz_decompose_with, reorder_stable_first, EigenvalueClass, QzFactorization, QzOptions, C64,
};

/// Options shared by every selector.
#[derive(Clone, Copy, Debug)]
pub struct SelectOptions {
    pub qz: QzOptions,
    /// Maximum accepted condition number of the leading state block of `Z`.
    pub cond_threshold: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            qz: QzOptions::default(),
            cond_threshold: 1e10,
        }
    }
}

/// Stable-root count relative to the number of predetermined variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Determinacy {
    /// Exactly as many stable roots as predetermined variables.
    Determinate,
    /// `degree` excess stable roots: a `degree`-parameter family of stable
    /// solutions.
    Indeterminate { degree: usize },
    /// Fewer stable roots than predetermined variables.
    NoStableSolution,
}

/// The four existence/uniqueness conditions reported with a diagnosis.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolvabilityChecks {
    /// The pencil is regular (no degenerate diagonal pair).
    pub regular_pencil: bool,
    /// No generalized eigenvalue sits inside the unit-circle tolerance band.
    pub no_unit_roots: bool,
    /// Stable count equals the predetermined count.
    pub counts_match: bool,
    /// The leading state block of `Z` is invertible with acceptable
    /// conditioning (only meaningful when `counts_match`).
    pub rank_condition_ok: bool,
}

/// One generalized eigenvalue in reporting form. `re`/`im`/`modulus` are
/// `None` for infinite eigenvalues.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EigReport {
    pub re: Option<f64>,
    pub im: Option<f64>,
    pub modulus: Option<f64>,
    pub class: EigenvalueClass,
}

/// Full determinacy diagnosis of a model.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub n: usize,
    pub n_s: usize,
    pub n_stable: usize,
    pub n_unstable: usize,
    pub n_unit: usize,
    pub n_infinite: usize,
    /// `None` when a unit root makes the trichotomy undefined.
    pub determinacy: Option<Determinacy>,
    /// Condition number of the leading state block of `Z`; `None` when
    /// there are no predetermined variables.
    pub cond_z11: Option<f64>,
    pub checks: SolvabilityChecks,
    pub message: String,
    pub eigenvalues: Vec<EigReport>,
}

/// Linear state-space solution
/// `s_{t+1} = R s_t + Q eps_{t+1}`, `j_t = P s_t + N eps_t`,
/// expressed in deviations from the constant `kappa_const` (the model's
/// deterministic steady state, ordered like the variables).
#[derive(Clone, Debug)]
pub struct StateSpaceSolution {
    pub names: Vec<String>,
    pub shock_names: Vec<String>,
    pub n_s: usize,
    /// Jump policy, `n_j x n_s`.
    pub p: DMatrix<f64>,
    /// State transition, `n_s x n_s`.
    pub r: DMatrix<f64>,
    /// State shock impact, `n_s x n_k`.
    pub q_imp: DMatrix<f64>,
    /// Contemporaneous jump loading on the shock beyond `P s_t`, `n_j x n_k`.
    pub jump_impact: DMatrix<f64>,
    /// Steady-state level of every variable, length `n`.
    pub kappa_const: DVector<f64>,
}

impl StateSpaceSolution {
    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn n_j(&self) -> usize {
        self.n() - self.n_s
    }

    pub fn n_shocks(&self) -> usize {
        self.shock_names.len()
    }
}

/// Outcome of the unique-stable-solution selector.
#[derive(Clone, Debug)]
pub enum Selection {
    /// Unique stable solution.
    Determinate {
        solution: StateSpaceSolution,
        diagnostics: Diagnostics,
    },
    /// Continuum of stable solutions: the selector refuses to commit but
    /// reports the family as `fundamental + w_span * xi_t` where `xi_t` is
    /// any stable sunspot process with transition `lambda_x`.
    Indeterminate {
        degree: usize,
        /// Zero-sunspot member of the solution family.
        fundamental: StateSpaceSolution,
        /// Real basis of the excess stable directions, `n x m`, satisfying
        /// `A0 W = A1 W lambda_x`; real-root columns have unit norm and
        /// conjugate-pair column pairs are jointly unit.
        w_span: DMatrix<f64>,
        /// Block-diagonal real transition of the sunspot process, `m x m`.
        lambda_x: DMatrix<f64>,
        diagnostics: Diagnostics,
    },
    /// No stable solution exists.
    NoStable { diagnostics: Diagnostics },
}

impl Selection {
    pub fn diagnostics(&self) -> &Diagnostics {
        match self {
            Selection::Determinate { diagnostics, .. } => diagnostics,
            Selection::Indeterminate { diagnostics, .. } => diagnostics,
            Selection::NoStable { diagnostics } => diagnostics,
        }
    }

    pub fn solution(&self) -> Option<&StateSpaceSolution> {
        match self {
            Selection::Determinate { solution, .. } => Some(solution),
            _ => None,
        }
    }
}

/// Outcome of the minimal-variance selector: under indeterminacy it commits
/// to the zero-sunspot fundamental solution instead of refusing.
#[derive(Clone, Debug)]
pub enum MvSelection {
    Selected {
        solution: StateSpaceSolution,
        /// Indeterminacy degree that was resolved (0 when determinate).
        mv_resolved_degree: usize,
        diagnostics: Diagnostics,
    },
    NoStable { diagnostics: Diagnostics },
}

impl MvSelection {
    pub fn diagnostics(&self) -> &Diagnostics {
        match self {
            MvSelection::Selected { diagnostics, .. } => diagnostics,
            MvSelection::NoStable { diagnostics } => diagnostics,
        }
    }

    pub fn solution(&self) -> Option<&StateSpaceSolution> {
        match self {
            MvSelection::Selected { solution, .. } => Some(solution),
            _ => None,
        }
    }
}

// --- diagnosis ---

fn build_diagnostics(model: &LinearREModel, fact: &QzFactorization, cond_threshold: f64) -> Diagnostics {
    let n = model.n();
    let n_s = model.n_s();
    let n_stable = fact.count(EigenvalueClass::Stable);
    let n_unstable = fact.count(EigenvalueClass::Unstable);
    let n_unit = fact.count(EigenvalueClass::UnitRoot);
    let n_infinite = fact.count(EigenvalueClass::Infinite);

    let cond_z11 = if n_s == 0 {
        None
    } else {
        Some(cond_of_block(&fact.z, n_s))
    };

    let determinacy = if n_unit > 0 {
        None
    } else if n_stable == n_s {
        Some(Determinacy::Determinate)
    } else if n_stable > n_s {
        Some(Determinacy::Indeterminate {
            degree: n_stable - n_s,
        })
    } else {
        Some(Determinacy::NoStableSolution)
    };

    let message = match determinacy {
        Some(Determinacy::Determinate) => "Unique stable solution".to_string(),
        Some(Determinacy::Indeterminate { .. }) => "Indeterminacy".to_string(),
        Some(Determinacy::NoStableSolution) => "No stable solution".to_string(),
        None => "Unit root within tolerance band".to_string(),
    };

    let rank_ok = match cond_z11 {
        None => true,
        Some(c) => c.is_finite() && c <= cond_threshold,
    };
    let checks = SolvabilityChecks {
        regular_pencil: true,
        no_unit_roots: n_unit == 0,
        counts_match: n_stable == n_s,
        rank_condition_ok: rank_ok,
    };

    let eigenvalues = fact
        .eigs
        .iter()
        .map(|e| match e.value() {
            Some(v) => EigReport {
                re: Some(v.re),
                im: Some(v.im),
                modulus: Some(v.norm()),
                class: e.class,
            },
            None => EigReport {
                re: None,
                im: None,
                modulus: None,
                class: e.class,
            },
        })
        .collect();

    Diagnostics {
        n,
        n_s,
        n_stable,
        n_unstable,
        n_unit,
        n_infinite,
        determinacy,
        cond_z11,
        checks,
        message,
        eigenvalues,
    }
}

fn cond_of_block(z: &DMatrix<C64>, n_s: usize) -> f64 {
    let z11 = z.view((0, 0), (n_s, n_s)).into_owned();
    let sv = z11.svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

fn analyze(model: &LinearREModel, opts: &SelectOptions) -> Result<(QzFactorization, Diagnostics)> {
    let fact = qz_decompose_with(model.a0(), model.a1(), &opts.qz)?;
    let fact = reorder_stable_first(&fact, &opts.qz)?;
    let diag = build_diagnostics(model, &fact, opts.cond_threshold);
    Ok((fact, diag))
}

/// Classify a model without committing to a solution.
pub fn diagnose(model: &LinearREModel, opts: &SelectOptions) -> Result<Diagnostics> {
    analyze(model, opts).map(|(_, d)| d)
}

// --- solution construction ---

fn first_unit_root(fact: &QzFactorization) -> Option<f64> {
    fact.eigs
        .iter()
        .find(|e| e.class == EigenvalueClass::UnitRoot)
        .map(|e| e.modulus())
}

fn is_genuinely_complex(v: C64) -> bool {
    v.im.abs() > 1e-10 * v.norm().max(1.0)
}

fn are_conjugate_pair(a: C64, b: C64) -> bool {
    let scale = a.norm().max(1.0);
    is_genuinely_complex(a) && (a - b.conj()).norm() <= 1e-8 * scale
}

/// Numerical rank of the state rows of the given `Z` columns. Columns of a
/// unitary `Z` have unit norm, so an absolute singular-value cutoff is
/// scale-correct.
fn state_block_rank(fact: &QzFactorization, n_s: usize, cols: &[usize]) -> usize {
    if cols.is_empty() || n_s == 0 {
        return 0;
    }
    let mut block = DMatrix::<C64>::zeros(n_s, cols.len());
    for (j, &c) in cols.iter().enumerate() {
        for i in 0..n_s {
            block[(i, j)] = fact.z[(i, c)];
        }
    }
    let sv = block.svd(false, false).singular_values;
    sv.iter().filter(|&&s| s > 1e-8).count()
}

/// Choose `n_s` of the `n_stable` stable columns for the fundamental
/// solution: scan in the reordered (ascending modulus, ascending phase)
/// order, keep conjugate pairs together, and skip any candidate whose state
/// rows would not extend an invertible state block. This keeps the selector
/// well defined when a small stable root lives purely in the jump block.
fn choose_fundamental_columns(
    fact: &QzFactorization,
    n_s: usize,
    n_stable: usize,
    cond_threshold: f64,
) -> Result<Vec<bool>> {
    let n = fact.n();
    let mut mask = vec![false; n];
    if n_s == 0 {
        return Ok(mask);
    }

    // Units: a single real eigenvalue, or an adjacent conjugate pair that
    // must be selected (or skipped) together.
    let mut units: Vec<(usize, usize)> = Vec::new();
    let mut i = 0usize;
    while i < n_stable {
        let here = fact.eigs[i].value().expect("stable eigenvalues are finite");
        let paired = i + 1 < n_stable
            && fact.eigs[i + 1]
                .value()
                .is_some_and(|next| are_conjugate_pair(here, next));
        if paired {
            units.push((i, 2));
            i += 2;
        } else {
            units.push((i, 1));
            i += 1;
        }
    }

    let mut chosen: Vec<usize> = Vec::new();
    for (start, len) in units {
        if chosen.len() == n_s {
            break;
        }
        if chosen.len() + len > n_s {
            // A pair would overflow the needed count; a later single root
            // may still fit, and splitting the pair is never allowed.
            continue;
        }
        let mut candidate = chosen.clone();
        candidate.extend(start..start + len);
        if state_block_rank(fact, n_s, &candidate) == candidate.len() {
            chosen = candidate;
        }
    }

    if chosen.len() != n_s {
        // No rank-respecting choice of whole units exists. If dropping the
        // keep-pairs-together constraint would have succeeded, the conjugate
        // pairing was the obstruction; otherwise it is a genuine rank defect.
        let mut relaxed: Vec<usize> = Vec::new();
        for c in 0..n_stable {
            if relaxed.len() == n_s {
                break;
            }
            let mut candidate = relaxed.clone();
            candidate.push(c);
            if state_block_rank(fact, n_s, &candidate) == candidate.len() {
                relaxed = candidate;
            }
        }
        if relaxed.len() == n_s {
            return Err(Error::ConjugatePairSplit);
        }
        return Err(Error::RankConditionFailed {
            cond: f64::INFINITY,
            threshold: cond_threshold,
        });
    }
    for idx in chosen {
        mask[idx] = true;
    }
    Ok(mask)
}

/// Policy and transition matrices from the leading `n_s` Schur columns.
fn policy_matrices(
    fact: &QzFactorization,
    n_s: usize,
    cond_threshold: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = fact.n();
    let n_j = n - n_s;
    if n_s == 0 {
        return Ok((DMatrix::zeros(n_j, 0), DMatrix::zeros(0, 0)));
    }

    let z11 = fact.z.view((0, 0), (n_s, n_s)).into_owned();
    let z21 = fact.z.view((n_s, 0), (n_j, n_s)).into_owned();
    let s11 = fact.s_mat.view((0, 0), (n_s, n_s)).into_owned();
    let t11 = fact.t_mat.view((0, 0), (n_s, n_s)).into_owned();

    let cond = cond_of_block(&fact.z, n_s);
    if !cond.is_finite() || cond > cond_threshold {
        return Err(Error::RankConditionFailed {
            cond,
            threshold: cond_threshold,
        });
    }

    // P^T solves Z11^T P^T = Z21^T  =>  P = Z21 Z11^{-1}.
    let z11_t = z11.transpose();
    let lu_t = z11_t.clone().lu();
    let p_t = lu_t
        .solve(&z21.transpose())
        .ok_or(Error::RankConditionFailed {
            cond,
            threshold: cond_threshold,
        })?;
    let p_c = p_t.transpose();

    // R = Z11 (T11^{-1} S11) Z11^{-1}: conditional-mean state transition.
    let m1 = t11
        .clone()
        .lu()
        .solve(&s11)
        .ok_or_else(|| Error::ImpactConstructionFailed(
            "stable block of T is singular".to_string(),
        ))?;
    let m2 = &z11 * m1;
    let r_t = lu_t
        .solve(&m2.transpose())
        .ok_or(Error::RankConditionFailed {
            cond,
            threshold: cond_threshold,
        })?;
    let r_c = r_t.transpose();

    let p = real_part_checked(&p_c, "jump policy matrix")?;
    let r = real_part_checked(&r_c, "state transition matrix")?;
    Ok((p, r))
}

/// Real part of a matrix that must be real up to rounding; errors when the
/// imaginary leakage exceeds 1e-8 relative to the real magnitude.
fn real_part_checked(m: &DMatrix<C64>, what: &str) -> Result<DMatrix<f64>> {
    let re_scale = m.iter().map(|x| x.re.abs()).fold(0.0f64, f64::max).max(1.0);
    let leak = m.iter().map(|x| x.im.abs()).fold(0.0f64, f64::max);
    if leak > 1e-8 * re_scale {
        return Err(Error::ImpactConstructionFailed(format!(
            "{what} has imaginary leakage {leak:.2e} (scale {re_scale:.2e})"
        )));
    }
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re))
}

/// Shock-impact matrices from the dating convention: state-evolution rows
/// hold realized with shocks dated t+1, all other rows hold in expectation
/// with shocks dated t.
fn impact_matrices(
    model: &LinearREModel,
    p: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.n();
    let n_s = model.n_s();
    let n_j = model.n_j();
    let a0 = model.a0();
    let a1 = model.a1();
    let b = model.b();
    let d_rows: BTreeSet<usize> = model.state_evolution_rows().into_iter().collect();

    // Well-posed dating: each predetermined variable needs exactly one
    // realized evolution row, otherwise the shock impact is under- or
    // over-determined (the expectational rows alone annihilate [I; P]).
    if d_rows.len() != n_s {
        return Err(Error::ImpactConstructionFailed(format!(
            "model declares {n_s} predetermined variables but has {} state-evolution rows",
            d_rows.len()
        )));
    }

    // K = [[R, 0], [P R, 0]] maps z_t to E_t z_{t+1} on the solution.
    let pr = p * r;
    let mut k = DMatrix::<f64>::zeros(n, n);
    k.view_mut((0, 0), (n_s, n_s)).copy_from(r);
    k.view_mut((n_s, 0), (n_j, n_s)).copy_from(&pr);

    let m_nond = a0 - a1 * &k;
    let mut m_sys = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if d_rows.contains(&i) {
            for j in 0..n_s {
                m_sys[(i, j)] = a1[(i, j)];
            }
        } else {
            for j in 0..n {
                m_sys[(i, j)] = m_nond[(i, j)];
            }
        }
    }

    let g = m_sys
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::ImpactConstructionFailed(
            "impact system is singular".to_string(),
        ))?;

    // Backward-residual guard: a numerically singular system can pass LU
    // with an exact-zero-pivot check yet return a useless solution.
    let resid = (&m_sys * &g - b).amax();
    let scale = m_sys.amax().max(1.0) * g.amax().max(1.0);
    if resid > 1e-8 * scale {
        return Err(Error::ImpactConstructionFailed(format!(
            "impact system is numerically singular (residual {resid:.2e}, scale {scale:.2e})"
        )));
    }

    let q = g.view((0, 0), (n_s, g.ncols())).into_owned();
    let gj = g.view((n_s, 0), (n_j, g.ncols())).into_owned();
    let jump_impact = &gj - p * &q;

    // Dating consistency: realized evolution rows hold for every shock
    // draw, so their date-t jump loadings must not carry shock response:
    // A0[D, jumps] * N = 0.
    let n_scale = jump_impact.amax().max(1.0) * a0.amax().max(1.0);
    for &i in &d_rows {
        for kk in 0..jump_impact.ncols() {
            let v: f64 = (0..n_j)
                .map(|jj| a0[(i, n_s + jj)] * jump_impact[(jj, kk)])
                .sum();
            if v.abs() > 1e-8 * n_scale {
                return Err(Error::ImpactConstructionFailed(format!(
                    "state-evolution row {i} is inconsistent with the shock dating \
                     (jump response leaks {v:.2e} into a realized row)"
                )));
            }
        }
    }

    Ok((q, jump_impact))
}

/// Deterministic steady state: (A0 - A1) kappa = c. Zero constants give a
/// zero steady state without any solve.
fn steady_state(model: &LinearREModel) -> Result<DVector<f64>> {
    let n = model.n();
    if model.c().iter().all(|&v| v == 0.0) {
        return Ok(DVector::zeros(n));
    }
    let m = model.a0() - model.a1();
    m.lu()
        .solve(model.c())
        .ok_or_else(|| Error::InvalidModel(
            "steady state is not unique: A0 - A1 is singular with nonzero constants".to_string(),
        ))
}

/// Build the solution from `n_s` stable Schur columns. When the model is
/// determinate these are all the stable columns; under indeterminacy the
/// rank-respecting greedy choice picks the fundamental (zero-sunspot)
/// member, preferring the smallest-modulus roots. Returns the solution and
/// the factorization with the chosen columns moved to the front.
fn fundamental_solution(
    model: &LinearREModel,
    fact: &QzFactorization,
    opts: &SelectOptions,
) -> Result<(StateSpaceSolution, QzFactorization)> {
    let n_s = model.n_s();
    let n_stable = fact.count(EigenvalueClass::Stable);
    let work = if n_stable == n_s {
        fact.clone()
    } else {
        let mask = choose_fundamental_columns(fact, n_s, n_stable, opts.cond_threshold)?;
        crate::qz::move_columns_front(fact, &mask, &opts.qz)?
    };
    let (p, r) = policy_matrices(&work, n_s, opts.cond_threshold)?;
    let (q_imp, jump_impact) = impact_matrices(model, &p, &r)?;
    let kappa_const = steady_state(model)?;
    let solution = StateSpaceSolution {
        names: model.names().to_vec(),
        shock_names: model.shock_names().to_vec(),
        n_s,
        p,
        r,
        q_imp,
        jump_impact,
        kappa_const,
    };
    Ok((solution, work))
}

/// Unit-norm right null vector of a complex matrix (the direction belonging
/// to its smallest singular value), with the largest entry rotated to be
/// real and positive so the result is deterministic.
fn null_direction(m: &DMatrix<C64>) -> Result<DVector<C64>> {
    let svd = m.clone().svd(false, true);
    let sv = &svd.singular_values;
    let v_t = svd.v_t.as_ref().expect("requested right factor");
    let smax = sv.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let (last, smin) = sv
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("non-empty singular spectrum");
    if smin > 1e-8 * smax {
        return Err(Error::ImpactConstructionFailed(format!(
            "no numerical null direction: smallest singular value {smin:.2e} vs scale {smax:.2e}"
        )));
    }
    // Rows of V^H are conjugated right singular vectors.
    let mut v = DVector::<C64>::from_fn(m.ncols(), |i, _| v_t[(last, i)].conj());
    let (mut best, mut best_mag) = (0usize, 0.0f64);
    for (i, x) in v.iter().enumerate() {
        if x.norm() > best_mag {
            best_mag = x.norm();
            best = i;
        }
    }
    let phase = v[best] / C64::new(best_mag.max(f64::MIN_POSITIVE), 0.0);
    let rot = phase.conj();
    for x in v.iter_mut() {
        *x *= rot;
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v /= C64::new(norm, 0.0);
    }
    Ok(v)
}

/// Real basis `W` and block-diagonal transition `lambda_x` for the excess
/// stable directions: each excess eigenvalue contributes its eigenvector
/// (one real column for a real root, a [Re, Im] column pair with a 2x2
/// rotation block for a conjugate pair), so `A0 W = A1 W lambda_x`.
fn excess_directions(
    model: &LinearREModel,
    excess: &[C64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.n();
    let a0c = model.a0().map(|v| C64::new(v, 0.0));
    let a1c = model.a1().map(|v| C64::new(v, 0.0));

    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut i = 0usize;
    while i < excess.len() {
        let lam = excess[i];
        let pencil = &a0c - &a1c * lam;
        let v = null_direction(&pencil)?;
        if is_genuinely_complex(lam) {
            if i + 1 >= excess.len() || !are_conjugate_pair(lam, excess[i + 1]) {
                return Err(Error::ConjugatePairSplit);
            }
            let vr = DVector::<f64>::from_fn(n, |r, _| v[r].re);
            let vi = DVector::<f64>::from_fn(n, |r, _| v[r].im);
            if vi.norm() <= 1e-12 * vr.norm().max(1.0) {
                return Err(Error::ImpactConstructionFailed(
                    "complex eigenvalue produced a real eigenvector".to_string(),
                ));
            }
            cols.push(vr);
            cols.push(vi);
            blocks.push(DMatrix::from_row_slice(
                2,
                2,
                &[lam.re, lam.im, -lam.im, lam.re],
            ));
            i += 2;
        } else {
            let leak = v.iter().map(|x| x.im.abs()).fold(0.0f64, f64::max);
            if leak > 1e-8 {
                return Err(Error::ImpactConstructionFailed(format!(
                    "real eigenvalue produced a complex eigenvector (leakage {leak:.2e})"
                )));
            }
            cols.push(DVector::from_fn(n, |r, _| v[r].re));
            blocks.push(DMatrix::from_element(1, 1, lam.re));
            i += 1;
        }
    }

    // Columns are not rescaled: each block inherits the unit norm of its
    // complex eigenvector, and per-column rescaling would break
    // A0 W = A1 W lambda_x for [Re, Im] pairs.
    let m = cols.len();
    let mut w = DMatrix::<f64>::zeros(n, m);
    for (j, col) in cols.iter().enumerate() {
        for r in 0..n {
            w[(r, j)] = col[r];
        }
    }
    let mut lambda_x = DMatrix::<f64>::zeros(m, m);
    let mut at = 0usize;
    for b in &blocks {
        let k = b.nrows();
        lambda_x.view_mut((at, at), (k, k)).copy_from(b);
        at += k;
    }
    Ok((w, lambda_x))
}

/// Unique-stable-solution selector: returns the solution when the stable
/// count matches the predetermined count, refuses with the extra stable
/// directions under indeterminacy, and reports when no stable solution
/// exists. Unit roots inside the tolerance band are an error.
pub fn select_bk(model: &LinearREModel, opts: &SelectOptions) -> Result<Selection> {
    let (fact, diag) = analyze(model, opts)?;
    if let Some(modulus) = first_unit_root(&fact) {
        return Err(Error::UnitRootDetected {
            modulus,
            tol: opts.qz.tol_unit,
        });
    }
    match diag.determinacy.expect("no unit roots implies a trichotomy") {
        Determinacy::Determinate => {
            let (solution, _) = fundamental_solution(model, &fact, opts)?;
            Ok(Selection::Determinate {
                solution,
                diagnostics: diag,
            })
        }
        Determinacy::Indeterminate { degree } => {
            let (fundamental, work) = fundamental_solution(model, &fact, opts)?;
            let excess: Vec<C64> = work.eigs[model.n_s()..model.n_s() + degree]
                .iter()
                .map(|e| e.value().expect("excess stable eigenvalues are finite"))
                .collect();
            let (w_span, lambda_x) = excess_directions(model, &excess)?;
            Ok(Selection::Indeterminate {
                degree,
                fundamental,
                w_span,
                lambda_x,
                diagnostics: diag,
            })
        }
        Determinacy::NoStableSolution => Ok(Selection::NoStable { diagnostics: diag }),
    }
}

/// Minimal-variance selector: identical to the unique-stable selector when
/// determinate; under indeterminacy it commits to the fundamental solution
/// (zero sunspot loading), which minimizes the unconditional variance over
/// the stable solution family.
pub fn select_mv(model: &LinearREModel, opts: &SelectOptions) -> Result<MvSelection> {
    match select_bk(model, opts)? {
        Selection::Determinate {
            solution,
            diagnostics,
        } => Ok(MvSelection::Selected {
            solution,
            mv_resolved_degree: 0,
            diagnostics,
        }),
        Selection::Indeterminate {
            degree,
            fundamental,
            diagnostics,
            ..
        } => Ok(MvSelection::Selected {
            solution: fundamental,
            mv_resolved_degree: degree,
            diagnostics,
        }),
        Selection::NoStable { diagnostics } => Ok(MvSelection::NoStable { diagnostics }),
    }
}

// --- fiscal augmentation ---

/// Surplus-rule coefficient: s_t = gamma_s * d_t.
#[derive(Clone, Copy, Debug)]
pub struct FiscalParams {
    pub gamma_s: f64,
}

impl FiscalParams {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma_s.is_finite() {
            return Err(Error::InvalidParams("gamma_s must be finite".to_string()));
        }
        Ok(())
    }
}

/// Variable roles the fiscal augmentation needs from the base model.
///
/// `rate` names an explicit policy-rate variable; when absent, the virtual
/// rate `phi_pi * inflation + phi_y * output` is substituted using the
/// model's parameter map.
#[derive(Clone, Debug)]
pub struct FiscalRoles {
    pub inflation: String,
    pub output: String,
    pub rate: Option<String>,
}

/// Surplus-rule coefficient below which the debt transition root
/// `1/beta - gamma_s` leaves the unit circle, making fiscal backing active.
pub fn ricardian_threshold(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    Ok(1.0 / beta - 1.0)
}

/// Append a government budget identity and a static surplus rule to a model.
///
/// New variables: real debt `d` (predetermined, measured at the start of the
/// period so it carries no innovation) appended after the original states,
/// and the surplus `s` appended after the original jumps. The debt identity
///   d_{t+1} = (1/beta) d_t - s_t + (R_t - (1/beta) pi_t)
/// is a realized state-evolution row; the surplus rule s_t = gamma_s d_t is
/// static.
pub fn augment_fiscal(
    model: &LinearREModel,
    roles: &FiscalRoles,
    fp: &FiscalParams,
) -> Result<LinearREModel> {
    fp.validate()?;
    let n = model.n();
    let n_s = model.n_s();

    let beta = model
        .param("beta")
        .ok_or_else(|| Error::InvalidParams("fiscal augmentation needs a `beta` parameter".to_string()))?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }

    let idx_of = |name: &str| -> Result<usize> {
        model
            .name_index(name)
            .ok_or_else(|| Error::MissingVariableRole(name.to_string()))
    };
    let pi_old = idx_of(&roles.inflation)?;
    let y_old = idx_of(&roles.output)?;
    let rate_old = roles.rate.as_deref().map(idx_of).transpose()?;

    for reserved in ["d", "s"] {
        if model.names().iter().any(|m| m == reserved) {
            return Err(Error::InvalidModel(format!(
                "variable name `{reserved}` is reserved by the fiscal augmentation"
            )));
        }
    }

    // New layout: [old states, d, old jumps, s].
    let nn = n + 2;
    let d_col = n_s;
    let s_col = nn - 1;
    let map = |old: usize| -> usize {
        if old < n_s {
            old
        } else {
            old + 1
        }
    };

    let mut names: Vec<String> = Vec::with_capacity(nn);
    names.extend(model.names()[..n_s].iter().cloned());
    names.push("d".to_string());
    names.extend(model.names()[n_s..].iter().cloned());
    names.push("s".to_string());

    let n_k = model.n_shocks();
    let mut a0 = DMatrix::<f64>::zeros(nn, nn);
    let mut a1 = DMatrix::<f64>::zeros(nn, nn);
    let mut b = DMatrix::<f64>::zeros(nn, n_k);
    let mut c = DVector::<f64>::zeros(nn);

    // Original equations in rows 0..n with remapped columns.
    for i in 0..n {
        for j in 0..n {
            a0[(i, map(j))] = model.a0()[(i, j)];
            a1[(i, map(j))] = model.a1()[(i, j)];
        }
        for k in 0..n_k {
            b[(i, k)] = model.b()[(i, k)];
        }
        c[i] = model.c()[i];
    }

    // Debt identity (state-evolution row for d).
    let debt_row = n;
    a0[(debt_row, d_col)] = 1.0 / beta;
    a0[(debt_row, s_col)] = -1.0;
    match rate_old {
        Some(r_idx) => {
            a0[(debt_row, map(r_idx))] += 1.0;
            a0[(debt_row, map(pi_old))] += -1.0 / beta;
        }
        None => {
            let phi_pi = model.param("phi_pi").ok_or_else(|| {
                Error::InvalidParams(
                    "fiscal augmentation without a rate variable needs `phi_pi`".to_string(),
                )
            })?;
            let phi_y = model.param("phi_y").ok_or_else(|| {
                Error::InvalidParams(
                    "fiscal augmentation without a rate variable needs `phi_y`".to_string(),
                )
            })?;
            a0[(debt_row, map(y_old))] += phi_y;
            a0[(debt_row, map(pi_old))] += phi_pi - 1.0 / beta;
        }
    }
    a1[(debt_row, d_col)] = 1.0;

    // Static surplus rule.
    let surplus_row = nn - 1;
    a0[(surplus_row, s_col)] = 1.0;
    a0[(surplus_row, d_col)] = -fp.gamma_s;

    let mut params = model.params().clone();
    params.insert("gamma_s".to_string(), fp.gamma_s);

    crate::model::new_model(
        names,
        model.shock_names().to_vec(),
        n_s + 1,
        a0,
        a1,
        b,
        c,
        params,
    )
}

/// Fiscal-augmentation selector: augments the model and runs the
/// unique-stable-solution selector on the result.
#[derive(Clone, Debug)]
pub struct FaSelection {
    pub augmented: LinearREModel,
    pub selection: Selection,
}

pub fn select_fa(
    model: &LinearREModel,
    roles: &FiscalRoles,
    fp: &FiscalParams,
    opts: &SelectOptions,
) -> Result<FaSelection> {
    let augmented = augment_fiscal(model, roles, fp)?;
    let selection = select_bk(&augmented, opts)?;
    Ok(FaSelection {
        augmented,
        selection,
    })
}

// --- determinacy map ---

/// Per-cell outcome of a policy-coefficient scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    Determinate,
    Indeterminate,
    NoStable,
    UnitRoot,
    Failed,
}

impl CellClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellClass::Determinate => "determinate",
            CellClass::Indeterminate => "indeterminate",
            CellClass::NoStable => "no-stable",
            CellClass::UnitRoot => "unit-root",
            CellClass::Failed => "error",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MapCell {
    pub phi_pi: f64,
    pub phi_y: f64,
    pub classification: CellClass,
    pub n_stable: Option<usize>,
    pub degree_m: usize,
    pub error: Option<String>,
}

/// Determinacy classification over a (phi_pi, phi_y) grid, phi_pi in the
/// outer loop. Cells are row-major in that order.
#[derive(Clone, Debug)]
pub struct MapTable {
    pub phi_pi_values: Vec<f64>,
    pub phi_y_values: Vec<f64>,
    pub cells: Vec<MapCell>,
}

impl MapTable {
    pub fn cell(&self, i_pi: usize, i_y: usize) -> &MapCell {
        &self.cells[i_pi * self.phi_y_values.len() + i_y]
    }

    /// CSV with columns phi_pi, phi_y, classification, n_stable, degree_m.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phi_pi", "phi_y", "classification", "n_stable", "degree_m"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for cell in &self.cells {
            let n_stable = cell
                .n_stable
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.write_record([
                format_float(cell.phi_pi),
                format_float(cell.phi_y),
                cell.classification.as_str().to_string(),
                n_stable,
                cell.degree_m.to_string(),
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal form (deterministic across runs).
pub fn format_float(v: f64) -> String {
    let mut buf = ryu_like(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(v: f64) -> String {
    // `{}` on f64 already prints the shortest representation that
    // round-trips, which is deterministic.
    format!("{v}")
}

fn classify_cell(base: &crate::model::NKParams, phi_pi: f64, phi_y: f64, opts: &SelectOptions) -> MapCell {
    let params = crate::model::NKParams {
        phi_pi,
        phi_y,
        ..*base
    };
    let outcome = crate::model::nk_model(&params).and_then(|m| diagnose(&m, opts));
    match outcome {
        Ok(diag) => {
            let (classification, degree_m) = match diag.determinacy {
                Some(Determinacy::Determinate) => (CellClass::Determinate, 0),
                Some(Determinacy::Indeterminate { degree }) => (CellClass::Indeterminate, degree),
                Some(Determinacy::NoStableSolution) => (CellClass::NoStable, 0),
                None => (CellClass::UnitRoot, 0),
            };
            MapCell {
                phi_pi,
                phi_y,
                classification,
                n_stable: Some(diag.n_stable),
                degree_m,
                error: None,
            }
        }
        Err(e) => MapCell {
            phi_pi,
            phi_y,
            classification: CellClass::Failed,
            n_stable: None,
            degree_m: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Worker count: the `DSGE_SELECT_THREADS` environment variable when set to
/// a positive integer, otherwise 1.
fn worker_count() -> usize {
    std::env::var("DSGE_SELECT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(1)
}

/// Scan the monetary-policy coefficient grid and classify every cell.
/// Results are deterministic and independent of the worker count.
pub fn determinacy_map(
    base: &crate::model::NKParams,
    phi_pi_values: &[f64],
    phi_y_values: &[f64],
    opts: &SelectOptions,
) -> MapTable {
    let pairs: Vec<(f64, f64)> = phi_pi_values
        .iter()
        .flat_map(|&pp| phi_y_values.iter().map(move |&py| (pp, py)))
        .collect();
    let mut cells: Vec<Option<MapCell>> = vec![None; pairs.len()];

    let workers = worker_count().min(pairs.len().max(1));
    if workers <= 1 {
        for (slot, &(pp, py)) in cells.iter_mut().zip(pairs.iter()) {
            *slot = Some(classify_cell(base, pp, py, opts));
        }
    } else {
        let chunk = pairs.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (slice, pair_slice) in cells.chunks_mut(chunk).zip(pairs.chunks(chunk)) {
                scope.spawn(move || {
                    for (slot, &(pp, py)) in slice.iter_mut().zip(pair_slice.iter()) {
                        *slot = Some(classify_cell(base, pp, py, opts));
                    }
                });
            }
        });
    }

    MapTable {
        phi_pi_values: phi_pi_values.to_vec(),
        phi_y_values: phi_y_values.to_vec(),
        cells: cells.into_iter().map(|c| c.expect("cell computed")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{nk_model, scalar_forward_model, NKParams};
    use approx::assert_abs_diff_eq;

    const P_Y_DEFAULT: f64 = 4.759_825_327_510_917;
    const P_PI_DEFAULT: f64 = 0.873_362_445_414_847_2;

    fn opts() -> SelectOptions {
        SelectOptions::default()
    }

    #[test]
    fn default_monetary_model_is_determinate_with_known_policy() {
        let model = nk_model(&NKParams::default()).unwrap();
        let sel = select_bk(&model, &opts()).unwrap();
        let Selection::Determinate { solution, diagnostics } = sel else {
            panic!("expected a unique stable solution");
        };
        assert_eq!(diagnostics.message, "Unique stable solution");
        assert_eq!(diagnostics.n_stable, 1);
        assert_eq!(diagnostics.n_unstable, 2);
        assert_eq!(diagnostics.n_infinite, 0);

        // Variables (rn, y, pi): jump policy on the demand state.
        assert_eq!(solution.p.shape(), (2, 1));
        assert_abs_diff_eq!(solution.p[(0, 0)], P_Y_DEFAULT, epsilon = 1e-10);
        assert_abs_diff_eq!(solution.p[(1, 0)], P_PI_DEFAULT, epsilon = 1e-10);

        // State transition is the shock persistence.
        assert_eq!(solution.r.shape(), (1, 1));
        assert_abs_diff_eq!(solution.r[(0, 0)], 0.9, epsilon = 1e-12);

        // Unit impact on the state, none directly on the jumps.
        assert_abs_diff_eq!(solution.q_imp[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(solution.jump_impact[(0, 0)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(solution.jump_impact[(1, 0)], 0.0, epsilon = 1e-10);
        assert!(solution.kappa_const.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn passive_policy_is_indeterminate_of_degree_one() {
        let params = NKParams {
            phi_pi: 0.8,
            ..NKParams::default()
        };
        let model = nk_model(&params).unwrap();
        let sel = select_bk(&model, &opts()).unwrap();
        let Selection::Indeterminate { degree, fundamental, w_span, lambda_x, diagnostics } = sel
        else {
            panic!("expected indeterminacy");
        };
        assert_eq!(degree, 1);
        assert_eq!(w_span.shape(), (3, 1));
        assert_eq!(lambda_x.shape(), (1, 1));
        assert_eq!(diagnostics.message, "Indeterminacy");
        assert_eq!(diagnostics.n_stable, 2);
        assert_eq!(
            diagnostics.determinacy,
            Some(Determinacy::Indeterminate { degree: 1 })
        );

        // Fundamental member keeps the exogenous persistence as its state
        // transition.
        assert_abs_diff_eq!(fundamental.r[(0, 0)], 0.9, epsilon = 1e-10);

        // The excess direction is an eigenvector: A0 w = lambda * A1 w.
        let lam = lambda_x[(0, 0)];
        assert!(lam > 0.0 && lam < 1.0);
        let resid = model.a0() * &w_span - model.a1() * &w_span * lam;
        assert!(resid.norm() <= 1e-10, "eigenvector residual {}", resid.norm());
        // It lives purely in the jump block (no state component).
        assert_abs_diff_eq!(w_span[(0, 0)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(w_span.column(0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fundamental_choice_skips_stable_roots_without_state_component() {
        // At phi_pi = 0.3 the forward-block root 0.8953 is smaller than the
        // persistence root 0.9 but has no state component; the fundamental
        // must still be built on the persistence root.
        let params = NKParams {
            phi_pi: 0.3,
            ..NKParams::default()
        };
        let model = nk_model(&params).unwrap();
        let sel = select_bk(&model, &opts()).unwrap();
        let Selection::Indeterminate { degree, fundamental, lambda_x, .. } = sel else {
            panic!("expected indeterminacy");
        };
        assert_eq!(degree, 1);
        assert_abs_diff_eq!(fundamental.r[(0, 0)], 0.9, epsilon = 1e-10);
        // The excess root is the skipped block root, below the persistence.
        assert!(lambda_x[(0, 0)] < 0.9);
        // Policy coefficients equal the closed form for the fundamental.
        let a = 1.0 - params.beta * params.rho;
        let denom = (1.0 - params.rho + params.phi_y / params.sigma)
            + params.kappa * (params.phi_pi - params.rho) / (params.sigma * a);
        let p_y = (1.0 / params.sigma) / denom;
        let p_pi = params.kappa * p_y / a;
        assert_abs_diff_eq!(fundamental.p[(0, 0)], p_y, epsilon = 1e-9);
        assert_abs_diff_eq!(fundamental.p[(1, 0)], p_pi, epsilon = 1e-9);
    }

    #[test]
    fn unit_root_band_is_an_error_for_selection_but_reported_by_diagnose() {
        let params = NKParams {
            phi_pi: 1.0,
            ..NKParams::default()
        };
        let model = nk_model(&params).unwrap();
        assert!(matches!(
            select_bk(&model, &opts()),
            Err(Error::UnitRootDetected { .. })
        ));
        let diag = diagnose(&model, &opts()).unwrap();
        assert_eq!(diag.n_unit, 1);
        assert_eq!(diag.determinacy, None);
        assert!(!diag.checks.no_unit_roots);
    }

    #[test]
    fn purely_forward_model_solves_to_the_shock_itself() {
        let model = scalar_forward_model(0.5).unwrap();
        let sel = select_bk(&model, &opts()).unwrap();
        let Selection::Determinate { solution, .. } = sel else {
            panic!("expected determinate");
        };
        assert_eq!(solution.n_s, 0);
        assert_eq!(solution.p.shape(), (1, 0));
        assert_eq!(solution.r.shape(), (0, 0));
        assert_abs_diff_eq!(solution.jump_impact[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn minimal_variance_agrees_with_unique_selection_when_determinate() {
        let model = nk_model(&NKParams::default()).unwrap();
        let bk = select_bk(&model, &opts()).unwrap();
        let mv = select_mv(&model, &opts()).unwrap();
        let (Some(sb), MvSelection::Selected { solution: sm, mv_resolved_degree, .. }) =
            (bk.solution(), &mv)
        else {
            panic!("both selectors must commit");
        };
        assert_eq!(*mv_resolved_degree, 0);
        assert!((&sb.p - &sm.p).norm() <= 1e-10 * sb.p.norm().max(1.0));
        assert!((&sb.r - &sm.r).norm() <= 1e-10);
        assert!((&sb.q_imp - &sm.q_imp).norm() <= 1e-10);
    }

    #[test]
    fn minimal_variance_commits_under_indeterminacy() {
        let params = NKParams {
            phi_pi: 0.8,
            ..NKParams::default()
        };
        let model = nk_model(&params).unwrap();
        let mv = select_mv(&model, &opts()).unwrap();
        let MvSelection::Selected { solution, mv_resolved_degree, .. } = mv else {
            panic!("minimal-variance must commit under indeterminacy");
        };
        assert_eq!(mv_resolved_degree, 1);
        // Fundamental member uses the two smallest stable roots; transition
        // eigenvalues must be the persistence root 0.9 (the smallest).
        assert_eq!(solution.r.shape(), (1, 1));
        assert_abs_diff_eq!(solution.r[(0, 0)], 0.9, epsilon = 1e-10);
        assert!(solution.p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fiscal_augmentation_has_expected_structure_and_roots() {
        let params = NKParams {
            phi_pi: 0.8,
            ..NKParams::default()
        };
        let model = nk_model(&params).unwrap();
        let roles = FiscalRoles {
            inflation: "pi".to_string(),
            output: "y".to_string(),
            rate: None,
        };
        let fp = FiscalParams { gamma_s: 0.0 };
        let aug = augment_fiscal(&model, &roles, &fp).unwrap();
        assert_eq!(aug.names(), &["rn", "d", "y", "pi", "s"]);
        assert_eq!(aug.n_s(), 2);
        // Both the persistence row and the debt identity are realized
        // state-evolution rows; the surplus rule is static.
        assert_eq!(aug.state_evolution_rows(), vec![0, 3]);

        let sel = select_bk(&aug, &opts()).unwrap();
        let Selection::Determinate { solution, diagnostics } = sel else {
            panic!("passive money + active fiscal backing must be determinate");
        };
        assert_eq!(diagnostics.n_infinite, 1);
        assert_eq!(diagnostics.n_stable, 2);
        assert_eq!(solution.n_s, 2);
    }

    #[test]
    fn ricardian_fiscal_backing_reproduces_the_plain_solution() {
        let params = NKParams::default(); // active money
        let model = nk_model(&params).unwrap();
        let plain = select_bk(&model, &opts()).unwrap();
        let plain_sol = plain.solution().unwrap();

        let roles = FiscalRoles {
            inflation: "pi".to_string(),
            output: "y".to_string(),
            rate: None,
        };
        // Strong surplus response: debt root 1/beta - gamma_s is stable.
        let fa = select_fa(&model, &roles, &FiscalParams { gamma_s: 0.2 }, &opts()).unwrap();
        let Selection::Determinate { solution, .. } = &fa.selection else {
            panic!("Ricardian backing with active money must stay determinate");
        };
        // (y, pi) respond to the demand state exactly as in the plain model;
        // debt does not feed back.
        // Augmented order: states (rn, d), jumps (y, pi, s).
        assert_abs_diff_eq!(solution.p[(0, 0)], plain_sol.p[(0, 0)], epsilon = 1e-8);
        assert_abs_diff_eq!(solution.p[(1, 0)], plain_sol.p[(1, 0)], epsilon = 1e-8);
        assert_abs_diff_eq!(solution.p[(0, 1)], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(solution.p[(1, 1)], 0.0, epsilon = 1e-8);
        // Debt transition root.
        let beta = params.beta;
        let debt_root = 1.0 / beta - 0.2;
        let r_eigs = solution.r.complex_eigenvalues();
        let mut mods: Vec<f64> = r_eigs.iter().map(|e| e.norm()).collect();
        mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(mods[0], debt_root.min(0.9), epsilon = 1e-8);
        assert_abs_diff_eq!(mods[1], debt_root.max(0.9), epsilon = 1e-8);
    }

    #[test]
    fn ricardian_threshold_matches_the_debt_root_boundary() {
        let th = ricardian_threshold(0.99).unwrap();
        assert_abs_diff_eq!(th, 1.0 / 0.99 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn map_grid_iterates_outer_phi_pi_inner_phi_y() {
        let base = NKParams::default();
        let table = determinacy_map(&base, &[0.5, 1.5], &[0.0, 0.25], &opts());
        assert_eq!(table.cells.len(), 4);
        assert_eq!(
            (table.cells[0].phi_pi, table.cells[0].phi_y),
            (0.5, 0.0)
        );
        assert_eq!(
            (table.cells[1].phi_pi, table.cells[1].phi_y),
            (0.5, 0.25)
        );
        assert_eq!(
            (table.cells[2].phi_pi, table.cells[2].phi_y),
            (1.5, 0.0)
        );
        assert_eq!(table.cell(0, 0).classification, CellClass::Indeterminate);
        assert_eq!(table.cell(1, 0).classification, CellClass::Determinate);

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "phi_pi,phi_y,classification,n_stable,degree_m"
        );
        assert_eq!(lines.next().unwrap(), "0.5,0.0,indeterminate,2,1");
    }

    #[test]
    fn map_marks_unit_circle_cells_instead_of_failing() {
        let base = NKParams::default();
        let table = determinacy_map(&base, &[1.0], &[0.0], &opts());
        assert_eq!(table.cells[0].classification, CellClass::UnitRoot);
        assert_eq!(table.cells[0].n_stable, Some(1));
    }
}

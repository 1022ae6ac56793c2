//! Simulation and verification layer: impulse responses, stochastic
//! simulation, stationary variance, structural residual checks, sunspot
//! augmentation, and path comparison.
//!
//! Conventions: impulse responses are deviations from the steady state;
//! simulated paths are levels (steady state plus deviation). Residual
//! checks evaluate the structural equations row by row, honouring the
//! dating convention (realized state-evolution rows vs expectational rows).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LinearREModel;
use crate::selectors::{format_float, StateSpaceSolution};

/// A time-indexed table of variable paths. Row `i` is period `t0 + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTable {
    pub names: Vec<String>,
    pub t0: i64,
    /// `len x n` data, one row per period.
    pub data: DMatrix<f64>,
}

impl PathTable {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// CSV with a leading `t` column; floats in shortest round-trip form.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        out.write_record(&header)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for i in 0..self.len() {
            let mut rec = vec![(self.t0 + i as i64).to_string()];
            for j in 0..self.names.len() {
                rec.push(format_float(self.data[(i, j)]));
            }
            out.write_record(&rec)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse a CSV produced by [`PathTable::write_csv`] (or any CSV with a
    /// `t` column followed by numeric variable columns).
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<PathTable> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("csv header: {e}")))?
            .clone();
        if headers.is_empty() || headers.get(0) != Some("t") {
            return Err(Error::Parse(
                "path csv must start with a `t` column".to_string(),
            ));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
        if names.is_empty() {
            return Err(Error::Parse(
                "path csv declares no variable columns".to_string(),
            ));
        }

        let mut times: Vec<i64> = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("csv record {line}: {e}")))?;
            if rec.len() != names.len() + 1 {
                return Err(Error::Parse(format!(
                    "csv record {line} has {} fields, expected {}",
                    rec.len(),
                    names.len() + 1
                )));
            }
            let t: i64 = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("csv record {line}: bad time `{}`", &rec[0])))?;
            times.push(t);
            let mut row = Vec::with_capacity(names.len());
            for (j, field) in rec.iter().skip(1).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Parse(format!(
                        "csv record {line}, column `{}`: bad number `{field}`",
                        names[j]
                    ))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("path csv has no data rows".to_string()));
        }
        let t0 = times[0];
        for (i, &t) in times.iter().enumerate() {
            if t != t0 + i as i64 {
                return Err(Error::Parse(format!(
                    "path csv time column must be consecutive (row {i} has t = {t}, expected {})",
                    t0 + i as i64
                )));
            }
        }
        let n = names.len();
        let data = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Ok(PathTable { names, t0, data })
    }
}

/// Deviation-from-steady-state response to a one-off impulse in the given
/// shock at period 0. Row `t` holds `z_t`; states receive the impulse at
/// period 0 through their realized evolution rows.
pub fn impulse_response(
    sol: &StateSpaceSolution,
    shock: usize,
    magnitude: f64,
    horizon: usize,
) -> Result<PathTable> {
    let n_k = sol.n_shocks();
    if shock >= n_k {
        return Err(Error::DimensionMismatch(format!(
            "shock index {shock} out of range (model has {n_k} shocks)"
        )));
    }
    if !magnitude.is_finite() {
        return Err(Error::NonFiniteEntry("impulse magnitude".to_string()));
    }
    let n_s = sol.n_s;
    let n_j = sol.n_j();
    let n = sol.n();
    let mut data = DMatrix::<f64>::zeros(horizon + 1, n);

    let mut s = DVector::<f64>::zeros(n_s);
    for i in 0..n_s {
        s[i] = sol.q_imp[(i, shock)] * magnitude;
    }
    for t in 0..=horizon {
        let j = if t == 0 {
            let mut j0 = &sol.p * &s;
            for i in 0..n_j {
                j0[i] += sol.jump_impact[(i, shock)] * magnitude;
            }
            j0
        } else {
            &sol.p * &s
        };
        for i in 0..n_s {
            data[(t, i)] = s[i];
        }
        for i in 0..n_j {
            data[(t, n_s + i)] = j[i];
        }
        if t < horizon {
            s = &sol.r * s;
        }
    }

    Ok(PathTable {
        names: sol.names.clone(),
        t0: 0,
        data,
    })
}

/// Simulation output: the level path plus the shock draws that produced it
/// (row `t` holds the innovation applied at period `t`).
#[derive(Clone, Debug)]
pub struct SimResult {
    pub path: PathTable,
    pub shocks: DMatrix<f64>,
    pub seed: u64,
}

/// Square-root factor of a symmetric positive semidefinite matrix via its
/// eigendecomposition; tolerates tiny negative eigenvalues from rounding.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = cov.nrows();
    if cov.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let sym_defect = (cov - cov.transpose()).amax();
    let scale = cov.amax().max(1e-300);
    if sym_defect > 1e-10 * scale {
        return Err(Error::InvalidParams(
            "covariance matrix must be symmetric".to_string(),
        ));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut factor = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let lam = eig.eigenvalues[j];
        if lam < -1e-10 * scale {
            return Err(Error::InvalidParams(format!(
                "covariance matrix is not positive semidefinite (eigenvalue {lam:.3e})"
            )));
        }
        let root = lam.max(0.0).sqrt();
        for i in 0..k {
            factor[(i, j)] = eig.eigenvectors[(i, j)] * root;
        }
    }
    Ok(factor)
}

/// Simulate `t_len` periods of the level path from the steady state with
/// Gaussian innovations `eps_t ~ N(0, shock_cov)`, reproducibly seeded.
pub fn simulate(
    sol: &StateSpaceSolution,
    shock_cov: &DMatrix<f64>,
    t_len: usize,
    seed: u64,
) -> Result<SimResult> {
    let n_k = sol.n_shocks();
    if shock_cov.nrows() != n_k {
        return Err(Error::DimensionMismatch(format!(
            "shock covariance is {}x{}, model has {n_k} shocks",
            shock_cov.nrows(),
            shock_cov.ncols()
        )));
    }
    if t_len == 0 {
        return Err(Error::InvalidParams(
            "simulation length must be positive".to_string(),
        ));
    }
    let factor = psd_factor(shock_cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_s = sol.n_s;
    let n_j = sol.n_j();
    let n = sol.n();
    let mut data = DMatrix::<f64>::zeros(t_len, n);
    let mut shocks = DMatrix::<f64>::zeros(t_len, n_k);

    let mut s = DVector::<f64>::zeros(n_s);
    for t in 0..t_len {
        let draw = DVector::<f64>::from_fn(n_k, |_, _| StandardNormal.sample(&mut rng));
        let eps = &factor * draw;
        for k in 0..n_k {
            shocks[(t, k)] = eps[k];
        }
        s = &sol.r * s + &sol.q_imp * &eps;
        let j = &sol.p * &s + &sol.jump_impact * &eps;
        for i in 0..n_s {
            data[(t, i)] = sol.kappa_const[i] + s[i];
        }
        for i in 0..n_j {
            data[(t, n_s + i)] = sol.kappa_const[n_s + i] + j[i];
        }
    }

    Ok(SimResult {
        path: PathTable {
            names: sol.names.clone(),
            t0: 0,
            data,
        },
        shocks,
        seed,
    })
}

/// Spectral radius of a real square matrix.
fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0f64, f64::max)
}

/// Stationary covariance of the state: solves the discrete Lyapunov
/// equation `V = R V R' + Q S Q'` by the Kronecker linearization.
fn lyapunov_state_cov(
    r: &DMatrix<f64>,
    q: &DMatrix<f64>,
    shock_cov: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n_s = r.nrows();
    if n_s == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let radius = spectral_radius(r);
    if radius >= 1.0 {
        return Err(Error::NotStationary { radius });
    }
    let rhs_mat = q * shock_cov * q.transpose();
    // vec(V) = (I - R (x) R)^{-1} vec(rhs), column-major vec.
    let m = n_s * n_s;
    let mut a = DMatrix::<f64>::identity(m, m);
    for c2 in 0..n_s {
        for c1 in 0..n_s {
            let col = c2 * n_s + c1;
            for r2 in 0..n_s {
                for r1 in 0..n_s {
                    let row = r2 * n_s + r1;
                    a[(row, col)] -= r[(r1, c1)] * r[(r2, c2)];
                }
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(m);
    for c in 0..n_s {
        for rr in 0..n_s {
            rhs[c * n_s + rr] = rhs_mat[(rr, c)];
        }
    }
    let v = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::NotStationary { radius })?;
    let mut out = DMatrix::<f64>::zeros(n_s, n_s);
    for c in 0..n_s {
        for rr in 0..n_s {
            out[(rr, c)] = v[c * n_s + rr];
        }
    }
    let sym = (&out + out.transpose()) * 0.5;
    Ok(sym)
}

/// Stationary covariance of the full variable vector `z_t = [s_t; j_t]`
/// under `eps ~ (0, shock_cov)`: with `F = [I; P]` and `Ntil = [0; N]`,
/// `V_z = F V_s F' + F Q S Ntil' + Ntil S Q' F' + Ntil S Ntil'`.
pub fn unconditional_variance(
    sol: &StateSpaceSolution,
    shock_cov: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n_k = sol.n_shocks();
    if shock_cov.nrows() != n_k || shock_cov.ncols() != n_k {
        return Err(Error::DimensionMismatch(format!(
            "shock covariance is {}x{}, model has {n_k} shocks",
            shock_cov.nrows(),
            shock_cov.ncols()
        )));
    }
    let n_s = sol.n_s;
    let n_j = sol.n_j();
    let n = sol.n();
    let v_s = lyapunov_state_cov(&sol.r, &sol.q_imp, shock_cov)?;

    let mut f = DMatrix::<f64>::zeros(n, n_s);
    for i in 0..n_s {
        f[(i, i)] = 1.0;
    }
    f.view_mut((n_s, 0), (n_j, n_s)).copy_from(&sol.p);
    let mut ntil = DMatrix::<f64>::zeros(n, n_k);
    ntil.view_mut((n_s, 0), (n_j, n_k))
        .copy_from(&sol.jump_impact);

    let cross = &f * &sol.q_imp * shock_cov * ntil.transpose();
    let v_z = &f * v_s * f.transpose() + &cross + cross.transpose() + &ntil * shock_cov * ntil.transpose();
    Ok((&v_z + v_z.transpose()) * 0.5)
}

/// Extend a solution with independent sunspot states `xi_t` driven by their
/// own innovations: `xi_{t+1} = lambda_x xi_t + nu_{t+1}`, entering the
/// jumps through the jump rows of `w_span`. Requires the sunspot directions
/// to carry no state component (stochastic sunspots cannot move realized
/// state-evolution rows). Shock order: original shocks, then one `nu` per
/// sunspot column; variable order: states, `xi`, jumps.
pub fn sunspot_augmented(
    sol: &StateSpaceSolution,
    w_span: &DMatrix<f64>,
    lambda_x: &DMatrix<f64>,
) -> Result<StateSpaceSolution> {
    let n_s = sol.n_s;
    let n_j = sol.n_j();
    let m = w_span.ncols();
    if w_span.nrows() != sol.n() || lambda_x.nrows() != m || lambda_x.ncols() != m {
        return Err(Error::DimensionMismatch(
            "sunspot span/transition shapes do not match the solution".to_string(),
        ));
    }
    let state_leak = (0..n_s)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| w_span[(i, j)].abs())
        .fold(0.0f64, f64::max);
    if state_leak > 1e-8 {
        return Err(Error::InvalidModel(format!(
            "sunspot directions load predetermined variables (max |entry| {state_leak:.2e}); \
             stochastic sunspots must live in the jump block"
        )));
    }
    if spectral_radius(lambda_x) >= 1.0 {
        return Err(Error::NotStationary {
            radius: spectral_radius(lambda_x),
        });
    }

    let n_k = sol.n_shocks();
    let ns2 = n_s + m;
    let nk2 = n_k + m;

    let mut names = Vec::with_capacity(sol.n() + m);
    names.extend(sol.names[..n_s].iter().cloned());
    for j in 0..m {
        names.push(format!("xi{j}"));
    }
    names.extend(sol.names[n_s..].iter().cloned());
    let mut shock_names = sol.shock_names.clone();
    for j in 0..m {
        shock_names.push(format!("nu{j}"));
    }

    let mut r = DMatrix::<f64>::zeros(ns2, ns2);
    r.view_mut((0, 0), (n_s, n_s)).copy_from(&sol.r);
    r.view_mut((n_s, n_s), (m, m)).copy_from(lambda_x);

    let mut q = DMatrix::<f64>::zeros(ns2, nk2);
    q.view_mut((0, 0), (n_s, n_k)).copy_from(&sol.q_imp);
    for j in 0..m {
        q[(n_s + j, n_k + j)] = 1.0;
    }

    let mut p = DMatrix::<f64>::zeros(n_j, ns2);
    p.view_mut((0, 0), (n_j, n_s)).copy_from(&sol.p);
    for i in 0..n_j {
        for j in 0..m {
            p[(i, n_s + j)] = w_span[(n_s + i, j)];
        }
    }

    let mut jump_impact = DMatrix::<f64>::zeros(n_j, nk2);
    jump_impact
        .view_mut((0, 0), (n_j, n_k))
        .copy_from(&sol.jump_impact);

    let mut kappa = DVector::<f64>::zeros(sol.n() + m);
    for i in 0..n_s {
        kappa[i] = sol.kappa_const[i];
    }
    for i in 0..n_j {
        kappa[ns2 + i] = sol.kappa_const[n_s + i];
    }

    Ok(StateSpaceSolution {
        names,
        shock_names,
        n_s: ns2,
        p,
        r,
        q_imp: q,
        jump_impact,
        kappa_const: kappa,
    })
}

/// How a residual check exercises the solution.
#[derive(Clone, Copy, Debug)]
pub enum ResidualMode {
    /// Algebraic identities: transition `A0 F = A1 F R`, shock impact by
    /// row dating, steady-state constants.
    MatrixIdentity,
    /// Seeded stochastic path: realized rows checked against drawn shocks,
    /// expectational rows against the model-consistent conditional mean.
    StochasticLawOfMotion { t_len: usize, seed: u64 },
    /// Deterministic impulse path: all rows checked against realized
    /// next-period values (no uncertainty after the impulse).
    PerfectForesight {
        shock: usize,
        magnitude: f64,
        horizon: usize,
    },
}

/// Outcome of a residual check.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub mode: String,
    pub max_abs_residual: f64,
    pub tol: f64,
    pub pass: bool,
    /// Row (equation index) with the largest residual.
    pub worst_row: usize,
    /// Period of the largest residual for path-based modes.
    pub worst_t: Option<usize>,
}

fn scale_of(model: &LinearREModel) -> f64 {
    model.a0().amax().max(model.a1().amax()).max(1.0)
}

/// Verify a committed solution against the structural equations.
pub fn residual_check(
    model: &LinearREModel,
    sol: &StateSpaceSolution,
    mode: ResidualMode,
    tol: f64,
) -> Result<ResidualReport> {
    let n = model.n();
    let n_s = model.n_s();
    let n_j = model.n_j();
    if sol.n() != n || sol.n_s != n_s || sol.n_shocks() != model.n_shocks() {
        return Err(Error::DimensionMismatch(
            "solution dimensions do not match the model".to_string(),
        ));
    }
    let scale = scale_of(model);
    let d_rows: std::collections::BTreeSet<usize> =
        model.state_evolution_rows().into_iter().collect();

    let mut f = DMatrix::<f64>::zeros(n, n_s);
    for i in 0..n_s {
        f[(i, i)] = 1.0;
    }
    f.view_mut((n_s, 0), (n_j, n_s)).copy_from(&sol.p);

    let mut worst = (0.0f64, 0usize, None::<usize>);
    let mut record = |value: f64, row: usize, t: Option<usize>| {
        if value > worst.0 {
            worst = (value, row, t);
        }
    };

    match mode {
        ResidualMode::MatrixIdentity => {
            let trans = model.a0() * &f - model.a1() * &f * &sol.r;
            for i in 0..n {
                for j in 0..n_s {
                    record(trans[(i, j)].abs(), i, None);
                }
            }
            // Shock impact identities per row dating.
            for k in 0..sol.n_shocks() {
                for i in 0..n {
                    let resid = if d_rows.contains(&i) {
                        let realized: f64 =
                            (0..n_s).map(|j| model.a1()[(i, j)] * sol.q_imp[(j, k)]).sum();
                        let leak: f64 = (0..n_j)
                            .map(|j| model.a0()[(i, n_s + j)] * sol.jump_impact[(j, k)])
                            .sum();
                        (realized - model.b()[(i, k)]).abs().max(leak.abs())
                    } else {
                        let got: f64 = (0..n_j)
                            .map(|j| model.a0()[(i, n_s + j)] * sol.jump_impact[(j, k)])
                            .sum();
                        (got - model.b()[(i, k)]).abs()
                    };
                    record(resid, i, None);
                }
            }
            // Steady-state constants.
            let cres = (model.a0() - model.a1()) * &sol.kappa_const - model.c();
            for i in 0..n {
                record(cres[i].abs(), i, None);
            }
        }
        ResidualMode::StochasticLawOfMotion { t_len, seed } => {
            if t_len < 2 {
                return Err(Error::InvalidParams(
                    "stochastic residual check needs at least 2 periods".to_string(),
                ));
            }
            let cov = DMatrix::<f64>::identity(sol.n_shocks(), sol.n_shocks());
            let sim = simulate(sol, &cov, t_len, seed)?;
            let path = &sim.path;
            for t in 0..t_len - 1 {
                let z_t = path.data.row(t).transpose();
                let z_next = path.data.row(t + 1).transpose();
                let s_t = z_t.rows(0, n_s).into_owned() - sol.kappa_const.rows(0, n_s);
                let mean_next = &f * (&sol.r * &s_t) + &sol.kappa_const;
                for i in 0..n {
                    let resid = if d_rows.contains(&i) {
                        let lhs: f64 = (0..n).map(|j| model.a0()[(i, j)] * z_t[j]).sum();
                        let rhs: f64 = (0..n).map(|j| model.a1()[(i, j)] * z_next[j]).sum::<f64>()
                            - (0..sol.n_shocks())
                                .map(|k| model.b()[(i, k)] * sim.shocks[(t + 1, k)])
                                .sum::<f64>()
                            + model.c()[i];
                        lhs - rhs
                    } else {
                        let lhs: f64 = (0..n).map(|j| model.a0()[(i, j)] * z_t[j]).sum();
                        let rhs: f64 = (0..n)
                            .map(|j| model.a1()[(i, j)] * mean_next[j])
                            .sum::<f64>()
                            + (0..sol.n_shocks())
                                .map(|k| model.b()[(i, k)] * sim.shocks[(t, k)])
                                .sum::<f64>()
                            + model.c()[i];
                        lhs - rhs
                    };
                    record(resid.abs(), i, Some(t));
                }
            }
        }
        ResidualMode::PerfectForesight {
            shock,
            magnitude,
            horizon,
        } => {
            if horizon < 2 {
                return Err(Error::InvalidParams(
                    "perfect-foresight residual check needs horizon >= 2".to_string(),
                ));
            }
            let irf = impulse_response(sol, shock, magnitude, horizon)?;
            // Deviation form: the constants cancel against the steady state.
            for t in 0..horizon {
                let z_t = irf.data.row(t).transpose();
                let z_next = irf.data.row(t + 1).transpose();
                for i in 0..n {
                    let lhs: f64 = (0..n).map(|j| model.a0()[(i, j)] * z_t[j]).sum();
                    let mut rhs: f64 = (0..n).map(|j| model.a1()[(i, j)] * z_next[j]).sum();
                    if t == 0 && !d_rows.contains(&i) {
                        rhs += model.b()[(i, shock)] * magnitude;
                    }
                    record((lhs - rhs).abs(), i, Some(t));
                }
            }
            // Impact boundary: states enter period 0 through their realized
            // rows with the impulse dated at arrival.
            let z0 = irf.data.row(0).transpose();
            for &i in &d_rows {
                let got: f64 = (0..n).map(|j| model.a1()[(i, j)] * z0[j]).sum();
                let want = model.b()[(i, shock)] * magnitude;
                record((got - want).abs(), i, Some(0));
            }
        }
    }

    let mode_name = match mode {
        ResidualMode::MatrixIdentity => "matrix-identity",
        ResidualMode::StochasticLawOfMotion { .. } => "stochastic-law-of-motion",
        ResidualMode::PerfectForesight { .. } => "perfect-foresight",
    };
    Ok(ResidualReport {
        mode: mode_name.to_string(),
        max_abs_residual: worst.0,
        tol,
        pass: worst.0 <= tol * scale,
        worst_row: worst.1,
        worst_t: worst.2,
    })
}

/// Per-variable comparison of two paths over their overlap.
#[derive(Clone, Debug, Serialize)]
pub struct VarDiff {
    pub name: String,
    pub max_abs_diff: f64,
    pub rmse: f64,
}

/// Result of comparing two path tables on shared variables and periods.
#[derive(Clone, Debug, Serialize)]
pub struct DiffReport {
    pub overlap_start: i64,
    pub overlap_len: usize,
    pub variables: Vec<VarDiff>,
    pub max_abs_diff: f64,
}

/// Compare two paths on the intersection of their variables and time spans.
/// Symmetric in its arguments.
pub fn compare_paths(a: &PathTable, b: &PathTable) -> Result<DiffReport> {
    let shared: Vec<String> = a
        .names
        .iter()
        .filter(|n| b.column_index(n).is_some())
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(Error::NoOverlap("no common variables".to_string()));
    }
    let start = a.t0.max(b.t0);
    let end = (a.t0 + a.len() as i64).min(b.t0 + b.len() as i64);
    if end <= start {
        return Err(Error::NoOverlap(format!(
            "no common periods (spans [{}, {}) and [{}, {}))",
            a.t0,
            a.t0 + a.len() as i64,
            b.t0,
            b.t0 + b.len() as i64
        )));
    }
    let len = (end - start) as usize;

    let mut variables = Vec::with_capacity(shared.len());
    let mut global_max = 0.0f64;
    for name in &shared {
        let ia = a.column_index(name).expect("shared name in a");
        let ib = b.column_index(name).expect("shared name in b");
        let mut max_abs = 0.0f64;
        let mut sq_sum = 0.0f64;
        for t in 0..len {
            let ra = (start - a.t0) as usize + t;
            let rb = (start - b.t0) as usize + t;
            let d = a.data[(ra, ia)] - b.data[(rb, ib)];
            max_abs = max_abs.max(d.abs());
            sq_sum += d * d;
        }
        let rmse = (sq_sum / len as f64).sqrt();
        global_max = global_max.max(max_abs);
        variables.push(VarDiff {
            name: name.clone(),
            max_abs_diff: max_abs,
            rmse,
        });
    }

    Ok(DiffReport {
        overlap_start: start,
        overlap_len: len,
        variables,
        max_abs_diff: global_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{nk_model, scalar_forward_model, NKParams};
    use crate::selectors::{augment_fiscal, select_bk, FiscalParams, FiscalRoles, Selection};
    use approx::assert_relative_eq;

    // Frozen policy coefficients of the monetary model at default
    // parameters, computed from the closed form.
    const P_Y: f64 = 4.759825327510917;
    const P_PI: f64 = 0.8733624454148472;

    fn nk_solution(phi_pi: f64) -> Selection {
        let p = NKParams {
            phi_pi,
            ..NKParams::default()
        };
        let model = nk_model(&p).unwrap();
        select_bk(&model, &Default::default()).unwrap()
    }

    fn nk_determinate(phi_pi: f64) -> StateSpaceSolution {
        match nk_solution(phi_pi) {
            Selection::Determinate { solution, .. } => solution,
            other => panic!("expected a determinate selection, got {other:?}"),
        }
    }

    #[test]
    fn impulse_response_traces_the_policy_function() {
        let sol = nk_determinate(1.5);
        let irf = impulse_response(&sol, 0, 1.0, 5).unwrap();
        assert_eq!(irf.names, vec!["rn", "y", "pi"]);
        assert_eq!(irf.len(), 6);
        for t in 0..=5 {
            let decay = 0.9f64.powi(t as i32);
            assert_relative_eq!(irf.data[(t, 0)], decay, max_relative = 1e-9);
            assert_relative_eq!(irf.data[(t, 1)], P_Y * decay, max_relative = 1e-9);
            assert_relative_eq!(irf.data[(t, 2)], P_PI * decay, max_relative = 1e-9);
        }
    }

    #[test]
    fn impulse_response_rejects_a_bad_shock_index() {
        let sol = nk_determinate(1.5);
        assert!(matches!(
            impulse_response(&sol, 3, 1.0, 5),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn stateless_impulse_dies_after_impact() {
        let model = scalar_forward_model(0.5).unwrap();
        let sol = match select_bk(&model, &Default::default()).unwrap() {
            Selection::Determinate { solution, .. } => solution,
            other => panic!("expected determinate, got {other:?}"),
        };
        let irf = impulse_response(&sol, 0, 2.0, 4).unwrap();
        assert_relative_eq!(irf.data[(0, 0)], 2.0, max_relative = 1e-12);
        for t in 1..=4 {
            assert_eq!(irf.data[(t, 0)], 0.0);
        }
    }

    #[test]
    fn zero_covariance_simulation_stays_at_the_steady_state() {
        let sol = nk_determinate(1.5);
        let cov = DMatrix::<f64>::zeros(1, 1);
        let sim = simulate(&sol, &cov, 50, 42).unwrap();
        assert_eq!(sim.path.data.amax(), 0.0);
        assert_eq!(sim.shocks.amax(), 0.0);
    }

    #[test]
    fn simulation_is_reproducible_by_seed() {
        let sol = nk_determinate(1.5);
        let cov = DMatrix::<f64>::identity(1, 1);
        let a = simulate(&sol, &cov, 100, 7).unwrap();
        let b = simulate(&sol, &cov, 100, 7).unwrap();
        let c = simulate(&sol, &cov, 100, 8).unwrap();
        assert_eq!(a.path.data, b.path.data);
        assert!((a.path.data.clone() - c.path.data).amax() > 1e-6);
    }

    #[test]
    fn simulation_rejects_an_indefinite_covariance() {
        let sol = nk_determinate(1.5);
        let cov = DMatrix::from_row_slice(1, 1, &[-0.5]);
        assert!(matches!(
            simulate(&sol, &cov, 10, 0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn stationary_variance_matches_the_autoregressive_formula() {
        let sol = nk_determinate(1.5);
        let cov = DMatrix::<f64>::identity(1, 1);
        let v = unconditional_variance(&sol, &cov).unwrap();
        let v_rn = 1.0 / (1.0 - 0.81);
        assert_relative_eq!(v[(0, 0)], v_rn, max_relative = 1e-10);
        assert_relative_eq!(v[(1, 1)], P_Y * P_Y * v_rn, max_relative = 1e-9);
        assert_relative_eq!(v[(2, 2)], P_PI * P_PI * v_rn, max_relative = 1e-9);
        assert_relative_eq!(v[(1, 2)], P_Y * P_PI * v_rn, max_relative = 1e-9);
        assert_relative_eq!(v[(0, 1)], P_Y * v_rn, max_relative = 1e-9);
    }

    #[test]
    fn stateless_variance_is_the_impact_outer_product() {
        let model = scalar_forward_model(0.5).unwrap();
        let sol = match select_bk(&model, &Default::default()).unwrap() {
            Selection::Determinate { solution, .. } => solution,
            other => panic!("expected determinate, got {other:?}"),
        };
        let cov = DMatrix::from_row_slice(1, 1, &[2.25]);
        let v = unconditional_variance(&sol, &cov).unwrap();
        assert_relative_eq!(v[(0, 0)], 2.25, max_relative = 1e-12);
    }

    #[test]
    fn sampled_covariance_approaches_the_lyapunov_solution() {
        let sol = nk_determinate(1.5);
        let cov = DMatrix::<f64>::identity(1, 1);
        let t_len = 100_000;
        let sim = simulate(&sol, &cov, t_len, 7).unwrap();
        let col = sim.path.data.column(0);
        let mean = col.sum() / t_len as f64;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t_len as f64;
        let truth = 1.0 / (1.0 - 0.81);
        assert!(
            (var - truth).abs() / truth < 0.1,
            "sample variance {var} too far from {truth}"
        );
    }

    #[test]
    fn a_unit_root_transition_is_reported_as_nonstationary() {
        let sol = StateSpaceSolution {
            names: vec!["s".into(), "j".into()],
            shock_names: vec!["e".into()],
            n_s: 1,
            p: DMatrix::from_row_slice(1, 1, &[0.0]),
            r: DMatrix::from_row_slice(1, 1, &[1.0]),
            q_imp: DMatrix::from_row_slice(1, 1, &[1.0]),
            jump_impact: DMatrix::from_row_slice(1, 1, &[0.0]),
            kappa_const: DVector::zeros(2),
        };
        let cov = DMatrix::<f64>::identity(1, 1);
        match unconditional_variance(&sol, &cov) {
            Err(Error::NotStationary { radius }) => assert!((radius - 1.0).abs() < 1e-12),
            other => panic!("expected NotStationary, got {other:?}"),
        }
    }

    #[test]
    fn residual_checks_pass_for_the_monetary_solution() {
        let p = NKParams::default();
        let model = nk_model(&p).unwrap();
        let sol = nk_determinate(1.5);
        for mode in [
            ResidualMode::MatrixIdentity,
            ResidualMode::StochasticLawOfMotion {
                t_len: 200,
                seed: 11,
            },
            ResidualMode::PerfectForesight {
                shock: 0,
                magnitude: 1.0,
                horizon: 50,
            },
        ] {
            let rep = residual_check(&model, &sol, mode, 1e-8).unwrap();
            assert!(
                rep.pass,
                "{} residual {:.3e} exceeds tolerance",
                rep.mode, rep.max_abs_residual
            );
        }
    }

    #[test]
    fn residual_checks_pass_for_the_fiscal_solution() {
        let p = NKParams::default();
        let model = nk_model(&p).unwrap();
        let roles = FiscalRoles {
            inflation: "pi".into(),
            output: "y".into(),
            rate: None,
        };
        let aug = augment_fiscal(&model, &roles, &FiscalParams { gamma_s: 0.2 }).unwrap();
        let sol = match select_bk(&aug, &Default::default()).unwrap() {
            Selection::Determinate { solution, .. } => solution,
            other => panic!("expected determinate fiscal solution, got {other:?}"),
        };
        for mode in [
            ResidualMode::MatrixIdentity,
            ResidualMode::StochasticLawOfMotion {
                t_len: 150,
                seed: 3,
            },
            ResidualMode::PerfectForesight {
                shock: 0,
                magnitude: 1.0,
                horizon: 40,
            },
        ] {
            let rep = residual_check(&aug, &sol, mode, 1e-8).unwrap();
            assert!(
                rep.pass,
                "{} residual {:.3e} exceeds tolerance",
                rep.mode, rep.max_abs_residual
            );
        }
    }

    #[test]
    fn residual_check_flags_a_corrupted_solution() {
        let p = NKParams::default();
        let model = nk_model(&p).unwrap();
        let mut sol = nk_determinate(1.5);
        sol.p[(0, 0)] += 1e-3;
        let rep = residual_check(&model, &sol, ResidualMode::MatrixIdentity, 1e-8).unwrap();
        assert!(!rep.pass);
        assert!(rep.max_abs_residual > 1e-5);
    }

    #[test]
    fn sunspot_variance_decomposes_additively() {
        let (fundamental, w_span, lambda_x) = match nk_solution(0.8) {
            Selection::Indeterminate {
                degree,
                fundamental,
                w_span,
                lambda_x,
                ..
            } => {
                assert_eq!(degree, 1);
                (fundamental, w_span, lambda_x)
            }
            other => panic!("expected indeterminacy at phi_pi = 0.8, got {other:?}"),
        };
        let lam = lambda_x[(0, 0)];
        assert!(lam.abs() < 1.0);

        let sig_xi = 0.3;
        let sig_nu = sig_xi * (1.0 - lam * lam);
        let aug = sunspot_augmented(&fundamental, &w_span, &lambda_x).unwrap();
        assert_eq!(aug.n_s, 2);
        assert_eq!(aug.names, vec!["rn", "xi0", "y", "pi"]);

        let mut cov_aug = DMatrix::<f64>::identity(2, 2);
        cov_aug[(1, 1)] = sig_nu;
        let v_aug = unconditional_variance(&aug, &cov_aug).unwrap();

        let cov = DMatrix::<f64>::identity(1, 1);
        let v_f = unconditional_variance(&fundamental, &cov).unwrap();

        // Rows of the original variables inside the augmented ordering.
        let idx = [0usize, 2, 3];
        let w = &w_span;
        for (ai, &i) in idx.iter().enumerate() {
            for (aj, &j) in idx.iter().enumerate() {
                let got = v_aug[(i, j)];
                let want = v_f[(ai, aj)] + sig_xi * w[(ai, 0)] * w[(aj, 0)];
                assert_relative_eq!(got, want, max_relative = 1e-8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sunspot_directions_loading_states_are_rejected() {
        let fundamental = nk_determinate(1.5);
        let mut w = DMatrix::<f64>::zeros(3, 1);
        w[(0, 0)] = 0.5;
        w[(1, 0)] = 0.8;
        let lam = DMatrix::from_row_slice(1, 1, &[0.9]);
        assert!(matches!(
            sunspot_augmented(&fundamental, &w, &lam),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn path_csv_round_trips_exactly() {
        let table = PathTable {
            names: vec!["y".into(), "pi".into()],
            t0: -3,
            data: DMatrix::from_row_slice(
                4,
                2,
                &[
                    1.0 / 3.0,
                    -0.125,
                    2.718281828459045,
                    0.0,
                    -1e-17,
                    4.5e12,
                    0.1 + 0.2,
                    f64::MIN_POSITIVE,
                ],
            ),
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = PathTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn path_csv_rejects_malformed_input() {
        let no_t = "y,pi\n1.0,2.0\n";
        assert!(matches!(
            PathTable::read_csv(no_t.as_bytes()),
            Err(Error::Parse(_))
        ));
        let gap = "t,y\n0,1.0\n2,2.0\n";
        assert!(matches!(
            PathTable::read_csv(gap.as_bytes()),
            Err(Error::Parse(_))
        ));
        let bad_num = "t,y\n0,1.0\n1,abc\n";
        assert!(matches!(
            PathTable::read_csv(bad_num.as_bytes()),
            Err(Error::Parse(_))
        ));
        let empty = "t,y\n";
        assert!(matches!(
            PathTable::read_csv(empty.as_bytes()),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn compare_paths_reports_per_variable_differences() {
        let a = PathTable {
            names: vec!["y".into(), "pi".into()],
            t0: 0,
            data: DMatrix::from_fn(5, 2, |i, j| (i as f64) + 10.0 * j as f64),
        };
        let b = PathTable {
            names: vec!["pi".into(), "x".into()],
            t0: 2,
            data: DMatrix::from_fn(6, 2, |i, j| {
                if j == 0 {
                    (i + 2) as f64 + 10.0 + 0.25
                } else {
                    99.0
                }
            }),
        };
        let rep = compare_paths(&a, &b).unwrap();
        assert_eq!(rep.overlap_start, 2);
        assert_eq!(rep.overlap_len, 3);
        assert_eq!(rep.variables.len(), 1);
        assert_eq!(rep.variables[0].name, "pi");
        assert_relative_eq!(rep.variables[0].max_abs_diff, 0.25, max_relative = 1e-12);
        assert_relative_eq!(rep.variables[0].rmse, 0.25, max_relative = 1e-12);

        let sym = compare_paths(&b, &a).unwrap();
        assert_eq!(sym.max_abs_diff, rep.max_abs_diff);
        assert_eq!(sym.overlap_len, rep.overlap_len);
    }

    #[test]
    fn compare_paths_with_nothing_in_common_errors() {
        let a = PathTable {
            names: vec!["y".into()],
            t0: 0,
            data: DMatrix::zeros(3, 1),
        };
        let b = PathTable {
            names: vec!["x".into()],
            t0: 0,
            data: DMatrix::zeros(3, 1),
        };
        assert!(matches!(compare_paths(&a, &b), Err(Error::NoOverlap(_))));

        let c = PathTable {
            names: vec!["y".into()],
            t0: 10,
            data: DMatrix::zeros(3, 1),
        };
        assert!(matches!(compare_paths(&a, &c), Err(Error::NoOverlap(_))));
    }
}

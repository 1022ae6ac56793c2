//! Generalized Schur (QZ) decomposition of a real matrix pencil in complex
//! arithmetic.
//!
//! For a pencil `(A0, A1)` the routine produces unitary `Q`, `Z` and upper
//! triangular `S`, `T` with `Q A0 Z = S` and `Q A1 Z = T`. Generalized
//! eigenvalues are the transition roots of `det(A0 - lambda A1) = 0`, read
//! off the diagonals as `lambda_i = S_ii / T_ii`; a zero `T_ii` is an
//! infinite eigenvalue (e.g. a static variable column missing from `A1`).
//!
//! Working in complex arithmetic keeps both factors strictly triangular, so
//! reordering eigenvalues is a sequence of adjacent 1x1 swaps instead of the
//! 2x2 real-block swaps a real quasi-triangular form would need.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerances for the decomposition and eigenvalue classification.
#[derive(Clone, Copy, Debug)]
pub struct QzOptions {
    /// Half-width of the unit-circle band: moduli within `tol_unit` of 1 are
    /// classified [`EigenvalueClass::UnitRoot`].
    pub tol_unit: f64,
    /// A `T` diagonal entry below `tol_inf` (relative to the pencil norm) is
    /// treated as zero, i.e. an infinite eigenvalue.
    pub tol_inf: f64,
    /// Iteration budget: `max_sweeps_factor * n` implicit QZ steps.
    pub max_sweeps_factor: usize,
    /// An adjacent eigenvalue swap must leave the eliminated subdiagonal
    /// entries below `swap_tol` (relative to the block scale) and preserve
    /// the two eigenvalue rays to the same tolerance.
    pub swap_tol: f64,
}

impl Default for QzOptions {
    fn default() -> Self {
        QzOptions {
            tol_unit: 1e-6,
            tol_inf: 1e-12,
            max_sweeps_factor: 30,
            swap_tol: 1e-8,
        }
    }
}

/// Classification of a generalized eigenvalue relative to the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenvalueClass {
    /// Modulus < 1 - tol_unit.
    Stable,
    /// Modulus > 1 + tol_unit.
    Unstable,
    /// Modulus within tol_unit of 1.
    UnitRoot,
    /// Zero `T` diagonal: the eigenvalue is infinite (always non-stable).
    Infinite,
}

/// One generalized eigenvalue in homogeneous form `(alpha : beta_coef)`.
///
/// Finite eigenvalues are normalized to `beta_coef = 1`, so `alpha` is the
/// eigenvalue itself; infinite eigenvalues have `beta_coef = 0` and a
/// unit-modulus `alpha` recording the phase of the `S` diagonal.
#[derive(Clone, Copy, Debug)]
pub struct GeneralizedEigenvalue {
    pub alpha: C64,
    pub beta_coef: f64,
    pub class: EigenvalueClass,
}

impl GeneralizedEigenvalue {
    /// Finite value, if any.
    pub fn value(&self) -> Option<C64> {
        (self.beta_coef != 0.0).then(|| self.alpha / self.beta_coef)
    }

    /// Modulus; `f64::INFINITY` for infinite eigenvalues.
    pub fn modulus(&self) -> f64 {
        if self.beta_coef == 0.0 {
            f64::INFINITY
        } else {
            self.alpha.norm() / self.beta_coef
        }
    }

    /// Phase angle of the eigenvalue (0 for infinite ones).
    pub fn phase(&self) -> f64 {
        if self.beta_coef == 0.0 {
            0.0
        } else {
            self.alpha.arg()
        }
    }
}

/// Classify a normalized eigenvalue pair. Both members numerically zero is a
/// regularity violation at this position.
pub fn classify(alpha: C64, beta_coef: f64, tol_unit: f64, tol_inf: f64) -> Result<EigenvalueClass> {
    let scale = alpha.norm().max(beta_coef.abs()).max(1.0);
    if alpha.norm() <= tol_inf * scale && beta_coef.abs() <= tol_inf * scale {
        return Err(Error::DegeneratePair { index: 0 });
    }
    if beta_coef.abs() <= tol_inf * scale {
        return Ok(EigenvalueClass::Infinite);
    }
    let m = alpha.norm() / beta_coef.abs();
    Ok(if (m - 1.0).abs() <= tol_unit {
        EigenvalueClass::UnitRoot
    } else if m < 1.0 {
        EigenvalueClass::Stable
    } else {
        EigenvalueClass::Unstable
    })
}

/// Result of the decomposition: `q * a0 * z = s_mat`, `q * a1 * z = t_mat`,
/// with `q`, `z` unitary and both factors upper triangular.
#[derive(Clone, Debug)]
pub struct QzFactorization {
    pub q: DMatrix<C64>,
    pub z: DMatrix<C64>,
    pub s_mat: DMatrix<C64>,
    pub t_mat: DMatrix<C64>,
    pub eigs: Vec<GeneralizedEigenvalue>,
}

impl QzFactorization {
    pub fn n(&self) -> usize {
        self.s_mat.nrows()
    }

    pub fn count(&self, class: EigenvalueClass) -> usize {
        self.eigs.iter().filter(|e| e.class == class).count()
    }

    pub fn n_stable(&self) -> usize {
        self.count(EigenvalueClass::Stable)
    }
}

// --- complex Givens rotations ---

/// Rotation with real `c >= 0` and complex `s` such that
/// `[c s; -conj(s) c] * [f; g] = [r; 0]`.
fn givens(f: C64, g: C64) -> (f64, C64, C64) {
    let fn2 = f.norm_sqr();
    let gn2 = g.norm_sqr();
    if gn2 == 0.0 {
        return (1.0, C64::new(0.0, 0.0), f);
    }
    if fn2 == 0.0 {
        // s = conj(g)/|g| makes r = |g| real positive.
        let gn = gn2.sqrt();
        return (0.0, g.conj() / gn, C64::new(gn, 0.0));
    }
    let d = (fn2 + gn2).sqrt();
    let fn1 = fn2.sqrt();
    let c = fn1 / d;
    let s = (f / fn1) * (g.conj() / d);
    let r = f * (d / fn1);
    (c, s, r)
}

/// Left rotation on full rows (p, q): row_p' = c*row_p + s*row_q,
/// row_q' = -conj(s)*row_p + c*row_q.
fn left_rot(m: &mut DMatrix<C64>, p: usize, q: usize, c: f64, s: C64) {
    for j in 0..m.ncols() {
        let a = m[(p, j)];
        let b = m[(q, j)];
        m[(p, j)] = a * c + s * b;
        m[(q, j)] = -s.conj() * a + b * c;
    }
}

/// Right rotation on full columns (p, q): col_p' = c*col_p - conj(s)*col_q,
/// col_q' = s*col_p + c*col_q.
///
/// With `(c, s) = givens(m[(i, q)], m[(i, p)])`, entry `(i, p)` becomes zero.
fn right_rot(m: &mut DMatrix<C64>, p: usize, q: usize, c: f64, s: C64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = a * c - s.conj() * b;
        m[(i, q)] = s * a + b * c;
    }
}

fn frob(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Decompose with default options.
pub fn qz_decompose(a0: &DMatrix<f64>, a1: &DMatrix<f64>) -> Result<QzFactorization> {
    qz_decompose_with(a0, a1, &QzOptions::default())
}

/// Decompose the real pencil `(a0, a1)`.
pub fn qz_decompose_with(
    a0: &DMatrix<f64>,
    a1: &DMatrix<f64>,
    opts: &QzOptions,
) -> Result<QzFactorization> {
    let n = a0.nrows();
    if a0.ncols() != n || a1.nrows() != n || a1.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil matrices must be square and equal-sized, got {}x{} and {}x{}",
            a0.nrows(),
            a0.ncols(),
            a1.nrows(),
            a1.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("pencil must have dimension >= 1".into()));
    }
    if a0.iter().chain(a1.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry("pencil matrices must be finite".into()));
    }

    let mut s = DMatrix::from_fn(n, n, |i, j| C64::new(a0[(i, j)], 0.0));
    let mut t = DMatrix::from_fn(n, n, |i, j| C64::new(a1[(i, j)], 0.0));
    let mut q = DMatrix::<C64>::identity(n, n);
    let mut z = DMatrix::<C64>::identity(n, n);

    if frob(&s) == 0.0 && frob(&t) == 0.0 {
        return Err(Error::SingularPencil { index: 0 });
    }

    // Stage 1: QR-triangularize T by left rotations, carried into S and Q.
    for j in 0..n {
        for i in (j + 1..n).rev() {
            if t[(i, j)].norm() == 0.0 {
                continue;
            }
            let (c, sn, r) = givens(t[(i - 1, j)], t[(i, j)]);
            left_rot(&mut t, i - 1, i, c, sn);
            t[(i - 1, j)] = r;
            t[(i, j)] = C64::new(0.0, 0.0);
            left_rot(&mut s, i - 1, i, c, sn);
            left_rot(&mut q, i - 1, i, c, sn);
        }
    }

    // Stage 2: reduce S to upper Hessenberg while keeping T triangular.
    for j in 0..n.saturating_sub(2) {
        for i in ((j + 2)..n).rev() {
            if s[(i, j)].norm() != 0.0 {
                let (c, sn, r) = givens(s[(i - 1, j)], s[(i, j)]);
                left_rot(&mut s, i - 1, i, c, sn);
                s[(i - 1, j)] = r;
                s[(i, j)] = C64::new(0.0, 0.0);
                left_rot(&mut t, i - 1, i, c, sn);
                left_rot(&mut q, i - 1, i, c, sn);
            }
            // Restore the T fill at (i, i-1) by a column rotation.
            if t[(i, i - 1)].norm() != 0.0 {
                let (c, sn, _r) = givens(t[(i, i)], t[(i, i - 1)]);
                right_rot(&mut t, i - 1, i, c, sn);
                t[(i, i - 1)] = C64::new(0.0, 0.0);
                right_rot(&mut s, i - 1, i, c, sn);
                right_rot(&mut z, i - 1, i, c, sn);
            }
        }
    }

    // Stage 3: implicit single-shift QZ iteration on the Hessenberg pair.
    let eps = f64::EPSILON;
    let s_norm = frob(&s).max(f64::MIN_POSITIVE);
    let t_norm = frob(&t).max(f64::MIN_POSITIVE);
    let budget = opts.max_sweeps_factor.max(1) * n;
    let mut sweeps = 0usize;
    let mut stagnation = 0usize;
    let mut last_active = usize::MAX;

    let mut ihi = n - 1;
    'outer: loop {
        // Zero negligible S subdiagonals.
        for i in 1..=ihi {
            let thresh = eps * (s[(i - 1, i - 1)].norm() + s[(i, i)].norm());
            let thresh = if thresh > 0.0 { thresh } else { eps * s_norm };
            if s[(i, i - 1)].norm() <= thresh {
                s[(i, i - 1)] = C64::new(0.0, 0.0);
            }
        }
        // Deflate converged trailing 1x1 blocks.
        while ihi > 0 && s[(ihi, ihi - 1)].norm() == 0.0 {
            ihi -= 1;
        }
        if ihi == 0 {
            break;
        }
        // Active window [ilo, ihi].
        let mut ilo = ihi;
        while ilo > 0 && s[(ilo, ilo - 1)].norm() != 0.0 {
            ilo -= 1;
        }

        if ihi == last_active {
            stagnation += 1;
        } else {
            stagnation = 0;
            last_active = ihi;
        }

        // Deflate an infinite eigenvalue: a zero T diagonal inside the window.
        let mut deflated_infinite = false;
        for j in ilo..=ihi {
            if t[(j, j)].norm() > eps * t_norm {
                continue;
            }
            t[(j, j)] = C64::new(0.0, 0.0);
            if j == ilo {
                // Split the window top: a left rotation zeroing S[ilo+1, ilo]
                // leaves T triangular because row ilo of T has a zero
                // diagonal; position ilo decouples with an infinite pair.
                let (c, sn, r) = givens(s[(ilo, ilo)], s[(ilo + 1, ilo)]);
                left_rot(&mut s, ilo, ilo + 1, c, sn);
                s[(ilo, ilo)] = r;
                s[(ilo + 1, ilo)] = C64::new(0.0, 0.0);
                left_rot(&mut t, ilo, ilo + 1, c, sn);
                t[(ilo, ilo)] = C64::new(0.0, 0.0);
                left_rot(&mut q, ilo, ilo + 1, c, sn);
            } else {
                // Chase the zero down to ihi, then deflate at the bottom.
                // Level jch: a left rotation zeroes T[jch+1, jch+1] (legal:
                // row jch of T has a zero diagonal, so no subdiagonal fill
                // appears in T), leaving zeros at jch and jch+1; the right
                // rotation that removes the S fill at (jch+1, jch-1) mixes T
                // columns (jch-1, jch) and thereby restores a nonzero at the
                // previous level's diagonal.
                for jch in j..=ihi {
                    if jch < ihi {
                        let (c, sn, r) = givens(t[(jch, jch + 1)], t[(jch + 1, jch + 1)]);
                        left_rot(&mut t, jch, jch + 1, c, sn);
                        t[(jch, jch + 1)] = r;
                        t[(jch + 1, jch + 1)] = C64::new(0.0, 0.0);
                        left_rot(&mut s, jch, jch + 1, c, sn);
                        left_rot(&mut q, jch, jch + 1, c, sn);
                        if jch > 0 && s[(jch + 1, jch - 1)].norm() != 0.0 {
                            let (c, sn, _r) = givens(s[(jch + 1, jch)], s[(jch + 1, jch - 1)]);
                            right_rot(&mut s, jch - 1, jch, c, sn);
                            s[(jch + 1, jch - 1)] = C64::new(0.0, 0.0);
                            right_rot(&mut t, jch - 1, jch, c, sn);
                            right_rot(&mut z, jch - 1, jch, c, sn);
                        }
                    } else {
                        // T[ihi, ihi] = 0: zero S[ihi, ihi-1] by a column
                        // rotation (row ihi of T is zero in both columns) and
                        // deflate the infinite eigenvalue at position ihi.
                        let (c, sn, _r) = givens(s[(ihi, ihi)], s[(ihi, ihi - 1)]);
                        right_rot(&mut s, ihi - 1, ihi, c, sn);
                        s[(ihi, ihi - 1)] = C64::new(0.0, 0.0);
                        right_rot(&mut t, ihi - 1, ihi, c, sn);
                        t[(ihi, ihi - 1)] = C64::new(0.0, 0.0);
                        right_rot(&mut z, ihi - 1, ihi, c, sn);
                    }
                }
            }
            deflated_infinite = true;
            break;
        }
        if deflated_infinite {
            continue 'outer;
        }

        if sweeps >= budget {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;

        // Shift: eigenvalue of the trailing 2x2 pencil block closest to the
        // bottom-right eigenvalue; every 10 stagnant sweeps use an
        // exceptional shift to break symmetry.
        let shift = if stagnation > 0 && stagnation % 10 == 0 {
            let mag = (s[(ihi, ihi - 1)].norm() + s[(ihi, ihi)].norm()) / t[(ihi, ihi)].norm();
            C64::new(1.3 * mag + 0.7, 0.4)
        } else {
            let (s11, s12, s21, s22) = (
                s[(ihi - 1, ihi - 1)],
                s[(ihi - 1, ihi)],
                s[(ihi, ihi - 1)],
                s[(ihi, ihi)],
            );
            let (t11, t12, t22) = (t[(ihi - 1, ihi - 1)], t[(ihi - 1, ihi)], t[(ihi, ihi)]);
            // det(S2 - l T2) = l^2 t11 t22 - l (s11 t22 + s22 t11 - s21 t12)
            //                  + s11 s22 - s21 s12
            let a = t11 * t22;
            if a.norm() <= f64::MIN_POSITIVE.sqrt() {
                s22 / t22
            } else {
                let b = -(s11 * t22 + s22 * t11 - s21 * t12);
                let cc = s11 * s22 - s21 * s12;
                let disc = (b * b - a * cc * 4.0).sqrt();
                let r1 = (-b + disc) / (a * 2.0);
                let r2 = (-b - disc) / (a * 2.0);
                let target = s22 / t22;
                if (r1 - target).norm() <= (r2 - target).norm() {
                    r1
                } else {
                    r2
                }
            }
        };

        // Implicit step: rotate rows (ilo, ilo+1) against the first column
        // of S - shift*T (scaled by T[ilo, ilo]), then chase the fills down
        // the window.
        let v1 = s[(ilo, ilo)] - shift * t[(ilo, ilo)];
        let v2 = s[(ilo + 1, ilo)];
        let (c, sn, _r) = givens(v1, v2);
        left_rot(&mut s, ilo, ilo + 1, c, sn);
        left_rot(&mut t, ilo, ilo + 1, c, sn);
        left_rot(&mut q, ilo, ilo + 1, c, sn);

        for k in ilo..ihi {
            // Restore T triangularity at (k+1, k).
            if t[(k + 1, k)].norm() != 0.0 {
                let (c, sn, _r) = givens(t[(k + 1, k + 1)], t[(k + 1, k)]);
                right_rot(&mut t, k, k + 1, c, sn);
                t[(k + 1, k)] = C64::new(0.0, 0.0);
                right_rot(&mut s, k, k + 1, c, sn);
                right_rot(&mut z, k, k + 1, c, sn);
            }
            // Chase the S bulge at (k+2, k).
            if k + 2 <= ihi && s[(k + 2, k)].norm() != 0.0 {
                let (c, sn, r) = givens(s[(k + 1, k)], s[(k + 2, k)]);
                left_rot(&mut s, k + 1, k + 2, c, sn);
                s[(k + 1, k)] = r;
                s[(k + 2, k)] = C64::new(0.0, 0.0);
                left_rot(&mut t, k + 1, k + 2, c, sn);
                left_rot(&mut q, k + 1, k + 2, c, sn);
            }
        }
    }

    normalize_t_phases(&mut s, &mut t, &mut q, 0, n);
    let eigs = extract_eigs(&s, &t, opts)?;
    Ok(QzFactorization {
        q,
        z,
        s_mat: s,
        t_mat: t,
        eigs,
    })
}

/// Rotate rows so the T diagonal is real and non-negative in `lo..hi`.
fn normalize_t_phases(
    s: &mut DMatrix<C64>,
    t: &mut DMatrix<C64>,
    q: &mut DMatrix<C64>,
    lo: usize,
    hi: usize,
) {
    let n = s.nrows();
    for i in lo..hi {
        let d = t[(i, i)];
        if d.norm() == 0.0 || (d.im == 0.0 && d.re >= 0.0) {
            continue;
        }
        let phase = (d / d.norm()).conj();
        for j in 0..n {
            s[(i, j)] *= phase;
            t[(i, j)] *= phase;
            q[(i, j)] *= phase;
        }
        t[(i, i)] = C64::new(t[(i, i)].re, 0.0);
    }
}

fn extract_eigs(
    s: &DMatrix<C64>,
    t: &DMatrix<C64>,
    opts: &QzOptions,
) -> Result<Vec<GeneralizedEigenvalue>> {
    let n = s.nrows();
    let pencil_scale = frob(s).max(frob(t)).max(f64::MIN_POSITIVE);
    let mut eigs = Vec::with_capacity(n);
    for i in 0..n {
        let si = s[(i, i)];
        let ti = t[(i, i)];
        if si.norm() <= opts.tol_inf * pencil_scale && ti.norm() <= opts.tol_inf * pencil_scale {
            return Err(Error::SingularPencil { index: i });
        }
        let (alpha, beta_coef) = if ti.norm() <= opts.tol_inf * pencil_scale {
            (si / si.norm(), 0.0)
        } else {
            (si / ti, 1.0)
        };
        let class = classify(alpha, beta_coef, opts.tol_unit, opts.tol_inf)
            .map_err(|_| Error::SingularPencil { index: i })?;
        eigs.push(GeneralizedEigenvalue {
            alpha,
            beta_coef,
            class,
        });
    }
    Ok(eigs)
}

// --- reordering ---

/// Sort key: stable eigenvalues first; within each group ascending modulus,
/// ties broken by ascending phase. Infinite eigenvalues sort last.
fn order_key(e: &GeneralizedEigenvalue) -> (u8, f64, f64) {
    let group = match e.class {
        EigenvalueClass::Stable => 0u8,
        _ => 1u8,
    };
    (group, e.modulus(), e.phase())
}

fn key_less(a: &GeneralizedEigenvalue, b: &GeneralizedEigenvalue) -> bool {
    let (ga, ma, pa) = order_key(a);
    let (gb, mb, pb) = order_key(b);
    (ga, ma, pa) < (gb, mb, pb)
}

/// Return a factorization with stable eigenvalues moved to the leading
/// diagonal positions (and each group sorted by ascending modulus then
/// phase, for deterministic output), via adjacent 1x1 swaps.
///
/// Each swap is verified: the eliminated subdiagonal entries and the change
/// in the two eigenvalue rays must stay below `opts.swap_tol` (relative),
/// else [`Error::SwapIllConditioned`] is returned.
pub fn reorder_stable_first(f: &QzFactorization, opts: &QzOptions) -> Result<QzFactorization> {
    let mut out = f.clone();
    let n = out.n();
    // Insertion sort with adjacent swaps (stable, minimal moves).
    for target in 1..n {
        let mut k = target;
        while k > 0 && key_less(&out.eigs[k], &out.eigs[k - 1]) {
            swap_adjacent(&mut out, k - 1, opts)?;
            k -= 1;
        }
    }
    Ok(out)
}

/// Move the selected diagonal positions to the front (preserving their
/// relative order) with verified adjacent swaps. `selected` must have one
/// flag per diagonal position.
pub(crate) fn move_columns_front(
    f: &QzFactorization,
    selected: &[bool],
    opts: &QzOptions,
) -> Result<QzFactorization> {
    let n = f.n();
    assert_eq!(selected.len(), n, "selection mask length must equal n");
    let mut out = f.clone();
    let mut sel = selected.to_vec();
    let mut target = 0usize;
    for pos in 0..n {
        if sel[pos] {
            let mut k = pos;
            while k > target {
                swap_adjacent(&mut out, k - 1, opts)?;
                sel.swap(k - 1, k);
                k -= 1;
            }
            target += 1;
        }
    }
    Ok(out)
}

/// Chordal distance between homogeneous rays (a1:b1) and (a2:b2); scale-free
/// measure that treats infinite eigenvalues uniformly.
fn ray_distance(a1: C64, b1: C64, a2: C64, b2: C64) -> f64 {
    let num = (a1 * b2 - a2 * b1).norm();
    let d1 = (a1.norm_sqr() + b1.norm_sqr()).sqrt();
    let d2 = (a2.norm_sqr() + b2.norm_sqr()).sqrt();
    if d1 == 0.0 || d2 == 0.0 {
        return f64::INFINITY;
    }
    num / (d1 * d2)
}

/// Swap the eigenvalues at diagonal positions (k, k+1) of the triangular
/// pair, updating S, T, Q, Z and the eigenvalue list.
fn swap_adjacent(f: &mut QzFactorization, k: usize, opts: &QzOptions) -> Result<()> {
    let n = f.n();
    let (s11, s12, s22) = (f.s_mat[(k, k)], f.s_mat[(k, k + 1)], f.s_mat[(k + 1, k + 1)]);
    let (t11, t12, t22) = (f.t_mat[(k, k)], f.t_mat[(k, k + 1)], f.t_mat[(k + 1, k + 1)]);
    let block_scale = [s11, s12, s22, t11, t12, t22]
        .iter()
        .map(|x| x.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    // Eigenvector of the trailing ray (a2:b2) = (s22:t22) within the block:
    // x = [q, -p] with p = t22*s11 - s22*t11, q = t22*s12 - s22*t12 satisfies
    // (t22*Sblk - s22*Tblk) x = 0.
    let p = t22 * s11 - s22 * t11;
    let qv = t22 * s12 - s22 * t12;
    let x = [qv, -p];
    let xn = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    if xn <= f64::MIN_POSITIVE.sqrt() * block_scale {
        // Rays numerically identical: swapping is a no-op on values; just
        // exchange bookkeeping.
        f.eigs.swap(k, k + 1);
        return Ok(());
    }
    let x = [x[0] / xn, x[1] / xn];

    // Right 2x2 unitary V with first column x; S*V and T*V get parallel
    // first columns u within the block.
    let v = [[x[0], -x[1].conj()], [x[1], x[0].conj()]];
    apply_right_2x2(&mut f.s_mat, k, &v, 0, n);
    apply_right_2x2(&mut f.t_mat, k, &v, 0, n);
    apply_right_2x2(&mut f.z, k, &v, 0, n);

    // Left rotation aligning the (now parallel) first columns with e1: pick
    // the longer of the two candidate columns for numerical safety.
    let us = [f.s_mat[(k, k)], f.s_mat[(k + 1, k)]];
    let ut = [f.t_mat[(k, k)], f.t_mat[(k + 1, k)]];
    let u = if (ut[0].norm_sqr() + ut[1].norm_sqr()) >= (us[0].norm_sqr() + us[1].norm_sqr()) {
        ut
    } else {
        us
    };
    let un = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt().max(f64::MIN_POSITIVE);
    let w = [
        [u[0].conj() / un, u[1].conj() / un],
        [-u[1] / un, u[0] / un],
    ];
    apply_left_2x2(&mut f.s_mat, k, &w, 0, n);
    apply_left_2x2(&mut f.t_mat, k, &w, 0, n);
    apply_left_2x2(&mut f.q, k, &w, 0, n);

    // Both subdiagonal entries must now be negligible.
    let res_s = f.s_mat[(k + 1, k)].norm();
    let res_t = f.t_mat[(k + 1, k)].norm();
    let residual = res_s.max(res_t) / block_scale;
    if residual > opts.swap_tol {
        return Err(Error::SwapIllConditioned { index: k, residual });
    }
    f.s_mat[(k + 1, k)] = C64::new(0.0, 0.0);
    f.t_mat[(k + 1, k)] = C64::new(0.0, 0.0);
    normalize_t_phases(&mut f.s_mat, &mut f.t_mat, &mut f.q, k, k + 2);

    // The diagonal rays must have exchanged places (to swap_tol).
    let d_lead = ray_distance(f.s_mat[(k, k)], f.t_mat[(k, k)], s22, t22);
    let d_trail = ray_distance(f.s_mat[(k + 1, k + 1)], f.t_mat[(k + 1, k + 1)], s11, t11);
    let drift = d_lead.max(d_trail);
    if drift > opts.swap_tol {
        return Err(Error::SwapIllConditioned { index: k, residual: drift });
    }
    f.eigs.swap(k, k + 1);
    Ok(())
}

/// Right-multiply columns (k, k+1), rows `lo..hi`, by the 2x2 matrix `v`.
fn apply_right_2x2(m: &mut DMatrix<C64>, k: usize, v: &[[C64; 2]; 2], lo: usize, hi: usize) {
    for i in lo..hi {
        let a = m[(i, k)];
        let b = m[(i, k + 1)];
        m[(i, k)] = a * v[0][0] + b * v[1][0];
        m[(i, k + 1)] = a * v[0][1] + b * v[1][1];
    }
}

/// Left-multiply rows (k, k+1), columns `lo..hi`, by the 2x2 matrix `w`.
fn apply_left_2x2(m: &mut DMatrix<C64>, k: usize, w: &[[C64; 2]; 2], lo: usize, hi: usize) {
    for j in lo..hi {
        let a = m[(k, j)];
        let b = m[(k + 1, j)];
        m[(k, j)] = w[0][0] * a + w[0][1] * b;
        m[(k + 1, j)] = w[1][0] * a + w[1][1] * b;
    }
}

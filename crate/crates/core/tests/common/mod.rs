//! Solver-independent oracles shared by integration tests.
//!
//! Nothing here touches the crate's own decomposition or selection code:
//! pencil eigenvalues come from the characteristic polynomial (determinant
//! evaluation + Vandermonde fit + companion matrix), and the three-equation
//! monetary model is handled by closed-form algebra. These are the reference
//! answers the implementation is tested against.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

/// Finite eigenvalues and infinite-eigenvalue count of the pencil
/// `det(A0 - lambda * A1) = 0`, computed without any QZ machinery.
///
/// The characteristic polynomial is fitted by evaluating the determinant at
/// `n + 1` Chebyshev-spaced sample points and solving the Vandermonde system;
/// its degree deficiency counts infinite eigenvalues and its companion matrix
/// supplies the finite roots.
pub fn pencil_roots_oracle(a0: &DMatrix<f64>, a1: &DMatrix<f64>) -> (Vec<C64>, usize) {
    let n = a0.nrows();
    assert_eq!(a0.ncols(), n);
    assert_eq!(a1.shape(), (n, n));
    if n == 0 {
        return (Vec::new(), 0);
    }

    // Sample points: Chebyshev nodes scaled to [-3, 3] keep the Vandermonde
    // system well conditioned for the small sizes used in tests.
    let m = n + 1;
    let points: Vec<f64> = (0..m)
        .map(|j| 3.0 * (std::f64::consts::PI * (2.0 * j as f64 + 1.0) / (2.0 * m as f64)).cos())
        .collect();

    let mut vander = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DMatrix::<f64>::zeros(m, 1);
    for (row, &x) in points.iter().enumerate() {
        let mut pw = 1.0;
        for col in 0..m {
            vander[(row, col)] = pw;
            pw *= x;
        }
        let pencil = a0 - a1 * x;
        rhs[(row, 0)] = pencil.lu().determinant();
    }
    let coeffs = vander
        .lu()
        .solve(&rhs)
        .expect("Vandermonde system must be invertible for distinct sample points");
    let coeffs: Vec<f64> = (0..m).map(|i| coeffs[(i, 0)]).collect();

    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if scale == 0.0 {
        // det(A0 - x A1) identically zero: singular pencil. Callers that need
        // to distinguish this should test for it separately.
        return (Vec::new(), n);
    }
    let mut degree = 0usize;
    for (i, c) in coeffs.iter().enumerate() {
        if c.abs() > 1e-9 * scale {
            degree = i;
        }
    }
    let n_infinite = n - degree;
    if degree == 0 {
        return (Vec::new(), n_infinite);
    }

    // Companion matrix of the monic polynomial.
    let lead = coeffs[degree];
    let mut comp = DMatrix::<f64>::zeros(degree, degree);
    for i in 0..degree {
        comp[(i, degree - 1)] = -coeffs[i] / lead;
        if i + 1 < degree {
            comp[(i + 1, i)] = 1.0;
        }
    }
    let eig = comp.complex_eigenvalues();
    let roots: Vec<C64> = eig.iter().cloned().collect();
    (roots, n_infinite)
}

/// Sort complex values by (modulus, phase) so root multisets can be compared.
pub fn sort_by_modulus(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| {
        (a.norm(), a.arg())
            .partial_cmp(&(b.norm(), b.arg()))
            .unwrap()
    });
    v
}

/// Assert two root multisets agree to a relative tolerance, using greedy
/// nearest-neighbour pairing (robust against ordering ties between
/// conjugate partners, where sorting by modulus is unstable).
pub fn assert_roots_match(got: &[C64], want: &[C64], rel_tol: f64) {
    assert_eq!(got.len(), want.len(), "root count mismatch");
    let mut unmatched: Vec<C64> = got.to_vec();
    for w in want {
        let scale = w.norm().max(1.0);
        let (best, dist) = unmatched
            .iter()
            .enumerate()
            .map(|(i, g)| (i, (g - w).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("non-empty candidate set");
        assert!(
            dist <= rel_tol * scale,
            "root mismatch: want {w}, nearest got {} (dist {dist:.2e}, tol {rel_tol:.1e})",
            unmatched[best]
        );
        unmatched.swap_remove(best);
    }
}

/// Calibration of the three-equation monetary model. Mirrors the library's
/// parameter struct but is kept separate so the oracle stays independent.
#[derive(Clone, Copy, Debug)]
pub struct NkCalib {
    pub sigma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub phi_pi: f64,
    pub phi_y: f64,
    pub rho: f64,
}

impl Default for NkCalib {
    fn default() -> Self {
        NkCalib {
            sigma: 1.0,
            beta: 0.99,
            kappa: 0.02,
            phi_pi: 1.5,
            phi_y: 0.0,
            rho: 0.9,
        }
    }
}

impl NkCalib {
    pub fn with_phi_pi(phi_pi: f64) -> Self {
        NkCalib {
            phi_pi,
            ..Default::default()
        }
    }
}

/// Roots of the forward-looking (output, inflation) block:
/// beta*l^2 - [beta*(1 + phi_y/sigma) + 1 + kappa/sigma]*l
///          + (1 + phi_y/sigma) + kappa*phi_pi/sigma = 0.
///
/// Derived by substituting the policy rule into the Euler equation and
/// eliminating expectations with j_t = v * l^t trial solutions.
pub fn nk_block_roots(p: &NkCalib) -> (C64, C64) {
    let a = p.beta;
    let b = -(p.beta * (1.0 + p.phi_y / p.sigma) + 1.0 + p.kappa / p.sigma);
    let c = (1.0 + p.phi_y / p.sigma) + p.kappa * p.phi_pi / p.sigma;
    let disc = C64::new(b * b - 4.0 * a * c, 0.0);
    let sq = disc.sqrt();
    let r1 = (C64::new(-b, 0.0) + sq) / C64::new(2.0 * a, 0.0);
    let r2 = (C64::new(-b, 0.0) - sq) / C64::new(2.0 * a, 0.0);
    (r1, r2)
}

/// All three finite transition roots of the canonical 3-variable model:
/// the shock-persistence root rho plus the block pair.
pub fn nk_all_roots(p: &NkCalib) -> Vec<C64> {
    let (r1, r2) = nk_block_roots(p);
    vec![C64::new(p.rho, 0.0), r1, r2]
}

/// Closed-form classification of the 3-variable model with one predetermined
/// variable. `None` means a root sits inside the unit band (boundary case).
pub fn nk_classification(p: &NkCalib, tol_unit: f64) -> Option<NkClass> {
    let roots = nk_all_roots(p);
    let mut stable = 0usize;
    for r in &roots {
        let m = r.norm();
        if (m - 1.0).abs() <= tol_unit {
            return None;
        }
        if m < 1.0 {
            stable += 1;
        }
    }
    Some(match stable.cmp(&1) {
        std::cmp::Ordering::Equal => NkClass::Determinate,
        std::cmp::Ordering::Greater => NkClass::Indeterminate(stable - 1),
        std::cmp::Ordering::Less => NkClass::NoStableSolution,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NkClass {
    Determinate,
    Indeterminate(usize),
    NoStableSolution,
}

/// Closed-form policy coefficients (p_y, p_pi) of the fundamental solution
/// j_t = p * rn_t: from the Phillips curve p_pi = kappa*p_y/(1 - beta*rho),
/// and the Euler equation pins p_y.
pub fn nk_policy_closed_form(p: &NkCalib) -> (f64, f64) {
    let a = 1.0 - p.beta * p.rho;
    assert!(a.abs() > 1e-12, "closed form needs 1 - beta*rho != 0");
    let denom =
        (1.0 - p.rho + p.phi_y / p.sigma) + p.kappa * (p.phi_pi - p.rho) / (p.sigma * a);
    assert!(denom.abs() > 1e-12, "closed form needs a nonzero slope denominator");
    let p_y = (1.0 / p.sigma) / denom;
    let p_pi = p.kappa * p_y / a;
    (p_y, p_pi)
}

/// Stationary variance of the scalar AR(1) s_{t+1} = r s_t + q e_{t+1},
/// Var(e) = v: v * q^2 / (1 - r^2).
pub fn ar1_variance(r: f64, q: f64, v: f64) -> f64 {
    assert!(r.abs() < 1.0);
    v * q * q / (1.0 - r * r)
}

/// Build a dense matrix from rows (test convenience).
pub fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
    let nr = rows.len();
    let nc = if nr > 0 { rows[0].len() } else { 0 };
    DMatrix::from_row_slice(nr, nc, &rows.concat())
}

// --- planted-root model generator ---

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random real orthogonal matrix via QR of a square matrix with uniform
/// entries.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let raw = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let qr = raw.qr();
    qr.q()
}

/// Real matrix with planted eigenvalues: orthogonal conjugation of a
/// block-diagonal carrier (1x1 real roots, 2x2 rotation blocks for
/// conjugate pairs), all moduli drawn from `lo..hi`.
pub fn planted_square(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::zeros(n, n);
    let mut at = 0usize;
    while at < n {
        let modulus = rng.random_range(lo..hi);
        if at + 1 < n && rng.random_range(0.0..1.0) < 0.35 {
            let theta: f64 = rng.random_range(0.3..2.8);
            let (a, b) = (modulus * theta.cos(), modulus * theta.sin());
            d.view_mut((at, at), (2, 2))
                .copy_from(&DMatrix::from_row_slice(2, 2, &[a, b, -b, a]));
            at += 2;
        } else {
            let sign = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { -1.0 };
            d[(at, at)] = sign * modulus;
            at += 1;
        }
    }
    let o = random_orthogonal(rng, n);
    &o * d * o.transpose()
}

/// Well-posed model with planted transition roots: realized evolution rows
/// `s_{t+1} = Ds s_t + Bs eps_{t+1}` (stable Ds) and forward-looking rows
/// `Cs s_t + Du j_t = Ca E[s_{t+1}] + E[j_{t+1}] + Bj eps_t` (unstable Du).
/// The pencil is block-triangular in the (state, jump) column split, so its
/// roots are exactly eig(Ds) and eig(Du): determinate by construction.
pub fn planted_model(rng: &mut ChaCha8Rng, n_s: usize, n_j: usize) -> dsge_select::LinearREModel {
    let n = n_s + n_j;
    let ds = planted_square(rng, n_s, 0.2, 0.85);
    let du = planted_square(rng, n_j, 1.15, 3.0);
    let cs = DMatrix::<f64>::from_fn(n_j, n_s, |_, _| rng.random_range(-1.0..1.0));
    let ca = DMatrix::<f64>::from_fn(n_j, n_s, |_, _| rng.random_range(-1.0..1.0));

    let mut a0 = DMatrix::<f64>::zeros(n, n);
    let mut a1 = DMatrix::<f64>::zeros(n, n);
    a0.view_mut((0, 0), (n_s, n_s)).copy_from(&ds);
    for i in 0..n_s {
        a1[(i, i)] = 1.0;
    }
    a0.view_mut((n_s, 0), (n_j, n_s)).copy_from(&cs);
    a0.view_mut((n_s, n_s), (n_j, n_j)).copy_from(&du);
    a1.view_mut((n_s, 0), (n_j, n_s)).copy_from(&ca);
    for i in 0..n_j {
        a1[(n_s + i, n_s + i)] = 1.0;
    }

    let b = DMatrix::<f64>::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
    let c = DVector::<f64>::zeros(n);
    let names = (0..n).map(|i| format!("x{i}")).collect();
    dsge_select::new_model(
        names,
        vec!["e".to_string()],
        n_s,
        a0,
        a1,
        b,
        c,
        std::collections::BTreeMap::new(),
    )
    .unwrap()
}

// --- factorization invariant helpers ---

use dsge_select::QzFactorization;

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

pub fn frob(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn unitary_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let prod = m * m.adjoint();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            d = d.max((prod[(i, j)] - want).norm());
        }
    }
    d
}

/// Unitarity to 1e-12, reconstruction to 1e-10 * ||A||_F, triangularity.
pub fn assert_factorization_invariants(
    a0: &DMatrix<f64>,
    a1: &DMatrix<f64>,
    f: &QzFactorization,
) {
    assert!(
        unitary_defect(&f.q) < 1e-12,
        "Q unitary defect {}",
        unitary_defect(&f.q)
    );
    assert!(
        unitary_defect(&f.z) < 1e-12,
        "Z unitary defect {}",
        unitary_defect(&f.z)
    );
    let r0 = &f.q * to_complex(a0) * &f.z - &f.s_mat;
    let r1 = &f.q * to_complex(a1) * &f.z - &f.t_mat;
    assert!(
        frob(&r0) <= 1e-10 * frob(&to_complex(a0)).max(1.0),
        "A0 reconstruction residual {}",
        frob(&r0)
    );
    assert!(
        frob(&r1) <= 1e-10 * frob(&to_complex(a1)).max(1.0),
        "A1 reconstruction residual {}",
        frob(&r1)
    );
    for i in 0..f.n() {
        for j in 0..i {
            assert_eq!(f.s_mat[(i, j)], C64::new(0.0, 0.0));
            assert_eq!(f.t_mat[(i, j)], C64::new(0.0, 0.0));
        }
    }
}

pub fn finite_values(f: &QzFactorization) -> Vec<C64> {
    f.eigs.iter().filter_map(|e| e.value()).collect()
}

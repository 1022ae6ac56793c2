//! Cross-validation of the QZ decomposition against the characteristic-
//! polynomial oracle, plus factorization invariants on a seeded random
//! pencil population.

mod common;

use common::{
    assert_factorization_invariants, assert_roots_match, finite_values, pencil_roots_oracle,
    sort_by_modulus, NkCalib,
};
use dsge_select::{
    nk_model, nk_model_with_rate, qz_decompose, reorder_stable_first, EigenvalueClass, NKParams,
    QzOptions,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn two_hundred_random_pencils_match_the_polynomial_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut checked = 0usize;
    let mut with_infinite = 0usize;
    while checked < 200 {
        let n: usize = rng.random_range(1..=8);
        let a0 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let mut a1 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        // Every third pencil: zero a column of A1 (a static variable), which
        // plants at least one structural infinite eigenvalue.
        if checked % 3 == 0 && n >= 2 {
            let col = rng.random_range(0..n);
            for i in 0..n {
                a1[(i, col)] = 0.0;
            }
            // Every second such pencil additionally gets a zero A1 row.
            if checked % 6 == 0 {
                let row = rng.random_range(0..n);
                for j in 0..n {
                    a1[(row, j)] = 0.0;
                }
            }
        }
        // Keep clearly regular pencils only; the oracle itself flags the
        // degenerate ones.
        let (oracle_roots, oracle_infinite) = pencil_roots_oracle(&a0, &a1);
        if oracle_roots.len() + oracle_infinite != n {
            continue;
        }
        // Skip accidentally near-unit-circle roots only if they would make
        // class counting ambiguous; value comparison below is unaffected.
        let f = qz_decompose(&a0, &a1)
            .unwrap_or_else(|e| panic!("decomposition failed on pencil {checked}: {e}"));
        assert_factorization_invariants(&a0, &a1, &f);
        assert_eq!(
            f.count(EigenvalueClass::Infinite),
            oracle_infinite,
            "infinite count mismatch on pencil {checked}"
        );
        assert_roots_match(&finite_values(&f), &oracle_roots, 1e-6);
        if oracle_infinite > 0 {
            with_infinite += 1;
        }
        checked += 1;
    }
    assert!(checked == 200);
    assert!(
        with_infinite >= 40,
        "population must include singular-A1 pencils, got {with_infinite}"
    );
}

#[test]
fn reordering_preserves_the_eigenvalue_multiset() {
    let opts = QzOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut checked = 0usize;
    while checked < 40 {
        let n: usize = rng.random_range(2..=8);
        let a0 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let mut a1 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        if checked % 4 == 0 {
            let col = rng.random_range(0..n);
            for i in 0..n {
                a1[(i, col)] = 0.0;
            }
        }
        let f = match qz_decompose(&a0, &a1) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let g = reorder_stable_first(&f, &opts).unwrap();
        assert_factorization_invariants(&a0, &a1, &g);

        // Partition: all stable eigenvalues lead.
        let k = g.n_stable();
        for (i, e) in g.eigs.iter().enumerate() {
            if i < k {
                assert_eq!(e.class, EigenvalueClass::Stable);
            } else {
                assert_ne!(e.class, EigenvalueClass::Stable);
            }
        }
        assert_eq!(g.n_stable(), f.n_stable());
        assert_eq!(
            g.count(EigenvalueClass::Infinite),
            f.count(EigenvalueClass::Infinite)
        );

        // Finite-value multiset preserved to 1e-8.
        let before = sort_by_modulus(finite_values(&f));
        let after = sort_by_modulus(finite_values(&g));
        assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(after.iter()) {
            assert!(
                (b - a).norm() <= 1e-8 * b.norm().max(1.0),
                "multiset drift: {b} vs {a}"
            );
        }

        // Reordered diagonals still reproduce the recorded eigenvalues.
        for (i, e) in g.eigs.iter().enumerate() {
            let (si, ti) = (g.s_mat[(i, i)], g.t_mat[(i, i)]);
            match e.value() {
                Some(v) => {
                    assert!(ti.norm() > 0.0);
                    assert!(((si / ti) - v).norm() <= 1e-7 * v.norm().max(1.0));
                }
                None => {
                    let scale = si.norm().max(ti.norm()).max(f64::MIN_POSITIVE);
                    assert!(ti.norm() <= 1e-7 * scale, "infinite entry has T diag {ti}");
                }
            }
        }
        checked += 1;
    }
}

#[test]
fn monetary_model_pencil_roots_match_the_closed_form() {
    for phi_pi in [0.3, 0.8, 1.5, 2.5] {
        let params = NKParams {
            phi_pi,
            ..NKParams::default()
        };
        let model = nk_model(&params).unwrap();
        let f = qz_decompose(model.a0(), model.a1()).unwrap();
        assert_factorization_invariants(model.a0(), model.a1(), &f);
        assert_eq!(f.count(EigenvalueClass::Infinite), 0);

        let calib = NkCalib {
            phi_pi,
            ..NkCalib::default()
        };
        assert_roots_match(&finite_values(&f), &common::nk_all_roots(&calib), 1e-9);

        // Same pencil against the polynomial oracle.
        let (oracle_roots, oracle_inf) = pencil_roots_oracle(model.a0(), model.a1());
        assert_eq!(oracle_inf, 0);
        assert_roots_match(&finite_values(&f), &oracle_roots, 1e-6);
    }
}

#[test]
fn rate_augmented_model_has_one_infinite_eigenvalue() {
    let params = NKParams::default();
    let model = nk_model_with_rate(&params).unwrap();
    let f = qz_decompose(model.a0(), model.a1()).unwrap();
    assert_factorization_invariants(model.a0(), model.a1(), &f);
    assert_eq!(f.count(EigenvalueClass::Infinite), 1);

    // The three finite roots are those of the three-variable model.
    let calib = NkCalib::default();
    assert_roots_match(&finite_values(&f), &common::nk_all_roots(&calib), 1e-9);
}

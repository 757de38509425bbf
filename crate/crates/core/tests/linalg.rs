mod common;

use proptest::prelude::*;
use signcov::linalg::{frobenius_sq_distance, kron_vec, norm, spatial_sign, Matrix, SignOuter};

fn vec_strategy(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, p)
}

fn dense_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

/// Γ(v) = s(v)s(v)ᵀ.
fn gamma(v: &[f64]) -> Matrix {
    SignOuter::new(v).unwrap().outer()
}

proptest! {
    #[test]
    fn sign_has_unit_or_zero_norm(x in vec_strategy(4)) {
        let s = spatial_sign(&x).unwrap();
        let n = norm(&s);
        prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
        prop_assert_eq!(n == 0.0, x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sign_is_scale_invariant(x in vec_strategy(3), c in 1e-6f64..1e6) {
        let a = spatial_sign(&x).unwrap();
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let b = spatial_sign(&cx).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_is_orthogonally_equivariant(x in vec_strategy(3), seed in any::<u64>()) {
        let q = common::random_orthogonal(&mut common::rng(seed), 3);
        let lhs = spatial_sign(&q.matvec(&x).unwrap()).unwrap();
        let rhs = q.matvec(&spatial_sign(&x).unwrap()).unwrap();
        for (u, v) in lhs.iter().zip(&rhs) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn sign_outer_trace_is_zero_or_one(x in vec_strategy(5)) {
        let t = SignOuter::new(&x).unwrap().outer().trace();
        prop_assert!(t == 0.0 || (t - 1.0).abs() < 1e-12);
    }
}

#[test]
fn tiny_vectors_keep_unit_signs() {
    let s = spatial_sign(&[1e-300, -1e-300]).unwrap();
    assert!((norm(&s) - 1.0).abs() < 1e-15);
    let s = spatial_sign(&[f64::MIN_POSITIVE * 1e-10, 0.0]).unwrap();
    assert_eq!(s, vec![1.0, 0.0]);
    let s = spatial_sign(&[1e300, 1e300]).unwrap();
    assert!((s[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
}

#[test]
fn vec_of_outer_is_kron() {
    let mut rng = common::rng(11);
    for p in 1..5 {
        let x = common::gaussian_matrix(&mut rng, p, 1).as_slice().to_vec();
        let y = common::gaussian_matrix(&mut rng, p, 1).as_slice().to_vec();
        assert_eq!(Matrix::outer(&x, &y).vec(), kron_vec(&y, &x));
    }
}

#[test]
fn vec_abc_identity() {
    let mut rng = common::rng(12);
    for p in [2, 3] {
        for _ in 0..20 {
            let a = common::gaussian_matrix(&mut rng, p, p);
            let b = common::gaussian_matrix(&mut rng, p, p);
            let c = common::gaussian_matrix(&mut rng, p, p);
            let lhs = a.matmul(&b).unwrap().matmul(&c).unwrap().vec();
            let rhs = c.transpose().kron(&a).matvec(&b.vec()).unwrap();
            for (u, v) in lhs.iter().zip(&rhs) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn kron_mixed_product_against_dense_oracle() {
    let mut rng = common::rng(13);
    for _ in 0..20 {
        let m: Vec<Matrix> = (0..4).map(|_| common::gaussian_matrix(&mut rng, 2, 2)).collect();
        let lhs = dense_matmul(&m[0].kron(&m[1]), &m[2].kron(&m[3]));
        let rhs = dense_matmul(&m[0], &m[2]).kron(&dense_matmul(&m[1], &m[3]));
        assert!(common::max_abs_diff(&lhs, &rhs) < 1e-12);
        // and the library product agrees with the dense one
        let lib = m[0].kron(&m[1]).matmul(&m[2].kron(&m[3])).unwrap();
        assert!(common::max_abs_diff(&lib, &lhs) < 1e-12);
    }
}

#[test]
fn frobenius_distance_matches_vec_distance() {
    let mut rng = common::rng(14);
    let a = common::gaussian_matrix(&mut rng, 3, 3);
    let b = common::gaussian_matrix(&mut rng, 3, 3);
    let d: f64 = a.vec().iter().zip(b.vec()).map(|(u, v)| (u - v) * (u - v)).sum();
    assert!((frobenius_sq_distance(&a, &b).unwrap() - d).abs() < 1e-12);
    for p in 1..6 {
        let u = spatial_sign(common::gaussian_matrix(&mut rng, p, 1).as_slice()).unwrap();
        let target = Matrix::identity(p).scale(1.0 / p as f64);
        let got = frobenius_sq_distance(&Matrix::outer(&u, &u), &target).unwrap();
        assert!((got - (1.0 - 1.0 / p as f64)).abs() < 1e-12);
    }
}

#[test]
fn sign_outer_identity_for_shifted_argument() {
    // Γ(x−t) = Γ(x) + |x|⁻²(ttᵀ − xtᵀ − txᵀ) + ((2xᵀt − tᵀt)/|x|²)·Γ(x−t)
    let mut rng = common::rng(15);
    for p in [2, 3, 5] {
        for _ in 0..200 {
            let x = common::gaussian_matrix(&mut rng, p, 1).as_slice().to_vec();
            let t = common::gaussian_matrix(&mut rng, p, 1).scale(0.7).as_slice().to_vec();
            let d: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a - b).collect();
            let x2: f64 = x.iter().map(|v| v * v).sum();
            let xt: f64 = x.iter().zip(&t).map(|(a, b)| a * b).sum();
            let tt: f64 = t.iter().map(|v| v * v).sum();
            let cross = Matrix::outer(&t, &t)
                .sub(&Matrix::outer(&x, &t))
                .unwrap()
                .sub(&Matrix::outer(&t, &x))
                .unwrap()
                .scale(1.0 / x2);
            let rhs = gamma(&x)
                .add(&cross)
                .unwrap()
                .add(&gamma(&d).scale((2.0 * xt - tt) / x2))
                .unwrap();
            let residual = frobenius_sq_distance(&gamma(&d), &rhs).unwrap().sqrt();
            assert!(residual <= 1e-9, "residual {residual}");
        }
    }
}

#[test]
fn eigen_and_cholesky_reconstruct() {
    let mut rng = common::rng(16);
    for p in [1, 2, 4, 7] {
        let g = common::gaussian_matrix(&mut rng, p, p);
        let spd = g.matmul(&g.transpose()).unwrap().add(&Matrix::identity(p)).unwrap();
        let (vals, vecs) = spd.symmetric_eigen().unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = common::conj(&vecs, &Matrix::diag(&vals));
        assert!(common::max_abs_diff(&rebuilt, &spd) < 1e-10);
        let l = spd.cholesky().unwrap();
        assert!(common::max_abs_diff(&l.matmul(&l.transpose()).unwrap(), &spd) < 1e-10);
    }
    assert!(Matrix::diag(&[1.0, -1.0]).cholesky().is_err());
}

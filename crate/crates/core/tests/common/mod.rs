#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use signcov::linalg::{Matrix, Observations};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_obs(rng: &mut impl Rng, n: usize, p: usize) -> Observations {
    let data = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    Observations::from_row_major(n, p, data).unwrap()
}

/// Orthogonal matrix from Gram–Schmidt on the columns of `m`.
pub fn orthonormalize(m: &Matrix) -> Matrix {
    let p = m.rows();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut v: Vec<f64> = (0..p).map(|i| m.get(i, j)).collect();
        for q in &cols {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        cols.push(v);
    }
    Matrix::from_fn(p, p, |i, j| cols[j][i])
}

pub fn random_orthogonal(rng: &mut impl Rng, p: usize) -> Matrix {
    orthonormalize(&gaussian_matrix(rng, p, p))
}

/// Rows `x ↦ Q x + b`.
pub fn transform(x: &Observations, q: &Matrix, b: &[f64]) -> Observations {
    x.map_rows(|r| {
        q.matvec(r)
            .unwrap()
            .iter()
            .zip(b)
            .map(|(a, c)| a + c)
            .collect()
    })
    .unwrap()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

pub fn conj(q: &Matrix, m: &Matrix) -> Matrix {
    q.matmul(m).unwrap().matmul(&q.transpose()).unwrap()
}

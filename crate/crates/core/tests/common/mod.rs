#![allow(dead_code)]

use mtrl_core::gridworld::{GridConfig, GridLayout, GridWorld};
use mtrl_core::Matrix;
use rand::Rng;

/// Gaussian elimination with partial pivoting on a dense copy of `a`.
pub fn gauss_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            for j in col..=n {
                m[i][j] -= f * m[col][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Naive triple-loop product, independent of the library's kernels.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn to_nalgebra(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn noiseless_corridor(horizon: usize) -> GridWorld {
    GridWorld::new(GridConfig {
        layout: GridLayout::parse("S.G").unwrap(),
        obs_dim: 5,
        noise_std: 0.0,
        deviation_prob: 0.0,
        horizon,
        reward_noise: 0.0,
    })
    .unwrap()
}

pub fn world(map: &str, obs_dim: usize, noise_std: f64, deviation_prob: f64, horizon: usize) -> GridWorld {
    GridWorld::new(GridConfig {
        layout: GridLayout::parse(map).unwrap(),
        obs_dim,
        noise_std,
        deviation_prob,
        horizon,
        reward_noise: 0.0,
    })
    .unwrap()
}

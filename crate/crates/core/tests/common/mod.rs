//! Reference solvers shared by the integration and acceptance suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting on a dense row-major system.
#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// minimize ||x - Σ w_k y_k||² + τ Σ d_k² w_k² + ridge ||w||²  s.t. Σ w_k = 1,
/// with the last weight eliminated as `1 - Σ_{k<K} w_k`.
pub fn qp_oracle(x: &[f64], ys: &[Vec<f64>], d: &[f64], tau: f64, ridge_eps: f64) -> Vec<f64> {
    let k = ys.len();
    // Quadratic form A with A_ij = <x - y_i, x - y_j> + diag terms.
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = x
                .iter()
                .zip(&ys[i])
                .zip(&ys[j])
                .map(|((xv, yi), yj)| (xv - yi) * (xv - yj))
                .sum();
        }
    }
    let trace: f64 = (0..k).map(|i| a[i][i]).sum();
    let ridge = ridge_eps * trace / k as f64;
    for i in 0..k {
        a[i][i] += tau * d[i] * d[i] + ridge;
    }
    // w = e_last + B v with B = [I; -1ᵀ]; normal equations Bᵀ A B v = -Bᵀ A e_last.
    let m = k - 1;
    let bab = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| a[i][j] - a[i][m] - a[m][j] + a[m][m])
                .collect()
        })
        .collect();
    let rhs = (0..m).map(|i| -(a[i][m] - a[m][m])).collect();
    let v = gauss_solve(bab, rhs);
    let mut w = v.clone();
    w.push(1.0 - v.iter().sum::<f64>());
    w
}

/// Test vector, `k` random candidates and their Euclidean distances.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    k: usize,
    dim: usize,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let d = ys
        .iter()
        .map(|y| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    (x, ys, d)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

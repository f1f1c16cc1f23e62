//! Closed-form ridge regression on one-hot targets.
//!
//! Minimizes `(1/N) sum_i m_i ||W x_i + b - e_{y_i}||^2 + (l2/2) ||[W b]||^2`
//! (the bias is regularized too), i.e. solves
//! `(X^T M X / N + (l2/2) I) B = X^T M Y / N` with `X` augmented by a ones
//! column.

use crate::dataset::{Dataset, Mask};
use crate::error::{Error, Result};

use super::network::Architecture;

/// Cholesky factorization and solve of a symmetric positive definite system,
/// overwriting `rhs` (row-major `n x k`) with the solution.
pub(crate) fn cholesky_solve(a: &mut [f64], n: usize, rhs: &mut [f64], k: usize) -> Result<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= a[j * n + p] * a[j * n + p];
        }
        if !(d > 0.0) {
            return Err(Error::Runtime(
                "ridge system is not positive definite; use a positive l2".into(),
            ));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for p in 0..j {
                v -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = v / d;
        }
    }
    for c in 0..k {
        // L y = b
        for i in 0..n {
            let mut v = rhs[i * k + c];
            for p in 0..i {
                v -= a[i * n + p] * rhs[p * k + c];
            }
            rhs[i * k + c] = v / a[i * n + i];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let mut v = rhs[i * k + c];
            for p in i + 1..n {
                v -= a[p * n + i] * rhs[p * k + c];
            }
            rhs[i * k + c] = v / a[i * n + i];
        }
    }
    Ok(())
}

/// Flat parameters in the [`Architecture`] layout for a linear layer.
pub(crate) fn solve(
    arch: &Architecture,
    dataset: &Dataset,
    mask: &Mask,
    normalizer: f64,
    ridge: f64,
) -> Result<Vec<f64>> {
    let d = dataset.feature_dim();
    let c = dataset.num_classes();
    let n = d + 1;
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n * c];
    let mut row = vec![0.0; n];
    for i in mask.indices() {
        let ex = dataset.example(i);
        row[..d].copy_from_slice(&ex.features);
        row[d] = 1.0;
        for a in 0..n {
            for b in 0..=a {
                gram[a * n + b] += row[a] * row[b];
            }
            rhs[a * c + ex.label] += row[a];
        }
    }
    for a in 0..n {
        for b in 0..=a {
            gram[a * n + b] /= normalizer;
            gram[b * n + a] = gram[a * n + b];
        }
        gram[a * n + a] += ridge;
        for v in &mut rhs[a * c..(a + 1) * c] {
            *v /= normalizer;
        }
    }
    cholesky_solve(&mut gram, n, &mut rhs, c)?;

    let mut params = vec![0.0; arch.param_count()];
    for class in 0..c {
        for f in 0..d {
            params[class * d + f] = rhs[f * c + class];
        }
        params[d * c + class] = rhs[d * c + class];
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_small_system() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![2.0, 1.0];
        cholesky_solve(&mut a, 2, &mut b, 1).unwrap();
        // 4x + 2y = 2, 2x + 3y = 1  =>  x = 0.5, y = 0
        assert!((b[0] - 0.5).abs() < 1e-14 && b[1].abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_an_error() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0];
        let mut b = vec![1.0, 1.0];
        assert!(cholesky_solve(&mut a, 2, &mut b, 1).is_err());
    }
}

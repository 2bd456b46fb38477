//! Sample covariance and its Frobenius-norm summary.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Unbiased sample covariance (divisor H-1) and its Frobenius norm
/// sqrt(sum_ij Sigma_ij^2), the scalar spread-plus-coupling summary of
/// stationary fluctuations.
pub fn covariance_frobenius(samples: &Matrix) -> Result<(Matrix, f64)> {
    let n = samples.rows();
    if n < 2 {
        return Err(Error::Contract(
            "covariance requires at least two samples".to_string(),
        ));
    }
    let d = samples.cols();
    let mut mean = vec![0.0; d];
    for row in samples.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut sigma = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in samples.iter_rows() {
        for (c, (&v, &m)) in centered.iter_mut().zip(row.iter().zip(mean.iter())) {
            *c = v - m;
        }
        for j in 0..d {
            let cj = centered[j];
            if cj != 0.0 {
                for k in j..d {
                    let v = sigma.get(j, k) + cj * centered[k];
                    sigma.set(j, k, v);
                }
            }
        }
    }
    let denom = (n - 1) as f64;
    let mut frob_sq = 0.0;
    for j in 0..d {
        for k in j..d {
            let v = sigma.get(j, k) / denom;
            sigma.set(j, k, v);
            sigma.set(k, j, v);
            frob_sq += if j == k { v * v } else { 2.0 * v * v };
        }
    }
    Ok((sigma, frob_sq.sqrt()))
}

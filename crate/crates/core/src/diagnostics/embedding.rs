//! Time-delay embedding of scalar series.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Embed a scalar series into R^m with lag tau:
/// row h = [x_h, x_{h+tau}, ..., x_{h+(m-1)tau}], N = L - (m-1)*tau rows.
pub fn delay_embed(series: &[f64], m: usize, tau: usize) -> Result<Matrix> {
    if m < 1 || tau < 1 {
        return Err(Error::Contract(format!(
            "embedding requires m >= 1 and tau >= 1, got m={m}, tau={tau}"
        )));
    }
    let span = (m - 1) * tau;
    if series.len() <= span {
        return Err(Error::Contract(format!(
            "series length {} too short for m={m}, tau={tau}",
            series.len()
        )));
    }
    let n = series.len() - span;
    let mut out = Matrix::with_capacity(n, m);
    let mut row = vec![0.0; m];
    for h in 0..n {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = series[h + c * tau];
        }
        out.push_row(&row)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_one_is_the_identity_column() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let e = delay_embed(&xs, 1, 3).unwrap();
        assert_eq!(e.rows(), 4);
        assert_eq!(e.cols(), 1);
        for (i, &x) in xs.iter().enumerate() {
            assert_eq!(e.get(i, 0), x);
        }
    }

    #[test]
    fn shape_and_first_row_match_arithmetic() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let e = delay_embed(&xs, 3, 2).unwrap();
        assert_eq!(e.rows(), 6);
        assert_eq!(e.row(0), &[0.0, 2.0, 4.0]);
        assert_eq!(e.row(5), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn columns_are_shifted_copies_of_the_input() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let (m, tau) = (4, 3);
        let e = delay_embed(&xs, m, tau).unwrap();
        for c in 0..m {
            for h in 0..e.rows() {
                assert_eq!(e.get(h, c), xs[h + c * tau]);
            }
        }
    }

    #[test]
    fn too_short_series_is_rejected() {
        let xs = [1.0, 2.0, 3.0];
        assert!(delay_embed(&xs, 3, 2).is_err());
        assert!(delay_embed(&xs, 2, 2).is_ok());
    }
}

//! Maximal Lyapunov exponent via the nearest-neighbour divergence method.
//!
//! For each trajectory point the nearest neighbour outside a Theiler
//! window is found, their forward separations d_i(z) are tracked for
//! z = 0..=z_max, and the slope of the mean log-divergence curve over
//! [z_min, z_max] estimates lambda_max (in per-sample units of the input
//! row spacing).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

#[derive(Debug, Clone)]
pub struct LyapunovFit {
    /// Least-squares slope of the divergence curve over the fit window,
    /// in units of one input row.
    pub lambda_max: f64,
    /// Mean log-divergence <log d(z)> for z = 0..=z_max.
    pub curve: Vec<f64>,
    pub z_min: usize,
    pub z_max: usize,
    pub r_squared: f64,
    /// Base points that contributed at least one finite divergence.
    pub n_pairs: usize,
}

/// Ordinary least squares on (x, y); returns (slope, r_squared).
/// A perfectly flat series fits exactly with zero slope (r_squared = 1).
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, r2)
}

/// Estimate the maximal Lyapunov exponent of a multivariate trajectory.
///
/// Pairs whose separation is exactly zero at some lag are skipped at that
/// lag (a log-safe floor of 1e-300 guards the remaining logs); if no pair
/// ever separates, there is no divergence information and an estimator
/// error is returned.
pub fn max_lyapunov(
    trace: &Matrix,
    theiler_w: usize,
    z_min: usize,
    z_max: usize,
) -> Result<LyapunovFit> {
    let n = trace.rows();
    if z_min >= z_max {
        return Err(Error::Contract(format!(
            "fit window [{z_min}, {z_max}] must satisfy z_min < z_max"
        )));
    }
    if n <= z_max + theiler_w + 2 {
        return Err(Error::Contract(format!(
            "trace length {n} too short for z_max {z_max} and Theiler window {theiler_w}"
        )));
    }
    if !trace.all_finite() {
        return Err(Error::Contract("trace must be finite".to_string()));
    }

    // Base points leave room for z_max forward steps.
    let m = n - z_max;

    // Nearest neighbour outside the Theiler window, lowest index on ties.
    let neighbours: Vec<Option<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            let pi = trace.row(i);
            for j in 0..m {
                let gap = i.abs_diff(j);
                if gap <= theiler_w {
                    continue;
                }
                let d = euclidean(pi, trace.row(j));
                let candidate = (d, j);
                best = Some(match best {
                    None => candidate,
                    Some(b) if candidate.0 < b.0 => candidate,
                    Some(b) => b,
                });
            }
            best.map(|(_, j)| j)
        })
        .collect();

    let mut curve = Vec::with_capacity(z_max + 1);
    let mut contributing = vec![false; m];
    for z in 0..=z_max {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, nb) in neighbours.iter().enumerate() {
            if let Some(j) = nb {
                let d = euclidean(trace.row(i + z), trace.row(j + z));
                if d > 0.0 {
                    sum += d.max(1e-300).ln();
                    count += 1;
                    contributing[i] = true;
                }
            }
        }
        curve.push(if count > 0 { sum / count as f64 } else { f64::NAN });
    }

    let n_pairs = contributing.iter().filter(|&&c| c).count();
    let xs: Vec<f64> = (z_min..=z_max).map(|z| z as f64).collect();
    let ys: Vec<f64> = curve[z_min..=z_max].to_vec();
    if ys.iter().any(|v| !v.is_finite()) || n_pairs == 0 {
        return Err(Error::Estimator(
            "no divergence information: trajectory points coincide".to_string(),
        ));
    }
    let (slope, r_squared) = linear_fit(&xs, &ys);
    Ok(LyapunovFit {
        lambda_max: slope,
        curve,
        z_min,
        z_max,
        r_squared,
        n_pairs,
    })
}

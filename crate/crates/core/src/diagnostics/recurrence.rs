//! Recurrence matrices with threshold selection by target recurrence rate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

/// Binary recurrence structure of a trajectory.
///
/// The Theiler band |i-j| <= mask width is excluded from rate computation
/// and masked in rendered outputs; the stored matrix itself is complete
/// (R_ii = 1 before masking).
#[derive(Debug, Clone)]
pub struct RecurrenceMatrix {
    n: usize,
    bits: Vec<bool>,
    pub epsilon: f64,
    pub target_rate: f64,
    pub achieved_rate: f64,
    pub theiler_mask_width: usize,
}

impl RecurrenceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.theiler_mask_width
    }
}

/// Threshold pairwise distances so that the requested fraction of
/// off-mask pairs is recurrent.
///
/// epsilon is the target_rate quantile of off-mask pairwise distances
/// (the exact solution of the rate equation); R_ij = 1 iff d_ij <= epsilon.
pub fn recurrence_matrix(
    trace: &Matrix,
    target_rate: f64,
    theiler_mask_width: usize,
) -> Result<RecurrenceMatrix> {
    if !(0.0 < target_rate && target_rate < 1.0) {
        return Err(Error::config(
            "diagnostics.target_rate",
            format!("must lie strictly in (0,1), got {target_rate}"),
        ));
    }
    let n = trace.rows();
    if n < 2 {
        return Err(Error::Contract(
            "recurrence matrix requires at least two rows".to_string(),
        ));
    }
    if !trace.all_finite() {
        return Err(Error::Contract("trace must be finite".to_string()));
    }

    // Condensed distances for pairs i < j, partitioned into masked and not.
    let rows_dists: Vec<Vec<f64>> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let pi = trace.row(i);
            ((i + 1)..n).map(|j| euclidean(pi, trace.row(j))).collect()
        })
        .collect();

    let mut off_mask: Vec<f64> = Vec::new();
    for (i, row) in rows_dists.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            if j - i > theiler_mask_width {
                off_mask.push(d);
            }
        }
    }
    if off_mask.is_empty() {
        return Err(Error::Contract(format!(
            "Theiler mask width {theiler_mask_width} leaves no off-mask pairs for {n} rows"
        )));
    }

    let m = off_mask.len();
    let k = ((target_rate * m as f64).round() as usize).clamp(1, m);
    let (_, eps, _) = off_mask
        .select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
    let epsilon = *eps;

    let mut bits = vec![false; n * n];
    let mut recurrent_off_mask = 0usize;
    for i in 0..n {
        bits[i * n + i] = true;
    }
    for (i, row) in rows_dists.iter().enumerate() {
        for (kk, &d) in row.iter().enumerate() {
            let j = i + 1 + kk;
            if d <= epsilon {
                bits[i * n + j] = true;
                bits[j * n + i] = true;
                if j - i > theiler_mask_width {
                    recurrent_off_mask += 1;
                }
            }
        }
    }

    Ok(RecurrenceMatrix {
        n,
        bits,
        epsilon,
        target_rate,
        achieved_rate: recurrent_off_mask as f64 / m as f64,
        theiler_mask_width,
    })
}

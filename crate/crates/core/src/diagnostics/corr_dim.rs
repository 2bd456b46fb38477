//! Correlation (fractal) dimension via the correlation-sum scaling law.
//!
//! C(r) counts pairs closer than r over a logarithmic radius range; the
//! slope of log C vs log r in the best-fitting scaling window estimates
//! D2. Radii span the 5th to 50th percentile of pairwise distances, and
//! pairs inside the Theiler band are excluded with the pair count
//! adjusted accordingly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

use super::lyapunov::linear_fit;

/// Largest number of pairwise distances materialized for radius
/// selection; beyond this a deterministic stride subsample is used.
const PERCENTILE_PAIR_CAP: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct CorrelationDimFit {
    pub d2: f64,
    pub radii: Vec<f64>,
    /// C(r) per radius, in [0,1] and non-decreasing.
    pub correlation_sums: Vec<f64>,
    /// Inclusive index range of the scaling window into `radii`.
    pub window: (usize, usize),
    pub r_squared: f64,
    /// Set when the attractor collapses to (nearly) a point and no radius
    /// range exists to fit; d2 is reported as 0.
    pub degenerate: bool,
    /// (m, tau) when the points came from a delay embedding.
    pub embedding: Option<(usize, usize)>,
}

fn degenerate_fit() -> CorrelationDimFit {
    CorrelationDimFit {
        d2: 0.0,
        radii: Vec::new(),
        correlation_sums: Vec::new(),
        window: (0, 0),
        r_squared: 1.0,
        degenerate: true,
        embedding: None,
    }
}

/// Nearest-rank percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Grassberger-Procaccia correlation dimension of a point cloud.
pub fn correlation_dimension(
    points: &Matrix,
    n_radii: usize,
    theiler_w: usize,
) -> Result<CorrelationDimFit> {
    let n = points.rows();
    if n < 100 {
        return Err(Error::Contract(format!(
            "correlation dimension needs at least 100 points for a meaningful fit, got {n}"
        )));
    }
    if n_radii < 5 {
        return Err(Error::Contract("need at least 5 radii".to_string()));
    }
    if !points.all_finite() {
        return Err(Error::Contract("points must be finite".to_string()));
    }

    // Pair count with the Theiler exclusion |i-j| <= w.
    let w = theiler_w;
    let pair_count: usize = (0..n).map(|i| n.saturating_sub(i + w + 1)).sum();
    if pair_count == 0 {
        return Err(Error::Contract(format!(
            "Theiler window {w} leaves no pairs for {n} points"
        )));
    }

    // Pass 1: distances for radius selection (subsampled when huge).
    let stride = pair_count.div_ceil(PERCENTILE_PAIR_CAP);
    let mut sample: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let mut local = Vec::new();
            let start = i + w + 1;
            if start < n {
                // Global pair ordinal of (i, start) keeps the stride
                // deterministic across thread counts.
                let before: usize = (0..i).map(|k| n.saturating_sub(k + w + 1)).sum();
                for j in start..n {
                    let ordinal = before + (j - start);
                    if ordinal.is_multiple_of(stride) {
                        local.push(euclidean(pi, points.row(j)));
                    }
                }
            }
            local
        })
        .flatten()
        .collect();
    sample.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));

    let max_d = *sample.last().expect("non-empty sample");
    if max_d == 0.0 {
        // All pairwise distances zero: a point attractor.
        return Ok(degenerate_fit());
    }
    let p5 = percentile(&sample, 0.05);
    let p50 = percentile(&sample, 0.50);
    let r_lo = if p5 > 0.0 {
        p5
    } else {
        match sample.iter().find(|&&d| d > 0.0) {
            Some(&d) => d,
            None => return Ok(degenerate_fit()),
        }
    };
    let r_hi = p50;
    if !(r_lo < r_hi) {
        // The distance distribution is concentrated on (almost) a single
        // value; no scaling range exists.
        return Ok(degenerate_fit());
    }

    let log_lo = r_lo.ln();
    let log_hi = r_hi.ln();
    let radii: Vec<f64> = (0..n_radii)
        .map(|k| (log_lo + (log_hi - log_lo) * k as f64 / (n_radii - 1) as f64).exp())
        .collect();

    // Pass 2: exact pair counting into radius buckets. hist[b] counts
    // pairs whose distance first falls below radii[b].
    let hist: Vec<u64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let mut local = vec![0u64; n_radii + 1];
            for j in (i + w + 1)..n {
                let d = euclidean(pi, points.row(j));
                // First index with radii[idx] > d; pairs count toward all
                // radii at or after it (strict d < r).
                let idx = radii.partition_point(|&r| r <= d);
                local[idx] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; n_radii + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
                a
            },
        );

    let mut correlation_sums = Vec::with_capacity(n_radii);
    let mut acc = 0u64;
    for &h in hist.iter().take(n_radii) {
        acc += h;
        correlation_sums.push(acc as f64 / pair_count as f64);
    }

    // Scaling window: contiguous run of >= 5 radii with positive C
    // maximizing linear-fit R^2 in log-log coordinates. Smooth curves put
    // many windows within numerical noise of the maximum, so R^2 values
    // within R2_TIE count as tied and the longest (then earliest) run
    // wins: the widest stretch still consistent with one power law.
    const R2_TIE: f64 = 1e-4;
    let first_pos = match correlation_sums.iter().position(|&c| c > 0.0) {
        Some(p) => p,
        None => return Ok(degenerate_fit()),
    };
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let log_c: Vec<f64> = correlation_sums
        .iter()
        .map(|&c| if c > 0.0 { c.ln() } else { f64::NAN })
        .collect();
    if log_c.len() - first_pos < 5 {
        return Err(Error::Estimator(
            "too few positive correlation sums for a scaling fit".to_string(),
        ));
    }

    let mut windows: Vec<(f64, usize, usize, f64)> = Vec::new(); // (r2, len, start, slope)
    let mut max_r2 = f64::NEG_INFINITY;
    for a in first_pos..correlation_sums.len() {
        for b in (a + 4)..correlation_sums.len() {
            let (slope, r2) = linear_fit(&log_r[a..=b], &log_c[a..=b]);
            windows.push((r2, b - a + 1, a, slope));
            max_r2 = max_r2.max(r2);
        }
    }
    let (r_squared, len, start, slope) = windows
        .into_iter()
        .filter(|&(r2, ..)| r2 >= max_r2 - R2_TIE)
        .max_by(|a, b| {
            (a.1, std::cmp::Reverse(a.2))
                .cmp(&(b.1, std::cmp::Reverse(b.2)))
        })
        .expect("at least one window exists");
    let end = start + len - 1;

    Ok(CorrelationDimFit {
        d2: slope,
        radii,
        correlation_sums,
        window: (start, end),
        r_squared,
        degenerate: false,
        embedding: None,
    })
}

/// Delay-embed a scalar series, then estimate its correlation dimension.
pub fn correlation_dimension_embedded(
    series: &[f64],
    m: usize,
    tau: usize,
    n_radii: usize,
    theiler_w: usize,
) -> Result<CorrelationDimFit> {
    let points = super::embedding::delay_embed(series, m, tau)?;
    let mut fit = correlation_dimension(&points, n_radii, theiler_w)?;
    fit.embedding = Some((m, tau));
    Ok(fit)
}

//! Empirical stationary-distribution estimation (1-D or 2-D histograms).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Normalized empirical density over a rectangular binning.
#[derive(Debug, Clone)]
pub struct EmpiricalDensity {
    /// Per-dimension bin edges (len = bins + 1).
    pub bin_edges: Vec<Vec<f64>>,
    /// Raw counts, row-major over bin indices.
    pub counts: Vec<u64>,
    /// Density normalized so that sum(density * bin_volume) = 1.
    pub density: Vec<f64>,
    pub n_samples: usize,
    pub dims: Vec<usize>,
}

impl EmpiricalDensity {
    pub fn bin_volume(&self) -> f64 {
        self.bin_edges
            .iter()
            .map(|e| (e[e.len() - 1] - e[0]) / (e.len() - 1) as f64)
            .product()
    }

    /// Integral of the density over its support (1 up to roundoff).
    pub fn total_mass(&self) -> f64 {
        let vol = self.bin_volume();
        self.density.iter().map(|&p| p * vol).sum()
    }
}

/// Histogram estimate of the invariant measure from pooled samples.
///
/// Out-of-range samples are counted in the outermost bins. Only 1-D and
/// 2-D sample matrices are accepted; callers project higher-dimensional
/// traces first.
pub fn stationary_distribution(
    samples: &Matrix,
    bins: &[usize],
    range: Option<&[(f64, f64)]>,
) -> Result<EmpiricalDensity> {
    if samples.is_empty() {
        return Err(Error::Contract(
            "stationary_distribution requires at least one sample".to_string(),
        ));
    }
    let dim = samples.cols();
    if dim == 0 || dim > 2 {
        return Err(Error::Contract(format!(
            "histogram supports 1 or 2 dimensions, got {dim}; project first"
        )));
    }
    if bins.len() != dim || bins.contains(&0) {
        return Err(Error::Contract(format!(
            "need {dim} positive bin counts, got {bins:?}"
        )));
    }
    if let Some(r) = range {
        if r.len() != dim || r.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Contract(format!("invalid histogram range {r:?}")));
        }
    }

    // Resolve per-dimension ranges, padding degenerate spans.
    let mut ranges = Vec::with_capacity(dim);
    for d in 0..dim {
        let (lo, hi) = match range {
            Some(r) => r[d],
            None => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..samples.rows() {
                    let v = samples.get(i, d);
                    if !v.is_finite() {
                        return Err(Error::Contract("samples must be finite".to_string()));
                    }
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if lo == hi {
                    (lo - 0.5, hi + 0.5)
                } else {
                    (lo, hi)
                }
            }
        };
        ranges.push((lo, hi));
    }

    let mut edges = Vec::with_capacity(dim);
    for d in 0..dim {
        let (lo, hi) = ranges[d];
        let b = bins[d];
        let width = (hi - lo) / b as f64;
        edges.push((0..=b).map(|k| lo + k as f64 * width).collect::<Vec<f64>>());
    }

    let total_bins: usize = bins.iter().product();
    let mut counts = vec![0u64; total_bins];
    let bin_of = |v: f64, d: usize| -> usize {
        let (lo, hi) = ranges[d];
        let b = bins[d];
        let t = (v - lo) / (hi - lo) * b as f64;
        (t.floor().max(0.0) as usize).min(b - 1)
    };
    for i in 0..samples.rows() {
        let idx = if dim == 1 {
            bin_of(samples.get(i, 0), 0)
        } else {
            bin_of(samples.get(i, 0), 0) * bins[1] + bin_of(samples.get(i, 1), 1)
        };
        counts[idx] += 1;
    }

    let bin_volume: f64 = ranges
        .iter()
        .zip(bins.iter())
        .map(|(&(lo, hi), &b)| (hi - lo) / b as f64)
        .product();
    let n = samples.rows();
    let density = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * bin_volume))
        .collect();

    Ok(EmpiricalDensity {
        bin_edges: edges,
        counts,
        density,
        n_samples: n,
        dims: bins.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identical_samples_put_all_mass_in_one_bin() {
        let samples = Matrix::from_rows(&vec![vec![0.3, 0.7]; 50]).unwrap();
        let d = stationary_distribution(&samples, &[10, 10], Some(&[(0.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(d.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(d.counts.iter().sum::<u64>(), 50);
        assert!((d.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_samples_fill_bins_within_5_sigma() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut m = Matrix::with_capacity(n, 2);
        for _ in 0..n {
            m.push_row(&[rng.random::<f64>(), rng.random::<f64>()]).unwrap();
        }
        let d = stationary_distribution(&m, &[10, 10], Some(&[(0.0, 1.0), (0.0, 1.0)])).unwrap();
        // Multinomial: mean 10^4 per bin, sd = sqrt(n p (1-p)) ~ 99.5.
        let sd = (n as f64 * 0.01 * 0.99).sqrt();
        for &c in &d.counts {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * sd, "bin count {c}");
        }
        assert!((d.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_samples_land_in_outermost_bins() {
        let samples = Matrix::from_rows(&[vec![-5.0], vec![0.5], vec![99.0]]).unwrap();
        let d = stationary_distribution(&samples, &[4], Some(&[(0.0, 1.0)])).unwrap();
        assert_eq!(d.counts[0], 1);
        assert_eq!(d.counts[3], 1);
        assert_eq!(d.counts.iter().sum::<u64>(), 3);
    }

    #[test]
    fn three_dimensional_input_is_rejected() {
        let samples = Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(stationary_distribution(&samples, &[4, 4, 4], None).is_err());
    }

    #[test]
    fn empty_input_is_contract_violation() {
        let samples = Matrix::with_capacity(0, 2);
        assert!(stationary_distribution(&samples, &[4, 4], None).is_err());
    }
}

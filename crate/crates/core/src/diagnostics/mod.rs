//! Estimator suite for trajectory ensembles: stationary densities,
//! covariance norms, maximal Lyapunov exponents, recurrence matrices,
//! delay embeddings, and correlation dimension, plus the `diagnose`
//! aggregator that assembles one report per ensemble.

mod corr_dim;
mod covariance;
mod density;
mod embedding;
mod lyapunov;
mod recurrence;

pub use corr_dim::{correlation_dimension, correlation_dimension_embedded, CorrelationDimFit};
pub use covariance::covariance_frobenius;
pub use density::{stationary_distribution, EmpiricalDensity};
pub use embedding::delay_embed;
pub use lyapunov::{max_lyapunov, LyapunovFit};
pub use recurrence::{recurrence_matrix, RecurrenceMatrix};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled_sim::{EnsembleOutput, ProjectionMode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Estimator knobs; every field is config-exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSettings {
    /// Temporal exclusion (rows) for nearest-neighbour searches, pair
    /// counting, and the recurrence identity band.
    pub theiler_w: usize,
    pub z_min: usize,
    pub z_max: usize,
    pub target_rate: f64,
    pub n_radii: usize,
    /// Delay-embedding parameters for scalar series analyses.
    pub embed_m: usize,
    pub embed_tau: usize,
    pub density_bins: [usize; 2],
    /// Histogram range per dimension; `null` auto-ranges (probability
    /// projections use [0,1]^2).
    pub density_range: Option<[[f64; 2]; 2]>,
    /// Per-run row cap for the quadratic estimators; longer traces are
    /// thinned deterministically.
    pub max_points_per_run: usize,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        DiagnosticsSettings {
            theiler_w: 20,
            z_min: 1,
            z_max: 30,
            target_rate: 0.08,
            n_radii: 24,
            embed_m: 4,
            embed_tau: 5,
            density_bins: [40, 40],
            density_range: None,
            max_points_per_run: 4000,
        }
    }
}

impl DiagnosticsSettings {
    pub fn validate(&self) -> Result<()> {
        if self.z_min >= self.z_max {
            return Err(Error::config("diagnostics.z_min", "must be smaller than z_max"));
        }
        if !(0.0 < self.target_rate && self.target_rate < 1.0) {
            return Err(Error::config(
                "diagnostics.target_rate",
                "must lie strictly in (0,1)",
            ));
        }
        if self.n_radii < 5 {
            return Err(Error::config("diagnostics.n_radii", "must be at least 5"));
        }
        if self.embed_m == 0 || self.embed_tau == 0 {
            return Err(Error::config("diagnostics.embed_m", "embedding m and tau must be >= 1"));
        }
        if self.density_bins.contains(&0) {
            return Err(Error::config("diagnostics.density_bins", "must be positive"));
        }
        if let Some(r) = &self.density_range {
            if r.iter().any(|&[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                return Err(Error::config(
                    "diagnostics.density_range",
                    "each range must be a finite [lo, hi] with lo < hi",
                ));
            }
        }
        if self.max_points_per_run < 100 {
            return Err(Error::config(
                "diagnostics.max_points_per_run",
                "must be at least 100",
            ));
        }
        Ok(())
    }
}

/// Mean / standard deviation of a per-run scalar (sd = 0 for one run).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarStat {
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
    /// Runs where the estimator reported no information.
    pub n_failed: usize,
}

impl ScalarStat {
    fn from_values(values: Vec<f64>, n_failed: usize) -> Self {
        let n = values.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / n as f64
        };
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        ScalarStat {
            mean,
            sd,
            values,
            n_failed,
        }
    }
}

/// Scalar summary of one recurrence matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrenceSummary {
    pub epsilon: f64,
    pub target_rate: f64,
    pub achieved_rate: f64,
    pub theiler_mask_width: usize,
    pub n: usize,
}

/// Everything `diagnose` reports for one ensemble.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub config_hash: String,
    pub n_runs_analyzed: usize,
    pub n_diverged: usize,
    /// Frobenius norm of the covariance of the pooled post-burn samples.
    pub frobenius_pooled: f64,
    /// Per-run Frobenius norms.
    pub frobenius: ScalarStat,
    /// Per-run maximal Lyapunov exponents, per update step h.
    pub lambda_max: ScalarStat,
    /// Per-run correlation dimensions.
    pub d2: ScalarStat,
    pub recurrence: Option<RecurrenceSummary>,
    /// Recurrence matrix of the first analyzed run.
    pub recurrence_matrix: Option<RecurrenceMatrix>,
    /// 2-D histogram when the joint trace is two-dimensional.
    pub density: Option<EmpiricalDensity>,
    /// Divergence curve of the first analyzed run (per-row lag units).
    pub lyapunov_curve: Option<LyapunovFit>,
    /// Correlation-sum curve of the first analyzed run.
    pub correlation_curve: Option<CorrelationDimFit>,
}

/// Thin a matrix to at most `cap` rows; returns (points, stride used).
fn thin_to_cap(points: Matrix, cap: usize) -> (Matrix, usize) {
    if points.rows() <= cap {
        (points, 1)
    } else {
        let stride = points.rows().div_ceil(cap);
        (points.thin(stride), stride)
    }
}

/// Assemble the full diagnostics report for an ensemble.
///
/// lambda_max and d2 are estimated per run on post-burn joint traces and
/// averaged; the density and pooled covariance use the union of post-burn
/// samples across runs. lambda_max is converted from per-recorded-row
/// units to per-update-step units via the record stride.
pub fn diagnose(
    ensemble: &EnsembleOutput,
    n_burn: u64,
    record_stride: u64,
    settings: &DiagnosticsSettings,
) -> Result<DiagnosticsReport> {
    settings.validate()?;
    if ensemble.traces.is_empty() {
        return Err(Error::Estimator(
            "no analyzable runs: every ensemble member diverged".to_string(),
        ));
    }

    struct PerRun {
        frob: f64,
        lambda: Option<f64>,
        d2: Option<f64>,
        first_artifacts: Option<(RecurrenceMatrix, LyapunovFit, CorrelationDimFit)>,
    }

    let per_run: Vec<Result<PerRun>> = ensemble
        .traces
        .par_iter()
        .enumerate()
        .map(|(idx, trace)| {
            let post = trace.post_burn_joint(n_burn);
            if post.rows() < 2 {
                return Err(Error::config(
                    "n_burn",
                    "no recorded samples remain after burn-in",
                ));
            }
            let (points, thin_stride) = thin_to_cap(post, settings.max_points_per_run);
            let (_, frob) = covariance_frobenius(&points)?;
            let row_units = (record_stride * thin_stride as u64) as f64;

            let lyap = max_lyapunov(&points, settings.theiler_w, settings.z_min, settings.z_max);
            let lambda = lyap.as_ref().ok().map(|f| f.lambda_max / row_units);

            let cdim = correlation_dimension(&points, settings.n_radii, settings.theiler_w);
            let d2 = cdim.as_ref().ok().map(|f| f.d2);

            let first_artifacts = if idx == 0 {
                let rec = recurrence_matrix(&points, settings.target_rate, settings.theiler_w)?;
                match (&lyap, &cdim) {
                    (Ok(l), Ok(c)) => Some((rec, l.clone(), c.clone())),
                    (Ok(l), Err(_)) => Some((rec, l.clone(), corr_dim_placeholder())),
                    (Err(_), Ok(c)) => Some((rec, lyap_placeholder(settings), c.clone())),
                    (Err(_), Err(_)) => {
                        Some((rec, lyap_placeholder(settings), corr_dim_placeholder()))
                    }
                }
            } else {
                None
            };

            Ok(PerRun {
                frob,
                lambda,
                d2,
                first_artifacts,
            })
        })
        .collect();

    let mut frobs = Vec::new();
    let mut lambdas = Vec::new();
    let mut d2s = Vec::new();
    let mut lambda_failed = 0;
    let mut d2_failed = 0;
    let mut first_artifacts = None;
    for r in per_run {
        let r = r?;
        frobs.push(r.frob);
        match r.lambda {
            Some(l) => lambdas.push(l),
            None => lambda_failed += 1,
        }
        match r.d2 {
            Some(d) => d2s.push(d),
            None => d2_failed += 1,
        }
        if first_artifacts.is_none() {
            first_artifacts = r.first_artifacts;
        }
    }

    // Pooled post-burn union for the stationary density and pooled norm.
    let pooled = crate::coupled_sim::post_burn_samples(&ensemble.traces, n_burn)?;
    let (pooled_capped, _) = thin_to_cap(pooled, settings.max_points_per_run.saturating_mul(4));
    let (_, frobenius_pooled) = covariance_frobenius(&pooled_capped)?;

    let density = if pooled_capped.cols() == 2 {
        let range_buf;
        let range: Option<&[(f64, f64)]> = match (&settings.density_range, ensemble_projection(ensemble)) {
            (Some(r), _) => {
                range_buf = [(r[0][0], r[0][1]), (r[1][0], r[1][1])];
                Some(&range_buf)
            }
            (None, Some(ProjectionMode::ActionProb)) => {
                range_buf = [(0.0, 1.0), (0.0, 1.0)];
                Some(&range_buf)
            }
            _ => None,
        };
        Some(stationary_distribution(
            &pooled_capped,
            &settings.density_bins,
            range,
        )?)
    } else {
        None
    };

    let (recurrence_matrix, lyapunov_curve, correlation_curve) = match first_artifacts {
        Some((r, l, c)) => (Some(r), Some(l), Some(c)),
        None => (None, None, None),
    };
    let recurrence = recurrence_matrix.as_ref().map(|r| RecurrenceSummary {
        epsilon: r.epsilon,
        target_rate: r.target_rate,
        achieved_rate: r.achieved_rate,
        theiler_mask_width: r.theiler_mask_width,
        n: r.n(),
    });

    Ok(DiagnosticsReport {
        config_hash: ensemble
            .traces
            .first()
            .map(|t| t.config_hash.clone())
            .unwrap_or_default(),
        n_runs_analyzed: ensemble.traces.len(),
        n_diverged: ensemble.diverged.len(),
        frobenius_pooled,
        frobenius: ScalarStat::from_values(frobs, 0),
        lambda_max: ScalarStat::from_values(lambdas, lambda_failed),
        d2: ScalarStat::from_values(d2s, d2_failed),
        recurrence,
        recurrence_matrix,
        density,
        lyapunov_curve,
        correlation_curve,
    })
}

fn ensemble_projection(ensemble: &EnsembleOutput) -> Option<ProjectionMode> {
    ensemble.traces.first().map(|t| t.projection_mode)
}

fn lyap_placeholder(settings: &DiagnosticsSettings) -> LyapunovFit {
    LyapunovFit {
        lambda_max: f64::NAN,
        curve: Vec::new(),
        z_min: settings.z_min,
        z_max: settings.z_max,
        r_squared: f64::NAN,
        n_pairs: 0,
    }
}

fn corr_dim_placeholder() -> CorrelationDimFit {
    CorrelationDimFit {
        d2: 0.0,
        radii: Vec::new(),
        correlation_sums: Vec::new(),
        window: (0, 0),
        r_squared: f64::NAN,
        degenerate: true,
        embedding: None,
    }
}

//! Hyperparameter sensitivity harness: patch one scalar key of a base
//! config across a value grid, run an ensemble per grid point, and
//! aggregate the stability diagnostics into sensitivity curves.

use serde::{Deserialize, Serialize};

use crate::cli_io::config::RunConfig;
use crate::coupled_sim::{run_ensemble, EnsembleOutput};
use crate::diagnostics::{diagnose, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Sweep description as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub base: RunConfig,
    /// Dotted key into the base config, e.g. `agents.*.gamma` or
    /// `agents.0.exploration.eps_end`. `*` patches every array element.
    pub param_path: String,
    pub values: Vec<f64>,
}

fn default_schema_version() -> u32 {
    crate::cli_io::config::SCHEMA_VERSION
}

/// Aggregates for one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub value: f64,
    /// True when the entire ensemble diverged and no diagnostics exist.
    pub failed: bool,
    pub lambda_mean: Option<f64>,
    pub lambda_sd: Option<f64>,
    pub d2_mean: Option<f64>,
    pub d2_sd: Option<f64>,
    pub frob_mean: Option<f64>,
    pub frob_sd: Option<f64>,
    pub n_diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param_path: String,
    pub base_hash: String,
    pub records: Vec<SweepRecord>,
}

/// Set a dotted path inside a JSON document to a number.
pub fn set_json_path(root: &mut serde_json::Value, path: &str, value: f64) -> Result<()> {
    fn apply(node: &mut serde_json::Value, tokens: &[&str], path: &str, value: f64) -> Result<()> {
        let Some((head, rest)) = tokens.split_first() else {
            let number = serde_json::Number::from_f64(value)
                .ok_or_else(|| Error::config("values", "grid values must be finite"))?;
            if !(node.is_number() || node.is_null()) {
                return Err(Error::config(
                    "param_path",
                    format!("`{path}` does not resolve to a scalar field"),
                ));
            }
            *node = serde_json::Value::Number(number);
            return Ok(());
        };
        match node {
            serde_json::Value::Object(map) => {
                let child = map.get_mut(*head).ok_or_else(|| {
                    Error::config("param_path", format!("key `{head}` not found in `{path}`"))
                })?;
                apply(child, rest, path, value)
            }
            serde_json::Value::Array(items) => {
                if *head == "*" {
                    if items.is_empty() {
                        return Err(Error::config(
                            "param_path",
                            format!("`*` in `{path}` addresses an empty array"),
                        ));
                    }
                    for item in items.iter_mut() {
                        apply(item, rest, path, value)?;
                    }
                    Ok(())
                } else {
                    let idx: usize = head.parse().map_err(|_| {
                        Error::config(
                            "param_path",
                            format!("`{head}` is not an array index in `{path}`"),
                        )
                    })?;
                    let child = items.get_mut(idx).ok_or_else(|| {
                        Error::config(
                            "param_path",
                            format!("index {idx} out of bounds in `{path}`"),
                        )
                    })?;
                    apply(child, rest, path, value)
                }
            }
            _ => Err(Error::config(
                "param_path",
                format!("`{path}` descends into a non-container value"),
            )),
        }
    }
    let tokens: Vec<&str> = path.split('.').collect();
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(Error::config("param_path", "empty path segment"));
    }
    apply(root, &tokens, path, value)
}

/// Build the patched, validated config for one grid value.
///
/// The point seed is derived from the base seed and the value's bit
/// pattern, so per-value results are independent of grid order and
/// extending the grid never disturbs existing points.
pub fn patch_config(base: &RunConfig, param_path: &str, value: f64) -> Result<RunConfig> {
    let mut doc = serde_json::to_value(base).expect("config serializes");
    set_json_path(&mut doc, param_path, value)?;
    let mut patched = RunConfig::from_value(doc, &format!("{param_path}={value}"))?;
    patched.seed = derive_seed(base.seed, &[value.to_bits()]);
    Ok(patched)
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != crate::cli_io::config::SCHEMA_VERSION {
            return Err(Error::config("schema_version", "unsupported sweep schema version"));
        }
        if self.values.is_empty() {
            return Err(Error::config("values", "value list must be non-empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("values", "grid values must be finite"));
        }
        self.base.validate()?;
        // Every grid point must patch to a valid config before any runs.
        for &v in &self.values {
            patch_config(&self.base, &self.param_path, v)?;
        }
        Ok(())
    }
}

/// Run the sweep, invoking `on_point` after each grid point completes
/// (for persistence); grid points are evaluated independently.
pub fn run_sweep_with<F>(config: &SweepConfig, mut on_point: F) -> Result<SweepResult>
where
    F: FnMut(usize, f64, &EnsembleOutput, Option<&DiagnosticsReport>) -> Result<()>,
{
    config.validate()?;
    let mut records = Vec::with_capacity(config.values.len());
    for (g, &value) in config.values.iter().enumerate() {
        let point = patch_config(&config.base, &config.param_path, value)?;
        let sim = point.to_sim_config()?;
        let ensemble = run_ensemble(&sim)?;
        let report = match diagnose(&ensemble, point.n_burn, point.record_stride, &point.diagnostics)
        {
            Ok(r) => Some(r),
            Err(Error::Estimator(_)) if ensemble.traces.is_empty() => None,
            Err(e) => return Err(e),
        };
        on_point(g, value, &ensemble, report.as_ref())?;
        records.push(match &report {
            Some(r) => SweepRecord {
                value,
                failed: false,
                lambda_mean: finite_opt(r.lambda_max.mean),
                lambda_sd: finite_opt(r.lambda_max.sd),
                d2_mean: finite_opt(r.d2.mean),
                d2_sd: finite_opt(r.d2.sd),
                frob_mean: finite_opt(r.frobenius.mean),
                frob_sd: finite_opt(r.frobenius.sd),
                n_diverged: ensemble.diverged.len(),
            },
            None => SweepRecord {
                value,
                failed: true,
                lambda_mean: None,
                lambda_sd: None,
                d2_mean: None,
                d2_sd: None,
                frob_mean: None,
                frob_sd: None,
                n_diverged: ensemble.diverged.len(),
            },
        });
    }
    Ok(SweepResult {
        param_path: config.param_path.clone(),
        base_hash: config.base.hash(),
        records,
    })
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    run_sweep_with(config, |_, _, _, _| Ok(()))
}

fn finite_opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn csv_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sensitivity table: one row per grid value, sorted by value; failed
/// points carry a marker and blank numeric fields. Byte-deterministic.
pub fn emit_sensitivity_curves(result: &SweepResult) -> String {
    let mut rows = result.records.clone();
    rows.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite grid values"));
    let mut out = String::from(
        "param_value,lambda_mean,lambda_sd,d2_mean,d2_sd,frob_mean,frob_sd,n_diverged,status\n",
    );
    for r in &rows {
        let status = if r.failed { "failed" } else { "ok" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.value,
            csv_field(r.lambda_mean),
            csv_field(r.lambda_sd),
            csv_field(r.d2_mean),
            csv_field(r.d2_sd),
            csv_field(r.frob_mean),
            csv_field(r.frob_sd),
            r.n_diverged,
            status
        ));
    }
    out
}

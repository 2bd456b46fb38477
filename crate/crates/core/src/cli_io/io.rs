//! File persistence: atomic writes, trace CSV round-trips, the run
//! manifest sidecar, and recurrence PGM rasters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupled_sim::{DivergenceReport, EnsembleOutput, ProjectionMode, TrajectoryTrace};
use crate::diagnostics::RecurrenceMatrix;
use crate::error::{Error, Result};
use crate::learners::AgentLayout;
use crate::matrix::Matrix;

/// Write-temp-then-rename; a crashed or failed write never leaves a
/// truncated file at `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Contract(format!("`{}` has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::io(path.display().to_string(), e))
}

/// Shortest round-trip decimal form of an f64.
pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}

/// Trace CSV: header `run_index,h,theta_0..`, one row per recorded h.
pub fn trace_to_csv(trace: &TrajectoryTrace) -> String {
    let cols = trace.joint.cols();
    let mut out = String::with_capacity(trace.joint.rows() * cols * 8);
    out.push_str("run_index,h");
    for c in 0..cols {
        out.push_str(&format!(",theta_{c}"));
    }
    out.push('\n');
    for (i, &h) in trace.steps.iter().enumerate() {
        out.push_str(&format!("{},{}", trace.run_index, h));
        for v in trace.joint.row(i) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Parse a trace CSV emitted by `trace_to_csv`.
pub fn trace_from_csv(text: &str, origin: &str) -> Result<(usize, Vec<u64>, Matrix)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            message: "empty trace file".to_string(),
        })?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 3 || fields[0] != "run_index" || fields[1] != "h" {
        return Err(Error::Parse {
            path: origin.to_string(),
            message: "expected header run_index,h,theta_0,...".to_string(),
        });
    }
    let width = fields.len() - 2;
    let mut run_index = None;
    let mut steps = Vec::new();
    let mut joint = Matrix::with_capacity(128, width);
    let mut row = vec![0.0; width];
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_err = |what: &str| Error::Parse {
            path: origin.to_string(),
            message: format!("line {}: bad {what}", ln + 2),
        };
        let ri: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("run_index"))?;
        let h: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("h"))?;
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(&format!("theta_{c}")))?;
        }
        if parts.next().is_some() {
            return Err(parse_err("trailing fields"));
        }
        match run_index {
            None => run_index = Some(ri),
            Some(prev) if prev != ri => {
                return Err(parse_err("mixed run_index values in one file"))
            }
            _ => {}
        }
        steps.push(h);
        joint.push_row(&row)?;
    }
    let run_index = run_index.ok_or_else(|| Error::Parse {
        path: origin.to_string(),
        message: "trace file has no data rows".to_string(),
    })?;
    Ok((run_index, steps, joint))
}

/// Per-run entry of the trace-directory manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRun {
    pub run_index: usize,
    pub diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Sidecar describing one simulate output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub base_seed: u64,
    pub n_steps: u64,
    pub n_burn: u64,
    pub record_stride: u64,
    pub n_runs: usize,
    pub projection_mode: ProjectionMode,
    pub n_states: usize,
    pub layouts: Vec<AgentLayout>,
    pub runs: Vec<ManifestRun>,
    pub config: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn trace_file_name(run_index: usize) -> String {
    format!("trace_run{run_index}.csv")
}

/// Persist an ensemble: one CSV per completed run plus the manifest.
pub fn write_ensemble(
    dir: &Path,
    ensemble: &EnsembleOutput,
    run_config: &super::config::RunConfig,
) -> Result<()> {
    let config_json = serde_json::to_value(run_config).expect("config serializes");
    let config_hash = run_config.hash();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut runs: Vec<ManifestRun> = Vec::new();
    for trace in &ensemble.traces {
        let name = trace_file_name(trace.run_index);
        atomic_write(&dir.join(&name), trace_to_csv(trace).as_bytes())?;
        runs.push(ManifestRun {
            run_index: trace.run_index,
            diverged: false,
            file: Some(name),
            derived_seed: Some(trace.derived_seed),
            rows: Some(trace.joint.rows()),
            diverged_at: None,
            detail: None,
        });
    }
    for report in &ensemble.diverged {
        runs.push(ManifestRun {
            run_index: report.run_index,
            diverged: true,
            file: None,
            derived_seed: None,
            rows: None,
            diverged_at: Some(report.update_index),
            detail: Some(report.detail.clone()),
        });
    }
    runs.sort_by_key(|r| r.run_index);

    let (projection_mode, n_states, layouts) = match ensemble.traces.first() {
        Some(t) => (t.projection_mode, t.n_states, t.layouts.clone()),
        None => (ProjectionMode::RawParams, 0, Vec::new()),
    };
    let manifest = TraceManifest {
        schema_version: super::config::SCHEMA_VERSION,
        config_hash,
        base_seed: run_config.seed,
        n_steps: run_config.n_steps,
        n_burn: run_config.n_burn,
        record_stride: run_config.record_stride,
        n_runs: ensemble.n_runs,
        projection_mode,
        n_states,
        layouts,
        runs,
        config: config_json,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    atomic_write(&dir.join(MANIFEST_FILE), format!("{json}\n").as_bytes())
}

/// Load a trace directory back into an ensemble.
///
/// Trace files present in the directory but absent from the manifest are
/// treated as a mixed-provenance directory and rejected unless `force`.
pub fn read_ensemble(dir: &Path, force: bool) -> Result<(TraceManifest, EnsembleOutput)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: TraceManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;

    if !force {
        let listed: std::collections::HashSet<String> = manifest
            .runs
            .iter()
            .filter_map(|r| r.file.clone())
            .collect();
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name.starts_with("trace_run") && name.ends_with(".csv") && !listed.contains(&name) {
                return Err(Error::Contract(format!(
                    "`{}` is not listed in the manifest; refusing mixed trace directory \
                     (pass --force to override)",
                    name
                )));
            }
        }
    }

    let agent_width = |layout: &AgentLayout| match manifest.projection_mode {
        ProjectionMode::RawParams => layout.flat_len(),
        _ => 1,
    };
    let mut traces = Vec::new();
    let mut diverged = Vec::new();
    for run in &manifest.runs {
        if run.diverged {
            diverged.push(DivergenceReport {
                run_index: run.run_index,
                update_index: run.diverged_at.unwrap_or(0),
                detail: run.detail.clone().unwrap_or_default(),
            });
            continue;
        }
        let file = run.file.as_ref().ok_or_else(|| Error::Parse {
            path: manifest_path.display().to_string(),
            message: format!("run {} has neither file nor divergence record", run.run_index),
        })?;
        let path = dir.join(file);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let (run_index, steps, joint) = trace_from_csv(&text, &path.display().to_string())?;
        let expected_width: usize = manifest.layouts.iter().map(agent_width).sum();
        if joint.cols() != expected_width {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: format!(
                    "trace width {} does not match manifest layouts ({} expected)",
                    joint.cols(),
                    expected_width
                ),
            });
        }
        // Split the joint matrix back into per-agent blocks.
        let mut per_agent = Vec::with_capacity(manifest.layouts.len());
        let mut offset = 0;
        for layout in &manifest.layouts {
            let w = agent_width(layout);
            let mut m = Matrix::with_capacity(joint.rows(), w);
            for i in 0..joint.rows() {
                m.push_row(&joint.row(i)[offset..offset + w])?;
            }
            per_agent.push(m);
            offset += w;
        }
        traces.push(TrajectoryTrace {
            run_index,
            derived_seed: run.derived_seed.unwrap_or(0),
            steps,
            per_agent,
            joint,
            rewards: None,
            projection_mode: manifest.projection_mode,
            layouts: manifest.layouts.clone(),
            n_states: manifest.n_states,
            config_hash: manifest.config_hash.clone(),
        });
    }
    let n_runs = manifest.n_runs;
    Ok((
        manifest,
        EnsembleOutput {
            traces,
            diverged,
            n_runs,
        },
    ))
}

/// 8-bit binary PGM of a recurrence matrix: recurrent 255, non-recurrent
/// 0, Theiler identity band 128. Row index i increases downward.
pub fn recurrence_to_pgm(r: &RecurrenceMatrix, config_hash: &str) -> Vec<u8> {
    let n = r.n();
    let mut out = Vec::with_capacity(n * n + 128);
    out.extend_from_slice(b"P5\n");
    out.extend_from_slice(format!("# config_hash={config_hash}\n").as_bytes());
    out.extend_from_slice(
        b"# rows: trace index i increases downward; identity band masked to 128\n",
    );
    out.extend_from_slice(format!("{n} {n}\n255\n").as_bytes());
    for i in 0..n {
        for j in 0..n {
            out.push(if r.is_masked(i, j) {
                128
            } else if r.get(i, j) {
                255
            } else {
                0
            });
        }
    }
    out
}

/// Parse the PGM produced by `recurrence_to_pgm` (used by tests and the
/// plot pass-through).
pub fn parse_pgm(bytes: &[u8], origin: &str) -> Result<(usize, usize, Vec<u8>)> {
    let err = |message: &str| Error::Parse {
        path: origin.to_string(),
        message: message.to_string(),
    };
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        if pos >= bytes.len() {
            return Err(err("truncated header"));
        }
        if bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            pos += 1;
            continue;
        }
        if bytes[pos].is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-ascii header"))?);
    }
    if tokens[0] != "P5" {
        return Err(err("expected binary PGM (P5)"));
    }
    let w: usize = tokens[1].parse().map_err(|_| err("bad width"))?;
    let h: usize = tokens[2].parse().map_err(|_| err("bad height"))?;
    let maxval: usize = tokens[3].parse().map_err(|_| err("bad maxval"))?;
    if maxval != 255 {
        return Err(err("expected maxval 255"));
    }
    pos += 1; // single whitespace after maxval
    if bytes.len() < pos + w * h {
        return Err(err("truncated pixel data"));
    }
    Ok((w, h, bytes[pos..pos + w * h].to_vec()))
}

/// Output paths derived from a report path (density, curves, rasters).
pub fn sibling(path: &Path, name: &str) -> PathBuf {
    match path.parent() {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

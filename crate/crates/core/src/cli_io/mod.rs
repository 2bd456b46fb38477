//! Command-line surface and persistence formats: run-config loading,
//! trace/report/plot emission, and the subcommand dispatcher.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments or config),
//! 2 runtime failure (divergence, estimator, or I/O problems).

pub mod config;
pub mod io;
pub mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::coupled_sim::run_ensemble;
use crate::diagnostics::{diagnose, DiagnosticsReport, ScalarStat};
use crate::error::{Error, Result};
use crate::game_env::make_matrix_game;
use crate::learners::{ExplorationSpec, LearnerSpec};
use crate::replicator::{integrate_rk4, vector_field, ReplicatorState};
use crate::sweep::{emit_sensitivity_curves, run_sweep_with, SweepConfig};

use config::{load_config, RunConfig};
use io::{atomic_write, fmt_f64, read_ensemble, recurrence_to_pgm, sibling, write_ensemble};
use plot::{render_plot, PlotSpec};

#[derive(Parser)]
#[command(
    name = "marl-dyn",
    version,
    about = "Multi-agent learning dynamics simulator and stability diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory ensemble and persist traces + manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute the diagnostics report for a trace directory.
    Diagnose {
        #[arg(long)]
        traces: PathBuf,
        /// Output report path (auxiliary CSV/PGM files land beside it).
        #[arg(long)]
        out: PathBuf,
        /// Accept trace directories with files missing from the manifest.
        #[arg(long)]
        force: bool,
    },
    /// Sweep one config key over a value grid and aggregate diagnostics.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the base config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit the replicator vector field (and optionally a trajectory).
    Replicator {
        #[arg(long)]
        game: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        resolution: usize,
        /// Also integrate one trajectory to this CSV (trace format).
        #[arg(long)]
        traj_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        x0: f64,
        #[arg(long, default_value_t = 0.3)]
        y0: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
    },
    /// Render a plot spec (JSON) to SVG/PGM.
    Plot {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Print the resolved configuration with defaults applied.
    Describe {
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_workers() {
    if let Ok(v) = std::env::var("MARL_DYN_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Entry point used by the binary and by tests; returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_workers();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Diagnose { traces, out, force } => cmd_diagnose(&traces, &out, force),
        Command::Sweep { config, out, seed } => cmd_sweep(&config, &out, seed),
        Command::Replicator {
            game,
            out,
            resolution,
            traj_out,
            x0,
            y0,
            dt,
            steps,
        } => cmd_replicator(&game, &out, resolution, traj_out.as_deref(), x0, y0, dt, steps),
        Command::Plot { spec } => cmd_plot(&spec),
        Command::Describe { config } => cmd_describe(&config),
    }
}

fn cmd_simulate(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut run_config = load_config(config_path)?;
    if let Some(s) = seed {
        run_config.seed = s;
    }
    let sim = run_config.to_sim_config()?;
    let ensemble = run_ensemble(&sim)?;
    write_ensemble(out, &ensemble, &run_config)?;
    println!(
        "simulate: {} runs ({} diverged) -> {}",
        ensemble.n_runs,
        ensemble.diverged.len(),
        out.display()
    );
    if ensemble.traces.is_empty() {
        return Err(Error::Estimator(
            "every ensemble member diverged; see manifest.json".to_string(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct RecurrenceJson {
    epsilon: f64,
    target_rate: f64,
    achieved_rate: f64,
    theiler_mask_width: usize,
    n: usize,
    pgm: String,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    config_hash: &'a str,
    n_runs_analyzed: usize,
    n_diverged: usize,
    frobenius_pooled: f64,
    frobenius: &'a ScalarStat,
    lambda_max: &'a ScalarStat,
    d2: &'a ScalarStat,
    recurrence: Option<RecurrenceJson>,
    density_file: Option<String>,
    divergence_curve_file: Option<String>,
    correlation_curve_file: Option<String>,
}

/// Write the report JSON plus its auxiliary artifacts (PGM raster,
/// density and estimator-curve CSVs) next to `out`.
pub fn write_report_files(report: &DiagnosticsReport, out: &Path) -> Result<()> {
    let mut recurrence_json = None;
    if let (Some(summary), Some(matrix)) = (&report.recurrence, &report.recurrence_matrix) {
        let pgm_name = "recurrence_run0.pgm".to_string();
        atomic_write(
            &sibling(out, &pgm_name),
            &recurrence_to_pgm(matrix, &report.config_hash),
        )?;
        recurrence_json = Some(RecurrenceJson {
            epsilon: summary.epsilon,
            target_rate: summary.target_rate,
            achieved_rate: summary.achieved_rate,
            theiler_mask_width: summary.theiler_mask_width,
            n: summary.n,
            pgm: pgm_name,
        });
    }

    let mut density_file = None;
    if let Some(density) = &report.density {
        let mut csv = String::from("x_center,y_center,density\n");
        let (bx, by) = (density.dims[0], density.dims[1]);
        for i in 0..bx {
            let xc = (density.bin_edges[0][i] + density.bin_edges[0][i + 1]) / 2.0;
            for j in 0..by {
                let yc = (density.bin_edges[1][j] + density.bin_edges[1][j + 1]) / 2.0;
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(xc),
                    fmt_f64(yc),
                    fmt_f64(density.density[i * by + j])
                ));
            }
        }
        let name = "density.csv".to_string();
        atomic_write(&sibling(out, &name), csv.as_bytes())?;
        density_file = Some(name);
    }

    let mut divergence_curve_file = None;
    if let Some(fit) = &report.lyapunov_curve {
        if !fit.curve.is_empty() {
            let mut csv = String::from("z,mean_log_d,in_fit_window\n");
            for (z, v) in fit.curve.iter().enumerate() {
                let in_window = (fit.z_min..=fit.z_max).contains(&z);
                csv.push_str(&format!("{z},{},{}\n", fmt_f64(*v), u8::from(in_window)));
            }
            let name = "divergence_curve.csv".to_string();
            atomic_write(&sibling(out, &name), csv.as_bytes())?;
            divergence_curve_file = Some(name);
        }
    }

    let mut correlation_curve_file = None;
    if let Some(fit) = &report.correlation_curve {
        if !fit.radii.is_empty() {
            let mut csv = String::from("radius,c_r,in_fit_window\n");
            for (k, (r, c)) in fit.radii.iter().zip(fit.correlation_sums.iter()).enumerate() {
                let in_window = (fit.window.0..=fit.window.1).contains(&k);
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(*r),
                    fmt_f64(*c),
                    u8::from(in_window)
                ));
            }
            let name = "correlation_curve.csv".to_string();
            atomic_write(&sibling(out, &name), csv.as_bytes())?;
            correlation_curve_file = Some(name);
        }
    }

    let json = JsonReport {
        schema_version: config::SCHEMA_VERSION,
        config_hash: &report.config_hash,
        n_runs_analyzed: report.n_runs_analyzed,
        n_diverged: report.n_diverged,
        frobenius_pooled: report.frobenius_pooled,
        frobenius: &report.frobenius,
        lambda_max: &report.lambda_max,
        d2: &report.d2,
        recurrence: recurrence_json,
        density_file,
        divergence_curve_file,
        correlation_curve_file,
    };
    let text = serde_json::to_string_pretty(&json).expect("report serializes");
    atomic_write(out, format!("{text}\n").as_bytes())
}

fn cmd_diagnose(traces_dir: &Path, out: &Path, force: bool) -> Result<()> {
    let (manifest, ensemble) = read_ensemble(traces_dir, force)?;
    let settings = serde_json::from_value::<RunConfig>(manifest.config.clone())
        .map(|c| c.diagnostics)
        .unwrap_or_default();
    let report = diagnose(&ensemble, manifest.n_burn, manifest.record_stride, &settings)?;
    write_report_files(&report, out)?;
    println!(
        "diagnose: frobenius={:.6} lambda_max={:.6} d2={:.6} recurrence_rate={:.4} -> {}",
        report.frobenius_pooled,
        report.lambda_max.mean,
        report.d2.mean,
        report.recurrence.as_ref().map_or(f64::NAN, |r| r.achieved_rate),
        out.display()
    );
    Ok(())
}

fn cmd_sweep(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::io(config_path.display().to_string(), e))?;
    let mut sweep: SweepConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: config_path.display().to_string(),
        message: e.to_string(),
    })?;
    if let Some(s) = seed {
        sweep.base.seed = s;
    }
    sweep.validate()?;

    let out_dir = out.to_path_buf();
    let result = run_sweep_with(&sweep, |g, value, ensemble, report| {
        let point_dir = out_dir.join(format!("point_{g:02}"));
        let point_config = crate::sweep::patch_config(&sweep.base, &sweep.param_path, value)?;
        write_ensemble(&point_dir, ensemble, &point_config)?;
        if let Some(r) = report {
            write_report_files(r, &point_dir.join("report.json"))?;
        }
        println!(
            "sweep point {g}: {}={} ({} diverged)",
            sweep.param_path,
            value,
            ensemble.diverged.len()
        );
        Ok(())
    })?;

    atomic_write(
        &out.join("sensitivity.csv"),
        emit_sensitivity_curves(&result).as_bytes(),
    )?;
    let report_json = serde_json::to_string_pretty(&result).expect("sweep result serializes");
    atomic_write(&out.join("sweep_report.json"), format!("{report_json}\n").as_bytes())?;
    println!("sweep: {} points -> {}", result.records.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_replicator(
    game_name: &str,
    out: &Path,
    resolution: usize,
    traj_out: Option<&Path>,
    x0: f64,
    y0: f64,
    dt: f64,
    steps: usize,
) -> Result<()> {
    let game = make_matrix_game(game_name)?;
    let grid = vector_field(&game, resolution)?;
    let mut csv = String::from("x,y,dx,dy\n");
    for &(x, y, dx, dy) in &grid.points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(dx),
            fmt_f64(dy)
        ));
    }
    atomic_write(out, csv.as_bytes())?;

    if let Some(traj_path) = traj_out {
        if !(0.0..=1.0).contains(&x0) || !(0.0..=1.0).contains(&y0) {
            return Err(Error::config("x0", "initial condition must lie in [0,1]^2"));
        }
        let traj = integrate_rk4(&game, ReplicatorState::new(x0, y0), dt, steps)?;
        // Trace-compatible format so phase portraits can overlay it.
        let mut tcsv = String::from("run_index,h,theta_0,theta_1\n");
        for (i, s) in traj.iter().enumerate() {
            tcsv.push_str(&format!("0,{i},{},{}\n", fmt_f64(s.x), fmt_f64(s.y)));
        }
        atomic_write(traj_path, tcsv.as_bytes())?;
    }
    println!("replicator: {} field points -> {}", grid.points.len(), out.display());
    Ok(())
}

fn cmd_plot(spec_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Error::io(spec_path.display().to_string(), e))?;
    let spec: PlotSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: spec_path.display().to_string(),
        message: e.to_string(),
    })?;
    render_plot(&spec)?;
    println!("plot: {:?} -> {}", spec.kind, spec.out.display());
    Ok(())
}

fn cmd_describe(config_path: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    print!("{}", config.canonical_json());
    println!("config_hash: {}", config.hash());
    for (i, agent) in config.agents.iter().enumerate() {
        let exploration = match agent {
            LearnerSpec::TabularQ { exploration, .. } | LearnerSpec::Idqn { exploration, .. } => {
                Some(exploration)
            }
            LearnerSpec::Reinforce { .. } => None,
        };
        if let Some(ExplorationSpec::EpsilonGreedy {
            decay_rate: None, ..
        }) = exploration
        {
            println!(
                "agents[{i}].exploration.decay_rate: null -> {} (5 / n_steps)",
                5.0 / config.n_steps as f64
            );
        }
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_amp::config::{Profile, SystemConfig};
use ris_amp::harness::{
    self, exit_code, run_sweep, PhaseTransitionSpec, SweepParameter, SweepSpec,
};
use ris_amp::{Error, Result};

#[derive(Parser)]
#[command(name = "ris-amp", version, about = "RIS-assisted grant-free access: simulation, estimation and sweeps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; overrides the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Built-in scenario: desk or paper.
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    /// Replace the geometric RIS-to-BS channel by this many on-grid paths.
    #[arg(long, global = true)]
    on_grid_paths: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One trial with full dumps.
    Simulate {
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Also evaluate the genie-aided estimators.
        #[arg(long)]
        genie: bool,
    },
    /// One-parameter Monte-Carlo sweep.
    Sweep {
        /// L, snr_db, M, N, K or lambda_alpha.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        target_pf: f64,
        #[arg(long)]
        genie: bool,
    },
    /// Success-rate grid over two parameters.
    PhaseTransition {
        /// Row axis as `NAME=v1,v2,...`.
        #[arg(long)]
        rows: String,
        /// Column axis as `NAME=v1,v2,...`.
        #[arg(long)]
        cols: String,
        #[arg(long, default_value_t = 30)]
        trials: usize,
    },
    /// Denoiser and step-equivalence checks.
    Selftest,
}

fn load_config(c: &Common) -> Result<SystemConfig> {
    let mut cfg = match &c.config {
        Some(path) => SystemConfig::load(path)?,
        None => SystemConfig::from_profile(c.profile.parse::<Profile>()?),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.on_grid_paths.is_some() {
        cfg.cluster_model.on_grid_paths = c.on_grid_paths;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_axis(text: &str) -> Result<(SweepParameter, Vec<f64>)> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("axis `{text}` is not NAME=v1,v2,...")))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad axis value `{v}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((name.trim().parse()?, values))
}

fn simulate(cfg: &SystemConfig, c: &Common, trial: u64, genie: bool) -> Result<i32> {
    let scene = ris_amp::model::generate_scene(cfg, trial)?;
    let est = harness::estimate_scene(cfg, &scene, trial, true)?;
    let threshold = harness::amp_options(cfg, &scene.tau_h, false).epsilon_threshold;
    let metrics = harness::score_estimate(&scene, &est, threshold)?;
    let genie_nmse = if genie { Some(harness::genie_nmse(cfg, &scene)?) } else { None };
    std::fs::create_dir_all(&c.out)?;
    let mut w = csv::Writer::from_path(c.out.join("report.csv"))?;
    w.serialize(&metrics)?;
    w.flush()?;
    let json = serde_json::json!({
        "trial": trial,
        "n_active": scene.activity.n_active(),
        "realized_snr_db": scene.snr_db,
        "iterations": est.iterations_run,
        "converged": est.converged,
        "diverged": est.diverged,
        "metrics": metrics,
        "genie_nmse_g_db": genie_nmse.map(|g| g.0),
        "genie_avg_nmse_h_db": genie_nmse.and_then(|g| g.1),
        "activity_scores": est.activity_scores,
        "alpha_true": scene.activity.alpha(),
        "provenance": harness::Provenance::of(cfg),
    });
    serde_json::to_writer_pretty(std::fs::File::create(c.out.join("report.json"))?, &json)?;
    harness::write_trajectory(&est, std::fs::File::create(c.out.join("trajectory.csv"))?)?;
    scene.dictionaries.write_binary(std::io::BufWriter::new(std::fs::File::create(c.out.join("dictionaries.bin"))?))?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));
    println!(
        "trial {trial}: {} active, {} iterations, NMSE(G) {:.2} dB, avg NMSE(h) {} dB, p_f {}, p_m {}",
        scene.activity.n_active(),
        est.iterations_run,
        metrics.nmse_g_db,
        fmt(metrics.avg_nmse_h_db),
        fmt(metrics.p_f),
        fmt(metrics.p_m),
    );
    Ok(exit_code::SUCCESS)
}

fn run(cli: Cli) -> Result<i32> {
    let c = &cli.common;
    match cli.command {
        Command::Selftest => {
            let mut ok = true;
            for check in ris_amp::oracle::selftest() {
                println!("[{}] {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
                ok &= check.passed;
            }
            Ok(if ok { exit_code::SUCCESS } else { 1 })
        }
        Command::Simulate { trial, genie } => simulate(&load_config(c)?, c, trial, genie),
        Command::Sweep { param, values, trials, target_pf, genie } => {
            let mut spec = SweepSpec::new(load_config(c)?, param.parse()?, values, trials);
            spec.target_pf = target_pf;
            spec.genie = genie;
            spec.workers = c.workers;
            let report = run_sweep(&spec)?;
            report.write_to_dir(&c.out)?;
            for a in &report.aggregates {
                let mean = |s: Option<harness::Summary>| s.map_or("n/a".to_string(), |s| format!("{:.3}", s.mean));
                println!(
                    "{}={}: NMSE(G) {} dB, avg NMSE(h) {} dB, p_f {}, p_m {}, failed {}/{}",
                    report.parameter, a.value, mean(a.nmse_g_db), mean(a.avg_nmse_h_db), mean(a.p_f), mean(a.p_m), a.failed, a.trials
                );
            }
            Ok(if report.all_failed() { exit_code::ALL_TRIALS_FAILED } else { exit_code::SUCCESS })
        }
        Command::PhaseTransition { rows, cols, trials } => {
            let spec = PhaseTransitionSpec {
                base: load_config(c)?,
                rows: parse_axis(&rows)?,
                cols: parse_axis(&cols)?,
                trials_per_cell: trials,
                workers: c.workers,
            };
            let report = harness::phase_transition_grid(&spec)?;
            report.write_to_dir(&c.out)?;
            for (i, row) in report.matrix(spec.rows.1.len(), spec.cols.1.len()).iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| v.map_or("  -  ".into(), |x| format!("{x:.2}"))).collect();
                println!("{}={:>6}: {}", report.row_parameter, spec.rows.1[i], cells.join(" "));
            }
            Ok(if report.all_failed() { exit_code::ALL_TRIALS_FAILED } else { exit_code::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Parse(_) => exit_code::CONFIG,
                _ => 1,
            };
            ExitCode::from(code as u8)
        }
    }
}

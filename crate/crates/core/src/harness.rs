//! Seeded Monte-Carlo trials, parameter sweeps and phase-transition grids.
//!
//! Trial `t` of every sweep point draws its randomness from the streams of
//! `(seed, t)`, so points share their channel, activity and pilot draws apart
//! from what the swept parameter changes. Trials run on a rayon pool and are
//! reduced in `(point, trial)` order, so output does not depend on the worker
//! count.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amp::{estimate, AmpOptions, EstimationResult, Priors};
use crate::baselines::{genie_mmse_s, genie_mmse_x};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    avg_nmse_h_db, detection_rates, nmse_db, roc_sweep, scale_free_scores, threshold_for_pf, MetricReport, RocPoint, SUCCESS_NMSE_DB,
};
use crate::model::{angular_prior, generate_scene, SceneRealization};
use crate::rng::{stream_rng, Stream};

/// Process exit codes of the command-line front end.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const ALL_TRIALS_FAILED: i32 = 3;
}

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Parameter varied along a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    /// Pilot length `L`.
    #[serde(rename = "L")]
    PilotLength,
    #[serde(rename = "snr_db")]
    SnrDb,
    /// BS antennas `M`; the BS grid keeps its ratio to `M`.
    #[serde(rename = "M")]
    BsAntennas,
    /// RIS elements `N`, a perfect square laid out as `√N × √N`; the RIS grids
    /// keep their ratio.
    #[serde(rename = "N")]
    RisElements,
    /// Devices `K`.
    #[serde(rename = "K")]
    Devices,
    #[serde(rename = "lambda_alpha")]
    LambdaAlpha,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::PilotLength => "L",
            Self::SnrDb => "snr_db",
            Self::BsAntennas => "M",
            Self::RisElements => "N",
            Self::Devices => "K",
            Self::LambdaAlpha => "lambda_alpha",
        }
    }

    /// Returns `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} needs a positive integer, got {v}", self.name())))
            }
        };
        let rescale = |grid: usize, old: usize, new: usize| (grid * new).div_ceil(old).max(new);
        match self {
            Self::PilotLength => cfg.pilot_length = count(value)?,
            Self::SnrDb => cfg.snr_db = Some(value),
            Self::BsAntennas => {
                let m = count(value)?;
                cfg.grid.bs = rescale(base.grid.bs, base.bs_antennas, m);
                cfg.bs_antennas = m;
            }
            Self::RisElements => {
                let n = count(value)?;
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(Error::Config(format!("N = {n} is not a perfect square")));
                }
                cfg.grid.ris_h = rescale(base.grid.ris_h, base.ris_rows, side);
                cfg.grid.ris_v = rescale(base.grid.ris_v, base.ris_cols, side);
                cfg.ris_rows = side;
                cfg.ris_cols = side;
            }
            Self::Devices => cfg.devices = count(value)?,
            Self::LambdaAlpha => cfg.lambda_alpha = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "L" => Self::PilotLength,
            "snr_db" | "snr" => Self::SnrDb,
            "M" => Self::BsAntennas,
            "N" => Self::RisElements,
            "K" => Self::Devices,
            "lambda_alpha" => Self::LambdaAlpha,
            other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub trials_per_point: usize,
    /// False-alarm rate the per-point detection threshold is calibrated to.
    pub target_pf: f64,
    /// Also evaluate the genie-aided linear MMSE estimators.
    pub genie: bool,
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(base: SystemConfig, parameter: SweepParameter, values: Vec<f64>, trials_per_point: usize) -> Self {
        Self {
            base,
            parameter,
            values,
            trials_per_point,
            target_pf: 0.1,
            genie: false,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<Vec<SystemConfig>> {
        if self.values.is_empty() || self.trials_per_point == 0 {
            return Err(Error::Config("a sweep needs at least one value and one trial".into()));
        }
        if !(0.0..=1.0).contains(&self.target_pf) {
            return Err(Error::Config(format!("target_pf = {} not in [0, 1]", self.target_pf)));
        }
        self.base.validate()?;
        self.values.iter().map(|v| self.parameter.apply(&self.base, *v)).collect()
    }
}

/// Everything measured in one trial, before threshold calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub n_active: usize,
    pub realized_snr_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub metrics: MetricReport,
    pub genie_nmse_g_db: Option<f64>,
    pub genie_avg_nmse_h_db: Option<f64>,
    /// `‖x̂_k‖₂` per device, divided by its RMS over devices.
    pub scores: Vec<f64>,
    pub alpha_true: Vec<bool>,
}

/// Priors handed to the estimator for a scene drawn from `cfg`.
pub fn scene_priors(cfg: &SystemConfig, scene: &SceneRealization) -> Result<Priors> {
    let angular = angular_prior(cfg)?;
    Ok(Priors {
        lambda_s: angular.lambda_s,
        tau_s: angular.tau_s,
        lambda_alpha: cfg.lambda_alpha,
        tau_h: scene.tau_h.clone(),
        tau_n: scene.tau_n,
    })
}

/// Estimator options for `cfg`; the activity threshold is
/// `epsilon_relative · √(N · mean τ_h)`.
pub fn amp_options(cfg: &SystemConfig, tau_h: &[f64], record_trajectory: bool) -> AmpOptions {
    let mean_tau_h = tau_h.iter().sum::<f64>() / tau_h.len().max(1) as f64;
    AmpOptions {
        max_iter: cfg.amp.max_iter,
        damping: cfg.amp.damping,
        tol: cfg.amp.tol,
        variance_floor: cfg.amp.variance_floor,
        variance_ceiling: cfg.amp.variance_ceiling,
        epsilon_threshold: cfg.amp.epsilon_relative * (cfg.ris_elements() as f64 * mean_tau_h).sqrt(),
        record_trajectory,
    }
}

/// Runs the estimator on a scene with the seeded initialization stream.
pub fn estimate_scene(
    cfg: &SystemConfig,
    scene: &SceneRealization,
    trial_index: u64,
    record_trajectory: bool,
) -> Result<EstimationResult> {
    let priors = scene_priors(cfg, scene)?;
    let opts = amp_options(cfg, &scene.tau_h, record_trajectory);
    let mut rng = stream_rng(cfg.seed, trial_index, Stream::AmpInit);
    estimate(&scene.y, &scene.q, &scene.dictionaries, &priors, &opts, &mut rng)
}

/// Scores an estimate against its scene at a given detection threshold.
pub fn score_estimate(scene: &SceneRealization, est: &EstimationResult, threshold: f64) -> Result<MetricReport> {
    let support = scene.activity.support();
    let (avg_raw, avg) = if support.is_empty() {
        (None, None)
    } else {
        (
            Some(avg_nmse_h_db(&scene.h, &est.x_hat, support, false)?),
            Some(avg_nmse_h_db(&scene.h, &est.x_hat, support, true)?),
        )
    };
    let nmse_g_db = nmse_db(&scene.g, &est.g_hat, true)?;
    let (p_f, p_m) = detection_rates(scene.activity.alpha(), &est.activity_scores, threshold)?;
    Ok(MetricReport {
        nmse_g_db_raw: nmse_db(&scene.g, &est.g_hat, false)?,
        nmse_g_db,
        avg_nmse_h_db_raw: avg_raw,
        avg_nmse_h_db: avg,
        threshold,
        p_f,
        p_m,
        success: nmse_g_db <= SUCCESS_NMSE_DB && avg.is_some_and(|v| v <= SUCCESS_NMSE_DB),
    })
}

/// Genie-aided NMSEs `(G, avg h)` of a scene: each factor estimated by linear
/// MMSE with the other factor and the true support revealed.
pub fn genie_nmse(cfg: &SystemConfig, scene: &SceneRealization) -> Result<(f64, Option<f64>)> {
    let prior = angular_prior(cfg)?;
    let dicts = &scene.dictionaries;
    let s_hat = genie_mmse_s(
        &scene.y,
        &scene.q,
        &scene.x,
        &dicts.bs,
        &dicts.ris,
        prior.lambda_s * prior.tau_s,
        scene.tau_n,
    )?;
    let g_db = nmse_db(&scene.g, &dicts.synthesize(&s_hat), false)?;
    let support = scene.activity.support();
    let h_db = if support.is_empty() {
        None
    } else {
        let x_hat = genie_mmse_x(&scene.y, &scene.q, &scene.g, support, &scene.tau_h, scene.tau_n)?;
        Some(avg_nmse_h_db(&scene.h, &x_hat, support, false)?)
    };
    Ok((g_db, h_db))
}

/// One trial at the estimator's own threshold.
pub fn run_trial(cfg: &SystemConfig, trial_index: u64, genie: bool) -> Result<TrialRecord> {
    let scene = generate_scene(cfg, trial_index)?;
    let est = estimate_scene(cfg, &scene, trial_index, false)?;
    let opts = amp_options(cfg, &scene.tau_h, false);
    let metrics = score_estimate(&scene, &est, opts.epsilon_threshold)?;
    let (genie_g, genie_h) = if genie {
        let (g, h) = genie_nmse(cfg, &scene)?;
        (Some(g), h)
    } else {
        (None, None)
    };
    Ok(TrialRecord {
        trial: trial_index,
        n_active: scene.activity.n_active(),
        realized_snr_db: scene.snr_db,
        iterations: est.iterations_run,
        converged: est.converged,
        diverged: est.diverged,
        metrics,
        genie_nmse_g_db: genie_g,
        genie_avg_nmse_h_db: genie_h,
        scores: scale_free_scores(&est.activity_scores),
        alpha_true: scene.activity.alpha().to_vec(),
    })
}

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub point: usize,
    pub parameter: String,
    pub value: f64,
    pub trial: u64,
    pub failed: bool,
    pub error: String,
    pub n_active: Option<usize>,
    pub realized_snr_db: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub diverged: Option<bool>,
    pub nmse_g_db_raw: Option<f64>,
    pub nmse_g_db: Option<f64>,
    pub avg_nmse_h_db_raw: Option<f64>,
    pub avg_nmse_h_db: Option<f64>,
    pub threshold: Option<f64>,
    pub p_f: Option<f64>,
    pub p_m: Option<f64>,
    pub success: Option<bool>,
    pub genie_nmse_g_db: Option<f64>,
    pub genie_avg_nmse_h_db: Option<f64>,
}

/// Mean and sample standard deviation over the trials where a value exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, count: v.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAggregate {
    pub point: usize,
    pub value: f64,
    pub trials: usize,
    pub failed: usize,
    /// False when every trial of the point failed.
    pub valid: bool,
    pub nmse_g_db: Option<Summary>,
    pub nmse_g_db_raw: Option<Summary>,
    pub avg_nmse_h_db: Option<Summary>,
    pub avg_nmse_h_db_raw: Option<Summary>,
    pub p_f: Option<Summary>,
    pub p_m: Option<Summary>,
    pub success_rate: Option<f64>,
    pub genie_nmse_g_db: Option<Summary>,
    pub genie_avg_nmse_h_db: Option<Summary>,
    pub iterations: Option<Summary>,
    /// ROC of the scores pooled over the point's trials.
    pub roc: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(cfg: &SystemConfig) -> Self {
        let digest = Sha256::digest(cfg.to_toml_string().as_bytes());
        Self {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: cfg.seed,
            version: VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub parameter: String,
    pub target_pf: f64,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<PointAggregate>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.failed)
    }

    pub fn aggregate(&self, point: usize) -> Option<&PointAggregate> {
        self.aggregates.iter().find(|a| a.point == point)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        self.write_json(std::fs::File::create(dir.join("report.json"))?)?;
        Ok(())
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every `(config, trial)` pair on the pool, returned in input order.
fn run_grid(
    configs: &[SystemConfig],
    trials: usize,
    genie: bool,
    workers: usize,
) -> Result<Vec<Vec<std::result::Result<TrialRecord, String>>>> {
    let jobs: Vec<(usize, u64)> =
        (0..configs.len()).flat_map(|p| (0..trials as u64).map(move |t| (p, t))).collect();
    let results: Vec<_> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| run_trial(&configs[p], t, genie).map_err(|e| e.to_string()))
            .collect()
    });
    let mut grid: Vec<Vec<_>> = (0..configs.len()).map(|_| Vec::with_capacity(trials)).collect();
    for ((p, _), r) in jobs.into_iter().zip(results) {
        grid[p].push(r);
    }
    Ok(grid)
}

/// Threshold whose false-alarm rate over the pooled scores of all successful
/// trials of a point is closest to `target_pf`.
fn pooled_threshold(records: &[std::result::Result<TrialRecord, String>], target_pf: f64) -> Result<Option<f64>> {
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for r in records.iter().flatten() {
        labels.extend_from_slice(&r.alpha_true);
        scores.extend_from_slice(&r.scores);
    }
    threshold_for_pf(&labels, &scores, target_pf)
}

fn row_of(point: usize, parameter: &str, value: f64, trial: u64, r: &std::result::Result<TrialRecord, String>) -> ReportRow {
    match r {
        Ok(rec) => {
            let m = &rec.metrics;
            ReportRow {
                point,
                parameter: parameter.to_string(),
                value,
                trial,
                failed: false,
                error: String::new(),
                n_active: Some(rec.n_active),
                realized_snr_db: Some(rec.realized_snr_db),
                iterations: Some(rec.iterations),
                converged: Some(rec.converged),
                diverged: Some(rec.diverged),
                nmse_g_db_raw: Some(m.nmse_g_db_raw),
                nmse_g_db: Some(m.nmse_g_db),
                avg_nmse_h_db_raw: m.avg_nmse_h_db_raw,
                avg_nmse_h_db: m.avg_nmse_h_db,
                threshold: Some(m.threshold),
                p_f: m.p_f,
                p_m: m.p_m,
                success: Some(m.success),
                genie_nmse_g_db: rec.genie_nmse_g_db,
                genie_avg_nmse_h_db: rec.genie_avg_nmse_h_db,
            }
        }
        Err(e) => ReportRow {
            point,
            parameter: parameter.to_string(),
            value,
            trial,
            failed: true,
            error: e.clone(),
            n_active: None,
            realized_snr_db: None,
            iterations: None,
            converged: None,
            diverged: None,
            nmse_g_db_raw: None,
            nmse_g_db: None,
            avg_nmse_h_db_raw: None,
            avg_nmse_h_db: None,
            threshold: None,
            p_f: None,
            p_m: None,
            success: None,
            genie_nmse_g_db: None,
            genie_avg_nmse_h_db: None,
        },
    }
}

fn aggregate(point: usize, value: f64, rows: &[ReportRow], records: &[std::result::Result<TrialRecord, String>]) -> Result<PointAggregate> {
    let ok: Vec<&ReportRow> = rows.iter().filter(|r| !r.failed).collect();
    let col = |f: fn(&ReportRow) -> Option<f64>| Summary::of(ok.iter().filter_map(|r| f(r)));
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for r in records.iter().flatten() {
        labels.extend_from_slice(&r.alpha_true);
        scores.extend_from_slice(&r.scores);
    }
    let roc = if scores.is_empty() { Vec::new() } else { roc_sweep(&labels, &scores, 101)? };
    Ok(PointAggregate {
        point,
        value,
        trials: rows.len(),
        failed: rows.len() - ok.len(),
        valid: !ok.is_empty(),
        nmse_g_db: col(|r| r.nmse_g_db),
        nmse_g_db_raw: col(|r| r.nmse_g_db_raw),
        avg_nmse_h_db: col(|r| r.avg_nmse_h_db),
        avg_nmse_h_db_raw: col(|r| r.avg_nmse_h_db_raw),
        p_f: col(|r| r.p_f),
        p_m: col(|r| r.p_m),
        success_rate: (!ok.is_empty())
            .then(|| ok.iter().filter(|r| r.success == Some(true)).count() as f64 / ok.len() as f64),
        genie_nmse_g_db: col(|r| r.genie_nmse_g_db),
        genie_avg_nmse_h_db: col(|r| r.genie_avg_nmse_h_db),
        iterations: col(|r| r.iterations.map(|i| i as f64)),
        roc,
    })
}

/// Runs a one-dimensional sweep. Detection rates in the rows use one
/// threshold per point, calibrated to `target_pf` on that point's pooled scores.
pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentReport> {
    let configs = spec.validate()?;
    let grid = run_grid(&configs, spec.trials_per_point, spec.genie, spec.workers)?;
    let name = spec.parameter.name();
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for (p, records) in grid.iter().enumerate() {
        let threshold = pooled_threshold(records, spec.target_pf)?;
        let mut point_rows = Vec::with_capacity(records.len());
        for (t, r) in records.iter().enumerate() {
            let mut row = row_of(p, name, spec.values[p], t as u64, r);
            if let (Ok(rec), Some(thr)) = (r, threshold) {
                let (p_f, p_m) = detection_rates(&rec.alpha_true, &rec.scores, thr)?;
                row.threshold = Some(thr);
                row.p_f = p_f;
                row.p_m = p_m;
            }
            point_rows.push(row);
        }
        aggregates.push(aggregate(p, spec.values[p], &point_rows, records)?);
        rows.extend(point_rows);
    }
    Ok(ExperimentReport {
        parameter: name.to_string(),
        target_pf: spec.target_pf,
        rows,
        aggregates,
        provenance: Provenance::of(&spec.base),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTransitionSpec {
    pub base: SystemConfig,
    pub rows: (SweepParameter, Vec<f64>),
    pub cols: (SweepParameter, Vec<f64>),
    pub trials_per_cell: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub row_value: f64,
    pub col_value: f64,
    pub trials: usize,
    pub failed: usize,
    /// Fraction of completed trials meeting the dual −30 dB criterion.
    pub success_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionReport {
    pub row_parameter: String,
    pub col_parameter: String,
    pub cells: Vec<PhaseCell>,
    pub provenance: Provenance,
}

impl PhaseTransitionReport {
    /// Success rates as a row-major matrix.
    pub fn matrix(&self, n_rows: usize, n_cols: usize) -> Vec<Vec<Option<f64>>> {
        (0..n_rows)
            .map(|i| (0..n_cols).map(|j| self.cells[i * n_cols + j].success_rate).collect())
            .collect()
    }

    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(|c| c.failed == c.trials)
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("phase_transition.csv"))?;
        for c in &self.cells {
            w.serialize(c)?;
        }
        w.flush()?;
        serde_json::to_writer_pretty(std::fs::File::create(dir.join("report.json"))?, self)?;
        Ok(())
    }
}

/// Success rate over a two-parameter grid, cells in row-major order.
pub fn phase_transition_grid(spec: &PhaseTransitionSpec) -> Result<PhaseTransitionReport> {
    if spec.rows.1.is_empty() || spec.cols.1.is_empty() || spec.trials_per_cell == 0 {
        return Err(Error::Config("a phase-transition grid needs values on both axes and at least one trial".into()));
    }
    spec.base.validate()?;
    let mut configs = Vec::new();
    let mut coords = Vec::new();
    for &rv in &spec.rows.1 {
        let row_cfg = spec.rows.0.apply(&spec.base, rv)?;
        for &cv in &spec.cols.1 {
            configs.push(spec.cols.0.apply(&row_cfg, cv)?);
            coords.push((rv, cv));
        }
    }
    let grid = run_grid(&configs, spec.trials_per_cell, false, spec.workers)?;
    let cells = grid
        .iter()
        .zip(coords)
        .map(|(records, (row_value, col_value))| {
            let ok: Vec<&TrialRecord> = records.iter().flatten().collect();
            PhaseCell {
                row_value,
                col_value,
                trials: records.len(),
                failed: records.len() - ok.len(),
                success_rate: (!ok.is_empty())
                    .then(|| ok.iter().filter(|r| r.metrics.success).count() as f64 / ok.len() as f64),
            }
        })
        .collect();
    Ok(PhaseTransitionReport {
        row_parameter: spec.rows.0.name().to_string(),
        col_parameter: spec.cols.0.name().to_string(),
        cells,
        provenance: Provenance::of(&spec.base),
    })
}

/// Writes `iteration,residual,mean_v_w,mean_v_s,mean_v_x` rows.
pub fn write_trajectory<W: Write>(est: &EstimationResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "residual", "mean_v_w", "mean_v_s", "mean_v_x"])?;
    for d in &est.trajectory {
        w.write_record([
            d.iteration.to_string(),
            d.residual.to_string(),
            d.mean_v_w.to_string(),
            d.mean_v_s.to_string(),
            d.mean_v_x.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SystemConfig {
        let mut cfg = SystemConfig::desk();
        cfg.devices = 20;
        cfg.bs_antennas = 4;
        cfg.ris_rows = 2;
        cfg.ris_cols = 2;
        cfg.pilot_length = 12;
        cfg.grid.bs = 8;
        cfg.grid.ris_h = 4;
        cfg.grid.ris_v = 4;
        cfg.amp.max_iter = 30;
        cfg
    }

    #[test]
    fn apply_keeps_grid_ratio() {
        let cfg = SweepParameter::BsAntennas.apply(&SystemConfig::desk(), 8.0).unwrap();
        assert_eq!((cfg.bs_antennas, cfg.grid.bs), (8, 16));
        let cfg = SweepParameter::RisElements.apply(&SystemConfig::desk(), 36.0).unwrap();
        assert_eq!((cfg.ris_rows, cfg.grid.ris_h, cfg.grid.ris_v), (6, 12, 12));
        assert!(SweepParameter::RisElements.apply(&SystemConfig::desk(), 20.0).is_err());
        assert!(SweepParameter::PilotLength.apply(&SystemConfig::desk(), 0.0).is_err());
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = tiny();
        assert_eq!(run_trial(&cfg, 3, true).unwrap(), run_trial(&cfg, 3, true).unwrap());
    }

    #[test]
    fn no_active_devices_leaves_rates_undefined() {
        let mut cfg = tiny();
        cfg.lambda_alpha = 1e-9;
        let rec = run_trial(&cfg, 0, false).unwrap();
        assert_eq!(rec.n_active, 0);
        assert_eq!(rec.metrics.p_m, None);
        assert_eq!(rec.metrics.avg_nmse_h_db, None);
        assert!(!rec.metrics.success);
    }

    #[test]
    fn sweep_row_count_and_aggregates() {
        let spec = SweepSpec::new(tiny(), SweepParameter::PilotLength, vec![10.0, 14.0], 3);
        let rep = run_sweep(&spec).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert_eq!(rep.aggregates.len(), 2);
        assert!(rep.aggregates.iter().all(|a| a.valid));
    }

    #[test]
    fn zero_pilot_length_is_a_config_error() {
        let spec = SweepSpec::new(tiny(), SweepParameter::PilotLength, vec![0.0], 1);
        assert!(matches!(run_sweep(&spec), Err(Error::Config(_))));
    }
}

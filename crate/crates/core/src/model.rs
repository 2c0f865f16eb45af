//! Signal model: device activity, pilots, and the received block
//! `Y = G X Q + noise` with `X = H diag(α)`.

use rand::Rng;

use crate::channel::{
    build_vad_dictionaries, device_distance, device_path_losses, rayleigh_channels,
    sample_device_offsets, sample_on_grid_paths, sample_ris_to_bs_channel, tau_g, PathCluster,
    VadDictionaries,
};
use crate::config::SystemConfig;
use crate::error::{dim_check, Error, Result};
use crate::linalg::{complex_normal, complex_normal_matrix, frob2, CMatrix, ZERO};
use crate::rng::{stream_rng, Stream};

/// Which devices transmit in the current block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityPattern {
    alpha: Vec<bool>,
    support: Vec<usize>,
}

impl ActivityPattern {
    pub fn from_flags(alpha: Vec<bool>) -> Self {
        let support = alpha
            .iter()
            .enumerate()
            .filter_map(|(k, &a)| a.then_some(k))
            .collect();
        Self { alpha, support }
    }

    pub fn alpha(&self) -> &[bool] {
        &self.alpha
    }

    /// Indices of the active devices, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn devices(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_active(&self) -> usize {
        self.support.len()
    }
}

/// Each device is active independently with probability `lambda_alpha`.
pub fn sample_activity<R: Rng + ?Sized>(
    devices: usize,
    lambda_alpha: f64,
    rng: &mut R,
) -> Result<ActivityPattern> {
    if devices == 0 {
        return Err(Error::Config("device count must be at least 1".into()));
    }
    if !(lambda_alpha > 0.0 && lambda_alpha < 1.0) {
        return Err(Error::Config(format!(
            "activity probability {lambda_alpha} not in (0, 1)"
        )));
    }
    let alpha = (0..devices).map(|_| rng.random_bool(lambda_alpha)).collect();
    Ok(ActivityPattern::from_flags(alpha))
}

/// `K × L` pilot matrix with i.i.d. CN(0, 1/L) entries; rows have unit norm in
/// expectation and are not renormalized.
pub fn generate_pilots<R: Rng + ?Sized>(devices: usize, length: usize, rng: &mut R) -> Result<CMatrix> {
    if devices == 0 || length == 0 {
        return Err(Error::Dimension(format!(
            "pilot matrix needs positive dimensions, got {devices}x{length}"
        )));
    }
    Ok(complex_normal_matrix(devices, length, 1.0 / length as f64, rng))
}

/// `G X Q + N` with i.i.d. CN(0, tau_n) noise added after the product.
pub fn synthesize_observation<R: Rng + ?Sized>(
    g: &CMatrix,
    x: &CMatrix,
    q: &CMatrix,
    tau_n: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    dim_check(g.ncols() == x.nrows() && x.ncols() == q.nrows(), || {
        format!(
            "G {:?}, X {:?}, Q {:?} do not chain",
            g.shape(),
            x.shape(),
            q.shape()
        )
    })?;
    if !(tau_n >= 0.0) {
        return Err(Error::Domain(format!("noise power {tau_n} must be nonnegative")));
    }
    let mut y = g * x * q;
    if tau_n > 0.0 {
        for z in y.iter_mut() {
            *z += complex_normal(rng, tau_n);
        }
    }
    Ok(y)
}

/// `X = H diag(α)`: inactive columns are exactly zero.
pub fn masked_channels(h: &CMatrix, activity: &ActivityPattern) -> CMatrix {
    let mut x = h.clone();
    for (k, &a) in activity.alpha().iter().enumerate() {
        if !a {
            x.column_mut(k).fill(ZERO);
        }
    }
    x
}

/// Spike-and-slab hyperparameters of the angular-domain coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularPrior {
    pub lambda_s: f64,
    pub tau_s: f64,
}

/// Prior on the angular coefficients implied by the configured channel model.
///
/// `lambda_s` defaults to the path count over the grid size clipped to
/// `[0.01, 0.5]`; `tau_s` defaults to the value matching `E‖G‖²_F`: for the
/// geometric model `τ_G² M N = lambda_s τ_s M' N'`, for on-grid scenes
/// `τ_G² M N = n_paths τ_s`.
pub fn angular_prior(cfg: &SystemConfig) -> Result<AngularPrior> {
    let grid = (cfg.grid.bs * cfg.ris_grid()) as f64;
    let energy = tau_g(cfg)?.powi(2) * (cfg.bs_antennas * cfg.ris_elements()) as f64;
    let paths = cfg.cluster_model.on_grid_paths.unwrap_or(cfg.total_paths());
    let lambda_s = cfg
        .priors
        .lambda_s
        .unwrap_or_else(|| (paths as f64 / grid).clamp(0.01, 0.5));
    let tau_s = cfg.priors.tau_s.unwrap_or_else(|| match cfg.cluster_model.on_grid_paths {
        Some(n) => energy / n.max(1) as f64,
        None => energy / (lambda_s * grid),
    });
    Ok(AngularPrior { lambda_s, tau_s })
}

/// One draw of the full scenario.
#[derive(Debug, Clone)]
pub struct SceneRealization {
    /// `M × N` RIS-to-BS channel.
    pub g: CMatrix,
    /// `N × K` RIS-to-device channels, column `k` is `h_k`.
    pub h: CMatrix,
    /// `N × K` masked channels.
    pub x: CMatrix,
    pub activity: ActivityPattern,
    /// `K × L` pilots.
    pub q: CMatrix,
    /// `M × L` observation.
    pub y: CMatrix,
    pub dictionaries: VadDictionaries,
    /// Angular-domain coefficients, present for on-grid scenes only.
    pub s_true: Option<CMatrix>,
    pub clusters: Vec<PathCluster>,
    /// Per-device large-scale fading `τ_{h,k}`.
    pub tau_h: Vec<f64>,
    pub distances: Vec<f64>,
    /// Noise power used for `y`.
    pub tau_n: f64,
    /// Realized `‖G X Q‖²_F / (M L tau_n)` in dB.
    pub snr_db: f64,
}

impl SceneRealization {
    /// Noiseless `W = G X`.
    pub fn cascaded(&self) -> CMatrix {
        &self.g * &self.x
    }
}

/// Noise power giving `‖Z‖²_F / (M L tau_n)` = `snr_db`; falls back to `fallback`
/// for a zero signal.
pub fn noise_power_for_snr(z: &CMatrix, snr_db: f64, fallback: f64) -> f64 {
    let per_entry = frob2(z) / z.len().max(1) as f64;
    if per_entry > 0.0 {
        per_entry / 10f64.powf(snr_db / 10.0)
    } else {
        fallback
    }
}

fn assemble_scene(
    cfg: &SystemConfig,
    trial_index: u64,
    g: CMatrix,
    s_true: Option<CMatrix>,
    clusters: Vec<PathCluster>,
    dictionaries: VadDictionaries,
) -> Result<SceneRealization> {
    let seed = cfg.seed;
    let activity = sample_activity(
        cfg.devices,
        cfg.lambda_alpha,
        &mut stream_rng(seed, trial_index, Stream::Activity),
    )?;
    let mut pos_rng = stream_rng(seed, trial_index, Stream::Positions);
    let distances: Vec<f64> = sample_device_offsets(cfg, &mut pos_rng)
        .into_iter()
        .map(|(dx, dy)| device_distance(cfg, dx, dy))
        .collect();
    let tau_h = device_path_losses(cfg, &distances)?;
    let h = rayleigh_channels(
        cfg.ris_elements(),
        &tau_h,
        &mut stream_rng(seed, trial_index, Stream::RisToDevice),
    );
    let x = masked_channels(&h, &activity);
    let q = generate_pilots(
        cfg.devices,
        cfg.pilot_length,
        &mut stream_rng(seed, trial_index, Stream::Pilots),
    )?;
    let z = &g * &x * &q;
    let tau_n = match cfg.snr_db {
        Some(snr) => noise_power_for_snr(&z, snr, cfg.tau_n),
        None => cfg.tau_n,
    };
    let signal = frob2(&z) / z.len() as f64;
    let snr_db = 10.0 * (signal / tau_n).log10();
    let y = synthesize_observation(&g, &x, &q, tau_n, &mut stream_rng(seed, trial_index, Stream::Noise))?;
    Ok(SceneRealization {
        g,
        h,
        x,
        activity,
        q,
        y,
        dictionaries,
        s_true,
        clusters,
        tau_h,
        distances,
        tau_n,
        snr_db,
    })
}

/// Scene whose RIS-to-BS channel is exactly `A_B S A_R^H` for a random
/// `n_paths`-sparse `S` with CN(0, tau_s) gains.
pub fn make_on_grid_scene(cfg: &SystemConfig, n_paths: usize, trial_index: u64) -> Result<SceneRealization> {
    cfg.validate()?;
    let dicts = build_vad_dictionaries(cfg)?;
    let mut on_grid = cfg.clone();
    on_grid.cluster_model.on_grid_paths = Some(n_paths);
    let prior = angular_prior(&on_grid)?;
    let s = sample_on_grid_paths(
        &dicts,
        n_paths,
        prior.tau_s,
        &mut stream_rng(cfg.seed, trial_index, Stream::RisToBs),
    )?;
    let g = dicts.synthesize(&s);
    assemble_scene(cfg, trial_index, g, Some(s), Vec::new(), dicts)
}

/// Draws the scene of trial `trial_index`: on-grid when
/// `cluster_model.on_grid_paths` is set, otherwise the clustered geometric channel.
pub fn generate_scene(cfg: &SystemConfig, trial_index: u64) -> Result<SceneRealization> {
    if let Some(n) = cfg.cluster_model.on_grid_paths {
        return make_on_grid_scene(cfg, n, trial_index);
    }
    cfg.validate()?;
    let dicts = build_vad_dictionaries(cfg)?;
    let (g, clusters) =
        sample_ris_to_bs_channel(cfg, &mut stream_rng(cfg.seed, trial_index, Stream::RisToBs))?;
    assemble_scene(cfg, trial_index, g, None, clusters, dicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{op_norm, rank};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn activity_mean_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut total = 0usize;
        for _ in 0..50 {
            total += sample_activity(10_000, 0.08, &mut rng).unwrap().n_active();
        }
        let frac = total as f64 / (50.0 * 10_000.0);
        assert!((0.075..=0.085).contains(&frac), "{frac}");
    }

    #[test]
    fn tiny_activity_gives_empty_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = sample_activity(5, 1e-12, &mut rng).unwrap();
        assert!(a.alpha().iter().all(|x| !x));
        assert!(a.support().is_empty());
    }

    #[test]
    fn activity_rejects_bad_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(sample_activity(5, 1.5, &mut rng), Err(Error::Config(_))));
        assert!(sample_activity(0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn support_matches_flags() {
        let a = ActivityPattern::from_flags(vec![false, true, true, false, true]);
        assert_eq!(a.support(), &[1, 2, 4]);
        assert_eq!(a.n_active(), 3);
    }

    #[test]
    fn pilot_rows_have_unit_energy_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = generate_pilots(2000, 100, &mut rng).unwrap();
        let mean: f64 = q.row_iter().map(|r| r.norm_squared()).sum::<f64>() / 2000.0;
        assert!((0.98..=1.02).contains(&mean), "{mean}");
        let q1 = generate_pilots(20_000, 1, &mut rng).unwrap();
        let var = q1.iter().map(|z| z.norm_sqr()).sum::<f64>() / 20_000.0;
        assert!((var - 1.0).abs() < 0.05);
        assert!(generate_pilots(0, 3, &mut rng).is_err());
    }

    #[test]
    fn noiseless_zero_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = complex_normal_matrix(3, 4, 1.0, &mut rng);
        let x = CMatrix::zeros(4, 5);
        let q = generate_pilots(5, 6, &mut rng).unwrap();
        let y = synthesize_observation(&g, &x, &q, 0.0, &mut rng).unwrap();
        assert!(y.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn single_device_rank_one_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = complex_normal_matrix(6, 1, 1.0, &mut rng);
        let v = complex_normal_matrix(1, 4, 1.0, &mut rng);
        let g = &u * &v;
        let mut x = CMatrix::zeros(4, 7);
        x.set_column(2, &complex_normal_matrix(4, 1, 1.0, &mut rng).column(0));
        let q = generate_pilots(7, 9, &mut rng).unwrap();
        let y = synthesize_observation(&g, &x, &q, 0.0, &mut rng).unwrap();
        assert_eq!(rank(&y, 1e-10), 1);
    }

    #[test]
    fn noise_only_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = CMatrix::zeros(40, 10);
        let x = CMatrix::zeros(10, 20);
        let q = generate_pilots(20, 500, &mut rng).unwrap();
        let y = synthesize_observation(&g, &x, &q, 1e-2, &mut rng).unwrap();
        let var = frob2(&y) / y.len() as f64;
        assert!((var - 1e-2).abs() < 1e-3, "{var}");
    }

    #[test]
    fn dimension_mismatch_is_structural_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = CMatrix::zeros(3, 4);
        let x = CMatrix::zeros(5, 2);
        let q = CMatrix::zeros(2, 2);
        assert!(matches!(
            synthesize_observation(&g, &x, &q, 0.0, &mut rng),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn scenes_are_deterministic_and_sparse() {
        let cfg = SystemConfig::desk();
        let a = generate_scene(&cfg, 3).unwrap();
        let b = generate_scene(&cfg, 3).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.g, b.g);
        assert_eq!(a.x, b.x);
        let c = generate_scene(&cfg, 4).unwrap();
        assert_ne!(a.y, c.y);
        let zero_cols = a.x.column_iter().filter(|c| c.iter().all(|z| *z == ZERO)).count();
        assert_eq!(zero_cols, cfg.devices - a.activity.n_active());
        assert_eq!(a.y.shape(), (cfg.bs_antennas, cfg.pilot_length));
        assert!((a.snr_db - 20.0).abs() < 1e-9);
    }

    #[test]
    fn energy_bound_holds_noiselessly() {
        let mut cfg = SystemConfig::desk();
        cfg.snr_db = None;
        let s = generate_scene(&cfg, 0).unwrap();
        let z = &s.g * &s.x * &s.q;
        let bound = op_norm(&s.g).powi(2) * frob2(&s.x) * op_norm(&s.q).powi(2);
        assert!(frob2(&z) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn on_grid_scene_factorizes_exactly() {
        let cfg = SystemConfig::desk();
        let s = make_on_grid_scene(&cfg, 4, 2).unwrap();
        let st = s.s_true.as_ref().unwrap();
        assert_eq!(st.iter().filter(|z| **z != ZERO).count(), 4);
        let err = frob2(&(&s.g - s.dictionaries.synthesize(st)));
        assert!(err < 1e-28 * frob2(&s.g).max(1.0));
        let empty = make_on_grid_scene(&cfg, 0, 2).unwrap();
        assert!(empty.g.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn angular_prior_matches_channel_energy() {
        let cfg = SystemConfig::desk();
        let p = angular_prior(&cfg).unwrap();
        let energy = tau_g(&cfg).unwrap().powi(2) * 256.0;
        assert!((p.lambda_s * p.tau_s * 2048.0 - energy).abs() < 1e-12 * energy);
    }
}

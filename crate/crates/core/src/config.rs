//! Scenario configuration.
//!
//! A [`SystemConfig`] carries every dimension, geometry constant, prior and
//! algorithm knob of a scenario. It loads from TOML; every key is optional and
//! falls back to the full-scale defaults (`SystemConfig::default()`).
//!
//! ```toml
//! seed = 1
//! devices = 1000          # K
//! bs_antennas = 40        # M
//! ris_rows = 7            # N1 (horizontal elements)
//! ris_cols = 7            # N2 (vertical elements)
//! pilot_length = 130      # L
//! lambda_alpha = 0.08     # activity probability
//! tau_n = 1e-13           # noise power, linear (ignored when snr_db is set)
//! snr_db = 20.0           # optional; derives tau_n per trial
//!
//! [grid]                  # virtual angular domain sizes
//! bs = 80                 # M'
//! ris_h = 14              # N1'
//! ris_v = 14              # N2'
//!
//! [geometry]              # meters
//! z_r = 10.0
//! x_r = 5.0
//! y_r = 100.0
//! o_x = 5.0
//! o_y = 100.0
//! radius = 50.0
//!
//! [pathloss]
//! tau_0 = 1e-3            # linear gain at d_0 (-30 dB)
//! d_0 = 1.0               # m
//! mu_g = 2.2
//! mu_h = 2.5
//! tau_g_convention = "amplitude"   # or "power"
//!
//! [cluster_model]
//! n_clusters = 10
//! subpaths_per_cluster = 5
//! angular_spread = 0.2617993877991494   # rad (pi/12)
//! # on_grid_paths = 4    # replace the geometric channel with an on-grid one
//!
//! [priors]                # omitted values are derived from the channel model
//! # lambda_s = 0.05
//! # tau_s = 1e-6
//!
//! [amp]
//! max_iter = 2000
//! damping = 0.5
//! tol = 1e-6
//! variance_floor = 1e-12
//! variance_ceiling = 1e12
//! epsilon_relative = 0.1  # activity threshold as a fraction of sqrt(N * tau_h)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Antenna spacing in wavelengths, shared by the BS array and the RIS.
pub const SPACING_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub seed: u64,
    pub devices: usize,
    pub bs_antennas: usize,
    pub ris_rows: usize,
    pub ris_cols: usize,
    pub pilot_length: usize,
    pub lambda_alpha: f64,
    pub tau_n: f64,
    pub snr_db: Option<f64>,
    pub grid: GridConfig,
    pub geometry: Geometry,
    pub pathloss: PathLossConfig,
    pub cluster_model: ClusterModel,
    pub priors: PriorConfig,
    pub amp: AmpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub bs: usize,
    pub ris_h: usize,
    pub ris_v: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub z_r: f64,
    pub x_r: f64,
    pub y_r: f64,
    pub o_x: f64,
    pub o_y: f64,
    pub radius: f64,
}

/// How the RIS-to-BS path loss enters the channel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauGConvention {
    /// Channel amplitude scaled by the square root of the power gain.
    Amplitude,
    /// Channel amplitude scaled by the power gain itself.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossConfig {
    pub tau_0: f64,
    pub d_0: f64,
    pub mu_g: f64,
    pub mu_h: f64,
    pub tau_g_convention: TauGConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterModel {
    pub n_clusters: usize,
    pub subpaths_per_cluster: usize,
    pub angular_spread: f64,
    pub on_grid_paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub lambda_s: Option<f64>,
    pub tau_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpConfig {
    pub max_iter: usize,
    pub damping: f64,
    pub tol: f64,
    pub variance_floor: f64,
    pub variance_ceiling: f64,
    pub epsilon_relative: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            devices: 1000,
            bs_antennas: 40,
            ris_rows: 7,
            ris_cols: 7,
            pilot_length: 130,
            lambda_alpha: 0.08,
            tau_n: 1e-13,
            snr_db: Some(20.0),
            grid: GridConfig::default(),
            geometry: Geometry::default(),
            pathloss: PathLossConfig::default(),
            cluster_model: ClusterModel::default(),
            priors: PriorConfig::default(),
            amp: AmpConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            bs: 80,
            ris_h: 14,
            ris_v: 14,
        }
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            z_r: 10.0,
            x_r: 5.0,
            y_r: 100.0,
            o_x: 5.0,
            o_y: 100.0,
            radius: 50.0,
        }
    }
}

impl Default for PathLossConfig {
    fn default() -> Self {
        Self {
            tau_0: 1e-3,
            d_0: 1.0,
            mu_g: 2.2,
            mu_h: 2.5,
            tau_g_convention: TauGConvention::Amplitude,
        }
    }
}

impl Default for ClusterModel {
    fn default() -> Self {
        Self {
            n_clusters: 10,
            subpaths_per_cluster: 5,
            angular_spread: std::f64::consts::PI / 12.0,
            on_grid_paths: None,
        }
    }
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            damping: 0.1,
            tol: 1e-6,
            variance_floor: 1e-12,
            variance_ceiling: 1e12,
            epsilon_relative: 0.1,
        }
    }
}

/// Named starting points for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

impl SystemConfig {
    pub fn paper() -> Self {
        Self::default()
    }

    /// Scaled-down scenario that runs in seconds.
    pub fn desk() -> Self {
        Self {
            devices: 100,
            lambda_alpha: 0.1,
            bs_antennas: 16,
            ris_rows: 4,
            ris_cols: 4,
            pilot_length: 40,
            grid: GridConfig {
                bs: 32,
                ris_h: 8,
                ris_v: 8,
            },
            amp: AmpConfig {
                max_iter: 300,
                ..AmpConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// RIS element count `N = N1 * N2`.
    pub fn ris_elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    /// Angular-domain RIS grid size `N' = N1' * N2'`.
    pub fn ris_grid(&self) -> usize {
        self.grid.ris_h * self.grid.ris_v
    }

    pub fn total_paths(&self) -> usize {
        self.cluster_model.n_clusters * self.cluster_model.subpaths_per_cluster
    }

    /// Sets all three grid sizes to `ratio` times the array sizes.
    pub fn with_grid_ratio(mut self, ratio: usize) -> Self {
        self.grid = GridConfig {
            bs: ratio * self.bs_antennas,
            ris_h: ratio * self.ris_rows,
            ris_v: ratio * self.ris_cols,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(msg: String) -> Result<()> {
            Err(Error::Config(msg))
        }
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        for (name, v) in [
            ("devices", self.devices),
            ("bs_antennas", self.bs_antennas),
            ("ris_rows", self.ris_rows),
            ("ris_cols", self.ris_cols),
            ("pilot_length", self.pilot_length),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.grid.bs < self.bs_antennas
            || self.grid.ris_h < self.ris_rows
            || self.grid.ris_v < self.ris_cols
        {
            return bad(format!(
                "angular grid ({}, {}, {}) smaller than array ({}, {}, {})",
                self.grid.bs,
                self.grid.ris_h,
                self.grid.ris_v,
                self.bs_antennas,
                self.ris_rows,
                self.ris_cols
            ));
        }
        if !open_unit(self.lambda_alpha) {
            return bad(format!("lambda_alpha = {} not in (0, 1)", self.lambda_alpha));
        }
        if !(self.tau_n > 0.0) {
            return bad(format!("tau_n = {} must be positive", self.tau_n));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad("snr_db must be finite".into());
            }
        }
        let pl = &self.pathloss;
        if !(pl.tau_0 > 0.0) || !(pl.d_0 > 0.0) {
            return bad("tau_0 and d_0 must be positive".into());
        }
        if !(pl.mu_g >= 0.0) || !(pl.mu_h >= 0.0) {
            return bad("path-loss exponents must be nonnegative".into());
        }
        let g = &self.geometry;
        if !(g.radius >= 0.0) || !g.z_r.is_finite() || !g.x_r.is_finite() || !g.y_r.is_finite() {
            return bad("invalid geometry".into());
        }
        let cm = &self.cluster_model;
        if cm.on_grid_paths.is_none() && (cm.n_clusters == 0 || cm.subpaths_per_cluster == 0) {
            return bad("cluster model needs at least one path".into());
        }
        if !(cm.angular_spread >= 0.0) {
            return bad("angular_spread must be nonnegative".into());
        }
        if let Some(p) = cm.on_grid_paths {
            if p > self.grid.bs * self.ris_grid() {
                return bad(format!("on_grid_paths = {p} exceeds the grid size"));
            }
        }
        if let Some(ls) = self.priors.lambda_s {
            if !open_unit(ls) {
                return bad(format!("lambda_s = {ls} not in (0, 1)"));
            }
        }
        if let Some(ts) = self.priors.tau_s {
            if !(ts > 0.0) {
                return bad(format!("tau_s = {ts} must be positive"));
            }
        }
        let a = &self.amp;
        if a.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(a.damping > 0.0 && a.damping <= 1.0) {
            return bad(format!("damping = {} not in (0, 1]", a.damping));
        }
        if !(a.tol >= 0.0) || !(a.variance_floor > 0.0) || !(a.variance_ceiling > a.variance_floor) {
            return bad("invalid tol / variance bounds".into());
        }
        if !(a.epsilon_relative >= 0.0) {
            return bad("epsilon_relative must be nonnegative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
        SystemConfig::desk().validate().unwrap();
        assert_eq!(SystemConfig::default().ris_elements(), 49);
        assert_eq!(SystemConfig::desk().ris_grid(), 64);
    }

    #[test]
    fn toml_overrides_merge_with_defaults() {
        let cfg = SystemConfig::from_toml_str(
            "devices = 20\npilot_length = 8\n[amp]\ndamping = 0.3\n",
        )
        .unwrap();
        assert_eq!(cfg.devices, 20);
        assert_eq!(cfg.pilot_length, 8);
        assert_eq!(cfg.amp.damping, 0.3);
        assert_eq!(cfg.amp.max_iter, 2000);
        assert_eq!(cfg.bs_antennas, 40);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = SystemConfig::desk();
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_invalid_values() {
        let mut cfg = SystemConfig::desk();
        cfg.pilot_length = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = SystemConfig::desk();
        cfg.grid.bs = 8;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.lambda_alpha = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.amp.damping = 0.0;
        assert!(cfg.validate().is_err());
        assert!(SystemConfig::from_toml_str("bogus_key = 3").is_err());
    }
}

//! Channel generation: array steering vectors, path loss, the clustered
//! geometric RIS-to-BS channel, Rayleigh RIS-to-device channels and the
//! virtual-angular-domain dictionaries.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::config::{SystemConfig, TauGConvention, SPACING_RATIO};
use crate::error::{Error, Result};
use crate::linalg::{complex_normal, kron, kron_vec, CMatrix, CVector, ZERO};

/// Uniform linear array response, unit norm.
///
/// Entry `m` is `exp(-j 2π · spacing_ratio · m · sin θ) / √M`.
pub fn ula_steering(m: usize, theta: f64, spacing_ratio: f64) -> CVector {
    phase_progression(m, -2.0 * PI * spacing_ratio * theta.sin())
}

/// Horizontal factor of the RIS response, spatial frequency `cos ω sin ψ`.
pub fn ris_horizontal_steering(n1: usize, psi: f64, omega: f64, spacing_ratio: f64) -> CVector {
    phase_progression(n1, -2.0 * PI * spacing_ratio * omega.cos() * psi.sin())
}

/// Vertical factor of the RIS response, spatial frequency `cos ω cos ψ` with a
/// positive phase progression.
pub fn ris_vertical_steering(n2: usize, psi: f64, omega: f64, spacing_ratio: f64) -> CVector {
    phase_progression(n2, 2.0 * PI * spacing_ratio * omega.cos() * psi.cos())
}

/// Uniform rectangular array response `a_v(ψ, ω) ⊗ a_h(ψ, ω)`.
pub fn ura_steering(n1: usize, n2: usize, psi: f64, omega: f64, spacing_ratio: f64) -> CVector {
    kron_vec(
        &ris_vertical_steering(n2, psi, omega, spacing_ratio),
        &ris_horizontal_steering(n1, psi, omega, spacing_ratio),
    )
}

fn phase_progression(len: usize, step: f64) -> CVector {
    let scale = 1.0 / (len as f64).sqrt();
    CVector::from_fn(len, |i, _| Complex64::from_polar(scale, step * i as f64))
}

/// Power-law path loss `tau_0 (d / d_0)^(-mu)`, linear power gain.
pub fn path_loss(d: f64, mu: f64, tau_0: f64, d_0: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("path loss distance must be positive, got {d}")));
    }
    Ok(tau_0 * (d / d_0).powf(-mu))
}

/// One propagation path between BS and RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct Subpath {
    /// Azimuth angle of arrival at the BS.
    pub theta: f64,
    /// Azimuth angle of departure at the RIS.
    pub psi: f64,
    /// Elevation angle of departure at the RIS.
    pub omega: f64,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCluster {
    pub center_aoa_bs: f64,
    pub center_azimuth_aod_ris: f64,
    pub center_elevation_aod_ris: f64,
    pub subpaths: Vec<Subpath>,
}

/// RIS-to-BS distance.
pub fn ris_to_bs_distance(cfg: &SystemConfig) -> f64 {
    cfg.geometry.x_r.hypot(cfg.geometry.y_r)
}

/// Amplitude factor applied to the geometric channel.
pub fn tau_g(cfg: &SystemConfig) -> Result<f64> {
    let pl = &cfg.pathloss;
    let gain = path_loss(ris_to_bs_distance(cfg), pl.mu_g, pl.tau_0, pl.d_0)?;
    Ok(match pl.tau_g_convention {
        TauGConvention::Amplitude => gain.sqrt(),
        TauGConvention::Power => gain,
    })
}

/// `τ_G · √(MN/P) · Σ_p κ_p a_B(θ_p) a_R(ψ_p, ω_p)^H` for an explicit path list.
pub fn channel_from_paths(
    m: usize,
    n1: usize,
    n2: usize,
    tau_g: f64,
    paths: &[Subpath],
) -> CMatrix {
    let n = n1 * n2;
    let mut g = CMatrix::zeros(m, n);
    if paths.is_empty() {
        return g;
    }
    for p in paths {
        let a_b = ula_steering(m, p.theta, SPACING_RATIO);
        let a_r = ura_steering(n1, n2, p.psi, p.omega, SPACING_RATIO);
        g += (a_b * a_r.adjoint()) * p.gain;
    }
    g * Complex64::from(tau_g * ((m * n) as f64 / paths.len() as f64).sqrt())
}

/// Draws the clustered geometric RIS-to-BS channel.
///
/// Cluster centres are uniform over the BS azimuth `[-π/2, π/2]`, RIS azimuth
/// `[-π, π]` and RIS elevation `[-π/2, π/2]`; subpaths are uniform within
/// `±angular_spread` of their centre and carry CN(0, 1) gains.
pub fn sample_ris_to_bs_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<(CMatrix, Vec<PathCluster>)> {
    let cm = &cfg.cluster_model;
    if cm.n_clusters == 0 || cm.subpaths_per_cluster == 0 {
        return Err(Error::Config("cluster model needs at least one path".into()));
    }
    let spread = cm.angular_spread;
    let offset = |rng: &mut R| {
        if spread > 0.0 {
            rng.random_range(-spread..=spread)
        } else {
            0.0
        }
    };
    let mut clusters = Vec::with_capacity(cm.n_clusters);
    for _ in 0..cm.n_clusters {
        let center_aoa_bs = rng.random_range(-PI / 2.0..=PI / 2.0);
        let center_azimuth_aod_ris = rng.random_range(-PI..=PI);
        let center_elevation_aod_ris = rng.random_range(-PI / 2.0..=PI / 2.0);
        let subpaths = (0..cm.subpaths_per_cluster)
            .map(|_| Subpath {
                theta: center_aoa_bs + offset(rng),
                psi: center_azimuth_aod_ris + offset(rng),
                omega: center_elevation_aod_ris + offset(rng),
                gain: complex_normal(rng, 1.0),
            })
            .collect();
        clusters.push(PathCluster {
            center_aoa_bs,
            center_azimuth_aod_ris,
            center_elevation_aod_ris,
            subpaths,
        });
    }
    let paths: Vec<Subpath> = clusters.iter().flat_map(|c| c.subpaths.iter().cloned()).collect();
    let g = channel_from_paths(cfg.bs_antennas, cfg.ris_rows, cfg.ris_cols, tau_g(cfg)?, &paths);
    Ok((g, clusters))
}

/// Horizontal device offsets drawn uniformly over the coverage disk.
pub fn sample_device_offsets<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    (0..cfg.devices)
        .map(|_| {
            let r = cfg.geometry.radius * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            (r * phi.cos(), r * phi.sin())
        })
        .collect()
}

/// 3-D link distance of a device at horizontal offset `(dx, dy)` from the disk centre.
pub fn device_distance(cfg: &SystemConfig, dx: f64, dy: f64) -> f64 {
    let g = &cfg.geometry;
    ((g.o_x + dx).powi(2) + (g.o_y + dy).powi(2) + g.z_r.powi(2)).sqrt()
}

pub fn device_path_losses(cfg: &SystemConfig, distances: &[f64]) -> Result<Vec<f64>> {
    let pl = &cfg.pathloss;
    distances
        .iter()
        .map(|&d| path_loss(d, pl.mu_h, pl.tau_0, pl.d_0))
        .collect()
}

/// Rayleigh RIS-to-device channels: column `k` is i.i.d. CN(0, τ_{h,k}).
pub fn sample_ris_to_device_channels<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    distances: &[f64],
    rng: &mut R,
) -> Result<CMatrix> {
    let tau_h = device_path_losses(cfg, distances)?;
    Ok(rayleigh_channels(cfg.ris_elements(), &tau_h, rng))
}

pub fn rayleigh_channels<R: Rng + ?Sized>(n: usize, tau_h: &[f64], rng: &mut R) -> CMatrix {
    let mut h = CMatrix::zeros(n, tau_h.len());
    for (k, &tau) in tau_h.iter().enumerate() {
        for i in 0..n {
            h[(i, k)] = complex_normal(rng, tau);
        }
    }
    h
}

/// Over-complete steering dictionaries of the virtual angular domain.
///
/// `ris = ris_v ⊗ ris_h`, so grid column `j` of `ris` corresponds to the pair
/// `(j / N1', j % N1')` of (vertical, horizontal) grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct VadDictionaries {
    /// `M × M'` BS dictionary.
    pub bs: CMatrix,
    /// `N1 × N1'` horizontal RIS factor.
    pub ris_h: CMatrix,
    /// `N2 × N2'` vertical RIS factor.
    pub ris_v: CMatrix,
    /// `N × N'` RIS dictionary.
    pub ris: CMatrix,
    pub bs_grid: Vec<f64>,
    pub azimuth_grid: Vec<f64>,
    pub elevation_grid: Vec<f64>,
}

fn uniform_grid(len: usize, lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / len as f64;
    (0..len).map(|i| lo + step * i as f64).collect()
}

/// Builds the dictionaries from uniform grids: `ϑ` over `[-π/2, π/2)`, `φ` over
/// `[-π, π)` and `ϖ` over `[-π/2, π/2)`.
///
/// BS columns are ULA responses at `ϑ`. The RIS factor columns read the grid
/// angle as the inter-element phase: the horizontal factor uses spatial
/// frequency `φ/π` and the vertical one `2ϖ/π`, both covering `[-1, 1)`
/// without repeated columns.
pub fn build_vad_dictionaries(cfg: &SystemConfig) -> Result<VadDictionaries> {
    let (m, n1, n2) = (cfg.bs_antennas, cfg.ris_rows, cfg.ris_cols);
    let (mg, n1g, n2g) = (cfg.grid.bs, cfg.grid.ris_h, cfg.grid.ris_v);
    if mg < m || n1g < n1 || n2g < n2 {
        return Err(Error::Config(format!(
            "angular grid ({mg}, {n1g}, {n2g}) smaller than array ({m}, {n1}, {n2})"
        )));
    }
    let bs_grid = uniform_grid(mg, -PI / 2.0, PI / 2.0);
    let azimuth_grid = uniform_grid(n1g, -PI, PI);
    let elevation_grid = uniform_grid(n2g, -PI / 2.0, PI / 2.0);

    let columns = |rows: usize, grid: &[f64], f: &dyn Fn(f64) -> CVector| {
        let mut out = CMatrix::zeros(rows, grid.len());
        for (j, &angle) in grid.iter().enumerate() {
            out.set_column(j, &f(angle));
        }
        out
    };
    let bs = columns(m, &bs_grid, &|t| ula_steering(m, t, SPACING_RATIO));
    let ris_h = columns(n1, &azimuth_grid, &|phi| {
        phase_progression(n1, -2.0 * PI * SPACING_RATIO * (phi / PI))
    });
    let ris_v = columns(n2, &elevation_grid, &|w| {
        phase_progression(n2, 2.0 * PI * SPACING_RATIO * (2.0 * w / PI))
    });
    let ris = kron(&ris_v, &ris_h);
    Ok(VadDictionaries {
        bs,
        ris_h,
        ris_v,
        ris,
        bs_grid,
        azimuth_grid,
        elevation_grid,
    })
}

impl VadDictionaries {
    /// `A_B S A_R^H`.
    pub fn synthesize(&self, s: &CMatrix) -> CMatrix {
        &self.bs * s * self.ris.adjoint()
    }

    /// Writes the dictionaries as a little-endian binary dump.
    ///
    /// Layout: magic `b"VAD1"`, then for each of `bs`, `ris_h`, `ris_v`, `ris`:
    /// `u32 rows`, `u32 cols`, then `rows * cols` row-major `(f32 re, f32 im)` pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"VAD1")?;
        for mat in [&self.bs, &self.ris_h, &self.ris_v, &self.ris] {
            out.write_all(&(mat.nrows() as u32).to_le_bytes())?;
            out.write_all(&(mat.ncols() as u32).to_le_bytes())?;
            for i in 0..mat.nrows() {
                for j in 0..mat.ncols() {
                    let z = mat[(i, j)];
                    out.write_all(&(z.re as f32).to_le_bytes())?;
                    out.write_all(&(z.im as f32).to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reads a dump produced by [`write_binary`](Self::write_binary) back into
    /// its four matrices.
    pub fn read_binary(bytes: &[u8]) -> Result<Vec<CMatrix>> {
        let bad = || Error::Domain("malformed dictionary dump".into());
        if bytes.len() < 4 || &bytes[..4] != b"VAD1" {
            return Err(bad());
        }
        let mut pos = 4;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(bad)?;
            pos += n;
            Ok(s)
        };
        let mut mats = Vec::with_capacity(4);
        for _ in 0..4 {
            let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let mut m = CMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let re = f32::from_le_bytes(take(4)?.try_into().unwrap());
                    let im = f32::from_le_bytes(take(4)?.try_into().unwrap());
                    m[(i, j)] = Complex64::new(re as f64, im as f64);
                }
            }
            mats.push(m);
        }
        Ok(mats)
    }
}

/// Places `gains` at the given `(bs_grid, ris_grid)` indices of an otherwise zero
/// angular-domain matrix.
pub fn sparse_angular_matrix(
    dicts: &VadDictionaries,
    entries: &[(usize, usize, Complex64)],
) -> CMatrix {
    let mut s = CMatrix::from_element(dicts.bs.ncols(), dicts.ris.ncols(), ZERO);
    for &(i, j, gain) in entries {
        s[(i, j)] += gain;
    }
    s
}

/// Draws `n_paths` distinct angular-domain grid positions with CN(0, τ_s) gains.
pub fn sample_on_grid_paths<R: Rng + ?Sized>(
    dicts: &VadDictionaries,
    n_paths: usize,
    tau_s: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    let (mg, ng) = (dicts.bs.ncols(), dicts.ris.ncols());
    if n_paths > mg * ng {
        return Err(Error::Config(format!(
            "{n_paths} on-grid paths exceed the {mg}x{ng} grid"
        )));
    }
    let picks = rand::seq::index::sample(rng, mg * ng, n_paths);
    let entries: Vec<_> = picks
        .iter()
        .map(|idx| (idx / ng, idx % ng, complex_normal(rng, tau_s)))
        .collect();
    Ok(sparse_angular_matrix(dicts, &entries))
}

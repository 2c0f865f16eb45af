//! Reference estimators: a brute-force quadrature of the scalar spike-and-slab
//! posterior, and linear MMSE estimators of one factor given the other.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{CMatrix, ZERO};

/// Mass fraction on the outer ring of the quadrature grid above which the
/// grid is reported as too narrow.
pub const QUADRATURE_TAIL_LIMIT: f64 = 1e-8;

/// Posterior mean and variance of `x ~ λ CN(0, τ) + (1 − λ) δ₀` given
/// `r = x + CN(0, v)`, by trapezoidal integration over the complex plane.
///
/// The grid is a square of `grid_points × grid_points` nodes centred on the
/// slab posterior mode, extending `grid_half_width` posterior standard
/// deviations (per real dimension) each way. The spike contributes its atom
/// exactly. All weights are accumulated relative to the largest log-density,
/// so extreme SNRs do not underflow.
pub fn quadrature_bg_oracle(
    r: Complex64,
    v: f64,
    lambda: f64,
    tau: f64,
    grid_half_width: f64,
    grid_points: usize,
) -> Result<(Complex64, f64)> {
    if grid_points < 201 {
        return Err(Error::Domain(format!("quadrature needs at least 201 points per axis, got {grid_points}")));
    }
    if !(v > 0.0 && tau > 0.0 && (0.0..=1.0).contains(&lambda) && grid_half_width > 0.0) {
        return Err(Error::Domain(format!("bad quadrature inputs v={v}, tau={tau}, lambda={lambda}")));
    }
    if lambda == 0.0 {
        return Ok((ZERO, 0.0));
    }
    let ln_pi = std::f64::consts::PI.ln();
    let log_slab = |x: Complex64| lambda.ln() - ln_pi - tau.ln() - x.norm_sqr() / tau - ln_pi - v.ln() - (r - x).norm_sqr() / v;

    let center = r * (tau / (tau + v));
    let sd = (0.5 * tau * v / (tau + v)).sqrt();
    let half = grid_half_width * sd;
    let h = 2.0 * half / (grid_points - 1) as f64;
    let node = |i: usize| -half + h * i as f64;
    let weight = |i: usize| if i == 0 || i == grid_points - 1 { 0.5 } else { 1.0 };

    let mut peak = f64::NEG_INFINITY;
    for i in 0..grid_points {
        for j in 0..grid_points {
            peak = peak.max(log_slab(center + Complex64::new(node(i), node(j))));
        }
    }
    let (mut z0, mut z1, mut z2, mut ring) = (0.0, ZERO, 0.0, 0.0);
    for i in 0..grid_points {
        for j in 0..grid_points {
            let x = center + Complex64::new(node(i), node(j));
            let f = (log_slab(x) - peak).exp();
            let w = weight(i) * weight(j) * f;
            z0 += w;
            z1 += x * w;
            z2 += x.norm_sqr() * w;
            if i == 0 || j == 0 || i == grid_points - 1 || j == grid_points - 1 {
                ring += f;
            }
        }
    }
    if ring > QUADRATURE_TAIL_LIMIT * z0 {
        return Err(Error::GridTooNarrow(ring / z0));
    }
    let log_slab_evidence = peak + (z0 * h * h).ln();
    let slab_prob = if lambda == 1.0 {
        1.0
    } else {
        let log_spike_evidence = (1.0 - lambda).ln() - ln_pi - v.ln() - r.norm_sqr() / v;
        1.0 / (1.0 + (log_spike_evidence - log_slab_evidence).exp())
    };
    let mean = z1 / z0 * slab_prob;
    let second = z2 / z0 * slab_prob;
    Ok((mean, (second - mean.norm_sqr()).max(0.0)))
}

/// Solves `τ_n Z + L Z R = Y` for Hermitian positive semidefinite `L`, `R`
/// by diagonalizing both. Modes whose denominator vanishes are dropped,
/// which gives the minimum-norm solution in the noiseless limit.
fn solve_sylvester_kron(l: &CMatrix, rm: &CMatrix, y: &CMatrix, tau_n: f64) -> CMatrix {
    let el = SymmetricEigen::new(l.clone());
    let er = SymmetricEigen::new(rm.clone());
    let mut t = el.eigenvectors.adjoint() * y * &er.eigenvectors;
    let scale = el.eigenvalues.amax() * er.eigenvalues.amax() + tau_n;
    let cutoff = 1e-13 * scale;
    for j in 0..t.ncols() {
        for i in 0..t.nrows() {
            let den = el.eigenvalues[i].max(0.0) * er.eigenvalues[j].max(0.0) + tau_n;
            t[(i, j)] = if den > cutoff { t[(i, j)] / den } else { ZERO };
        }
    }
    &el.eigenvectors * t * er.eigenvectors.adjoint()
}

/// Linear MMSE of `X` given the true cascaded channel and the true support.
///
/// Active columns carry independent `CN(0, τ_{h,k})` priors; inactive
/// columns are zero. Returns an `N × K` matrix.
pub fn genie_mmse_x(
    y: &CMatrix,
    q: &CMatrix,
    g_true: &CMatrix,
    support: &[usize],
    tau_h: &[f64],
    tau_n: f64,
) -> Result<CMatrix> {
    let (m, n, k) = (g_true.nrows(), g_true.ncols(), q.nrows());
    dim_check(y.nrows() == m && y.ncols() == q.ncols() && tau_h.len() == k, || {
        format!("genie_mmse_x: Y {:?}, Q {:?}, G {:?}, {} variances", y.shape(), q.shape(), g_true.shape(), tau_h.len())
    })?;
    if support.is_empty() {
        return Err(Error::Domain("genie_mmse_x needs a nonempty support".into()));
    }
    if support.iter().any(|&i| i >= k) {
        return Err(Error::Dimension("support index out of range".into()));
    }
    let q_a = CMatrix::from_fn(support.len(), q.ncols(), |i, l| q[(support[i], l)]);
    let d = CMatrix::from_fn(support.len(), support.len(), |i, j| {
        if i == j { tau_h[support[i]].into() } else { ZERO }
    });
    let left = g_true * g_true.adjoint();
    let right = q_a.adjoint() * &d * &q_a;
    let z = solve_sylvester_kron(&left, &right, y, tau_n.max(0.0));
    let x_a = g_true.adjoint() * z * q_a.adjoint() * d;
    let mut out = CMatrix::zeros(n, k);
    for (c, &kk) in support.iter().enumerate() {
        out.set_column(kk, &x_a.column(c));
    }
    Ok(out)
}

/// Linear MMSE of the angular matrix `S` given the true `X`, under an i.i.d.
/// `CN(0, prior_var)` prior on every grid entry.
pub fn genie_mmse_s(
    y: &CMatrix,
    q: &CMatrix,
    x_true: &CMatrix,
    a_b: &CMatrix,
    a_r: &CMatrix,
    prior_var: f64,
    tau_n: f64,
) -> Result<CMatrix> {
    dim_check(
        y.nrows() == a_b.nrows() && a_r.nrows() == x_true.nrows() && x_true.ncols() == q.nrows() && y.ncols() == q.ncols(),
        || format!("genie_mmse_s: Y {:?}, Q {:?}, X {:?}, A_B {:?}, A_R {:?}", y.shape(), q.shape(), x_true.shape(), a_b.shape(), a_r.shape()),
    )?;
    if !(prior_var > 0.0) {
        return Err(Error::Domain("genie_mmse_s needs a positive prior variance".into()));
    }
    let b = a_r.adjoint() * x_true * q;
    let left = a_b * a_b.adjoint() * Complex64::from(prior_var);
    let right = b.adjoint() * &b;
    let z = solve_sylvester_kron(&left, &right, y, tau_n.max(0.0));
    Ok(a_b.adjoint() * z * b.adjoint() * Complex64::from(prior_var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::bg_denoise;
    use crate::linalg::complex_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_case_matches_closed_form() {
        let r = Complex64::new(0.3, -1.2);
        let (m, v) = quadrature_bg_oracle(r, 0.7, 1.0, 2.0, 12.0, 201).unwrap();
        assert!((m - r * (2.0 / 2.7)).norm() < 1e-8);
        assert!((v - 1.4 / 2.7).abs() < 1e-8);
    }

    #[test]
    fn spike_only_is_zero() {
        let (m, v) = quadrature_bg_oracle(Complex64::new(3.0, 1.0), 1.0, 0.0, 1.0, 12.0, 201).unwrap();
        assert_eq!(m, ZERO);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn refinement_is_stable_and_matches_denoiser() {
        let r = Complex64::new(0.3, 0.4);
        let (m4, v4) = quadrature_bg_oracle(r, 0.5, 0.2, 2.0, 12.0, 401).unwrap();
        let (m8, v8) = quadrature_bg_oracle(r, 0.5, 0.2, 2.0, 12.0, 801).unwrap();
        assert!((m4 - m8).norm() < 1e-8 && (v4 - v8).abs() < 1e-8);
        let post = bg_denoise(r, 0.5, 0.2, 2.0).unwrap();
        assert!((post.mean - m4).norm() < 1e-6 && (post.var - v4).abs() < 1e-6);
    }

    #[test]
    fn narrow_grid_is_reported() {
        let err = quadrature_bg_oracle(Complex64::new(0.3, 0.4), 0.5, 0.2, 2.0, 2.0, 201).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow(_)));
    }

    #[test]
    fn genie_x_noiseless_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, n, k, l) = (6, 3, 5, 8);
        let g = complex_normal_matrix(m, n, 1.0, &mut rng);
        let mut x = complex_normal_matrix(n, k, 1.0, &mut rng);
        x.column_mut(1).fill(ZERO);
        x.column_mut(3).fill(ZERO);
        let q = complex_normal_matrix(k, l, 1.0 / l as f64, &mut rng);
        let y = &g * &x * &q;
        let est = genie_mmse_x(&y, &q, &g, &[0, 2, 4], &[1.0; 5], 0.0).unwrap();
        assert!((est - &x).norm() < 1e-8 * x.norm());
    }

    #[test]
    fn genie_with_zero_map_returns_prior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = complex_normal_matrix(4, 6, 1.0, &mut rng);
        let y = complex_normal_matrix(3, 6, 1.0, &mut rng);
        let est = genie_mmse_x(&y, &q, &CMatrix::zeros(3, 2), &[0, 1], &[1.0; 4], 0.1).unwrap();
        assert!(est.norm() == 0.0);
        let s = genie_mmse_s(&y, &q, &CMatrix::zeros(2, 4), &CMatrix::identity(3, 3), &CMatrix::identity(2, 2), 1.0, 0.1).unwrap();
        assert!(s.norm() == 0.0);
    }

    #[test]
    fn empty_support_is_rejected() {
        let z = CMatrix::zeros(2, 2);
        assert!(genie_mmse_x(&z, &z, &z, &[], &[1.0; 2], 0.1).is_err());
    }
}

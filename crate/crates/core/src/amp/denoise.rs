//! Scalar Bernoulli-Gaussian (spike-and-slab) posterior.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Posterior statistics of `x ~ λ CN(0, τ) + (1 - λ) δ₀` observed as `r = x + CN(0, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgPosterior {
    pub mean: Complex64,
    pub var: f64,
    /// Posterior probability that `x` came from the slab.
    pub slab_prob: f64,
}

/// Exact MMSE denoiser for the spike-and-slab prior.
///
/// The slab probability is evaluated from the log-likelihood ratio of the two
/// Gaussian evidences `CN(r; 0, τ + v)` and `CN(r; 0, v)`, so it stays accurate
/// when either evidence underflows.
pub fn bg_denoise(r: Complex64, v: f64, lambda: f64, tau: f64) -> Result<BgPosterior> {
    if !(r.re.is_finite() && r.im.is_finite()) || v.is_nan() || !tau.is_finite() || lambda.is_nan() {
        return Err(Error::Numerical(format!(
            "non-finite denoiser input r={r}, v={v}, lambda={lambda}, tau={tau}"
        )));
    }
    if !(v > 0.0) || !(tau > 0.0) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "denoiser needs v > 0, tau > 0, lambda in [0, 1]; got v={v}, tau={tau}, lambda={lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(BgPosterior {
            mean: Complex64::new(0.0, 0.0),
            var: 0.0,
            slab_prob: 0.0,
        });
    }
    // Gain τ/(τ+v) and slab variance τv/(τ+v), written to survive v = ∞.
    let gain = 1.0 / (1.0 + v / tau);
    let slab_var = tau * (1.0 / (1.0 + tau / v));
    let slab_mean = r * gain;
    let slab_prob = if lambda == 1.0 {
        1.0
    } else {
        let llr = (lambda / (1.0 - lambda)).ln() - (tau / v).ln_1p() + r.norm_sqr() * gain / v;
        logistic(llr)
    };
    let var = slab_prob * slab_var + slab_prob * (1.0 - slab_prob) * slab_mean.norm_sqr();
    Ok(BgPosterior {
        mean: slab_mean * slab_prob,
        var,
        slab_prob,
    })
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

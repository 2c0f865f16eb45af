//! Estimation and detection metrics.
//!
//! NMSE is reported in dB with a floor of [`NMSE_FLOOR_DB`]. Detection rates
//! use the conventional meanings: `p_f` is the fraction of inactive devices
//! declared active, `p_m` the fraction of active devices declared inactive.
//! A device is declared active when its score is strictly above the threshold.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::linalg::{frob2, CMatrix, ZERO};

pub const NMSE_FLOOR_DB: f64 = -200.0;

/// Per-trial metrics. Serializes to one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmse_g_db_raw: f64,
    pub nmse_g_db: f64,
    /// `None` when no device is active.
    pub avg_nmse_h_db_raw: Option<f64>,
    pub avg_nmse_h_db: Option<f64>,
    pub threshold: f64,
    pub p_f: Option<f64>,
    pub p_m: Option<f64>,
    /// Both scale-resolved NMSEs at or below [`SUCCESS_NMSE_DB`].
    pub success: bool,
}

/// Success criterion of the recovery experiments.
pub const SUCCESS_NMSE_DB: f64 = -30.0;

fn to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    }
}

fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Complex scalar `c` minimizing `‖truth − c·estimate‖_F`; zero for a zero
/// estimate.
pub fn optimal_scale(truth: &CMatrix, estimate: &CMatrix) -> Complex64 {
    let e2 = frob2(estimate);
    if e2 == 0.0 {
        ZERO
    } else {
        inner(estimate, truth) / e2
    }
}

/// `10 log10(‖T − cÊ‖² / ‖T‖²)` with `c = 1` or the optimal complex scalar.
pub fn nmse_db(truth: &CMatrix, estimate: &CMatrix, resolve_scale: bool) -> Result<f64> {
    dim_check(truth.shape() == estimate.shape(), || {
        format!("truth {:?} vs estimate {:?}", truth.shape(), estimate.shape())
    })?;
    let t2 = frob2(truth);
    if t2 == 0.0 {
        return Err(Error::Domain("NMSE of a zero matrix is undefined".into()));
    }
    let c = if resolve_scale { optimal_scale(truth, estimate) } else { Complex64::new(1.0, 0.0) };
    let err = frob2(&(truth - estimate * c));
    Ok(to_db(err / t2))
}

/// Mean over the support of the per-column NMSE ratios, in dB.
///
/// With `resolve_scale`, one complex scalar fitted jointly over the support
/// columns is applied to every column, matching the single global ambiguity
/// of the factorization.
pub fn avg_nmse_h_db(h: &CMatrix, h_hat: &CMatrix, support: &[usize], resolve_scale: bool) -> Result<f64> {
    dim_check(h.shape() == h_hat.shape(), || format!("H {:?} vs estimate {:?}", h.shape(), h_hat.shape()))?;
    if support.is_empty() {
        return Err(Error::Domain("average NMSE over an empty support".into()));
    }
    if support.iter().any(|&k| k >= h.ncols()) {
        return Err(Error::Dimension("support index out of range".into()));
    }
    let pick = |m: &CMatrix| CMatrix::from_fn(m.nrows(), support.len(), |i, j| m[(i, support[j])]);
    let (t, e) = (pick(h), pick(h_hat));
    let c = if resolve_scale { optimal_scale(&t, &e) } else { Complex64::new(1.0, 0.0) };
    let mut total = 0.0;
    for j in 0..support.len() {
        let tc = t.column(j);
        let t2 = tc.norm_squared();
        if t2 == 0.0 {
            return Err(Error::Domain(format!("zero true channel for device {}", support[j])));
        }
        total += (tc - e.column(j) * c).norm_squared() / t2;
    }
    Ok(to_db(total / support.len() as f64))
}

/// `(p_f, p_m)`; a rate is `None` when its conditioning class is empty.
pub fn detection_rates(alpha_true: &[bool], scores: &[f64], threshold: f64) -> Result<(Option<f64>, Option<f64>)> {
    dim_check(alpha_true.len() == scores.len(), || {
        format!("{} labels vs {} scores", alpha_true.len(), scores.len())
    })?;
    let (mut fa, mut inactive, mut miss, mut active) = (0usize, 0usize, 0usize, 0usize);
    for (&a, &s) in alpha_true.iter().zip(scores) {
        let declared = s > threshold;
        if a {
            active += 1;
            miss += usize::from(!declared);
        } else {
            inactive += 1;
            fa += usize::from(declared);
        }
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok((rate(fa, inactive), rate(miss, active)))
}

/// Scores divided by their root-mean-square, so that thresholds pooled over
/// trials do not depend on the per-trial scale of the estimate. All-zero
/// scores are returned unchanged.
pub fn scale_free_scores(scores: &[f64]) -> Vec<f64> {
    let rms = (scores.iter().map(|s| s * s).sum::<f64>() / scores.len().max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        scores.iter().map(|s| s / rms).collect()
    } else {
        scores.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_f: Option<f64>,
    pub p_m: Option<f64>,
}

/// Rates at `n_points` thresholds placed at evenly spaced quantiles of the
/// observed scores, in increasing threshold order.
pub fn roc_sweep(alpha_true: &[bool], scores: &[f64], n_points: usize) -> Result<Vec<RocPoint>> {
    dim_check(alpha_true.len() == scores.len(), || {
        format!("{} labels vs {} scores", alpha_true.len(), scores.len())
    })?;
    if scores.is_empty() || n_points < 2 {
        return Err(Error::Domain("ROC needs scores and at least two points".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    (0..n_points)
        .map(|i| {
            let threshold = sorted[(i * last + (n_points - 1) / 2) / (n_points - 1)];
            let (p_f, p_m) = detection_rates(alpha_true, scores, threshold)?;
            Ok(RocPoint { threshold, p_f, p_m })
        })
        .collect()
}

/// Threshold whose false-alarm rate is closest to `target_pf`.
///
/// Candidates are every observed inactive score plus one just below the
/// smallest, so any achievable rate is reachable. Ties go to the larger
/// threshold. `None` when there are no inactive devices.
pub fn threshold_for_pf(alpha_true: &[bool], scores: &[f64], target_pf: f64) -> Result<Option<f64>> {
    dim_check(alpha_true.len() == scores.len(), || {
        format!("{} labels vs {} scores", alpha_true.len(), scores.len())
    })?;
    let mut inactive: Vec<f64> = alpha_true.iter().zip(scores).filter(|(a, _)| !**a).map(|(_, s)| *s).collect();
    if inactive.is_empty() {
        return Ok(None);
    }
    inactive.sort_by(f64::total_cmp);
    let n = inactive.len() as f64;
    let mut best = (f64::INFINITY, 0.0);
    let below = inactive[0] - 1.0 - inactive[0].abs();
    let candidates = std::iter::once(below).chain(inactive.iter().copied());
    for t in candidates {
        let above = inactive.partition_point(|s| *s <= t);
        let pf = (inactive.len() - above) as f64 / n;
        let gap = (pf - target_pf).abs();
        if gap <= best.0 {
            best = (gap, t);
        }
    }
    Ok(Some(best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nmse_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = complex_normal_matrix(4, 3, 1.0, &mut rng);
        assert_eq!(nmse_db(&t, &t, false).unwrap(), NMSE_FLOOR_DB);
        assert!(nmse_db(&t, &CMatrix::zeros(4, 3), false).unwrap().abs() < 1e-12);
        let twice = &t * Complex64::new(0.0, 2.0);
        assert_eq!(nmse_db(&t, &twice, true).unwrap(), NMSE_FLOOR_DB);
        assert!(nmse_db(&CMatrix::zeros(2, 2), &t.view((0, 0), (2, 2)).into_owned(), false).is_err());
    }

    #[test]
    fn resolved_never_worse_than_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let t = complex_normal_matrix(5, 4, 1.0, &mut rng);
            let e = complex_normal_matrix(5, 4, 1.0, &mut rng);
            assert!(nmse_db(&t, &e, true).unwrap() <= nmse_db(&t, &e, false).unwrap() + 1e-9);
        }
    }

    #[test]
    fn two_column_average_by_hand() {
        let h = CMatrix::from_row_slice(2, 3, &[1.0.into(), 9.0.into(), 0.0.into(), 0.0.into(), 9.0.into(), 2.0.into()]);
        let mut e = h.clone();
        e[(0, 0)] = 0.5.into();
        e[(1, 2)] = 0.0.into();
        // column 0: 0.25 / 1; column 2: 4 / 4
        let want = 10.0 * (0.5f64 * (0.25 + 1.0)).log10();
        assert!((avg_nmse_h_db(&h, &e, &[0, 2], false).unwrap() - want).abs() < 1e-12);
        assert!(avg_nmse_h_db(&h, &e, &[], false).is_err());
    }

    #[test]
    fn detection_examples() {
        let alpha = [true, false, true, false];
        assert_eq!(detection_rates(&alpha, &[2.0, 0.1, 3.0, 0.2], 1.0).unwrap(), (Some(0.0), Some(0.0)));
        assert_eq!(detection_rates(&alpha, &[2.0, 0.1, 3.0, 0.2], 0.0).unwrap(), (Some(1.0), Some(0.0)));
        assert_eq!(detection_rates(&[true, true], &[1.0, 0.0], 0.5).unwrap(), (None, Some(0.5)));
    }

    #[test]
    fn calibrated_threshold_hits_target() {
        let alpha: Vec<bool> = (0..200).map(|i| i % 4 == 0).collect();
        let scores: Vec<f64> = (0..200).map(|i| i as f64 * 0.37 % 11.0).collect();
        let t = threshold_for_pf(&alpha, &scores, 0.1).unwrap().unwrap();
        let (pf, _) = detection_rates(&alpha, &scores, t).unwrap();
        assert!((pf.unwrap() - 0.1).abs() <= 1.0 / 150.0 + 1e-12);
        assert_eq!(threshold_for_pf(&[true], &[1.0], 0.1).unwrap(), None);
    }
}

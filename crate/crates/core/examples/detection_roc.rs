//! Pooled ROC of the activity scores over a handful of trials.

use ris_amp::config::SystemConfig;
use ris_amp::harness::run_trial;
use ris_amp::metrics::{detection_rates, roc_sweep, threshold_for_pf};

fn main() -> ris_amp::Result<()> {
    let cfg = SystemConfig::desk();
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for t in 0..6 {
        let rec = run_trial(&cfg, t, false)?;
        labels.extend(rec.alpha_true);
        scores.extend(rec.scores);
    }
    for p in roc_sweep(&labels, &scores, 11)? {
        println!("threshold {:>8.4}  p_f {:.3}  p_m {:.3}", p.threshold, p.p_f.unwrap_or(f64::NAN), p.p_m.unwrap_or(f64::NAN));
    }
    if let Some(t) = threshold_for_pf(&labels, &scores, 0.1)? {
        let (pf, pm) = detection_rates(&labels, &scores, t)?;
        println!("at p_f = 0.1: threshold {t:.4}, p_f {pf:?}, p_m {pm:?}");
    }
    Ok(())
}

//! Joint activity detection and channel estimation on one desk scene,
//! with the genie-aided bounds for reference.

use ris_amp::config::SystemConfig;
use ris_amp::harness::{amp_options, estimate_scene, genie_nmse, score_estimate};
use ris_amp::model::generate_scene;

fn main() -> ris_amp::Result<()> {
    let cfg = SystemConfig::desk();
    let scene = generate_scene(&cfg, 1)?;
    let est = estimate_scene(&cfg, &scene, 1, true)?;
    let threshold = amp_options(&cfg, &scene.tau_h, false).epsilon_threshold;
    let m = score_estimate(&scene, &est, threshold)?;
    println!("{} iterations, converged {}, diverged {}", est.iterations_run, est.converged, est.diverged);
    if let (Some(first), Some(last)) = (est.trajectory.first(), est.trajectory.last()) {
        println!("residual {:.3e} -> {:.3e}", first.residual, last.residual);
    }
    println!("NMSE(G) {:.2} dB (raw {:.2} dB)", m.nmse_g_db, m.nmse_g_db_raw);
    println!("avg NMSE(h) {:?} dB, p_f {:?}, p_m {:?}", m.avg_nmse_h_db, m.p_f, m.p_m);
    let (g, h) = genie_nmse(&cfg, &scene)?;
    println!("genie: NMSE(G) {g:.2} dB, avg NMSE(h) {h:?} dB");
    Ok(())
}

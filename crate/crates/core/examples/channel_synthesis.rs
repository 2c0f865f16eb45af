//! One scene draw: geometric RIS-to-BS channel, device channels, pilots and observation.

use ris_amp::config::SystemConfig;
use ris_amp::linalg::rank;
use ris_amp::model::generate_scene;

fn main() -> ris_amp::Result<()> {
    let cfg = SystemConfig::desk();
    let scene = generate_scene(&cfg, 0)?;
    println!("G {:?}, {} clusters, numerical rank {}", scene.g.shape(), scene.clusters.len(), rank(&scene.g, 1e-9));
    println!("{} of {} devices active", scene.activity.n_active(), scene.activity.devices());
    let (lo, hi) = scene.tau_h.iter().fold((f64::MAX, 0.0f64), |(a, b), t| (a.min(*t), b.max(*t)));
    println!("tau_h in [{:.2} dB, {:.2} dB]", 10.0 * lo.log10(), 10.0 * hi.log10());
    println!("Y {:?}, tau_n {:.3e}, realized SNR {:.2} dB", scene.y.shape(), scene.tau_n, scene.snr_db);

    let on_grid = ris_amp::model::make_on_grid_scene(&cfg, 4, 0)?;
    let s = on_grid.s_true.as_ref().expect("on-grid scene carries S");
    println!("on-grid: {} nonzero angular coefficients", s.iter().filter(|z| z.norm() > 0.0).count());
    Ok(())
}

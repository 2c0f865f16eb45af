//! Full-scale scenario constants and the quantities derived from them.

use ris_amp::channel::{build_vad_dictionaries, device_distance, path_loss, ris_to_bs_distance};
use ris_amp::config::SystemConfig;

#[test]
fn full_scale_profile_constants() {
    let cfg = SystemConfig::paper();
    assert_eq!(cfg.devices, 1000);
    assert_eq!(cfg.lambda_alpha, 0.08);
    assert_eq!(cfg.bs_antennas, 40);
    assert_eq!((cfg.ris_rows, cfg.ris_cols), (7, 7));
    assert_eq!(cfg.ris_elements(), 49);
    assert_eq!(cfg.amp.max_iter, 2000);
    assert_eq!((cfg.cluster_model.n_clusters, cfg.cluster_model.subpaths_per_cluster), (10, 5));
    assert_eq!(cfg.cluster_model.angular_spread, std::f64::consts::PI / 12.0);
    assert_eq!((cfg.geometry.z_r, cfg.geometry.x_r, cfg.geometry.y_r, cfg.geometry.radius), (10.0, 5.0, 100.0, 50.0));
    assert_eq!((cfg.pathloss.mu_g, cfg.pathloss.mu_h, cfg.pathloss.d_0), (2.2, 2.5, 1.0));
    // -30 dB at the reference distance
    assert!((10.0 * cfg.pathloss.tau_0.log10() + 30.0).abs() < 1e-12);
}

#[test]
fn grids_are_twice_the_array_sizes() {
    let cfg = SystemConfig::paper();
    assert_eq!(cfg.grid.bs, 2 * cfg.bs_antennas);
    assert_eq!((cfg.grid.ris_h, cfg.grid.ris_v), (2 * cfg.ris_rows, 2 * cfg.ris_cols));
    let d = build_vad_dictionaries(&cfg).unwrap();
    assert_eq!(d.bs.shape(), (40, 80));
    assert_eq!(d.ris.shape(), (49, 196));
}

#[test]
fn reference_distance_gain_and_power_law() {
    assert!((path_loss(1.0, 2.2, 1e-3, 1.0).unwrap() - 1e-3).abs() < 1e-18);
    assert!((path_loss(100.0, 2.2, 1e-3, 1.0).unwrap() - 3.981e-8).abs() < 1e-11);
}

#[test]
fn link_distances() {
    let cfg = SystemConfig::paper();
    assert!((ris_to_bs_distance(&cfg) - (25.0f64 + 10_000.0).sqrt()).abs() < 1e-12);
    let (ox, oy) = (cfg.geometry.o_x, cfg.geometry.o_y);
    let want = (ox * ox + oy * oy + 100.0).sqrt();
    assert!((device_distance(&cfg, 0.0, 0.0) - want).abs() < 1e-12);
}

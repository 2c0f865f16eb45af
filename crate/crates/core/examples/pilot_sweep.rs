//! Pilot-length sweep with per-point false-alarm calibration; writes
//! report.csv and report.json to a temporary directory.

use ris_amp::config::SystemConfig;
use ris_amp::harness::{run_sweep, SweepParameter, SweepSpec};

fn main() -> ris_amp::Result<()> {
    let mut spec = SweepSpec::new(SystemConfig::desk(), SweepParameter::PilotLength, vec![20.0, 40.0, 60.0], 6);
    spec.genie = true;
    let report = run_sweep(&spec)?;
    for a in &report.aggregates {
        let mean = |s: Option<ris_amp::harness::Summary>| s.map_or(f64::NAN, |s| s.mean);
        println!(
            "L = {:>3}: p_m {:.3}, NMSE(G) {:.2} dB, genie NMSE(G) {:.2} dB",
            a.value,
            mean(a.p_m),
            mean(a.nmse_g_db),
            mean(a.genie_nmse_g_db)
        );
    }
    let dir = std::env::temp_dir().join("ris-amp-pilot-sweep");
    report.write_to_dir(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}

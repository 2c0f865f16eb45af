//! Success-rate grid over pilot length and SNR on on-grid scenes.

use ris_amp::config::SystemConfig;
use ris_amp::harness::{phase_transition_grid, PhaseTransitionSpec, SweepParameter};

fn main() -> ris_amp::Result<()> {
    let mut base = SystemConfig::desk();
    base.cluster_model.on_grid_paths = Some(4);
    let spec = PhaseTransitionSpec {
        base,
        rows: (SweepParameter::PilotLength, vec![30.0, 60.0, 90.0]),
        cols: (SweepParameter::SnrDb, vec![20.0, 40.0]),
        trials_per_cell: 3,
        workers: 1,
    };
    let report = phase_transition_grid(&spec)?;
    for (i, row) in report.matrix(3, 2).iter().enumerate() {
        println!("L = {:>3}: {:?}", spec.rows.1[i], row);
    }
    Ok(())
}

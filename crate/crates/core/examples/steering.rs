//! Array responses and the angular dictionaries built from them.

use ris_amp::channel::{build_vad_dictionaries, ula_steering, ura_steering};
use ris_amp::config::{SystemConfig, SPACING_RATIO};
use ris_amp::linalg::CMatrix;

fn main() -> ris_amp::Result<()> {
    let a = ula_steering(4, std::f64::consts::FRAC_PI_6, SPACING_RATIO);
    let entries: Vec<String> = a.iter().map(|z| format!("{z:.3}")).collect();
    println!("ULA, M = 4, theta = 30 deg: [{}]", entries.join(", "));
    let r = ura_steering(3, 3, 0.4, -0.2, SPACING_RATIO);
    println!("URA, 3 x 3: norm {:.6}", r.norm());

    let cfg = SystemConfig::desk();
    let d = build_vad_dictionaries(&cfg)?;
    println!("A_B {:?}, A_R {:?}", d.bs.shape(), d.ris.shape());
    let gram: CMatrix = d.bs.adjoint() * &d.bs;
    let coherence = (0..gram.nrows())
        .flat_map(|i| (0..gram.ncols()).filter(move |j| *j != i).map(move |j| (i, j)))
        .map(|(i, j)| gram[(i, j)].norm())
        .fold(0.0, f64::max);
    println!("A_B mutual coherence {coherence:.3} on a {}-point grid", d.bs_grid.len());
    Ok(())
}

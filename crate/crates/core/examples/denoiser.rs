//! Spike-and-slab posterior against brute-force quadrature.

use num_complex::Complex64;
use ris_amp::amp::bg_denoise;
use ris_amp::baselines::quadrature_bg_oracle;

fn main() -> ris_amp::Result<()> {
    println!("{:>14} {:>6} {:>6} {:>6} | {:>22} {:>10} | {:>9}", "r", "v", "lambda", "tau", "mean", "var", "|dmean|");
    for (r, v, lambda, tau) in [
        (Complex64::new(0.3, 0.4), 0.5, 0.2, 2.0),
        (Complex64::new(2.0, -1.0), 0.1, 0.05, 1.0),
        (Complex64::new(0.01, 0.0), 1.0, 0.9, 0.01),
    ] {
        let post = bg_denoise(r, v, lambda, tau)?;
        let (mean, var) = quadrature_bg_oracle(r, v, lambda, tau, 12.0, 401)?;
        println!(
            "{:>14.3} {v:>6} {lambda:>6} {tau:>6} | {:>22.6} {:>10.6} | {:>9.1e}",
            r,
            post.mean,
            post.var,
            (post.mean - mean).norm().max((post.var - var).abs())
        );
    }
    Ok(())
}

//! Equivalence against independent reference computations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_amp::amp::bg_denoise;
use ris_amp::baselines::{genie_mmse_s, genie_mmse_x, quadrature_bg_oracle};
use ris_amp::linalg::{complex_normal_matrix, CMatrix};
use ris_amp::oracle::{denoiser_disagreement, random_denoiser_inputs, step_pairs, transcription_disagreement, random_instance, max_relative_difference};

#[test]
fn denoiser_matches_quadrature_on_1000_tuples() {
    let (dm, dv) = denoiser_disagreement(&random_denoiser_inputs(1000, 5)).unwrap();
    assert!(dm < 1e-6 && dv < 1e-6, "dmean {dm:e}, dvar {dv:e}");
}

/// Posterior from the two evidences written out directly, without the
/// log-likelihood-ratio form.
fn direct_bg(r: Complex64, v: f64, lambda: f64, tau: f64) -> (Complex64, f64) {
    let cn = |var: f64| (-r.norm_sqr() / var).exp() / (std::f64::consts::PI * var);
    let slab = lambda * cn(tau + v);
    let spike = (1.0 - lambda) * cn(v);
    let pi = slab / (slab + spike);
    let mu = r * (tau / (tau + v));
    let s2 = tau * v / (tau + v);
    let second = pi * (s2 + mu.norm_sqr());
    (mu * pi, second - (mu * pi).norm_sqr())
}

#[test]
fn denoiser_matches_direct_evidence_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let v = rng.random_range(0.05..3.0);
        let tau = rng.random_range(0.05..3.0);
        let lambda = rng.random_range(0.02..0.98);
        let r = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let post = bg_denoise(r, v, lambda, tau).unwrap();
        let (mean, var) = direct_bg(r, v, lambda, tau);
        assert!((post.mean - mean).norm() < 1e-12);
        assert!((post.var - var).abs() < 1e-12);
    }
}

#[test]
fn quadrature_reference_example_is_grid_stable() {
    let r = Complex64::new(0.3, 0.4);
    let coarse = quadrature_bg_oracle(r, 0.5, 0.2, 2.0, 12.0, 401).unwrap();
    let fine = quadrature_bg_oracle(r, 0.5, 0.2, 2.0, 12.0, 801).unwrap();
    assert!((coarse.0 - fine.0).norm() < 1e-8 && (coarse.1 - fine.1).abs() < 1e-8);
    let post = bg_denoise(r, 0.5, 0.2, 2.0).unwrap();
    assert!((post.mean - fine.0).norm() < 1e-8 && (post.var - fine.1).abs() < 1e-8);
}

#[test]
fn steps_match_transcriptions_on_100_instances() {
    let worst = transcription_disagreement(100, 3).unwrap();
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn every_step_changes_something_it_is_compared_on() {
    // Guards against a pair that compares two no-ops.
    let (problem, state) = random_instance(17, (3, 4, 5, 6, 6, 8));
    let opts = ris_amp::amp::AmpOptions { damping: 0.7, ..Default::default() };
    for (name, fast, _) in step_pairs() {
        let mut s = state.clone();
        fast(&mut s, &problem, &opts).unwrap();
        assert!(max_relative_difference(&s, &state) > 1e-6, "{name} left the state unchanged");
    }
}

fn vec_of(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_iterator(m.len(), m.iter().copied())
}

/// LMMSE `C A^H (A C A^H + τ_n I)^{-1} y` for an explicit dense `A`.
fn dense_lmmse(a: &DMatrix<Complex64>, prior: &[f64], y: &nalgebra::DVector<Complex64>, tau_n: f64) -> nalgebra::DVector<Complex64> {
    let c = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(prior.len(), prior.iter().map(|&p| Complex64::from(p))));
    let gram = a * &c * a.adjoint() + DMatrix::<Complex64>::identity(a.nrows(), a.nrows()) * Complex64::from(tau_n);
    let z = gram.lu().solve(y).expect("nonsingular");
    c * a.adjoint() * z
}

#[test]
fn genie_x_matches_dense_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (m, n, k, l) = (3, 4, 6, 5);
    let support = [1usize, 3, 4];
    let tau_h: Vec<f64> = (0..k).map(|i| 0.5 + 0.3 * i as f64).collect();
    let g = complex_normal_matrix(m, n, 1.0, &mut rng);
    let q = complex_normal_matrix(k, l, 0.2, &mut rng);
    let y = complex_normal_matrix(m, l, 1.0, &mut rng);
    let tau_n = 0.3;
    // Unknowns ordered (n, c) column-major over the support columns.
    let unknowns = n * support.len();
    let mut a = DMatrix::<Complex64>::zeros(m * l, unknowns);
    let mut prior = Vec::with_capacity(unknowns);
    for (c, &kk) in support.iter().enumerate() {
        for i in 0..n {
            let mut x = CMatrix::zeros(n, k);
            x[(i, kk)] = Complex64::new(1.0, 0.0);
            a.set_column(c * n + i, &vec_of(&(&g * x * &q)));
            prior.push(tau_h[kk]);
        }
    }
    let want = dense_lmmse(&a, &prior, &vec_of(&y), tau_n);
    let got = genie_mmse_x(&y, &q, &g, &support, &tau_h, tau_n).unwrap();
    for (c, &kk) in support.iter().enumerate() {
        for i in 0..n {
            assert!((got[(i, kk)] - want[c * n + i]).norm() < 1e-9);
        }
    }
    for kk in (0..k).filter(|kk| !support.contains(kk)) {
        assert!(got.column(kk).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }
}

#[test]
fn genie_s_matches_dense_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (m, n, k, l, mg, ng) = (3, 4, 5, 6, 4, 6);
    let a_b = complex_normal_matrix(m, mg, 1.0, &mut rng);
    let a_r = complex_normal_matrix(n, ng, 1.0, &mut rng);
    let x = complex_normal_matrix(n, k, 1.0, &mut rng);
    let q = complex_normal_matrix(k, l, 0.3, &mut rng);
    let y = complex_normal_matrix(m, l, 1.0, &mut rng);
    let (prior_var, tau_n) = (0.7, 0.2);
    let mut a = DMatrix::<Complex64>::zeros(m * l, mg * ng);
    for j in 0..ng {
        for i in 0..mg {
            let mut s = CMatrix::zeros(mg, ng);
            s[(i, j)] = Complex64::new(1.0, 0.0);
            a.set_column(j * mg + i, &vec_of(&(&a_b * s * a_r.adjoint() * &x * &q)));
        }
    }
    let want = dense_lmmse(&a, &vec![prior_var; mg * ng], &vec_of(&y), tau_n);
    let got = genie_mmse_s(&y, &q, &x, &a_b, &a_r, prior_var, tau_n).unwrap();
    for j in 0..ng {
        for i in 0..mg {
            assert!((got[(i, j)] - want[j * mg + i]).norm() < 1e-9);
        }
    }
}

//! Individual message updates. Each step reads and writes [`AmpState`] in
//! place; [`super::iterate`] calls them in the order listed here.

use crate::error::Result;
use crate::linalg::{abs2, CMatrix, RMatrix};

use super::{blend, bg_denoise, AmpOptions, AmpProblem, AmpState};

fn clamp(m: RMatrix, opts: &AmpOptions) -> RMatrix {
    m.map(|v| {
        if v.is_nan() {
            opts.variance_ceiling
        } else {
            v.clamp(opts.variance_floor, opts.variance_ceiling)
        }
    })
}

fn recip(m: &RMatrix) -> RMatrix {
    m.map(|v| 1.0 / v)
}

fn scale(v: &RMatrix, z: &CMatrix) -> CMatrix {
    z.zip_map(v, |a, b| a * b)
}

/// Gaussian product of two messages in precision form, returning
/// `(mean, variance)`.
fn gaussian_product(a: &CMatrix, va: &RMatrix, b: &CMatrix, vb: &RMatrix, opts: &AmpOptions) -> (CMatrix, RMatrix) {
    let prec = va.zip_map(vb, |x, y| 1.0 / x + 1.0 / y);
    let var = clamp(recip(&prec), opts);
    let mut mean = a.clone();
    for i in 0..mean.len() {
        mean[i] = var[i] * (a[i] / va[i] + b[i] / vb[i]);
    }
    (mean, var)
}

/// Plug-in estimate of `W = G X` with the lagged Onsager correction.
pub fn p_step(state: &mut AmpState, opts: &AmpOptions) {
    let g2 = abs2(&state.g_hat);
    let x2 = abs2(&state.x_hat);
    let t = &g2 * &state.v_x + &state.v_g * &x2;
    state.v_p = clamp(&t + &state.v_g * &state.v_x, opts);
    state.p_hat = &state.g_hat * &state.x_hat - scale(&t, &state.o_hat);
}

/// Output-layer residual `γ` of `Y = W Q + N`.
pub fn output_residual_step(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) {
    let v_beta = clamp(&state.v_w * &problem.q_abs2, opts);
    state.beta_hat = &state.w_hat * &problem.q - scale(&v_beta, &state.gamma_hat);
    state.v_gamma = clamp(v_beta.map(|v| 1.0 / (v + problem.priors.tau_n)), opts);
    state.gamma_hat = scale(&state.v_gamma, &(&problem.y - &state.beta_hat));
    state.v_beta = v_beta;
}

/// Likelihood message `e` for `W` and its product with the plug-in `p`.
pub fn w_merge_step(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) {
    state.v_e = clamp(recip(&(&state.v_gamma * problem.q_abs2.transpose())), opts);
    state.e_hat = &state.w_hat + scale(&state.v_e, &(&state.gamma_hat * problem.q.adjoint()));
    let (w, v) = gaussian_product(&state.p_hat, &state.v_p, &state.e_hat, &state.v_e, opts);
    state.w_hat = blend(&w, &state.w_hat, opts.damping);
    state.v_w = clamp(blend(&v, &state.v_w, opts.damping), opts);
}

/// Scaled bilinear residual `o` and the pseudo-observations `b` of `X` and
/// `c` of `G`.
pub fn bilinear_split_step(state: &mut AmpState, opts: &AmpOptions) {
    state.v_o = clamp(state.v_p.zip_map(&state.v_w, |p, w| (p - w) / (p * p)), opts);
    state.o_hat = (&state.w_hat - &state.p_hat).zip_map(&state.v_p, |d, p| d / p);
    let g2 = abs2(&state.g_hat);
    let x2 = abs2(&state.x_hat);

    state.v_b = clamp(recip(&(g2.transpose() * &state.v_o)), opts);
    let shrink_x = state.v_b.component_mul(&(state.v_g.transpose() * &state.v_o)).map(|v| 1.0 - v);
    state.b_hat = scale(&shrink_x, &state.x_hat) + scale(&state.v_b, &(state.g_hat.adjoint() * &state.o_hat));

    state.v_c = clamp(recip(&(&state.v_o * x2.transpose())), opts);
    let shrink_g = state.v_c.component_mul(&(&state.v_o * state.v_x.transpose())).map(|v| 1.0 - v);
    state.c_hat = scale(&shrink_g, &state.g_hat) + scale(&state.v_c, &(&state.o_hat * state.x_hat.adjoint()));
}

/// Spike-and-slab denoising of `b` into `X`, column `k` using `τ_{h,k}`.
pub fn x_denoise_step(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) -> Result<()> {
    let pr = &problem.priors;
    let mut x = state.x_hat.clone();
    let mut v = state.v_x.clone();
    for k in 0..x.ncols() {
        for n in 0..x.nrows() {
            let post = bg_denoise(state.b_hat[(n, k)], state.v_b[(n, k)], pr.lambda_alpha, pr.tau_h[k])?;
            x[(n, k)] = post.mean;
            v[(n, k)] = post.var;
        }
    }
    state.x_hat = blend(&x, &state.x_hat, opts.damping);
    state.v_x = clamp(blend(&v, &state.v_x, opts.damping), opts);
    Ok(())
}

/// Linear layer `G = A_B S A_R^H`: prior message `𝗀` on `G`, its residual
/// `α`, and the pseudo-observation `d` of `S`.
pub fn s_linear_step(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) {
    state.v_gscript = clamp(&problem.a_b_abs2 * &state.v_s * problem.a_r_abs2.transpose(), opts);
    state.gscript_hat = &problem.a_b * &state.s_hat * problem.a_r.adjoint() - scale(&state.v_gscript, &state.alpha_hat);
    state.v_alpha = clamp((&state.v_gscript + &state.v_c).map(|v| 1.0 / v), opts);
    state.alpha_hat = scale(&state.v_alpha, &(&state.c_hat - &state.gscript_hat));
    state.v_d = clamp(recip(&(problem.a_b_abs2.transpose() * &state.v_alpha * &problem.a_r_abs2)), opts);
    state.d_hat = &state.s_hat + scale(&state.v_d, &(problem.a_b.adjoint() * &state.alpha_hat * &problem.a_r));
}

/// Spike-and-slab denoising of `d` into `S`.
pub fn s_denoise_step(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) -> Result<()> {
    let pr = &problem.priors;
    let mut s = state.s_hat.clone();
    let mut v = state.v_s.clone();
    for i in 0..s.len() {
        let post = bg_denoise(state.d_hat[i], state.v_d[i], pr.lambda_s, pr.tau_s)?;
        s[i] = post.mean;
        v[i] = post.var;
    }
    state.s_hat = blend(&s, &state.s_hat, opts.damping);
    state.v_s = clamp(blend(&v, &state.v_s, opts.damping), opts);
    Ok(())
}

/// Combines the linear-layer message `𝗀` with the bilinear-layer message `c`.
pub fn g_merge_step(state: &mut AmpState, opts: &AmpOptions) {
    let (g, v) = gaussian_product(&state.gscript_hat, &state.v_gscript, &state.c_hat, &state.v_c, opts);
    state.g_hat = blend(&g, &state.g_hat, opts.damping);
    state.v_g = clamp(blend(&v, &state.v_g, opts.damping), opts);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::{AmpState, Priors};
    use crate::linalg::complex_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(rng: &mut ChaCha8Rng) -> AmpProblem {
        let (m, n, k, l, mg, ng) = (3, 4, 5, 6, 6, 8);
        let s = complex_normal_matrix(mg, ng, 1.0, rng);
        let x = complex_normal_matrix(n, k, 1.0, rng);
        let a_b = complex_normal_matrix(m, mg, 1.0 / m as f64, rng);
        let a_r = complex_normal_matrix(n, ng, 1.0 / n as f64, rng);
        let q = complex_normal_matrix(k, l, 1.0 / l as f64, rng);
        let y = &a_b * &s * a_r.adjoint() * &x * &q;
        let priors = Priors { lambda_s: 0.3, tau_s: 1.0, lambda_alpha: 0.4, tau_h: vec![1.0; k], tau_n: 1e-3 };
        AmpProblem::new(y, q, a_b, a_r, priors).unwrap()
    }

    fn state(p: &AmpProblem, opts: &AmpOptions, rng: &mut ChaCha8Rng) -> AmpState {
        let d = p.dims();
        let s = complex_normal_matrix(d.m_grid, d.n_grid, 1.0, rng);
        let x = complex_normal_matrix(d.n, d.k, 1.0, rng);
        AmpState::from_factors(
            p,
            s,
            RMatrix::from_element(d.m_grid, d.n_grid, 0.2),
            x,
            RMatrix::from_element(d.n, d.k, 0.3),
            opts,
        )
        .unwrap()
    }

    #[test]
    fn p_step_without_variance_is_plain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = problem(&mut rng);
        let opts = AmpOptions::default();
        let mut st = state(&p, &opts, &mut rng);
        st.v_g.fill(0.0);
        st.v_x.fill(0.0);
        p_step(&mut st, &opts);
        assert!((&st.p_hat - &st.g_hat * &st.x_hat).norm() < 1e-12);
        assert!(st.v_p.iter().all(|v| *v == opts.variance_floor));
    }

    #[test]
    fn w_merge_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = problem(&mut rng);
        let opts = AmpOptions { damping: 1.0, ..AmpOptions::default() };
        let mut st = state(&p, &opts, &mut rng);
        p_step(&mut st, &opts);
        output_residual_step(&mut st, &p, &opts);
        let mut uninformed_prior = st.clone();
        uninformed_prior.v_p.fill(1e300);
        w_merge_step(&mut uninformed_prior, &p, &opts);
        assert!((&uninformed_prior.w_hat - &uninformed_prior.e_hat).norm() < 1e-9 * uninformed_prior.e_hat.norm());
    }

    #[test]
    fn g_merge_equal_variances_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = problem(&mut rng);
        let opts = AmpOptions { damping: 1.0, ..AmpOptions::default() };
        let mut st = state(&p, &opts, &mut rng);
        st.gscript_hat = complex_normal_matrix(3, 4, 1.0, &mut rng);
        st.c_hat = complex_normal_matrix(3, 4, 1.0, &mut rng);
        st.v_gscript.fill(0.7);
        st.v_c.fill(0.7);
        g_merge_step(&mut st, &opts);
        let avg = (&st.gscript_hat + &st.c_hat) * num_complex::Complex64::new(0.5, 0.0);
        assert!((&st.g_hat - avg).norm() < 1e-12);
        assert!(st.v_g.iter().all(|v| (v - 0.35).abs() < 1e-12));
    }

    #[test]
    fn bilinear_split_at_rest_returns_current_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = problem(&mut rng);
        let opts = AmpOptions::default();
        let mut st = state(&p, &opts, &mut rng);
        st.w_hat = st.p_hat.clone();
        st.v_g.fill(0.0);
        bilinear_split_step(&mut st, &opts);
        assert!((&st.b_hat - &st.x_hat).norm() < 1e-9 * st.x_hat.norm());
    }

    #[test]
    fn s_linear_consistent_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = problem(&mut rng);
        let opts = AmpOptions::default();
        let mut st = state(&p, &opts, &mut rng);
        st.v_s.fill(0.0);
        st.alpha_hat.fill(0.0.into());
        st.c_hat = &p.a_b * &st.s_hat * p.a_r.adjoint();
        st.v_c.fill(0.5);
        s_linear_step(&mut st, &p, &opts);
        assert!(st.alpha_hat.norm() < 1e-9);
        assert!((&st.d_hat - &st.s_hat).norm() < 1e-9);
    }

    #[test]
    fn variances_stay_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = problem(&mut rng);
        let opts = AmpOptions::default();
        let mut st = state(&p, &opts, &mut rng);
        for _ in 0..5 {
            crate::amp::iterate(&mut st, &p, &opts).unwrap();
            for (name, v) in st.variance_arrays() {
                assert!(v.iter().all(|x| *x >= opts.variance_floor && *x <= opts.variance_ceiling), "{name}");
            }
        }
    }
}

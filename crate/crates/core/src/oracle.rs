//! Element-by-element transcriptions of the message updates.
//!
//! Each function recomputes one step of [`crate::amp::steps`] with explicit
//! index loops and scalar sums, without matrix products, so the two can be
//! compared on random instances. [`selftest`] bundles the quick equivalence
//! checks used by the command-line `selftest`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amp::{bg_denoise, AmpOptions, AmpProblem, AmpState, Priors};
use crate::baselines::quadrature_bg_oracle;
use crate::error::Result;
use crate::linalg::{complex_normal_matrix, CMatrix, RMatrix, ZERO};

fn clip(v: f64, o: &AmpOptions) -> f64 {
    if v.is_nan() {
        o.variance_ceiling
    } else {
        v.clamp(o.variance_floor, o.variance_ceiling)
    }
}

fn damp(new: Complex64, old: Complex64, o: &AmpOptions) -> Complex64 {
    new * o.damping + old * (1.0 - o.damping)
}

fn damp_r(new: f64, old: f64, o: &AmpOptions) -> f64 {
    new * o.damping + old * (1.0 - o.damping)
}

pub fn p_step(s: &mut AmpState, o: &AmpOptions) {
    let (m_n, n_n) = s.g_hat.shape();
    let k_n = s.x_hat.ncols();
    for m in 0..m_n {
        for k in 0..k_n {
            let (mut t, mut vv, mut prod) = (0.0, 0.0, ZERO);
            for n in 0..n_n {
                let g = s.g_hat[(m, n)];
                let x = s.x_hat[(n, k)];
                t += g.norm_sqr() * s.v_x[(n, k)] + s.v_g[(m, n)] * x.norm_sqr();
                vv += s.v_g[(m, n)] * s.v_x[(n, k)];
                prod += g * x;
            }
            s.v_p[(m, k)] = clip(t + vv, o);
            s.p_hat[(m, k)] = prod - s.o_hat[(m, k)] * t;
        }
    }
}

pub fn output_residual_step(s: &mut AmpState, p: &AmpProblem, o: &AmpOptions) {
    let (m_n, l_n) = p.y.shape();
    let k_n = p.q.nrows();
    for m in 0..m_n {
        for l in 0..l_n {
            let (mut vb, mut wq) = (0.0, ZERO);
            for k in 0..k_n {
                vb += s.v_w[(m, k)] * p.q[(k, l)].norm_sqr();
                wq += s.w_hat[(m, k)] * p.q[(k, l)];
            }
            let vb = clip(vb, o);
            let gamma_prev = s.gamma_hat[(m, l)];
            let beta = wq - gamma_prev * vb;
            let vg = clip(1.0 / (vb + p.priors.tau_n), o);
            s.v_beta[(m, l)] = vb;
            s.beta_hat[(m, l)] = beta;
            s.v_gamma[(m, l)] = vg;
            s.gamma_hat[(m, l)] = (p.y[(m, l)] - beta) * vg;
        }
    }
}

pub fn w_merge_step(s: &mut AmpState, p: &AmpProblem, o: &AmpOptions) {
    let (m_n, k_n) = s.w_hat.shape();
    let l_n = p.q.ncols();
    for m in 0..m_n {
        for k in 0..k_n {
            let (mut prec, mut acc) = (0.0, ZERO);
            for l in 0..l_n {
                prec += s.v_gamma[(m, l)] * p.q[(k, l)].norm_sqr();
                acc += p.q[(k, l)].conj() * s.gamma_hat[(m, l)];
            }
            let ve = clip(1.0 / prec, o);
            let e = s.w_hat[(m, k)] + acc * ve;
            let vp = s.v_p[(m, k)];
            let vw = clip(1.0 / (1.0 / vp + 1.0 / ve), o);
            let w = (s.p_hat[(m, k)] / vp + e / ve) * vw;
            s.v_e[(m, k)] = ve;
            s.e_hat[(m, k)] = e;
            s.w_hat[(m, k)] = damp(w, s.w_hat[(m, k)], o);
            s.v_w[(m, k)] = clip(damp_r(vw, s.v_w[(m, k)], o), o);
        }
    }
}

pub fn bilinear_split_step(s: &mut AmpState, o: &AmpOptions) {
    let (m_n, n_n) = s.g_hat.shape();
    let k_n = s.x_hat.ncols();
    for m in 0..m_n {
        for k in 0..k_n {
            let vp = s.v_p[(m, k)];
            s.v_o[(m, k)] = clip((vp - s.v_w[(m, k)]) / (vp * vp), o);
            s.o_hat[(m, k)] = (s.w_hat[(m, k)] - s.p_hat[(m, k)]) / vp;
        }
    }
    for n in 0..n_n {
        for k in 0..k_n {
            let (mut prec, mut vgo, mut back) = (0.0, 0.0, ZERO);
            for m in 0..m_n {
                prec += s.g_hat[(m, n)].norm_sqr() * s.v_o[(m, k)];
                vgo += s.v_g[(m, n)] * s.v_o[(m, k)];
                back += s.g_hat[(m, n)].conj() * s.o_hat[(m, k)];
            }
            let vb = clip(1.0 / prec, o);
            s.v_b[(n, k)] = vb;
            s.b_hat[(n, k)] = s.x_hat[(n, k)] * (1.0 - vb * vgo) + back * vb;
        }
    }
    for m in 0..m_n {
        for n in 0..n_n {
            let (mut prec, mut vxo, mut back) = (0.0, 0.0, ZERO);
            for k in 0..k_n {
                prec += s.x_hat[(n, k)].norm_sqr() * s.v_o[(m, k)];
                vxo += s.v_x[(n, k)] * s.v_o[(m, k)];
                back += s.x_hat[(n, k)].conj() * s.o_hat[(m, k)];
            }
            let vc = clip(1.0 / prec, o);
            s.v_c[(m, n)] = vc;
            s.c_hat[(m, n)] = s.g_hat[(m, n)] * (1.0 - vc * vxo) + back * vc;
        }
    }
}

pub fn x_denoise_step(s: &mut AmpState, p: &AmpProblem, o: &AmpOptions) -> Result<()> {
    for k in 0..s.x_hat.ncols() {
        for n in 0..s.x_hat.nrows() {
            let post = bg_denoise(s.b_hat[(n, k)], s.v_b[(n, k)], p.priors.lambda_alpha, p.priors.tau_h[k])?;
            s.x_hat[(n, k)] = damp(post.mean, s.x_hat[(n, k)], o);
            s.v_x[(n, k)] = clip(damp_r(post.var, s.v_x[(n, k)], o), o);
        }
    }
    Ok(())
}

pub fn s_linear_step(s: &mut AmpState, p: &AmpProblem, o: &AmpOptions) {
    let (m_n, mg) = p.a_b.shape();
    let (n_n, ng) = p.a_r.shape();
    for m in 0..m_n {
        for n in 0..n_n {
            let (mut v, mut g) = (0.0, ZERO);
            for i in 0..mg {
                for j in 0..ng {
                    v += p.a_b[(m, i)].norm_sqr() * s.v_s[(i, j)] * p.a_r[(n, j)].norm_sqr();
                    g += p.a_b[(m, i)] * s.s_hat[(i, j)] * p.a_r[(n, j)].conj();
                }
            }
            let v = clip(v, o);
            let gs = g - s.alpha_hat[(m, n)] * v;
            let va = clip(1.0 / (v + s.v_c[(m, n)]), o);
            s.v_gscript[(m, n)] = v;
            s.gscript_hat[(m, n)] = gs;
            s.v_alpha[(m, n)] = va;
            s.alpha_hat[(m, n)] = (s.c_hat[(m, n)] - gs) * va;
        }
    }
    for i in 0..mg {
        for j in 0..ng {
            let (mut prec, mut back) = (0.0, ZERO);
            for m in 0..m_n {
                for n in 0..n_n {
                    prec += p.a_b[(m, i)].norm_sqr() * s.v_alpha[(m, n)] * p.a_r[(n, j)].norm_sqr();
                    back += p.a_b[(m, i)].conj() * s.alpha_hat[(m, n)] * p.a_r[(n, j)];
                }
            }
            let vd = clip(1.0 / prec, o);
            s.v_d[(i, j)] = vd;
            s.d_hat[(i, j)] = s.s_hat[(i, j)] + back * vd;
        }
    }
}

pub fn s_denoise_step(s: &mut AmpState, p: &AmpProblem, o: &AmpOptions) -> Result<()> {
    for j in 0..s.s_hat.ncols() {
        for i in 0..s.s_hat.nrows() {
            let post = bg_denoise(s.d_hat[(i, j)], s.v_d[(i, j)], p.priors.lambda_s, p.priors.tau_s)?;
            s.s_hat[(i, j)] = damp(post.mean, s.s_hat[(i, j)], o);
            s.v_s[(i, j)] = clip(damp_r(post.var, s.v_s[(i, j)], o), o);
        }
    }
    Ok(())
}

pub fn g_merge_step(s: &mut AmpState, o: &AmpOptions) {
    for j in 0..s.g_hat.ncols() {
        for i in 0..s.g_hat.nrows() {
            let (va, vb) = (s.v_gscript[(i, j)], s.v_c[(i, j)]);
            let v = clip(1.0 / (1.0 / va + 1.0 / vb), o);
            let g = (s.gscript_hat[(i, j)] / va + s.c_hat[(i, j)] / vb) * v;
            s.g_hat[(i, j)] = damp(g, s.g_hat[(i, j)], o);
            s.v_g[(i, j)] = clip(damp_r(v, s.v_g[(i, j)], o), o);
        }
    }
}

/// A random problem and a state with every message populated, for
/// step-by-step comparisons. Sizes are `(M, N, K, L, M', N')`.
pub fn random_instance(seed: u64, dims: (usize, usize, usize, usize, usize, usize)) -> (AmpProblem, AmpState) {
    let (m, n, k, l, mg, ng) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = |r: usize, cc: usize, rng: &mut ChaCha8Rng| complex_normal_matrix(r, cc, 1.0, rng);
    let v = |r: usize, cc: usize, rng: &mut ChaCha8Rng| RMatrix::from_fn(r, cc, |_, _| rng.random_range(0.05..2.0));
    let a_b = c(m, mg, &mut rng) / Complex64::from((m as f64).sqrt());
    let a_r = c(n, ng, &mut rng) / Complex64::from((n as f64).sqrt());
    let q = c(k, l, &mut rng) / Complex64::from((l as f64).sqrt());
    let y = c(m, l, &mut rng);
    let priors = Priors {
        lambda_s: rng.random_range(0.05..0.95),
        tau_s: rng.random_range(0.2..3.0),
        lambda_alpha: rng.random_range(0.05..0.95),
        tau_h: (0..k).map(|_| rng.random_range(0.2..3.0)).collect(),
        tau_n: rng.random_range(0.01..1.0),
    };
    let problem = AmpProblem::new(y, q, a_b, a_r, priors).expect("consistent sizes");
    let state = AmpState {
        s_hat: c(mg, ng, &mut rng),
        v_s: v(mg, ng, &mut rng),
        x_hat: c(n, k, &mut rng),
        v_x: v(n, k, &mut rng),
        g_hat: c(m, n, &mut rng),
        v_g: v(m, n, &mut rng),
        w_hat: c(m, k, &mut rng),
        v_w: v(m, k, &mut rng),
        p_hat: c(m, k, &mut rng),
        v_p: v(m, k, &mut rng).map(|x| x + 2.0),
        e_hat: c(m, k, &mut rng),
        v_e: v(m, k, &mut rng),
        gamma_hat: c(m, l, &mut rng),
        v_gamma: v(m, l, &mut rng),
        beta_hat: c(m, l, &mut rng),
        v_beta: v(m, l, &mut rng),
        o_hat: c(m, k, &mut rng),
        v_o: v(m, k, &mut rng),
        b_hat: c(n, k, &mut rng),
        v_b: v(n, k, &mut rng),
        c_hat: c(m, n, &mut rng),
        v_c: v(m, n, &mut rng),
        gscript_hat: c(m, n, &mut rng),
        v_gscript: v(m, n, &mut rng),
        alpha_hat: c(m, n, &mut rng),
        v_alpha: v(m, n, &mut rng),
        d_hat: c(mg, ng, &mut rng),
        v_d: v(mg, ng, &mut rng),
    };
    (problem, state)
}

/// Largest relative difference over every message of two states.
pub fn max_relative_difference(a: &AmpState, b: &AmpState) -> f64 {
    let rel_c = |x: &CMatrix, y: &CMatrix| (x - y).norm() / x.norm().max(y.norm()).max(1e-300);
    let rel_r = |x: &RMatrix, y: &RMatrix| (x - y).norm() / x.norm().max(y.norm()).max(1e-300);
    let means = [
        rel_c(&a.s_hat, &b.s_hat),
        rel_c(&a.x_hat, &b.x_hat),
        rel_c(&a.g_hat, &b.g_hat),
        rel_c(&a.w_hat, &b.w_hat),
        rel_c(&a.p_hat, &b.p_hat),
        rel_c(&a.e_hat, &b.e_hat),
        rel_c(&a.gamma_hat, &b.gamma_hat),
        rel_c(&a.beta_hat, &b.beta_hat),
        rel_c(&a.o_hat, &b.o_hat),
        rel_c(&a.b_hat, &b.b_hat),
        rel_c(&a.c_hat, &b.c_hat),
        rel_c(&a.gscript_hat, &b.gscript_hat),
        rel_c(&a.alpha_hat, &b.alpha_hat),
        rel_c(&a.d_hat, &b.d_hat),
    ];
    let vars = a.variance_arrays().into_iter().zip(b.variance_arrays()).map(|((_, x), (_, y))| rel_r(x, y));
    means.into_iter().chain(vars).fold(0.0, f64::max)
}

/// Name, pass flag and detail line of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Step name and the pair (fast, transcribed) applied to a state.
type StepPair = (
    &'static str,
    fn(&mut AmpState, &AmpProblem, &AmpOptions) -> Result<()>,
    fn(&mut AmpState, &AmpProblem, &AmpOptions) -> Result<()>,
);

/// Every step paired with its transcription.
pub fn step_pairs() -> Vec<StepPair> {
    use crate::amp::steps as f;
    vec![
        ("p_step", |s, _, o| { f::p_step(s, o); Ok(()) }, |s, _, o| { p_step(s, o); Ok(()) }),
        ("output_residual_step", |s, p, o| { f::output_residual_step(s, p, o); Ok(()) }, |s, p, o| { output_residual_step(s, p, o); Ok(()) }),
        ("w_merge_step", |s, p, o| { f::w_merge_step(s, p, o); Ok(()) }, |s, p, o| { w_merge_step(s, p, o); Ok(()) }),
        ("bilinear_split_step", |s, _, o| { f::bilinear_split_step(s, o); Ok(()) }, |s, _, o| { bilinear_split_step(s, o); Ok(()) }),
        ("x_denoise_step", f::x_denoise_step, x_denoise_step),
        ("s_linear_step", |s, p, o| { f::s_linear_step(s, p, o); Ok(()) }, |s, p, o| { s_linear_step(s, p, o); Ok(()) }),
        ("s_denoise_step", f::s_denoise_step, s_denoise_step),
        ("g_merge_step", |s, _, o| { f::g_merge_step(s, o); Ok(()) }, |s, _, o| { g_merge_step(s, o); Ok(()) }),
    ]
}

/// Worst relative disagreement between each step and its transcription over
/// `instances` random micro problems.
pub fn transcription_disagreement(instances: u64, seed: u64) -> Result<f64> {
    let opts = AmpOptions { damping: 0.7, ..AmpOptions::default() };
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (problem, state) = random_instance(seed.wrapping_add(i), (3, 4, 5, 6, 6, 8));
        for (_, fast, slow) in step_pairs() {
            let (mut a, mut b) = (state.clone(), state.clone());
            fast(&mut a, &problem, &opts)?;
            slow(&mut b, &problem, &opts)?;
            worst = worst.max(max_relative_difference(&a, &b));
        }
    }
    Ok(worst)
}

/// Random denoiser inputs with `v, τ ∈ [1e-3, 10]` (log-uniform),
/// `λ ∈ [0.01, 0.99]` and `r` of the scale of the marginal.
pub fn random_denoiser_inputs(count: usize, seed: u64) -> Vec<(Complex64, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = 10f64.powf(rng.random_range(-3.0..1.0));
            let tau = 10f64.powf(rng.random_range(-3.0..1.0));
            let lambda = rng.random_range(0.01..0.99);
            let spread = if rng.random_bool(0.5) { tau + v } else { v };
            let var = spread * rng.random_range(0.1..4.0);
            let r = crate::linalg::complex_normal(&mut rng, var);
            (r, v, lambda, tau)
        })
        .collect()
}

/// Largest `|Δmean|` and `|Δvar|` between the denoiser and the quadrature
/// oracle over the given inputs.
pub fn denoiser_disagreement(inputs: &[(Complex64, f64, f64, f64)]) -> Result<(f64, f64)> {
    let mut worst = (0.0f64, 0.0f64);
    for &(r, v, lambda, tau) in inputs {
        let post = bg_denoise(r, v, lambda, tau)?;
        let (mean, var) = quadrature_bg_oracle(r, v, lambda, tau, 12.0, 201)?;
        worst.0 = worst.0.max((post.mean - mean).norm());
        worst.1 = worst.1.max((post.var - var).abs());
    }
    Ok(worst)
}

/// Quick equivalence checks: denoiser against quadrature and every step
/// against its transcription.
pub fn selftest() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    match denoiser_disagreement(&random_denoiser_inputs(200, 11)) {
        Ok((dm, dv)) => out.push(CheckOutcome {
            name: "denoiser matches quadrature",
            passed: dm < 1e-6 && dv < 1e-6,
            detail: format!("max |dmean| = {dm:.2e}, max |dvar| = {dv:.2e} over 200 inputs"),
        }),
        Err(e) => out.push(CheckOutcome { name: "denoiser matches quadrature", passed: false, detail: e.to_string() }),
    }
    match transcription_disagreement(20, 101) {
        Ok(d) => out.push(CheckOutcome {
            name: "steps match transcriptions",
            passed: d < 1e-10,
            detail: format!("max relative difference {d:.2e} over 20 instances"),
        }),
        Err(e) => out.push(CheckOutcome { name: "steps match transcriptions", passed: false, detail: e.to_string() }),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

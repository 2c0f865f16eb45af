//! Approximate message passing for the factorization `Y = A_B S A_R^H X Q + N`.
//!
//! Three coupled layers share one [`AmpState`]:
//!
//! * the output layer treats `W` as the signal of `Y = W Q + N`
//!   ([`steps::output_residual_step`], [`steps::w_merge_step`]);
//! * the bilinear layer splits `W = G X` ([`steps::p_step`],
//!   [`steps::bilinear_split_step`], [`steps::x_denoise_step`]);
//! * the linear layer ties `G = A_B S A_R^H` to the sparse angular
//!   coefficients ([`steps::s_linear_step`], [`steps::s_denoise_step`],
//!   [`steps::g_merge_step`]).
//!
//! [`estimate`] runs the schedule on a problem rescaled to unit prior
//! variances and maps the estimates back, so the variance floor and ceiling
//! are independent of the physical path loss.

pub mod denoise;
pub mod steps;

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::VadDictionaries;
use crate::error::{dim_check, Error, Result};
use crate::linalg::{abs2, complex_normal, frob2, CMatrix, RMatrix, ZERO};

pub use denoise::{bg_denoise, BgPosterior};

/// Spike-and-slab priors of `S` and `X` plus the noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub lambda_s: f64,
    pub tau_s: f64,
    pub lambda_alpha: f64,
    /// Per-device slab variance `τ_{h,k}`.
    pub tau_h: Vec<f64>,
    pub tau_n: f64,
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.lambda_s) || !prob(self.lambda_alpha) {
            return Err(Error::Config("prior probabilities must lie in [0, 1]".into()));
        }
        if !(self.tau_s > 0.0) || !(self.tau_n >= 0.0) || self.tau_h.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("prior variances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpOptions {
    pub max_iter: usize,
    /// Weight of the new value when blending `w`, `g`, `x` and `s` updates.
    pub damping: f64,
    /// Early stop when `‖Δŵ‖_F / ‖ŵ‖_F` falls below this.
    pub tol: f64,
    pub variance_floor: f64,
    pub variance_ceiling: f64,
    /// Absolute activity threshold on `‖x̂_k‖₂`.
    pub epsilon_threshold: f64,
    pub record_trajectory: bool,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            damping: 0.5,
            tol: 1e-6,
            variance_floor: 1e-12,
            variance_ceiling: 1e12,
            epsilon_threshold: 0.0,
            record_trajectory: false,
        }
    }
}

impl AmpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0
            || !(self.damping > 0.0 && self.damping <= 1.0)
            || !(self.tol >= 0.0)
            || !(self.variance_floor > 0.0)
            || !(self.variance_ceiling > self.variance_floor)
            || !(self.epsilon_threshold >= 0.0)
        {
            return Err(Error::Config(format!("invalid AMP options {self:?}")));
        }
        Ok(())
    }
}

/// Problem sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// BS antennas `M`.
    pub m: usize,
    /// RIS elements `N`.
    pub n: usize,
    /// Devices `K`.
    pub k: usize,
    /// Pilot length `L`.
    pub l: usize,
    /// BS angular grid `M'`.
    pub m_grid: usize,
    /// RIS angular grid `N'`.
    pub n_grid: usize,
}

/// Observation, pilots, dictionaries and priors with their squared magnitudes
/// precomputed.
#[derive(Debug, Clone)]
pub struct AmpProblem {
    pub y: CMatrix,
    pub q: CMatrix,
    pub q_abs2: RMatrix,
    pub a_b: CMatrix,
    pub a_b_abs2: RMatrix,
    pub a_r: CMatrix,
    pub a_r_abs2: RMatrix,
    pub priors: Priors,
}

impl AmpProblem {
    pub fn new(y: CMatrix, q: CMatrix, a_b: CMatrix, a_r: CMatrix, priors: Priors) -> Result<Self> {
        priors.validate()?;
        dim_check(y.nrows() == a_b.nrows(), || {
            format!("Y has {} rows but A_B has {}", y.nrows(), a_b.nrows())
        })?;
        dim_check(y.ncols() == q.ncols(), || {
            format!("Y has {} columns but Q has {}", y.ncols(), q.ncols())
        })?;
        dim_check(priors.tau_h.len() == q.nrows(), || {
            format!("{} device variances for {} pilot rows", priors.tau_h.len(), q.nrows())
        })?;
        Ok(Self {
            q_abs2: abs2(&q),
            a_b_abs2: abs2(&a_b),
            a_r_abs2: abs2(&a_r),
            y,
            q,
            a_b,
            a_r,
            priors,
        })
    }

    pub fn from_dictionaries(y: &CMatrix, q: &CMatrix, dicts: &VadDictionaries, priors: Priors) -> Result<Self> {
        Self::new(y.clone(), q.clone(), dicts.bs.clone(), dicts.ris.clone(), priors)
    }

    pub fn dims(&self) -> Dims {
        Dims {
            m: self.y.nrows(),
            n: self.a_r.nrows(),
            k: self.q.nrows(),
            l: self.q.ncols(),
            m_grid: self.a_b.ncols(),
            n_grid: self.a_r.ncols(),
        }
    }
}

/// Means and variances of every message of one run.
///
/// Lagged Onsager terms read `gamma_hat`, `o_hat` and `alpha_hat` before the
/// step that overwrites them, so those buffers hold the previous iteration's
/// value whenever a correction uses them.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub s_hat: CMatrix,
    pub v_s: RMatrix,
    pub x_hat: CMatrix,
    pub v_x: RMatrix,
    pub g_hat: CMatrix,
    pub v_g: RMatrix,
    pub w_hat: CMatrix,
    pub v_w: RMatrix,
    pub p_hat: CMatrix,
    pub v_p: RMatrix,
    pub e_hat: CMatrix,
    pub v_e: RMatrix,
    pub gamma_hat: CMatrix,
    pub v_gamma: RMatrix,
    pub beta_hat: CMatrix,
    pub v_beta: RMatrix,
    pub o_hat: CMatrix,
    pub v_o: RMatrix,
    pub b_hat: CMatrix,
    pub v_b: RMatrix,
    pub c_hat: CMatrix,
    pub v_c: RMatrix,
    pub gscript_hat: CMatrix,
    pub v_gscript: RMatrix,
    pub alpha_hat: CMatrix,
    pub v_alpha: RMatrix,
    pub d_hat: CMatrix,
    pub v_d: RMatrix,
}

impl AmpState {
    /// Starts from given `S` and `X` means and variances; `G`, `W` and the
    /// plug-in `P` follow by propagation, residual buffers start at zero.
    pub fn from_factors(
        problem: &AmpProblem,
        s_hat: CMatrix,
        v_s: RMatrix,
        x_hat: CMatrix,
        v_x: RMatrix,
        opts: &AmpOptions,
    ) -> Result<Self> {
        let d = problem.dims();
        dim_check(s_hat.shape() == (d.m_grid, d.n_grid) && v_s.shape() == s_hat.shape(), || {
            format!("S is {:?}, expected {:?}", s_hat.shape(), (d.m_grid, d.n_grid))
        })?;
        dim_check(x_hat.shape() == (d.n, d.k) && v_x.shape() == x_hat.shape(), || {
            format!("X is {:?}, expected {:?}", x_hat.shape(), (d.n, d.k))
        })?;
        let clamp = |m: RMatrix| m.map(|v| v.clamp(opts.variance_floor, opts.variance_ceiling));
        let g_hat = &problem.a_b * &s_hat * problem.a_r.adjoint();
        let v_g = clamp(&problem.a_b_abs2 * &v_s * problem.a_r_abs2.transpose());
        let w_hat = &g_hat * &x_hat;
        let g2 = abs2(&g_hat);
        let x2 = abs2(&x_hat);
        let v_w = clamp(&g2 * &v_x + &v_g * &x2 + &v_g * &v_x);
        let floor = |r: usize, c: usize| RMatrix::from_element(r, c, opts.variance_floor);
        let zeros = |r: usize, c: usize| CMatrix::from_element(r, c, ZERO);
        Ok(Self {
            p_hat: w_hat.clone(),
            v_p: v_w.clone(),
            e_hat: w_hat.clone(),
            v_e: RMatrix::from_element(d.m, d.k, opts.variance_ceiling),
            gamma_hat: zeros(d.m, d.l),
            v_gamma: floor(d.m, d.l),
            beta_hat: zeros(d.m, d.l),
            v_beta: floor(d.m, d.l),
            o_hat: zeros(d.m, d.k),
            v_o: floor(d.m, d.k),
            b_hat: x_hat.clone(),
            v_b: floor(d.n, d.k),
            c_hat: g_hat.clone(),
            v_c: floor(d.m, d.n),
            gscript_hat: g_hat.clone(),
            v_gscript: v_g.clone(),
            alpha_hat: zeros(d.m, d.n),
            v_alpha: floor(d.m, d.n),
            d_hat: s_hat.clone(),
            v_d: floor(d.m_grid, d.n_grid),
            s_hat,
            v_s: clamp(v_s),
            x_hat,
            v_x: clamp(v_x),
            g_hat,
            v_g,
            w_hat,
            v_w,
        })
    }

    /// Every variance array, for invariant checks.
    pub fn variance_arrays(&self) -> [(&'static str, &RMatrix); 14] {
        [
            ("v_s", &self.v_s),
            ("v_x", &self.v_x),
            ("v_g", &self.v_g),
            ("v_w", &self.v_w),
            ("v_p", &self.v_p),
            ("v_e", &self.v_e),
            ("v_gamma", &self.v_gamma),
            ("v_beta", &self.v_beta),
            ("v_o", &self.v_o),
            ("v_b", &self.v_b),
            ("v_c", &self.v_c),
            ("v_gscript", &self.v_gscript),
            ("v_alpha", &self.v_alpha),
            ("v_d", &self.v_d),
        ]
    }

    fn is_finite(&self) -> bool {
        let ok = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        ok(&self.s_hat) && ok(&self.x_hat) && ok(&self.g_hat) && ok(&self.w_hat)
            && self.variance_arrays().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}

/// Draws `S` and `X` from their priors and propagates them through the
/// factorization. Variances start at the prior marginals.
pub fn init_state<R: Rng + ?Sized>(problem: &AmpProblem, opts: &AmpOptions, rng: &mut R) -> Result<AmpState> {
    let d = problem.dims();
    let pr = &problem.priors;
    let mut s_hat = CMatrix::from_element(d.m_grid, d.n_grid, ZERO);
    for j in 0..d.n_grid {
        for i in 0..d.m_grid {
            if pr.lambda_s > 0.0 && rng.random_bool(pr.lambda_s.min(1.0)) {
                s_hat[(i, j)] = complex_normal(rng, pr.tau_s);
            }
        }
    }
    let mut x_hat = CMatrix::from_element(d.n, d.k, ZERO);
    let mut v_x = RMatrix::zeros(d.n, d.k);
    for k in 0..d.k {
        let active = pr.lambda_alpha > 0.0 && rng.random_bool(pr.lambda_alpha.min(1.0));
        for n in 0..d.n {
            if active {
                x_hat[(n, k)] = complex_normal(rng, pr.tau_h[k]);
            }
            v_x[(n, k)] = pr.lambda_alpha * pr.tau_h[k];
        }
    }
    let v_s = RMatrix::from_element(d.m_grid, d.n_grid, pr.lambda_s * pr.tau_s);
    AmpState::from_factors(problem, s_hat, v_s, x_hat, v_x, opts)
}

/// Runs one full iteration of the message schedule.
pub fn iterate(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) -> Result<()> {
    steps::p_step(state, opts);
    steps::output_residual_step(state, problem, opts);
    steps::w_merge_step(state, problem, opts);
    steps::bilinear_split_step(state, opts);
    steps::x_denoise_step(state, problem, opts)?;
    steps::s_linear_step(state, problem, opts);
    steps::s_denoise_step(state, problem, opts)?;
    steps::g_merge_step(state, opts);
    Ok(())
}

/// Per-iteration record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// `‖Y − ŴQ‖_F` in the caller's units.
    pub residual: f64,
    pub mean_v_w: f64,
    pub mean_v_s: f64,
    pub mean_v_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub s_hat: CMatrix,
    pub x_hat: CMatrix,
    pub g_hat: CMatrix,
    pub w_hat: CMatrix,
    /// `‖x̂_k‖₂` per device.
    pub activity_scores: Vec<f64>,
    pub alpha_hat: Vec<bool>,
    pub iterations_run: usize,
    pub converged: bool,
    pub diverged: bool,
    pub final_residual: f64,
    /// Filled when `record_trajectory` is set.
    pub trajectory: Vec<IterationDiagnostics>,
}

/// `α̂_k = 1` iff `‖x̂_k‖₂ > epsilon`.
pub fn detect_activity(x_hat: &CMatrix, epsilon: f64) -> Vec<bool> {
    column_norms(x_hat).into_iter().map(|s| s > epsilon).collect()
}

pub fn column_norms(m: &CMatrix) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

fn mean(m: &RMatrix) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.sum() / m.len() as f64
    }
}

/// Runs the schedule on an already-prepared problem, in the problem's units.
pub fn run<R: Rng + ?Sized>(problem: &AmpProblem, opts: &AmpOptions, rng: &mut R) -> Result<EstimationResult> {
    opts.validate()?;
    let mut state = init_state(problem, opts, rng)?;
    run_from(&mut state, problem, opts)
}

/// Iterates from `state` until `max_iter`, the tolerance, or divergence.
///
/// Divergence (a residual above ten times the initial one for 50 consecutive
/// iterations, or a non-finite value) stops the run and is reported in the
/// result; the last finite estimates are returned.
pub fn run_from(state: &mut AmpState, problem: &AmpProblem, opts: &AmpOptions) -> Result<EstimationResult> {
    let residual = |w: &CMatrix| frob2(&(&problem.y - w * &problem.q)).sqrt();
    let initial_residual = residual(&state.w_hat);
    let mut trajectory = Vec::new();
    let mut last_good = (state.s_hat.clone(), state.x_hat.clone(), state.g_hat.clone(), state.w_hat.clone());
    let mut above = 0usize;
    let mut converged = false;
    let mut diverged = false;
    let mut iterations_run = 0;
    let mut final_residual = initial_residual;
    for it in 1..=opts.max_iter {
        let w_old = state.w_hat.clone();
        let step = iterate(state, problem, opts);
        iterations_run = it;
        if step.is_err() || !state.is_finite() {
            diverged = true;
            break;
        }
        let r = residual(&state.w_hat);
        final_residual = r;
        if opts.record_trajectory {
            trajectory.push(IterationDiagnostics {
                iteration: it,
                residual: r,
                mean_v_w: mean(&state.v_w),
                mean_v_s: mean(&state.v_s),
                mean_v_x: mean(&state.v_x),
            });
        }
        last_good = (state.s_hat.clone(), state.x_hat.clone(), state.g_hat.clone(), state.w_hat.clone());
        if r > 10.0 * initial_residual {
            above += 1;
            if above >= 50 {
                diverged = true;
                break;
            }
        } else {
            above = 0;
        }
        let norm = frob2(&state.w_hat).sqrt();
        let change = frob2(&(&state.w_hat - &w_old)).sqrt();
        if norm > 0.0 && change <= opts.tol * norm || norm == 0.0 && change == 0.0 {
            converged = true;
            break;
        }
    }
    let (s_hat, x_hat, g_hat, w_hat) = last_good;
    let activity_scores = column_norms(&x_hat);
    let alpha_hat = activity_scores.iter().map(|s| *s > opts.epsilon_threshold).collect();
    Ok(EstimationResult {
        s_hat,
        x_hat,
        g_hat,
        w_hat,
        activity_scores,
        alpha_hat,
        iterations_run,
        converged,
        diverged,
        final_residual,
        trajectory,
    })
}

/// Problem rescaled so that the mean device variance and the angular slab
/// variance are one: `X = c_x X'`, `S = c_s S'`, `Y = c_x c_s Y'`. Returns the
/// problem with `(c_x, c_s)`.
pub fn normalized_problem(
    y: &CMatrix,
    q: &CMatrix,
    dicts: &VadDictionaries,
    priors: &Priors,
) -> Result<(AmpProblem, f64, f64)> {
    priors.validate()?;
    let mean_tau_h = priors.tau_h.iter().sum::<f64>() / priors.tau_h.len().max(1) as f64;
    let c_x = if mean_tau_h > 0.0 { mean_tau_h.sqrt() } else { 1.0 };
    let c_s = priors.tau_s.sqrt();
    let c_y = c_x * c_s;
    let scaled = Priors {
        lambda_s: priors.lambda_s,
        tau_s: 1.0,
        lambda_alpha: priors.lambda_alpha,
        tau_h: priors.tau_h.iter().map(|t| t / (c_x * c_x)).collect(),
        tau_n: priors.tau_n / (c_y * c_y),
    };
    let problem = AmpProblem::new(y.map(|z| z / c_y), q.clone(), dicts.bs.clone(), dicts.ris.clone(), scaled)?;
    Ok((problem, c_x, c_s))
}

/// Joint activity detection and channel estimation.
///
/// Solves the [`normalized_problem`] and maps the results back;
/// `epsilon_threshold` and all outputs are in the caller's units.
pub fn estimate<R: Rng + ?Sized>(
    y: &CMatrix,
    q: &CMatrix,
    dicts: &VadDictionaries,
    priors: &Priors,
    opts: &AmpOptions,
    rng: &mut R,
) -> Result<EstimationResult> {
    opts.validate()?;
    let (problem, c_x, c_s) = normalized_problem(y, q, dicts, priors)?;
    let c_y = c_x * c_s;
    let unit = AmpOptions {
        epsilon_threshold: opts.epsilon_threshold / c_x,
        ..opts.clone()
    };
    let mut res = run(&problem, &unit, rng)?;
    let scale = |m: &mut CMatrix, c: f64| m.iter_mut().for_each(|z| *z *= c);
    scale(&mut res.s_hat, c_s);
    scale(&mut res.g_hat, c_s);
    scale(&mut res.x_hat, c_x);
    scale(&mut res.w_hat, c_y);
    res.activity_scores.iter_mut().for_each(|s| *s *= c_x);
    res.alpha_hat = res.activity_scores.iter().map(|s| *s > opts.epsilon_threshold).collect();
    res.final_residual *= c_y;
    for d in &mut res.trajectory {
        d.residual *= c_y;
        d.mean_v_w *= c_y * c_y;
        d.mean_v_s *= c_s * c_s;
        d.mean_v_x *= c_x * c_x;
    }
    Ok(res)
}

/// Damped blend `θ·new + (1 − θ)·old`.
pub(crate) fn blend<T>(new: &DMatrix<T>, old: &DMatrix<T>, theta: f64) -> DMatrix<T>
where
    T: nalgebra::Scalar + Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    new.zip_map(old, |a, b| a * theta + b * (1.0 - theta))
}

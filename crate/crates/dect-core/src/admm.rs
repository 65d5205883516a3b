//! Joint dual-energy reconstruction by ADMM with variable splitting.
//!
//! The unknown is `theta = (c, p)` (Compton and photoelectric images).  The
//! splitting introduces `z = C theta` with `C = [I 0; 0 I; D 0; I 0]`,
//! giving four auxiliary blocks: `t` (Compton copy carrying the data term),
//! `u` (photoelectric copy carrying the data and NLM terms), `v = D c` (TV
//! block), and `s = c` (non-negativity block).  A diagonal balance matrix
//! `Lambda` scales the constraint blocks: 1 on `t` and `s`, `lambda_u`
//! (default 1e-5, the inverse of the photoelectric/Compton magnitude
//! ratio) on `u`, and `sqrt(nu)` on `v`.  The augmented Lagrangian penalty
//! is `(mu/2) ||Lambda (z - C theta - eta)||^2` with scaled duals `eta`.
//!
//! Block schedule per outer iteration: `t`-update (damped
//! Levenberg-Marquardt with CG inner solves), an inner loop that cycles
//! TV soft-thresholding, the non-negativity projection, the partial
//! `theta(c)` solve, and the `v`/`s` dual steps many times, then the
//! `u`-update (LM with the NLM penalty whose weights are frozen from the
//! previous outer Compton image), the full `theta`-update, and all dual
//! updates.  Stopping follows the usual primal/dual residual criterion.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::fbp::{fbp, Filter};
use crate::geometry::{ImageGrid, ScanGeometry, SystemMatrix};
use crate::physics::{DualSinogram, ImagePair, Spectrum, SpectrumEval};
use crate::ync::ync_reconstruct;
use crate::regularizers::{
    nlm_penalty_and_gradient, soft_threshold_scalar, tv_penalty, DifferenceOperator, NlmParams,
    NlmWeights, RegularizerError,
};

#[derive(Debug, Error, PartialEq)]
pub enum AdmmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("CG failed to converge: relative residual {residual}")]
    CgFailure { residual: f64 },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("regularizer error: {0}")]
    Regularizer(#[from] RegularizerError),
}

/// Solver settings; the defaults reproduce the reference configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian penalty weight mu.
    pub penalty_mu: f64,
    /// TV-block balance: Lambda carries sqrt(nu) on the v rows.
    pub nu: f64,
    /// Lambda entry on the photoelectric block (compensates the ~1e5
    /// magnitude ratio between p and c).
    pub lambda_u: f64,
    pub lambda_tv: f64,
    pub lambda_nlm: f64,
    pub nlm: NlmParams,
    pub max_outer: usize,
    /// TV/non-negativity inner cycles per outer iteration.
    pub inner_tv_iters: usize,
    /// LM steps per image-block update.
    pub lm_steps: usize,
    pub lm_damping_init: f64,
    pub lm_damping_factor: f64,
    /// Inner CG (LM step solve) relative tolerance and iteration cap.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// CG tolerance for the theta(c) normal equations.
    pub theta_cg_tol: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            penalty_mu: 1.0,
            nu: 1.0,
            lambda_u: 1e-5,
            lambda_tv: 0.01,
            lambda_nlm: 1.0,
            nlm: NlmParams::default(),
            max_outer: 30,
            inner_tv_iters: 50,
            lm_steps: 3,
            lm_damping_init: 1e-3,
            lm_damping_factor: 10.0,
            cg_tol: 1e-6,
            cg_max_iters: 50,
            theta_cg_tol: 1e-8,
            eps_abs: 1e-4,
            eps_rel: 1e-3,
        }
    }
}

impl AdmmConfig {
    fn validate(&self) -> Result<(), AdmmError> {
        if !(self.penalty_mu > 0.0) {
            return Err(AdmmError::InvalidConfig("penalty_mu must be > 0"));
        }
        if !(self.nu >= 0.0) {
            return Err(AdmmError::InvalidConfig("nu must be >= 0"));
        }
        if !(self.lambda_u > 0.0) {
            return Err(AdmmError::InvalidConfig("lambda_u must be > 0"));
        }
        if !(self.lambda_tv >= 0.0) || !(self.lambda_nlm >= 0.0) {
            return Err(AdmmError::InvalidConfig("regularizer weights must be >= 0"));
        }
        if self.max_outer == 0 {
            return Err(AdmmError::InvalidConfig("max_outer must be >= 1"));
        }
        Ok(())
    }
}

/// Full splitting state.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub c: Vec<f64>,
    pub p: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub eta_t: Vec<f64>,
    pub eta_u: Vec<f64>,
    pub eta_v: Vec<f64>,
    pub eta_s: Vec<f64>,
    /// Count of LM updates that could not decrease their subobjective.
    pub warnings: usize,
}

impl AdmmState {
    /// Initialize with `z = C theta` and zero duals.
    pub fn new(init: &ImagePair, op: &DifferenceOperator) -> Result<Self, AdmmError> {
        let n = op.n_pixels();
        if init.c.len() != n {
            return Err(AdmmError::DimensionMismatch { expected: n, got: init.c.len() });
        }
        let v = op.apply(&init.c)?;
        Ok(Self {
            c: init.c.clone(),
            p: init.p.clone(),
            t: init.c.iter().map(|&x| x.max(0.0)).collect(),
            u: init.p.clone(),
            s: init.c.iter().map(|&x| x.max(0.0)).collect(),
            v,
            eta_t: vec![0.0; n],
            eta_u: vec![0.0; n],
            eta_v: vec![0.0; 2 * n],
            eta_s: vec![0.0; n],
            warnings: 0,
        })
    }
}

/// One row per completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStat {
    pub iter: usize,
    pub objective: f64,
    pub data_fidelity: f64,
    pub tv: f64,
    pub nlm: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: Vec<IterationStat>,
    pub converged: bool,
    pub warnings: usize,
}

impl SolveReport {
    /// Tab-delimited table with a header row.
    pub fn to_delimited(&self) -> String {
        use alloc::format;
        let mut s =
            String::from("iter\tobjective\tdata\ttv\tnlm\tprimal\tdual\telapsed_s\n");
        for it in &self.iterations {
            s += &format!(
                "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.6e}\t{:.6e}\t{:.3}\n",
                it.iter,
                it.objective,
                it.data_fidelity,
                it.tv,
                it.nlm,
                it.primal_residual,
                it.dual_residual,
                it.elapsed_s
            );
        }
        s
    }
}

/// Per-ray measurement data shared by the image-block subproblems.
struct RayData<'a> {
    a: &'a SystemMatrix,
    m: [&'a [f64]; 2],
    w: [&'a [f64]; 2],
    evals: [SpectrumEval; 2],
}

impl RayData<'_> {
    fn value(&self, ac: &[f64], ap: &[f64]) -> f64 {
        let mut total = 0.0;
        for e in 0..2 {
            let (m, w) = (self.m[e], self.w[e]);
            for i in 0..ac.len() {
                if w[i] == 0.0 {
                    continue;
                }
                let (mh, _, _) = self.evals[e].log_mean_and_slopes(ac[i], ap[i]);
                let r = m[i] - mh;
                total += 0.5 * w[i] * r * r;
            }
        }
        total
    }

    /// Linearization for the chosen basis: value, per-ray gradient factor
    /// `f_i = -sum_e w r g` (so grad = A^T f), and Gauss-Newton diagonal
    /// `d_i = sum_e w g^2` (so H_data x = A^T (d . A x)).
    fn lin(&self, ac: &[f64], ap: &[f64], compton: bool) -> (f64, Vec<f64>, Vec<f64>) {
        let n = ac.len();
        let mut value = 0.0;
        let mut f = vec![0.0; n];
        let mut d = vec![0.0; n];
        for e in 0..2 {
            let (m, w) = (self.m[e], self.w[e]);
            for i in 0..n {
                if w[i] == 0.0 {
                    continue;
                }
                let (mh, gc, gp) = self.evals[e].log_mean_and_slopes(ac[i], ap[i]);
                let g = if compton { gc } else { gp };
                let r = m[i] - mh;
                value += 0.5 * w[i] * r * r;
                f[i] -= w[i] * r * g;
                d[i] += w[i] * g * g;
            }
        }
        (value, f, d)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// CG for an SPD operator given as a closure; solves to a relative
/// residual of `tol` or errors out.
fn cg_solve(
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    warm: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, AdmmError> {
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    for _ in 0..max_iters {
        if rs.sqrt() <= tol * rhs_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rs = rs_new;
    }
    if rs.sqrt() <= tol * rhs_norm {
        Ok(x)
    } else {
        Err(AdmmError::CgFailure { residual: rs.sqrt() / rhs_norm })
    }
}

/// Best-effort CG used inside LM steps: returns the iterate even when the
/// tolerance was not reached (the step is validated by the LM decrease
/// test anyway).
fn cg_solve_loose(
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tol: f64,
    max_iters: usize,
) -> Vec<f64> {
    match cg_solve(apply, rhs, None, tol, max_iters) {
        Ok(x) => x,
        Err(_) => {
            // Re-run capturing the final iterate regardless of residual.
            let n = rhs.len();
            let mut x = vec![0.0; n];
            let mut r = rhs.to_vec();
            let mut p = r.clone();
            let mut rs = dot(&r, &r);
            for _ in 0..max_iters {
                let ap = apply(&p);
                let pap = dot(&p, &ap);
                if pap <= 0.0 {
                    break;
                }
                let alpha = rs / pap;
                for k in 0..n {
                    x[k] += alpha * p[k];
                    r[k] -= alpha * ap[k];
                }
                let rs_new = dot(&r, &r);
                let beta = rs_new / rs;
                for k in 0..n {
                    p[k] = r[k] + beta * p[k];
                }
                rs = rs_new;
            }
            x
        }
    }
}

/// TV-block closed form: `v = S_{lambda_tv / (mu nu)}(D c + eta_v)`.
pub fn update_tv_v(
    c: &[f64],
    eta_v: &[f64],
    op: &DifferenceOperator,
    lambda_tv: f64,
    mu: f64,
    nu: f64,
) -> Result<Vec<f64>, AdmmError> {
    let dc = op.apply(c)?;
    if eta_v.len() != dc.len() {
        return Err(AdmmError::DimensionMismatch { expected: dc.len(), got: eta_v.len() });
    }
    let kappa = if lambda_tv == 0.0 { 0.0 } else { lambda_tv / (mu * nu) };
    Ok(dc
        .iter()
        .zip(eta_v)
        .map(|(&d, &e)| soft_threshold_scalar(d + e, kappa))
        .collect())
}

/// Non-negativity block: `s = max(0, c + eta_s)`.
pub fn update_nonneg_s(c: &[f64], eta_s: &[f64]) -> Vec<f64> {
    c.iter().zip(eta_s).map(|(&a, &b)| (a + b).max(0.0)).collect()
}

/// Compton part of the theta-update: solve
/// `(2 I + nu D^T D) c = (t - eta_t) + (s - eta_s) + nu D^T (v - eta_v)`.
#[allow(clippy::too_many_arguments)]
pub fn update_theta_c(
    t: &[f64],
    s: &[f64],
    v: &[f64],
    eta_t: &[f64],
    eta_s: &[f64],
    eta_v: &[f64],
    op: &DifferenceOperator,
    nu: f64,
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>, AdmmError> {
    let n = op.n_pixels();
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        rhs[k] = (t[k] - eta_t[k]) + (s[k] - eta_s[k]);
    }
    if nu > 0.0 {
        let ve: Vec<f64> = v.iter().zip(eta_v).map(|(&a, &b)| a - b).collect();
        let dtv = op.apply_adjoint(&ve)?;
        for k in 0..n {
            rhs[k] += nu * dtv[k];
        }
    }
    let mut apply = |x: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().map(|&xv| 2.0 * xv).collect();
        if nu > 0.0 {
            let dx = op.apply(x).expect("size fixed");
            let dtdx = op.apply_adjoint(&dx).expect("size fixed");
            for k in 0..n {
                out[k] += nu * dtdx[k];
            }
        }
        out
    };
    cg_solve(&mut apply, &rhs, warm, tol, 40 * n + 100)
}

/// Scaled-dual update for every block: `eta <- eta - (z - C theta)`.
pub fn update_duals(state: &mut AdmmState, op: &DifferenceOperator) -> Result<(), AdmmError> {
    let n = op.n_pixels();
    let dc = op.apply(&state.c)?;
    for k in 0..n {
        state.eta_t[k] -= state.t[k] - state.c[k];
        state.eta_u[k] -= state.u[k] - state.p[k];
        state.eta_s[k] -= state.s[k] - state.c[k];
    }
    for k in 0..2 * n {
        state.eta_v[k] -= state.v[k] - dc[k];
    }
    Ok(())
}

struct LmSettings {
    steps: usize,
    damping_init: f64,
    damping_factor: f64,
    cg_tol: f64,
    cg_max_iters: usize,
}

/// Damped LM for one image block: minimizes
/// `data(x) + (pw/2)||x - q||^2 + [nlm penalty on x]`, optionally
/// projecting iterates onto the non-negative orthant.  Only descending
/// steps are accepted, so the subobjective never increases.  Returns the
/// new iterate and whether any step was accepted.
#[allow(clippy::too_many_arguments)]
fn lm_image_update(
    x0: &[f64],
    data: &RayData<'_>,
    other_sino: &[f64],
    compton: bool,
    q: &[f64],
    pw: f64,
    nlm: Option<(&NlmWeights, f64)>,
    project: bool,
    lm: &LmSettings,
) -> Result<(Vec<f64>, bool), AdmmError> {
    let n = x0.len();
    let prox_val = |x: &[f64]| -> f64 {
        0.5 * pw * x.iter().zip(q).map(|(&a, &b)| (a - b) * (a - b)).sum::<f64>()
    };
    let nlm_val = |x: &[f64]| -> Result<f64, AdmmError> {
        match nlm {
            Some((weights, lambda)) if lambda > 0.0 => {
                Ok(nlm_penalty_and_gradient(x, weights, lambda)?.0)
            }
            _ => Ok(0.0),
        }
    };
    let full_value = |x: &[f64]| -> Result<f64, AdmmError> {
        let own = data.a.forward(x).map_err(|_| AdmmError::DimensionMismatch {
            expected: n,
            got: x.len(),
        })?;
        let dv = if compton {
            data.value(&own, other_sino)
        } else {
            data.value(other_sino, &own)
        };
        Ok(dv + prox_val(x) + nlm_val(x)?)
    };

    let mut x = x0.to_vec();
    let mut fx = full_value(&x)?;
    let mut damping = lm.damping_init;
    let mut any_accept = false;
    for _ in 0..lm.steps {
        let own = data.a.forward(&x).map_err(|_| AdmmError::DimensionMismatch {
            expected: n,
            got: x.len(),
        })?;
        let (_, f, d) = if compton {
            data.lin(&own, other_sino, true)
        } else {
            data.lin(other_sino, &own, false)
        };
        let mut grad = data.a.adjoint(&f).expect("ray factor size");
        for k in 0..n {
            grad[k] += pw * (x[k] - q[k]);
        }
        if let Some((weights, lambda)) = nlm {
            if lambda > 0.0 {
                let (_, g) = nlm_penalty_and_gradient(&x, weights, lambda)?;
                for k in 0..n {
                    grad[k] += g[k];
                }
            }
        }
        let gnorm = norm(&grad);
        if gnorm == 0.0 {
            break;
        }
        let neg_grad: Vec<f64> = grad.iter().map(|&g| -g).collect();
        let mut accepted = false;
        for _ in 0..10 {
            let damp = damping;
            let mut apply = |xv: &[f64]| -> Vec<f64> {
                let axv = data.a.forward(xv).expect("size fixed");
                let scaled: Vec<f64> = axv.iter().zip(&d).map(|(&a, &dd)| a * dd).collect();
                let mut out = data.a.adjoint(&scaled).expect("size fixed");
                if let Some((weights, lambda)) = nlm {
                    if lambda > 0.0 {
                        let (_, h) = nlm_penalty_and_gradient(xv, weights, lambda)
                            .expect("sizes fixed");
                        for k in 0..out.len() {
                            out[k] += h[k];
                        }
                    }
                }
                for k in 0..out.len() {
                    out[k] += (pw + damp) * xv[k];
                }
                out
            };
            let step = cg_solve_loose(&mut apply, &neg_grad, lm.cg_tol, lm.cg_max_iters);
            let mut cand: Vec<f64> = x.iter().zip(&step).map(|(&a, &b)| a + b).collect();
            if project {
                for xv in &mut cand {
                    *xv = xv.max(0.0);
                }
            }
            let fc = full_value(&cand)?;
            if fc.is_finite() && fc <= fx {
                x = cand;
                fx = fc;
                damping = (damping / lm.damping_factor).max(1e-14);
                accepted = true;
                any_accept = true;
                break;
            }
            damping *= lm.damping_factor;
        }
        if !accepted {
            break;
        }
    }
    Ok((x, any_accept))
}

/// Compton-block update (data term + AL prox, projected onto the
/// non-negative orthant).
pub fn update_compton_t(
    state: &AdmmState,
    sino: &DualSinogram,
    a: &SystemMatrix,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
    config: &AdmmConfig,
) -> Result<(Vec<f64>, bool), AdmmError> {
    let data = RayData {
        a,
        m: [&sino.m_low, &sino.m_high],
        w: [&sino.weights_low, &sino.weights_high],
        evals: [SpectrumEval::new(spec_low), SpectrumEval::new(spec_high)],
    };
    let au = a.forward(&state.u).map_err(|_| AdmmError::DimensionMismatch {
        expected: a.n_pixels,
        got: state.u.len(),
    })?;
    let q: Vec<f64> = state.c.iter().zip(&state.eta_t).map(|(&c, &e)| c + e).collect();
    lm_image_update(
        &state.t,
        &data,
        &au,
        true,
        &q,
        config.penalty_mu,
        None,
        true,
        &LmSettings {
            steps: config.lm_steps,
            damping_init: config.lm_damping_init,
            damping_factor: config.lm_damping_factor,
            cg_tol: config.cg_tol,
            cg_max_iters: config.cg_max_iters,
        },
    )
}

/// Photoelectric-block update (data term + NLM penalty + AL prox).
pub fn update_photoelectric_u(
    state: &AdmmState,
    sino: &DualSinogram,
    a: &SystemMatrix,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
    weights: Option<&NlmWeights>,
    config: &AdmmConfig,
) -> Result<(Vec<f64>, bool), AdmmError> {
    let data = RayData {
        a,
        m: [&sino.m_low, &sino.m_high],
        w: [&sino.weights_low, &sino.weights_high],
        evals: [SpectrumEval::new(spec_low), SpectrumEval::new(spec_high)],
    };
    let at = a.forward(&state.t).map_err(|_| AdmmError::DimensionMismatch {
        expected: a.n_pixels,
        got: state.t.len(),
    })?;
    let q: Vec<f64> = state.p.iter().zip(&state.eta_u).map(|(&p, &e)| p + e).collect();
    let pw = config.penalty_mu * config.lambda_u * config.lambda_u;
    lm_image_update(
        &state.u,
        &data,
        &at,
        false,
        &q,
        pw,
        weights.map(|w| (w, config.lambda_nlm)),
        false,
        &LmSettings {
            steps: config.lm_steps,
            damping_init: config.lm_damping_init,
            damping_factor: config.lm_damping_factor,
            cg_tol: config.cg_tol,
            cg_max_iters: config.cg_max_iters,
        },
    )
}

/// Run the full solver.  `init` defaults to a filtered back-projection of
/// the low-energy sinogram scaled by the spectrum-averaged Klein-Nishina
/// value for `c` and zeros for `p`.  `timer` supplies wall-clock seconds
/// for the report (pass `|| 0.0` when no clock is available).
#[allow(clippy::too_many_arguments)]
pub fn run_admm(
    sino: &DualSinogram,
    a: &SystemMatrix,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
    grid: &ImageGrid,
    geom: &ScanGeometry,
    config: &AdmmConfig,
    init: Option<&ImagePair>,
    timer: &dyn Fn() -> f64,
) -> Result<(ImagePair, SolveReport), AdmmError> {
    config.validate()?;
    let n = grid.n_pixels();
    if a.n_pixels != n {
        return Err(AdmmError::DimensionMismatch { expected: n, got: a.n_pixels });
    }
    if sino.len() != a.n_rays {
        return Err(AdmmError::DimensionMismatch { expected: a.n_rays, got: sino.len() });
    }
    let op = DifferenceOperator::new(grid.nx, grid.ny);

    let start_pair;
    let init = match init {
        Some(pair) => pair,
        None => {
            // Per-ray decomposition + FBP is a cheap, roughly unbiased
            // starting point for both channels; starting the slow
            // photoelectric channel at zero costs many outer iterations.
            let seed = match ync_reconstruct(
                sino,
                spec_low,
                spec_high,
                grid,
                geom,
                &Filter::ramp_hann(),
            ) {
                Ok(pair) => pair,
                Err(_) => {
                    // Fully masked data: fall back to a single-energy
                    // Compton estimate.
                    let scale = spec_low.mean_klein_nishina();
                    let c: Vec<f64> = fbp(&sino.m_low, geom, grid, &Filter::ramp_hann())
                        .iter()
                        .map(|&v| (v / scale).max(0.0))
                        .collect();
                    ImagePair { grid: grid.clone(), c, p: vec![0.0; n] }
                }
            };
            start_pair = ImagePair {
                grid: grid.clone(),
                c: seed.c.iter().map(|&v| v.max(0.0)).collect(),
                p: seed.p.iter().map(|&v| v.max(0.0)).collect(),
            };
            &start_pair
        }
    };
    let mut state = AdmmState::new(init, &op)?;
    let data_eval = [SpectrumEval::new(spec_low), SpectrumEval::new(spec_high)];
    let ray_data = RayData {
        a,
        m: [&sino.m_low, &sino.m_high],
        w: [&sino.weights_low, &sino.weights_high],
        evals: data_eval,
    };

    let mu = config.penalty_mu;
    let nu = config.nu;
    let lu2 = config.lambda_u * config.lambda_u;
    let t0 = timer();
    let mut report = SolveReport::default();
    // NLM reference: Compton image from the previous outer iteration.
    let mut nlm_ref = state.c.clone();
    let mut z_prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for iter in 0..config.max_outer {
        let weights = if config.lambda_nlm > 0.0 {
            Some(NlmWeights::compute(&nlm_ref, grid.nx, grid.ny, &config.nlm)?)
        } else {
            None
        };

        // 1. Compton data block.
        let (t_new, ok_t) = update_compton_t(&state, sino, a, spec_low, spec_high, config)?;
        if !ok_t {
            state.warnings += 1;
        }
        state.t = t_new;

        // 2. Inner TV / non-negativity cycles with partial theta(c) solves.
        for _ in 0..config.inner_tv_iters.max(1) {
            state.v = update_tv_v(&state.c, &state.eta_v, &op, config.lambda_tv, mu, nu)?;
            state.s = update_nonneg_s(&state.c, &state.eta_s);
            state.c = update_theta_c(
                &state.t,
                &state.s,
                &state.v,
                &state.eta_t,
                &state.eta_s,
                &state.eta_v,
                &op,
                nu,
                config.theta_cg_tol,
                Some(&state.c),
            )?;
            let dc = op.apply(&state.c)?;
            for k in 0..2 * n {
                state.eta_v[k] -= state.v[k] - dc[k];
            }
            for k in 0..n {
                state.eta_s[k] -= state.s[k] - state.c[k];
            }
        }

        // 3. Photoelectric data block with frozen NLM weights.
        let (u_new, ok_u) = update_photoelectric_u(
            &state,
            sino,
            a,
            spec_low,
            spec_high,
            weights.as_ref(),
            config,
        )?;
        if !ok_u {
            state.warnings += 1;
        }
        state.u = u_new;

        // 4. Full theta-update.
        state.c = update_theta_c(
            &state.t,
            &state.s,
            &state.v,
            &state.eta_t,
            &state.eta_s,
            &state.eta_v,
            &op,
            nu,
            config.theta_cg_tol,
            Some(&state.c),
        )?;
        state.p = state.u.iter().zip(&state.eta_u).map(|(&uu, &e)| uu - e).collect();

        // 5. Dual updates.
        update_duals(&mut state, &op)?;

        if state.c.iter().chain(&state.p).any(|v| !v.is_finite()) {
            return Err(AdmmError::NonFinite("theta after outer iteration"));
        }

        // Residuals in the Lambda metric.
        let dc = op.apply(&state.c)?;
        let mut primal2 = 0.0;
        let mut norm_cz2 = 0.0;
        let mut norm_z2 = 0.0;
        for k in 0..n {
            let rt = state.t[k] - state.c[k];
            let ru = state.u[k] - state.p[k];
            let rs = state.s[k] - state.c[k];
            primal2 += rt * rt + lu2 * ru * ru + rs * rs;
            norm_cz2 += 2.0 * state.c[k] * state.c[k] + lu2 * state.p[k] * state.p[k];
            norm_z2 += state.t[k] * state.t[k]
                + lu2 * state.u[k] * state.u[k]
                + state.s[k] * state.s[k];
        }
        for k in 0..2 * n {
            let rv = state.v[k] - dc[k];
            primal2 += nu * rv * rv;
            norm_cz2 += nu * dc[k] * dc[k];
            norm_z2 += nu * state.v[k] * state.v[k];
        }
        let primal = primal2.sqrt();

        // Dual residual mu * C^T Lambda^2 (z_new - z_old).
        let dual = if let Some((tp, up, vp, sp)) = &z_prev {
            let dv: Vec<f64> = state.v.iter().zip(vp).map(|(&a, &b)| a - b).collect();
            let dtv = op.apply_adjoint(&dv)?;
            let mut acc = 0.0;
            for k in 0..n {
                let c_part = (state.t[k] - tp[k]) + nu * dtv[k] + (state.s[k] - sp[k]);
                let p_part = lu2 * (state.u[k] - up[k]);
                acc += c_part * c_part + p_part * p_part;
            }
            mu * acc.sqrt()
        } else {
            f64::INFINITY
        };
        z_prev = Some((state.t.clone(), state.u.clone(), state.v.clone(), state.s.clone()));

        // Report row.
        let (ac_sino, ap_sino) = (
            a.forward(&state.c).expect("size fixed"),
            a.forward(&state.p).expect("size fixed"),
        );
        let data_val = ray_data.value(&ac_sino, &ap_sino);
        let tv_val = tv_penalty(&state.c, &op, config.lambda_tv)?;
        let nlm_val = match &weights {
            Some(w) if config.lambda_nlm > 0.0 => {
                nlm_penalty_and_gradient(&state.p, w, config.lambda_nlm)?.0
            }
            _ => 0.0,
        };
        report.iterations.push(IterationStat {
            iter,
            objective: data_val + tv_val + nlm_val,
            data_fidelity: data_val,
            tv: tv_val,
            nlm: nlm_val,
            primal_residual: primal,
            dual_residual: dual,
            elapsed_s: timer() - t0,
        });

        nlm_ref = state.c.clone();

        // Stopping: scaled absolute + relative criterion on both residuals.
        let dim_z = (5 * n) as f64;
        let dim_th = (2 * n) as f64;
        let eps_pri =
            config.eps_abs * dim_z.sqrt() + config.eps_rel * norm_cz2.max(norm_z2).sqrt();
        // ||C^T Lambda^2 eta|| scales the dual tolerance.
        let dtev = op.apply_adjoint(&state.eta_v)?;
        let mut y2 = 0.0;
        for k in 0..n {
            let c_part = state.eta_t[k] + nu * dtev[k] + state.eta_s[k];
            let p_part = lu2 * state.eta_u[k];
            y2 += c_part * c_part + p_part * p_part;
        }
        let eps_dual = config.eps_abs * dim_th.sqrt() + config.eps_rel * mu * y2.sqrt();
        if primal <= eps_pri && dual <= eps_dual {
            report.converged = true;
            break;
        }
    }
    report.warnings = state.warnings;
    let pair = ImagePair { grid: grid.clone(), c: state.c, p: state.p };
    Ok((pair, report))
}

/// Result of the scalar demonstration problem
/// `min 1/2 (x - 3)^2  subject to  x = z, z >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    pub x: f64,
    pub z: f64,
    pub eta: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// ADMM on the toy problem with penalty weight `w` (mu folded with any
/// Lambda scaling); runs until both residuals fall below `tol` or
/// `max_iters` is reached.
pub fn toy_admm(w: f64, max_iters: usize, tol: f64) -> ToyResult {
    let (mut x, mut z, mut eta) = (0.0f64, 0.0f64, 0.0f64);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    for i in 1..=max_iters {
        iterations = i;
        // x-update: min 1/2 (x-3)^2 + w/2 (z - x - eta)^2.
        x = (3.0 + w * (z - eta)) / (1.0 + w);
        let z_old = z;
        z = (x + eta).max(0.0);
        eta -= z - x;
        primal = (z - x).abs();
        dual = w * (z - z_old).abs();
        if primal < tol && dual < tol {
            break;
        }
    }
    ToyResult { x, z, eta, iterations, primal_residual: primal, dual_residual: dual }
}

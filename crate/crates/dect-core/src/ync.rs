//! Legacy per-ray decomposition baseline: each dual-energy log measurement
//! pair is decomposed independently into Compton and photoelectric line
//! integrals, negative coefficients are zeroed (with a 1-D re-solve),
//! flagged rays are inpainted, the photoelectric sinogram is denoised, and
//! both sinograms go through FBP.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::fbp::{fbp, Filter};
use crate::geometry::{ImageGrid, ScanGeometry};
use crate::physics::{DualSinogram, ImagePair, Spectrum, SpectrumEval};

#[derive(Debug, Error, PartialEq)]
pub enum YncError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inpainting requires at least one unmasked entry")]
    AllMasked,
}

/// Per-ray decomposition output for a full scan.
#[derive(Debug, Clone)]
pub struct DecomposedSinogram {
    /// Compton line integrals, one per ray.
    pub a_c: Vec<f64>,
    /// Photoelectric line integrals, one per ray.
    pub a_p: Vec<f64>,
    /// Rays where a coefficient was zeroed, the solver failed, or the
    /// input was masked.
    pub mask: Vec<bool>,
}

const MAX_ITERS: usize = 50;
const GRAD_TOL: f64 = 1e-10;

/// Solve `min_(a_c, a_p) sum_e (m_e - mhat_e(a_c, a_p))^2` for one ray by
/// damped Gauss-Newton, then enforce nonnegativity by zeroing a negative
/// coefficient and re-solving the other in 1-D.
///
/// Returns `(a_c, a_p, flagged)`; `flagged` is set when a coefficient was
/// zeroed or the iteration failed to converge.
pub fn decompose_ray(
    m_low: f64,
    m_high: f64,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
) -> (f64, f64, bool) {
    decompose_ray_eval(m_low, m_high, &SpectrumEval::new(spec_low), &SpectrumEval::new(spec_high))
}

pub(crate) fn decompose_ray_eval(
    m_low: f64,
    m_high: f64,
    eval_low: &SpectrumEval,
    eval_high: &SpectrumEval,
) -> (f64, f64, bool) {
    if m_low == 0.0 && m_high == 0.0 {
        return (0.0, 0.0, false);
    }
    // Initialize from the zero-attenuation linearization
    // mhat_e ~= <f_KN>_e a_c + <f_p>_e a_p (effective-energy approximation).
    let (_, kl, pl) = eval_low.log_mean_and_slopes(0.0, 0.0);
    let (_, kh, ph) = eval_high.log_mean_and_slopes(0.0, 0.0);
    let det = kl * ph - pl * kh;
    let (mut ac, mut ap) = if det.abs() > 1e-300 {
        ((m_low * ph - m_high * pl) / det, (kl * m_high - kh * m_low) / det)
    } else {
        (0.0, 0.0)
    };
    if !ac.is_finite() || !ap.is_finite() {
        ac = 0.0;
        ap = 0.0;
    }

    let converged = gauss_newton_2d(&mut ac, &mut ap, m_low, m_high, eval_low, eval_high);
    let mut flagged = !converged;
    if ac < 0.0 || ap < 0.0 {
        flagged = true;
        if ac < 0.0 && ap < 0.0 {
            ac = 0.0;
            ap = 0.0;
        } else if ac < 0.0 {
            ac = 0.0;
            ap = solve_1d(ap.max(0.0), m_low, m_high, eval_low, eval_high, false);
        } else {
            ap = 0.0;
            ac = solve_1d(ac.max(0.0), m_low, m_high, eval_low, eval_high, true);
        }
    }
    (ac.max(0.0), ap.max(0.0), flagged)
}

fn objective(
    ac: f64,
    ap: f64,
    m_low: f64,
    m_high: f64,
    eval_low: &SpectrumEval,
    eval_high: &SpectrumEval,
) -> f64 {
    let (ml, _, _) = eval_low.log_mean_and_slopes(ac, ap);
    let (mh, _, _) = eval_high.log_mean_and_slopes(ac, ap);
    let (rl, rh) = (m_low - ml, m_high - mh);
    rl * rl + rh * rh
}

fn gauss_newton_2d(
    ac: &mut f64,
    ap: &mut f64,
    m_low: f64,
    m_high: f64,
    eval_low: &SpectrumEval,
    eval_high: &SpectrumEval,
) -> bool {
    let mut damping = 1e-6;
    for _ in 0..MAX_ITERS {
        let (ml, gcl, gpl) = eval_low.log_mean_and_slopes(*ac, *ap);
        let (mh, gch, gph) = eval_high.log_mean_and_slopes(*ac, *ap);
        let (rl, rh) = (m_low - ml, m_high - mh);
        // grad F = -2 J^T r with J rows (gc, gp) per energy.
        let g0 = -2.0 * (rl * gcl + rh * gch);
        let g1 = -2.0 * (rl * gpl + rh * gph);
        // Scale-aware stopping: the two coefficients differ by ~1e4 in
        // magnitude, so compare gradient components against their Hessian
        // scales.
        let h00 = gcl * gcl + gch * gch;
        let h11 = gpl * gpl + gph * gph;
        if g0.abs() < GRAD_TOL * (1.0 + h00) && g1.abs() < GRAD_TOL * (1.0 + h11) {
            return true;
        }
        let h01 = gcl * gpl + gch * gph;
        let f0 = rl * rl + rh * rh;
        // Levenberg damping, multiplicative on the diagonal.
        let mut accepted = false;
        for _ in 0..30 {
            let a00 = h00 * (1.0 + damping);
            let a11 = h11 * (1.0 + damping);
            let det = a00 * a11 - h01 * h01;
            if det.abs() < 1e-300 {
                break;
            }
            // Step solves (J^T J + damped diag) d = J^T r.
            let b0 = rl * gcl + rh * gch;
            let b1 = rl * gpl + rh * gph;
            let dc = (b0 * a11 - b1 * h01) / det;
            let dp = (a00 * b1 - h01 * b0) / det;
            let (nc, np) = (*ac + dc, *ap + dp);
            let f1 = objective(nc, np, m_low, m_high, eval_low, eval_high);
            if f1.is_finite() && f1 <= f0 {
                *ac = nc;
                *ap = np;
                damping = (damping * 0.1).max(1e-12);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            return false;
        }
    }
    // Ran out of iterations; accept only if the gradient is already tiny.
    let (ml, gcl, gpl) = eval_low.log_mean_and_slopes(*ac, *ap);
    let (mh, gch, gph) = eval_high.log_mean_and_slopes(*ac, *ap);
    let (rl, rh) = (m_low - ml, m_high - mh);
    let g0 = -2.0 * (rl * gcl + rh * gch);
    let g1 = -2.0 * (rl * gpl + rh * gph);
    g0.abs() < GRAD_TOL * (1.0 + gcl * gcl + gch * gch)
        && g1.abs() < GRAD_TOL * (1.0 + gpl * gpl + gph * gph)
}

/// 1-D damped Newton on the free coefficient with the other fixed at zero.
fn solve_1d(
    init: f64,
    m_low: f64,
    m_high: f64,
    eval_low: &SpectrumEval,
    eval_high: &SpectrumEval,
    compton: bool,
) -> f64 {
    let mut x = init;
    let eval_at = |x: f64| {
        let (ac, ap) = if compton { (x, 0.0) } else { (0.0, x) };
        let (ml, gcl, gpl) = eval_low.log_mean_and_slopes(ac, ap);
        let (mh, gch, gph) = eval_high.log_mean_and_slopes(ac, ap);
        let (rl, rh) = (m_low - ml, m_high - mh);
        let (sl, sh) = if compton { (gcl, gch) } else { (gpl, gph) };
        // (objective, J^T r, J^T J) restricted to the free coordinate.
        (rl * rl + rh * rh, rl * sl + rh * sh, sl * sl + sh * sh)
    };
    for _ in 0..MAX_ITERS {
        let (f0, b, h) = eval_at(x);
        if b.abs() < GRAD_TOL * (1.0 + h) || h < 1e-300 {
            break;
        }
        let mut step = b / h;
        let mut moved = false;
        for _ in 0..30 {
            let nx = (x + step).max(0.0);
            let (f1, _, _) = eval_at(nx);
            if f1.is_finite() && f1 <= f0 {
                x = nx;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

/// Replace masked entries with the solution of the discrete Laplace
/// equation on the `n_angles x n_detectors` lattice, valid entries acting
/// as Dirichlet data.  Solved by conjugate gradients on the masked
/// unknowns (5-point stencil, lattice-boundary neighbors simply dropped).
pub fn inpaint_sinogram(
    values: &[f64],
    mask: &[bool],
    n_angles: usize,
    n_detectors: usize,
) -> Result<Vec<f64>, YncError> {
    let n = n_angles * n_detectors;
    if values.len() != n {
        return Err(YncError::DimensionMismatch { expected: n, got: values.len() });
    }
    if mask.len() != n {
        return Err(YncError::DimensionMismatch { expected: n, got: mask.len() });
    }
    if mask.iter().all(|&m| m) {
        return Err(YncError::AllMasked);
    }
    let unknowns: Vec<usize> = (0..n).filter(|&k| mask[k]).collect();
    if unknowns.is_empty() {
        return Ok(values.to_vec());
    }
    let mut slot = vec![usize::MAX; n];
    for (j, &k) in unknowns.iter().enumerate() {
        slot[k] = j;
    }
    let neighbors = |k: usize| {
        let (r, c) = (k / n_detectors, k % n_detectors);
        let mut out = [usize::MAX; 4];
        let mut cnt = 0;
        if r > 0 {
            out[cnt] = k - n_detectors;
            cnt += 1;
        }
        if r + 1 < n_angles {
            out[cnt] = k + n_detectors;
            cnt += 1;
        }
        if c > 0 {
            out[cnt] = k - 1;
            cnt += 1;
        }
        if c + 1 < n_detectors {
            out[cnt] = k + 1;
            cnt += 1;
        }
        (out, cnt)
    };
    // A x = b with A = degree - adjacency over unknowns (SPD), b holding
    // the Dirichlet contributions.
    let m = unknowns.len();
    let mut b = vec![0.0; m];
    for (j, &k) in unknowns.iter().enumerate() {
        let (nb, cnt) = neighbors(k);
        for &nk in &nb[..cnt] {
            if !mask[nk] {
                b[j] += values[nk];
            }
        }
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (j, &k) in unknowns.iter().enumerate() {
            let (nb, cnt) = neighbors(k);
            let mut acc = cnt as f64 * x[j];
            for &nk in &nb[..cnt] {
                if mask[nk] {
                    acc -= x[slot[nk]];
                }
            }
            out[j] = acc;
        }
        out
    };
    // CG from zero start.
    let mut x = vec![0.0; m];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let b_norm2: f64 = rs.max(1e-300);
    for _ in 0..(4 * m + 16) {
        if rs <= 1e-24 * b_norm2 {
            break;
        }
        let ap_vec = apply(&p);
        let p_ap: f64 = p.iter().zip(&ap_vec).map(|(&a, &b)| a * b).sum();
        if p_ap <= 0.0 {
            break;
        }
        let alpha = rs / p_ap;
        for j in 0..m {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap_vec[j];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        for j in 0..m {
            p[j] = r[j] + beta * p[j];
        }
        rs = rs_new;
    }
    let mut out = values.to_vec();
    for (j, &k) in unknowns.iter().enumerate() {
        out[k] = x[j];
    }
    Ok(out)
}

/// Photoelectric-sinogram cleanup: 3x3 median (in-bounds window) followed
/// by Gaussian smoothing along the detector axis (sigma in detector bins,
/// kernel truncated at 3 sigma and renormalized over in-bounds taps).
pub fn denoise_pe_sinogram(
    a_p: &[f64],
    n_angles: usize,
    n_detectors: usize,
    sigma_bins: f64,
) -> Result<Vec<f64>, YncError> {
    let n = n_angles * n_detectors;
    if a_p.len() != n {
        return Err(YncError::DimensionMismatch { expected: n, got: a_p.len() });
    }
    let mut median = vec![0.0; n];
    let mut window = [0.0f64; 9];
    for r in 0..n_angles {
        for c in 0..n_detectors {
            let mut cnt = 0;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr >= 0 && cc >= 0 && rr < n_angles as isize && cc < n_detectors as isize {
                        window[cnt] = a_p[rr as usize * n_detectors + cc as usize];
                        cnt += 1;
                    }
                }
            }
            let w = &mut window[..cnt];
            w.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            median[r * n_detectors + c] = if cnt % 2 == 1 {
                w[cnt / 2]
            } else {
                0.5 * (w[cnt / 2 - 1] + w[cnt / 2])
            };
        }
    }
    if sigma_bins <= 0.0 {
        return Ok(median);
    }
    let radius = (3.0 * sigma_bins).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64) * (k as f64) / (2.0 * sigma_bins * sigma_bins)).exp())
        .collect();
    let mut out = vec![0.0; n];
    for r in 0..n_angles {
        for c in 0..n_detectors {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in -radius..=radius {
                let cc = c as isize + k;
                if cc >= 0 && cc < n_detectors as isize {
                    let t = taps[(k + radius) as usize];
                    acc += t * median[r * n_detectors + cc as usize];
                    norm += t;
                }
            }
            out[r * n_detectors + c] = acc / norm;
        }
    }
    Ok(out)
}

/// Decompose every ray of a dual sinogram.  Rays with zero fidelity weight
/// in either energy are masked without solving.
pub fn decompose_sinogram(
    sino: &DualSinogram,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
) -> DecomposedSinogram {
    let eval_low = SpectrumEval::new(spec_low);
    let eval_high = SpectrumEval::new(spec_high);
    let n = sino.len();
    let mut a_c = vec![0.0; n];
    let mut a_p = vec![0.0; n];
    let mut mask = vec![false; n];
    for i in 0..n {
        if sino.weights_low[i] == 0.0 || sino.weights_high[i] == 0.0 {
            mask[i] = true;
            continue;
        }
        let (ac, ap, flagged) =
            decompose_ray_eval(sino.m_low[i], sino.m_high[i], &eval_low, &eval_high);
        a_c[i] = ac;
        a_p[i] = ap;
        mask[i] = flagged;
    }
    DecomposedSinogram { a_c, a_p, mask }
}

/// Full YNC pipeline: per-ray decomposition, inpainting of flagged rays in
/// both sinograms, photoelectric denoise, FBP of each sinogram.
pub fn ync_reconstruct(
    sino: &DualSinogram,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
    grid: &ImageGrid,
    geom: &ScanGeometry,
    filter: &Filter,
) -> Result<ImagePair, YncError> {
    let n_angles = geom.n_angles();
    let n_det = geom.n_detectors;
    if sino.len() != n_angles * n_det {
        return Err(YncError::DimensionMismatch { expected: n_angles * n_det, got: sino.len() });
    }
    let dec = decompose_sinogram(sino, spec_low, spec_high);
    let (a_c, a_p) = if dec.mask.iter().any(|&m| m) {
        (
            inpaint_sinogram(&dec.a_c, &dec.mask, n_angles, n_det)?,
            inpaint_sinogram(&dec.a_p, &dec.mask, n_angles, n_det)?,
        )
    } else {
        (dec.a_c, dec.a_p)
    };
    let a_p = denoise_pe_sinogram(&a_p, n_angles, n_det, 1.0)?;
    let c = fbp(&a_c, geom, grid, filter);
    let p = fbp(&a_p, geom, grid, filter);
    Ok(ImagePair { grid: grid.clone(), c, p })
}

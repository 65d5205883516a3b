//! TV machinery (difference operator, soft threshold) and non-local means
//! machinery (patch-similarity weights, integral-image smoother, penalty
//! value and gradient).
//!
//! The difference operator stacks forward differences in x and y with
//! Neumann boundaries (boundary rows all zero), so `D * constant = 0`
//! exactly.  NLM patches are clipped jointly at the image border: for a
//! pixel pair `(k, l)` the patch offsets are those keeping both `k+d` and
//! `l+d` inside the image, and the exponent is normalized by the actual
//! overlap count.  This keeps the kernel exactly symmetric everywhere.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegularizerError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid NLM parameters: {0}")]
    InvalidParams(&'static str),
}

/// Stacked first-difference operator `D = [Dx; Dy]`, `2N x N`, applied
/// matrix-free on an `ny x nx` image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceOperator {
    pub nx: usize,
    pub ny: usize,
}

impl DifferenceOperator {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    /// `D x`: forward differences, x-block then y-block.
    pub fn apply(&self, img: &[f64]) -> Result<Vec<f64>, RegularizerError> {
        let n = self.n_pixels();
        if img.len() != n {
            return Err(RegularizerError::DimensionMismatch { expected: n, got: img.len() });
        }
        let mut out = vec![0.0; 2 * n];
        for r in 0..self.ny {
            for c in 0..self.nx {
                let k = r * self.nx + c;
                if c + 1 < self.nx {
                    out[k] = img[k + 1] - img[k];
                }
                if r + 1 < self.ny {
                    out[n + k] = img[k + self.nx] - img[k];
                }
            }
        }
        Ok(out)
    }

    /// `D^T g`: exact transpose of [`Self::apply`].
    pub fn apply_adjoint(&self, g: &[f64]) -> Result<Vec<f64>, RegularizerError> {
        let n = self.n_pixels();
        if g.len() != 2 * n {
            return Err(RegularizerError::DimensionMismatch { expected: 2 * n, got: g.len() });
        }
        let mut out = vec![0.0; n];
        for r in 0..self.ny {
            for c in 0..self.nx {
                let k = r * self.nx + c;
                if c + 1 < self.nx {
                    out[k] -= g[k];
                    out[k + 1] += g[k];
                }
                if r + 1 < self.ny {
                    out[k] -= g[n + k];
                    out[k + self.nx] += g[n + k];
                }
            }
        }
        Ok(out)
    }
}

/// Elementwise `sign(x) max(|x| - kappa, 0)`.
pub fn soft_threshold_scalar(x: f64, kappa: f64) -> f64 {
    debug_assert!(kappa >= 0.0);
    if x > kappa {
        x - kappa
    } else if x < -kappa {
        x + kappa
    } else {
        0.0
    }
}

pub fn soft_threshold(x: &[f64], kappa: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold_scalar(v, kappa)).collect()
}

/// Anisotropic TV penalty `lambda * sum |D c|`.
pub fn tv_penalty(
    c_img: &[f64],
    op: &DifferenceOperator,
    lambda_tv: f64,
) -> Result<f64, RegularizerError> {
    let g = op.apply(c_img)?;
    Ok(lambda_tv * g.iter().map(|v| v.abs()).sum::<f64>())
}

/// NLM kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmParams {
    /// Bandwidth, in units of reference-image intensity.
    pub beta: f64,
    /// Patch half-width `W`; patches are `(2W+1)^2`.
    pub patch_half_width: usize,
    /// Search half-width `M >= W`.
    pub search_half_width: usize,
}

impl NlmParams {
    pub fn new(
        beta: f64,
        patch_half_width: usize,
        search_half_width: usize,
    ) -> Result<Self, RegularizerError> {
        if !(beta > 0.0) {
            return Err(RegularizerError::InvalidParams("beta must be > 0"));
        }
        if search_half_width < patch_half_width {
            return Err(RegularizerError::InvalidParams("search half-width must be >= patch"));
        }
        Ok(Self { beta, patch_half_width, search_half_width })
    }
}

impl Default for NlmParams {
    /// 7x7 patches, 19x19 search neighborhoods, bandwidth 0.5e-4 in
    /// Compton units.
    fn default() -> Self {
        Self { beta: 0.5e-4, patch_half_width: 3, search_half_width: 9 }
    }
}

/// Patch-similarity weight between pixels `k` and `l` of a reference
/// image, with joint border clipping.
pub fn nlm_weight(
    reference: &[f64],
    nx: usize,
    ny: usize,
    k: (usize, usize),
    l: (usize, usize),
    params: &NlmParams,
) -> f64 {
    let w = params.patch_half_width as isize;
    let mut ss = 0.0;
    let mut count = 0usize;
    for dr in -w..=w {
        for dc in -w..=w {
            let (kr, kc) = (k.0 as isize + dr, k.1 as isize + dc);
            let (lr, lc) = (l.0 as isize + dr, l.1 as isize + dc);
            let inside = |r: isize, c: isize| r >= 0 && c >= 0 && r < ny as isize && c < nx as isize;
            if inside(kr, kc) && inside(lr, lc) {
                let d = reference[kr as usize * nx + kc as usize]
                    - reference[lr as usize * nx + lc as usize];
                ss += d * d;
                count += 1;
            }
        }
    }
    if count == 0 {
        return 0.0;
    }
    (-ss / (2.0 * count as f64 * params.beta * params.beta)).exp()
}

/// Precomputed NLM kernel for a frozen reference image: one weight plane
/// per search offset plus per-pixel normalizers.
#[derive(Debug, Clone)]
pub struct NlmWeights {
    nx: usize,
    ny: usize,
    offsets: Vec<(isize, isize)>,
    /// `planes[o][k] = K(k, k + offsets[o])`, zero when the neighbor falls
    /// outside the image.
    planes: Vec<Vec<f64>>,
    /// `z[k] = sum_l K(k, l)` over the search window (includes the unit
    /// self weight).
    z: Vec<f64>,
}

impl NlmWeights {
    /// Build the kernel with the integral-image acceleration: for each
    /// search offset the squared-difference image and its 2-D prefix sums
    /// give every patch distance in O(1).
    pub fn compute(
        reference: &[f64],
        nx: usize,
        ny: usize,
        params: &NlmParams,
    ) -> Result<Self, RegularizerError> {
        let n = nx * ny;
        if reference.len() != n {
            return Err(RegularizerError::DimensionMismatch { expected: n, got: reference.len() });
        }
        let m = params.search_half_width as isize;
        let w = params.patch_half_width as isize;
        let inv_two_beta2 = 1.0 / (2.0 * params.beta * params.beta);

        let mut offsets = Vec::new();
        for dr in -m..=m {
            for dc in -m..=m {
                offsets.push((dr, dc));
            }
        }
        let mut planes = vec![vec![0.0; n]; offsets.len()];
        let mut z = vec![0.0; n];
        // Prefix-sum workspace, (ny+1) x (nx+1).
        let mut prefix = vec![0.0; (ny + 1) * (nx + 1)];
        let pw = nx + 1;

        for (o, &(dr, dc)) in offsets.iter().enumerate() {
            // Valid region where both k and k + tau lie inside the image.
            let r_lo = (-dr).max(0);
            let r_hi = (ny as isize - 1).min(ny as isize - 1 - dr);
            let c_lo = (-dc).max(0);
            let c_hi = (nx as isize - 1).min(nx as isize - 1 - dc);
            if r_lo > r_hi || c_lo > c_hi {
                continue;
            }

            // Squared-difference prefix sums over the valid rectangle.
            for r in 0..=ny {
                for c in 0..=nx {
                    let mut v = 0.0;
                    if r > 0 && c > 0 {
                        let (rr, cc) = (r as isize - 1, c as isize - 1);
                        if rr >= r_lo && rr <= r_hi && cc >= c_lo && cc <= c_hi {
                            let d = reference[rr as usize * nx + cc as usize]
                                - reference[(rr + dr) as usize * nx + (cc + dc) as usize];
                            v = d * d;
                        }
                        v += prefix[(r - 1) * pw + c] + prefix[r * pw + c - 1]
                            - prefix[(r - 1) * pw + c - 1];
                    }
                    prefix[r * pw + c] = v;
                }
            }

            let plane = &mut planes[o];
            for r in r_lo..=r_hi {
                for c in c_lo..=c_hi {
                    // Patch window around k, intersected with the valid
                    // rectangle; the intersection area is the overlap count.
                    let pr_lo = (r - w).max(r_lo);
                    let pr_hi = (r + w).min(r_hi);
                    let pc_lo = (c - w).max(c_lo);
                    let pc_hi = (c + w).min(c_hi);
                    let count = ((pr_hi - pr_lo + 1) * (pc_hi - pc_lo + 1)) as f64;
                    let (a, b, cc, d) = (
                        prefix[pr_lo as usize * pw + pc_lo as usize],
                        prefix[pr_lo as usize * pw + pc_hi as usize + 1],
                        prefix[(pr_hi as usize + 1) * pw + pc_lo as usize],
                        prefix[(pr_hi as usize + 1) * pw + pc_hi as usize + 1],
                    );
                    let ss = d - b - cc + a;
                    let k = r as usize * nx + c as usize;
                    let weight = (-ss / count * inv_two_beta2).exp();
                    plane[k] = weight;
                    z[k] += weight;
                }
            }
        }
        Ok(Self { nx, ny, offsets, planes, z })
    }

    pub fn normalizers(&self) -> &[f64] {
        &self.z
    }

    /// Weighted average over each pixel's search window:
    /// `out_k = sum_l K(k,l) img_l / Z_k`.
    pub fn smooth(&self, img: &[f64]) -> Result<Vec<f64>, RegularizerError> {
        self.apply(img, false)
    }

    /// Transpose smoothing `out_i = sum_k K(k,i) img_k / Z_k` (the
    /// neighbor's normalizer); this is the exact adjoint of [`Self::smooth`]
    /// because the kernel is symmetric.
    pub fn smooth_transpose(&self, img: &[f64]) -> Result<Vec<f64>, RegularizerError> {
        self.apply(img, true)
    }

    fn apply(&self, img: &[f64], transpose: bool) -> Result<Vec<f64>, RegularizerError> {
        let n = self.nx * self.ny;
        if img.len() != n {
            return Err(RegularizerError::DimensionMismatch { expected: n, got: img.len() });
        }
        let mut out = vec![0.0; n];
        for (o, &(dr, dc)) in self.offsets.iter().enumerate() {
            let plane = &self.planes[o];
            let r_lo = (-dr).max(0);
            let r_hi = (self.ny as isize - 1).min(self.ny as isize - 1 - dr);
            let c_lo = (-dc).max(0);
            let c_hi = (self.nx as isize - 1).min(self.nx as isize - 1 - dc);
            if r_lo > r_hi || c_lo > c_hi {
                continue;
            }
            for r in r_lo..=r_hi {
                for c in c_lo..=c_hi {
                    let k = r as usize * self.nx + c as usize;
                    let l = (r + dr) as usize * self.nx + (c + dc) as usize;
                    let z = if transpose { self.z[l] } else { self.z[k] };
                    out[k] += plane[k] * img[l] / z;
                }
            }
        }
        Ok(out)
    }
}

/// Smooth `img` with weights computed from `reference`.
pub fn nlm_smooth(
    img: &[f64],
    reference: &[f64],
    nx: usize,
    ny: usize,
    params: &NlmParams,
) -> Result<Vec<f64>, RegularizerError> {
    NlmWeights::compute(reference, nx, ny, params)?.smooth(img)
}

/// Penalty `lambda * sum_k delta_k^2` with `delta = p - NLM(p)`, and its
/// gradient `2 lambda (delta - NLM^T(delta))`, both using the same frozen
/// reference weights.
pub fn nlm_penalty_and_gradient(
    p_img: &[f64],
    weights: &NlmWeights,
    lambda_nlm: f64,
) -> Result<(f64, Vec<f64>), RegularizerError> {
    let smoothed = weights.smooth(p_img)?;
    let delta: Vec<f64> = p_img.iter().zip(&smoothed).map(|(&a, &b)| a - b).collect();
    let value = lambda_nlm * delta.iter().map(|d| d * d).sum::<f64>();
    let back = weights.smooth_transpose(&delta)?;
    let grad = delta.iter().zip(&back).map(|(&d, &b)| 2.0 * lambda_nlm * (d - b)).collect();
    Ok((value, grad))
}

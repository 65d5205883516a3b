//! Image-quality metrics (PSNR, mean SSIM) and per-object parameter-cloud
//! statistics for homogeneous regions.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::physics::ImagePair;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("empty mask for object {0}")]
    EmptyMask(usize),
}

/// Peak dynamic ranges used throughout: 0.7 cm^-1 for Compton images and
/// 1.2e5 keV cm^-1 for photoelectric images.
pub const PSNR_L_COMPTON: f64 = 0.7;
pub const PSNR_L_PHOTOELECTRIC: f64 = 1.2e5;

/// `10 log10(L^2 / MSE)` in dB; identical images report `+inf`.
pub fn psnr(img: &[f64], reference: &[f64], l: f64) -> Result<f64, MetricsError> {
    if img.len() != reference.len() {
        return Err(MetricsError::DimensionMismatch {
            expected: reference.len(),
            got: img.len(),
        });
    }
    if !(l > 0.0) {
        return Err(MetricsError::InvalidArgument("L must be > 0"));
    }
    if img.is_empty() {
        return Err(MetricsError::InvalidArgument("empty image"));
    }
    let mse = img
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / img.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (l * l / mse).log10())
}

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WINDOW: usize = 8;

/// Mean SSIM over a non-overlapping 8x8 window grid (edge remainders use
/// the partial window), with stabilizers `(k1 L)^2`, `(k2 L)^2`.
pub fn ssim(
    img: &[f64],
    reference: &[f64],
    nx: usize,
    ny: usize,
    l: f64,
) -> Result<f64, MetricsError> {
    let n = nx * ny;
    if img.len() != n {
        return Err(MetricsError::DimensionMismatch { expected: n, got: img.len() });
    }
    if reference.len() != n {
        return Err(MetricsError::DimensionMismatch { expected: n, got: reference.len() });
    }
    if !(l > 0.0) {
        return Err(MetricsError::InvalidArgument("L must be > 0"));
    }
    if n == 0 {
        return Err(MetricsError::InvalidArgument("empty image"));
    }
    let c1 = (SSIM_K1 * l) * (SSIM_K1 * l);
    let c2 = (SSIM_K2 * l) * (SSIM_K2 * l);
    let mut total = 0.0;
    let mut windows = 0usize;
    let mut r0 = 0;
    while r0 < ny {
        let r1 = (r0 + SSIM_WINDOW).min(ny);
        let mut c0 = 0;
        while c0 < nx {
            let c1_col = (c0 + SSIM_WINDOW).min(nx);
            let count = ((r1 - r0) * (c1_col - c0)) as f64;
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r1 {
                for c in c0..c1_col {
                    let (a, b) = (img[r * nx + c], reference[r * nx + c]);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let (mx, my) = (sx / count, sy / count);
            let vx = sxx / count - mx * mx;
            let vy = syy / count - my * my;
            let cov = sxy / count - mx * my;
            total += (2.0 * mx * my + c1) * (2.0 * cov + c2)
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1;
            c0 = c1_col;
        }
        r0 = r1;
    }
    Ok(total / windows as f64)
}

/// Per-object mean and population standard deviation of both coefficient
/// channels over a pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudStat {
    pub object: usize,
    pub material: String,
    pub mean_c: f64,
    pub std_c: f64,
    pub mean_p: f64,
    pub std_p: f64,
    pub count: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt(), n)
}

/// Cloud statistics for a list of labeled masks over one image pair.
pub fn material_clouds(
    pair: &ImagePair,
    masks: &[(&str, &[bool])],
) -> Result<Vec<CloudStat>, MetricsError> {
    let n = pair.grid.n_pixels();
    let mut out = Vec::with_capacity(masks.len());
    for (i, &(label, mask)) in masks.iter().enumerate() {
        if mask.len() != n {
            return Err(MetricsError::DimensionMismatch { expected: n, got: mask.len() });
        }
        let picked = |img: &[f64]| {
            let img: Vec<f64> = img
                .iter()
                .zip(mask)
                .filter_map(|(&v, &m)| if m { Some(v) } else { None })
                .collect();
            img
        };
        let c_vals = picked(&pair.c);
        if c_vals.is_empty() {
            return Err(MetricsError::EmptyMask(i));
        }
        let p_vals = picked(&pair.p);
        let (mean_c, std_c, count) = mean_std(c_vals.iter().copied());
        let (mean_p, std_p, _) = mean_std(p_vals.iter().copied());
        out.push(CloudStat {
            object: i,
            material: String::from(label),
            mean_c,
            std_c,
            mean_p,
            std_p,
            count,
        });
    }
    Ok(out)
}

/// Tab-delimited cloud table with a header row.
pub fn clouds_to_delimited(stats: &[CloudStat]) -> String {
    let mut s = String::from("object\tmaterial\tmean_c\tstd_c\tmean_p\tstd_p\tn\n");
    for st in stats {
        s += &format!(
            "{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{}\n",
            st.object, st.material, st.mean_c, st.std_c, st.mean_p, st.std_p, st.count
        );
    }
    s
}

//! 8-bit grayscale raster output.
//!
//! Images use fixed display windows (Compton 0-0.7 cm^-1, photoelectric
//! 0-8e4 keV cm^-1); parameter clouds are drawn as mean +/- 2 sigma
//! ellipses over the same coefficient ranges.

use std::path::Path;

use image::{GrayImage, Luma};

use dect_core::metrics::CloudStat;

use crate::error::AppError;

/// Display window for Compton images, cm^-1.
pub const WINDOW_COMPTON: (f64, f64) = (0.0, 0.7);
/// Display window for photoelectric images, keV cm^-1.
pub const WINDOW_PHOTOELECTRIC: (f64, f64) = (0.0, 8e4);

/// Map one channel to 8-bit gray over `[lo, hi]`.  Row 0 of the data is
/// the bottom of the grid, so rows are flipped for raster output.
pub fn render_channel(data: &[f64], nx: usize, ny: usize, lo: f64, hi: f64) -> GrayImage {
    assert_eq!(data.len(), nx * ny, "channel size mismatch");
    assert!(hi > lo, "display window must be non-empty");
    let mut img = GrayImage::new(nx as u32, ny as u32);
    for row in 0..ny {
        for col in 0..nx {
            let v = data[row * nx + col];
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            let g = (t * 255.0).round() as u8;
            img.put_pixel(col as u32, (ny - 1 - row) as u32, Luma([g]));
        }
    }
    img
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<(), AppError> {
    // Atomic like the array writer: encode to a temp file, then rename.
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| AppError::io_at(path, e))?;
    img.save_with_format(tmp.path(), image::ImageFormat::Png)
        .map_err(|e| AppError::io_at(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io_at(path, e.error))?;
    Ok(())
}

/// Scatter-style cloud plot: each object's mean +/- 2 sigma ellipse in
/// (c, p) space, Compton on x over `WINDOW_COMPTON`, photoelectric on y
/// over `WINDOW_PHOTOELECTRIC`, origin at the lower left.
pub fn render_clouds(stats: &[CloudStat], size: u32) -> GrayImage {
    let mut img = GrayImage::from_pixel(size, size, Luma([255]));
    let to_px = |c: f64, p: f64| -> Option<(u32, u32)> {
        let tx = (c - WINDOW_COMPTON.0) / (WINDOW_COMPTON.1 - WINDOW_COMPTON.0);
        let ty = (p - WINDOW_PHOTOELECTRIC.0) / (WINDOW_PHOTOELECTRIC.1 - WINDOW_PHOTOELECTRIC.0);
        if !(0.0..=1.0).contains(&tx) || !(0.0..=1.0).contains(&ty) {
            return None;
        }
        let x = (tx * (size - 1) as f64).round() as u32;
        let y = ((1.0 - ty) * (size - 1) as f64).round() as u32;
        Some((x, y))
    };
    for st in stats {
        // Center mark.
        if let Some((x, y)) = to_px(st.mean_c, st.mean_p) {
            for (dx, dy) in [(0i64, 0i64), (-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (px, py) = (x as i64 + dx, y as i64 + dy);
                if (0..size as i64).contains(&px) && (0..size as i64).contains(&py) {
                    img.put_pixel(px as u32, py as u32, Luma([0]));
                }
            }
        }
        // 2-sigma ellipse outline (axis-aligned; channels treated as
        // uncorrelated).
        let steps = 4 * size as usize;
        for k in 0..steps {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            let c = st.mean_c + 2.0 * st.std_c * phi.cos();
            let p = st.mean_p + 2.0 * st.std_p * phi.sin();
            if let Some((x, y)) = to_px(c, p) {
                img.put_pixel(x, y, Luma([64]));
            }
        }
    }
    img
}

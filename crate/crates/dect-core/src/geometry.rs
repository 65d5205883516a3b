//! Image grids, parallel-beam scan geometry, and the sparse ray-trace
//! system matrix.
//!
//! A ray at angle `theta` with detector coordinate `s` is the line
//! `point(t) = s * u + t * v` with detector axis `u = (-sin t, cos t)` and
//! ray direction `v = (cos t, sin t)`; at `theta = 0` rays run horizontally.
//! Rays enumerate angle-major, detector-minor.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::physics::DualSinogram;

/// Intersection lengths shorter than this (cm) are treated as corner
/// grazes and dropped.
const GRAZE_TOL: f64 = 1e-12;

/// Default cap on total stored system-matrix entries.
pub const DEFAULT_NNZ_BUDGET: usize = 1 << 31;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid scan geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("system matrix would need {needed} entries, budget is {budget}")]
    CapacityExceeded { needed: usize, budget: usize },
    #[error("stride must be >= 1")]
    InvalidStride,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Pixelated reconstruction grid.  Pixel `k` maps to `(row, col)` in
/// row-major order; pixel `(0, 0)` has its lower-left corner at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub nx: usize,
    pub ny: usize,
    /// Pixel edge length, cm.
    pub pixel_size: f64,
    /// World x of the grid's lower-left corner, cm.
    pub origin_x: f64,
    /// World y of the grid's lower-left corner, cm.
    pub origin_y: f64,
}

impl ImageGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        pixel_size: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self, GeometryError> {
        if nx == 0 || ny == 0 {
            return Err(GeometryError::InvalidGrid("pixel counts must be >= 1"));
        }
        if !(pixel_size > 0.0) {
            return Err(GeometryError::InvalidGrid("pixel_size must be > 0"));
        }
        Ok(Self { nx, ny, pixel_size, origin_x, origin_y })
    }

    /// Grid centered on the world origin.
    pub fn centered(nx: usize, ny: usize, pixel_size: f64) -> Result<Self, GeometryError> {
        let ox = -(nx as f64) * pixel_size / 2.0;
        let oy = -(ny as f64) * pixel_size / 2.0;
        Self::new(nx, ny, pixel_size, ox, oy)
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.ny && col < self.nx);
        row * self.nx + col
    }

    /// World coordinates of the center of pixel `(row, col)`.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size,
            self.origin_y + (row as f64 + 0.5) * self.pixel_size,
        )
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.pixel_size
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.pixel_size
    }
}

/// Parallel-beam scan geometry with uniformly or explicitly listed view
/// angles in `[0, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGeometry {
    /// View angles in radians, strictly increasing, in `[0, pi)`.
    pub angles: Vec<f64>,
    pub n_detectors: usize,
    /// Detector pitch, cm.
    pub detector_spacing: f64,
    /// Shift of the detector array center from the rotation center, cm.
    pub detector_offset: f64,
}

impl ScanGeometry {
    pub fn new(
        angles: Vec<f64>,
        n_detectors: usize,
        detector_spacing: f64,
        detector_offset: f64,
    ) -> Result<Self, GeometryError> {
        if angles.is_empty() {
            return Err(GeometryError::InvalidGeometry("need at least one angle"));
        }
        if n_detectors == 0 {
            return Err(GeometryError::InvalidGeometry("need at least one detector"));
        }
        if !(detector_spacing > 0.0) {
            return Err(GeometryError::InvalidGeometry("detector_spacing must be > 0"));
        }
        for (i, &a) in angles.iter().enumerate() {
            if !(0.0..core::f64::consts::PI).contains(&a) {
                return Err(GeometryError::InvalidGeometry("angles must lie in [0, pi)"));
            }
            if i > 0 && a <= angles[i - 1] {
                return Err(GeometryError::InvalidGeometry("angles must be strictly increasing"));
            }
        }
        Ok(Self { angles, n_detectors, detector_spacing, detector_offset })
    }

    /// `n_angles` uniform views over `[0, pi)`.
    pub fn uniform(
        n_angles: usize,
        n_detectors: usize,
        detector_spacing: f64,
        detector_offset: f64,
    ) -> Result<Self, GeometryError> {
        if n_angles == 0 {
            return Err(GeometryError::InvalidGeometry("need at least one angle"));
        }
        let step = core::f64::consts::PI / n_angles as f64;
        let angles = (0..n_angles).map(|i| i as f64 * step).collect();
        Self::new(angles, n_detectors, detector_spacing, detector_offset)
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    /// Total ray count `M`.
    pub fn n_rays(&self) -> usize {
        self.angles.len() * self.n_detectors
    }

    /// Signed detector coordinate of detector `j`, array centered on the
    /// rotation center plus `detector_offset`.
    pub fn detector_position(&self, j: usize) -> f64 {
        (j as f64 - (self.n_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
            + self.detector_offset
    }
}

/// Sparse ray-path operator: row `i` lists `(pixel, intersection length)`
/// for ray `i`, compressed CSR-style.  Immutable after assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    pub n_rays: usize,
    pub n_pixels: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SystemMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    /// Line integral of `x` along ray `i`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c as usize]).sum()
    }

    /// `A x`: line integrals of a pixel image along every ray.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if x.len() != self.n_pixels {
            return Err(GeometryError::DimensionMismatch { expected: self.n_pixels, got: x.len() });
        }
        Ok((0..self.n_rays).map(|i| self.row_dot(i, x)).collect())
    }

    /// `A^T y`, computed by scattering rows; no explicit transpose is stored.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if y.len() != self.n_rays {
            return Err(GeometryError::DimensionMismatch { expected: self.n_rays, got: y.len() });
        }
        let mut out = vec![0.0; self.n_pixels];
        for i in 0..self.n_rays {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c as usize] += v * yi;
            }
        }
        Ok(out)
    }
}

/// Siddon-style incremental traversal of one ray through the grid.
///
/// Entries are ordered along the ray and their lengths sum to the in-grid
/// chord length; pixels grazed exactly at a corner are omitted.  A ray that
/// misses the grid yields an empty list.
pub fn trace_ray(grid: &ImageGrid, angle: f64, detector_pos: f64) -> Vec<(usize, f64)> {
    let (sin_t, cos_t) = (angle.sin(), angle.cos());
    // Ray origin on the detector axis and unit direction.
    let px = -detector_pos * sin_t;
    let py = detector_pos * cos_t;
    let (vx, vy) = (cos_t, sin_t);

    let h = grid.pixel_size;
    let x0 = grid.origin_x;
    let y0 = grid.origin_y;
    let x1 = x0 + grid.width();
    let y1 = y0 + grid.height();

    // Slab intersection of the ray with the grid bounding box.
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for (p, v, lo, hi) in [(px, vx, x0, x1), (py, vy, y0, y1)] {
        if v.abs() < 1e-300 {
            if p < lo || p > hi {
                return Vec::new();
            }
        } else {
            let ta = (lo - p) / v;
            let tb = (hi - p) / v;
            t_min = t_min.max(ta.min(tb));
            t_max = t_max.min(ta.max(tb));
        }
    }
    if !(t_max - t_min > GRAZE_TOL) {
        return Vec::new();
    }

    // Starting cell, probed slightly inside the box to dodge boundary ties.
    let probe = t_min + (t_max - t_min) * 1e-9;
    let clamp = |i: f64, n: usize| -> i64 { (i.floor() as i64).clamp(0, n as i64 - 1) };
    let mut ix = clamp((px + probe * vx - x0) / h, grid.nx);
    let mut iy = clamp((py + probe * vy - y0) / h, grid.ny);

    let step_x: i64 = if vx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if vy > 0.0 { 1 } else { -1 };
    let next_crossing = |i: i64, step: i64, o: f64, p: f64, v: f64| -> f64 {
        if v.abs() < 1e-300 {
            f64::INFINITY
        } else {
            let boundary = o + (i + if step > 0 { 1 } else { 0 }) as f64 * h;
            (boundary - p) / v
        }
    };
    let mut tx = next_crossing(ix, step_x, x0, px, vx);
    let mut ty = next_crossing(iy, step_y, y0, py, vy);
    let dtx = if vx.abs() < 1e-300 { f64::INFINITY } else { h / vx.abs() };
    let dty = if vy.abs() < 1e-300 { f64::INFINITY } else { h / vy.abs() };

    let mut out = Vec::with_capacity(grid.nx + grid.ny);
    let mut t = t_min;
    loop {
        let t_next = tx.min(ty).min(t_max);
        let len = t_next - t;
        if len > GRAZE_TOL {
            out.push(((iy as usize) * grid.nx + ix as usize, len));
        }
        if t_next >= t_max - GRAZE_TOL {
            break;
        }
        // Advance across the crossed boundary; a corner crossing advances both.
        if tx <= ty {
            ix += step_x;
            tx += dtx;
        }
        if ty <= t_next {
            iy += step_y;
            ty += dty;
        }
        if ix < 0 || iy < 0 || ix >= grid.nx as i64 || iy >= grid.ny as i64 {
            break;
        }
        t = t_next;
    }
    out
}

/// Assemble the sparse system matrix for every ray of `geom`, rows in
/// angle-major order, with the default entry budget.
pub fn assemble_system_matrix(
    grid: &ImageGrid,
    geom: &ScanGeometry,
) -> Result<SystemMatrix, GeometryError> {
    assemble_system_matrix_with_budget(grid, geom, DEFAULT_NNZ_BUDGET)
}

pub fn assemble_system_matrix_with_budget(
    grid: &ImageGrid,
    geom: &ScanGeometry,
    budget: usize,
) -> Result<SystemMatrix, GeometryError> {
    let m = geom.n_rays();
    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for &angle in &geom.angles {
        for j in 0..geom.n_detectors {
            let entries = trace_ray(grid, angle, geom.detector_position(j));
            if cols.len() + entries.len() > budget {
                return Err(GeometryError::CapacityExceeded {
                    needed: cols.len() + entries.len(),
                    budget,
                });
            }
            for (k, len) in entries {
                cols.push(k as u32);
                vals.push(len);
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(SystemMatrix { n_rays: m, n_pixels: grid.n_pixels(), row_ptr, cols, vals })
}

/// Keep angle indices `0, stride, 2*stride, ...` of a scan and its
/// sinogram; retained rays are copied bit-identically.
pub fn subsample_angles(
    geom: &ScanGeometry,
    sino: &DualSinogram,
    stride: usize,
) -> Result<(ScanGeometry, DualSinogram), GeometryError> {
    if stride == 0 {
        return Err(GeometryError::InvalidStride);
    }
    let m = geom.n_rays();
    if sino.len() != m {
        return Err(GeometryError::DimensionMismatch { expected: m, got: sino.len() });
    }
    let kept: Vec<usize> = (0..geom.n_angles()).step_by(stride).collect();
    let angles = kept.iter().map(|&i| geom.angles[i]).collect();
    let sub_geom = ScanGeometry::new(
        angles,
        geom.n_detectors,
        geom.detector_spacing,
        geom.detector_offset,
    )?;
    let nd = geom.n_detectors;
    let take = |v: &[f64]| -> Vec<f64> {
        kept.iter().flat_map(|&i| v[i * nd..(i + 1) * nd].iter().copied()).collect()
    };
    let sub = DualSinogram {
        counts_low: take(&sino.counts_low),
        counts_high: take(&sino.counts_high),
        m_low: take(&sino.m_low),
        m_high: take(&sino.m_high),
        weights_low: take(&sino.weights_low),
        weights_high: take(&sino.weights_high),
        y0: sino.y0,
    };
    Ok((sub_geom, sub))
}

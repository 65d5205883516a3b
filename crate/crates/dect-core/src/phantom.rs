//! Material library and the suitcase-phantom builder.
//!
//! Material `(c, p)` pairs for water, aluminum, and plastic were fitted by
//! linear least squares of the two-basis attenuation model to NIST
//! tabulated attenuation curves over 20-140 keV (log-log interpolated to a
//! 1 keV grid); the water fit residual is 0.52% relative RMS and is
//! checked by a test oracle.  Doped water and neoprene are plausible
//! variants of the water fit (salt and chlorine raise the photoelectric
//! term much faster than the Compton term).
//!
//! Phantom shapes are defined in physical cm on a 40 cm field of view and
//! rasterized per grid, so generation is deterministic and
//! resolution-covariant.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::ImageGrid;
use crate::physics::ImagePair;

/// Fitted aluminum `(c, p)`; also used as the filtration material for the
/// synthetic source spectra.
pub(crate) const ALUMINUM_CP: (f64, f64) = (0.3935550377, 70648.99459);
pub(crate) const WATER_CP: (f64, f64) = (0.1677759108, 4945.556221);
pub(crate) const PLASTIC_CP: (f64, f64) = (0.1786608083, 2061.576119);

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("unknown material: {0}")]
    UnknownMaterial(String),
    #[error("grid too small: need at least 64x64, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },
}

/// A material's Compton (cm^-1) and photoelectric (keV cm^-1) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: &'static str,
    pub c: f64,
    pub p: f64,
}

/// Look up the coefficients of a named library material.
pub fn material_coefficients(name: &str) -> Result<Material, PhantomError> {
    let (label, c, p) = match name {
        "air" => ("air", 0.0, 0.0),
        "water" => ("water", WATER_CP.0, WATER_CP.1),
        "doped_water" => ("doped_water", WATER_CP.0 * 1.04, WATER_CP.1 * 2.1),
        "plastic" => ("plastic", PLASTIC_CP.0, PLASTIC_CP.1),
        "aluminum" => ("aluminum", ALUMINUM_CP.0, ALUMINUM_CP.1),
        "neoprene" => ("neoprene", WATER_CP.0 * 1.16, WATER_CP.1 * 4.2),
        other => return Err(PhantomError::UnknownMaterial(String::from(other))),
    };
    Ok(Material { name: label, c, p })
}

/// Geometric primitive in world coordinates (cm).
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Axis box of full width/height `w`/`h`, optionally rotated (radians).
    Rectangle { cx: f64, cy: f64, w: f64, h: f64, rot: f64 },
    /// Ellipse with semi-axes `a`/`b`, optionally rotated (radians).
    Ellipse { cx: f64, cy: f64, a: f64, b: f64, rot: f64 },
    /// Ring `r_inner <= r <= r_outer`, with an optional angular gap of
    /// `gap_width` radians centered on `gap_center` — a C shape.
    Annulus { cx: f64, cy: f64, r_outer: f64, r_inner: f64, gap_center: f64, gap_width: f64 },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rectangle { cx, cy, w, h, rot } => {
                let (dx, dy) = rotate_into(x - cx, y - cy, rot);
                dx.abs() <= w / 2.0 && dy.abs() <= h / 2.0
            }
            Shape::Ellipse { cx, cy, a, b, rot } => {
                let (dx, dy) = rotate_into(x - cx, y - cy, rot);
                (dx / a) * (dx / a) + (dy / b) * (dy / b) <= 1.0
            }
            Shape::Annulus { cx, cy, r_outer, r_inner, gap_center, gap_width } => {
                let (dx, dy) = (x - cx, y - cy);
                let r = (dx * dx + dy * dy).sqrt();
                if r < r_inner || r > r_outer {
                    return false;
                }
                if gap_width <= 0.0 {
                    return true;
                }
                let ang = dy.atan2(dx);
                let mut d = ang - gap_center;
                while d > core::f64::consts::PI {
                    d -= 2.0 * core::f64::consts::PI;
                }
                while d < -core::f64::consts::PI {
                    d += 2.0 * core::f64::consts::PI;
                }
                d.abs() > gap_width / 2.0
            }
        }
    }
}

fn rotate_into(dx: f64, dy: f64, rot: f64) -> (f64, f64) {
    if rot == 0.0 {
        return (dx, dy);
    }
    let (s, c) = (rot.sin(), rot.cos());
    (c * dx + s * dy, -s * dx + c * dy)
}

/// One placed object: a shape bound to a material, with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub label: String,
    pub shape: Shape,
    pub material: Material,
}

/// Rasterized scene: objects in z-order (later shapes overwrite earlier
/// ones) and their disjoint per-object pixel masks.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomScene {
    pub grid: ImageGrid,
    pub objects: Vec<SceneObject>,
    /// `masks[i][k]` is true where pixel `k`'s final owner is object `i`.
    pub masks: Vec<Vec<bool>>,
}

impl PhantomScene {
    /// Rasterize `objects` over an air background.  Ownership is decided
    /// per pixel center; the last containing shape wins.
    pub fn rasterize(grid: ImageGrid, objects: Vec<SceneObject>) -> (ImagePair, PhantomScene) {
        let n = grid.n_pixels();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for row in 0..grid.ny {
            for col in 0..grid.nx {
                let (x, y) = grid.pixel_center(row, col);
                let k = grid.index(row, col);
                for (i, obj) in objects.iter().enumerate() {
                    if obj.shape.contains(x, y) {
                        owner[k] = Some(i);
                    }
                }
            }
        }
        let mut img = ImagePair::zeros(grid.clone());
        let mut masks = vec![vec![false; n]; objects.len()];
        for k in 0..n {
            if let Some(i) = owner[k] {
                img.c[k] = objects[i].material.c;
                img.p[k] = objects[i].material.p;
                masks[i][k] = true;
            }
        }
        (img, PhantomScene { grid, objects, masks })
    }

    pub fn mask_by_label(&self, label: &str) -> Option<&[bool]> {
        self.objects
            .iter()
            .position(|o| o.label == label)
            .map(|i| self.masks[i].as_slice())
    }
}

/// Default suitcase layout: plastic outer case, central aluminum block,
/// C-shaped neoprene sheet, and a water bottle with a plastic rim in the
/// upper right.  Requires at least a 64x64 grid.
pub fn build_suitcase_phantom(
    grid: &ImageGrid,
) -> Result<(ImagePair, PhantomScene), PhantomError> {
    if grid.nx < 64 || grid.ny < 64 {
        return Err(PhantomError::GridTooSmall { nx: grid.nx, ny: grid.ny });
    }
    let plastic = material_coefficients("plastic").expect("library material");
    let air = material_coefficients("air").expect("library material");
    let aluminum = material_coefficients("aluminum").expect("library material");
    let neoprene = material_coefficients("neoprene").expect("library material");
    let water = material_coefficients("water").expect("library material");

    let obj = |label: &str, shape: Shape, material: Material| SceneObject {
        label: String::from(label),
        shape,
        material,
    };
    let objects = vec![
        // Case: 36x26 cm outer rectangle with a 2 cm wall; the interior is
        // air and its final owners are the objects drawn on top of it.
        obj("shell", Shape::Rectangle { cx: 0.0, cy: 0.0, w: 36.0, h: 26.0, rot: 0.0 }, plastic.clone()),
        obj("interior", Shape::Rectangle { cx: 0.0, cy: 0.0, w: 32.0, h: 22.0, rot: 0.0 }, air),
        obj("aluminum", Shape::Rectangle { cx: 0.0, cy: 0.0, w: 8.0, h: 6.0, rot: 0.0 }, aluminum),
        obj(
            "neoprene",
            Shape::Annulus {
                cx: -9.5,
                cy: -2.5,
                r_outer: 6.0,
                r_inner: 3.8,
                gap_center: 0.0,
                gap_width: 70f64.to_radians(),
            },
            neoprene,
        ),
        obj("bottle", Shape::Ellipse { cx: 9.5, cy: 6.0, a: 5.0, b: 4.0, rot: 0.0 }, plastic),
        obj("water", Shape::Ellipse { cx: 9.5, cy: 6.0, a: 4.3, b: 3.3, rot: 0.0 }, water),
    ];
    Ok(PhantomScene::rasterize(grid.clone(), objects))
}

//! Dual-energy CT simulation and reconstruction.
//!
//! Scenes are described by two basis-coefficient images: a Compton scatter
//! image `c` (cm^-1) multiplying the Klein-Nishina energy profile, and a
//! photoelectric image `p` (keV cm^-1) multiplying E^-3.  A polyenergetic
//! forward model maps the pair through a sparse ray-trace system matrix to
//! expected photon counts for low- and high-kVp source spectra.
//!
//! Reconstruction routes:
//! - [`fbp`]: parallel-beam filtered back-projection of a single sinogram.
//! - [`ync`]: legacy pipeline that decomposes the dual-energy data per ray
//!   into Compton/photoelectric sinograms, cleans them up, and runs FBP on
//!   each.
//! - [`admm`]: joint iterative solver with variable splitting, TV
//!   regularization of the Compton image, non-negativity, and non-local
//!   means regularization of the photoelectric image guided by the Compton
//!   estimate.
//!
//! The crate is `no_std` + `alloc`; all IO, configuration, and the CLI live
//! in the companion `dect` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod admm;
pub mod fbp;
pub mod geometry;
pub mod metrics;
pub mod phantom;
pub mod physics;
pub mod regularizers;
pub mod ync;

pub use geometry::{ImageGrid, ScanGeometry, SystemMatrix};
pub use physics::{DualSinogram, ImagePair, NoiseModel, Spectrum};

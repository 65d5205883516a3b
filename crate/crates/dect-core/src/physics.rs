//! Spectral basis functions, polyenergetic forward model, noise
//! simulation, log-domain transform, and the weighted data-fidelity term.
//!
//! Attenuation is modeled as `mu(x,y,E) = c(x,y) f_KN(E) + p(x,y) E^-3`
//! with `f_KN` the Klein-Nishina profile in `alpha = E / 510.95 keV`.
//! Expected counts per ray are spectrum-weighted sums of exponentials of
//! the two basis line integrals; measurements are Poisson counts plus
//! Gaussian electronics noise, log-transformed against the unattenuated
//! flux `Y0`.

// `f64` inherent math methods require std; route through the trait when
// building without it.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::geometry::{ImageGrid, SystemMatrix};

/// Electron rest energy in keV; `alpha = E / ELECTRON_REST_KEV`.
pub const ELECTRON_REST_KEV: f64 = 510.95;

/// Standard energy grid bounds (keV) for CT source spectra.
pub const ENERGY_MIN_KEV: f64 = 20.0;
pub const ENERGY_MAX_KEV: f64 = 140.0;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("energy must be > 0 keV")]
    NonPositiveEnergy,
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Klein-Nishina energy profile of Compton scattering, as a function of
/// energy in keV.  Strictly positive and strictly decreasing over the CT
/// range.
pub fn klein_nishina(e_kev: f64) -> Result<f64, PhysicsError> {
    if !(e_kev > 0.0) {
        return Err(PhysicsError::NonPositiveEnergy);
    }
    Ok(klein_nishina_alpha(e_kev / ELECTRON_REST_KEV))
}

/// Threshold below which the closed form cancels catastrophically and a
/// series expansion is used instead; at 3e-3 both branches agree to ~2e-10
/// (the closed form loses ~alpha^-5 digits, the quartic series gains them).
const KN_SERIES_ALPHA: f64 = 3e-3;

fn klein_nishina_alpha(a: f64) -> f64 {
    if a < KN_SERIES_ALPHA {
        // 4th-order expansion about alpha = 0; limit value is 4/3.
        return 4.0 / 3.0
            * (1.0 - 2.0 * a + 26.0 / 5.0 * a * a - 13.3 * a * a * a
                + 1144.0 / 35.0 * a * a * a * a);
    }
    let l = (1.0 + 2.0 * a).ln();
    (1.0 + a) / (a * a) * (2.0 * (1.0 + a) / (1.0 + 2.0 * a) - l / a) + l / (2.0 * a)
        - (1.0 + 3.0 * a) / ((1.0 + 2.0 * a) * (1.0 + 2.0 * a))
}

/// Photoelectric energy profile `E^-3` (E in keV).
pub fn photoelectric_basis(e_kev: f64) -> Result<f64, PhysicsError> {
    if !(e_kev > 0.0) {
        return Err(PhysicsError::NonPositiveEnergy);
    }
    Ok(1.0 / (e_kev * e_kev * e_kev))
}

/// Discrete normalized source spectrum on a strictly increasing keV grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    weights: Vec<f64>,
}

impl Spectrum {
    /// Build a spectrum from already-normalized weights; the sum must be 1
    /// within 1e-12.
    pub fn new(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self, PhysicsError> {
        let s = Self::validated(energies, weights)?;
        let sum: f64 = s.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PhysicsError::InvalidSpectrum("weights must sum to 1"));
        }
        Ok(s)
    }

    /// Build a spectrum, renormalizing the weights to unit sum.
    pub fn normalized(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self, PhysicsError> {
        let mut s = Self::validated(energies, weights)?;
        let sum: f64 = s.weights.iter().sum();
        if !(sum > 0.0) {
            return Err(PhysicsError::InvalidSpectrum("weights must not be all zero"));
        }
        for w in &mut s.weights {
            *w /= sum;
        }
        Ok(s)
    }

    fn validated(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self, PhysicsError> {
        if energies.is_empty() || energies.len() != weights.len() {
            return Err(PhysicsError::InvalidSpectrum("energy/weight lengths differ or empty"));
        }
        for (i, &e) in energies.iter().enumerate() {
            if !(e > 0.0) {
                return Err(PhysicsError::InvalidSpectrum("energies must be > 0"));
            }
            if i > 0 && e <= energies[i - 1] {
                return Err(PhysicsError::InvalidSpectrum("energies must be strictly increasing"));
            }
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(PhysicsError::InvalidSpectrum("weights must be >= 0"));
        }
        Ok(Self { energies, weights })
    }

    /// Simplified filtered bremsstrahlung spectrum for a tube voltage
    /// `kvp`, tabulated in 1 keV bins on the 20-140 keV grid.  Kramers'
    /// law photon counts, hardened by an aluminum filtration term so the
    /// low-energy tail is physical.
    pub fn kramers(kvp: f64) -> Result<Self, PhysicsError> {
        if !(kvp > ENERGY_MIN_KEV) {
            return Err(PhysicsError::InvalidSpectrum("kvp must exceed the 20 keV grid floor"));
        }
        const FILTRATION_CM_AL: f64 = 0.25;
        let (al_c, al_p) = crate::phantom::ALUMINUM_CP;
        let n = (ENERGY_MAX_KEV - ENERGY_MIN_KEV) as usize + 1;
        let mut energies = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let e = ENERGY_MIN_KEV + i as f64;
            energies.push(e);
            if e >= kvp {
                weights.push(0.0);
            } else {
                let mu_al = al_c * klein_nishina_alpha(e / ELECTRON_REST_KEV) + al_p / (e * e * e);
                weights.push((kvp / e - 1.0) * (-FILTRATION_CM_AL * mu_al).exp());
            }
        }
        Self::normalized(energies, weights)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Spectrum-averaged Klein-Nishina value at zero attenuation; used as
    /// an effective-energy scale for FBP-based initialization.
    pub fn mean_klein_nishina(&self) -> f64 {
        self.energies
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| w * klein_nishina_alpha(e / ELECTRON_REST_KEV))
            .sum()
    }
}

/// Precomputed per-bin basis values for one spectrum; the workhorse of the
/// forward model and every linearization.
#[derive(Debug, Clone)]
pub(crate) struct SpectrumEval {
    w: Vec<f64>,
    fkn: Vec<f64>,
    fp: Vec<f64>,
}

impl SpectrumEval {
    pub fn new(spec: &Spectrum) -> Self {
        let fkn = spec
            .energies
            .iter()
            .map(|&e| klein_nishina_alpha(e / ELECTRON_REST_KEV))
            .collect();
        let fp = spec.energies.iter().map(|&e| 1.0 / (e * e * e)).collect();
        Self { w: spec.weights.clone(), fkn, fp }
    }

    /// Fraction of flux surviving line integrals `(ac, ap)`.
    pub fn transmission(&self, ac: f64, ap: f64) -> f64 {
        let mut q = 0.0;
        for i in 0..self.w.len() {
            q += self.w[i] * (-self.fkn[i] * ac - self.fp[i] * ap).exp();
        }
        q
    }

    /// Log-domain model value and its slopes with respect to the two line
    /// integrals: `m = -ln q`, `dm/dac`, `dm/dap`.
    pub fn log_mean_and_slopes(&self, ac: f64, ap: f64) -> (f64, f64, f64) {
        let (mut q, mut qc, mut qp) = (0.0, 0.0, 0.0);
        for i in 0..self.w.len() {
            let e = self.w[i] * (-self.fkn[i] * ac - self.fp[i] * ap).exp();
            q += e;
            qc += self.fkn[i] * e;
            qp += self.fp[i] * e;
        }
        (-q.ln(), qc / q, qp / q)
    }
}

/// Compton image `c` (cm^-1) and photoelectric image `p` (keV cm^-1) on a
/// shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub grid: ImageGrid,
    pub c: Vec<f64>,
    pub p: Vec<f64>,
}

impl ImagePair {
    pub fn new(grid: ImageGrid, c: Vec<f64>, p: Vec<f64>) -> Result<Self, PhysicsError> {
        let n = grid.n_pixels();
        if c.len() != n {
            return Err(PhysicsError::DimensionMismatch { expected: n, got: c.len() });
        }
        if p.len() != n {
            return Err(PhysicsError::DimensionMismatch { expected: n, got: p.len() });
        }
        if c.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(PhysicsError::InvalidArgument("image values must be finite"));
        }
        Ok(Self { grid, c, p })
    }

    pub fn zeros(grid: ImageGrid) -> Self {
        let n = grid.n_pixels();
        Self { grid, c: vec![0.0; n], p: vec![0.0; n] }
    }
}

/// Low/high-energy measurements: raw counts, log-domain values, and the
/// per-ray Sauer-Bouman weights (equal to counts; zero marks masked rays).
#[derive(Debug, Clone, PartialEq)]
pub struct DualSinogram {
    pub counts_low: Vec<f64>,
    pub counts_high: Vec<f64>,
    pub m_low: Vec<f64>,
    pub m_high: Vec<f64>,
    pub weights_low: Vec<f64>,
    pub weights_high: Vec<f64>,
    /// Unattenuated counts per ray.
    pub y0: f64,
}

impl DualSinogram {
    pub fn from_counts(
        counts_low: Vec<f64>,
        counts_high: Vec<f64>,
        y0: f64,
    ) -> Result<Self, PhysicsError> {
        if counts_low.len() != counts_high.len() {
            return Err(PhysicsError::DimensionMismatch {
                expected: counts_low.len(),
                got: counts_high.len(),
            });
        }
        if !(y0 > 0.0) {
            return Err(PhysicsError::InvalidArgument("Y0 must be > 0"));
        }
        if counts_low.iter().chain(&counts_high).any(|&c| !(c >= 0.0)) {
            return Err(PhysicsError::InvalidArgument("counts must be >= 0"));
        }
        let (m_low, weights_low) = log_transform(&counts_low, y0)?;
        let (m_high, weights_high) = log_transform(&counts_high, y0)?;
        Ok(Self { counts_low, counts_high, m_low, m_high, weights_low, weights_high, y0 })
    }

    /// All-zero (fully masked) sinogram of `m` rays.
    pub fn zeros(m: usize, y0: f64) -> Self {
        Self {
            counts_low: vec![0.0; m],
            counts_high: vec![0.0; m],
            m_low: vec![0.0; m],
            m_high: vec![0.0; m],
            weights_low: vec![0.0; m],
            weights_high: vec![0.0; m],
            y0,
        }
    }

    pub fn len(&self) -> usize {
        self.counts_low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts_low.is_empty()
    }
}

/// Poisson counting statistics plus Gaussian electronics noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Gaussian standard deviation, counts.
    pub sigma_e: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma_e: f64, seed: u64) -> Result<Self, PhysicsError> {
        if !(sigma_e >= 0.0) {
            return Err(PhysicsError::InvalidArgument("sigma_e must be >= 0"));
        }
        Ok(Self { sigma_e, seed })
    }

    /// Electronics-noise sigma for an SNR of `db` decibels relative to the
    /// unattenuated flux: `20 log10(Y0 / sigma) = db`.
    pub fn from_snr_db(y0: f64, db: f64, seed: u64) -> Result<Self, PhysicsError> {
        if !(y0 > 0.0) {
            return Err(PhysicsError::InvalidArgument("Y0 must be > 0"));
        }
        Self::new(y0 * 10f64.powf(-db / 20.0), seed)
    }
}

/// Expected counts per ray: `Y0 * sum_b S(E_b) exp(-f_KN(E_b) (Ac)_i - f_p(E_b) (Ap)_i)`.
pub fn forward_expected_counts(
    a: &SystemMatrix,
    img: &ImagePair,
    spec: &Spectrum,
    y0: f64,
) -> Result<Vec<f64>, PhysicsError> {
    if !(y0 > 0.0) {
        return Err(PhysicsError::InvalidArgument("Y0 must be > 0"));
    }
    let ac = a.forward(&img.c).map_err(dim_err)?;
    let ap = a.forward(&img.p).map_err(dim_err)?;
    let eval = SpectrumEval::new(spec);
    Ok(ac.iter().zip(&ap).map(|(&lc, &lp)| y0 * eval.transmission(lc, lp)).collect())
}

fn dim_err(e: crate::geometry::GeometryError) -> PhysicsError {
    match e {
        crate::geometry::GeometryError::DimensionMismatch { expected, got } => {
            PhysicsError::DimensionMismatch { expected, got }
        }
        _ => PhysicsError::InvalidArgument("system matrix application failed"),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Draw noisy counts for each ray: Poisson about the expected mean plus
/// Gaussian electronics noise, clamped at zero.  Each ray gets its own
/// counter-derived stream, so results are seed-deterministic regardless of
/// evaluation order.
pub fn simulate_measurements(expected: &[f64], noise: &NoiseModel) -> Vec<f64> {
    let gauss = if noise.sigma_e > 0.0 {
        Some(Normal::new(0.0, noise.sigma_e).expect("sigma_e validated"))
    } else {
        None
    };
    expected
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(noise.seed ^ (i as u64)));
            let mut y = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(&mut rng)
            } else {
                0.0
            };
            if let Some(g) = &gauss {
                y += g.sample(&mut rng);
            }
            y.max(0.0)
        })
        .collect()
}

/// Log-domain transform `m_i = -ln(counts_i / Y0)` with Sauer-Bouman
/// weights `w_i = counts_i`; zero-count rays are masked with `m = 0`,
/// `w = 0`.
pub fn log_transform(counts: &[f64], y0: f64) -> Result<(Vec<f64>, Vec<f64>), PhysicsError> {
    if !(y0 > 0.0) {
        return Err(PhysicsError::InvalidArgument("Y0 must be > 0"));
    }
    let mut m = Vec::with_capacity(counts.len());
    let mut w = Vec::with_capacity(counts.len());
    for &c in counts {
        if c > 0.0 {
            m.push(-(c / y0).ln());
            w.push(c);
        } else {
            m.push(0.0);
            w.push(0.0);
        }
    }
    Ok((m, w))
}

/// Weighted least-squares data fidelity over both energies:
/// `1/2 sum_i w_i (y_i - m_i(theta))^2`, with gradients with respect to
/// every pixel of `c` and `p`.  Gradients are assembled as `A^T` applied
/// to per-ray factors; no dense Jacobian is formed.
pub fn data_fidelity(
    theta: &ImagePair,
    sino: &DualSinogram,
    a: &SystemMatrix,
    spec_low: &Spectrum,
    spec_high: &Spectrum,
) -> Result<(f64, Vec<f64>, Vec<f64>), PhysicsError> {
    if sino.len() != a.n_rays {
        return Err(PhysicsError::DimensionMismatch { expected: a.n_rays, got: sino.len() });
    }
    let ac = a.forward(&theta.c).map_err(dim_err)?;
    let ap = a.forward(&theta.p).map_err(dim_err)?;
    let mut value = 0.0;
    let mut grad_c = vec![0.0; a.n_pixels];
    let mut grad_p = vec![0.0; a.n_pixels];
    for (spec, m_obs, w) in [
        (spec_low, &sino.m_low, &sino.weights_low),
        (spec_high, &sino.m_high, &sino.weights_high),
    ] {
        let eval = SpectrumEval::new(spec);
        let mut fc = vec![0.0; a.n_rays];
        let mut fp = vec![0.0; a.n_rays];
        for i in 0..a.n_rays {
            if w[i] == 0.0 {
                continue;
            }
            let (m_hat, gc, gp) = eval.log_mean_and_slopes(ac[i], ap[i]);
            let r = m_obs[i] - m_hat;
            value += 0.5 * w[i] * r * r;
            fc[i] = -w[i] * r * gc;
            fp[i] = -w[i] * r * gp;
        }
        let gc_img = a.adjoint(&fc).map_err(dim_err)?;
        let gp_img = a.adjoint(&fp).map_err(dim_err)?;
        for k in 0..a.n_pixels {
            grad_c[k] += gc_img[k];
            grad_p[k] += gp_img[k];
        }
    }
    Ok((value, grad_c, grad_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{assemble_system_matrix, ScanGeometry};
    use rand::{Rng, SeedableRng};

    #[test]
    fn klein_nishina_at_alpha_one() {
        // High-precision direct evaluation of the closed form at alpha = 1.
        let v = klein_nishina(ELECTRON_REST_KEV).unwrap();
        assert!((v - 0.5743037892200577).abs() < 1e-14);
    }

    #[test]
    fn klein_nishina_monotone_on_ct_range() {
        let mut prev = f64::INFINITY;
        let mut e = 20.0;
        while e <= 140.0 {
            let v = klein_nishina(e).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
            e += 1.0;
        }
        assert!(klein_nishina(60.0).unwrap() > klein_nishina(100.0).unwrap());
    }

    #[test]
    fn klein_nishina_small_alpha_series_guard() {
        // Series oracle: 4/3 (1 - 2a + 26/5 a^2 - 133/10 a^3 + 1144/35 a^4).
        let series = |a: f64| {
            4.0 / 3.0
                * (1.0 - 2.0 * a + 5.2 * a * a - 13.3 * a * a * a
                    + 1144.0 / 35.0 * a * a * a * a)
        };
        for a in [1e-8, 1e-6, 5e-5, 9.9e-5] {
            let v = klein_nishina_alpha(a);
            assert!(v.is_finite());
            assert!((v - series(a)).abs() < 1e-12);
        }
        // Continuity across the guard threshold: the difference is the
        // true slope (-8/3) times the interval plus branch errors ~2e-10.
        let below = klein_nishina_alpha(KN_SERIES_ALPHA * 0.999);
        let above = klein_nishina_alpha(KN_SERIES_ALPHA * 1.001);
        let expected_drop = 8.0 / 3.0 * KN_SERIES_ALPHA * 0.002;
        assert!((below - above - expected_drop).abs() < 1e-6);
        assert!(klein_nishina(0.0).is_err());
        assert!(klein_nishina(-5.0).is_err());
    }

    #[test]
    fn photoelectric_cases() {
        assert!((photoelectric_basis(100.0).unwrap() - 1e-6).abs() < 1e-18);
        assert!((photoelectric_basis(10.0).unwrap() - 1e-3).abs() < 1e-15);
        let e = 37.0;
        let ratio = photoelectric_basis(2.0 * e).unwrap() / photoelectric_basis(e).unwrap();
        assert!((ratio - 0.125).abs() < 1e-12);
        assert!(photoelectric_basis(0.0).is_err());
    }

    #[test]
    fn spectrum_invariants() {
        let s = Spectrum::kramers(95.0).unwrap();
        let sum: f64 = s.weights().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(s.weights().iter().all(|&w| w >= 0.0));
        let h = Spectrum::kramers(130.0).unwrap();
        // The two presets overlap substantially.
        let overlap: f64 = s.weights().iter().zip(h.weights()).map(|(&a, &b)| a.min(b)).sum();
        assert!(overlap > 0.5, "overlap {overlap}");
        assert!(Spectrum::new(vec![30.0, 20.0], vec![0.5, 0.5]).is_err());
        assert!(Spectrum::new(vec![20.0, 30.0], vec![0.7, 0.5]).is_err());
        assert!(Spectrum::normalized(vec![20.0, 30.0], vec![2.0, 6.0]).is_ok());
    }

    fn small_problem() -> (ImageGrid, SystemMatrix) {
        let grid = ImageGrid::centered(8, 8, 1.0).unwrap();
        let geom = ScanGeometry::uniform(2, 8, 1.0, 0.0).unwrap();
        let a = assemble_system_matrix(&grid, &geom).unwrap();
        (grid, a)
    }

    #[test]
    fn zero_images_give_full_flux() {
        let (grid, a) = small_problem();
        let img = ImagePair::zeros(grid);
        let spec = Spectrum::kramers(95.0).unwrap();
        let y = forward_expected_counts(&a, &img, &spec, 1e5).unwrap();
        for v in y {
            assert!((v - 1e5).abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_spectrum_single_energy() {
        let (grid, a) = small_problem();
        let e0 = 60.0;
        let spec = Spectrum::new(vec![e0], vec![1.0]).unwrap();
        let mut img = ImagePair::zeros(grid);
        img.c.iter_mut().for_each(|v| *v = 0.02);
        img.p.iter_mut().for_each(|v| *v = 300.0);
        let y = forward_expected_counts(&a, &img, &spec, 1e5).unwrap();
        let lc = a.forward(&img.c).unwrap();
        let lp = a.forward(&img.p).unwrap();
        let fkn = klein_nishina(e0).unwrap();
        let fp = photoelectric_basis(e0).unwrap();
        for i in 0..a.n_rays {
            let expect = 1e5 * (-fkn * lc[i] - fp * lp[i]).exp();
            assert!((y[i] - expect).abs() <= 1e-9 * expect);
        }
    }

    #[test]
    fn doubling_c_decreases_counts() {
        let (grid, a) = small_problem();
        let spec = Spectrum::kramers(95.0).unwrap();
        let mut img = ImagePair::zeros(grid.clone());
        img.c.iter_mut().for_each(|v| *v = 0.1);
        let y1 = forward_expected_counts(&a, &img, &spec, 1e5).unwrap();
        img.c.iter_mut().for_each(|v| *v *= 2.0);
        let y2 = forward_expected_counts(&a, &img, &spec, 1e5).unwrap();
        for i in 0..a.n_rays {
            let lc = a.forward(&img.c).unwrap()[i];
            if lc > 0.0 {
                assert!(y2[i] < y1[i]);
            }
        }
    }

    #[test]
    fn simulate_zero_mean_zero_sigma() {
        let noise = NoiseModel::new(0.0, 42).unwrap();
        let y = simulate_measurements(&[0.0, 0.0], &noise);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn simulate_deterministic_given_seed() {
        let noise = NoiseModel::new(10.0, 1234).unwrap();
        let expected = vec![100.0, 5000.0, 0.5, 1e5];
        let a = simulate_measurements(&expected, &noise);
        let b = simulate_measurements(&expected, &noise);
        assert_eq!(a, b);
        let c = simulate_measurements(&expected, &NoiseModel::new(10.0, 1235).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn simulate_moment_check() {
        let n = 100_000;
        let noise = NoiseModel::new(10.0, 99).unwrap();
        let expected = vec![1000.0; n];
        let y = simulate_measurements(&expected, &noise);
        let mean: f64 = y.iter().sum::<f64>() / n as f64;
        // Analytic: mean 1000, variance 1000 + 100.
        let bound = 3.0 * (1100.0f64).sqrt() / (n as f64).sqrt();
        assert!((mean - 1000.0).abs() < bound, "mean {mean}, bound {bound}");
        let var: f64 = y.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 1100.0).abs() < 0.05 * 1100.0, "var {var}");
    }

    #[test]
    fn snr_db_interpretation() {
        let noise = NoiseModel::from_snr_db(1e5, 70.0, 0).unwrap();
        assert!((noise.sigma_e - 1e5 * 10f64.powf(-3.5)).abs() < 1e-9);
    }

    #[test]
    fn log_transform_cases() {
        let y0 = 1e4;
        let (m, w) = log_transform(&[1e4, 1e4 / core::f64::consts::E, 0.0], y0).unwrap();
        assert!(m[0].abs() < 1e-12);
        assert!((m[1] - 1.0).abs() < 1e-12);
        assert_eq!(m[2], 0.0);
        assert_eq!(w[2], 0.0);
        assert_eq!(w[0], 1e4);
    }

    fn simulate_noiseless(
        a: &SystemMatrix,
        img: &ImagePair,
        low: &Spectrum,
        high: &Spectrum,
        y0: f64,
    ) -> DualSinogram {
        let yl = forward_expected_counts(a, img, low, y0).unwrap();
        let yh = forward_expected_counts(a, img, high, y0).unwrap();
        DualSinogram::from_counts(yl, yh, y0).unwrap()
    }

    #[test]
    fn fidelity_zero_at_truth() {
        let (grid, a) = small_problem();
        let low = Spectrum::kramers(95.0).unwrap();
        let high = Spectrum::kramers(130.0).unwrap();
        let mut truth = ImagePair::zeros(grid);
        truth.c.iter_mut().enumerate().for_each(|(k, v)| *v = 0.05 + 0.001 * (k % 7) as f64);
        truth.p.iter_mut().enumerate().for_each(|(k, v)| *v = 500.0 + 30.0 * (k % 5) as f64);
        let sino = simulate_noiseless(&a, &truth, &low, &high, 1e5);
        let (val, gc, gp) = data_fidelity(&truth, &sino, &a, &low, &high).unwrap();
        assert!(val.abs() < 1e-10, "value {val}");
        assert!(gc.iter().all(|v| v.abs() < 1e-8));
        assert!(gp.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn fidelity_gradient_matches_finite_differences() {
        let grid = ImageGrid::centered(8, 8, 1.0).unwrap();
        let geom = ScanGeometry::uniform(2, 8, 1.0, 0.0).unwrap();
        let a = assemble_system_matrix(&grid, &geom).unwrap();
        assert_eq!(a.n_rays, 16);
        let low = Spectrum::kramers(95.0).unwrap();
        let high = Spectrum::kramers(130.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);

        let truth = {
            let mut t = ImagePair::zeros(grid.clone());
            t.c.iter_mut().for_each(|v| *v = rng.gen_range(0.0..0.3));
            t.p.iter_mut().for_each(|v| *v = rng.gen_range(0.0..5e3));
            t
        };
        let sino = simulate_noiseless(&a, &truth, &low, &high, 1e5);

        let mut theta = ImagePair::zeros(grid);
        theta.c.iter_mut().for_each(|v| *v = rng.gen_range(0.0..0.3));
        theta.p.iter_mut().for_each(|v| *v = rng.gen_range(0.0..5e3));
        let (_, gc, gp) = data_fidelity(&theta, &sino, &a, &low, &high).unwrap();

        let value = |t: &ImagePair| data_fidelity(t, &sino, &a, &low, &high).unwrap().0;
        let scale =
            gc.iter().chain(&gp).fold(0.0f64, |m, &v| m.max(v.abs()));
        for k in 0..theta.c.len() {
            let hc = 1e-6;
            let mut tp = theta.clone();
            tp.c[k] += hc;
            let mut tm = theta.clone();
            tm.c[k] -= hc;
            let fd = (value(&tp) - value(&tm)) / (2.0 * hc);
            assert!((fd - gc[k]).abs() <= 1e-5 * scale.max(fd.abs()), "c[{k}]: {fd} vs {}", gc[k]);

            let hp = 1e-1;
            let mut tp = theta.clone();
            tp.p[k] += hp;
            let mut tm = theta.clone();
            tm.p[k] -= hp;
            let fd = (value(&tp) - value(&tm)) / (2.0 * hp);
            assert!(
                (fd - gp[k]).abs() <= 1e-5 * scale.max(fd.abs()).max(1e-12),
                "p[{k}]: {fd} vs {}",
                gp[k]
            );
        }
    }

    #[test]
    fn masked_rays_contribute_nothing() {
        let (grid, a) = small_problem();
        let low = Spectrum::kramers(95.0).unwrap();
        let high = Spectrum::kramers(130.0).unwrap();
        let mut truth = ImagePair::zeros(grid);
        truth.c.iter_mut().for_each(|v| *v = 0.1);
        let mut sino = simulate_noiseless(&a, &truth, &low, &high, 1e5);
        let (v0, _, _) = data_fidelity(&truth, &sino, &a, &low, &high).unwrap();
        // Mask a ray, then corrupt its measurement: value unchanged.
        sino.weights_low[3] = 0.0;
        sino.m_low[3] = 99.0;
        let (v1, _, _) = data_fidelity(&truth, &sino, &a, &low, &high).unwrap();
        assert!((v0 - v1).abs() < 1e-12);
    }

    #[test]
    fn fidelity_convex_along_segments() {
        let (grid, a) = small_problem();
        let low = Spectrum::kramers(95.0).unwrap();
        let high = Spectrum::kramers(130.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut truth = ImagePair::zeros(grid.clone());
        truth.c.iter_mut().for_each(|v| *v = rng.gen_range(0.0..0.2));
        truth.p.iter_mut().for_each(|v| *v = rng.gen_range(0.0..3e3));
        let sino = simulate_noiseless(&a, &truth, &low, &high, 1e5);

        for _ in 0..5 {
            let mut e0 = ImagePair::zeros(grid.clone());
            let mut e1 = ImagePair::zeros(grid.clone());
            for img in [&mut e0, &mut e1] {
                img.c.iter_mut().for_each(|v| *v = rng.gen_range(0.0..0.3));
                img.p.iter_mut().for_each(|v| *v = rng.gen_range(0.0..4e3));
            }
            let value = |t: &ImagePair| data_fidelity(t, &sino, &a, &low, &high).unwrap().0;
            let f0 = value(&e0);
            let f1 = value(&e1);
            let mid = ImagePair::new(
                grid.clone(),
                e0.c.iter().zip(&e1.c).map(|(&a, &b)| 0.5 * (a + b)).collect(),
                e0.p.iter().zip(&e1.p).map(|(&a, &b)| 0.5 * (a + b)).collect(),
            )
            .unwrap();
            let fm = value(&mid);
            let scale = f0.abs().max(f1.abs()).max(1.0);
            assert!(fm <= 0.5 * (f0 + f1) + 1e-9 * scale);
        }
    }
}

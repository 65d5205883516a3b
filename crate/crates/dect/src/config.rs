//! Run configuration: TOML schema, strict validation, defaults, and the
//! resolved-config echo written next to every command's outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dect_core::admm::AdmmConfig;
use dect_core::fbp::{Filter, FilterKind};
use dect_core::physics::Spectrum;
use dect_core::regularizers::NlmParams;
use dect_core::{ImageGrid, ScanGeometry};

use crate::error::AppError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub spectra: SpectraConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub recon: ReconConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig::default(),
            geometry: GeometryConfig::default(),
            spectra: SpectraConfig::default(),
            noise: NoiseConfig::default(),
            recon: ReconConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Pixel edge length, cm.
    pub pixel_size: f64,
}

impl Default for GridConfig {
    /// 64 x 64 pixels of 0.625 cm: a 40 cm field of view.
    fn default() -> Self {
        Self { nx: 64, ny: 64, pixel_size: 0.625 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub n_angles: usize,
    pub n_detectors: usize,
    /// Detector pitch, cm.
    pub detector_spacing: f64,
    #[serde(default)]
    pub detector_offset: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { n_angles: 90, n_detectors: 128, detector_spacing: 0.35, detector_offset: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraConfig {
    /// Tube potential of the low-energy scan (Kramers model), kVp.
    pub low_kvp: f64,
    pub high_kvp: f64,
    /// Optional two-column spectrum files; when set they override the
    /// Kramers presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_path: Option<String>,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self { low_kvp: 95.0, high_kvp: 130.0, low_path: None, high_path: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Unattenuated counts per ray.
    pub y0: f64,
    /// Electronic-noise floor as an SNR relative to y0, dB.
    pub electronic_snr_db: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { y0: 1e5, electronic_snr_db: 70.0, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    /// fbp | ync | admm | admm-noreg.
    pub method: String,
    /// View subsampling stride (1 = all angles).
    pub stride: usize,
    /// ramp | ramp_hann.
    pub filter: String,
    /// Filter cutoff as a fraction of Nyquist, in (0, 1].
    pub filter_cutoff: f64,
    #[serde(default)]
    pub admm: AdmmSection,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            method: "admm".to_string(),
            stride: 1,
            filter: "ramp_hann".to_string(),
            filter_cutoff: 1.0,
            admm: AdmmSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSection {
    pub penalty_mu: f64,
    pub nu: f64,
    pub lambda_u: f64,
    pub lambda_tv: f64,
    pub lambda_nlm: f64,
    pub nlm_beta: f64,
    pub nlm_patch_half_width: usize,
    pub nlm_search_half_width: usize,
    pub max_outer: usize,
    pub inner_tv_iters: usize,
    pub lm_steps: usize,
    pub lm_damping_init: f64,
    pub lm_damping_factor: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub theta_cg_tol: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for AdmmSection {
    fn default() -> Self {
        let d = AdmmConfig::default();
        let nlm = NlmParams::default();
        Self {
            penalty_mu: d.penalty_mu,
            nu: d.nu,
            lambda_u: d.lambda_u,
            lambda_tv: d.lambda_tv,
            lambda_nlm: d.lambda_nlm,
            nlm_beta: nlm.beta,
            nlm_patch_half_width: nlm.patch_half_width,
            nlm_search_half_width: nlm.search_half_width,
            max_outer: d.max_outer,
            inner_tv_iters: d.inner_tv_iters,
            lm_steps: d.lm_steps,
            lm_damping_init: d.lm_damping_init,
            lm_damping_factor: d.lm_damping_factor,
            cg_tol: d.cg_tol,
            cg_max_iters: d.cg_max_iters,
            theta_cg_tol: d.theta_cg_tol,
            eps_abs: d.eps_abs,
            eps_rel: d.eps_rel,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io_at(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(AppError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(AppError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.grid.nx == 0 || self.grid.ny == 0 || !(self.grid.pixel_size > 0.0) {
            return Err(AppError::config("grid dimensions and pixel_size must be positive"));
        }
        if self.geometry.n_angles == 0 || self.geometry.n_detectors == 0 {
            return Err(AppError::config("geometry needs at least one angle and detector"));
        }
        if !(self.geometry.detector_spacing > 0.0) {
            return Err(AppError::config("detector_spacing must be > 0"));
        }
        if !(self.noise.y0 > 0.0) {
            return Err(AppError::config("y0 must be > 0"));
        }
        if self.recon.stride == 0 {
            return Err(AppError::config("stride must be >= 1"));
        }
        match self.recon.method.as_str() {
            "fbp" | "ync" | "admm" | "admm-noreg" => {}
            other => {
                return Err(AppError::config(format!(
                    "unknown method `{other}` (expected fbp | ync | admm | admm-noreg)"
                )))
            }
        }
        match self.recon.filter.as_str() {
            "ramp" | "ramp_hann" => {}
            other => {
                return Err(AppError::config(format!(
                    "unknown filter `{other}` (expected ramp | ramp_hann)"
                )))
            }
        }
        if !(self.recon.filter_cutoff > 0.0 && self.recon.filter_cutoff <= 1.0) {
            return Err(AppError::config("filter_cutoff must lie in (0, 1]"));
        }
        self.admm_config()?;
        Ok(())
    }

    pub fn image_grid(&self) -> Result<ImageGrid, AppError> {
        ImageGrid::centered(self.grid.nx, self.grid.ny, self.grid.pixel_size)
            .map_err(AppError::config)
    }

    /// Scan geometry after applying the view-subsampling stride.
    pub fn scan_geometry(&self, stride: usize) -> Result<ScanGeometry, AppError> {
        let full = ScanGeometry::uniform(
            self.geometry.n_angles,
            self.geometry.n_detectors,
            self.geometry.detector_spacing,
            self.geometry.detector_offset,
        )
        .map_err(AppError::config)?;
        if stride <= 1 {
            return Ok(full);
        }
        let angles: Vec<f64> = full.angles.iter().copied().step_by(stride).collect();
        ScanGeometry::new(
            angles,
            self.geometry.n_detectors,
            self.geometry.detector_spacing,
            self.geometry.detector_offset,
        )
        .map_err(AppError::config)
    }

    pub fn spectra(&self) -> Result<(Spectrum, Spectrum), AppError> {
        let low = match &self.spectra.low_path {
            Some(p) => load_spectrum_file(Path::new(p))?,
            None => Spectrum::kramers(self.spectra.low_kvp).map_err(AppError::config)?,
        };
        let high = match &self.spectra.high_path {
            Some(p) => load_spectrum_file(Path::new(p))?,
            None => Spectrum::kramers(self.spectra.high_kvp).map_err(AppError::config)?,
        };
        Ok((low, high))
    }

    pub fn filter(&self) -> Filter {
        let kind = match self.recon.filter.as_str() {
            "ramp" => FilterKind::Ramp,
            _ => FilterKind::RampHann,
        };
        Filter::new(kind, self.recon.filter_cutoff)
    }

    pub fn admm_config(&self) -> Result<AdmmConfig, AppError> {
        let a = &self.recon.admm;
        let nlm = NlmParams::new(a.nlm_beta, a.nlm_patch_half_width, a.nlm_search_half_width)
            .map_err(AppError::config)?;
        Ok(AdmmConfig {
            penalty_mu: a.penalty_mu,
            nu: a.nu,
            lambda_u: a.lambda_u,
            lambda_tv: a.lambda_tv,
            lambda_nlm: a.lambda_nlm,
            nlm,
            max_outer: a.max_outer,
            inner_tv_iters: a.inner_tv_iters,
            lm_steps: a.lm_steps,
            lm_damping_init: a.lm_damping_init,
            lm_damping_factor: a.lm_damping_factor,
            cg_tol: a.cg_tol,
            cg_max_iters: a.cg_max_iters,
            theta_cg_tol: a.theta_cg_tol,
            eps_abs: a.eps_abs,
            eps_rel: a.eps_rel,
        })
    }

    /// Write the fully-resolved configuration next to a command's outputs
    /// (atomic, like all other outputs).
    pub fn echo(&self, out_dir: &Path) -> Result<(), AppError> {
        let text = toml::to_string_pretty(self).map_err(AppError::config)?;
        crate::write_text_atomic(&out_dir.join("resolved_config.toml"), &text)
    }
}

/// Two-column text spectrum (energy_keV, weight), `#` comments.  Weights
/// are renormalized; drift beyond 1e-6 is reported on stderr.
pub fn load_spectrum_file(path: &Path) -> Result<Spectrum, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io_at(path, e))?;
    let mut energies = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut cols = body.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<f64, AppError> {
            tok.and_then(|t| t.parse::<f64>().ok()).ok_or_else(|| {
                AppError::config(format!(
                    "{}:{}: expected two numeric columns",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        energies.push(parse(cols.next())?);
        weights.push(parse(cols.next())?);
        if cols.next().is_some() {
            return Err(AppError::config(format!(
                "{}:{}: expected exactly two columns",
                path.display(),
                lineno + 1
            )));
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        eprintln!(
            "note: spectrum {} weights sum to {total:.9}; renormalizing",
            path.display()
        );
    }
    Spectrum::normalized(energies, weights).map_err(AppError::config)
}

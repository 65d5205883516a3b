//! Command implementations behind the CLI subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dect_core::admm::run_admm;
use dect_core::fbp::fbp;
use dect_core::geometry::{assemble_system_matrix, subsample_angles};
use dect_core::metrics::{
    clouds_to_delimited, material_clouds, psnr, ssim, CloudStat, PSNR_L_COMPTON,
    PSNR_L_PHOTOELECTRIC,
};
use dect_core::phantom::build_suitcase_phantom;
use dect_core::physics::{forward_expected_counts, NoiseModel};
use dect_core::ync::ync_reconstruct;
use dect_core::{DualSinogram, ImagePair};

use crate::arrayfile::{ArrayFile, ArrayKind};
use crate::config::RunConfig;
use crate::error::AppError;
use crate::render;
use crate::write_text_atomic;

/// Seed decorrelation between the low and high energy scans.
const HIGH_SEED_OFFSET: u64 = 0x9e37_79b9;

fn ensure_out_dir(out: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io_at(out, e))
}

/// Generate the suitcase phantom: the ground-truth image pair plus one
/// mask file per scene object.
pub fn cmd_phantom(cfg: &RunConfig, out: &Path) -> Result<(), AppError> {
    ensure_out_dir(out)?;
    let grid = cfg.image_grid()?;
    let (truth, scene) = build_suitcase_phantom(&grid).map_err(AppError::config)?;
    write_image_pair(&truth, &out.join("phantom.dect"))?;
    for (i, obj) in scene.objects.iter().enumerate() {
        let mask = &scene.masks[i];
        let data: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let file = ArrayFile::new(ArrayKind::Mask, vec![grid.ny, grid.nx], None, data)?;
        file.write(&out.join(format!("mask_{}.dect", obj.label)))?;
    }
    cfg.echo(out)
}

/// Simulate dual-energy photon counts for a phantom image pair.
pub fn cmd_simulate(cfg: &RunConfig, phantom_path: &Path, out: &Path) -> Result<(), AppError> {
    ensure_out_dir(out)?;
    let grid = cfg.image_grid()?;
    let truth = read_image_pair(phantom_path, cfg)?;
    let geom = cfg.scan_geometry(1)?;
    let a = assemble_system_matrix(&grid, &geom).map_err(AppError::numeric)?;
    let (low, high) = cfg.spectra()?;
    let y0 = cfg.noise.y0;
    let expected_low =
        forward_expected_counts(&a, &truth, &low, y0).map_err(AppError::numeric)?;
    let expected_high =
        forward_expected_counts(&a, &truth, &high, y0).map_err(AppError::numeric)?;
    let noise_low = NoiseModel::from_snr_db(y0, cfg.noise.electronic_snr_db, cfg.noise.seed)
        .map_err(AppError::config)?;
    let noise_high = NoiseModel::from_snr_db(
        y0,
        cfg.noise.electronic_snr_db,
        cfg.noise.seed.wrapping_add(HIGH_SEED_OFFSET),
    )
    .map_err(AppError::config)?;
    let counts_low = dect_core::physics::simulate_measurements(&expected_low, &noise_low);
    let counts_high = dect_core::physics::simulate_measurements(&expected_high, &noise_high);
    let mut data = counts_low;
    data.extend_from_slice(&counts_high);
    let file = ArrayFile::new(
        ArrayKind::SinogramDual,
        vec![geom.n_angles(), geom.n_detectors],
        Some(y0),
        data,
    )?;
    file.write(&out.join("sinogram.dect"))?;
    cfg.echo(out)
}

/// Reconstruct an image pair from a dual sinogram with the configured
/// method; `admm-noreg` is `admm` with both regularizer weights forced to
/// zero.
pub fn cmd_reconstruct(cfg: &RunConfig, sino_path: &Path, out: &Path) -> Result<(), AppError> {
    ensure_out_dir(out)?;
    let grid = cfg.image_grid()?;
    let file = ArrayFile::read(sino_path)?;
    if file.kind != ArrayKind::SinogramDual {
        return Err(AppError::numeric(format!(
            "{}: expected a sinogram_dual file, found {}",
            sino_path.display(),
            file.kind
        )));
    }
    let full_geom = cfg.scan_geometry(1)?;
    if file.dims != [full_geom.n_angles(), full_geom.n_detectors] {
        return Err(AppError::numeric(format!(
            "{}: sinogram dims {:?} do not match configured geometry ({} x {})",
            sino_path.display(),
            file.dims,
            full_geom.n_angles(),
            full_geom.n_detectors
        )));
    }
    let (counts_low, counts_high) = file.split_blocks();
    let y0 = file.y0.expect("dual sinogram carries y0");
    let full_sino =
        DualSinogram::from_counts(counts_low.to_vec(), counts_high.to_vec(), y0)
            .map_err(AppError::numeric)?;
    let (geom, sino) = subsample_angles(&full_geom, &full_sino, cfg.recon.stride)
        .map_err(AppError::numeric)?;
    let (low, high) = cfg.spectra()?;
    let filter = cfg.filter();

    let method = cfg.recon.method.as_str();
    let recon = match method {
        "fbp" => {
            // Per-energy attenuation images: low-energy in the first
            // channel, high-energy in the second.
            let c = fbp(&sino.m_low, &geom, &grid, &filter);
            let p = fbp(&sino.m_high, &geom, &grid, &filter);
            ImagePair::new(grid.clone(), c, p).map_err(AppError::numeric)?
        }
        "ync" => ync_reconstruct(&sino, &low, &high, &grid, &geom, &filter)
            .map_err(AppError::numeric)?,
        "admm" | "admm-noreg" => {
            let mut admm_cfg = cfg.admm_config()?;
            if method == "admm-noreg" {
                admm_cfg.lambda_tv = 0.0;
                admm_cfg.lambda_nlm = 0.0;
            }
            let a = assemble_system_matrix(&grid, &geom).map_err(AppError::numeric)?;
            let start = Instant::now();
            let timer = move || start.elapsed().as_secs_f64();
            let (pair, report) =
                run_admm(&sino, &a, &low, &high, &grid, &geom, &admm_cfg, None, &timer)
                    .map_err(AppError::numeric)?;
            write_text_atomic(&out.join("solve_report.tsv"), &report.to_delimited())?;
            pair
        }
        other => return Err(AppError::config(format!("unknown method `{other}`"))),
    };
    write_image_pair(&recon, &out.join(format!("recon_{method}.dect")))?;
    cfg.echo(out)
}

/// PSNR/SSIM against ground truth plus per-object material-cloud tables.
pub fn cmd_metrics(
    cfg: &RunConfig,
    recon_path: &Path,
    truth_path: &Path,
    mask_paths: &[PathBuf],
    out: &Path,
) -> Result<(), AppError> {
    ensure_out_dir(out)?;
    let grid = cfg.image_grid()?;
    let recon = read_image_pair(recon_path, cfg)?;
    let truth = read_image_pair(truth_path, cfg)?;

    let psnr_c = psnr(&recon.c, &truth.c, PSNR_L_COMPTON).map_err(AppError::numeric)?;
    let psnr_p = psnr(&recon.p, &truth.p, PSNR_L_PHOTOELECTRIC).map_err(AppError::numeric)?;
    let ssim_c =
        ssim(&recon.c, &truth.c, grid.nx, grid.ny, PSNR_L_COMPTON).map_err(AppError::numeric)?;
    let ssim_p = ssim(&recon.p, &truth.p, grid.nx, grid.ny, PSNR_L_PHOTOELECTRIC)
        .map_err(AppError::numeric)?;
    let mut table = String::from("metric\tcompton\tphotoelectric\n");
    table += &format!("psnr_db\t{psnr_c:.6}\t{psnr_p:.6}\n");
    table += &format!("ssim\t{ssim_c:.9}\t{ssim_p:.9}\n");
    write_text_atomic(&out.join("metrics.tsv"), &table)?;

    if !mask_paths.is_empty() {
        let mut labeled: Vec<(String, Vec<bool>)> = Vec::new();
        for p in mask_paths {
            let file = ArrayFile::read(p)?;
            if file.kind != ArrayKind::Mask {
                return Err(AppError::numeric(format!(
                    "{}: expected a mask file, found {}",
                    p.display(),
                    file.kind
                )));
            }
            labeled.push((mask_label(p), file.data.iter().map(|&v| v != 0.0).collect()));
        }
        let masks: Vec<(&str, &[bool])> =
            labeled.iter().map(|(l, m)| (l.as_str(), m.as_slice())).collect();
        let clouds = material_clouds(&recon, &masks).map_err(AppError::numeric)?;
        write_text_atomic(&out.join("clouds.tsv"), &clouds_to_delimited(&clouds))?;
    }
    cfg.echo(out)
}

/// `mask_water.dect` -> `water`; otherwise the file stem.
fn mask_label(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mask");
    stem.strip_prefix("mask_").unwrap_or(stem).to_string()
}

/// Render an array file (or a clouds table) to 8-bit grayscale PNG.
pub fn cmd_render(
    cfg: &RunConfig,
    input: Option<&Path>,
    clouds: Option<&Path>,
    out: &Path,
) -> Result<(), AppError> {
    ensure_out_dir(out)?;
    if input.is_none() && clouds.is_none() {
        return Err(AppError::config("render needs --input and/or --clouds"));
    }
    if let Some(path) = input {
        let file = ArrayFile::read(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("render").to_string();
        match file.kind {
            ArrayKind::Image => {
                let (ny, nx) = dims2(&file, path)?;
                let img = render::render_channel(
                    &file.data,
                    nx,
                    ny,
                    render::WINDOW_COMPTON.0,
                    render::WINDOW_COMPTON.1,
                );
                render::save_png(&img, &out.join(format!("{stem}.png")))?;
            }
            ArrayKind::Mask => {
                let (ny, nx) = dims2(&file, path)?;
                let img = render::render_channel(&file.data, nx, ny, 0.0, 1.0);
                render::save_png(&img, &out.join(format!("{stem}.png")))?;
            }
            ArrayKind::ImagePair => {
                let (ny, nx) = dims2(&file, path)?;
                let (c, p) = file.split_blocks();
                let img_c = render::render_channel(
                    c,
                    nx,
                    ny,
                    render::WINDOW_COMPTON.0,
                    render::WINDOW_COMPTON.1,
                );
                let img_p = render::render_channel(
                    p,
                    nx,
                    ny,
                    render::WINDOW_PHOTOELECTRIC.0,
                    render::WINDOW_PHOTOELECTRIC.1,
                );
                render::save_png(&img_c, &out.join(format!("{stem}_compton.png")))?;
                render::save_png(&img_p, &out.join(format!("{stem}_pe.png")))?;
            }
            ArrayKind::SinogramDual => {
                let (na, nd) = dims2(&file, path)?;
                let y0 = file.y0.unwrap_or(1.0);
                let (lo, hi) = file.split_blocks();
                // Sinograms are (angle, detector); no vertical flip
                // semantics to preserve, reuse the channel renderer.
                let img_lo = render::render_channel(lo, nd, na, 0.0, y0);
                let img_hi = render::render_channel(hi, nd, na, 0.0, y0);
                render::save_png(&img_lo, &out.join(format!("{stem}_low.png")))?;
                render::save_png(&img_hi, &out.join(format!("{stem}_high.png")))?;
            }
        }
    }
    if let Some(path) = clouds {
        let stats = read_clouds_table(path)?;
        let img = render::render_clouds(&stats, 512);
        render::save_png(&img, &out.join("clouds.png"))?;
    }
    cfg.echo(out)
}

fn dims2(file: &ArrayFile, path: &Path) -> Result<(usize, usize), AppError> {
    if file.dims.len() != 2 {
        return Err(AppError::numeric(format!(
            "{}: expected 2 dimensions, found {:?}",
            path.display(),
            file.dims
        )));
    }
    Ok((file.dims[0], file.dims[1]))
}

/// Parse the tab-delimited table written by `cmd_metrics`.
fn read_clouds_table(path: &Path) -> Result<Vec<CloudStat>, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io_at(path, e))?;
    let mut stats = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(AppError::numeric(format!(
                "{}:{}: expected 7 tab-separated columns",
                path.display(),
                lineno + 1
            )));
        }
        let num = |s: &str| -> Result<f64, AppError> {
            s.parse::<f64>().map_err(|_| {
                AppError::numeric(format!("{}:{}: bad number `{s}`", path.display(), lineno + 1))
            })
        };
        stats.push(CloudStat {
            object: cols[0].parse().unwrap_or(0),
            material: cols[1].to_string(),
            mean_c: num(cols[2])?,
            std_c: num(cols[3])?,
            mean_p: num(cols[4])?,
            std_p: num(cols[5])?,
            count: cols[6].parse().unwrap_or(0),
        });
    }
    Ok(stats)
}

pub fn write_image_pair(pair: &ImagePair, path: &Path) -> Result<(), AppError> {
    let mut data = pair.c.clone();
    data.extend_from_slice(&pair.p);
    let file =
        ArrayFile::new(ArrayKind::ImagePair, vec![pair.grid.ny, pair.grid.nx], None, data)?;
    file.write(path)
}

pub fn read_image_pair(path: &Path, cfg: &RunConfig) -> Result<ImagePair, AppError> {
    let grid = cfg.image_grid()?;
    let file = ArrayFile::read(path)?;
    if file.kind != ArrayKind::ImagePair {
        return Err(AppError::numeric(format!(
            "{}: expected an image_pair file, found {}",
            path.display(),
            file.kind
        )));
    }
    if file.dims != [grid.ny, grid.nx] {
        return Err(AppError::numeric(format!(
            "{}: image dims {:?} do not match configured grid ({} x {})",
            path.display(),
            file.dims,
            grid.ny,
            grid.nx
        )));
    }
    let (c, p) = file.split_blocks();
    ImagePair::new(grid, c.to_vec(), p.to_vec()).map_err(AppError::numeric)
}

//! `dect`: dual-energy CT phantom simulation, reconstruction, metrics, and
//! rendering.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dect::config::RunConfig;
use dect::error::AppError;
use dect::pipeline;

#[derive(Parser)]
#[command(
    name = "dect",
    version,
    about = "Dual-energy CT simulation and reconstruction pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the noise seed from the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the reconstruction method (fbp | ync | admm | admm-noreg).
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Override the sparse-view angle stride.
    #[arg(long, value_name = "N")]
    stride: Option<usize>,
}

impl Common {
    /// Load the config and apply flag overrides (flags win).
    fn resolve(&self) -> Result<RunConfig, AppError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        if let Some(method) = &self.method {
            cfg.recon.method = method.clone();
        }
        if let Some(stride) = self.stride {
            cfg.recon.stride = stride;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the suitcase phantom and per-object masks.
    Phantom {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate noisy dual-energy photon counts for a phantom.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Ground-truth image pair produced by `phantom`.
        #[arg(long, value_name = "PATH")]
        phantom: PathBuf,
    },
    /// Reconstruct an image pair from a dual sinogram.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Dual sinogram produced by `simulate`.
        #[arg(long, value_name = "PATH")]
        sinogram: PathBuf,
    },
    /// PSNR/SSIM against ground truth plus material-cloud tables.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Reconstructed image pair.
        #[arg(long, value_name = "PATH")]
        recon: PathBuf,
        /// Ground-truth image pair.
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
        /// Object mask files for the cloud table.
        #[arg(long, value_name = "PATH", num_args = 0..)]
        masks: Vec<PathBuf>,
    },
    /// Render array files and cloud tables as 8-bit PNG.
    Render {
        #[command(flatten)]
        common: Common,
        /// Array file to render.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Cloud table (from `metrics`) to plot.
        #[arg(long, value_name = "PATH")]
        clouds: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<(), AppError> {
    dect::thread_cap()?;
    match &cli.cmd {
        Cmd::Phantom { common } => {
            let cfg = common.resolve()?;
            pipeline::cmd_phantom(&cfg, &common.out)
        }
        Cmd::Simulate { common, phantom } => {
            let cfg = common.resolve()?;
            pipeline::cmd_simulate(&cfg, phantom, &common.out)
        }
        Cmd::Reconstruct { common, sinogram } => {
            let cfg = common.resolve()?;
            pipeline::cmd_reconstruct(&cfg, sinogram, &common.out)
        }
        Cmd::Metrics { common, recon, truth, masks } => {
            let cfg = common.resolve()?;
            pipeline::cmd_metrics(&cfg, recon, truth, masks, &common.out)
        }
        Cmd::Render { common, input, clouds } => {
            let cfg = common.resolve()?;
            pipeline::cmd_render(&cfg, input.as_deref(), clouds.as_deref(), &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            err.exit_code()
        }
    }
}

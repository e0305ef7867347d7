//! `utsplat` command-line tool.
//!
//! Exit status: 0 on success, 1 on bad input (arguments, files, configs),
//! 2 when a check (`grad-check`) fails.

mod bench;
mod config;
mod fit;
mod gradcheck;
mod imageio;
mod render;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{SortName, UtSection};

#[derive(Parser, Debug)]
#[command(
    name = "utsplat",
    version,
    about = "Render, fit and evaluate Gaussian particle scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a scene from every camera in a camera file.
    Render(render::RenderArgs),
    /// Fit a scene to posed images.
    Fit(fit::FitArgs),
    /// Compare UT and EWA projections against a Monte-Carlo reference.
    BenchProjection(bench::BenchArgs),
    /// Check analytic gradients against finite differences.
    GradCheck(gradcheck::GradCheckArgs),
    /// Write a synthetic scene file.
    Synth(synth::SynthArgs),
}

/// Overrides for the `[ut]` config section.
#[derive(Args, Debug, Clone, Default)]
pub struct UtArgs {
    /// Sigma-point spread (config default 1.0).
    #[arg(long)]
    pub ut_alpha: Option<f64>,
    /// Prior-distribution weight (config default 2.0).
    #[arg(long)]
    pub ut_beta: Option<f64>,
    /// Secondary scaling (config default 0.0).
    #[arg(long)]
    pub ut_kappa: Option<f64>,
}

impl UtArgs {
    pub fn apply(&self, ut: &mut UtSection) {
        if let Some(v) = self.ut_alpha {
            ut.alpha = v;
        }
        if let Some(v) = self.ut_beta {
            ut.beta = v;
        }
        if let Some(v) = self.ut_kappa {
            ut.kappa = v;
        }
    }
}

/// Overrides for the `[render]` config section.
#[derive(Args, Debug, Clone, Default)]
pub struct RenderOverrides {
    #[arg(long, value_enum)]
    pub sort: Option<SortName>,
    /// K-buffer size for `--sort per-ray-kbuffer`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Kernel degree n (2 is Gaussian).
    #[arg(long)]
    pub kernel_degree: Option<u32>,
}

impl RenderOverrides {
    pub fn apply(&self, render: &mut config::RenderSection) {
        if let Some(s) = self.sort {
            render.sort = s;
        }
        if let Some(k) = self.k {
            render.k = k;
        }
        if let Some(n) = self.kernel_degree {
            render.kernel_degree = n;
        }
    }
}

/// Marks an error as a failed check rather than bad input.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

pub fn scene_input(path: &std::path::Path) -> anyhow::Result<Vec<utsplat::GaussianParticle>> {
    use anyhow::Context;
    utsplat::scene_file::load(path).with_context(|| format!("cannot load scene {}", path.display()))
}

pub fn create_dir(path: &PathBuf) -> anyhow::Result<()> {
    use anyhow::Context;
    std::fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Render(a) => render::run(a),
        Command::Fit(a) => fit::run(a),
        Command::BenchProjection(a) => bench::run(a),
        Command::GradCheck(a) => gradcheck::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<CheckFailed>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use utsplat::bench::{make_synthetic_scene, SceneKind, SyntheticSceneSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Grid,
    RandomCloud,
    SingleBox,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub count: usize,
    /// Half-size of the occupied cube.
    #[arg(long, default_value_t = 1.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scene file to write (`.txt` for the text variant).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSceneSpec {
        kind: match args.kind {
            Kind::Grid => SceneKind::Grid,
            Kind::RandomCloud => SceneKind::RandomCloud,
            Kind::SingleBox => SceneKind::SingleBox,
        },
        count: args.count,
        extent: args.extent,
        seed: args.seed,
    };
    let scene = make_synthetic_scene(&spec)?;
    utsplat::scene_file::save(&args.out, &scene).with_context(|| format!("cannot write {}", args.out.display()))?;
    println!("wrote {} particles to {}", scene.len(), args.out.display());
    Ok(())
}

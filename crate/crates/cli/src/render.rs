use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;

use crate::config::{load_cameras, render_options};
use crate::{create_dir, imageio, scene_input, RenderOverrides, UtArgs};

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Scene file (`.txt` for the text variant, binary otherwise).
    #[arg(long)]
    pub scene: PathBuf,
    /// Camera file with `[[cameras]]` entries.
    #[arg(long)]
    pub cameras: PathBuf,
    /// Output directory; receives `<camera>.png` per view.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub render: RenderOverrides,
    #[command(flatten)]
    pub ut: UtArgs,
    /// Also write `<camera>.exr` with 32-bit float channels.
    #[arg(long)]
    pub exr: bool,
}

pub fn run(args: RenderArgs) -> Result<()> {
    let scene = scene_input(&args.scene)?;
    let mut file = load_cameras(&args.cameras)?;
    args.render.apply(&mut file.render);
    args.ut.apply(&mut file.ut);
    let opts = render_options(&file.render, &file.ut).context("invalid render options")?;
    let rigs = file
        .cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let label = cam.label(i);
            cam.rig()
                .with_context(|| format!("{}: camera `{label}`", args.cameras.display()))
                .map(|rig| (label, rig))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&args.out)?;

    println!("{} particles", scene.len());
    for (label, rig) in &rigs {
        let start = Instant::now();
        let frame = utsplat::raster::render(&scene, rig, &opts);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        imageio::write_png(&args.out.join(format!("{label}.png")), &frame.color)?;
        if args.exr {
            imageio::write_exr(&args.out.join(format!("{label}.exr")), &frame.color)?;
        }
        let hits: u64 = frame.hit_count.iter().map(|&h| h as u64).sum();
        let visible = frame.coverage.iter().filter(|&&c| c > 0).count();
        println!(
            "{label}\t{}x{}\t{ms:.1} ms\tvisible {visible}\thits {hits}",
            rig.width(),
            rig.height()
        );
    }
    Ok(())
}

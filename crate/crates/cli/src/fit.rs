use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};
use utsplat::optim::{fit, loss};
use utsplat::raster::render;
use utsplat::{CameraRig, GaussianParticle, Image, RenderOptions};

use crate::config::{load_cameras, load_fit, render_options, FitFile, SCHEMA_VERSION};
use crate::{create_dir, imageio, scene_input};

pub const VIEWS_CAMERA_FILE: &str = "cameras.toml";

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Directory holding `cameras.toml` and one image per camera.
    #[arg(long)]
    pub views: PathBuf,
    /// Initial scene.
    #[arg(long)]
    pub scene: PathBuf,
    /// Training config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for `scene.bin`, `loss.tsv` and `checkpoint.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `train.iterations`.
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    iteration: usize,
    particles: usize,
    densify_events: usize,
    initial_mean_loss: f64,
    final_mean_loss: f64,
    config_sha256: String,
    config: &'a FitFile,
}

/// Loads the views, naming every missing or mis-sized image.
fn load_views(dir: &std::path::Path) -> Result<Vec<(String, CameraRig, Image)>> {
    let cam_path = dir.join(VIEWS_CAMERA_FILE);
    let file = load_cameras(&cam_path)?;
    let mut views = Vec::new();
    let mut problems = Vec::new();
    for (i, cam) in file.cameras.iter().enumerate() {
        let label = cam.label(i);
        let rig = cam
            .rig()
            .with_context(|| format!("{}: camera `{label}`", cam_path.display()))?;
        let path = match &cam.image {
            Some(p) => dir.join(p),
            None => {
                let png = dir.join(format!("{label}.png"));
                let exr = dir.join(format!("{label}.exr"));
                if !png.exists() && exr.exists() {
                    exr
                } else {
                    png
                }
            }
        };
        if !path.exists() {
            problems.push(format!("missing image {} for camera `{label}`", path.display()));
            continue;
        }
        let img = imageio::read(&path)?;
        if img.width() != rig.width() || img.height() != rig.height() {
            problems.push(format!(
                "image {} is {}x{} but camera `{label}` is {}x{}",
                path.display(),
                img.width(),
                img.height(),
                rig.width(),
                rig.height()
            ));
            continue;
        }
        views.push((label, rig, img));
    }
    if !problems.is_empty() {
        bail!("{}", problems.join("\n"));
    }
    Ok(views)
}

fn mean_loss(scene: &[GaussianParticle], views: &[(CameraRig, Image)], opts: &RenderOptions, w: f64) -> Result<f64> {
    let mut total = 0.0;
    for (rig, target) in views {
        total += loss(&render(scene, rig, opts).color, target, w)?.0;
    }
    Ok(total / views.len() as f64)
}

pub fn run(args: FitArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => load_fit(p)?,
        None => FitFile {
            schema_version: SCHEMA_VERSION,
            render: Default::default(),
            ut: Default::default(),
            train: Default::default(),
        },
    };
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(n) = args.iterations {
        cfg.train.iterations = n;
    }
    cfg.train.validate().context("invalid [train] section")?;
    let opts = render_options(&cfg.render, &cfg.ut).context("invalid render options")?;
    let initial = scene_input(&args.scene)?;
    let labelled = load_views(&args.views)?;
    let views: Vec<(CameraRig, Image)> = labelled.iter().map(|(_, r, i)| (r.clone(), i.clone())).collect();
    create_dir(&args.out)?;

    let w = cfg.train.ssim_weight;
    let initial_loss = mean_loss(&initial, &views, &opts, w)?;
    println!(
        "{} views, {} particles, initial mean loss {initial_loss:.6e}",
        views.len(),
        initial.len()
    );
    let result = fit(&initial, &views, &cfg.train, &opts)?;
    let final_loss = mean_loss(&result.scene, &views, &opts, w)?;
    println!(
        "{} iterations, {} particles, {} densify events, final mean loss {final_loss:.6e}",
        cfg.train.iterations,
        result.scene.len(),
        result.densify_events
    );

    let scene_path = args.out.join("scene.bin");
    utsplat::scene_file::save(&scene_path, &result.scene)
        .with_context(|| format!("cannot write {}", scene_path.display()))?;
    let mut tsv = String::from("iteration\tloss\n");
    for (i, l) in result.loss_history.iter().enumerate() {
        writeln!(tsv, "{i}\t{l:e}").expect("string write");
    }
    let loss_path = args.out.join("loss.tsv");
    std::fs::write(&loss_path, tsv).with_context(|| format!("cannot write {}", loss_path.display()))?;

    let effective = toml::to_string(&cfg).context("cannot serialize config")?;
    let checkpoint = Checkpoint {
        iteration: cfg.train.iterations,
        particles: result.scene.len(),
        densify_events: result.densify_events,
        initial_mean_loss: initial_loss,
        final_mean_loss: final_loss,
        config_sha256: hex::encode(Sha256::digest(effective.as_bytes())),
        config: &cfg,
    };
    let ck_path = args.out.join("checkpoint.json");
    std::fs::write(&ck_path, serde_json::to_string_pretty(&checkpoint)?)
        .with_context(|| format!("cannot write {}", ck_path.display()))?;
    Ok(())
}

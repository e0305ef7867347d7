use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use utsplat::bench::{make_synthetic_scene, projection_quality_report, KlSummary, ProjectionReport};

use crate::config::{apply_sweep, load_bench, CameraConfig};
use crate::{create_dir, scene_input, UtArgs};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Sweep config with `[camera]` and `[[sweep]]` entries.
    #[arg(long)]
    pub config: PathBuf,
    /// Scene file; when omitted the config's `[scene]` is generated.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Output directory for per-point `.tsv`/`.json` reports and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Monte-Carlo samples per particle (config default 500).
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub ut: UtArgs,
}

/// Parameter name and value of one sweep point.
type SweepValue = (&'static str, f64);

#[derive(Serialize)]
struct PointSummary<'a> {
    name: String,
    parameter: Option<&'static str>,
    value: Option<f64>,
    camera_model: &'a str,
    mc_samples: usize,
    evaluated: usize,
    skipped: usize,
    ut: &'a KlSummary,
    ewa: Option<&'a KlSummary>,
    ewa_unsupported: Option<&'a str>,
}

fn table(report: &ProjectionReport) -> String {
    let mut out = String::from("id\tkl_ewa\tkl_ut\n");
    for r in &report.rows {
        let ewa = r.kl_ewa.map_or_else(|| "unsupported".to_string(), |v| format!("{v:e}"));
        writeln!(out, "{}\t{ewa}\t{:e}", r.id, r.kl_ut).expect("string write");
    }
    out
}

fn fmt_median(s: Option<&KlSummary>) -> String {
    s.map_or_else(|| "-".into(), |s| format!("{:.3e}", s.median))
}

pub fn run(args: BenchArgs) -> Result<()> {
    let mut file = load_bench(&args.config)?;
    args.ut.apply(&mut file.ut);
    let ut = utsplat::UTParams::new(file.ut.alpha, file.ut.beta, file.ut.kappa).context("invalid [ut] section")?;
    let mc_samples = args.mc_samples.unwrap_or(file.bench.mc_samples);
    let seed = args.seed.unwrap_or(file.bench.seed);
    let scene = match (&args.scene, &file.scene) {
        (Some(p), _) => scene_input(p)?,
        (None, Some(spec)) => make_synthetic_scene(spec).context("invalid [scene] section")?,
        (None, None) => bail!("give --scene or a [scene] section in {}", args.config.display()),
    };

    let mut points: Vec<(String, Option<SweepValue>, CameraConfig)> = Vec::new();
    if file.sweep.is_empty() {
        points.push(("base".into(), None, file.camera.clone()));
    }
    for sweep in &file.sweep {
        for (i, &v) in sweep.values.iter().enumerate() {
            let cam = apply_sweep(&file.camera, sweep.parameter, v)
                .with_context(|| format!("{}: sweep {} = {v}", args.config.display(), sweep.parameter.name()))?;
            points.push((
                format!("{}_{i:02}", sweep.parameter.name()),
                Some((sweep.parameter.name(), v)),
                cam,
            ));
        }
    }
    let rigs = points
        .iter()
        .map(|(name, _, cam)| {
            cam.rig()
                .with_context(|| format!("{}: camera for sweep point `{name}`", args.config.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&args.out)?;

    println!("point\tparameter\tvalue\tmodel\tevaluated\tkl_ut_median\tkl_ewa_median");
    let mut reports = Vec::new();
    for ((name, sweep, _), rig) in points.iter().zip(&rigs) {
        let report = projection_quality_report(&scene, rig, &ut, mc_samples, seed);
        let tsv_path = args.out.join(format!("{name}.tsv"));
        std::fs::write(&tsv_path, table(&report)).with_context(|| format!("cannot write {}", tsv_path.display()))?;
        println!(
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}",
            sweep.map_or("-", |s| s.0),
            sweep.map_or_else(|| "-".into(), |s| s.1.to_string()),
            report.camera_model,
            report.rows.len(),
            fmt_median(Some(&report.ut)),
            fmt_median(report.ewa.as_ref())
        );
        reports.push((name.clone(), *sweep, report));
    }

    let summaries: Vec<PointSummary> = reports
        .iter()
        .map(|(name, sweep, r)| PointSummary {
            name: name.clone(),
            parameter: sweep.map(|s| s.0),
            value: sweep.map(|s| s.1),
            camera_model: &r.camera_model,
            mc_samples: r.mc_samples,
            evaluated: r.rows.len(),
            skipped: r.skipped,
            ut: &r.ut,
            ewa: r.ewa.as_ref(),
            ewa_unsupported: r.ewa_unsupported.as_deref(),
        })
        .collect();
    for s in &summaries {
        let path = args.out.join(format!("{}.json", s.name));
        std::fs::write(&path, serde_json::to_string_pretty(s)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    let path = args.out.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summaries)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

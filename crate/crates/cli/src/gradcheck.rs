use anyhow::Result;
use clap::Args;
use utsplat::gradcheck::{check_alpha_backward, check_end_to_end, GradCheckConfig, ParamGroup};

use crate::CheckFailed;

fn parse_group(s: &str) -> std::result::Result<ParamGroup, String> {
    ParamGroup::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = ParamGroup::ALL.iter().map(|g| g.name()).collect();
        format!("unknown parameter group `{s}`; expected one of {}", names.join(", "))
    })
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Particle/ray pairs in the alpha suite.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Particles in the end-to-end scene.
    #[arg(long, default_value_t = 20)]
    pub particles: usize,
    /// Side of the end-to-end image in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: u32,
    #[arg(long, default_value_t = 1e-4)]
    pub unit_tolerance: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub end_to_end_tolerance: f64,
    /// Scale the analytic gradient of this group by `--corrupt-factor`
    /// before comparing; the check is then expected to fail.
    #[arg(long, value_parser = parse_group)]
    pub corrupt_gradient: Option<ParamGroup>,
    #[arg(long, default_value_t = 1.5)]
    pub corrupt_factor: f64,
}

pub fn run(args: GradCheckArgs) -> Result<()> {
    println!("seed\tsuite\tgroup\tworst_rel_error\ttolerance\tstatus");
    let mut failures = 0;
    for seed in args.seed..args.seed + args.seeds {
        let cfg = GradCheckConfig {
            seed,
            unit_instances: args.instances,
            unit_tolerance: args.unit_tolerance,
            scene_particles: args.particles,
            image_size: args.size,
            end_to_end_tolerance: args.end_to_end_tolerance,
            corrupt: args.corrupt_gradient.map(|g| (g, args.corrupt_factor)),
        };
        for report in [check_alpha_backward(&cfg), check_end_to_end(&cfg)?] {
            for g in &report.groups {
                let status = if g.passed() { "PASS" } else { "FAIL" };
                if !g.passed() {
                    failures += 1;
                }
                println!(
                    "{seed}\t{}\t{}\t{:.3e}\t{:.0e}\t{status}",
                    report.suite,
                    g.group.name(),
                    g.worst_error,
                    g.tolerance
                );
            }
        }
    }
    if failures > 0 {
        return Err(CheckFailed(format!("{failures} gradient group(s) exceeded tolerance")).into());
    }
    println!("all gradient groups within tolerance");
    Ok(())
}

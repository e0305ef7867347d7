//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `cargo test -p utsplat --test acceptance`.
//! Set `ACCEPTANCE_ONLY=3,8` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2x3, Rotation3, UnitQuaternion, Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use utsplat::bench::{image_metrics, make_synthetic_scene, projection_quality_report, SceneKind, SyntheticSceneSpec};
use utsplat::camera::{look_at, Pose};
use utsplat::gradcheck::{check_alpha_backward, check_end_to_end, GradCheckConfig, SuiteReport};
use utsplat::optim::{fit, TrainConfig};
use utsplat::particles::sh_radiance;
use utsplat::projection::{ewa_call_count, ewa_project, ut_project_with};
use utsplat::raster::render;
use utsplat::{
    CameraRig, FrameBuffer, GaussianParticle, Image, Intrinsics, IntrinsicsModel, KernelSpec, RadianceCoeffs,
    RenderOptions, ShutterSpec, SortMode, UTParams,
};

type Outcome = Result<String, String>;

/// Largest conservation error over every frame rendered by the suite.
static CONSERVATION: Mutex<(usize, f64)> = Mutex::new((0, 0.0));
/// Scene produced by the fitting criterion, reused for fisheye rendering.
static TRAINED: Mutex<Option<Vec<GaussianParticle>>> = Mutex::new(None);

fn draw(scene: &[GaussianParticle], rig: &CameraRig, opts: &RenderOptions) -> FrameBuffer {
    let frame = render(scene, rig, opts);
    let mut c = CONSERVATION.lock().unwrap();
    c.0 += 1;
    c.1 = c.1.max(frame.conservation_error());
    frame
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn intrinsics(model: IntrinsicsModel, focal: f64, size: u32) -> Intrinsics {
    let c = size as f64 / 2.0;
    Intrinsics::new(model, Vector2::new(focal, focal), Vector2::new(c, c), (size, size)).unwrap()
}

fn up() -> Vector3<f64> {
    Vector3::new(0.0, 1.0, 0.0)
}

fn pose(eye: Vector3<f64>, target: Vector3<f64>) -> Pose {
    look_at(&eye, &target, &up()).unwrap()
}

// 1 ---------------------------------------------------------------------------

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let cfg = GradCheckConfig::default();
    let unit = check_alpha_backward(&cfg);
    let e2e = check_end_to_end(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let fmt = |r: &SuiteReport| {
        r.groups
            .iter()
            .map(|g| format!("{}={:.1e}", g.group.name(), g.worst_error))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check(
        unit.passed() && e2e.passed() && elapsed < Duration::from_secs(120),
        format!(
            "alpha[{}] (<=1e-4), end-to-end 20 particles 64x64 [{}] (<=1e-3), {:.1}s",
            fmt(&unit),
            fmt(&e2e),
            elapsed.as_secs_f64()
        ),
    )
}

// 2 ---------------------------------------------------------------------------

fn ut_linear_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = GaussianParticle::new(
            Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)),
            Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Vector4::new(1e-3, 0.0, 0.0, 0.0),
            Vector3::from_fn(|_, _| rng.random_range(0.05..2.0)),
            0.5,
            RadianceCoeffs::zeros(),
        )
        .unwrap();
        let a = Matrix2x3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let b = Vector2::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let params = UTParams::new(
            rng.random_range(0.3..1.5),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..2.0),
        )
        .unwrap();
        let conic = ut_project_with(&p, &params, |x| Some(a * x + b));
        let mean = a * p.mean + b;
        let cov = a * p.covariance() * a.transpose();
        worst = worst.max((conic.mean - mean).amax()).max((conic.cov - cov).amax());
    }
    check(
        worst <= 1e-10,
        format!("50 affine maps, max deviation {worst:.2e} (<=1e-10)"),
    )
}

// 3 ---------------------------------------------------------------------------

fn projection_trend() -> Outcome {
    let start = Instant::now();
    let scene = make_synthetic_scene(&SyntheticSceneSpec {
        kind: SceneKind::RandomCloud,
        count: 1000,
        extent: 1.0,
        seed: 0,
    })
    .unwrap();
    let ut = UTParams::default();
    let mc = 500;
    let size = 256;
    let narrow_f = 128.0 / 15f64.to_radians().tan();
    let far = pose(Vector3::new(0.0, 0.0, -6.0), Vector3::zeros());

    let pinhole = CameraRig::new(
        intrinsics(IntrinsicsModel::Pinhole, narrow_f, size),
        ShutterSpec::global(far),
    );
    let base = projection_quality_report(&scene, &pinhole, &ut, mc, 1);
    let base_ewa = base.ewa.as_ref().unwrap().median;
    let a_ratio = base.ut.median / base_ewa;
    let a_ok = (0.5..=2.0).contains(&a_ratio);

    // 120 degree equidistant fisheye, close enough for the cloud to fill it.
    let fisheye = CameraRig::new(
        intrinsics(
            IntrinsicsModel::FisheyeEquidistant { k: [0.0; 4] },
            128.0 / 60f64.to_radians(),
            size,
        ),
        ShutterSpec::global(pose(Vector3::new(0.0, 0.0, -2.2), Vector3::zeros())),
    );
    let fish = projection_quality_report(&scene, &fisheye, &ut, mc, 1);
    let fish_ratio = fish.ut.median / base.ut.median;
    let fish_ok = (0.5..=2.0).contains(&fish_ratio) && fish.ewa.is_none();

    let moved = pose(Vector3::new(0.35, 0.0, -6.0), Vector3::new(0.35, 0.0, 0.0));
    let rs = CameraRig::new(
        intrinsics(IntrinsicsModel::Pinhole, narrow_f, size),
        ShutterSpec::rolling(far, moved),
    );
    let rolling = projection_quality_report(&scene, &rs, &ut, mc, 1);
    let rs_ratio = rolling.ut.median / base.ut.median;
    let rs_ewa = rolling.ewa.as_ref().unwrap().median / rolling.ut.median;
    let rs_ok = (0.5..=2.0).contains(&rs_ratio) && rs_ewa >= 5.0;
    let elapsed = start.elapsed();

    check(
        a_ok && fish_ok && rs_ok && elapsed < Duration::from_secs(300),
        format!(
            "pinhole ut {:.2e} ewa {:.2e} (ratio {a_ratio:.2}); fisheye-120 ut {:.2e} ({fish_ratio:.2}x, EWA {}); \
             RS 0.35 ut {:.2e} ({rs_ratio:.2}x), ewa/ut {rs_ewa:.1}; rows {}/{}/{}; {:.1}s",
            base.ut.median,
            base_ewa,
            fish.ut.median,
            if fish.ewa.is_none() { "n/a" } else { "present" },
            rolling.ut.median,
            base.rows.len(),
            fish.rows.len(),
            rolling.rows.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// 4 ---------------------------------------------------------------------------

/// Subpixel column where the row crosses half the box interior value, from
/// the left (`from_left`) or from the right.
fn edge_column(img: &Image, row: usize, from_left: bool) -> Option<f64> {
    let w = img.width();
    let v = |x: usize| img.get(x, row).x;
    let half = 0.5 * v(w / 2);
    let cols: Vec<usize> = if from_left {
        (0..w).collect()
    } else {
        (0..w).rev().collect()
    };
    for pair in cols.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if v(a) < half && v(b) >= half {
            let t = (half - v(a)) / (v(b) - v(a));
            return Some(a as f64 + 0.5 + t * (b as f64 - a as f64));
        }
    }
    None
}

fn rolling_shutter_shear() -> Outcome {
    let scene = make_synthetic_scene(&SyntheticSceneSpec {
        kind: SceneKind::SingleBox,
        count: 6 * 24 * 24,
        extent: 1.0,
        seed: 0,
    })
    .unwrap();
    let size = 128;
    let intr = intrinsics(IntrinsicsModel::Pinhole, 100.0, size);
    let eye = Vector3::new(0.0, 0.0, -5.0);
    let yaw = |deg: f64| {
        let dir = Rotation3::from_axis_angle(&Vector3::y_axis(), deg.to_radians()) * Vector3::z();
        pose(eye, eye + dir)
    };
    let rs = CameraRig::new(intr.clone(), ShutterSpec::rolling(yaw(-6.0), yaw(6.0)));
    let gs = CameraRig::new(intr, ShutterSpec::global(yaw(0.0)));
    let opts = RenderOptions::default();
    let (top, bottom) = (46usize, 82usize);

    let measure = |rig: &CameraRig| -> Option<[f64; 2]> {
        let img = draw(&scene, rig, &opts).color;
        let mut shear = [0.0; 2];
        for (i, from_left) in [true, false].into_iter().enumerate() {
            shear[i] = edge_column(&img, bottom, from_left)? - edge_column(&img, top, from_left)?;
        }
        Some(shear)
    };
    // Front-face vertical edges seen through each row's own pose.
    let analytic = |rig: &CameraRig, x_edge: f64| {
        let column = |row: usize| {
            let pose = rig.pose_at_row(row as f64 + 0.5);
            let still = CameraRig::new(rig.intrinsics.clone(), ShutterSpec::global(pose));
            still.project_point(&Vector3::new(x_edge, 0.0, -1.0)).pixel.x
        };
        column(bottom) - column(top)
    };

    let rs_shear = measure(&rs).ok_or("box edge not found in rolling-shutter render")?;
    let gs_shear = measure(&gs).ok_or("box edge not found in global-shutter render")?;
    let expected = [analytic(&rs, -1.0), analytic(&rs, 1.0)];
    let err = (rs_shear[0] - expected[0]).abs().max((rs_shear[1] - expected[1]).abs());
    let gs_max = gs_shear[0].abs().max(gs_shear[1].abs());
    check(
        err <= 1.0 && gs_max < 0.25,
        format!(
            "RS shear left/right {:.2}/{:.2} px vs analytic {:.2}/{:.2} (err {err:.2} <= 1); global shear {gs_max:.3} px (< 0.25)",
            rs_shear[0], rs_shear[1], expected[0], expected[1]
        ),
    )
}

// 5 ---------------------------------------------------------------------------

fn overlapping_scene(rng: &mut ChaCha8Rng, n: usize) -> Vec<GaussianParticle> {
    (0..n)
        .map(|_| {
            let mut radiance = RadianceCoeffs::from_rgb(Vector3::from_fn(|_, _| rng.random_range(0.0..1.0)));
            for c in radiance.coeffs.iter_mut().skip(1) {
                *c = Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2));
            }
            GaussianParticle::new(
                Vector3::new(
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                    rng.random_range(3.0..5.0),
                ),
                Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Vector4::new(1.5, 0.0, 0.0, 0.0),
                Vector3::from_fn(|_, _| rng.random_range(0.08..0.4)),
                rng.random_range(0.3..0.95),
                radiance,
            )
            .unwrap()
        })
        .collect()
}

fn l1(a: &Image, b: &Image) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum()
}

fn sorting_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rig = CameraRig::new(
        intrinsics(IntrinsicsModel::Pinhole, 40.0, 40),
        ShutterSpec::global(Pose::identity()),
    );
    let with = |mode| RenderOptions {
        sort_mode: mode,
        ..RenderOptions::default()
    };
    let ks = [1, 2, 4, 8, 16];
    let mut identical = true;
    let mut monotone = true;
    let mut max_hits = 0;
    let mut sample = Vec::new();
    for i in 0..20 {
        let scene = overlapping_scene(&mut rng, 40);
        let exact = draw(&scene, &rig, &with(SortMode::PerRayExact));
        max_hits = max_hits.max(*exact.hit_count.iter().max().unwrap());
        let full = draw(&scene, &rig, &with(SortMode::PerRayKBuffer(scene.len())));
        identical &= full.color == exact.color && full.transmittance == exact.transmittance;
        let errors: Vec<f64> = ks
            .iter()
            .map(|&k| {
                l1(
                    &draw(&scene, &rig, &with(SortMode::PerRayKBuffer(k))).color,
                    &exact.color,
                )
            })
            .collect();
        monotone &= errors.windows(2).all(|w| w[1] <= w[0]);
        if i == 0 {
            sample = errors;
        }
    }
    check(
        identical && monotone,
        format!(
            "20 scenes (up to {max_hits} blended hits/ray): full k-buffer bit-identical={identical}, \
             error non-increasing in k={monotone}; scene 0 L1 errors {:?}",
            sample.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>()
        ),
    )
}

// 6 ---------------------------------------------------------------------------

fn conservation_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let scene = overlapping_scene(&mut rng, 60);
    let eye = pose(Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 4.0));
    let moved = pose(Vector3::new(0.2, 0.0, 0.0), Vector3::new(0.2, 0.0, 4.0));
    let models = [
        IntrinsicsModel::Pinhole,
        IntrinsicsModel::PinholeRadial {
            k1: -0.2,
            k2: 0.05,
            k3: 0.0,
            p1: 1e-3,
            p2: -1e-3,
        },
        IntrinsicsModel::FisheyeEquidistant { k: [0.0; 4] },
    ];
    for model in models {
        for shutter in [ShutterSpec::global(eye), ShutterSpec::rolling(eye, moved)] {
            let rig = CameraRig::new(intrinsics(model, 40.0, 48), shutter);
            for mode in [SortMode::TileGlobal, SortMode::PerRayKBuffer(4), SortMode::PerRayExact] {
                for degree in [2, 4] {
                    let opts = RenderOptions {
                        sort_mode: mode,
                        kernel: KernelSpec::new(degree, 3.0).unwrap(),
                        ..RenderOptions::default()
                    };
                    draw(&scene, &rig, &opts);
                }
            }
        }
    }
}

fn compositing_conservation() -> Outcome {
    conservation_sweep();
    let (frames, worst) = *CONSERVATION.lock().unwrap();
    check(
        worst <= 1e-9,
        format!("{frames} rendered images, max |sum(weights) + T - 1| = {worst:.2e} (<=1e-9)"),
    )
}

// 7 ---------------------------------------------------------------------------

fn generalized_kernels() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bitwise = true;
    for r in [1.0, 2.5, 3.0, 4.0] {
        let k = KernelSpec::new(2, r).unwrap();
        for _ in 0..1000 {
            let d2: f64 = rng.random_range(0.0..30.0);
            bitwise &= k.response(d2).to_bits() == (-0.5 * d2).exp().to_bits();
        }
    }
    let at_r: Vec<f64> = [2, 3, 4, 8]
        .iter()
        .map(|&n| KernelSpec::new(n, 3.0).unwrap().response(9.0))
        .collect();
    let spread = at_r.iter().fold(0.0f64, |m, v| m.max((v - at_r[0]).abs()));

    // Nine separated particles in a plane facing the camera.
    let scene: Vec<GaussianParticle> = (0..9)
        .map(|i| {
            let mean = Vector3::new((i % 3) as f64 * 0.8 - 0.8, (i / 3) as f64 * 0.8 - 0.8, 0.0);
            GaussianParticle::isotropic(mean, 0.1, 0.9, Vector3::new(0.8, 0.6, 0.4)).unwrap()
        })
        .collect();
    let rig = CameraRig::new(
        intrinsics(IntrinsicsModel::Pinhole, 200.0, 128),
        ShutterSpec::global(pose(Vector3::new(0.0, 0.0, -4.0), Vector3::zeros())),
    );
    let coverage: Vec<f64> = [2, 3, 4, 8]
        .iter()
        .map(|&n| {
            let opts = RenderOptions {
                kernel: KernelSpec::new(n, 3.0).unwrap(),
                ..RenderOptions::default()
            };
            let frame = draw(&scene, &rig, &opts);
            frame.coverage.iter().map(|&c| c as f64).sum::<f64>() / scene.len() as f64
        })
        .collect();
    let shrinking = coverage.windows(2).all(|w| w[1] < w[0]);
    check(
        bitwise && spread <= 1e-15 && shrinking,
        format!(
            "degree 2 bit-identical to exp(-d^2/2)={bitwise}; response spread at r=3 {spread:.1e}; \
             mean coverage px for degrees 2/3/4/8 = {:.1}/{:.1}/{:.1}/{:.1}",
            coverage[0], coverage[1], coverage[2], coverage[3]
        ),
    )
}

// 8 ---------------------------------------------------------------------------

fn true_scene() -> Vec<GaussianParticle> {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    (0..20)
        .map(|_| {
            GaussianParticle::new(
                Vector3::from_fn(|_, _| rng.random_range(-0.6..0.6)),
                Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Vector4::new(1e-3, 0.0, 0.0, 0.0),
                Vector3::from_fn(|_, _| rng.random_range(0.06..0.22)),
                rng.random_range(0.5..0.95),
                RadianceCoeffs::from_rgb(Vector3::from_fn(|_, _| rng.random_range(0.15..0.85))),
            )
            .unwrap()
        })
        .collect()
}

/// Every parameter moved by 20% of its own scale: the mean by 0.2 of the
/// largest axis in a random direction, scales, opacity and base color by a
/// factor in [0.8, 1.2], and the orientation by a 0.2 rad rotation.
fn perturb(scene: &[GaussianParticle], seed: u64) -> Vec<GaussianParticle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    };
    scene
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.mean += unit(&mut rng) * 0.2 * p.scale().max();
            q.set_scale(p.scale().map(|s| s * rng.random_range(0.8..1.2))).unwrap();
            q.set_opacity((p.opacity() * rng.random_range(0.8..1.2)).min(0.99))
                .unwrap();
            let r = p.rotation();
            let current = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(r[0], r[1], r[2], r[3]));
            let turned = UnitQuaternion::from_scaled_axis(unit(&mut rng) * 0.2) * current;
            q.set_rotation(Vector4::new(turned.w, turned.i, turned.j, turned.k))
                .unwrap();
            let rgb = sh_radiance(&p.radiance, &Vector3::z(), 0);
            q.radiance = RadianceCoeffs::from_rgb(rgb.map(|c| c * rng.random_range(0.8..1.2)));
            q
        })
        .collect()
}

fn ring(n: usize, radius: f64, heights: &[f64], phase: f64) -> Vec<CameraRig> {
    (0..n)
        .map(|i| {
            let a = phase + i as f64 / n as f64 * std::f64::consts::TAU;
            let eye = Vector3::new(radius * a.cos(), heights[i % heights.len()], radius * a.sin());
            CameraRig::new(
                intrinsics(IntrinsicsModel::Pinhole, 150.0, 128),
                ShutterSpec::global(pose(eye, Vector3::zeros())),
            )
        })
        .collect()
}

fn desk_scale_fit() -> Outcome {
    let start = Instant::now();
    let truth = true_scene();
    let opts = RenderOptions::default();
    let views: Vec<(CameraRig, Image)> = ring(16, 4.0, &[-1.2, 0.0, 1.2, 0.6], 0.0)
        .into_iter()
        .map(|rig| {
            let img = draw(&truth, &rig, &opts).color;
            (rig, img)
        })
        .collect();
    let held_out = ring(4, 3.8, &[0.9, -0.4], 0.3);
    let init = perturb(&truth, 81);
    let config = TrainConfig {
        iterations: 2000,
        seed: 8,
        ..TrainConfig::default()
    };

    let psnr_of = |scene: &[GaussianParticle]| -> f64 {
        held_out
            .iter()
            .map(|rig| {
                let target = draw(&truth, rig, &opts).color;
                image_metrics(&draw(scene, rig, &opts).color, &target).unwrap().psnr
            })
            .fold(f64::INFINITY, f64::min)
    };
    let before = psnr_of(&init);
    let a = fit(&init, &views, &config, &opts).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let b = fit(&init, &views, &config, &opts).map_err(|e| e.to_string())?;
    let deterministic = a.loss_history == b.loss_history && a.scene == b.scene;
    let after = psnr_of(&a.scene);
    *TRAINED.lock().unwrap() = Some(a.scene.clone());
    check(
        after >= 35.0 && deterministic && elapsed < Duration::from_secs(600),
        format!(
            "held-out min PSNR {before:.1} dB -> {after:.1} dB (>=35) after 2000 iterations, {} particles, \
             {} densify events, deterministic={deterministic}, {:.1}s per run",
            a.scene.len(),
            a.densify_events,
            elapsed.as_secs_f64()
        ),
    )
}

// 9 ---------------------------------------------------------------------------

fn fisheye_native() -> Outcome {
    let scene = TRAINED.lock().unwrap().clone().unwrap_or_else(true_scene);
    let size = 128u32;
    let rig = CameraRig::new(
        intrinsics(
            IntrinsicsModel::FisheyeEquidistant { k: [0.0; 4] },
            64.0 / 80f64.to_radians(),
            size,
        ),
        ShutterSpec::global(pose(Vector3::new(0.0, 0.3, -1.6), Vector3::zeros())),
    );
    let mut worst: f64 = 0.0;
    for y in 0..=size {
        for x in 0..=size {
            let px = Vector2::new(x as f64, y as f64);
            let ray = rig.pixel_to_ray(&px).map_err(|e| e.to_string())?;
            for dist in [0.5, 3.0] {
                let back = rig.project_point(&ray.at(dist));
                if !back.valid {
                    return Err(format!("pixel {px:?} did not project back"));
                }
                worst = worst.max((back.pixel - px).norm());
            }
        }
    }
    let calls = ewa_call_count();
    let frame = draw(&scene, &rig, &RenderOptions::default());
    let ewa_calls = ewa_call_count() - calls;
    let covered = frame.transmittance.iter().filter(|&&t| t < 0.5).count();
    let ewa_refuses = ewa_project(&scene[0], &rig).is_err();
    check(
        worst <= 1e-3 && ewa_calls == 0 && covered > 0 && ewa_refuses,
        format!(
            "160 deg fisheye: round trip max {worst:.1e} px over {} pixel corners (<=1e-3); \
             EWA calls during render {ewa_calls}; {covered} covered pixels",
            (size + 1) * (size + 1)
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

// Runs without the libtest harness so the criterion lines are printed on every
// `cargo test`, not only on failure.
fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "gradient correctness", gradient_correctness),
        (2, "UT linear exactness", ut_linear_exactness),
        (3, "projection-quality trend", projection_trend),
        (4, "rolling-shutter geometry", rolling_shutter_shear),
        (5, "sorting equivalence", sorting_equivalence),
        (7, "generalized kernels", generalized_kernels),
        (8, "desk-scale fitting", desk_scale_fit),
        (9, "fisheye-native rendering", fisheye_native),
        // Last, so it covers every image rendered above.
        (6, "compositing conservation", compositing_conservation),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());

    let mut lines = Vec::new();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        lines.push((id, name, outcome, secs));
    }
    lines.sort_by_key(|l| l.0);
    let mut failed = Vec::new();
    for (id, name, outcome, secs) in &lines {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(*id);
                ("FAIL", d)
            }
        };
        println!("criterion {id} [{tag}] {name} ({secs:.1}s): {detail}");
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}

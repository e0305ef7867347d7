//! TOML configuration files. Every file carries `schema_version = 1`; the
//! layout is documented in the repository README.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use utsplat::bench::SyntheticSceneSpec;
use utsplat::camera::look_at;
use utsplat::optim::TrainConfig;
use utsplat::particles::MIN_ALPHA;
use utsplat::raster::{DEFAULT_KBUFFER_SIZE, DEFAULT_LOW_PASS, DEFAULT_MIN_TRANSMITTANCE, DEFAULT_TILE_SIZE};
use utsplat::{CameraRig, Intrinsics, IntrinsicsModel, KernelSpec, RenderOptions, ShutterSpec, SortMode, UTParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SortName {
    TileGlobal,
    PerRayKbuffer,
    PerRayExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Pinhole,
    PinholeRadial,
    FisheyeEquidistant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub sort: SortName,
    pub k: usize,
    pub kernel_degree: u32,
    pub kernel_radius: f64,
    pub background: [f64; 3],
    pub sh_degree: usize,
    pub tile_size: usize,
    pub low_pass: f64,
    pub min_alpha: f64,
    pub min_transmittance: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            sort: SortName::PerRayKbuffer,
            k: DEFAULT_KBUFFER_SIZE,
            kernel_degree: 2,
            kernel_radius: 3.0,
            background: [0.0; 3],
            sh_degree: 3,
            tile_size: DEFAULT_TILE_SIZE,
            low_pass: DEFAULT_LOW_PASS,
            min_alpha: MIN_ALPHA,
            min_transmittance: DEFAULT_MIN_TRANSMITTANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtSection {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtSection {
    fn default() -> Self {
        let d = UTParams::default();
        Self {
            alpha: d.alpha(),
            beta: d.beta(),
            kappa: d.kappa(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub name: Option<String>,
    pub model: ModelName,
    /// `[k1, k2, k3, p1, p2]` for `pinhole_radial`, `[k1, k2, k3, k4]` for
    /// `fisheye_equidistant`.
    #[serde(default)]
    pub distortion: Vec<f64>,
    pub width: u32,
    pub height: u32,
    /// `[fx, fy]` in pixels. Exactly one of `focal` and `fov_deg` is required.
    pub focal: Option<[f64; 2]>,
    /// Horizontal field of view in degrees.
    pub fov_deg: Option<f64>,
    /// Defaults to the image center.
    pub principal_point: Option<[f64; 2]>,
    pub pose: PoseConfig,
    /// Pose at the end of the exposure; makes the camera a top-to-bottom
    /// rolling shutter.
    pub pose_end: Option<PoseConfig>,
    /// Target image for `fit`, relative to the views directory. Defaults to
    /// `<name>.png`.
    pub image: Option<PathBuf>,
}

impl CameraConfig {
    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("view_{index:03}"))
    }

    fn intrinsics_model(&self) -> Result<IntrinsicsModel> {
        let d = &self.distortion;
        Ok(match self.model {
            ModelName::Pinhole => {
                if !d.is_empty() {
                    bail!("camera model `pinhole` takes no distortion coefficients");
                }
                IntrinsicsModel::Pinhole
            }
            ModelName::PinholeRadial => {
                let c = match d.len() {
                    0 => [0.0; 5],
                    5 => [d[0], d[1], d[2], d[3], d[4]],
                    n => bail!("`pinhole_radial` distortion is [k1, k2, k3, p1, p2], got {n} values"),
                };
                IntrinsicsModel::PinholeRadial {
                    k1: c[0],
                    k2: c[1],
                    k3: c[2],
                    p1: c[3],
                    p2: c[4],
                }
            }
            ModelName::FisheyeEquidistant => {
                let k = match d.len() {
                    0 => [0.0; 4],
                    4 => [d[0], d[1], d[2], d[3]],
                    n => bail!("`fisheye_equidistant` distortion is [k1, k2, k3, k4], got {n} values"),
                };
                IntrinsicsModel::FisheyeEquidistant { k }
            }
        })
    }

    fn focal(&self) -> Result<Vector2<f64>> {
        match (self.focal, self.fov_deg) {
            (Some(f), None) => Ok(Vector2::from(f)),
            (None, Some(fov)) => {
                if !(fov > 0.0 && fov < 360.0) {
                    bail!("fov_deg must lie in (0, 360), got {fov}");
                }
                let half = 0.5 * fov.to_radians();
                let f = match self.model {
                    ModelName::FisheyeEquidistant => 0.5 * self.width as f64 / half,
                    _ if fov >= 180.0 => bail!("a pinhole field of view must be below 180 degrees, got {fov}"),
                    _ => 0.5 * self.width as f64 / half.tan(),
                };
                Ok(Vector2::new(f, f))
            }
            _ => bail!("give exactly one of `focal` and `fov_deg`"),
        }
    }

    pub fn rig(&self) -> Result<CameraRig> {
        let pp = self
            .principal_point
            .map(Vector2::from)
            .unwrap_or_else(|| Vector2::new(self.width as f64 / 2.0, self.height as f64 / 2.0));
        let intr = Intrinsics::new(self.intrinsics_model()?, self.focal()?, pp, (self.width, self.height))?;
        let pose = |p: &PoseConfig| look_at(&Vector3::from(p.eye), &Vector3::from(p.target), &Vector3::from(p.up));
        let start = pose(&self.pose)?;
        let shutter = match &self.pose_end {
            Some(end) => ShutterSpec::rolling(start, pose(end)?),
            None => ShutterSpec::global(start),
        };
        Ok(CameraRig::new(intr, shutter))
    }
}

/// Camera list for `render` and the views directory of `fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamerasFile {
    pub schema_version: u32,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub ut: UtSection,
    pub cameras: Vec<CameraConfig>,
}

/// Training configuration for `fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub schema_version: u32,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub ut: UtSection,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Second radial coefficient; turns a pinhole into `pinhole_radial`.
    K2,
    /// Lateral camera travel during the exposure, along the camera's right
    /// axis, in scene units.
    RsTranslation,
    FovDeg,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::K2 => "k2",
            SweepParameter::RsTranslation => "rs_translation",
            SweepParameter::FovDeg => "fov_deg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            mc_samples: 500,
            seed: 0,
        }
    }
}

/// Camera sweep for `bench-projection`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub schema_version: u32,
    #[serde(default)]
    pub ut: UtSection,
    #[serde(default)]
    pub bench: BenchSection,
    /// Used when no `--scene` is given.
    pub scene: Option<SyntheticSceneSpec>,
    pub camera: CameraConfig,
    #[serde(default)]
    pub sweep: Vec<SweepConfig>,
}

/// A camera config for one sweep value.
pub fn apply_sweep(base: &CameraConfig, parameter: SweepParameter, value: f64) -> Result<CameraConfig> {
    let mut cam = base.clone();
    match parameter {
        SweepParameter::K2 => match cam.model {
            ModelName::Pinhole => {
                cam.model = ModelName::PinholeRadial;
                cam.distortion = vec![0.0, value, 0.0, 0.0, 0.0];
            }
            ModelName::PinholeRadial => {
                cam.distortion.resize(5, 0.0);
                cam.distortion[1] = value;
            }
            ModelName::FisheyeEquidistant => bail!("a k2 sweep needs a pinhole or pinhole_radial camera"),
        },
        SweepParameter::RsTranslation => {
            let rig = base.rig()?;
            let right = rig.shutter.pose_start().inverse_transform_vector(&Vector3::x());
            let shift = |p: [f64; 3]| (Vector3::from(p) + right * value).into();
            cam.pose_end = Some(PoseConfig {
                eye: shift(cam.pose.eye),
                target: shift(cam.pose.target),
                up: cam.pose.up,
            });
        }
        SweepParameter::FovDeg => {
            cam.focal = None;
            cam.fov_deg = Some(value);
        }
    }
    Ok(cam)
}

pub fn render_options(render: &RenderSection, ut: &UtSection) -> Result<RenderOptions> {
    let opts = RenderOptions {
        sort_mode: match render.sort {
            SortName::TileGlobal => SortMode::TileGlobal,
            SortName::PerRayKbuffer => SortMode::PerRayKBuffer(render.k),
            SortName::PerRayExact => SortMode::PerRayExact,
        },
        kernel: KernelSpec::new(render.kernel_degree, render.kernel_radius)?,
        ut_params: UTParams::new(ut.alpha, ut.beta, ut.kappa)?,
        background: Vector3::from(render.background),
        sh_degree: render.sh_degree,
        tile_size: render.tile_size,
        low_pass: render.low_pass,
        min_alpha: render.min_alpha,
        min_transmittance: render.min_transmittance,
    };
    opts.validate()?;
    Ok(opts)
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!(
            "{}: unsupported schema_version {version} (this build reads version {SCHEMA_VERSION})",
            path.display()
        );
    }
    Ok(())
}

/// Reads and parses a TOML file; errors name the file and the offending field.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn load_cameras(path: &Path) -> Result<CamerasFile> {
    let file: CamerasFile = load(path)?;
    check_version(path, file.schema_version)?;
    if file.cameras.is_empty() {
        bail!("{}: no [[cameras]] entries", path.display());
    }
    Ok(file)
}

pub fn load_fit(path: &Path) -> Result<FitFile> {
    let file: FitFile = load(path)?;
    check_version(path, file.schema_version)?;
    Ok(file)
}

pub fn load_bench(path: &Path) -> Result<BenchFile> {
    let file: BenchFile = load(path)?;
    check_version(path, file.schema_version)?;
    Ok(file)
}

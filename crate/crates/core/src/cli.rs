//! Command-line front end. Every verb is a thin wrapper over a library
//! call: read inputs, run, write files, print one summary line.
//!
//! Exit codes: 0 success, 2 input/output problems, 3 a chain predictor
//! failed, 64 usage or configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::brdf::render;
use crate::chain::{
    compute_irradiance_with, estimate_light, grid_search_rm, run_chain_with, ChainOptions, ChainState,
    OraclePredictors, PassthroughPredictors, PredictorSuite,
};
use crate::config::RunConfig;
use crate::error::{ChordError, Result};
use crate::eval::{evaluate_material, LightBattery};
use crate::height::integrate_normals;
use crate::io::{
    decode_normal_image, normalize_height, read_exr, read_material_dir, read_png, read_rgb_linear, write_exr,
    write_json, write_material_dir, write_png16, write_preview_png, MaterialMeta,
};
use crate::math::Vec3;
use crate::optim::{optimize_material, OptimPredictors};
use crate::types::{ColorSpace, DirectionalLight, MaterialSet, TextureImage, ViewConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PREDICTOR: i32 = 3;
pub const EXIT_CONFIG: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "chordkit", version, about = "Chained SVBRDF decomposition toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the configuration's `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Predictor {
    Passthrough,
    Optim,
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InputSpace {
    Srgb,
    Linear,
}

impl From<InputSpace> for ColorSpace {
    fn from(s: InputSpace) -> Self {
        match s {
            InputSpace::Srgb => ColorSpace::Srgb,
            InputSpace::Linear => ColorSpace::Linear,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a material directory under the configured light.
    Render {
        /// Material directory.
        #[arg(long)]
        material: PathBuf,
    },
    /// Run the three-step decomposition on an RGB image.
    Chain {
        /// RGB image (EXR or PNG).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "passthrough")]
        predictor: Predictor,
        /// Ground-truth material directory for the oracle predictor.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Encoding of a PNG input (EXR is always linear).
        #[arg(long, value_enum)]
        input_space: Option<InputSpace>,
    },
    /// Divide an RGB image by a basecolor.
    Irradiance {
        /// RGB image (EXR or PNG).
        #[arg(long)]
        input: PathBuf,
        /// Basecolor PNG (sRGB).
        #[arg(long)]
        basecolor: PathBuf,
        /// Encoding of a PNG input (EXR is always linear).
        #[arg(long, value_enum)]
        input_space: Option<InputSpace>,
    },
    /// Fit a directional light to an irradiance image and normals.
    EstimateLight {
        /// Irradiance EXR.
        #[arg(long)]
        irradiance: PathBuf,
        /// Normal map PNG, encoded (n + 1) / 2.
        #[arg(long)]
        normal: PathBuf,
    },
    /// Per-pixel roughness/metalness grid search.
    GridsearchRm {
        /// RGB image (EXR or PNG).
        #[arg(long)]
        input: PathBuf,
        /// Basecolor PNG (sRGB).
        #[arg(long)]
        basecolor: PathBuf,
        /// Normal map PNG, encoded (n + 1) / 2.
        #[arg(long)]
        normal: PathBuf,
        /// `light_estimate.json` to use instead of the configured light.
        #[arg(long)]
        light: Option<PathBuf>,
        /// Encoding of a PNG input (EXR is always linear).
        #[arg(long, value_enum)]
        input_space: Option<InputSpace>,
    },
    /// Integrate a normal map into a height field.
    Integrate {
        /// Normal map PNG, encoded (n + 1) / 2.
        #[arg(long)]
        normal: PathBuf,
        /// Height scale; defaults to the configuration's `height_scale`.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Fit a material to an RGB image by gradient descent.
    Optimize {
        /// RGB image (EXR or PNG).
        #[arg(long)]
        input: PathBuf,
        /// Starting material directory (defaults to a uniform gray material).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Encoding of a PNG input (EXR is always linear).
        #[arg(long, value_enum)]
        input_space: Option<InputSpace>,
    },
    /// Compare a predicted material directory against ground truth.
    Eval {
        /// Predicted material directory.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth material directory.
        #[arg(long)]
        gt: PathBuf,
    },
}

/// On-disk form of a light estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightEstimateFile {
    pub schema_version: u32,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub direction: [f64; 3],
    pub radiance: [f64; 3],
    pub intensity_scale: f64,
    pub residual_mse: f64,
    /// True when the irradiance had no signal and an overhead light was used.
    pub fallback: bool,
}

impl LightEstimateFile {
    pub fn from_state(state: &ChainState) -> Self {
        let mut f = Self::new(&state.estimated_light);
        f.fallback = state.light_fallback;
        f
    }

    pub fn new(est: &crate::chain::LightEstimate) -> Self {
        let (az, el) = est.light.angles_deg();
        LightEstimateFile {
            schema_version: 1,
            azimuth_deg: az,
            elevation_deg: el,
            direction: est.light.direction().to_array(),
            radiance: est.light.radiance().to_array(),
            intensity_scale: est.intensity_scale,
            residual_mse: est.residual_mse,
            fallback: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ChordError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ChordError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn light(&self) -> Result<DirectionalLight> {
        DirectionalLight::new(Vec3::from_array(self.direction).normalize(), self.radiance)
    }
}

pub fn exit_code(e: &ChordError) -> i32 {
    match e {
        ChordError::Config(_) => EXIT_CONFIG,
        ChordError::Predictor { .. } => EXIT_PREDICTOR,
        _ => EXIT_IO,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("chordkit: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns its summary line.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut config = match &cli.common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            ChordError::Io { path, source } => ChordError::Config(format!("{}: {source}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = Some(seed);
    }
    if let Some(seed) = config.seed {
        config.optimizer.rng_seed = seed;
    }
    let out = cli.common.out.clone().or_else(|| config.output_dir.clone());
    match cli.common.threads {
        Some(0) => Err(ChordError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ChordError::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(&cli.command, &config, out.as_deref())),
        None => dispatch(&cli.command, &config, out.as_deref()),
    }
}

fn require_out(out: Option<&Path>) -> Result<&Path> {
    out.ok_or_else(|| ChordError::Config("an output directory is required (--out or output_dir)".into()))
}

fn read_normal_png(path: &Path) -> Result<TextureImage> {
    decode_normal_image(&read_png(path, ColorSpace::Linear)?.to_rgb())
}

fn dispatch(cmd: &Command, config: &RunConfig, out: Option<&Path>) -> Result<String> {
    match cmd {
        Command::Render { material } => {
            let mat = read_material_dir(material)?;
            let out = require_out(out)?;
            let light = config.light()?;
            let img = render(&mat, &light, &ViewConfig::default())?;
            write_exr(&out.join("render.exr"), &img)?;
            write_preview_png(&out.join("render.png"), &img)?;
            Ok(format!("render: {}x{} -> {}", img.width(), img.height(), out.display()))
        }
        Command::Chain {
            input,
            predictor,
            gt,
            input_space,
        } => {
            let rgb = read_rgb_linear(input, input_space.map(Into::into))?;
            let out = require_out(out)?;
            let suite: Box<dyn PredictorSuite> = match predictor {
                Predictor::Passthrough => Box::new(PassthroughPredictors),
                Predictor::Optim => Box::new(OptimPredictors {
                    config: config.optimizer.clone(),
                    light: config.light()?,
                }),
                Predictor::Oracle => {
                    let gt = gt
                        .as_ref()
                        .ok_or_else(|| ChordError::Config("--predictor oracle needs --gt <dir>".into()))?;
                    Box::new(OraclePredictors {
                        truth: read_material_dir(gt)?,
                    })
                }
            };
            let opts = ChainOptions {
                irradiance_mode: config.irradiance_mode(),
                height_scale: config.height_scale,
                known_light: None,
            };
            let (mat, state) = run_chain_with(&rgb, suite.as_ref(), &config.search_space()?, &opts)?;
            write_material_dir(out, &mat, 1.0)?;
            write_exr(&out.join("irradiance.exr"), &state.irradiance)?;
            write_png16(&out.join("rm_r.png"), &state.rm_roughness)?;
            write_png16(&out.join("rm_m.png"), &state.rm_metalness)?;
            let est = LightEstimateFile::from_state(&state);
            write_json(&out.join("light_estimate.json"), &est)?;
            info!("light estimate: {est:?}");
            Ok(format!(
                "chain: {}x{}, light azimuth {:.2} elevation {:.2}{} -> {}",
                rgb.width(),
                rgb.height(),
                est.azimuth_deg,
                est.elevation_deg,
                if est.fallback { " (fallback)" } else { "" },
                out.display()
            ))
        }
        Command::Irradiance {
            input,
            basecolor,
            input_space,
        } => {
            let rgb = read_rgb_linear(input, input_space.map(Into::into))?;
            let b = read_rgb_linear(basecolor, None)?;
            let out = require_out(out)?;
            let irr = compute_irradiance_with(&rgb, &b, config.irradiance_mode())?;
            write_exr(&out.join("irradiance.exr"), &irr)?;
            Ok(format!("irradiance: mean {:.6} -> {}", irr.mean(), out.display()))
        }
        Command::EstimateLight { irradiance, normal } => {
            let irr = read_exr(irradiance, 1)?;
            let n = read_normal_png(normal)?;
            let out = require_out(out)?;
            let est = LightEstimateFile::new(&estimate_light(&irr, &n)?);
            write_json(&out.join("light_estimate.json"), &est)?;
            Ok(format!(
                "estimate-light: azimuth {:.2} elevation {:.2} residual {:.3e}",
                est.azimuth_deg, est.elevation_deg, est.residual_mse
            ))
        }
        Command::GridsearchRm {
            input,
            basecolor,
            normal,
            light,
            input_space,
        } => {
            let rgb = read_rgb_linear(input, input_space.map(Into::into))?;
            let b = read_rgb_linear(basecolor, None)?;
            let n = read_normal_png(normal)?;
            let out = require_out(out)?;
            let light = match light {
                Some(p) => LightEstimateFile::load(p)?.light()?,
                None => config.light()?,
            };
            let (r, m) = grid_search_rm(&rgb, &b, &n, &light, &config.search_space()?)?;
            write_png16(&out.join("rm_r.png"), &r)?;
            write_png16(&out.join("rm_m.png"), &m)?;
            let metal = m.data().iter().filter(|&&v| v == 1.0).count();
            Ok(format!("gridsearch-rm: {metal} metallic pixels of {} -> {}", m.pixel_count(), out.display()))
        }
        Command::Integrate { normal, scale } => {
            let n = read_normal_png(normal)?;
            let out = require_out(out)?;
            let s = scale.unwrap_or(config.height_scale);
            if !(s > 0.0 && s.is_finite()) {
                return Err(ChordError::Config(format!("--scale must be > 0, got {s}")));
            }
            let h = integrate_normals(&n, s)?;
            write_exr(&out.join("height.exr"), &h)?;
            let (img, lo, hi) = normalize_height(&h)?;
            write_png16(&out.join("height.png"), &img)?;
            write_json(
                &out.join("meta.json"),
                &MaterialMeta {
                    schema_version: 1,
                    height_min: lo,
                    height_max: hi,
                    pixel_scale: 1.0,
                },
            )?;
            Ok(format!("integrate: height range [{lo:.6}, {hi:.6}] -> {}", out.display()))
        }
        Command::Optimize {
            input,
            init,
            input_space,
        } => {
            let rgb = read_rgb_linear(input, input_space.map(Into::into))?;
            let out = require_out(out)?;
            let (w, h) = rgb.dims();
            let init = match init {
                Some(dir) => read_material_dir(dir)?,
                None => MaterialSet::uniform(w, h, [0.5; 3], 0.5, 0.0)?,
            };
            let res = optimize_material(&rgb, &config.light()?, &init, &config.optimizer)?;
            write_material_dir(out, &res.material, 1.0)?;
            write_json(&out.join("objective.json"), &res.objective)?;
            Ok(format!(
                "optimize: objective {:.6e} -> {:.6e} after {} iterations -> {}",
                res.objective[0],
                res.objective.last().copied().unwrap_or(f64::NAN),
                res.objective.len() - 1,
                out.display()
            ))
        }
        Command::Eval { pred, gt } => {
            let p = read_material_dir(pred)?;
            let g = read_material_dir(gt)?;
            let report = evaluate_material(&p, &g, &LightBattery::standard())?;
            let fmt = |v: f64| if v.is_infinite() { "inf".to_string() } else { format!("{v:.2}") };
            let summary = format!(
                "eval: basecolor {} normal {} roughness {} metalness {} height {} relit {} dB",
                fmt(report.per_channel.basecolor.psnr_db),
                fmt(report.per_channel.normal.psnr_db),
                fmt(report.per_channel.roughness.psnr_db),
                fmt(report.per_channel.metalness.psnr_db),
                fmt(report.per_channel.height.psnr_db),
                fmt(report.relit.psnr_db),
            );
            match out {
                Some(dir) => write_json(&dir.join("eval.json"), &report)?,
                None => println!("{}", report.to_json_pretty()),
            }
            Ok(summary)
        }
    }
}

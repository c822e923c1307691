//! The three-step decomposition chain and the conditioning representations
//! computed between its steps.

use std::f64::consts::PI;

use log::{debug, warn};
use rayon::prelude::*;

use crate::brdf::{Geometry, DIELECTRIC_F0};
use crate::error::{ChordError, Result};
use crate::height::integrate_normals;
use crate::math::Vec3;
use crate::types::{flat_normals, ColorSpace, DirectionalLight, MaterialSet, TextureImage, ViewConfig};

/// Basecolor guard in the irradiance division.
pub const IRRADIANCE_EPS: f64 = 1e-3;
/// Upper clamp applied to irradiance samples.
pub const IRRADIANCE_MAX: f64 = 8.0;

/// Discrete roughness × metalness candidates for the per-pixel search.
#[derive(Clone, Debug, PartialEq)]
pub struct RmSearchSpace {
    roughness_levels: Vec<f64>,
}

impl RmSearchSpace {
    /// 41 roughness levels `(25 + 5i) / 255` for `i = 0..=40`, binary metalness.
    pub fn standard() -> Self {
        RmSearchSpace {
            roughness_levels: (0..=40).map(|i| quantize((25 + 5 * i) as f64 / 255.0)).collect(),
        }
    }

    /// Custom roughness levels; must be strictly ascending within `[0, 1]`.
    pub fn with_levels(levels: &[f64]) -> Result<Self> {
        if levels.is_empty() {
            return Err(ChordError::Config("roughness levels must not be empty".into()));
        }
        if levels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ChordError::Config("roughness levels must lie in [0, 1]".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChordError::Config("roughness levels must be strictly ascending".into()));
        }
        Ok(RmSearchSpace {
            roughness_levels: levels.iter().map(|&v| quantize(v)).collect(),
        })
    }

    pub fn roughness_levels(&self) -> &[f64] {
        &self.roughness_levels
    }

    pub fn metalness_levels(&self) -> [f64; 2] {
        [0.0, 1.0]
    }

    pub fn len(&self) -> usize {
        self.roughness_levels.len() * 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_roughness(&self, r: f32) -> bool {
        self.roughness_levels.contains(&(r as f64))
    }
}

impl Default for RmSearchSpace {
    fn default() -> Self {
        Self::standard()
    }
}

/// Levels are stored at image precision so a map written from them
/// reproduces the candidate exactly.
fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum IrradianceMode {
    /// Channel mean of the per-channel ratio (single-channel output).
    #[default]
    Mean,
    /// Keep the per-channel ratio (three-channel output).
    PerChannel,
}

/// Approximate irradiance `rgb / max(basecolor, ε)`, clamped to `[0, 8]`
/// and reduced to one channel.
pub fn compute_irradiance(rgb: &TextureImage, basecolor: &TextureImage) -> Result<TextureImage> {
    compute_irradiance_with(rgb, basecolor, IrradianceMode::Mean)
}

pub fn compute_irradiance_with(
    rgb: &TextureImage,
    basecolor: &TextureImage,
    mode: IrradianceMode,
) -> Result<TextureImage> {
    rgb.expect_channels("rgb", 3)?;
    basecolor.expect_channels("basecolor", 3)?;
    basecolor.expect_dims("basecolor", rgb.dims())?;
    if rgb.space() != ColorSpace::Linear || basecolor.space() != ColorSpace::Linear {
        return Err(ChordError::ColorSpace("irradiance needs linear inputs"));
    }
    let (w, h) = rgb.dims();
    let out_ch = match mode {
        IrradianceMode::Mean => 1,
        IrradianceMode::PerChannel => 3,
    };
    let mut data = vec![0f32; w * h * out_ch];
    data.par_chunks_mut(w * out_ch).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let i = y * w + x;
            let c = rgb.pixel(i);
            let b = basecolor.pixel(i);
            let ratio = |k: usize| {
                (c[k] as f64 / (b[k] as f64).max(IRRADIANCE_EPS)).clamp(0.0, IRRADIANCE_MAX)
            };
            match mode {
                IrradianceMode::Mean => {
                    row[x] = ((ratio(0) + ratio(1) + ratio(2)) / 3.0) as f32;
                }
                IrradianceMode::PerChannel => {
                    for k in 0..3 {
                        row[x * 3 + k] = ratio(k) as f32;
                    }
                }
            }
        }
    });
    TextureImage::new(w, h, out_ch, data, ColorSpace::Linear)
}

/// Directional light fitted to an irradiance image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightEstimate {
    pub light: DirectionalLight,
    /// Least-squares gain `s` in `irradiance ≈ s · (n·l)+`.
    pub intensity_scale: f64,
    pub residual_mse: f64,
}

pub const LIGHT_AZIMUTH_STEPS: usize = 72;
pub const LIGHT_ELEVATION_STEPS: usize = 16;
pub const LIGHT_MIN_ELEVATION_DEG: f64 = 15.0;
pub const LIGHT_REFINE_DIVISIONS: i32 = 8;

/// Sufficient statistics of the irradiance/normal pair for the Lambertian fit.
struct LightFit {
    nx: Vec<f64>,
    ny: Vec<f64>,
    nz: Vec<f64>,
    y: Vec<f64>,
    sum_y2: f64,
}

impl LightFit {
    /// Residual sum of squares and optimal gain for direction `l`.
    fn evaluate(&self, l: Vec3) -> (f64, f64) {
        let mut cy = 0.0;
        let mut cc = 0.0;
        for i in 0..self.y.len() {
            let c = (self.nx[i] * l.x + self.ny[i] * l.y + self.nz[i] * l.z).max(0.0);
            cy += c * self.y[i];
            cc += c * c;
        }
        if cc <= 0.0 || cy <= 0.0 {
            return (self.sum_y2, 0.0);
        }
        let scale = cy / cc;
        ((self.sum_y2 - cy * scale).max(0.0), scale)
    }

    /// Residual sum of squares evaluated directly, without cancellation.
    fn residual(&self, l: Vec3, scale: f64) -> f64 {
        (0..self.y.len())
            .map(|i| {
                let c = (self.nx[i] * l.x + self.ny[i] * l.y + self.nz[i] * l.z).max(0.0);
                let d = scale * c - self.y[i];
                d * d
            })
            .sum()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    az: f64,
    el: f64,
}

impl Candidate {
    fn dir(self) -> Vec3 {
        Vec3::from_spherical(self.az.to_radians(), self.el.to_radians())
    }
}

/// Picks the lowest residual; residuals within a relative `1e-9` of each
/// other tie, and ties keep the earlier candidate.
fn best_of(fit: &LightFit, cands: &[Candidate]) -> (Candidate, f64, f64) {
    let scored: Vec<(f64, f64)> = cands.par_iter().map(|c| fit.evaluate(c.dir())).collect();
    let tol = 1e-9 * fit.sum_y2;
    let mut best = 0;
    for (i, s) in scored.iter().enumerate().skip(1) {
        if s.0 < scored[best].0 - tol {
            best = i;
        }
    }
    (cands[best], scored[best].0, scored[best].1)
}

/// Fits a directional light to an irradiance image given normals.
///
/// Minimizes `Σ (s·max(n·l, 0) − irr)²` over a 72 × 16 azimuth/elevation
/// grid (elevation 15°–90°) with the gain `s` solved in closed form, then
/// refines once around the best cell at 1/8 of the grid step. Candidates are
/// visited from the zenith downward, so when the data cannot tell directions
/// apart (e.g. flat normals) the highest elevation wins.
///
/// The fitted light's radiance is `π·s / (1 − 0.04)`, i.e. the white
/// radiance under which a rough dielectric would produce that gain.
pub fn estimate_light(irradiance: &TextureImage, normal: &TextureImage) -> Result<LightEstimate> {
    normal.expect_channels("normal", 3)?;
    normal.expect_dims("normal", irradiance.dims())?;
    let irr = irradiance.channel_mean();
    let n = irr.pixel_count();
    let mut fit = LightFit {
        nx: Vec::with_capacity(n),
        ny: Vec::with_capacity(n),
        nz: Vec::with_capacity(n),
        y: irr.data().iter().map(|&v| v as f64).collect(),
        sum_y2: 0.0,
    };
    for p in normal.data().chunks_exact(3) {
        let v = Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64).normalize();
        fit.nx.push(v.x);
        fit.ny.push(v.y);
        fit.nz.push(v.z);
    }
    fit.sum_y2 = fit.y.iter().map(|v| v * v).sum();
    if !(fit.sum_y2 > 0.0) || fit.y.iter().all(|&v| v <= 0.0) {
        return Err(ChordError::NoShadingSignal);
    }

    let az_step = 360.0 / LIGHT_AZIMUTH_STEPS as f64;
    let el_step = (90.0 - LIGHT_MIN_ELEVATION_DEG) / (LIGHT_ELEVATION_STEPS - 1) as f64;
    let mut coarse = Vec::with_capacity(LIGHT_AZIMUTH_STEPS * LIGHT_ELEVATION_STEPS);
    coarse.push(Candidate { az: 0.0, el: 90.0 });
    for j in (0..LIGHT_ELEVATION_STEPS - 1).rev() {
        let el = LIGHT_MIN_ELEVATION_DEG + j as f64 * el_step;
        for i in 0..LIGHT_AZIMUTH_STEPS {
            coarse.push(Candidate { az: i as f64 * az_step, el });
        }
    }
    let (c0, res0, _) = best_of(&fit, &coarse);
    debug!("coarse light fit az={:.2} el={:.2} rss={res0:.3e}", c0.az, c0.el);

    let div = LIGHT_REFINE_DIVISIONS;
    let mut fine = Vec::with_capacity(((2 * div + 1) * (2 * div + 1)) as usize);
    fine.push(c0);
    for j in (-div..=div).rev() {
        let el = c0.el + j as f64 * el_step / div as f64;
        if !(LIGHT_MIN_ELEVATION_DEG..=90.0).contains(&el) {
            continue;
        }
        for i in -div..=div {
            let az = (c0.az + i as f64 * az_step / div as f64).rem_euclid(360.0);
            fine.push(Candidate { az, el });
        }
    }
    let (c1, _, scale) = best_of(&fit, &fine);
    let scale = if scale > 0.0 {
        scale
    } else {
        return Err(ChordError::NoShadingSignal);
    };
    let rss = fit.residual(c1.dir(), scale);
    let radiance = PI * scale / (1.0 - DIELECTRIC_F0);
    Ok(LightEstimate {
        light: DirectionalLight::new(c1.dir().normalize(), [radiance; 3])?,
        intensity_scale: scale,
        residual_mse: rss / n as f64,
    })
}

/// Per-pixel exhaustive search over `space` minimizing the squared RGB error
/// between the rendered candidate and `rgb`. Returns `(roughness, metalness)`
/// maps. Ties keep the lowest roughness, then metalness 0.
pub fn grid_search_rm(
    rgb: &TextureImage,
    basecolor: &TextureImage,
    normal: &TextureImage,
    light: &DirectionalLight,
    space: &RmSearchSpace,
) -> Result<(TextureImage, TextureImage)> {
    rgb.expect_channels("rgb", 3)?;
    basecolor.expect_channels("basecolor", 3)?;
    normal.expect_channels("normal", 3)?;
    basecolor.expect_dims("basecolor", rgb.dims())?;
    normal.expect_dims("normal", rgb.dims())?;
    let (w, h) = rgb.dims();
    let view = ViewConfig::default().direction();
    let l = light.direction();
    let e = light.radiance();
    let levels = space.roughness_levels();
    let mut r_out = vec![0f32; w * h];
    let mut m_out = vec![0f32; w * h];
    r_out
        .par_chunks_mut(w)
        .zip(m_out.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (r_row, m_row))| {
            for x in 0..w {
                let i = y * w + x;
                let target = rgb.rgb(i);
                let b = basecolor.rgb(i);
                let geom = Geometry::new(normal.rgb(i), l, view);
                let mut best = (levels[0], 0.0);
                if geom.lit() {
                    let mut best_err = f64::INFINITY;
                    for &r in levels {
                        let lobe = geom.specular_lobe(r);
                        for m in [0.0, 1.0] {
                            let c = geom.shade(b, m, lobe, e);
                            let d = c - target;
                            let err = d.x * d.x + d.y * d.y + d.z * d.z;
                            if err < best_err {
                                best_err = err;
                                best = (r, m);
                            }
                        }
                    }
                }
                r_row[x] = best.0 as f32;
                m_row[x] = best.1 as f32;
            }
        });
    Ok((
        TextureImage::new(w, h, 1, r_out, ColorSpace::Linear)?,
        TextureImage::new(w, h, 1, m_out, ColorSpace::Linear)?,
    ))
}

/// Inputs available to the normal step.
pub struct NormalStep<'a> {
    pub rgb: &'a TextureImage,
    pub irradiance: &'a TextureImage,
    pub basecolor: &'a TextureImage,
}

/// Inputs available to the roughness/metalness step.
pub struct RmStep<'a> {
    pub rgb: &'a TextureImage,
    pub rm_roughness: &'a TextureImage,
    pub rm_metalness: &'a TextureImage,
    pub basecolor: &'a TextureImage,
    pub normal: &'a TextureImage,
    pub light: &'a DirectionalLight,
}

/// The learned part of the chain. Each step sees the RGB input plus the
/// representations computed from earlier outputs.
pub trait PredictorSuite {
    fn predict_basecolor(&self, rgb: &TextureImage) -> Result<TextureImage>;
    fn predict_normal(&self, step: &NormalStep<'_>) -> Result<TextureImage>;
    fn predict_rm(&self, step: &RmStep<'_>) -> Result<(TextureImage, TextureImage)>;
}

/// Basecolor := clamped input, flat normals, roughness/metalness := grid
/// search result.
#[derive(Clone, Copy, Debug, Default)]
pub struct PassthroughPredictors;

impl PredictorSuite for PassthroughPredictors {
    fn predict_basecolor(&self, rgb: &TextureImage) -> Result<TextureImage> {
        rgb.map(|v| v.clamp(0.0, 1.0))
    }

    fn predict_normal(&self, step: &NormalStep<'_>) -> Result<TextureImage> {
        let (w, h) = step.rgb.dims();
        flat_normals(w, h)
    }

    fn predict_rm(&self, step: &RmStep<'_>) -> Result<(TextureImage, TextureImage)> {
        Ok((step.rm_roughness.clone(), step.rm_metalness.clone()))
    }
}

/// Returns the basecolor and normals of a known material and passes the grid
/// search result through for roughness/metalness.
#[derive(Clone, Debug)]
pub struct OraclePredictors {
    pub truth: MaterialSet,
}

impl PredictorSuite for OraclePredictors {
    fn predict_basecolor(&self, _rgb: &TextureImage) -> Result<TextureImage> {
        Ok(self.truth.basecolor().clone())
    }

    fn predict_normal(&self, _step: &NormalStep<'_>) -> Result<TextureImage> {
        Ok(self.truth.normal().clone())
    }

    fn predict_rm(&self, step: &RmStep<'_>) -> Result<(TextureImage, TextureImage)> {
        Ok((step.rm_roughness.clone(), step.rm_metalness.clone()))
    }
}

#[derive(Clone, Debug)]
pub struct ChainOptions {
    pub irradiance_mode: IrradianceMode,
    /// Height units per unit of normal slope when integrating heights.
    pub height_scale: f64,
    /// Shade the grid search with this light instead of the estimate.
    /// The estimate is still computed and reported.
    pub known_light: Option<DirectionalLight>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            irradiance_mode: IrradianceMode::Mean,
            height_scale: 1.0,
            known_light: None,
        }
    }
}

/// Intermediate representations produced by the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub irradiance: TextureImage,
    pub rm_roughness: TextureImage,
    pub rm_metalness: TextureImage,
    pub estimated_light: LightEstimate,
    /// Light actually used by the grid search.
    pub search_light: DirectionalLight,
    /// Set when the irradiance carried no signal and an overhead light was
    /// substituted for the estimate.
    pub light_fallback: bool,
}

pub fn run_chain(
    rgb: &TextureImage,
    predictors: &dyn PredictorSuite,
    space: &RmSearchSpace,
) -> Result<(MaterialSet, ChainState)> {
    run_chain_with(rgb, predictors, space, &ChainOptions::default())
}

fn step_err(step: &'static str) -> impl Fn(ChordError) -> ChordError {
    move |e| match e {
        ChordError::Predictor { .. } => e,
        other => ChordError::Predictor {
            step,
            message: other.to_string(),
        },
    }
}

fn check_output(step: &'static str, img: &TextureImage, channels: usize, dims: (usize, usize)) -> Result<()> {
    let fail = |message: String| ChordError::Predictor { step, message };
    if img.channels() != channels {
        return Err(fail(format!("expected {channels} channel(s), got {}", img.channels())));
    }
    if img.dims() != dims {
        return Err(fail(format!(
            "output is {}x{}, input is {}x{}",
            img.width(),
            img.height(),
            dims.0,
            dims.1
        )));
    }
    if img.space() != ColorSpace::Linear {
        return Err(fail("output must be linear".into()));
    }
    Ok(())
}

/// Runs basecolor → irradiance → normal → light estimate → grid search →
/// roughness/metalness → height integration.
pub fn run_chain_with(
    rgb: &TextureImage,
    predictors: &dyn PredictorSuite,
    space: &RmSearchSpace,
    opts: &ChainOptions,
) -> Result<(MaterialSet, ChainState)> {
    rgb.expect_channels("rgb", 3)?;
    if rgb.space() != ColorSpace::Linear {
        return Err(ChordError::ColorSpace("chain input must be linear"));
    }
    let dims = rgb.dims();

    let basecolor = predictors.predict_basecolor(rgb).map_err(step_err("basecolor"))?;
    check_output("basecolor", &basecolor, 3, dims)?;

    let irradiance = compute_irradiance_with(rgb, &basecolor, opts.irradiance_mode)?;

    let normal = predictors
        .predict_normal(&NormalStep {
            rgb,
            irradiance: &irradiance,
            basecolor: &basecolor,
        })
        .map_err(step_err("normal"))?;
    check_output("normal", &normal, 3, dims)?;

    let (estimated_light, light_fallback) = match estimate_light(&irradiance, &normal) {
        Ok(est) => (est, false),
        Err(ChordError::NoShadingSignal) => {
            warn!("irradiance carries no shading signal; assuming an overhead light");
            let light = DirectionalLight::new(Vec3::Z, [PI; 3])?;
            let est = LightEstimate {
                light,
                intensity_scale: 1.0 - DIELECTRIC_F0,
                residual_mse: irradiance.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>()
                    / irradiance.data().len() as f64,
            };
            (est, true)
        }
        Err(e) => return Err(e),
    };
    let search_light = opts.known_light.unwrap_or(estimated_light.light);

    let (rm_r, rm_m) = grid_search_rm(rgb, &basecolor, &normal, &search_light, space)?;

    let (roughness, metalness) = predictors
        .predict_rm(&RmStep {
            rgb,
            rm_roughness: &rm_r,
            rm_metalness: &rm_m,
            basecolor: &basecolor,
            normal: &normal,
            light: &search_light,
        })
        .map_err(step_err("roughness-metalness"))?;
    check_output("roughness-metalness", &roughness, 1, dims)?;
    check_output("roughness-metalness", &metalness, 1, dims)?;

    let height = integrate_normals(&normal, opts.height_scale)?;
    let material = MaterialSet::new(basecolor, normal, height, roughness, metalness).map_err(|e| {
        ChordError::Predictor {
            step: "assemble",
            message: e.to_string(),
        }
    })?;
    Ok((
        material,
        ChainState {
            irradiance,
            rm_roughness: rm_r,
            rm_metalness: rm_m,
            estimated_light,
            search_light,
            light_fallback,
        },
    ))
}

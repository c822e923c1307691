//! Image-space losses and a reference material estimator that runs
//! projected gradient descent on basecolor, normal, roughness and metalness
//! against a single observed render.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use log::debug;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brdf::{render, shade_pixel, shade_pixel_with_jacobian, BrdfSample};
use crate::chain::{NormalStep, PredictorSuite, RmStep};
use crate::error::{ChordError, Result};
use crate::height::{integrate_normals, MIN_NORMAL_Z};
use crate::math::Vec3;
use crate::types::{ColorSpace, DirectionalLight, MaterialSet, TextureImage, ViewConfig};

/// Maximum number of step halvings tried before a pixel's update is rejected.
pub const MAX_HALVINGS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub pixel: f64,
    pub normal: f64,
    pub render: f64,
    /// Kept for a perceptual term; no such term is computed here.
    pub perceptual: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            pixel: 1.0,
            normal: 1.0,
            render: 1.0,
            perceptual: 0.005,
        }
    }
}

/// Which parameter groups the estimator is allowed to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamMask {
    pub basecolor: bool,
    pub normal: bool,
    pub roughness: bool,
    pub metalness: bool,
}

impl ParamMask {
    pub const ALL: ParamMask = ParamMask {
        basecolor: true,
        normal: true,
        roughness: true,
        metalness: true,
    };
    pub const NONE: ParamMask = ParamMask {
        basecolor: false,
        normal: false,
        roughness: false,
        metalness: false,
    };
}

impl Default for ParamMask {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub render_light_samples: usize,
    pub rng_seed: u64,
    pub weights: LossWeights,
    /// Elevation range (degrees) for randomly sampled render-loss lights.
    pub light_elevation_deg: [f64; 2],
    pub optimize: ParamMask,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            step_size: 0.1,
            iterations: 200,
            render_light_samples: 8,
            rng_seed: 0,
            weights: LossWeights::default(),
            light_elevation_deg: [30.0, 75.0],
            optimize: ParamMask::ALL,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(ChordError::Config(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if self.render_light_samples == 0 {
            return Err(ChordError::Config("render_light_samples must be at least 1".into()));
        }
        let [lo, hi] = self.light_elevation_deg;
        if !(lo > 0.0 && lo <= hi && hi <= 90.0) {
            return Err(ChordError::Config(format!(
                "light_elevation_deg must satisfy 0 < lo <= hi <= 90, got [{lo}, {hi}]"
            )));
        }
        let w = &self.weights;
        if [w.pixel, w.normal, w.render, w.perceptual].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(ChordError::Config("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub pixel_l1: f64,
    pub normal_cosine: f64,
    pub render_l1: f64,
    pub total: f64,
    /// Mean absolute error of each material channel plus the two image terms.
    pub per_channel: BTreeMap<String, f64>,
}

fn mean_abs_diff(a: &TextureImage, b: &TextureImage) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>()
        / a.data().len() as f64
}

fn check_same_dims(pred: &MaterialSet, gt: &MaterialSet) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(ChordError::mismatch("predicted material", pred.dims(), gt.dims()));
    }
    Ok(())
}

/// Mean absolute difference over every basecolor, roughness and metalness
/// sample. Each material stores 5 samples per pixel (3 basecolor, 1
/// roughness, 1 metalness), so basecolor carries 3/5 of the weight.
pub fn pixel_l1_loss(pred: &MaterialSet, gt: &MaterialSet) -> Result<f64> {
    check_same_dims(pred, gt)?;
    let n = pred.basecolor().pixel_count() as f64;
    let b = mean_abs_diff(pred.basecolor(), gt.basecolor()) * 3.0 * n;
    let r = mean_abs_diff(pred.roughness(), gt.roughness()) * n;
    let m = mean_abs_diff(pred.metalness(), gt.metalness()) * n;
    Ok((b + r + m) / (5.0 * n))
}

/// Mean of `1 − n̂·n`; lies in `[0, 2]`.
pub fn normal_cosine_loss(pred: &TextureImage, gt: &TextureImage) -> Result<f64> {
    pred.expect_channels("predicted normal", 3)?;
    gt.expect_channels("normal", 3)?;
    gt.expect_dims("normal", pred.dims())?;
    let n = pred.pixel_count();
    Ok((0..n).map(|i| 1.0 - pred.rgb(i).dot(gt.rgb(i))).sum::<f64>() / n as f64)
}

/// Mean over lights, pixels and color channels of `|R(pred) − R(gt)|`.
pub fn render_l1_loss(pred: &MaterialSet, gt: &MaterialSet, lights: &[DirectionalLight]) -> Result<f64> {
    check_same_dims(pred, gt)?;
    if lights.is_empty() {
        return Err(ChordError::InvalidLight("render loss needs at least one light".into()));
    }
    let view = ViewConfig::default();
    let mut sum = 0.0;
    for light in lights {
        sum += mean_abs_diff(&render(pred, light, &view)?, &render(gt, light, &view)?);
    }
    Ok(sum / lights.len() as f64)
}

/// Random directional light: azimuth uniform in `[0, 2π)`, elevation uniform
/// in `[30°, 75°]`, white radiance `π`.
pub fn sample_random_light<R: Rng>(rng: &mut R) -> DirectionalLight {
    sample_random_light_in(rng, [30.0, 75.0])
}

/// Like [`sample_random_light`] with a custom elevation range in degrees.
pub fn sample_random_light_in<R: Rng>(rng: &mut R, elevation_deg: [f64; 2]) -> DirectionalLight {
    let az = rng.gen_range(0.0..TAU);
    let [lo, hi] = elevation_deg;
    let el = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let dir = Vec3::from_spherical(az, el.to_radians());
    DirectionalLight::new(dir, [PI; 3]).expect("sampled elevation is above the horizon")
}

/// Pixel, normal and render terms; the render term uses
/// `config.render_light_samples` lights freshly drawn from `rng`.
pub fn total_loss<R: Rng>(
    pred: &MaterialSet,
    gt: &MaterialSet,
    config: &OptimConfig,
    rng: &mut R,
) -> Result<LossReport> {
    config.validate()?;
    check_same_dims(pred, gt)?;
    let lights: Vec<DirectionalLight> = (0..config.render_light_samples)
        .map(|_| sample_random_light_in(rng, config.light_elevation_deg))
        .collect();
    let pixel_l1 = pixel_l1_loss(pred, gt)?;
    let normal_cosine = normal_cosine_loss(pred.normal(), gt.normal())?;
    let render_l1 = render_l1_loss(pred, gt, &lights)?;
    let w = &config.weights;
    let total = w.pixel * pixel_l1 + w.normal * normal_cosine + w.render * render_l1;
    let per_channel = BTreeMap::from([
        ("basecolor".to_string(), mean_abs_diff(pred.basecolor(), gt.basecolor())),
        ("roughness".to_string(), mean_abs_diff(pred.roughness(), gt.roughness())),
        ("metalness".to_string(), mean_abs_diff(pred.metalness(), gt.metalness())),
        ("normal".to_string(), normal_cosine),
        ("render".to_string(), render_l1),
    ]);
    Ok(LossReport {
        pixel_l1,
        normal_cosine,
        render_l1,
        total,
        per_channel,
    })
}

/// Optimization state of one pixel. The normal is stored as its tangent
/// offset `(nx, ny)`; `nz` follows from the unit constraint.
#[derive(Clone, Copy, Debug)]
struct PixelParams {
    b: [f64; 3],
    r: f64,
    m: f64,
    nx: f64,
    ny: f64,
}

const MAX_TANGENT_SQ: f64 = 1.0 - MIN_NORMAL_Z * MIN_NORMAL_Z;

impl PixelParams {
    fn normal(&self) -> Vec3 {
        let nz = (1.0 - self.nx * self.nx - self.ny * self.ny).max(0.0).sqrt();
        Vec3::new(self.nx, self.ny, nz)
    }

    fn sample(&self) -> BrdfSample {
        BrdfSample {
            basecolor: Vec3::from_array(self.b),
            normal: self.normal(),
            roughness: self.r,
            metalness: self.m,
        }
    }

    fn project(mut self) -> Self {
        for v in &mut self.b {
            *v = v.clamp(0.0, 1.0);
        }
        self.r = self.r.clamp(0.0, 1.0);
        self.m = self.m.clamp(0.0, 1.0);
        let t2 = self.nx * self.nx + self.ny * self.ny;
        if t2 > MAX_TANGENT_SQ {
            let s = (MAX_TANGENT_SQ / t2).sqrt();
            self.nx *= s;
            self.ny *= s;
        }
        self
    }

    fn from_normal(b: [f64; 3], n: Vec3, r: f64, m: f64) -> Self {
        let n = n.normalize();
        PixelParams {
            b,
            r,
            m,
            nx: n.x,
            ny: n.y,
        }
        .project()
    }

    fn in_range(&self) -> bool {
        self.b.iter().chain([&self.r, &self.m]).all(|v| (0.0..=1.0).contains(v))
            && self.nx * self.nx + self.ny * self.ny <= MAX_TANGENT_SQ * (1.0 + 1e-12)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct PixelGrad {
    b: [f64; 3],
    r: f64,
    m: f64,
    nx: f64,
    ny: f64,
}

/// `sign` with 0 at exact ties.
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Problem<'a> {
    target: &'a TextureImage,
    light: &'a DirectionalLight,
    view: ViewConfig,
    mask: ParamMask,
}

impl Problem<'_> {
    fn pixel_loss(&self, i: usize, p: &PixelParams) -> f64 {
        let c = shade_pixel(&p.sample(), self.light, &self.view);
        let t = self.target.pixel(i);
        ((c.x - t[0] as f64).abs() + (c.y - t[1] as f64).abs() + (c.z - t[2] as f64).abs()) / 3.0
    }

    fn gradient(&self, i: usize, p: &PixelParams) -> Result<PixelGrad> {
        let (c, jac) = shade_pixel_with_jacobian(&p.sample(), self.light, &self.view);
        let t = self.target.pixel(i);
        let g = [
            sign0(c.x - t[0] as f64) / 3.0,
            sign0(c.y - t[1] as f64) / 3.0,
            sign0(c.z - t[2] as f64) / 3.0,
        ];
        let mut out = PixelGrad::default();
        for k in 0..3 {
            if self.mask.basecolor {
                for (j, b) in out.b.iter_mut().enumerate() {
                    *b += g[k] * jac.d_basecolor[k][j];
                }
            }
            if self.mask.roughness {
                out.r += g[k] * jac.d_roughness[k];
            }
            if self.mask.metalness {
                out.m += g[k] * jac.d_metalness[k];
            }
        }
        if self.mask.normal {
            let n = p.normal();
            let mut dn = [0.0; 3];
            for (k, gk) in g.iter().enumerate() {
                for (j, d) in dn.iter_mut().enumerate() {
                    *d += gk * jac.d_normal[k][j];
                }
            }
            out.nx = dn[0] - dn[2] * n.x / n.z;
            out.ny = dn[1] - dn[2] * n.y / n.z;
        }
        let (w, _) = self.target.dims();
        let bad = |param: &'static str| ChordError::NonFiniteGradient {
            x: i % w,
            y: i / w,
            param,
        };
        if !out.b.iter().all(|v| v.is_finite()) {
            return Err(bad("basecolor"));
        }
        if !out.r.is_finite() {
            return Err(bad("roughness"));
        }
        if !out.m.is_finite() {
            return Err(bad("metalness"));
        }
        if !(out.nx.is_finite() && out.ny.is_finite()) {
            return Err(bad("normal"));
        }
        Ok(out)
    }

    /// One projected step with backtracking. Returns the new parameters,
    /// their loss and the step size to start from next time.
    fn step(&self, i: usize, p: PixelParams, loss: f64, step: f64, max_step: f64) -> Result<(PixelParams, f64, f64)> {
        let g = self.gradient(i, &p)?;
        let moving = g.b.iter().chain([&g.r, &g.m, &g.nx, &g.ny]).any(|v| *v != 0.0);
        if !moving {
            return Ok((p, loss, step));
        }
        let mut s = step;
        for _ in 0..=MAX_HALVINGS {
            let cand = PixelParams {
                b: [p.b[0] - s * g.b[0], p.b[1] - s * g.b[1], p.b[2] - s * g.b[2]],
                r: p.r - s * g.r,
                m: p.m - s * g.m,
                nx: p.nx - s * g.nx,
                ny: p.ny - s * g.ny,
            }
            .project();
            let l = self.pixel_loss(i, &cand);
            if l < loss {
                return Ok((cand, l, (2.0 * s).min(max_step)));
            }
            s *= 0.5;
        }
        Ok((p, loss, s.max(f64::MIN_POSITIVE)))
    }
}

/// Result of [`optimize_material`].
#[derive(Clone, Debug)]
pub struct OptimOutcome {
    pub material: MaterialSet,
    /// Mean per-pixel `ℓ1` render error, before the first iteration and after
    /// each one. Never increases.
    pub objective: Vec<f64>,
}

/// Minimizes the mean `ℓ1` error between the render of the material under
/// `light` and `rgb`, starting from `init`.
///
/// The objective separates over pixels, so every pixel takes its own
/// projected subgradient step: on an increase the step is halved up to
/// [`MAX_HALVINGS`] times and the update is dropped if it still does not
/// improve. After each step basecolor, roughness and metalness are clamped
/// to `[0, 1]` and the normal's `z` is kept at or above 0.05. The height of
/// the result is integrated from the final normals.
pub fn optimize_material(
    rgb: &TextureImage,
    light: &DirectionalLight,
    init: &MaterialSet,
    config: &OptimConfig,
) -> Result<OptimOutcome> {
    config.validate()?;
    rgb.expect_channels("rgb", 3)?;
    if rgb.space() != ColorSpace::Linear {
        return Err(ChordError::ColorSpace("optimization target must be linear"));
    }
    init.basecolor().expect_dims("initial material", rgb.dims())?;
    let problem = Problem {
        target: rgb,
        light,
        view: ViewConfig::default(),
        mask: config.optimize,
    };
    let n = rgb.pixel_count();
    let mut state: Vec<(PixelParams, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let b = init.basecolor().rgb(i).to_array();
            let p = PixelParams::from_normal(
                b,
                init.normal_at(i),
                init.roughness().data()[i] as f64,
                init.metalness().data()[i] as f64,
            );
            (p, problem.pixel_loss(i, &p), config.step_size)
        })
        .collect();
    let objective_of = |s: &[(PixelParams, f64, f64)]| s.iter().map(|e| e.1).sum::<f64>() / n as f64;
    let mut objective = vec![objective_of(&state)];

    for it in 0..config.iterations {
        let next: Vec<Result<(PixelParams, f64, f64)>> = state
            .par_iter()
            .enumerate()
            .map(|(i, &(p, loss, step))| problem.step(i, p, loss, step, config.step_size))
            .collect();
        state = next.into_iter().collect::<Result<_>>()?;
        debug_assert!(state.iter().all(|e| e.0.in_range()));
        let obj = objective_of(&state);
        debug!("iteration {it}: objective {obj:.6e}");
        objective.push(obj);
    }

    let (w, h) = rgb.dims();
    let basecolor = TextureImage::from_fn(w, h, 3, |x, y, c| state[y * w + x].0.b[c] as f32)?;
    let normal = TextureImage::from_fn(w, h, 3, |x, y, c| state[y * w + x].0.normal()[c] as f32)?;
    let roughness = TextureImage::from_fn(w, h, 1, |x, y, _| state[y * w + x].0.r as f32)?;
    let metalness = TextureImage::from_fn(w, h, 1, |x, y, _| state[y * w + x].0.m as f32)?;
    let height = integrate_normals(&normal, 1.0)?;
    Ok(OptimOutcome {
        material: MaterialSet::new(basecolor, normal, height, roughness, metalness)?,
        objective,
    })
}

/// [`optimize_material`] returning only the material.
pub fn estimate_by_optimization(
    rgb: &TextureImage,
    light: &DirectionalLight,
    init: &MaterialSet,
    config: &OptimConfig,
) -> Result<MaterialSet> {
    optimize_material(rgb, light, init, config).map(|o| o.material)
}

/// Chain predictors backed by [`optimize_material`].
///
/// The basecolor step has no light estimate yet and optimizes basecolor,
/// roughness and metalness over flat normals under `light`. The normal step
/// fixes the predicted basecolor and optimizes normals (with roughness and
/// metalness free) under the same light. The last step starts from the
/// grid-search maps and refines roughness and metalness under the chain's
/// light with basecolor and normal fixed.
#[derive(Clone, Debug)]
pub struct OptimPredictors {
    pub config: OptimConfig,
    pub light: DirectionalLight,
}

impl OptimPredictors {
    fn run(&self, rgb: &TextureImage, light: &DirectionalLight, init: MaterialSet, mask: ParamMask) -> Result<MaterialSet> {
        let config = OptimConfig {
            optimize: mask,
            ..self.config.clone()
        };
        estimate_by_optimization(rgb, light, &init, &config)
    }
}

impl PredictorSuite for OptimPredictors {
    fn predict_basecolor(&self, rgb: &TextureImage) -> Result<TextureImage> {
        let (w, h) = rgb.dims();
        let init = MaterialSet::uniform(w, h, [0.5; 3], 0.5, 0.0)?;
        let mask = ParamMask {
            normal: false,
            ..ParamMask::ALL
        };
        let [b, ..] = self.run(rgb, &self.light, init, mask)?.into_parts();
        Ok(b)
    }

    fn predict_normal(&self, step: &NormalStep) -> Result<TextureImage> {
        let (w, h) = step.rgb.dims();
        let init = MaterialSet::uniform(w, h, [0.5; 3], 0.5, 0.0)?.with_basecolor(step.basecolor.clone())?;
        let mask = ParamMask {
            basecolor: false,
            ..ParamMask::ALL
        };
        let [_, n, ..] = self.run(step.rgb, &self.light, init, mask)?.into_parts();
        Ok(n)
    }

    fn predict_rm(&self, step: &RmStep) -> Result<(TextureImage, TextureImage)> {
        let (w, h) = step.rgb.dims();
        let init = MaterialSet::uniform(w, h, [0.5; 3], 0.5, 0.0)?
            .with_basecolor(step.basecolor.clone())?
            .with_normal_and_height(step.normal.clone(), TextureImage::filled(w, h, 1, 0.0)?)?
            .with_roughness_metalness(step.rm_roughness.clone(), step.rm_metalness.clone())?;
        let mask = ParamMask {
            roughness: true,
            metalness: true,
            ..ParamMask::NONE
        };
        let [_, _, _, r, m] = self.run(step.rgb, step.light, init, mask)?.into_parts();
        Ok((r, m))
    }
}

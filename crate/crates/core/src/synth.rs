//! Synthetic periodic fixtures: band-limited height fields and random
//! materials with known parameters. Used by the examples and test suites.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::Result;
use crate::height::{central_gradients, height_to_normals};
use crate::types::{center_height, MaterialSet, TextureImage};

/// Sum of `terms` random cosines with integer frequencies in `1..=max_freq`
/// along each axis, so the field tiles exactly. Normalized to unit RMS, then
/// multiplied by `amplitude`; mean zero.
pub fn band_limited_height<R: Rng>(
    width: usize,
    height: usize,
    max_freq: u32,
    terms: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<TextureImage> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..terms)
        .map(|_| {
            let fx = rng.gen_range(0..=max_freq) as f64;
            let fy = if fx == 0.0 {
                rng.gen_range(1..=max_freq) as f64
            } else {
                rng.gen_range(0..=max_freq) as f64
            };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (fx, sign * fy, rng.gen_range(0.0..TAU), rng.gen_range(0.3..1.0))
        })
        .collect();
    let mut data = vec![0f64; width * height];
    for y in 0..height {
        for x in 0..width {
            let u = x as f64 / width as f64;
            let v = y as f64 / height as f64;
            data[y * width + x] = waves
                .iter()
                .map(|&(fx, fy, ph, a)| a * (TAU * (fx * u + fy * v) + ph).cos())
                .sum();
        }
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let rms = (data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / data.len() as f64).sqrt();
    let scale = if rms > 0.0 { amplitude / rms } else { 0.0 };
    let img = TextureImage::new(
        width,
        height,
        1,
        data.iter().map(|v| ((v - mean) * scale) as f32).collect(),
        crate::types::ColorSpace::Linear,
    )?;
    center_height(&img)
}

/// Knobs for [`random_material`].
#[derive(Clone, Debug)]
pub struct MaterialRecipe {
    /// Basecolor samples are drawn uniformly from this range per channel.
    pub basecolor: (f32, f32),
    /// Candidate roughness values; one is picked per pixel.
    pub roughness_levels: Vec<f32>,
    /// Probability that a pixel is metallic (metalness exactly 1).
    pub metal_fraction: f64,
    /// RMS surface slope of the height field (0 gives flat normals).
    pub bump_slope: f64,
    pub bump_max_freq: u32,
}

impl Default for MaterialRecipe {
    fn default() -> Self {
        MaterialRecipe {
            basecolor: (0.05, 0.95),
            roughness_levels: vec![0.3, 0.5, 0.8],
            metal_fraction: 0.0,
            bump_slope: 0.35,
            bump_max_freq: 4,
        }
    }
}

/// Random tileable material: per-pixel basecolor/roughness/metalness and
/// normals derived from a band-limited height field.
pub fn random_material<R: Rng>(
    width: usize,
    height: usize,
    recipe: &MaterialRecipe,
    rng: &mut R,
) -> Result<MaterialSet> {
    let (lo, hi) = recipe.basecolor;
    let basecolor = TextureImage::from_fn(width, height, 3, |_, _, _| {
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    })?;
    let levels = &recipe.roughness_levels;
    let roughness =
        TextureImage::from_fn(width, height, 1, |_, _, _| levels[rng.gen_range(0..levels.len())])?;
    let metalness = TextureImage::from_fn(width, height, 1, |_, _, _| {
        if rng.gen_bool(recipe.metal_fraction) {
            1.0
        } else {
            0.0
        }
    })?;
    let h = band_limited_height(width, height, recipe.bump_max_freq, 6, 1.0, rng)?;
    let (gx, gy) = central_gradients(&h)?;
    let slope_rms =
        (gx.iter().zip(&gy).map(|(a, b)| a * a + b * b).sum::<f64>() / gx.len() as f64).sqrt();
    let gain = if slope_rms > 0.0 { recipe.bump_slope / slope_rms } else { 0.0 };
    let h = center_height(&h.map(|v| (v as f64 * gain) as f32)?)?;
    let n = height_to_normals(&h, 1.0)?;
    MaterialSet::new(basecolor, n, h, roughness, metalness)
}

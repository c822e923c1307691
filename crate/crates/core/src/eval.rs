//! Evaluation harness: per-channel PSNR, relit comparisons under a fixed
//! light battery, and a tileability score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::brdf::render;
use crate::error::{ChordError, Result};
use crate::types::{encode_normal, DirectionalLight, MaterialSet, TextureImage, ViewConfig};

/// Versioned relighting battery shipped with the crate.
pub const LIGHT_BATTERY_V1: &str = include_str!("../assets/light_battery_v1.json");

/// Mean squared error of two images of equal shape.
pub fn mse(a: &TextureImage, b: &TextureImage) -> Result<f64> {
    b.expect_dims("image", a.dims())?;
    b.expect_channels("image", a.channels())?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64)
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// `10·log10(1 / mse)` with peak 1; identical images give `+∞`.
pub fn psnr(a: &TextureImage, b: &TextureImage) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

/// Infinite PSNR values serialize as the string `"inf"`.
fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metric {
    #[serde(serialize_with = "ser_db")]
    pub psnr_db: f64,
    pub mse: f64,
}

impl Metric {
    fn from_mse(mse: f64) -> Self {
        Metric {
            psnr_db: psnr_from_mse(mse),
            mse,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatteryFile {
    version: u32,
    #[allow(dead_code)]
    description: Option<String>,
    lights: Vec<BatteryEntry>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatteryEntry {
    name: String,
    azimuth_deg: f64,
    elevation_deg: f64,
    radiance: [f64; 3],
}

/// Nine named directional lights used for relit comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct LightBattery {
    pub version: u32,
    pub lights: Vec<(String, DirectionalLight)>,
}

pub const BATTERY_SIZE: usize = 9;

impl LightBattery {
    pub fn new(version: u32, lights: Vec<(String, DirectionalLight)>) -> Result<Self> {
        if lights.len() != BATTERY_SIZE {
            return Err(ChordError::Config(format!(
                "light battery needs {BATTERY_SIZE} lights, got {}",
                lights.len()
            )));
        }
        Ok(LightBattery { version, lights })
    }

    /// The battery bundled as `assets/light_battery_v1.json`.
    pub fn standard() -> Self {
        Self::from_json(LIGHT_BATTERY_V1).expect("bundled light battery is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BatteryFile =
            serde_json::from_str(text).map_err(|e| ChordError::Config(format!("light battery: {e}")))?;
        let lights = file
            .lights
            .into_iter()
            .map(|e| Ok((e.name, DirectionalLight::from_angles(e.azimuth_deg, e.elevation_deg, e.radiance)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.version, lights)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LightMetric {
    pub name: String,
    #[serde(flatten)]
    pub metric: Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelitMetric {
    /// Mean of the per-light PSNRs.
    #[serde(serialize_with = "ser_db")]
    pub psnr_db: f64,
    /// Mean of the per-light MSEs.
    pub mse: f64,
    pub per_light: Vec<LightMetric>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerChannel {
    pub basecolor: Metric,
    pub normal: Metric,
    pub roughness: Metric,
    pub metalness: Metric,
    pub height: Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Unavailable {
    pub available: bool,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub per_channel: PerChannel,
    pub relit: RelitMetric,
    /// Seam energy of the predicted height map.
    pub seam_energy: f64,
    pub battery_version: u32,
    /// Perceptual similarity is not computed; kept so the schema is stable.
    pub lpips: Unavailable,
}

impl EvalReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn encoded_normals(img: &TextureImage) -> Result<TextureImage> {
    let (w, h) = img.dims();
    TextureImage::from_fn(w, h, 3, |x, y, c| encode_normal(img.rgb(y * w + x))[c] as f32)
}

/// Fits `a·pred + c ≈ gt` by least squares, then maps both onto `[0, 1]`
/// using the ground truth's range (left as is when the truth is constant).
fn aligned_heights(pred: &TextureImage, gt: &TextureImage) -> Result<(TextureImage, TextureImage)> {
    let n = gt.data().len() as f64;
    let p: Vec<f64> = pred.data().iter().map(|&v| v as f64).collect();
    let g: Vec<f64> = gt.data().iter().map(|&v| v as f64).collect();
    let mp = p.iter().sum::<f64>() / n;
    let mg = g.iter().sum::<f64>() / n;
    let cov: f64 = p.iter().zip(&g).map(|(a, b)| (a - mp) * (b - mg)).sum();
    let var: f64 = p.iter().map(|a| (a - mp) * (a - mp)).sum();
    let gain = if var > 0.0 { cov / var } else { 0.0 };
    let offset = mg - gain * mp;
    let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (shift, scale) = if hi > lo { (lo, 1.0 / (hi - lo)) } else { (0.0, 1.0) };
    let (w, h) = gt.dims();
    let fitted = TextureImage::from_fn(w, h, 1, |x, y, _| {
        (((gain * p[y * w + x] + offset) - shift) * scale) as f32
    })?;
    let truth = TextureImage::from_fn(w, h, 1, |x, y, _| ((g[y * w + x] - shift) * scale) as f32)?;
    Ok((fitted, truth))
}

/// Per-channel and relit comparison of a predicted material against ground
/// truth.
///
/// Normals are compared in their `(n + 1) / 2` encoding. Heights are first
/// aligned by a least-squares gain and offset, then both are scaled by the
/// ground truth's min–max range. Relit PSNR is the mean of the per-light
/// PSNRs over the battery.
pub fn evaluate_material(pred: &MaterialSet, gt: &MaterialSet, battery: &LightBattery) -> Result<EvalReport> {
    if pred.dims() != gt.dims() {
        return Err(ChordError::mismatch("predicted material", pred.dims(), gt.dims()));
    }
    let metric = |a: &TextureImage, b: &TextureImage| mse(a, b).map(Metric::from_mse);
    let (hp, hg) = aligned_heights(pred.height(), gt.height())?;
    let per_channel = PerChannel {
        basecolor: metric(pred.basecolor(), gt.basecolor())?,
        normal: metric(&encoded_normals(pred.normal())?, &encoded_normals(gt.normal())?)?,
        roughness: metric(pred.roughness(), gt.roughness())?,
        metalness: metric(pred.metalness(), gt.metalness())?,
        height: metric(&hp, &hg)?,
    };

    let view = ViewConfig::default();
    let per_light = battery
        .lights
        .par_iter()
        .map(|(name, light)| {
            let m = mse(&render(pred, light, &view)?, &render(gt, light, &view)?)?;
            Ok(LightMetric {
                name: name.clone(),
                metric: Metric::from_mse(m),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = per_light.len() as f64;
    let relit = RelitMetric {
        psnr_db: per_light.iter().map(|l| l.metric.psnr_db).sum::<f64>() / k,
        mse: per_light.iter().map(|l| l.metric.mse).sum::<f64>() / k,
        per_light,
    };

    Ok(EvalReport {
        schema_version: 1,
        per_channel,
        relit,
        seam_energy: seam_energy(pred.height()),
        battery_version: battery.version,
        lpips: Unavailable {
            available: false,
            value: None,
        },
    })
}

/// Mean squared difference across the wrap-around seams (last → first
/// column and last → first row) divided by the mean squared difference of
/// the interior neighbour pairs on either side of each seam crossing, in the
/// same row or column. About 1 for a tileable image, large when the edges do
/// not meet; a constant image returns 0.
///
/// Normalizing by the adjacent interior differences rather than the whole
/// image keeps the score near 1 for smooth periodic images whatever their
/// phase at the border.
pub fn seam_energy(img: &TextureImage) -> f64 {
    let (w, h) = img.dims();
    let at = |x: usize, y: usize, c: usize| img.get(x, y, c) as f64;
    let sq = |a: f64, b: f64| (a - b) * (a - b);
    let (mut seam, mut inner, mut count) = (0.0, 0.0, 0usize);
    for c in 0..img.channels() {
        if w >= 2 {
            for y in 0..h {
                seam += sq(at(w - 1, y, c), at(0, y, c));
                inner += 0.5 * (sq(at(w - 2, y, c), at(w - 1, y, c)) + sq(at(0, y, c), at(1, y, c)));
                count += 1;
            }
        }
        if h >= 2 {
            for x in 0..w {
                seam += sq(at(x, h - 1, c), at(x, 0, c));
                inner += 0.5 * (sq(at(x, h - 2, c), at(x, h - 1, c)) + sq(at(x, 0, c), at(x, 1, c)));
                count += 1;
            }
        }
    }
    if count == 0 || inner == 0.0 {
        return if seam == 0.0 { 0.0 } else { f64::INFINITY };
    }
    seam / inner
}

//! File formats and the on-disk material directory layout.
//!
//! Radiometric images are EXR with 32-bit float RGB channels (single-channel
//! images are replicated into R, G and B). Material channels are 16-bit PNG;
//! basecolor is sRGB-encoded, everything else is linear. Height maps are
//! min–max normalized into `height.png` with the affine parameters stored in
//! `meta.json`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageError, Luma, Rgb};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{ChordError, Result};
use crate::types::{
    center_height, decode_normal, encode_normal, flat_normals, linear_to_srgb, srgb_to_linear, ColorSpace,
    MaterialSet, TextureImage,
};

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ChordError + '_ {
    move |source| ChordError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn image_err(path: &Path, e: ImageError) -> ChordError {
    match e {
        ImageError::IoError(source) => ChordError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => ChordError::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    if !path.is_file() {
        return Err(ChordError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    image::open(path).map_err(|e| image_err(path, e))
}

/// Reads an 8- or 16-bit PNG into `[0, 1]` samples tagged with `space`.
/// Grayscale gives one channel, color gives three; alpha is dropped.
pub fn read_png(path: &Path, space: ColorSpace) -> Result<TextureImage> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let (channels, data): (usize, Vec<f32>) = if gray {
        let buf = img.into_luma16();
        (1, buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect())
    } else {
        let buf = img.into_rgb16();
        (3, buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect())
    };
    TextureImage::new(w, h, channels, data, space).map_err(|e| ChordError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn quantize16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    Ok(())
}

/// Writes samples as a 16-bit PNG (values clamped to `[0, 1]`).
pub fn write_png16(path: &Path, img: &TextureImage) -> Result<()> {
    ensure_parent(path)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u16> = img.data().iter().map(|&v| quantize16(v)).collect();
    let res = match img.channels() {
        1 => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).expect("buffer size").save(path),
        _ => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).expect("buffer size").save(path),
    };
    res.map_err(|e| image_err(path, e))
}

/// Writes samples as an 8-bit PNG (values clamped to `[0, 1]`).
pub fn write_png8(path: &Path, img: &TextureImage) -> Result<()> {
    ensure_parent(path)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let res = match img.channels() {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer size").save(path),
        _ => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("buffer size").save(path),
    };
    res.map_err(|e| image_err(path, e))
}

/// Preview of a linear radiance image: clamp to `[0, 1]`, sRGB encode,
/// 8-bit PNG.
pub fn write_preview_png(path: &Path, linear: &TextureImage) -> Result<()> {
    let clamped = linear.map(|v| v.clamp(0.0, 1.0))?;
    write_png8(path, &linear_to_srgb(&clamped)?)
}

/// Writes a linear image as 32-bit float RGB EXR.
pub fn write_exr(path: &Path, img: &TextureImage) -> Result<()> {
    ensure_parent(path)?;
    let rgb = img.to_rgb();
    let buf = ImageBuffer::<Rgb<f32>, _>::from_raw(img.width() as u32, img.height() as u32, rgb.into_data())
        .expect("buffer size");
    DynamicImage::ImageRgb32F(buf).save(path).map_err(|e| image_err(path, e))
}

/// Reads an EXR as linear samples. With `channels == 1` only the first
/// channel is kept.
pub fn read_exr(path: &Path, channels: usize) -> Result<TextureImage> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_rgb32f().into_raw();
    let data = if channels == 1 { data.chunks(3).map(|p| p[0]).collect() } else { data };
    TextureImage::new(w, h, channels.clamp(1, 3), data, ColorSpace::Linear).map_err(|e| ChordError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a color image and returns linear RGB. EXR is taken as linear; PNG
/// is decoded from sRGB unless `space` says otherwise.
pub fn read_rgb_linear(path: &Path, space: Option<ColorSpace>) -> Result<TextureImage> {
    let is_exr = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("exr"));
    let img = if is_exr {
        read_exr(path, 3)?
    } else {
        let tag = space.unwrap_or(ColorSpace::Srgb);
        read_png(path, tag)?.to_rgb()
    };
    if img.space() == ColorSpace::Srgb {
        srgb_to_linear(&img)
    } else {
        Ok(img)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Sidecar metadata of a material directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialMeta {
    pub schema_version: u32,
    /// `height = height_min + png_value · (height_max − height_min)`.
    pub height_min: f64,
    pub height_max: f64,
    /// World units per pixel.
    pub pixel_scale: f64,
}

pub const ROUGHNESS_DEFAULT: f32 = 0.5;
pub const METALNESS_DEFAULT: f32 = 0.0;

/// File names of a material directory.
#[derive(Clone, Debug)]
pub struct MaterialDirLayout {
    pub root: PathBuf,
}

impl MaterialDirLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        MaterialDirLayout { root: root.into() }
    }
    pub fn basecolor(&self) -> PathBuf {
        self.root.join("basecolor.png")
    }
    pub fn normal(&self) -> PathBuf {
        self.root.join("normal.png")
    }
    pub fn roughness(&self) -> PathBuf {
        self.root.join("roughness.png")
    }
    pub fn metalness(&self) -> PathBuf {
        self.root.join("metalness.png")
    }
    pub fn height(&self) -> PathBuf {
        self.root.join("height.png")
    }
    pub fn meta(&self) -> PathBuf {
        self.root.join("meta.json")
    }
}

pub fn encode_normal_image(normal: &TextureImage) -> Result<TextureImage> {
    let (w, h) = normal.dims();
    TextureImage::from_fn(w, h, 3, |x, y, c| encode_normal(normal.rgb(y * w + x))[c] as f32)
}

pub fn decode_normal_image(encoded: &TextureImage) -> Result<TextureImage> {
    let (w, h) = encoded.dims();
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let p = encoded.rgb(i).to_array();
        data.extend(decode_normal(p)?.to_array().iter().map(|&v| v as f32));
    }
    TextureImage::new(w, h, 3, data, ColorSpace::Linear)
}

/// Min–max normalizes a height field; returns the `[0, 1]` image and
/// `(min, max)`.
pub fn normalize_height(height: &TextureImage) -> Result<(TextureImage, f64, f64)> {
    let lo = height.data().iter().fold(f32::INFINITY, |a, &b| a.min(b)) as f64;
    let hi = height.data().iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
    let span = hi - lo;
    let img = height.map(|v| if span > 0.0 { ((v as f64 - lo) / span) as f32 } else { 0.0 })?;
    Ok((img, lo, hi))
}

/// Writes every channel of `mat` plus `meta.json` into `dir`.
pub fn write_material_dir(dir: &Path, mat: &MaterialSet, pixel_scale: f64) -> Result<()> {
    let layout = MaterialDirLayout::new(dir);
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_png16(&layout.basecolor(), &linear_to_srgb(mat.basecolor())?)?;
    write_png16(&layout.normal(), &encode_normal_image(mat.normal())?)?;
    write_png16(&layout.roughness(), mat.roughness())?;
    write_png16(&layout.metalness(), mat.metalness())?;
    let (h, lo, hi) = normalize_height(mat.height())?;
    write_png16(&layout.height(), &h)?;
    write_json(
        &layout.meta(),
        &MaterialMeta {
            schema_version: 1,
            height_min: lo,
            height_max: hi,
            pixel_scale,
        },
    )
}

pub fn read_meta(path: &Path) -> Result<MaterialMeta> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ChordError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn single_channel(path: &Path) -> Result<TextureImage> {
    let img = read_png(path, ColorSpace::Linear)?;
    Ok(if img.channels() == 1 { img } else { img.channel_mean() })
}

/// Loads a material directory. Only `basecolor.png` is required; missing
/// channels fall back to roughness 0.5, metalness 0, flat normals and zero
/// height, each with a warning.
pub fn read_material_dir(dir: &Path) -> Result<MaterialSet> {
    let layout = MaterialDirLayout::new(dir);
    if !dir.is_dir() {
        return Err(ChordError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "material directory not found"),
        });
    }
    let basecolor = srgb_to_linear(&read_png(&layout.basecolor(), ColorSpace::Srgb)?.to_rgb())?;
    let (w, h) = basecolor.dims();
    let check = |img: TextureImage, path: PathBuf| -> Result<TextureImage> {
        if img.dims() != (w, h) {
            return Err(ChordError::Format {
                path,
                message: format!("is {}x{}, basecolor is {w}x{h}", img.width(), img.height()),
            });
        }
        Ok(img)
    };
    let present = |path: PathBuf, default: &str| {
        if path.is_file() {
            Some(path)
        } else {
            warn!("{} missing; using {default}", path.display());
            None
        }
    };

    let normal = match present(layout.normal(), "flat normals") {
        Some(p) => check(decode_normal_image(&read_png(&p, ColorSpace::Linear)?.to_rgb())?, p)?,
        None => flat_normals(w, h)?,
    };
    let roughness = match present(layout.roughness(), "roughness 0.5") {
        Some(p) => check(single_channel(&p)?, p)?,
        None => TextureImage::filled(w, h, 1, ROUGHNESS_DEFAULT)?,
    };
    let metalness = match present(layout.metalness(), "metalness 0") {
        Some(p) => check(single_channel(&p)?, p)?,
        None => TextureImage::filled(w, h, 1, METALNESS_DEFAULT)?,
    };
    let height = match present(layout.height(), "zero height") {
        Some(p) => {
            let raw = check(single_channel(&p)?, p)?;
            let meta_path = layout.meta();
            let (lo, hi) = if meta_path.is_file() {
                let meta = read_meta(&meta_path)?;
                (meta.height_min, meta.height_max)
            } else {
                (0.0, 1.0)
            };
            center_height(&raw.map(|v| (lo + v as f64 * (hi - lo)) as f32)?)?
        }
        None => TextureImage::filled(w, h, 1, 0.0)?,
    };
    MaterialSet::new(basecolor, normal, height, roughness, metalness).map_err(|e| ChordError::Format {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

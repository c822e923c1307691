//! Images, material sets, lights and the color/normal encoding conventions.
//!
//! Conventions used throughout the crate:
//!
//! * Images are row-major, row 0 at the top, channels interleaved.
//! * Tangent-space normals have +z toward the camera, +x to the right and
//!   +y pointing up the image (OpenGL-style green channel), so a step down one
//!   row moves along -y.
//! * Basecolor is kept linear in memory; only file I/O deals with sRGB.

use serde::{Deserialize, Serialize};

use crate::error::{ChordError, Result};
use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    Linear,
    Srgb,
}

/// H×W image with one or three interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
    space: ColorSpace,
}

impl TextureImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
        space: ColorSpace,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ChordError::InvalidImage(format!(
                "empty image {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ChordError::InvalidImage(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(ChordError::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ChordError::InvalidImage(format!(
                "non-finite sample at index {i}"
            )));
        }
        if space == ColorSpace::Srgb {
            if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(ChordError::InvalidImage(format!(
                    "sRGB sample {} at index {i} outside [0, 1]",
                    data[i]
                )));
            }
        }
        Ok(TextureImage {
            width,
            height,
            channels,
            data,
            space,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
            ColorSpace::Linear,
        )
    }

    /// Builds a linear image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data, ColorSpace::Linear)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Samples of pixel `i` in row-major order.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[f32] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    /// Pixel `i` as an RGB triple; single-channel images are broadcast.
    #[inline]
    pub fn rgb(&self, i: usize) -> Vec3 {
        let p = self.pixel(i);
        if self.channels == 1 {
            Vec3::splat(p[0] as f64)
        } else {
            Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
            self.space,
        )
    }

    /// Average of all channels, producing a single-channel image.
    pub fn channel_mean(&self) -> TextureImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|p| p.iter().sum::<f32>() / self.channels as f32)
            .collect();
        TextureImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            space: self.space,
        }
    }

    /// Replicates a single-channel image into three channels.
    pub fn to_rgb(&self) -> TextureImage {
        if self.channels == 3 {
            return self.clone();
        }
        TextureImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
            space: self.space,
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub(crate) fn expect_dims(&self, what: &'static str, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(ChordError::mismatch(what, self.dims(), dims));
        }
        Ok(())
    }

    pub(crate) fn expect_channels(&self, what: &str, channels: usize) -> Result<()> {
        if self.channels != channels {
            return Err(ChordError::InvalidImage(format!(
                "{what} must have {channels} channel(s), got {}",
                self.channels
            )));
        }
        Ok(())
    }
}

/// sRGB EOTF (IEC 61966-2-1) for a single sample.
#[inline]
pub fn srgb_decode(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse sRGB EOTF for a single sample.
#[inline]
pub fn srgb_encode(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear(img: &TextureImage) -> Result<TextureImage> {
    if img.space != ColorSpace::Srgb {
        return Err(ChordError::ColorSpace("srgb_to_linear expects an sRGB image"));
    }
    let data = img.data.iter().map(|&v| srgb_decode(v as f64) as f32).collect();
    TextureImage::new(img.width, img.height, img.channels, data, ColorSpace::Linear)
}

pub fn linear_to_srgb(img: &TextureImage) -> Result<TextureImage> {
    if img.space != ColorSpace::Linear {
        return Err(ChordError::ColorSpace("linear_to_srgb expects a linear image"));
    }
    let data = img
        .data
        .iter()
        .map(|&v| srgb_encode((v as f64).clamp(0.0, 1.0)).clamp(0.0, 1.0) as f32)
        .collect();
    TextureImage::new(img.width, img.height, img.channels, data, ColorSpace::Srgb)
}

/// Maps a unit normal to `[0, 1]^3` via `(n + 1) / 2`.
#[inline]
pub fn encode_normal(n: Vec3) -> [f64; 3] {
    [(n.x + 1.0) * 0.5, (n.y + 1.0) * 0.5, (n.z + 1.0) * 0.5]
}

pub fn decode_normal(rgb: [f64; 3]) -> Result<Vec3> {
    let v = Vec3::new(rgb[0] * 2.0 - 1.0, rgb[1] * 2.0 - 1.0, rgb[2] * 2.0 - 1.0);
    let len = v.length();
    if !(len >= 1e-3) {
        return Err(ChordError::DegenerateNormal(len));
    }
    Ok(v * (1.0 / len))
}

/// Tolerance on `|n| - 1` for stored normals.
pub const NORMAL_UNIT_TOL: f64 = 1e-4;
/// Tolerance on the mean of a stored height map.
pub const HEIGHT_MEAN_TOL: f64 = 1e-5;

/// The five SVBRDF channels at a shared resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialSet {
    basecolor: TextureImage,
    normal: TextureImage,
    height: TextureImage,
    roughness: TextureImage,
    metalness: TextureImage,
}

impl MaterialSet {
    pub fn new(
        basecolor: TextureImage,
        normal: TextureImage,
        height: TextureImage,
        roughness: TextureImage,
        metalness: TextureImage,
    ) -> Result<Self> {
        let dims = basecolor.dims();
        for (name, img, ch) in [
            ("basecolor", &basecolor, 3),
            ("normal", &normal, 3),
            ("height", &height, 1),
            ("roughness", &roughness, 1),
            ("metalness", &metalness, 1),
        ] {
            img.expect_channels(name, ch)?;
            if img.space() != ColorSpace::Linear {
                return Err(ChordError::InvalidMaterial(format!("{name} must be linear")));
            }
            if img.dims() != dims {
                return Err(ChordError::mismatch("material channel", img.dims(), dims));
            }
        }
        for (name, img) in [
            ("basecolor", &basecolor),
            ("roughness", &roughness),
            ("metalness", &metalness),
        ] {
            if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(ChordError::InvalidMaterial(format!(
                    "{name} sample {v} outside [0, 1]"
                )));
            }
        }
        for (i, n) in normal.data().chunks_exact(3).enumerate() {
            let v = Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64);
            if (v.length() - 1.0).abs() > NORMAL_UNIT_TOL || v.z <= 0.0 {
                return Err(ChordError::InvalidMaterial(format!(
                    "normal at pixel {i} is ({}, {}, {}), not a unit vector with z > 0",
                    v.x, v.y, v.z
                )));
            }
        }
        let hm = height.mean();
        if hm.abs() > HEIGHT_MEAN_TOL {
            return Err(ChordError::InvalidMaterial(format!(
                "height mean {hm:.3e} is not zero"
            )));
        }
        Ok(MaterialSet {
            basecolor,
            normal,
            height,
            roughness,
            metalness,
        })
    }

    /// Uniform material: constant basecolor, roughness and metalness, flat normals.
    pub fn uniform(
        width: usize,
        height: usize,
        basecolor: [f32; 3],
        roughness: f32,
        metalness: f32,
    ) -> Result<Self> {
        Self::new(
            TextureImage::from_fn(width, height, 3, |_, _, c| basecolor[c])?,
            flat_normals(width, height)?,
            TextureImage::filled(width, height, 1, 0.0)?,
            TextureImage::filled(width, height, 1, roughness)?,
            TextureImage::filled(width, height, 1, metalness)?,
        )
    }

    pub fn basecolor(&self) -> &TextureImage {
        &self.basecolor
    }

    pub fn normal(&self) -> &TextureImage {
        &self.normal
    }

    pub fn height(&self) -> &TextureImage {
        &self.height
    }

    pub fn roughness(&self) -> &TextureImage {
        &self.roughness
    }

    pub fn metalness(&self) -> &TextureImage {
        &self.metalness
    }

    pub fn dims(&self) -> (usize, usize) {
        self.basecolor.dims()
    }

    pub fn width(&self) -> usize {
        self.basecolor.width()
    }

    pub fn height_px(&self) -> usize {
        self.basecolor.height()
    }

    #[inline]
    pub fn normal_at(&self, i: usize) -> Vec3 {
        self.normal.rgb(i)
    }

    pub fn with_basecolor(&self, basecolor: TextureImage) -> Result<Self> {
        Self::new(
            basecolor,
            self.normal.clone(),
            self.height.clone(),
            self.roughness.clone(),
            self.metalness.clone(),
        )
    }

    pub fn with_normal_and_height(&self, normal: TextureImage, height: TextureImage) -> Result<Self> {
        Self::new(
            self.basecolor.clone(),
            normal,
            height,
            self.roughness.clone(),
            self.metalness.clone(),
        )
    }

    pub fn with_roughness_metalness(
        &self,
        roughness: TextureImage,
        metalness: TextureImage,
    ) -> Result<Self> {
        Self::new(
            self.basecolor.clone(),
            self.normal.clone(),
            self.height.clone(),
            roughness,
            metalness,
        )
    }

    pub fn into_parts(self) -> [TextureImage; 5] {
        [
            self.basecolor,
            self.normal,
            self.height,
            self.roughness,
            self.metalness,
        ]
    }
}

pub fn flat_normals(width: usize, height: usize) -> Result<TextureImage> {
    TextureImage::from_fn(width, height, 3, |_, _, c| if c == 2 { 1.0 } else { 0.0 })
}

/// Subtracts the mean so a height map satisfies the zero-mean gauge.
pub fn center_height(h: &TextureImage) -> Result<TextureImage> {
    let m = h.mean();
    let centered = h.map(|v| (v as f64 - m) as f32)?;
    // f32 rounding can leave a residual mean; one more pass removes it.
    let m2 = centered.mean();
    centered.map(|v| (v as f64 - m2) as f32)
}

/// Directional light. `direction` points from the surface toward the light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalLight {
    direction: Vec3,
    radiance: [f64; 3],
}

impl DirectionalLight {
    pub fn new(direction: Vec3, radiance: [f64; 3]) -> Result<Self> {
        if !direction.is_finite() || (direction.length() - 1.0).abs() > 1e-6 {
            return Err(ChordError::InvalidLight(format!(
                "direction {direction:?} is not unit length"
            )));
        }
        if direction.z <= 0.0 {
            return Err(ChordError::InvalidLight(format!(
                "direction {direction:?} is below the horizon"
            )));
        }
        if radiance.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(ChordError::InvalidLight(format!(
                "radiance {radiance:?} must be finite and nonnegative"
            )));
        }
        Ok(DirectionalLight {
            direction,
            radiance,
        })
    }

    /// Light from azimuth/elevation in degrees with the given radiance.
    pub fn from_angles(azimuth_deg: f64, elevation_deg: f64, radiance: [f64; 3]) -> Result<Self> {
        let d = Vec3::from_spherical(azimuth_deg.to_radians(), elevation_deg.to_radians());
        Self::new(d.normalize(), radiance)
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn radiance(&self) -> Vec3 {
        Vec3::from_array(self.radiance)
    }

    pub fn with_radiance(&self, radiance: [f64; 3]) -> Result<Self> {
        Self::new(self.direction(), radiance)
    }

    /// `(azimuth, elevation)` in degrees.
    pub fn angles_deg(&self) -> (f64, f64) {
        let (a, e) = self.direction().to_spherical();
        (a.to_degrees(), e.to_degrees())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewConfig {
    view_direction: Vec3,
}

impl ViewConfig {
    pub fn new(view_direction: Vec3) -> Result<Self> {
        if !view_direction.is_finite() || (view_direction.length() - 1.0).abs() > 1e-6 {
            return Err(ChordError::InvalidLight(format!(
                "view direction {view_direction:?} is not unit length"
            )));
        }
        Ok(ViewConfig { view_direction })
    }

    pub fn direction(&self) -> Vec3 {
        self.view_direction
    }
}

impl Default for ViewConfig {
    /// Top-down orthographic camera.
    fn default() -> Self {
        ViewConfig {
            view_direction: Vec3::Z,
        }
    }
}

//! Normal map ↔ height field conversion with periodic boundaries.
//!
//! Heights are recovered by solving the least-squares Poisson problem
//! directly in the Fourier domain. The solver uses the frequency response of
//! the same central-difference stencil that [`height_to_normals`] applies, so
//! the two operations invert each other up to the modes the stencil cannot
//! see (DC and the Nyquist checkerboards), which are set to zero.
//!
//! Axis convention: `p = ∂h/∂x` with x to the right, `q = ∂h/∂y` with y
//! pointing up the image, i.e. toward smaller row indices.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ChordError, Result};
use crate::math::Vec3;
use crate::types::{center_height, ColorSpace, TextureImage};

/// Normals are clamped to at least this z before slopes are taken.
pub const MIN_NORMAL_Z: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    p: TextureImage,
    q: TextureImage,
    pixel_scale: f64,
}

impl GradientField {
    pub fn new(p: TextureImage, q: TextureImage, pixel_scale: f64) -> Result<Self> {
        p.expect_channels("p", 1)?;
        q.expect_channels("q", 1)?;
        q.expect_dims("q", p.dims())?;
        if !(pixel_scale.is_finite() && pixel_scale > 0.0) {
            return Err(ChordError::Config(format!(
                "pixel_scale must be positive, got {pixel_scale}"
            )));
        }
        Ok(GradientField { p, q, pixel_scale })
    }

    pub fn p(&self) -> &TextureImage {
        &self.p
    }

    pub fn q(&self) -> &TextureImage {
        &self.q
    }

    pub fn pixel_scale(&self) -> f64 {
        self.pixel_scale
    }

    pub fn dims(&self) -> (usize, usize) {
        self.p.dims()
    }
}

/// Slopes implied by a normal map: `p = -nx/nz·s`, `q = -ny/nz·s`.
///
/// `height_scale` is the height change per unit of normal slope; the same
/// value passed to [`height_to_normals`] makes the pair an exact inverse.
pub fn normals_to_gradients(normal: &TextureImage, height_scale: f64) -> Result<GradientField> {
    normal.expect_channels("normal", 3)?;
    let (w, h) = normal.dims();
    let mut p = Vec::with_capacity(w * h);
    let mut q = Vec::with_capacity(w * h);
    for n in normal.data().chunks_exact(3) {
        let nz = (n[2] as f64).max(MIN_NORMAL_Z);
        p.push((-(n[0] as f64) / nz * height_scale) as f32);
        q.push((-(n[1] as f64) / nz * height_scale) as f32);
    }
    GradientField::new(
        TextureImage::new(w, h, 1, p, ColorSpace::Linear)?,
        TextureImage::new(w, h, 1, q, ColorSpace::Linear)?,
        1.0,
    )
}

/// Periodic central differences `(∂h/∂x, ∂h/∂y)` in height units per pixel.
pub fn central_gradients(height: &TextureImage) -> Result<(Vec<f64>, Vec<f64>)> {
    height.expect_channels("height", 1)?;
    let (w, h) = height.dims();
    let d = height.data();
    let at = |x: usize, y: usize| d[y * w + x] as f64;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let up = (y + h - 1) % h;
        let down = (y + 1) % h;
        for x in 0..w {
            let left = (x + w - 1) % w;
            let right = (x + 1) % w;
            gx[y * w + x] = 0.5 * (at(right, y) - at(left, y));
            // +y points toward smaller row indices.
            gy[y * w + x] = 0.5 * (at(x, up) - at(x, down));
        }
    }
    Ok((gx, gy))
}

/// Unit normals `normalize(-∂h/∂x, -∂h/∂y, height_scale)` from periodic
/// central differences. Only meaningful for periodic (tileable) heights.
pub fn height_to_normals(height: &TextureImage, height_scale: f64) -> Result<TextureImage> {
    let (w, h) = height.dims();
    let (gx, gy) = central_gradients(height)?;
    let mut data = Vec::with_capacity(w * h * 3);
    for (px, py) in gx.iter().zip(&gy) {
        let n = Vec3::new(-px, -py, height_scale).normalize();
        data.extend_from_slice(&[n.x as f32, n.y as f32, n.z as f32]);
    }
    TextureImage::new(w, h, 3, data, ColorSpace::Linear)
}

struct Fft2 {
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
    w: usize,
    h: usize,
}

impl Fft2 {
    fn new(w: usize, h: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
        } else {
            (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
        };
        Fft2 { row, col, w, h }
    }

    fn process(&self, buf: &mut [Complex64]) {
        let (w, h) = (self.w, self.h);
        buf.par_chunks_mut(w).for_each(|r| self.row.process(r));
        let mut t = transpose(buf, w, h);
        t.par_chunks_mut(h).for_each(|c| self.col.process(c));
        buf.copy_from_slice(&transpose(&t, h, w));
    }
}

fn transpose(buf: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = buf[y * w + x];
        }
    }
    out
}

/// Spectrum of the least-squares height for a gradient field. The DC bin and
/// every bin the central-difference stencil cannot observe are zero.
pub fn height_spectrum(g: &GradientField) -> Vec<Complex64> {
    let (w, h) = g.dims();
    let s = g.pixel_scale;
    let to_c = |img: &TextureImage| -> Vec<Complex64> {
        img.data().iter().map(|&v| Complex64::new(v as f64 * s, 0.0)).collect()
    };
    let mut p = to_c(&g.p);
    let mut q = to_c(&g.q);
    let fwd = Fft2::new(w, h, false);
    fwd.process(&mut p);
    fwd.process(&mut q);

    // Central difference along +x has response i·sin(ωx); along +y (upward,
    // rows reversed) it is -i·sin(ωy).
    let sin_x: Vec<f64> = (0..w)
        .map(|k| (std::f64::consts::TAU * k as f64 / w as f64).sin())
        .collect();
    let sin_y: Vec<f64> = (0..h)
        .map(|k| (std::f64::consts::TAU * k as f64 / h as f64).sin())
        .collect();
    let i = Complex64::new(0.0, 1.0);
    let mut out = vec![Complex64::default(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(ky, row)| {
        let sy = sin_y[ky];
        for (kx, o) in row.iter_mut().enumerate() {
            let sx = sin_x[kx];
            let denom = sx * sx + sy * sy;
            if denom < 1e-12 {
                continue;
            }
            let idx = ky * w + kx;
            *o = (-i * sx * p[idx] + i * sy * q[idx]) / denom;
        }
    });
    out
}

/// Least-squares periodic integration of a gradient field. The result has
/// zero mean.
pub fn integrate_gradients(g: &GradientField) -> Result<TextureImage> {
    let (w, h) = g.dims();
    let mut spec = height_spectrum(g);
    Fft2::new(w, h, true).process(&mut spec);
    let norm = 1.0 / (w * h) as f64;
    let data = spec.iter().map(|c| (c.re * norm) as f32).collect();
    center_height(&TextureImage::new(w, h, 1, data, ColorSpace::Linear)?)
}

/// `integrate_gradients(normals_to_gradients(normal, height_scale))`.
pub fn integrate_normals(normal: &TextureImage, height_scale: f64) -> Result<TextureImage> {
    integrate_gradients(&normals_to_gradients(normal, height_scale)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn rms(v: impl Iterator<Item = f64>) -> f64 {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
        (s / n as f64).sqrt()
    }

    #[test]
    fn flat_normals_give_zero_gradients() {
        let n = crate::types::flat_normals(8, 8).unwrap();
        let g = normals_to_gradients(&n, 1.0).unwrap();
        assert!(g.p().data().iter().chain(g.q().data()).all(|&v| v == 0.0));
    }

    #[test]
    fn tilted_normal_slope() {
        // nx / nz = -0.5
        let n = Vec3::new(-0.5, 0.0, 1.0).normalize();
        let img = TextureImage::from_fn(1, 1, 3, |_, _, c| n[c] as f32).unwrap();
        let g = normals_to_gradients(&img, 1.0).unwrap();
        assert!((g.p().data()[0] - 0.5).abs() < 1e-6);
        assert_eq!(g.q().data()[0], 0.0);
    }

    #[test]
    fn sinusoid_slopes_match_analytic_derivative() {
        let w = 256;
        let hgt = TextureImage::from_fn(w, w, 1, |x, _, _| (TAU * x as f64 / w as f64).sin() as f32).unwrap();
        let n = height_to_normals(&hgt, 1.0).unwrap();
        let g = normals_to_gradients(&n, 1.0).unwrap();
        let analytic = |x: usize| TAU / w as f64 * (TAU * x as f64 / w as f64).cos();
        let err = rms((0..w * w).map(|i| g.p().data()[i] as f64 - analytic(i % w)));
        let sig = rms((0..w * w).map(|i| analytic(i % w)));
        assert!(err / sig < 0.02, "{}", err / sig);
    }

    #[test]
    fn sinusoid_normals_angular_error_below_one_degree() {
        let w = 256;
        let hgt = TextureImage::from_fn(w, w, 1, |x, _, _| (TAU * x as f64 / w as f64).sin() as f32).unwrap();
        let n = height_to_normals(&hgt, 1.0).unwrap();
        for i in 0..w * w {
            let x = i % w;
            let slope = TAU / w as f64 * (TAU * x as f64 / w as f64).cos();
            let want = Vec3::new(-slope, 0.0, 1.0).normalize();
            assert!(n.rgb(i).angle_to(want).to_degrees() < 1.0);
        }
    }

    #[test]
    fn constant_height_gives_flat_normals() {
        let hgt = TextureImage::filled(5, 7, 1, 3.0).unwrap();
        let n = height_to_normals(&hgt, 1.0).unwrap();
        assert_eq!(n, crate::types::flat_normals(5, 7).unwrap());
    }

    #[test]
    fn zero_gradients_integrate_to_zero() {
        let z = TextureImage::filled(16, 8, 1, 0.0).unwrap();
        let g = GradientField::new(z.clone(), z, 1.0).unwrap();
        assert!(integrate_gradients(&g).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analytic_gradients_integrate_to_analytic_height() {
        let n = 256;
        let wx = TAU / n as f64;
        let wy = 2.0 * TAU / n as f64;
        let height = |x: usize, y: usize| (wx * x as f64).sin() + (wy * y as f64).cos();
        // q is the derivative along +y = up the image, i.e. along -row.
        let p = TextureImage::from_fn(n, n, 1, |x, _, _| (wx * (wx * x as f64).cos()) as f32).unwrap();
        let q = TextureImage::from_fn(n, n, 1, |_, y, _| (wy * (wy * y as f64).sin()) as f32).unwrap();
        let out = integrate_gradients(&GradientField::new(p, q, 1.0).unwrap()).unwrap();
        let err = rms((0..n * n).map(|i| out.data()[i] as f64 - height(i % n, i / n)));
        let sig = rms((0..n * n).map(|i| height(i % n, i / n)));
        assert!(err < 1e-3 * sig, "{err} vs {sig}");
    }

    #[test]
    fn pixel_scale_scales_height() {
        let n = 32;
        let p = TextureImage::from_fn(n, n, 1, |x, _, _| (TAU / n as f64 * (TAU * x as f64 / n as f64).cos()) as f32).unwrap();
        let z = TextureImage::filled(n, n, 1, 0.0).unwrap();
        let a = integrate_gradients(&GradientField::new(p.clone(), z.clone(), 1.0).unwrap()).unwrap();
        let b = integrate_gradients(&GradientField::new(p, z, 2.0).unwrap()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((2.0 * x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_pixel_scale() {
        let z = TextureImage::filled(2, 2, 1, 0.0).unwrap();
        assert!(GradientField::new(z.clone(), z, 0.0).is_err());
    }
}

//! Cook-Torrance shading with a GGX distribution, Schlick-GGX geometry and
//! Schlick Fresnel, evaluated for a directional light and an orthographic
//! top-down camera.
//!
//! ```text
//! color = [ (1 - F) * b / π * (1 - m) + D * G * F / (4 (n·v)(n·l) + ε) ] * (n·l)+ * E
//! ```
//!
//! with `α = r²`, `k = (r + 1)² / 8` and `F0 = mix(0.04, b, m)`.

use std::f64::consts::{FRAC_1_PI, PI};

use rayon::prelude::*;

use crate::error::{ChordError, Result};
use crate::math::Vec3;
use crate::types::{ColorSpace, DirectionalLight, MaterialSet, TextureImage, ViewConfig, NORMAL_UNIT_TOL};

/// Lower bound on roughness inside the NDF and geometry terms.
pub const ROUGHNESS_FLOOR: f64 = 0.01;
/// Guard added to the specular denominator.
pub const SPECULAR_EPS: f64 = 1e-6;
/// Normal-incidence reflectance of dielectrics.
pub const DIELECTRIC_F0: f64 = 0.04;

/// Trowbridge-Reitz (GGX) normal distribution with `α = roughness²`.
#[inline]
pub fn ggx_ndf(n_dot_h: f64, roughness: f64) -> f64 {
    let r = roughness.max(ROUGHNESS_FLOOR);
    let a2 = (r * r) * (r * r);
    let nh = n_dot_h.clamp(0.0, 1.0);
    let t = nh * nh * (a2 - 1.0) + 1.0;
    a2 / (PI * t * t)
}

#[inline]
fn geometry_k(roughness: f64) -> f64 {
    let r1 = roughness + 1.0;
    r1 * r1 / 8.0
}

#[inline]
fn g1(x: f64, k: f64) -> f64 {
    x / (x * (1.0 - k) + k)
}

/// Smith-Schlick-GGX shadowing-masking with the direct-lighting `k`.
#[inline]
pub fn schlick_ggx_geometry(n_dot_v: f64, n_dot_l: f64, roughness: f64) -> f64 {
    let k = geometry_k(roughness.max(ROUGHNESS_FLOOR));
    g1(n_dot_v.clamp(0.0, 1.0), k) * g1(n_dot_l.clamp(0.0, 1.0), k)
}

#[inline]
fn fresnel_weight(h_dot_v: f64) -> f64 {
    let c = 1.0 - h_dot_v.clamp(0.0, 1.0);
    let c2 = c * c;
    c2 * c2 * c
}

#[inline]
pub fn fresnel_schlick(h_dot_v: f64, f0: Vec3) -> Vec3 {
    let w = fresnel_weight(h_dot_v);
    Vec3::new(
        f0.x + (1.0 - f0.x) * w,
        f0.y + (1.0 - f0.y) * w,
        f0.z + (1.0 - f0.z) * w,
    )
}

/// Per-pixel shading inputs (everything except the height channel).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrdfSample {
    pub basecolor: Vec3,
    pub normal: Vec3,
    pub roughness: f64,
    pub metalness: f64,
}

impl BrdfSample {
    pub fn new(basecolor: Vec3, normal: Vec3, roughness: f64, metalness: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(basecolor.x) && in_unit(basecolor.y) && in_unit(basecolor.z)) {
            return Err(ChordError::InvalidMaterial(format!(
                "basecolor {basecolor:?} outside [0, 1]"
            )));
        }
        if !in_unit(roughness) || !in_unit(metalness) {
            return Err(ChordError::InvalidMaterial(format!(
                "roughness {roughness} / metalness {metalness} outside [0, 1]"
            )));
        }
        if !normal.is_finite() || (normal.length() - 1.0).abs() > NORMAL_UNIT_TOL {
            return Err(ChordError::InvalidMaterial(format!(
                "normal {normal:?} is not unit length"
            )));
        }
        Ok(BrdfSample {
            basecolor,
            normal,
            roughness,
            metalness,
        })
    }

    pub(crate) fn from_material(mat: &MaterialSet, i: usize) -> Self {
        BrdfSample {
            basecolor: mat.basecolor().rgb(i),
            normal: mat.normal_at(i),
            roughness: mat.roughness().data()[i] as f64,
            metalness: mat.metalness().data()[i] as f64,
        }
    }
}

/// Partial derivatives of the shaded color. Row index is the color channel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShadingJacobian {
    /// `d_basecolor[c][j] = ∂color_c / ∂basecolor_j` (diagonal).
    pub d_basecolor: [[f64; 3]; 3],
    pub d_roughness: [f64; 3],
    pub d_metalness: [f64; 3],
    /// `d_normal[c][j] = ∂color_c / ∂normal_j`, projected onto the tangent
    /// plane of the unit normal.
    pub d_normal: [[f64; 3]; 3],
}

impl ShadingJacobian {
    pub fn is_finite(&self) -> bool {
        self.d_basecolor.iter().flatten().all(|v| v.is_finite())
            && self.d_normal.iter().flatten().all(|v| v.is_finite())
            && self.d_roughness.iter().all(|v| v.is_finite())
            && self.d_metalness.iter().all(|v| v.is_finite())
    }
}

/// Light/view dependent quantities of one pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub n_dot_l: f64,
    pub n_dot_v: f64,
    pub n_dot_h: f64,
    pub fresnel_w: f64,
}

impl Geometry {
    #[inline]
    pub fn new(normal: Vec3, light_dir: Vec3, view_dir: Vec3) -> Self {
        let n = normal.normalize();
        let h = (light_dir + view_dir).normalize();
        Geometry {
            n_dot_l: n.dot(light_dir),
            n_dot_v: n.dot(view_dir).clamp(0.0, 1.0),
            n_dot_h: n.dot(h).clamp(0.0, 1.0),
            fresnel_w: fresnel_weight(h.dot(view_dir)),
        }
    }

    #[inline]
    pub fn lit(&self) -> bool {
        self.n_dot_l > 0.0
    }

    /// `D·G / (4 (n·v)(n·l) + ε)`; independent of basecolor and metalness.
    #[inline]
    pub fn specular_lobe(&self, roughness: f64) -> f64 {
        let d = ggx_ndf(self.n_dot_h, roughness);
        let g = schlick_ggx_geometry(self.n_dot_v, self.n_dot_l, roughness);
        d * g / (4.0 * self.n_dot_v * self.n_dot_l + SPECULAR_EPS)
    }

    /// Shaded color for a lit pixel given a precomputed specular lobe.
    #[inline]
    pub fn shade(&self, basecolor: Vec3, metalness: f64, lobe: f64, radiance: Vec3) -> Vec3 {
        let one = |b: f64, e: f64| {
            let f0 = DIELECTRIC_F0 + (b - DIELECTRIC_F0) * metalness;
            let f = f0 + (1.0 - f0) * self.fresnel_w;
            let diffuse = (1.0 - f) * b * FRAC_1_PI * (1.0 - metalness);
            (diffuse + f * lobe) * self.n_dot_l * e
        };
        Vec3::new(
            one(basecolor.x, radiance.x),
            one(basecolor.y, radiance.y),
            one(basecolor.z, radiance.z),
        )
    }
}

#[inline]
pub(crate) fn shade_dir(s: &BrdfSample, light_dir: Vec3, radiance: Vec3, view_dir: Vec3) -> Vec3 {
    let g = Geometry::new(s.normal, light_dir, view_dir);
    if !g.lit() {
        return Vec3::ZERO;
    }
    g.shade(s.basecolor, s.metalness, g.specular_lobe(s.roughness), radiance)
}

/// Linear RGB radiance leaving one pixel toward the camera.
pub fn shade_pixel(s: &BrdfSample, light: &DirectionalLight, view: &ViewConfig) -> Vec3 {
    shade_dir(s, light.direction(), light.radiance(), view.direction())
}

/// [`shade_pixel`] together with its analytic partial derivatives.
pub fn shade_pixel_with_jacobian(
    s: &BrdfSample,
    light: &DirectionalLight,
    view: &ViewConfig,
) -> (Vec3, ShadingJacobian) {
    let l = light.direction();
    let v = view.direction();
    let e = light.radiance();
    let g = Geometry::new(s.normal, l, v);
    if !g.lit() {
        return (Vec3::ZERO, ShadingJacobian::default());
    }
    let color = g.shade(s.basecolor, s.metalness, g.specular_lobe(s.roughness), e);

    let n = s.normal.normalize();
    let h = (l + v).normalize();
    let m = s.metalness;
    let nl = g.n_dot_l;
    let nv = g.n_dot_v;
    let nh = g.n_dot_h;
    let fw = g.fresnel_w;

    let floored = s.roughness <= ROUGHNESS_FLOOR;
    let r = s.roughness.max(ROUGHNESS_FLOOR);
    let a2 = (r * r) * (r * r);
    let t = nh * nh * (a2 - 1.0) + 1.0;
    let d = a2 / (PI * t * t);
    let k = geometry_k(r);
    let gv = g1(nv, k);
    let gl = g1(nl, k);
    let den = 4.0 * nv * nl + SPECULAR_EPS;
    let lobe = d * gv * gl / den;

    // roughness
    let dd_dr = if floored {
        0.0
    } else {
        let da2_dr = 4.0 * r * r * r;
        (t - 2.0 * a2 * nh * nh) / (PI * t * t * t) * da2_dr
    };
    let dk_dr = if floored { 0.0 } else { (r + 1.0) / 4.0 };
    let dg1_dk = |x: f64| {
        let q = x * (1.0 - k) + k;
        -x * (1.0 - x) / (q * q)
    };
    let dg_dr = (dg1_dk(nv) * gl + gv * dg1_dk(nl)) * dk_dr;
    let dlobe_dr = (dd_dr * gv * gl + d * dg_dr) / den;

    // geometry scalars
    let dg1_dx = |x: f64| {
        let q = x * (1.0 - k) + k;
        k / (q * q)
    };
    let dlobe_dnl = d * gv * (dg1_dx(nl) * den - gl * 4.0 * nv) / (den * den);
    let dlobe_dnv = d * gl * (dg1_dx(nv) * den - gv * 4.0 * nl) / (den * den);
    let dd_dnh = -4.0 * a2 * nh * (a2 - 1.0) / (PI * t * t * t);
    let dlobe_dnh = dd_dnh * gv * gl / den;

    // Clamped dot products contribute no derivative outside their range.
    let raw_nv = n.dot(v);
    let raw_nh = n.dot(h);
    let nv_active = (0.0..=1.0).contains(&raw_nv);
    let nh_active = (0.0..=1.0).contains(&raw_nh);

    let mut jac = ShadingJacobian::default();
    let b = s.basecolor;
    for c in 0..3 {
        let bc = b[c];
        let ec = e[c];
        let f0 = DIELECTRIC_F0 + (bc - DIELECTRIC_F0) * m;
        let f = f0 + (1.0 - f0) * fw;
        let diffuse = (1.0 - f) * bc * FRAC_1_PI * (1.0 - m);

        let df_db = m * (1.0 - fw);
        let ddiff_db = ((1.0 - f) - df_db * bc) * FRAC_1_PI * (1.0 - m);
        jac.d_basecolor[c][c] = (ddiff_db + df_db * lobe) * nl * ec;

        let df_dm = (bc - DIELECTRIC_F0) * (1.0 - fw);
        let ddiff_dm = (-df_dm * (1.0 - m) - (1.0 - f)) * bc * FRAC_1_PI;
        jac.d_metalness[c] = (ddiff_dm + df_dm * lobe) * nl * ec;

        jac.d_roughness[c] = f * dlobe_dr * nl * ec;

        let dc_dnl = (diffuse + f * lobe) * ec + f * dlobe_dnl * nl * ec;
        let dc_dnv = if nv_active { f * dlobe_dnv * nl * ec } else { 0.0 };
        let dc_dnh = if nh_active { f * dlobe_dnh * nl * ec } else { 0.0 };
        let grad = l * dc_dnl + v * dc_dnv + h * dc_dnh;
        // Project onto the tangent plane: grad - n (n·grad).
        let tangent = grad - n * n.dot(grad);
        jac.d_normal[c] = tangent.to_array();
    }
    (color, jac)
}

/// Renders a material under one directional light. Rows are shaded in parallel.
pub fn render(mat: &MaterialSet, light: &DirectionalLight, view: &ViewConfig) -> Result<TextureImage> {
    let (w, h) = mat.dims();
    let l = light.direction();
    let e = light.radiance();
    let v = view.direction();
    let mut data = vec![0f32; w * h * 3];
    data.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let s = BrdfSample::from_material(mat, y * w + x);
            let c = shade_dir(&s, l, e, v);
            row[x * 3] = c.x as f32;
            row[x * 3 + 1] = c.y as f32;
            row[x * 3 + 2] = c.z as f32;
        }
    });
    TextureImage::new(w, h, 3, data, ColorSpace::Linear)
}

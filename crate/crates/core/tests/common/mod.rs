//! Independent oracles shared by the integration suites. The oracles never
//! call into the shading or search code they check; `fd_check` differences
//! the public shading numerically to check its analytic Jacobian.
#![allow(dead_code)]

use std::f64::consts::PI;

use chordkit::chain::RmSearchSpace;
use chordkit::{shade_pixel, shade_pixel_with_jacobian, BrdfSample, DirectionalLight, TextureImage, Vec3, ViewConfig};
use rand::Rng;

/// Cook-Torrance written out term by term from the textbook definitions.
pub fn cook_torrance_oracle(
    basecolor: [f64; 3],
    normal: [f64; 3],
    roughness: f64,
    metalness: f64,
    light_dir: [f64; 3],
    radiance: [f64; 3],
) -> [f64; 3] {
    let norm = |v: [f64; 3]| {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / l, v[1] / l, v[2] / l]
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let n = norm(normal);
    let l = light_dir;
    let v = [0.0, 0.0, 1.0];
    let n_l = dot(n, l);
    if n_l <= 0.0 {
        return [0.0; 3];
    }
    let h = norm([l[0] + v[0], l[1] + v[1], l[2] + v[2]]);
    let n_v = dot(n, v).clamp(0.0, 1.0);
    let n_h = dot(n, h).clamp(0.0, 1.0);
    let h_v = dot(h, v).clamp(0.0, 1.0);

    let r = roughness.max(0.01);
    let alpha = r * r;
    let alpha_sq = alpha * alpha;
    let denom = n_h * n_h * (alpha_sq - 1.0) + 1.0;
    let ndf = alpha_sq / (PI * denom * denom);

    let k = (r + 1.0).powi(2) / 8.0;
    let schlick = |x: f64| x / (x * (1.0 - k) + k);
    let geo = schlick(n_v) * schlick(n_l);

    let mut out = [0.0; 3];
    for c in 0..3 {
        let f0 = 0.04 * (1.0 - metalness) + basecolor[c] * metalness;
        let fres = f0 + (1.0 - f0) * (1.0 - h_v).powi(5);
        let kd = 1.0 - fres;
        let diffuse = kd * basecolor[c] / PI * (1.0 - metalness);
        let specular = ndf * geo * fres / (4.0 * n_v * n_l + 1e-6);
        out[c] = (diffuse + specular) * n_l * radiance[c];
    }
    out
}

pub fn oracle_for(s: &BrdfSample, light: &DirectionalLight) -> [f64; 3] {
    cook_torrance_oracle(
        s.basecolor.to_array(),
        s.normal.to_array(),
        s.roughness,
        s.metalness,
        light.direction().to_array(),
        light.radiance().to_array(),
    )
}

/// Straightforward per-pixel, per-candidate search through the public
/// `shade_pixel`.
pub fn naive_grid_search(
    rgb: &TextureImage,
    basecolor: &TextureImage,
    normal: &TextureImage,
    light: &DirectionalLight,
    space: &RmSearchSpace,
) -> (Vec<f32>, Vec<f32>) {
    let view = chordkit::ViewConfig::default();
    let mut rs = Vec::new();
    let mut ms = Vec::new();
    for i in 0..rgb.pixel_count() {
        let target = rgb.pixel(i);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &r in space.roughness_levels() {
            for m in [0.0, 1.0] {
                let s = BrdfSample {
                    basecolor: basecolor.rgb(i),
                    normal: normal.rgb(i),
                    roughness: r,
                    metalness: m,
                };
                let c = chordkit::shade_pixel(&s, light, &view);
                let mut err = 0.0;
                for k in 0..3 {
                    let d = c[k] - target[k] as f64;
                    err += d * d;
                }
                if err < best.0 {
                    best = (err, r, m);
                }
            }
        }
        rs.push(best.1 as f32);
        ms.push(best.2 as f32);
    }
    (rs, ms)
}

pub fn random_unit_upper(rng: &mut impl rand::Rng, min_z: f64) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0));
        let l = v.length();
        if l > 0.1 && l <= 1.0 && v.z / l >= min_z {
            return v * (1.0 / l);
        }
    }
}

pub fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n as f64).sqrt()
}

pub fn random_sample(rng: &mut impl Rng, min_rough: f64) -> BrdfSample {
    BrdfSample::new(
        Vec3::new(rng.gen(), rng.gen(), rng.gen()),
        random_unit_upper(rng, 0.2),
        rng.gen_range(min_rough..1.0),
        rng.gen(),
    )
    .unwrap()
}

pub fn random_light(rng: &mut impl Rng) -> DirectionalLight {
    let r = rng.gen_range(0.5..4.0);
    DirectionalLight::new(random_unit_upper(rng, 0.1), [r, r * 0.8, r * 1.1]).unwrap()
}

/// Worst relative error of the analytic Jacobian against central
/// differences with step `h`, over every parameter and output channel.
pub fn fd_check(s: &BrdfSample, light: &DirectionalLight, h: f64) -> f64 {
    let view = ViewConfig::default();
    let (_, jac) = shade_pixel_with_jacobian(s, light, &view);
    let f = |t: &BrdfSample| shade_pixel(t, light, &view);
    let mut worst: f64 = 0.0;
    let mut cmp = |analytic: f64, plus: Vec3, minus: Vec3, c: usize| {
        let fd = (plus[c] - minus[c]) / (2.0 * h);
        let err = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3);
        worst = worst.max(err);
    };
    for j in 0..3 {
        let mut p = *s;
        let mut m = *s;
        let mut bp = p.basecolor.to_array();
        let mut bm = m.basecolor.to_array();
        bp[j] += h;
        bm[j] -= h;
        p.basecolor = Vec3::from_array(bp);
        m.basecolor = Vec3::from_array(bm);
        let (fp, fm) = (f(&p), f(&m));
        for c in 0..3 {
            cmp(jac.d_basecolor[c][j], fp, fm, c);
        }
    }
    {
        let (mut p, mut m) = (*s, *s);
        p.roughness += h;
        m.roughness -= h;
        let (fp, fm) = (f(&p), f(&m));
        for c in 0..3 {
            cmp(jac.d_roughness[c], fp, fm, c);
        }
    }
    {
        let (mut p, mut m) = (*s, *s);
        p.metalness += h;
        m.metalness -= h;
        let (fp, fm) = (f(&p), f(&m));
        for c in 0..3 {
            cmp(jac.d_metalness[c], fp, fm, c);
        }
    }
    // Normal: move along two tangent directions; the shading normalizes.
    let n = s.normal;
    let t1 = if n.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let t1 = (t1 - n * n.dot(t1)).normalize();
    let t2 = Vec3::new(n.y * t1.z - n.z * t1.y, n.z * t1.x - n.x * t1.z, n.x * t1.y - n.y * t1.x);
    for t in [t1, t2] {
        let (mut p, mut m) = (*s, *s);
        p.normal = n + t * h;
        m.normal = n - t * h;
        let (fp, fm) = (f(&p), f(&m));
        for c in 0..3 {
            let analytic = (0..3).map(|j| jac.d_normal[c][j] * t[j]).sum::<f64>();
            cmp(analytic, fp, fm, c);
        }
    }
    worst
}

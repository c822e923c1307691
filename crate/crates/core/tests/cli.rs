mod common;

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chordkit::brdf::render;
use chordkit::chain::{grid_search_rm, RmSearchSpace};
use chordkit::io::{
    read_exr, read_material_dir, read_png, write_exr, write_material_dir, write_png16, MaterialDirLayout,
};
use chordkit::synth::{random_material, MaterialRecipe};
use chordkit::types::{encode_normal, flat_normals, ColorSpace};
use chordkit::{BrdfSample, DirectionalLight, MaterialSet, TextureImage, Vec3, ViewConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/fixtures")
}

fn chordkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordkit"))
        .args(args)
        .env("CHORDKIT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SINE_AMPLITUDE: f64 = 2.0;
const SINE_SIZE: usize = 256;

fn sine_height(x: usize) -> f64 {
    SINE_AMPLITUDE * (TAU * x as f64 / SINE_SIZE as f64).sin()
}

/// Rewrites the bundled fixtures. Run with `--ignored` after changing them.
#[test]
#[ignore]
fn regenerate_fixtures() {
    let root = fixtures();
    let gray = MaterialSet::uniform(16, 16, [0.5; 3], 0.5, 0.0).unwrap();
    write_material_dir(&root.join("flat_gray"), &gray, 1.0).unwrap();

    let n = SINE_SIZE;
    let normal = TextureImage::from_fn(n, n, 3, |x, _, c| {
        let slope = SINE_AMPLITUDE * TAU / n as f64 * (TAU * x as f64 / n as f64).cos();
        encode_normal(Vec3::new(-slope, 0.0, 1.0).normalize())[c] as f32
    })
    .unwrap();
    write_png16(&root.join("sine/normal.png"), &normal).unwrap();
    let height = TextureImage::from_fn(n, n, 1, |x, _, _| sine_height(x) as f32).unwrap();
    write_exr(&root.join("sine/height_analytic.exr"), &height).unwrap();
}

#[test]
fn render_matches_scalar_oracle_on_gray_fixture() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    let o = chordkit(&["render", "--material", s(&fixtures().join("flat_gray")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("render:"));
    let mat = read_material_dir(&fixtures().join("flat_gray")).unwrap();
    let img = read_exr(&out.join("render.exr"), 3).unwrap();
    let light = DirectionalLight::new(Vec3::Z, [PI; 3]).unwrap();
    for i in 0..img.pixel_count() {
        let sample = BrdfSample {
            basecolor: mat.basecolor().rgb(i),
            normal: Vec3::Z,
            roughness: 0.5,
            metalness: 0.0,
        };
        let want = common::oracle_for(&sample, &light);
        for c in 0..3 {
            assert!((img.pixel(i)[c] as f64 - want[c]).abs() <= 1.0 / 65535.0);
        }
    }
    assert!(out.join("render.png").is_file());

    let again = tmp.path().join("r2");
    assert!(chordkit(&["render", "--material", s(&fixtures().join("flat_gray")), "--out", s(&again)])
        .status
        .success());
    assert_eq!(fs::read(out.join("render.exr")).unwrap(), fs::read(again.join("render.exr")).unwrap());
}

#[test]
fn missing_inputs_exit_with_io_code() {
    let tmp = TempDir::new().unwrap();
    let o = chordkit(&["render", "--material", "/nonexistent/dir", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let o = chordkit(&["render", "--material", s(&empty), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("basecolor.png"));
}

#[test]
fn config_errors_exit_64() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"light": {"azimuth_deg": 0, "elevation_deg": 45}, "typo": 1}"#).unwrap();
    let gray = fixtures().join("flat_gray");
    let o = chordkit(&["render", "--material", s(&gray), "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(chordkit(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(chordkit(&["render"]).status.code(), Some(64));
    let o = chordkit(&["render", "--material", s(&gray)]);
    assert_eq!(o.status.code(), Some(64), "no output directory");
    assert_eq!(chordkit(&["--help"]).status.code(), Some(0));
}

#[test]
fn integrate_recovers_bundled_sine_height() {
    let tmp = TempDir::new().unwrap();
    let o = chordkit(&["integrate", "--normal", s(&fixtures().join("sine/normal.png")), "--out", s(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = read_exr(&tmp.path().join("height.exr"), 1).unwrap();
    let want = read_exr(&fixtures().join("sine/height_analytic.exr"), 1).unwrap();
    let rmse = common::rms(got.data().iter().zip(want.data()).map(|(a, b)| (a - b) as f64));
    assert!(rmse < 1e-3, "rmse {rmse}");
    assert!(tmp.path().join("height.png").is_file());
    assert!(tmp.path().join("meta.json").is_file());
}

/// Dielectric material with roughness drawn from the search grid (at or above
/// `min_roughness`), rendered under `light` to `input.exr`, truth in `gt/`.
/// Glossy pixels bias the diffuse-only light fit, so light-recovery fixtures
/// keep to the rough end of the grid.
fn grid_fixture(dir: &Path, light: &DirectionalLight, min_roughness: f64) -> MaterialSet {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let levels: Vec<f32> = RmSearchSpace::standard()
        .roughness_levels()
        .iter()
        .filter(|&&v| v >= min_roughness)
        .map(|&v| v as f32)
        .collect();
    let mat = random_material(
        24,
        24,
        &MaterialRecipe {
            basecolor: (0.2, 0.8),
            roughness_levels: levels,
            metal_fraction: 0.0,
            ..Default::default()
        },
        &mut rng,
    )
    .unwrap();
    let rgb = render(&mat, light, &ViewConfig::default()).unwrap();
    write_exr(&dir.join("input.exr"), &rgb).unwrap();
    write_material_dir(&dir.join("gt"), &mat, 1.0).unwrap();
    mat
}

#[test]
fn gridsearch_command_equals_library_call() {
    let tmp = TempDir::new().unwrap();
    let light = DirectionalLight::from_angles(60.0, 50.0, [PI; 3]).unwrap();
    grid_fixture(tmp.path(), &light, 0.0);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"light": {"azimuth_deg": 60, "elevation_deg": 50}}"#).unwrap();
    let gt = MaterialDirLayout::new(tmp.path().join("gt"));
    let out = tmp.path().join("gs");
    let o = chordkit(&[
        "gridsearch-rm",
        "--input",
        s(&tmp.path().join("input.exr")),
        "--basecolor",
        s(&gt.basecolor()),
        "--normal",
        s(&gt.normal()),
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // Same inputs through the library, read back exactly as the command does.
    let rgb = read_exr(&tmp.path().join("input.exr"), 3).unwrap();
    let b = chordkit::types::srgb_to_linear(&read_png(&gt.basecolor(), ColorSpace::Srgb).unwrap()).unwrap();
    let n = chordkit::io::decode_normal_image(&read_png(&gt.normal(), ColorSpace::Linear).unwrap()).unwrap();
    let (r, m) = grid_search_rm(&rgb, &b, &n, &light, &RmSearchSpace::standard()).unwrap();
    let written_r = read_png(&out.join("rm_r.png"), ColorSpace::Linear).unwrap();
    let written_m = read_png(&out.join("rm_m.png"), ColorSpace::Linear).unwrap();
    assert_eq!(written_r.data(), r.data());
    assert_eq!(written_m.data(), m.data());
}

#[test]
fn chain_command_writes_layout_and_recovers_light() {
    let tmp = TempDir::new().unwrap();
    let light = DirectionalLight::from_angles(30.0, 45.0, [PI; 3]).unwrap();
    grid_fixture(tmp.path(), &light, 0.6);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = chordkit(&[
            "chain",
            "--input",
            s(&tmp.path().join("input.exr")),
            "--predictor",
            "oracle",
            "--gt",
            s(&tmp.path().join("gt")),
            "--seed",
            "5",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in [
        "basecolor.png",
        "normal.png",
        "roughness.png",
        "metalness.png",
        "height.png",
        "meta.json",
        "irradiance.exr",
        "rm_r.png",
        "rm_m.png",
        "light_estimate.json",
    ] {
        let x = fs::read(a.join(f)).unwrap_or_else(|_| panic!("{f} missing"));
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let space = RmSearchSpace::standard();
    let rm = read_png(&a.join("rm_r.png"), ColorSpace::Linear).unwrap();
    assert!(rm.data().iter().all(|&v| space.contains_roughness(v)));
    let est: serde_json::Value = serde_json::from_slice(&fs::read(a.join("light_estimate.json")).unwrap()).unwrap();
    let d = est["direction"].as_array().unwrap();
    let dir = Vec3::new(d[0].as_f64().unwrap(), d[1].as_f64().unwrap(), d[2].as_f64().unwrap());
    let err = dir.angle_to(light.direction()).to_degrees();
    assert!(err < 3.0, "light error {err}°");
}

#[test]
fn oracle_predictor_without_truth_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    write_exr(&tmp.path().join("in.exr"), &TextureImage::filled(4, 4, 3, 0.2).unwrap()).unwrap();
    let o = chordkit(&["chain", "--input", s(&tmp.path().join("in.exr")), "--predictor", "oracle", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn predictor_failure_exits_3_naming_the_step() {
    let tmp = TempDir::new().unwrap();
    let light = DirectionalLight::from_angles(30.0, 45.0, [PI; 3]).unwrap();
    grid_fixture(tmp.path(), &light, 0.6);
    // Ground truth of a different size makes the oracle's basecolor step fail.
    write_material_dir(&tmp.path().join("small"), &MaterialSet::uniform(8, 8, [0.5; 3], 0.5, 0.0).unwrap(), 1.0)
        .unwrap();
    let o = chordkit(&[
        "chain",
        "--input",
        s(&tmp.path().join("input.exr")),
        "--predictor",
        "oracle",
        "--gt",
        s(&tmp.path().join("small")),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("basecolor"));
}

#[test]
fn eval_of_directory_against_itself_reports_inf() {
    let tmp = TempDir::new().unwrap();
    let light = DirectionalLight::from_angles(30.0, 45.0, [PI; 3]).unwrap();
    grid_fixture(tmp.path(), &light, 0.6);
    let gt = tmp.path().join("gt");
    let o = chordkit(&["eval", "--pred", s(&gt), "--gt", s(&gt), "--out", s(&tmp.path().join("e"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("e/eval.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for ch in ["basecolor", "normal", "roughness", "metalness", "height"] {
        assert_eq!(v["per_channel"][ch]["psnr_db"], "inf", "{ch}");
    }
    assert_eq!(v["relit"]["psnr_db"], "inf");
    assert!(String::from_utf8_lossy(&o.stdout).contains("relit inf"));
}

#[test]
fn irradiance_and_light_commands_compose() {
    let tmp = TempDir::new().unwrap();
    let light = DirectionalLight::from_angles(200.0, 55.0, [PI; 3]).unwrap();
    grid_fixture(tmp.path(), &light, 0.6);
    let gt = MaterialDirLayout::new(tmp.path().join("gt"));
    let o = chordkit(&[
        "irradiance",
        "--input",
        s(&tmp.path().join("input.exr")),
        "--basecolor",
        s(&gt.basecolor()),
        "--out",
        s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = chordkit(&[
        "estimate-light",
        "--irradiance",
        s(&tmp.path().join("irradiance.exr")),
        "--normal",
        s(&gt.normal()),
        "--out",
        s(tmp.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = chordkit::cli::LightEstimateFile::load(&tmp.path().join("light_estimate.json")).unwrap();
    assert!(f.light().unwrap().direction().angle_to(light.direction()).to_degrees() < 3.0);
}

#[test]
fn optimize_command_writes_material() {
    let tmp = TempDir::new().unwrap();
    let mat = MaterialSet::uniform(8, 8, [0.3, 0.5, 0.7], 0.6, 0.0).unwrap();
    let light = DirectionalLight::new(Vec3::Z, [PI; 3]).unwrap();
    write_exr(&tmp.path().join("in.exr"), &render(&mat, &light, &ViewConfig::default()).unwrap()).unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"optimizer": {"iterations": 30}}"#).unwrap();
    let out = tmp.path().join("o");
    let o = chordkit(&["optimize", "--input", s(&tmp.path().join("in.exr")), "--config", s(&cfg), "--out", s(&out), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let back = read_material_dir(&out).unwrap();
    assert_eq!(back.dims(), (8, 8));
    let obj: Vec<f64> = serde_json::from_slice(&fs::read(out.join("objective.json")).unwrap()).unwrap();
    assert_eq!(obj.len(), 31);
    assert!(obj.last().unwrap() < &obj[0]);
}

#[test]
fn png_roundtrip_stays_within_quantization() {
    let tmp = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mat = random_material(17, 11, &MaterialRecipe { metal_fraction: 0.5, ..Default::default() }, &mut rng).unwrap();
    write_material_dir(tmp.path(), &mat, 1.0).unwrap();
    let back = read_material_dir(tmp.path()).unwrap();
    let q = 1.0 / 65535.0 + 1e-7;
    for (a, b) in [(mat.roughness(), back.roughness()), (mat.metalness(), back.metalness())] {
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= q as f32));
    }
    // sRGB decode amplifies the code step by at most 12.92·(1/65535) near 0.
    assert!(mat
        .basecolor()
        .data()
        .iter()
        .zip(back.basecolor().data())
        .all(|(x, y)| (x - y).abs() <= 12.92 / 65535.0));
    let span = mat.height().data().iter().fold(0f32, |m, v| m.max(v.abs())) * 2.0;
    assert!(mat.height().data().iter().zip(back.height().data()).all(|(x, y)| (x - y).abs() <= span / 65535.0 * 1.5));
    for i in 0..mat.normal().pixel_count() {
        assert!(mat.normal().rgb(i).angle_to(back.normal().rgb(i)) < 1e-4);
    }
}

#[test]
fn exr_roundtrip_is_exact() {
    let tmp = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    use rand::Rng;
    let img = TextureImage::from_fn(13, 7, 3, |_, _, _| rng.gen_range(-5.0..50.0)).unwrap();
    let p = tmp.path().join("x.exr");
    write_exr(&p, &img).unwrap();
    assert_eq!(read_exr(&p, 3).unwrap(), img);
    let one = TextureImage::from_fn(13, 7, 1, |x, y, _| (x * y) as f32 * 0.37).unwrap();
    write_exr(&p, &one).unwrap();
    assert_eq!(read_exr(&p, 1).unwrap(), one);
}

#[test]
fn missing_optional_channels_use_defaults() {
    let tmp = TempDir::new().unwrap();
    let mat = MaterialSet::uniform(5, 5, [0.2, 0.4, 0.6], 0.9, 1.0).unwrap();
    write_material_dir(tmp.path(), &mat, 1.0).unwrap();
    for f in ["normal.png", "roughness.png", "metalness.png", "height.png", "meta.json"] {
        fs::remove_file(tmp.path().join(f)).unwrap();
    }
    let back = read_material_dir(tmp.path()).unwrap();
    assert!(back.roughness().data().iter().all(|&v| v == 0.5));
    assert!(back.metalness().data().iter().all(|&v| v == 0.0));
    assert_eq!(back.normal(), &flat_normals(5, 5).unwrap());
    assert!(back.height().data().iter().all(|&v| v == 0.0));
}

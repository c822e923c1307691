//! Renders a random tileable material under an oblique light and writes the
//! linear EXR plus an sRGB preview.
//!
//! cargo run --example render_material -- [out_dir]

use std::f64::consts::PI;
use std::path::PathBuf;

use chordkit::brdf::render;
use chordkit::io::{write_exr, write_material_dir, write_preview_png};
use chordkit::synth::{random_material, MaterialRecipe};
use chordkit::{DirectionalLight, ViewConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-render".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let recipe = MaterialRecipe {
        metal_fraction: 0.2,
        ..Default::default()
    };
    let mat = random_material(128, 128, &recipe, &mut rng)?;
    let light = DirectionalLight::from_angles(45.0, 50.0, [PI; 3])?;
    let img = render(&mat, &light, &ViewConfig::default())?;

    write_material_dir(&out.join("material"), &mat, 1.0)?;
    write_exr(&out.join("render.exr"), &img)?;
    write_preview_png(&out.join("render.png"), &img)?;
    println!("mean radiance {:.4}, written to {}", img.mean(), out.display());
    Ok(())
}

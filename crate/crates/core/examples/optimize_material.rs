//! Fits basecolor, roughness and metalness to a single render by projected
//! descent on the render loss, starting from a uniform gray guess.
//!
//! cargo run --release --example optimize_material

use std::f64::consts::PI;

use chordkit::brdf::render;
use chordkit::optim::{optimize_material, OptimConfig, ParamMask};
use chordkit::synth::{random_material, MaterialRecipe};
use chordkit::{DirectionalLight, MaterialSet, ViewConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let recipe = MaterialRecipe {
        roughness_levels: vec![0.3, 0.5, 0.7],
        metal_fraction: 0.25,
        ..Default::default()
    };
    let truth = random_material(64, 64, &recipe, &mut rng)?;
    let light = DirectionalLight::from_angles(135.0, 50.0, [PI; 3])?;
    let rgb = render(&truth, &light, &ViewConfig::default())?;

    let init = MaterialSet::uniform(64, 64, [0.5; 3], 0.5, 0.0)?
        .with_normal_and_height(truth.normal().clone(), truth.height().clone())?;
    let config = OptimConfig {
        iterations: 300,
        optimize: ParamMask {
            normal: false,
            ..ParamMask::ALL
        },
        ..Default::default()
    };
    let out = optimize_material(&rgb, &light, &init, &config)?;
    for (i, v) in out.objective.iter().enumerate().step_by(50) {
        println!("iteration {i:4}: render l1 {v:.5}");
    }
    println!("final: render l1 {:.5}", out.objective.last().unwrap());
    Ok(())
}

//! Runs the full chain with ground-truth predictors and reports what the
//! closed-form stages recover: the light direction and the roughness /
//! metalness maps from the grid search. The search is run once under the
//! estimated light and once under the true light, which shows how sensitive
//! exact grid recovery is to a few degrees of light error.
//!
//! cargo run --example chain_oracle

use std::f64::consts::PI;

use chordkit::brdf::render;
use chordkit::chain::{run_chain_with, ChainOptions, OraclePredictors, RmSearchSpace};
use chordkit::synth::{random_material, MaterialRecipe};
use chordkit::{DirectionalLight, ViewConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    let space = RmSearchSpace::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let recipe = MaterialRecipe {
        roughness_levels: space.roughness_levels().iter().filter(|&&r| r >= 0.6).map(|&r| r as f32).collect(),
        ..Default::default()
    };
    let truth = random_material(96, 96, &recipe, &mut rng)?;
    let light = DirectionalLight::from_angles(120.0, 55.0, [PI; 3])?;
    let rgb = render(&truth, &light, &ViewConfig::default())?;

    let suite = OraclePredictors { truth: truth.clone() };
    let exact = |a: &[f32], b: &[f32]| a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
    for (label, known_light) in [("estimated light", None), ("true light", Some(light))] {
        let opts = ChainOptions {
            known_light,
            ..Default::default()
        };
        let (mat, state) = run_chain_with(&rgb, &suite, &space, &opts)?;
        let (az, el) = state.estimated_light.light.angles_deg();
        let err = state.estimated_light.light.direction().angle_to(light.direction()).to_degrees();
        println!("{label}: estimate azimuth {az:.2}°, elevation {el:.2}° (error {err:.2}°)");
        println!(
            "  roughness exact {:.1}%, metalness exact {:.1}%",
            100.0 * exact(mat.roughness().data(), truth.roughness().data()),
            100.0 * exact(mat.metalness().data(), truth.metalness().data())
        );
    }
    Ok(())
}

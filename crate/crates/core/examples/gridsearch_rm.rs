//! Brute-force roughness/metalness search over the 41 × 2 candidate grid,
//! given basecolor, normals and the light.
//!
//! cargo run --example gridsearch_rm

use std::f64::consts::PI;

use chordkit::brdf::render;
use chordkit::chain::{grid_search_rm, RmSearchSpace};
use chordkit::synth::{random_material, MaterialRecipe};
use chordkit::{DirectionalLight, ViewConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    let space = RmSearchSpace::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let recipe = MaterialRecipe {
        roughness_levels: space.roughness_levels().iter().map(|&r| r as f32).collect(),
        metal_fraction: 0.5,
        ..Default::default()
    };
    let truth = random_material(64, 64, &recipe, &mut rng)?;
    let light = DirectionalLight::from_angles(30.0, 60.0, [PI; 3])?;
    let rgb = render(&truth, &light, &ViewConfig::default())?;

    let (r, m) = grid_search_rm(&rgb, truth.basecolor(), truth.normal(), &light, &space)?;
    let hits = (0..r.pixel_count())
        .filter(|&i| r.data()[i] == truth.roughness().data()[i] && m.data()[i] == truth.metalness().data()[i])
        .count();
    println!("{} candidates, {hits}/{} pixels recovered exactly", space.len(), r.pixel_count());
    Ok(())
}

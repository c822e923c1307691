//! Divides a render by its basecolor to get irradiance, then fits a
//! directional light to it against the surface normals.
//!
//! cargo run --example estimate_light

use std::f64::consts::PI;

use chordkit::brdf::render;
use chordkit::chain::{compute_irradiance, estimate_light};
use chordkit::synth::{random_material, MaterialRecipe};
use chordkit::{DirectionalLight, ViewConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let recipe = MaterialRecipe {
        roughness_levels: vec![0.8],
        ..Default::default()
    };
    let mat = random_material(64, 64, &recipe, &mut rng)?;
    for (az, el) in [(0.0, 80.0), (90.0, 60.0), (200.0, 40.0), (300.0, 25.0)] {
        let light = DirectionalLight::from_angles(az, el, [PI; 3])?;
        let rgb = render(&mat, &light, &ViewConfig::default())?;
        let irr = compute_irradiance(&rgb, mat.basecolor())?;
        let est = estimate_light(&irr, mat.normal())?;
        let (eaz, eel) = est.light.angles_deg();
        println!(
            "true ({az:5.1}°, {el:4.1}°) -> estimate ({eaz:5.1}°, {eel:4.1}°), error {:.2}°, residual {:.2e}",
            est.light.direction().angle_to(light.direction()).to_degrees(),
            est.residual_mse
        );
    }
    Ok(())
}

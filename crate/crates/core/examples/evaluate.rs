//! Scores a perturbed material against its ground truth: per-channel PSNR,
//! relit PSNR over the standard light battery, and height seam energy.
//!
//! cargo run --example evaluate

use chordkit::eval::{evaluate_material, LightBattery};
use chordkit::synth::{random_material, MaterialRecipe};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gt = random_material(64, 64, &MaterialRecipe::default(), &mut rng)?;
    let roughness = gt.roughness().map(|r| (r + 0.05).min(1.0))?;
    let basecolor = gt.basecolor().map(|b| b * 0.9)?;
    let pred = gt
        .with_roughness_metalness(roughness, gt.metalness().clone())?
        .with_basecolor(basecolor)?;
    let report = evaluate_material(&pred, &gt, &LightBattery::standard())?;
    println!("{}", report.to_json_pretty());
    Ok(())
}

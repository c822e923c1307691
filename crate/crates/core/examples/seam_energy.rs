//! Seam energy compares the wrap-around seam against the neighbouring
//! interior: about 1 for tileable images, large for hard borders.
//!
//! cargo run --example seam_energy

use std::f64::consts::TAU;

use chordkit::eval::seam_energy;
use chordkit::TextureImage;

fn main() -> chordkit::Result<()> {
    let n = 64;
    let periodic = TextureImage::from_fn(n, n, 1, |x, y, _| {
        ((TAU * x as f64 / n as f64).sin() * (TAU * 2.0 * y as f64 / n as f64).cos()) as f32
    })?;
    let ramp = TextureImage::from_fn(n, n, 1, |x, _, _| x as f32 / (n - 1) as f32)?;
    println!("periodic pattern: {:.3}", seam_energy(&periodic));
    println!("horizontal ramp:  {:.3}", seam_energy(&ramp));
    Ok(())
}

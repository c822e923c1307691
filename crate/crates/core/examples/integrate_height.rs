//! Normal map → height via the periodic Poisson solve, checked against the
//! height the normals came from.
//!
//! cargo run --example integrate_height -- [normal.png]

use chordkit::height::{height_to_normals, integrate_normals};
use chordkit::io::{decode_normal_image, read_png};
use chordkit::synth::band_limited_height;
use chordkit::types::ColorSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chordkit::Result<()> {
    if let Some(path) = std::env::args().nth(1) {
        let normal = decode_normal_image(&read_png(path.as_ref(), ColorSpace::Linear)?.to_rgb())?;
        let h = integrate_normals(&normal, 1.0)?;
        let (lo, hi) = h.data().iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        println!("{}x{} height, range [{lo:.3}, {hi:.3}]", h.width(), h.height());
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = band_limited_height(256, 256, 8, 16, 6.0, &mut rng)?;
    let normal = height_to_normals(&truth, 1.0)?;
    let back = integrate_normals(&normal, 1.0)?;
    let sq = |it: &mut dyn Iterator<Item = f64>| {
        let (s, n) = it.fold((0.0, 0), |(s, n), v| (s + v * v, n + 1));
        (s / n as f64).sqrt()
    };
    let rms = sq(&mut truth.data().iter().map(|&v| v as f64));
    let err = sq(&mut back.data().iter().zip(truth.data()).map(|(a, b)| (a - b) as f64));
    println!("height rms {rms:.4}, reconstruction rmse {err:.2e}");
    Ok(())
}

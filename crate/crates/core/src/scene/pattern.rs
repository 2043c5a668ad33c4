//! Procedural projector dot patterns.

use rand::Rng;

use crate::img::ImageF;
use crate::math::rng_for;

/// Pseudo-random binary dot texture: each texel is 1 with probability
/// `density`. Stands in for a hardware-extracted projector pattern.
pub fn bernoulli_pattern(width: usize, height: usize, density: f32, seed: u64) -> ImageF {
    let mut rng = rng_for(seed, 0xd07);
    let mut img = ImageF::new(width, height, 1);
    for v in img.data_mut() {
        *v = if rng.gen::<f32>() < density { 1.0 } else { 0.0 };
    }
    img
}

/// Left-right mirror-symmetric variant (pattern(x) == pattern(w-1-x)).
pub fn symmetric_pattern(width: usize, height: usize, density: f32, seed: u64) -> ImageF {
    let mut img = bernoulli_pattern(width, height, density, seed);
    let w = width;
    for y in 0..height {
        for x in 0..w / 2 {
            let v = img.get(x, y, 0);
            img.set(w - 1 - x, y, 0, v);
        }
    }
    img
}

//! Center-symmetric census transform.
//!
//! Each pixel gets a bitstring comparing the floor(w*h/2) point-symmetric
//! pixel pairs of its window: scanning the first half of the window in
//! row-major order, bit i is 1 iff I(p_a) > I(p_b) where p_b mirrors p_a
//! through the center. Ties produce 0, which makes the transform invariant
//! to any brightness offset.

use rayon::prelude::*;

use crate::img::ImageU8;
use crate::stereo::StereoConfig;

#[derive(Clone, Debug)]
pub struct CensusImage {
    pub width: usize,
    pub height: usize,
    pub bits_per_pixel: u32,
    pub data: Vec<u128>,
    /// False where the window exits the image.
    pub valid: Vec<bool>,
}

pub fn census(img: &ImageU8, cfg: &StereoConfig) -> CensusImage {
    assert_eq!(img.channels(), 1, "census expects grayscale input");
    let (w, h) = (img.width(), img.height());
    let cw = cfg.census_width;
    let ch = cfg.census_height;
    let rx = cw / 2;
    let ry = ch / 2;
    let pairs = (cw * ch) / 2;
    let src = img.data();

    let mut data = vec![0u128; w * h];
    let mut valid = vec![false; w * h];
    let rows: Vec<(usize, &mut [u128], &mut [bool])> = data
        .chunks_mut(w)
        .zip(valid.chunks_mut(w))
        .enumerate()
        .map(|(y, (d, v))| (y, d, v))
        .collect();

    rows.into_par_iter().for_each(|(y, drow, vrow)| {
        if y < ry || y + ry >= h {
            return;
        }
        for x in rx..w - rx {
            let mut code = 0u128;
            for p in 0..pairs {
                let ax = p % cw;
                let ay = p / cw;
                let bx = cw - 1 - ax;
                let by = ch - 1 - ay;
                let a = src[(y + ay - ry) * w + (x + ax - rx)];
                let b = src[(y + by - ry) * w + (x + bx - rx)];
                code = (code << 1) | u128::from(a > b);
            }
            drow[x] = code;
            vrow[x] = true;
        }
    });

    CensusImage {
        width: w,
        height: h,
        bits_per_pixel: pairs as u32,
        data,
        valid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(w: usize, h: usize) -> StereoConfig {
        StereoConfig {
            census_width: w,
            census_height: h,
            ..Default::default()
        }
    }

    #[test]
    fn constant_image_is_all_zero() {
        let img = ImageU8::filled(8, 8, 1, 77);
        let c = census(&img, &cfg(3, 3));
        for (i, &v) in c.data.iter().enumerate() {
            if c.valid[i] {
                assert_eq!(v, 0);
            }
        }
        assert_eq!(c.bits_per_pixel, 4);
    }

    #[test]
    fn single_bright_top_left_sets_one_bit() {
        // 3x3 window: pairs are (0,8) (1,7) (2,6) (3,5); a bright pixel at
        // the window's top-left sets only the (top-left, bottom-right) bit
        let mut img = ImageU8::filled(5, 5, 1, 10);
        img.set(1, 1, 0, 200); // top-left of the window centered at (2,2)
        let c = census(&img, &cfg(3, 3));
        let code = c.data[2 * 5 + 2];
        assert_eq!(code, 0b1000);
        assert_eq!(code.count_ones(), 1);
    }

    #[test]
    fn brightness_offset_invariance() {
        let mut img = ImageU8::new(16, 12, 1);
        let mut seed = 1234u32;
        for v in img.data_mut() {
            seed = seed.wrapping_mul(1664525).wrapping_add(1013904223);
            *v = (seed >> 24) as u8 % 200;
        }
        let mut shifted = img.clone();
        for v in shifted.data_mut() {
            *v += 10;
        }
        let a = census(&img, &cfg(9, 7));
        let b = census(&shifted, &cfg(9, 7));
        assert_eq!(a.data, b.data);
        assert_eq!(a.valid, b.valid);
    }

    #[test]
    fn border_pixels_are_invalid() {
        let img = ImageU8::filled(10, 10, 1, 5);
        let c = census(&img, &cfg(9, 7));
        assert!(!c.valid[0]);
        assert!(!c.valid[3 * 10 + 3]); // y=3 valid rows start at ry=3
        assert!(c.valid[3 * 10 + 4]);
        assert!(!c.valid[2 * 10 + 4]);
    }
}

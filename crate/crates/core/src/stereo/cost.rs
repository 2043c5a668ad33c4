//! Matching cost volumes: hamming distance between census bitstrings, with
//! an optional block sum (the SGBM variant).

use rayon::prelude::*;

use crate::stereo::census::CensusImage;
use crate::stereo::StereoConfig;

/// W x H x D cost tensor, row-major with disparity innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVolume<T> {
    pub width: usize,
    pub height: usize,
    pub min_disp: i32,
    pub disp_count: usize,
    pub costs: Vec<T>,
}

impl<T: Copy + Default> CostVolume<T> {
    pub fn new(width: usize, height: usize, min_disp: i32, disp_count: usize) -> Self {
        CostVolume {
            width,
            height,
            min_disp,
            disp_count,
            costs: vec![T::default(); width * height * disp_count],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, di: usize) -> usize {
        (y * self.width + x) * self.disp_count + di
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, di: usize) -> T {
        self.costs[self.idx(x, y, di)]
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.disp_count;
        &self.costs[i..i + self.disp_count]
    }
}

/// Theoretical maximum single-pixel cost for the configured mode; used for
/// out-of-range and invalid-border entries.
pub fn max_cost(cfg: &StereoConfig, bits_per_pixel: u32) -> u16 {
    let block = (cfg.block_width * cfg.block_height) as u32;
    (bits_per_pixel * block).min(u16::MAX as u32) as u16
}

/// cost(x, y, d) = hamming(left[x,y], right[x-d,y]), summed over the block
/// when block dims exceed 1x1.
pub fn matching_cost(
    left: &CensusImage,
    right: &CensusImage,
    cfg: &StereoConfig,
) -> CostVolume<u16> {
    assert_eq!(left.width, right.width);
    assert_eq!(left.height, right.height);
    let (w, h) = (left.width, left.height);
    let d0 = cfg.min_disp;
    let nd = (cfg.max_disp - cfg.min_disp) as usize;
    let invalid = max_cost(cfg, left.bits_per_pixel);
    let bw = cfg.block_width as isize;
    let bh = cfg.block_height as isize;
    let single_pixel = bw == 1 && bh == 1;

    let mut cv = CostVolume::new(w, h, d0, nd);
    cv.costs
        .par_chunks_mut(w * nd)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                for di in 0..nd {
                    let d = d0 + di as i32;
                    let xr = x as i32 - d;
                    let out = &mut row[x * nd + di];
                    if xr < 0 {
                        *out = invalid;
                        continue;
                    }
                    if single_pixel {
                        let il = y * w + x;
                        let ir = y * w + xr as usize;
                        *out = if left.valid[il] && right.valid[ir] {
                            (left.data[il] ^ right.data[ir]).count_ones() as u16
                        } else {
                            invalid
                        };
                    } else {
                        let il = y * w + x;
                        let ir = y * w + xr as usize;
                        if !left.valid[il] || !right.valid[ir] {
                            *out = invalid;
                            continue;
                        }
                        let mut sum = 0u32;
                        for by in -(bh / 2)..=bh / 2 {
                            for bx in -(bw / 2)..=bw / 2 {
                                let lx = x as isize + bx;
                                let ly = y as isize + by;
                                let rx = xr as isize + bx;
                                let per_pair = if lx >= 0
                                    && lx < w as isize
                                    && rx >= 0
                                    && rx < w as isize
                                    && ly >= 0
                                    && ly < h as isize
                                {
                                    let il = ly as usize * w + lx as usize;
                                    let ir = ly as usize * w + rx as usize;
                                    if left.valid[il] && right.valid[ir] {
                                        (left.data[il] ^ right.data[ir]).count_ones()
                                    } else {
                                        left.bits_per_pixel
                                    }
                                } else {
                                    left.bits_per_pixel
                                };
                                sum += per_pair;
                            }
                        }
                        *out = sum.min(u16::MAX as u32) as u16;
                    }
                }
            }
        });
    cv
}

/// Right-view raw cost volume by re-indexing the left one:
/// cost_r(x, y, d) = cost_l(x + d, y, d); out-of-range entries are invalid.
pub fn reindex_right(cv: &CostVolume<u16>, invalid: u16) -> CostVolume<u16> {
    let mut out = CostVolume::new(cv.width, cv.height, cv.min_disp, cv.disp_count);
    let w = cv.width;
    let nd = cv.disp_count;
    out.costs
        .par_chunks_mut(w * nd)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                for di in 0..nd {
                    let d = cv.min_disp + di as i32;
                    let xl = x as i32 + d;
                    row[x * nd + di] = if xl >= 0 && (xl as usize) < w {
                        cv.at(xl as usize, y, di)
                    } else {
                        invalid
                    };
                }
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::img::ImageU8;
    use crate::stereo::census::census;

    fn noise_image(w: usize, h: usize, seed: u32) -> ImageU8 {
        let mut img = ImageU8::new(w, h, 1);
        let mut s = seed;
        for v in img.data_mut() {
            s = s.wrapping_mul(1664525).wrapping_add(1013904223);
            *v = (s >> 24) as u8;
        }
        img
    }

    fn small_cfg() -> StereoConfig {
        StereoConfig {
            census_width: 5,
            census_height: 5,
            min_disp: 0,
            max_disp: 8,
            ..Default::default()
        }
    }

    #[test]
    fn identical_images_zero_at_d0() {
        let img = noise_image(24, 10, 7);
        let cfg = small_cfg();
        let c = census(&img, &cfg);
        let cv = matching_cost(&c, &c, &cfg);
        for y in 2..8 {
            for x in 2..22 {
                assert_eq!(cv.at(x, y, 0), 0, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn shifted_image_zero_at_true_disparity() {
        let left = noise_image(40, 12, 3);
        let d_true = 5usize;
        let mut right = ImageU8::new(40, 12, 1);
        for y in 0..12 {
            for x in 0..40 {
                let sx = (x + d_true).min(39);
                right.set(x, y, 0, left.get(sx, y, 0));
            }
        }
        let cfg = small_cfg();
        let cl = census(&left, &cfg);
        let cr = census(&right, &cfg);
        let cv = matching_cost(&cl, &cr, &cfg);
        // interior: avoid the right border where the shift clamped
        for y in 3..9 {
            for x in 8..32 {
                assert_eq!(cv.at(x, y, d_true), 0, "zero cost expected at d=5");
                let other: Vec<u16> = (0..8).filter(|&di| di != d_true).map(|di| cv.at(x, y, di)).collect();
                assert!(other.iter().any(|&c| c > 0));
            }
        }
    }

    #[test]
    fn block_cost_sums_window() {
        // uniform per-pixel cost of 1 bit -> 3x3 block cost 9
        let w = 12;
        let h = 8;
        let mk = |bit: bool| CensusImage {
            width: w,
            height: h,
            bits_per_pixel: 4,
            data: vec![if bit { 1 } else { 0 }; w * h],
            valid: vec![true; w * h],
        };
        let cfg = StereoConfig {
            block_width: 3,
            block_height: 3,
            min_disp: 0,
            max_disp: 2,
            ..Default::default()
        };
        let cv = matching_cost(&mk(true), &mk(false), &cfg);
        assert_eq!(cv.at(5, 4, 0), 9);
    }

    #[test]
    fn out_of_range_is_max_cost() {
        let img = noise_image(16, 8, 9);
        let cfg = small_cfg();
        let c = census(&img, &cfg);
        let cv = matching_cost(&c, &c, &cfg);
        let m = max_cost(&cfg, c.bits_per_pixel);
        assert_eq!(cv.at(2, 4, 5), m); // x - d < 0
        assert_eq!(m, 12); // floor(25/2) = 12 bits for a 5x5 census
    }

    #[test]
    fn reindex_right_matches_definition() {
        let left = noise_image(30, 10, 21);
        let right = noise_image(30, 10, 22);
        let cfg = small_cfg();
        let cl = census(&left, &cfg);
        let cr = census(&right, &cfg);
        let cv = matching_cost(&cl, &cr, &cfg);
        let m = max_cost(&cfg, cl.bits_per_pixel);
        let rv = reindex_right(&cv, m);
        for y in 0..10 {
            for x in 0..30 {
                for di in 0..8 {
                    let xl = x + di;
                    let expect = if xl < 30 { cv.at(xl, y, di) } else { m };
                    assert_eq!(rv.at(x, y, di), expect);
                }
            }
        }
    }
}

//! Depth from a rectified IR pair: census transform, hamming cost volume,
//! four-path semi-global aggregation, winner-take-all with uniqueness test,
//! subpixel fit, left-right consistency, median filter and depth conversion.

pub mod census;
pub mod cost;
pub mod post;
pub mod sgm;

pub use census::{census, CensusImage};
pub use cost::{matching_cost, max_cost, reindex_right, CostVolume};
pub use post::{
    disp_to_depth, lr_check, median_filter, rectify, register_depth, subpixel, wta, RectifyMode,
};
pub use sgm::sgm_aggregate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::img::{ImageF, ImageU8};
use crate::scene::{CameraModel, SensorRig};

/// Stereo matcher configuration. Field names double as the config-file keys.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StereoConfig {
    /// Census window; odd dims, at most 15x15 (bitstrings fit 128 bits).
    pub census_width: usize,
    pub census_height: usize,
    /// SGBM block; 1x1 selects plain SGM.
    pub block_width: usize,
    pub block_height: usize,
    pub min_disp: i32,
    pub max_disp: i32,
    /// Small/large disparity-change penalties, p2 > p1 > 0.
    pub p1: u32,
    pub p2: u32,
    /// Percent margin the best cost must win by over the runner-up.
    pub uniqueness_ratio: u32,
    pub lr_max_diff: f32,
    /// 0 disables the median pass; otherwise 3 or 5.
    pub median_ksize: usize,
    pub subpixel: bool,
    pub lr_check: bool,
    pub register: bool,
}

impl Default for StereoConfig {
    fn default() -> Self {
        StereoConfig {
            census_width: 9,
            census_height: 7,
            block_width: 1,
            block_height: 1,
            min_disp: 0,
            max_disp: 64,
            p1: 8,
            p2: 32,
            uniqueness_ratio: 10,
            lr_max_diff: 1.0,
            median_ksize: 3,
            subpixel: true,
            lr_check: true,
            register: false,
        }
    }
}

impl StereoConfig {
    pub fn validate(&self) -> Result<()> {
        let odd = |name: &str, v: usize| -> Result<()> {
            if v % 2 == 0 || v == 0 {
                Err(Error::invariant(name, format!("{v} must be odd")))
            } else {
                Ok(())
            }
        };
        odd("census_width", self.census_width)?;
        odd("census_height", self.census_height)?;
        odd("block_width", self.block_width)?;
        odd("block_height", self.block_height)?;
        if self.census_width * self.census_height > 225 {
            return Err(Error::invariant(
                "census_width",
                "census window larger than 15x15 does not fit 128 bits",
            ));
        }
        if !(self.max_disp > self.min_disp && self.min_disp >= 0) {
            return Err(Error::invariant(
                "max_disp",
                "need max_disp > min_disp >= 0",
            ));
        }
        if !(self.p2 > self.p1 && self.p1 > 0) {
            return Err(Error::invariant("p1", "need p2 > p1 > 0"));
        }
        if !matches!(self.median_ksize, 0 | 3 | 5) {
            return Err(Error::invariant("median_ksize", "must be 0, 3 or 5"));
        }
        if self.lr_max_diff < 0.0 {
            return Err(Error::invariant("lr_max_diff", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StereoOutput {
    pub disparity: ImageF,
    pub depth: ImageF,
    pub registered_depth: Option<ImageF>,
}

/// Full disparity pipeline on an already rectified pair.
pub fn compute_disparity(left: &ImageU8, right: &ImageU8, cfg: &StereoConfig) -> Result<ImageF> {
    if !left.same_dims(right) {
        return Err(Error::DimMismatch("stereo pair dimensions differ".into()));
    }
    cfg.validate()?;
    let cl = census(left, cfg);
    let cr = census(right, cfg);
    let raw = matching_cost(&cl, &cr, cfg);
    let agg = sgm_aggregate(&raw, cfg.p1, cfg.p2);
    let ints = wta(&agg, cfg);
    let mut disp = if cfg.subpixel {
        subpixel(&agg, &ints)
    } else {
        ints_to_float(&ints)
    };
    if cfg.lr_check {
        let invalid = max_cost(cfg, cl.bits_per_pixel);
        let raw_r = reindex_right(&raw, invalid);
        let agg_r = sgm_aggregate(&raw_r, cfg.p1, cfg.p2);
        let ints_r = wta(&agg_r, cfg);
        let disp_r = if cfg.subpixel {
            subpixel(&agg_r, &ints_r)
        } else {
            ints_to_float(&ints_r)
        };
        disp = lr_check(&disp, &disp_r, cfg.lr_max_diff);
    }
    Ok(median_filter(&disp, cfg.median_ksize))
}

fn ints_to_float(ints: &crate::img::Image<i32>) -> ImageF {
    let mut out = ImageF::filled(ints.width(), ints.height(), 1, crate::img::INVALID);
    for (o, &v) in out.data_mut().iter_mut().zip(ints.data().iter()) {
        if v != crate::img::INVALID_I32 {
            *o = v as f32;
        }
    }
    out
}

/// Integer-stage disparity (pre-subpixel), exposed for diagnostics and tests.
pub fn compute_disparity_int(
    left: &ImageU8,
    right: &ImageU8,
    cfg: &StereoConfig,
) -> Result<crate::img::Image<i32>> {
    if !left.same_dims(right) {
        return Err(Error::DimMismatch("stereo pair dimensions differ".into()));
    }
    cfg.validate()?;
    let cl = census(left, cfg);
    let cr = census(right, cfg);
    let raw = matching_cost(&cl, &cr, cfg);
    let agg = sgm_aggregate(&raw, cfg.p1, cfg.p2);
    Ok(wta(&agg, cfg))
}

/// Disparity plus metric depth (and optionally depth registered to the RGB
/// camera) for a rig-calibrated pair.
pub fn compute_depth(
    left: &ImageU8,
    right: &ImageU8,
    cfg: &StereoConfig,
    rig: &SensorRig,
) -> Result<StereoOutput> {
    let disparity = compute_disparity(left, right, cfg)?;
    let depth = disp_to_depth(&disparity, rig.ir_left.fx, rig.baseline);
    let registered_depth = if cfg.register {
        Some(register_depth(&depth, &rig.ir_left, &rig.rgb))
    } else {
        None
    };
    Ok(StereoOutput {
        disparity,
        depth,
        registered_depth,
    })
}

/// Depth directly from externally supplied homography-rectified images.
pub fn compute_depth_rectified(
    left: &ImageU8,
    right: &ImageU8,
    cfg: &StereoConfig,
    mode: &RectifyMode,
    fx: f32,
    baseline: f32,
) -> Result<(ImageF, ImageF)> {
    let (l, r) = rectify(left, right, mode)?;
    let disparity = compute_disparity(&l, &r, cfg)?;
    let depth = disp_to_depth(&disparity, fx, baseline);
    Ok((disparity, depth))
}

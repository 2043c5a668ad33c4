//! Desk-scale simulator of an active stereovision depth sensor.
//!
//! The pipeline renders infrared stereo pairs of a physically based scene lit
//! by a dot-pattern projector, corrupts them with a calibrated speckle/thermal
//! noise model, and reconstructs depth with a census/semi-global matching
//! stack, reproducing the material-dependent holes of real sensors. A grid
//! search tool fits PBR material parameters against multispectral captures.

pub mod error;
pub mod img;
pub mod math;
pub mod render;
pub mod scene;
pub mod stereo;

pub use error::{Error, Result};

// placeholder until the CLI lands
pub fn run_cli() -> i32 { 0 }

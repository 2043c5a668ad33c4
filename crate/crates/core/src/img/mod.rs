//! Image containers and the file formats the pipeline speaks:
//! 8-bit PGM/PPM and 32-bit float PFM.

mod pfm;
mod pnm;

pub use pfm::{read_pfm, write_pfm};
pub use pnm::{read_pnm, write_pgm, write_ppm};

use crate::error::{Error, Result};

/// Sentinel for invalid pixels in float disparity/depth maps.
pub const INVALID: f32 = f32::NAN;

/// Sentinel for invalid pixels in integer disparity maps.
pub const INVALID_I32: i32 = i32::MIN;

pub fn is_valid(v: f32) -> bool {
    !v.is_nan()
}

/// Row-major interleaved image, 1 or 3 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

pub type ImageF = Image<f32>;
pub type ImageU8 = Image<u8>;

impl<T: Copy + Default> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        Image {
            width,
            height,
            channels,
            data: vec![T::default(); width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DimMismatch(format!(
                "image buffer has {} values, expected {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, v: T) -> Self {
        let mut img = Self::new(width, height, channels);
        img.data.fill(v);
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_dims<U>(&self, o: &Image<U>) -> bool {
        self.width == o.width && self.height == o.height && self.channels == o.channels
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[self.idx(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        let i = self.idx(x, y) + c;
        self.data[i] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = self.idx(x, y);
        &self.data[i..i + self.channels]
    }

    pub fn row(&self, y: usize) -> &[T] {
        let i = y * self.width * self.channels;
        &self.data[i..i + self.width * self.channels]
    }

    /// Parallel-friendly split into per-row mutable slices.
    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, T> {
        self.data.chunks_mut(self.width * self.channels)
    }
}

impl ImageF {
    /// Extract one channel as a 1-channel image.
    pub fn channel(&self, c: usize) -> ImageF {
        assert!(c < self.channels);
        let mut out = ImageF::new(self.width, self.height, 1);
        for i in 0..self.width * self.height {
            out.data[i] = self.data[i * self.channels + c];
        }
        out
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().cloned().fold(f32::MIN, f32::max)
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|v| is_valid(**v)).count()
    }

    /// Nearest-neighbor lookup with normalized coordinates in [0,1).
    pub fn sample_nearest(&self, u: f32, v: f32, c: usize) -> f32 {
        let x = ((u * self.width as f32) as isize).clamp(0, self.width as isize - 1) as usize;
        let y = ((v * self.height as f32) as isize).clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    /// Bilinear lookup with normalized coordinates, clamped at borders.
    pub fn sample_bilinear(&self, u: f32, v: f32, c: usize) -> f32 {
        let fx = (u * self.width as f32 - 0.5).clamp(0.0, self.width as f32 - 1.0);
        let fy = (v * self.height as f32 - 0.5).clamp(0.0, self.height as f32 - 1.0);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f32;
        let ty = fy - y0 as f32;
        let a = self.get(x0, y0, c) * (1.0 - tx) + self.get(x1, y0, c) * tx;
        let b = self.get(x0, y1, c) * (1.0 - tx) + self.get(x1, y1, c) * tx;
        a * (1.0 - ty) + b * ty
    }

    pub fn to_u8_scaled(&self, scale: f32) -> ImageU8 {
        let mut out = ImageU8::new(self.width, self.height, self.channels);
        for (o, &v) in out.data.iter_mut().zip(self.data.iter()) {
            *o = quantize_u8(v * scale);
        }
        out
    }

    /// Normalize finite values to [0,255] for visualization; invalid pixels map to 0.
    pub fn to_u8_normalized(&self) -> ImageU8 {
        let mut lo = f32::MAX;
        let mut hi = f32::MIN;
        for &v in &self.data {
            if is_valid(v) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = ImageU8::new(self.width, self.height, self.channels);
        for (o, &v) in out.data.iter_mut().zip(self.data.iter()) {
            *o = if is_valid(v) {
                quantize_u8((v - lo) / span * 255.0)
            } else {
                0
            };
        }
        out
    }
}

impl ImageU8 {
    pub fn to_f32(&self) -> ImageF {
        let mut out = ImageF::new(self.width, self.height, self.channels);
        for (o, &v) in out.data.iter_mut().zip(self.data.iter()) {
            *o = v as f32;
        }
        out
    }

    /// Convert to float intensities in [0,1].
    pub fn to_f32_unit(&self) -> ImageF {
        let mut out = ImageF::new(self.width, self.height, self.channels);
        for (o, &v) in out.data.iter_mut().zip(self.data.iter()) {
            *o = v as f32 / 255.0;
        }
        out
    }
}

/// round-half-up quantization to u8 with clamping.
pub fn quantize_u8(v: f32) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

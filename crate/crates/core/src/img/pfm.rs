//! PFM float images: `PF` (color) / `Pf` (grayscale), negative scale means
//! little-endian, scanlines stored bottom-up. Invalid pixels are NaN.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::img::ImageF;

pub fn write_pfm(path: &Path, img: &ImageF) -> Result<()> {
    let magic = match img.channels() {
        1 => "Pf",
        3 => "PF",
        _ => return Err(Error::DimMismatch("PFM requires 1 or 3 channels".into())),
    };
    let mut buf = Vec::with_capacity(img.data().len() * 4 + 32);
    write!(buf, "{}\n{} {}\n-1.0\n", magic, img.width(), img.height())
        .map_err(|e| Error::io(path, e))?;
    // bottom-up scanlines
    for y in (0..img.height()).rev() {
        for &v in img.row(y) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn token(&mut self) -> Option<&'a str> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            None
        } else {
            std::str::from_utf8(&self.bytes[start..self.pos]).ok()
        }
    }
}

pub fn read_pfm(path: &Path) -> Result<ImageF> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: &str| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    };

    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        line: 1,
    };
    let magic = cur.token().ok_or_else(|| perr(cur.line, "missing magic"))?;
    let channels = match magic {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(perr(cur.line, "expected PF or Pf magic")),
    };
    let width: usize = cur
        .token()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(cur.line, "bad width"))?;
    let height: usize = cur
        .token()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(cur.line, "bad height"))?;
    let scale: f32 = cur
        .token()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr(cur.line, "bad scale"))?;
    let little_endian = scale < 0.0;
    // a single whitespace byte separates header and raster
    if cur.pos < bytes.len() && bytes[cur.pos].is_ascii_whitespace() {
        cur.pos += 1;
    }
    let line = cur.line;

    let n = width * height * channels;
    let raster = &bytes[cur.pos..];
    if raster.len() < n * 4 {
        return Err(perr(line, "truncated pixel data"));
    }

    let mut data = vec![0.0f32; n];
    let row_len = width * channels;
    for y_file in 0..height {
        let y_img = height - 1 - y_file; // stored bottom-up
        for i in 0..row_len {
            let o = (y_file * row_len + i) * 4;
            let b = [raster[o], raster[o + 1], raster[o + 2], raster[o + 3]];
            let v = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            data[y_img * row_len + i] = v;
        }
    }
    ImageF::from_vec(width, height, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::img::INVALID;

    #[test]
    fn pfm_golden_bytes() {
        // 2x2 grayscale; asserts the exact byte layout: little-endian floats,
        // bottom row first.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pfm");
        let img = ImageF::from_vec(2, 2, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        write_pfm(&path, &img).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expect = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [2.0f32, 3.0, 0.0, 1.0] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expect);
    }

    #[test]
    fn pfm_roundtrip_preserves_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.pfm");
        let img = ImageF::from_vec(3, 1, 1, vec![1.5, INVALID, -2.25]).unwrap();
        write_pfm(&path, &img).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.get(0, 0, 0), 1.5);
        assert!(back.get(1, 0, 0).is_nan());
        assert_eq!(back.get(2, 0, 0), -2.25);
    }

    #[test]
    fn pfm_color_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pfm");
        let img = ImageF::from_vec(2, 2, 3, (0..12).map(|i| i as f32 * 0.5).collect()).unwrap();
        write_pfm(&path, &img).unwrap();
        assert_eq!(read_pfm(&path).unwrap(), img);
    }

    #[test]
    fn pfm_reads_big_endian_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&7.25f32.to_be_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert_eq!(read_pfm(&path).unwrap().get(0, 0, 0), 7.25);
    }
}

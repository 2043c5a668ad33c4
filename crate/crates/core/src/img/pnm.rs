//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::img::ImageU8;

pub fn write_pgm(path: &Path, img: &ImageU8) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::DimMismatch("PGM requires 1 channel".into()));
    }
    write_pnm(path, img, b"P5")
}

pub fn write_ppm(path: &Path, img: &ImageU8) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::DimMismatch("PPM requires 3 channels".into()));
    }
    write_pnm(path, img, b"P6")
}

fn write_pnm(path: &Path, img: &ImageU8, magic: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(img.data().len() + 32);
    buf.extend_from_slice(magic);
    buf.push(b'\n');
    write!(buf, "{} {}\n255\n", img.width(), img.height())
        .map_err(|e| Error::io(path, e))?;
    buf.extend_from_slice(img.data());
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads P5 (grayscale) or P6 (color); maxval must be 255.
pub fn read_pnm(path: &Path) -> Result<ImageU8> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut p = Parser::new(&bytes, path);
    let magic = p.token()?;
    let channels = match magic.as_slice() {
        b"P5" => 1,
        b"P6" => 3,
        _ => {
            return Err(p.err("expected P5 or P6 magic"));
        }
    };
    let width = p.uint()?;
    let height = p.uint()?;
    let maxval = p.uint()?;
    if maxval != 255 {
        return Err(p.err(&format!("unsupported maxval {maxval} (expected 255)")));
    }
    p.skip_single_whitespace();
    let n = width * height * channels;
    if p.rest().len() < n {
        return Err(p.err(&format!(
            "truncated pixel data: have {}, need {}",
            p.rest().len(),
            n
        )));
    }
    ImageU8::from_vec(width, height, channels, p.rest()[..n].to_vec())
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    path: &'a Path,
}

impl<'a> Parser<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Parser {
            bytes,
            pos: 0,
            line: 1,
            path,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            path: self.path.display().to_string(),
            line: self.line,
            msg: msg.to_string(),
        }
    }

    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<Vec<u8>> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of header"));
        }
        Ok(self.bytes[start..self.pos].to_vec())
    }

    fn uint(&mut self) -> Result<usize> {
        let t = self.token()?;
        std::str::from_utf8(&t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected unsigned integer"))
    }

    /// One whitespace byte separates the header from the raster.
    fn skip_single_whitespace(&mut self) {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &[u8] {
        &self.bytes[self.pos..]
    }
}

//! Binary PGM (P5) and PPM (P6) codecs.
//!
//! Written files use the fixed header `P5\n{w} {h}\n255\n` (no comments) so
//! identical pixel data always produces byte-identical files.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "pixel buffer length {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

fn skip_whitespace_and_comments(data: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn parse_number(data: &[u8], pos: usize) -> Result<(usize, usize)> {
    let start = skip_whitespace_and_comments(data, pos);
    let mut end = start;
    while end < data.len() && data[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Format("expected integer in PNM header".into()));
    }
    let text = std::str::from_utf8(&data[start..end]).expect("ascii digits");
    let value: usize = text
        .parse()
        .map_err(|_| Error::Format(format!("invalid integer '{text}' in PNM header")))?;
    Ok((value, end))
}

/// Reads a binary (P5) PGM with maxval <= 255.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    parse_pgm(&data)
}

pub fn parse_pgm(data: &[u8]) -> Result<GrayImage> {
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(Error::Format("not a binary PGM (missing P5 magic)".into()));
    }
    let (width, pos) = parse_number(data, 2)?;
    let (height, pos) = parse_number(data, pos)?;
    let (maxval, pos) = parse_number(data, pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from raster data
    let pos = pos + 1;
    let need = width * height;
    if data.len() < pos + need {
        return Err(Error::Format(format!(
            "PGM truncated: need {need} raster bytes, have {}",
            data.len().saturating_sub(pos)
        )));
    }
    GrayImage::new(width, height, data[pos..pos + need].to_vec())
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", image.width, image.height)?;
    f.write_all(&image.pixels)?;
    Ok(())
}

/// Writes an RGB raster as binary PPM (P6). `rgb` is `width*height*3` bytes.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != width * height * 3 {
        return Err(Error::Dimension(format!(
            "RGB buffer length {} does not match {width}x{height}x3",
            rgb.len()
        )));
    }
    let mut f = std::fs::File::create(path)?;
    write!(f, "P6\n{width} {height}\n255\n")?;
    f.write_all(rgb)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let img = GrayImage::new(3, 2, vec![0, 10, 20, 30, 40, 250]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn parses_comments_in_header() {
        let mut data = b"P5\n# a comment\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[1, 2, 3, 4]);
        let img = parse_pgm(&data).unwrap();
        assert_eq!(img.width, 2);
        assert_eq!(img.pixels, vec![1, 2, 3, 4]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_pgm(b"P6\n1 1\n255\nx").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01").is_err());
    }
}

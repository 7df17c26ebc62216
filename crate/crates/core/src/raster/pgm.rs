use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{BitDepth, ImageGrid};
use crate::{Error, Result};

/// Reads a binary (P5) PGM with maxval 255 or 65535.
pub fn load_pgm16(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes)
}

/// Parses P5 bytes. Header comments (`# ...`) are skipped.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    if magic != b"P5" {
        return Err(Error::format(format!(
            "unsupported PGM variant {:?}; only binary P5 is accepted",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(Error::format(format!("unsupported maxval {other}"))),
    };
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::format("missing whitespace after maxval")),
    }
    let payload = &bytes[cursor.pos..];
    let sample_bytes = if depth == BitDepth::Eight { 1 } else { 2 };
    let needed = width * height * sample_bytes;
    if payload.len() < needed {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("PGM payload has {} bytes, expected {needed}", payload.len()),
        )));
    }
    let scale = f64::from(maxval as u32);
    let values = match depth {
        BitDepth::Eight => payload[..needed].iter().map(|&b| f64::from(b) / scale).collect(),
        BitDepth::Sixteen => payload[..needed]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
            .collect(),
    };
    ImageGrid::with_depth(height, width, values, depth)
}

/// Encodes as 16-bit P5: each value becomes `round(v * 65535)`, big-endian.
pub fn encode_pgm16(img: &ImageGrid, comment: Option<&str>) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.values().len() * 2 + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(text) = comment {
        for line in text.lines() {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    out.extend_from_slice(format!("{} {}\n65535\n", img.width(), img.height()).as_bytes());
    for &v in img.values() {
        out.extend_from_slice(&quantize16(v).to_be_bytes());
    }
    out
}

pub fn save_pgm16(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_pgm16(img, None))?;
    Ok(())
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format("truncated PGM header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::format(format!("bad {what} {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5(width: usize, height: usize, maxval: u32, payload: &[u8]) -> Vec<u8> {
        let mut b = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn decodes_sixteen_bit_payload() {
        let raw: Vec<u8> = [0u16, 65535, 32768, 16384]
            .iter()
            .flat_map(|v| v.to_be_bytes())
            .collect();
        let img = decode_pgm(&p5(2, 2, 65535, &raw)).unwrap();
        let expect = [0.0, 1.0, 0.500_007_63, 0.250_003_81];
        for (v, e) in img.values().iter().zip(expect) {
            assert!((v - e).abs() < 1e-8, "{v} vs {e}");
        }
        assert_eq!(img.source_bit_depth(), BitDepth::Sixteen);
    }

    #[test]
    fn decodes_eight_bit_payload() {
        let img = decode_pgm(&p5(1, 1, 255, &[255])).unwrap();
        assert_eq!(img.values(), &[1.0]);
        assert_eq!(img.source_bit_depth(), BitDepth::Eight);
    }

    #[test]
    fn rejects_ascii_variant() {
        let err = decode_pgm(b"P2\n1 1\n255\n0\n").unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let err = decode_pgm(&p5(2, 2, 65535, &[0, 0, 1])).unwrap_err();
        assert!(matches!(err, Error::Io(_)), "{err}");
    }

    #[test]
    fn skips_header_comments() {
        let mut b = b"P5\n# written by test\n1 1\n# another\n255\n".to_vec();
        b.push(0);
        let img = decode_pgm(&b).unwrap();
        assert_eq!(img.values(), &[0.0]);
    }

    #[test]
    fn quantizes_to_expected_raw_values() {
        let img = ImageGrid::new(1, 3, vec![0.0, 1.0, 0.5]).unwrap();
        let bytes = encode_pgm16(&img, None);
        let payload = &bytes[bytes.len() - 6..];
        let raw: Vec<u16> = payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(raw, vec![0, 65535, 32768]);
    }

    #[test]
    fn comment_survives_round_trip() {
        let img = ImageGrid::new(1, 2, vec![0.25, 0.75]).unwrap();
        let bytes = encode_pgm16(&img, Some("seed=7\nconfig=abc"));
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back.width(), 2);
        assert!((back.values()[1] - 0.75).abs() <= 1.0 / 131070.0);
    }

    #[test]
    fn save_and_load_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = ImageGrid::from_fn(3, 5, |r, c| ((r * 5 + c) as f64 / 14.0).sqrt()).unwrap();
        save_pgm16(&img, &path).unwrap();
        let back = load_pgm16(&path).unwrap();
        assert_eq!((back.height(), back.width()), (3, 5));
        assert!(img.mean_abs_diff(&back).unwrap() <= 1.0 / 131070.0);
    }
}

//! Binary PPM (P6) and PGM (P5) with maxval 255.

use std::path::Path;

use crate::error::{Error, Result};

/// Decoded raster: `channels` is 3 for P6 and 1 for P5.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub bytes: Vec<u8>,
}

pub fn encode(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Vec<u8> {
    let magic = match channels {
        1 => "P5",
        3 => "P6",
        _ => panic!("netpbm supports 1 or 3 channels, got {channels}"),
    };
    assert_eq!(bytes.len(), width * height * channels);
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.buf.get(self.pos) {
            if b == b'#' {
                while self.buf.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> std::result::Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed header at byte {start}"))
    }
}

pub fn decode(buf: &[u8]) -> std::result::Result<Raster, String> {
    let channels = match buf.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err("not a binary PGM/PPM file".into()),
    };
    let mut cur = Cursor { buf, pos: 2 };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if width == 0 || height == 0 {
        return Err(format!("empty raster {width}x{height}"));
    }
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    if !buf.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after header".into());
    }
    let data = &buf[cur.pos + 1..];
    let expected = width * height * channels;
    if data.len() < expected {
        return Err(format!(
            "truncated pixel data: expected {expected} bytes, found {}",
            data.len()
        ));
    }
    Ok(Raster {
        width,
        height,
        channels,
        bytes: data[..expected].to_vec(),
    })
}

pub fn write(
    path: &Path,
    width: usize,
    height: usize,
    channels: usize,
    bytes: &[u8],
) -> Result<()> {
    std::fs::write(path, encode(width, height, channels, bytes)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path, channels: usize) -> Result<Raster> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let raster = decode(&buf).map_err(|msg| Error::format(path, msg))?;
    if raster.channels != channels {
        return Err(Error::format(
            path,
            format!("expected {channels} channel(s), found {}", raster.channels),
        ));
    }
    Ok(raster)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes() {
        let enc = encode(2, 1, 1, &[7, 9]);
        assert_eq!(enc, b"P5\n2 1\n255\n\x07\x09");
    }

    #[test]
    fn decode_with_comments() {
        let buf = b"P6 # made by hand\n1 1\n# c\n255\n\x01\x02\x03";
        let r = decode(buf).unwrap();
        assert_eq!((r.width, r.height, r.channels), (1, 1, 3));
        assert_eq!(r.bytes, vec![1, 2, 3]);
    }

    #[test]
    fn truncated_and_bad_maxval() {
        assert!(decode(b"P5\n2 2\n255\n\x00")
            .unwrap_err()
            .contains("truncated"));
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00")
            .unwrap_err()
            .contains("maxval"));
        assert!(decode(b"P3\n1 1\n255\n0 0 0").is_err());
    }
}

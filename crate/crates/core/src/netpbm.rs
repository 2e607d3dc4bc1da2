//! Binary Netpbm codec: P5 (grayscale) in, P6 (RGB) in, and the matching
//! format out depending on channel count. Only maxval <= 255 payloads are
//! accepted; saving always quantizes to maxval 255 with the canonical header
//! `P6\n<w> <h>\n255\n` (or `P5` for one channel).

use thiserror::Error;

use crate::image::{ImageError, RasterImage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetpbmError {
    #[error("unsupported format `{0}` (expected P5 or P6)")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("maxval {0} exceeds 255")]
    MaxvalTooLarge(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingData(usize),
    #[error(transparent)]
    Image(#[from] ImageError),
}

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderScanner { bytes, pos: 0 }
    }

    /// Next whitespace-delimited ASCII token.
    fn token(&mut self, what: &str) -> Result<&'a str, NetpbmError> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(NetpbmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| NetpbmError::MalformedHeader(format!("non-ASCII {what}")))
    }

    fn unsigned(&mut self, what: &str) -> Result<u32, NetpbmError> {
        let token = self.token(what)?;
        token
            .parse::<u32>()
            .map_err(|_| NetpbmError::MalformedHeader(format!("bad {what} `{token}`")))
    }

    /// Consumes the single whitespace byte separating header from payload.
    fn payload(mut self) -> Result<&'a [u8], NetpbmError> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            return Err(NetpbmError::MalformedHeader(
                "missing whitespace before payload".to_string(),
            ));
        }
        self.pos += 1;
        Ok(&self.bytes[self.pos..])
    }
}

/// Decodes a binary P5/P6 image, mapping each sample `v` to `v / maxval`.
pub fn load(bytes: &[u8]) -> Result<RasterImage, NetpbmError> {
    let mut scanner = HeaderScanner::new(bytes);
    let magic = scanner.token("magic number")?;
    let channels = match magic {
        "P5" => 1,
        "P6" => 3,
        other => return Err(NetpbmError::UnsupportedFormat(other.to_string())),
    };
    let width = scanner.unsigned("width")?;
    let height = scanner.unsigned("height")?;
    let maxval = scanner.unsigned("maxval")?;
    if maxval > 255 {
        return Err(NetpbmError::MaxvalTooLarge(maxval));
    }
    if maxval == 0 {
        return Err(NetpbmError::MalformedHeader("maxval must be positive".to_string()));
    }
    if width == 0 || height == 0 {
        return Err(NetpbmError::MalformedHeader(format!(
            "dimensions must be positive (got {width}x{height})"
        )));
    }
    let payload = scanner.payload()?;
    let expected = width as usize * height as usize * channels;
    if payload.len() < expected {
        return Err(NetpbmError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(NetpbmError::TrailingData(payload.len() - expected));
    }
    let scale = f64::from(maxval);
    let pixels = payload.iter().map(|&v| f64::from(v) / scale).collect();
    Ok(RasterImage::new(
        width as usize,
        height as usize,
        channels,
        pixels,
    )?)
}

/// Encodes an image as binary P5 (1 channel) or P6 (3 channels) with
/// maxval 255; samples quantize as `round(v * 255)`.
pub fn save(image: &RasterImage) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(
        image
            .pixels()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

//! Deterministic raster-image transformation engine.
//!
//! Images are immutable grids of `f64` samples in `[0, 1]`, row major with
//! interleaved channels. Every operation is a pure function returning a new
//! image; identical inputs produce bit-identical outputs regardless of thread
//! schedule.
//!
//! Geometry conventions: column 0 is the left edge and row 0 the top edge.
//! Shifts move content (positive `dx` right, positive `dy` up) and fill the
//! vacated band by edge replication. Rotation is about the geometric center
//! `((w-1)/2, (h-1)/2)`, positive angles clockwise, sampled bilinearly with
//! out-of-bounds reads clamped to the edge. Zoom upscales bilinearly to
//! `ceil(factor * size)` and center-crops back to the original size.

use thiserror::Error;

use crate::dsl::{PrimitiveTransform, TransformChain, TransformSet};

/// A normalized floating-point pixel grid with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive (got {width}x{height})")]
    EmptyDimensions { width: usize, height: usize },
    #[error("channel count must be 1 or 3 (got {0})")]
    BadChannelCount(usize),
    #[error("pixel buffer length {actual} does not match {width}x{height}x{channels}")]
    LengthMismatch {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("pixel value {value} at index {index} lies outside [0, 1]")]
    PixelOutOfRange { index: usize, value: f64 },
    #[error("bgr requires 3 channels (image has {0})")]
    ChannelReverseNeedsRgb(usize),
    #[error("shift of {magnitude} pixels moves all content out of a {dimension}-pixel frame")]
    ShiftOutOfFrame { magnitude: u32, dimension: usize },
    #[error("primitive {index} (`{primitive}`): {source}")]
    ChainStep {
        index: usize,
        primitive: String,
        #[source]
        source: Box<ImageError>,
    },
    #[error("chain {index} (`{chain}`): {source}")]
    VariantStep {
        index: usize,
        chain: String,
        #[source]
        source: Box<ImageError>,
    },
}

impl RasterImage {
    /// Validates and wraps a pixel buffer. `pixels` is row major with
    /// interleaved channels and every sample must lie in `[0, 1]`.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannelCount(channels));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                channels,
                actual: pixels.len(),
            });
        }
        for (index, &value) in pixels.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ImageError::PixelOutOfRange { index, value });
            }
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// An all-zero (black) image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self, ImageError> {
        RasterImage::new(width, height, channels, vec![0.0; width * height * channels])
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

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[self.index(x, y, c)]
    }

    fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
    }

    /// Builds an image of the same shape by evaluating `f(x, y, c)` at every
    /// sample; used by the per-pixel transforms below.
    fn map_coords(&self, mut f: impl FnMut(usize, usize, usize) -> f64) -> RasterImage {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    pixels.push(f(x, y, c));
                }
            }
        }
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            pixels,
        }
    }

    /// Bilinear sample at fractional coordinates, clamped to the edge.
    fn sample_bilinear(&self, fx: f64, fy: f64, c: usize) -> f64 {
        let fx = fx.clamp(0.0, (self.width - 1) as f64);
        let fy = fy.clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.get(x0, y0, c) * (1.0 - tx) + self.get(x1, y0, c) * tx;
        let bottom = self.get(x0, y1, c) * (1.0 - tx) + self.get(x1, y1, c) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

#[inline]
fn clamp_i(v: i64, max: usize) -> usize {
    v.clamp(0, max as i64 - 1) as usize
}

/// Applies one primitive. The output always has the input's shape and stays
/// in `[0, 1]`.
pub fn apply_primitive(
    image: &RasterImage,
    transform: &PrimitiveTransform,
) -> Result<RasterImage, ImageError> {
    match transform {
        PrimitiveTransform::Identity => Ok(image.clone()),
        PrimitiveTransform::HFlip => {
            Ok(image.map_coords(|x, y, c| image.get(image.width - 1 - x, y, c)))
        }
        PrimitiveTransform::VFlip => {
            Ok(image.map_coords(|x, y, c| image.get(x, image.height - 1 - y, c)))
        }
        PrimitiveTransform::ChannelReverse => {
            if image.channels != 3 {
                return Err(ImageError::ChannelReverseNeedsRgb(image.channels));
            }
            Ok(image.map_coords(|x, y, c| image.get(x, y, 2 - c)))
        }
        PrimitiveTransform::Shift { dx, dy } => {
            if dx.unsigned_abs() as usize >= image.width {
                return Err(ImageError::ShiftOutOfFrame {
                    magnitude: dx.unsigned_abs(),
                    dimension: image.width,
                });
            }
            if dy.unsigned_abs() as usize >= image.height {
                return Err(ImageError::ShiftOutOfFrame {
                    magnitude: dy.unsigned_abs(),
                    dimension: image.height,
                });
            }
            let (dx, dy) = (*dx as i64, *dy as i64);
            // Positive dy moves content up, so output row y reads row y + dy.
            Ok(image.map_coords(|x, y, c| {
                let sx = clamp_i(x as i64 - dx, image.width);
                let sy = clamp_i(y as i64 + dy, image.height);
                image.get(sx, sy, c)
            }))
        }
        PrimitiveTransform::Rotate { degrees } => {
            let theta = degrees.to_radians();
            let (sin, cos) = (theta.sin(), theta.cos());
            let cx = (image.width - 1) as f64 / 2.0;
            let cy = (image.height - 1) as f64 / 2.0;
            // Inverse mapping of a clockwise rotation in y-down coordinates.
            Ok(image.map_coords(|x, y, c| {
                let rx = x as f64 - cx;
                let ry = y as f64 - cy;
                let sx = cos * rx + sin * ry + cx;
                let sy = -sin * rx + cos * ry + cy;
                image.sample_bilinear(sx, sy, c).clamp(0.0, 1.0)
            }))
        }
        PrimitiveTransform::Zoom { factor } => {
            let scaled_w = (factor * image.width as f64).ceil() as usize;
            let scaled_h = (factor * image.height as f64).ceil() as usize;
            let off_x = (scaled_w - image.width) / 2;
            let off_y = (scaled_h - image.height) / 2;
            let sx_scale = image.width as f64 / scaled_w as f64;
            let sy_scale = image.height as f64 / scaled_h as f64;
            // Upscale to scaled_w x scaled_h (pixel-center sampling), then
            // center-crop; both steps fused into one inverse lookup.
            Ok(image.map_coords(|x, y, c| {
                let fx = ((x + off_x) as f64 + 0.5) * sx_scale - 0.5;
                let fy = ((y + off_y) as f64 + 0.5) * sy_scale - 0.5;
                image.sample_bilinear(fx, fy, c).clamp(0.0, 1.0)
            }))
        }
        PrimitiveTransform::Gamma { gamma } => {
            let g = *gamma;
            Ok(image.map_coords(|x, y, c| image.get(x, y, c).powf(g).clamp(0.0, 1.0)))
        }
    }
}

/// Applies a chain left to right; the empty chain returns a copy.
pub fn apply_chain(image: &RasterImage, chain: &TransformChain) -> Result<RasterImage, ImageError> {
    let mut current = image.clone();
    for (index, primitive) in chain.primitives().iter().enumerate() {
        current = apply_primitive(&current, primitive).map_err(|source| ImageError::ChainStep {
            index,
            primitive: format_primitive(primitive),
            source: Box::new(source),
        })?;
    }
    Ok(current)
}

fn format_primitive(p: &PrimitiveTransform) -> String {
    TransformChain::new(vec![p.clone()]).canonical()
}

/// Materializes the variant list for one image: element 0 is the untouched
/// input (the implicit identity variant), element `i >= 1` is chain `i - 1`
/// of the set applied to the input.
pub fn generate_variants(
    image: &RasterImage,
    set: &TransformSet,
) -> Result<Vec<RasterImage>, ImageError> {
    let mut variants = Vec::with_capacity(set.len() + 1);
    variants.push(image.clone());
    for (index, chain) in set.chains().iter().enumerate() {
        let variant = apply_chain(image, chain).map_err(|source| ImageError::VariantStep {
            index,
            chain: chain.canonical(),
            source: Box::new(source),
        })?;
        variants.push(variant);
    }
    Ok(variants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{builtin_preset, parse_chain};

    fn gray(width: usize, height: usize, pixels: Vec<f64>) -> RasterImage {
        RasterImage::new(width, height, 1, pixels).unwrap()
    }

    #[test]
    fn constructor_validates() {
        assert!(RasterImage::new(0, 1, 1, vec![]).is_err());
        assert!(RasterImage::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(RasterImage::new(2, 1, 1, vec![0.0]).is_err());
        assert!(RasterImage::new(1, 1, 1, vec![1.5]).is_err());
        assert!(RasterImage::new(1, 1, 1, vec![-0.1]).is_err());
    }

    #[test]
    fn hflip_mirrors_columns() {
        let img = gray(2, 1, vec![0.25, 0.75]);
        let out = apply_primitive(&img, &PrimitiveTransform::HFlip).unwrap();
        assert_eq!(out.pixels(), &[0.75, 0.25]);
    }

    #[test]
    fn vflip_mirrors_rows() {
        let img = gray(1, 2, vec![0.25, 0.75]);
        let out = apply_primitive(&img, &PrimitiveTransform::VFlip).unwrap();
        assert_eq!(out.pixels(), &[0.75, 0.25]);
    }

    #[test]
    fn bgr_reverses_channels() {
        let img = RasterImage::new(1, 1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let out = apply_primitive(&img, &PrimitiveTransform::ChannelReverse).unwrap();
        assert_eq!(out.pixels(), &[0.3, 0.2, 0.1]);
        let grayscale = gray(1, 1, vec![0.5]);
        assert!(matches!(
            apply_primitive(&grayscale, &PrimitiveTransform::ChannelReverse),
            Err(ImageError::ChannelReverseNeedsRgb(1))
        ));
    }

    #[test]
    fn gamma_powers_pixels() {
        let img = gray(1, 1, vec![0.25]);
        let out = apply_primitive(&img, &PrimitiveTransform::Gamma { gamma: 0.5 }).unwrap();
        assert_eq!(out.pixels(), &[0.5]);
    }

    #[test]
    fn shift_replicates_edges() {
        let img = gray(2, 1, vec![0.2, 0.8]);
        let out = apply_primitive(&img, &PrimitiveTransform::Shift { dx: 1, dy: 0 }).unwrap();
        assert_eq!(out.pixels(), &[0.2, 0.2]);
        let out = apply_primitive(&img, &PrimitiveTransform::Shift { dx: -1, dy: 0 }).unwrap();
        assert_eq!(out.pixels(), &[0.8, 0.8]);
    }

    #[test]
    fn shift_up_moves_content_up() {
        // 1x3 column, top to bottom: 0.1, 0.5, 0.9.
        let img = gray(1, 3, vec![0.1, 0.5, 0.9]);
        let out = apply_primitive(&img, &PrimitiveTransform::Shift { dx: 0, dy: 1 }).unwrap();
        assert_eq!(out.pixels(), &[0.5, 0.9, 0.9]);
    }

    #[test]
    fn shift_out_of_frame_is_an_error() {
        let img = gray(2, 1, vec![0.2, 0.8]);
        assert!(matches!(
            apply_primitive(&img, &PrimitiveTransform::Shift { dx: 2, dy: 0 }),
            Err(ImageError::ShiftOutOfFrame { .. })
        ));
    }

    #[test]
    fn chain_composes_left_to_right() {
        let img = gray(2, 1, vec![0.2, 0.8]);
        let chain = parse_chain("hflip+hflip").unwrap();
        let out = apply_chain(&img, &chain).unwrap();
        assert_eq!(out.pixels(), img.pixels());
        let id = apply_chain(&img, &parse_chain("id").unwrap()).unwrap();
        assert_eq!(id, img);
    }

    #[test]
    fn gamma_one_is_a_parseable_noop() {
        let img = gray(2, 1, vec![0.2, 0.8]);
        let out = apply_chain(&img, &parse_chain("gamma1.0").unwrap()).unwrap();
        assert_eq!(out.pixels(), img.pixels());
    }

    #[test]
    fn chain_errors_carry_primitive_index() {
        let img = gray(2, 2, vec![0.0, 0.0, 0.0, 0.0]);
        let chain = parse_chain("hflip+bgr").unwrap();
        match apply_chain(&img, &chain) {
            Err(ImageError::ChainStep { index: 1, primitive, .. }) => {
                assert_eq!(primitive, "bgr");
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn variants_prepend_identity() {
        let img = gray(2, 2, vec![0.1, 0.2, 0.3, 0.4]);
        let set = crate::dsl::parse_set_file("hflip\nvflip\n").unwrap();
        let variants = generate_variants(&img, &set).unwrap();
        assert_eq!(variants.len(), 3);
        assert_eq!(variants[0], img);

        let empty = crate::dsl::parse_set_file("").unwrap();
        let variants = generate_variants(&img, &empty).unwrap();
        assert_eq!(variants.len(), 1);
    }

    #[test]
    fn cifar10_preset_yields_thirteen_variants() {
        let img = RasterImage::zeros(32, 32, 3).unwrap();
        let set = builtin_preset("cifar10").unwrap();
        let variants = generate_variants(&img, &set).unwrap();
        assert_eq!(variants.len(), 13);
    }

    #[test]
    fn variant_errors_carry_chain_index() {
        let img = gray(4, 4, vec![0.0; 16]);
        let set = crate::dsl::parse_set_file("hflip\nbgr\n").unwrap();
        match generate_variants(&img, &set) {
            Err(ImageError::VariantStep { index: 1, chain, .. }) => assert_eq!(chain, "bgr"),
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn rotate_quarter_turn_moves_top_left_to_top_right() {
        // 3x3 with a single bright pixel in the top-left corner.
        let mut px = vec![0.0; 9];
        px[0] = 1.0;
        let img = gray(3, 3, px);
        let out = apply_primitive(&img, &PrimitiveTransform::Rotate { degrees: 90.0 }).unwrap();
        // cos(pi/2) is not exactly zero in f64, so allow interpolation slack.
        assert!((out.get(2, 0, 0) - 1.0).abs() < 1e-12);
        assert!(out.get(0, 0, 0).abs() < 1e-12);
    }

    #[test]
    fn rotate_preserves_shape_and_range() {
        let img = gray(5, 4, (0..20).map(|i| i as f64 / 19.0).collect());
        let out = apply_primitive(&img, &PrimitiveTransform::Rotate { degrees: 33.3 }).unwrap();
        assert_eq!((out.width(), out.height(), out.channels()), (5, 4, 1));
        assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zoom_preserves_shape_and_centers() {
        let img = gray(4, 4, (0..16).map(|i| i as f64 / 15.0).collect());
        let out = apply_primitive(&img, &PrimitiveTransform::Zoom { factor: 1.5 }).unwrap();
        assert_eq!((out.width(), out.height()), (4, 4));
        assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        // A constant image is invariant under zoom.
        let flat = gray(4, 4, vec![0.6; 16]);
        let out = apply_primitive(&flat, &PrimitiveTransform::Zoom { factor: 1.3 }).unwrap();
        for &v in out.pixels() {
            assert!((v - 0.6).abs() < 1e-12);
        }
    }
}

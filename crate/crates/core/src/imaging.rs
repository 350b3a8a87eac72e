//! Pixel-level primitives: decoding, colour conversion, resizing, grayscale
//! and cropping annotated patterns out of their source images.

use std::io::Cursor;
use std::path::Path;

use image::ImageEncoder;

use crate::error::{Error, Result};

/// Fraction of the crop size added on each side when gathering the
/// background region around a pattern.
pub const BACKGROUND_PADDING: f64 = 0.10;

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl ImageRgb {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: u32, height: u32, colour: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| colour)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn put(&mut self, x: u32, y: u32, colour: [u8; 3]) {
        self.pixels[(y * self.width + x) as usize] = colour;
    }

    /// Copy of the `width`x`height` window whose top-left corner is `(x0, y0)`.
    pub fn sub_image(&self, x0: u32, y0: u32, width: u32, height: u32) -> ImageRgb {
        debug_assert!(x0 + width <= self.width && y0 + height <= self.height);
        ImageRgb::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// A pixel in HSV space: hue in degrees `[0, 360)`, saturation and value in
/// `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    /// Integer hue in `0..360`.
    pub fn hue_level(&self) -> u16 {
        (self.h.round() as u16) % 360
    }

    pub fn sat_level(&self) -> u8 {
        self.s.round().clamp(0.0, 255.0) as u8
    }

    pub fn bri_level(&self) -> u8 {
        self.v.round().clamp(0.0, 255.0) as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageHsv {
    width: u32,
    height: u32,
    pixels: Vec<Hsv>,
}

impl ImageHsv {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Hsv] {
        &self.pixels
    }
}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }
}

/// Binary pattern mask; `true` marks pixels inside the pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be at least 1x1");
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Nonzero pixels of `gray` are inside.
    pub fn from_gray(gray: &GrayImage) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            bits: gray.pixels.iter().map(|&p| p != 0).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    /// Like [`Mask::get`], but coordinates outside the mask read as unset.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.bits[(y as u32 * self.width + x as u32) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight bounding box of the set bits as `(x0, y0, width, height)`.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut min_x = u32::MAX;
        let mut min_y = u32::MAX;
        let mut max_x = 0;
        let mut max_y = 0;
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    min_x = min_x.min(x);
                    min_y = min_y.min(y);
                    max_x = max_x.max(x);
                    max_y = max_y.max(y);
                }
            }
        }
        any.then(|| (min_x, min_y, max_x - min_x + 1, max_y - min_y + 1))
    }

    pub fn sub_mask(&self, x0: u32, y0: u32, width: u32, height: u32) -> Mask {
        Mask::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }

    pub fn inverted(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

/// The padded window around a pattern, used for background statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternContext {
    pub image: ImageRgb,
    /// Pattern bits in context coordinates.
    pub mask: Mask,
    /// Top-left corner of the context in source coordinates.
    pub origin: (u32, u32),
}

/// One cropped irregular pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRecord {
    pub id: String,
    pub class_label: u32,
    pub source_image: String,
    pub crop: ImageRgb,
    /// Crop-local mask, same dimensions as `crop`.
    pub mask: Mask,
    /// Top-left corner of `crop` in source coordinates.
    pub bbox_origin: (u32, u32),
    pub context: PatternContext,
}

impl PatternRecord {
    /// Bounding box in source coordinates as `(x0, y0, width, height)`.
    pub fn source_bbox(&self) -> (u32, u32, u32, u32) {
        (
            self.bbox_origin.0,
            self.bbox_origin.1,
            self.crop.width(),
            self.crop.height(),
        )
    }
}

/// Decode a PNG or JPEG stream into 8-bit RGB, dropping any alpha channel.
pub fn decode_image(bytes: &[u8]) -> Result<ImageRgb> {
    let decoded =
        image::load_from_memory(bytes).map_err(|e| Error::MalformedImage(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (width, height) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    ImageRgb::new(width, height, pixels)
}

/// Decode an image as single-channel 8-bit levels.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let decoded =
        image::load_from_memory(bytes).map_err(|e| Error::MalformedImage(e.to_string()))?;
    let luma = decoded.to_luma8();
    let (width, height) = luma.dimensions();
    GrayImage::new(width, height, luma.into_raw())
}

/// Decode a mask image; nonzero pixels are inside the pattern.
pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    decode_gray(bytes).map(|g| Mask::from_gray(&g))
}

pub fn encode_png(img: &ImageRgb) -> Vec<u8> {
    let raw: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(Cursor::new(&mut out))
        .write_image(&raw, img.width, img.height, image::ExtendedColorType::Rgb8)
        .expect("encoding into memory cannot fail");
    out
}

pub fn encode_gray_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(Cursor::new(&mut out))
        .write_image(&img.pixels, img.width, img.height, image::ExtendedColorType::L8)
        .expect("encoding into memory cannot fail");
    out
}

pub fn encode_mask_png(mask: &Mask) -> Vec<u8> {
    let gray = GrayImage {
        width: mask.width,
        height: mask.height,
        pixels: mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
    };
    encode_gray_png(&gray)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
        .map_err(|e| Error::MalformedImage(format!("{}: {}", path.display(), e)))
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes).map_err(|e| Error::MalformedImage(format!("{}: {}", path.display(), e)))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    read_gray(path).map(|g| Mask::from_gray(&g))
}

/// Hexcone RGB to HSV. Achromatic pixels get hue 0.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> Hsv {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max == 0.0 { 0.0 } else { 255.0 * delta / max };
    let mut h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    Hsv { h, s, v: max }
}

/// Inverse of [`rgb_to_hsv`], rounded to 8-bit levels.
pub fn hsv_to_rgb(hsv: Hsv) -> [u8; 3] {
    let v = hsv.v;
    let c = v * hsv.s / 255.0;
    let hp = hsv.h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let level = |u: f64| (u + m).round().clamp(0.0, 255.0) as u8;
    [level(r), level(g), level(b)]
}

pub fn to_hsv(img: &ImageRgb) -> ImageHsv {
    ImageHsv {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| rgb_to_hsv(p)).collect(),
    }
}

pub fn luma([r, g, b]: [u8; 3]) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

pub fn to_grayscale(img: &ImageRgb) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| luma(p)).collect(),
    }
}

/// Resample one axis: per output sample, the source indices and weights.
fn axis_weights(src: u32, dst: u32) -> Vec<Vec<(usize, f64)>> {
    let (src_f, dst_f) = (src as f64, dst as f64);
    if src == dst {
        return (0..src as usize).map(|i| vec![(i, 1.0)]).collect();
    }
    if src > dst {
        // box filter: each output sample averages the source span it covers
        let scale = src_f / dst_f;
        (0..dst)
            .map(|i| {
                let lo = i as f64 * scale;
                let hi = lo + scale;
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(src as usize);
                (first..last)
                    .filter_map(|j| {
                        let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                        (overlap > 0.0).then_some((j, overlap / scale))
                    })
                    .collect()
            })
            .collect()
    } else {
        (0..dst)
            .map(|i| {
                let c = ((i as f64 + 0.5) * src_f / dst_f - 0.5).clamp(0.0, src_f - 1.0);
                let j0 = c.floor() as usize;
                let j1 = (j0 + 1).min(src as usize - 1);
                let t = c - j0 as f64;
                if j1 == j0 || t == 0.0 {
                    vec![(j0, 1.0)]
                } else {
                    vec![(j0, 1.0 - t), (j1, t)]
                }
            })
            .collect()
    }
}

/// Square `side`x`side` resample: area averaging on axes that shrink,
/// bilinear on axes that grow, identity on axes already at `side`.
pub fn resize(img: &ImageRgb, side: u32) -> ImageRgb {
    assert!(side >= 1, "resize side must be at least 1");
    if img.width == side && img.height == side {
        return img.clone();
    }
    let wx = axis_weights(img.width, side);
    let wy = axis_weights(img.height, side);

    // horizontal pass into f64 to avoid double rounding
    let mut rows = vec![[0.0f64; 3]; img.height as usize * side as usize];
    for y in 0..img.height as usize {
        let src_row = &img.pixels[y * img.width as usize..(y + 1) * img.width as usize];
        for (ox, taps) in wx.iter().enumerate() {
            let mut acc = [0.0; 3];
            for &(j, w) in taps {
                for c in 0..3 {
                    acc[c] += w * src_row[j][c] as f64;
                }
            }
            rows[y * side as usize + ox] = acc;
        }
    }

    let mut pixels = Vec::with_capacity(side as usize * side as usize);
    for taps in &wy {
        for ox in 0..side as usize {
            let mut acc = [0.0; 3];
            for &(j, w) in taps {
                let p = rows[j * side as usize + ox];
                for c in 0..3 {
                    acc[c] += w * p[c];
                }
            }
            pixels.push(acc.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    ImageRgb {
        width: side,
        height: side,
        pixels,
    }
}

/// Crop the tight bounding box of `mask` out of `image`.
///
/// The record also carries a context window padded by [`BACKGROUND_PADDING`]
/// on each side (clipped to the image), from which background statistics are
/// drawn.
pub fn crop_pattern(
    image: &ImageRgb,
    mask: &Mask,
    class_label: u32,
    id: impl Into<String>,
    source_image: impl Into<String>,
) -> Result<PatternRecord> {
    if image.width != mask.width || image.height != mask.height {
        return Err(Error::dims(
            format!("image {}x{}", image.width, image.height),
            format!("mask {}x{}", mask.width, mask.height),
        ));
    }
    let (x0, y0, w, h) = mask.bounding_box().ok_or(Error::EmptyMask)?;
    let crop = image.sub_image(x0, y0, w, h);
    let crop_mask = mask.sub_mask(x0, y0, w, h);

    let pad_x = (w as f64 * BACKGROUND_PADDING).ceil() as u32;
    let pad_y = (h as f64 * BACKGROUND_PADDING).ceil() as u32;
    let cx0 = x0.saturating_sub(pad_x);
    let cy0 = y0.saturating_sub(pad_y);
    let cx1 = (x0 + w + pad_x).min(image.width);
    let cy1 = (y0 + h + pad_y).min(image.height);
    let context = PatternContext {
        image: image.sub_image(cx0, cy0, cx1 - cx0, cy1 - cy0),
        mask: mask.sub_mask(cx0, cy0, cx1 - cx0, cy1 - cy0),
        origin: (cx0, cy0),
    };

    Ok(PatternRecord {
        id: id.into(),
        class_label,
        source_image: source_image.into(),
        crop,
        mask: crop_mask,
        bbox_origin: (x0, y0),
        context,
    })
}

fn check_dims(width: u32, height: u32, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "image dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    if len != width as usize * height as usize {
        return Err(Error::dims(
            format!("{width}x{height}"),
            format!("{len} pixels"),
        ));
    }
    Ok(())
}

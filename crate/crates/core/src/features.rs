//! The 38 DefChars of a pattern, their `[0, 1]` normalisation, and the two
//! baseline descriptors (LBP histogram and resized raw crop).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{self, Polygon};
use crate::imaging::{self, GrayImage, ImageHsv, ImageRgb, Mask, PatternRecord};
use crate::store::Payload;

pub const SLOT_COUNT: usize = 38;

/// Edge counts at or above this normalise to 1.
pub const MAX_EDGES: usize = 64;

/// Bounding-box gap, in pixels, up to which a neighbour counts as short.
pub const SHORT_NEIGHBOUR_PX: f64 = 100.0;

/// Canonical slot order. Store files and CLI output use exactly these names.
pub const SLOT_NAMES: [&str; SLOT_COUNT] = [
    "defect_avg_hue",
    "defect_mode_hue",
    "defect_unique_hue",
    "defect_hue_range",
    "defect_avg_sat",
    "defect_mode_sat",
    "defect_unique_sat",
    "defect_sat_range",
    "defect_avg_bri",
    "defect_mode_bri",
    "defect_unique_bri",
    "defect_bri_range",
    "background_avg_hue",
    "background_mode_hue",
    "background_unique_hue",
    "background_hue_range",
    "background_avg_sat",
    "background_mode_sat",
    "background_unique_sat",
    "background_sat_range",
    "background_avg_bri",
    "background_mode_bri",
    "background_unique_bri",
    "background_bri_range",
    "hue_diff",
    "sat_diff",
    "bri_diff",
    "num_edges",
    "coverage",
    "aspect_ratio",
    "avg_turn_angle",
    "mode_turn_angle",
    "edge_ratio",
    "followed_turns",
    "small_turns",
    "reversed_turns",
    "defect_size",
    "neighbour_distance",
];

const DEFECT_COLOUR: usize = 0;
const BACKGROUND_COLOUR: usize = 12;
const COLOUR_COMPLEXITY: usize = 24;
const SHAPE_INFO: usize = 27;
const SHAPE_COMPLEXITY: usize = 32;
const DEFECT_SIZE: usize = 36;
const NEIGHBOUR: usize = 37;

pub fn slot_index(name: &str) -> Option<usize> {
    SLOT_NAMES.iter().position(|&s| s == name)
}

/// Which descriptor a datastore holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    DefChars,
    RawImage,
    Lbp,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::DefChars, FeatureKind::RawImage, FeatureKind::Lbp];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::DefChars => "defchars",
            FeatureKind::RawImage => "raw",
            FeatureKind::Lbp => "lbp",
        }
    }

    /// Label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FeatureKind::DefChars => "DefChars",
            FeatureKind::RawImage => "Image",
            FeatureKind::Lbp => "LBP",
        }
    }

    /// Whether extraction works on a resized crop.
    pub fn needs_side(self) -> bool {
        !matches!(self, FeatureKind::DefChars)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "defchars" => Ok(FeatureKind::DefChars),
            "raw" | "raw_image" | "image" => Ok(FeatureKind::RawImage),
            "lbp" => Ok(FeatureKind::Lbp),
            other => Err(Error::UnknownFeature(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorRegionStats {
    pub avg_hue: u32,
    pub mode_hue: u32,
    pub unique_hue: u32,
    pub hue_range: u32,
    pub avg_sat: u32,
    pub mode_sat: u32,
    pub unique_sat: u32,
    pub sat_range: u32,
    pub avg_bri: u32,
    pub mode_bri: u32,
    pub unique_bri: u32,
    pub bri_range: u32,
}

impl ColorRegionStats {
    fn to_slots(self) -> [f64; 12] {
        [
            self.avg_hue,
            self.mode_hue,
            self.unique_hue,
            self.hue_range,
            self.avg_sat,
            self.mode_sat,
            self.unique_sat,
            self.sat_range,
            self.avg_bri,
            self.mode_bri,
            self.unique_bri,
            self.bri_range,
        ]
        .map(f64::from)
    }
}

struct Histograms {
    hue: [u64; 360],
    sat: [u64; 256],
    bri: [u64; 256],
    count: u64,
}

fn region_histograms(img: &ImageHsv, region: &Mask) -> Result<Histograms> {
    if img.width() != region.width() || img.height() != region.height() {
        return Err(Error::dims(
            format!("image {}x{}", img.width(), img.height()),
            format!("region {}x{}", region.width(), region.height()),
        ));
    }
    let mut h = Histograms {
        hue: [0; 360],
        sat: [0; 256],
        bri: [0; 256],
        count: 0,
    };
    for (px, &inside) in img.pixels().iter().zip(region.bits()) {
        if inside {
            h.hue[px.hue_level() as usize] += 1;
            h.sat[px.sat_level() as usize] += 1;
            h.bri[px.bri_level() as usize] += 1;
            h.count += 1;
        }
    }
    if h.count == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(h)
}

struct LevelStats {
    avg: u32,
    mode: u32,
    unique: u32,
    min: u32,
    max: u32,
}

fn level_stats(hist: &[u64], count: u64) -> LevelStats {
    let sum: u64 = hist.iter().enumerate().map(|(v, &n)| v as u64 * n).sum();
    let mut mode = 0;
    let mut best = 0;
    for (v, &n) in hist.iter().enumerate() {
        // strict comparison keeps the smallest value on ties
        if n > best {
            best = n;
            mode = v as u32;
        }
    }
    let present = || hist.iter().enumerate().filter(|(_, &n)| n > 0).map(|(v, _)| v as u32);
    LevelStats {
        avg: (sum as f64 / count as f64).round() as u32,
        mode,
        unique: present().count() as u32,
        min: present().next().unwrap_or(0),
        max: present().next_back().unwrap_or(0),
    }
}

/// Colour statistics of the pixels of `img` selected by `region`, on integer
/// hue degrees and integer saturation / brightness levels.
pub fn color_region_stats(img: &ImageHsv, region: &Mask) -> Result<ColorRegionStats> {
    let h = region_histograms(img, region)?;
    let hue = level_stats(&h.hue, h.count);
    let sat = level_stats(&h.sat, h.count);
    let bri = level_stats(&h.bri, h.count);
    let hue_span = hue.max - hue.min;
    Ok(ColorRegionStats {
        avg_hue: hue.avg,
        mode_hue: hue.mode,
        unique_hue: hue.unique,
        hue_range: hue_span.min(360 - hue_span),
        avg_sat: sat.avg,
        mode_sat: sat.mode,
        unique_sat: sat.unique,
        sat_range: sat.max - sat.min,
        avg_bri: bri.avg,
        mode_bri: bri.mode,
        unique_bri: bri.unique,
        bri_range: bri.max - bri.min,
    })
}

fn total_variation(p: &[u64], p_total: u64, q: &[u64], q_total: u64) -> f64 {
    let (pt, qt) = (p_total as f64, q_total as f64);
    let sum: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| (a as f64 / pt - b as f64 / qt).abs())
        .sum();
    (0.5 * sum).clamp(0.0, 1.0)
}

/// Total-variation distance between the defect and background frequency
/// distributions of hue, saturation and brightness.
pub fn color_complexity(img: &ImageHsv, defect: &Mask, background: &Mask) -> Result<(f64, f64, f64)> {
    let d = region_histograms(img, defect)?;
    let b = region_histograms(img, background)?;
    Ok((
        total_variation(&d.hue, d.count, &b.hue, b.count),
        total_variation(&d.sat, d.count, &b.sat, b.count),
        total_variation(&d.bri, d.count, &b.bri, b.count),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeInfo {
    pub num_edges: usize,
    pub coverage: f64,
    pub aspect_ratio: f64,
    pub avg_turn_angle: f64,
    pub mode_turn_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeComplexity {
    pub edge_ratio: f64,
    pub followed_turns: f64,
    pub small_turns: f64,
    pub reversed_turns: f64,
}

fn integer_mode(values: impl Iterator<Item = i64>) -> i64 {
    let mut sorted: Vec<i64> = values.collect();
    sorted.sort_unstable();
    let mut best = (0usize, 0i64);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best.0 {
            best = (j, sorted[i]);
        }
        i += j;
    }
    best.1
}

pub fn shape_info(p: &Polygon) -> Result<ShapeInfo> {
    let bb = geometry::bounding_box(p);
    if bb.width <= 0.0 || bb.height <= 0.0 {
        return Err(Error::DegenerateBox);
    }
    let profile = geometry::vertex_angles(p)?;
    let n = profile.angles.len() as f64;
    let mean = profile.angles.iter().sum::<f64>() / n;
    let mode = integer_mode(profile.angles.iter().map(|a| a.round() as i64));
    Ok(ShapeInfo {
        num_edges: p.len(),
        coverage: (geometry::polygon_area(p) / bb.area()).clamp(0.0, 1.0),
        aspect_ratio: bb.width.min(bb.height) / bb.width.max(bb.height),
        avg_turn_angle: mean.round(),
        mode_turn_angle: mode as f64,
    })
}

pub fn shape_complexity(p: &Polygon) -> Result<ShapeComplexity> {
    let profile = geometry::vertex_angles(p)?;
    let lengths = geometry::edge_lengths(p);
    let n = lengths.len();
    let edge_ratio = (0..n)
        .map(|i| {
            let (a, b) = (lengths[i], lengths[(i + 1) % n]);
            a.min(b) / a.max(b)
        })
        .sum::<f64>()
        / n as f64;

    let signs = &profile.turn_signs;
    let mut followed = 0usize;
    let mut reversed = 0usize;
    for i in 0..n {
        let (a, b) = (signs[i], signs[(i + 1) % n]);
        if a != 0 && b != 0 {
            if a == b {
                followed += 1;
            } else {
                reversed += 1;
            }
        }
    }
    let small = profile.angles.iter().filter(|&&a| a < 90.0).count();
    Ok(ShapeComplexity {
        edge_ratio,
        followed_turns: followed as f64 / n as f64,
        small_turns: small as f64 / n as f64,
        reversed_turns: reversed as f64 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NeighbourCategory {
    Short = 0,
    Long = 1,
    NoNeighbour = 2,
}

impl NeighbourCategory {
    pub fn value(self) -> u8 {
        self as u8
    }
}

/// Gap between two pixel boxes `(x0, y0, w, h)`; 0 when they touch or overlap.
pub fn box_gap(a: (u32, u32, u32, u32), b: (u32, u32, u32, u32)) -> f64 {
    let axis = |a0: u32, aw: u32, b0: u32, bw: u32| -> f64 {
        let (a0, a1, b0, b1) = (a0 as i64, (a0 + aw) as i64, b0 as i64, (b0 + bw) as i64);
        (b0 - a1).max(a0 - b1).max(0) as f64
    };
    axis(a.0, a.2, b.0, b.2).hypot(axis(a.1, a.3, b.1, b.3))
}

/// Defect pixel count and the distance category of the nearest other pattern
/// from the same source image.
pub fn meta_info(record: &PatternRecord, siblings: &[PatternRecord]) -> (u64, NeighbourCategory) {
    let size = record.mask.count() as u64;
    let own = record.source_bbox();
    let nearest = siblings
        .iter()
        .filter(|s| s.source_image == record.source_image && s.id != record.id)
        .map(|s| box_gap(own, s.source_bbox()))
        .min_by(f64::total_cmp);
    let category = match nearest {
        None => NeighbourCategory::NoNeighbour,
        Some(gap) if gap <= SHORT_NEIGHBOUR_PX => NeighbourCategory::Short,
        Some(_) => NeighbourCategory::Long,
    };
    (size, category)
}

/// The 38 DefChars of one pattern in [`SLOT_NAMES`] order.
#[derive(Debug, Clone)]
pub struct DefCharVector {
    values: [f64; SLOT_COUNT],
    normalized: bool,
    /// Crop area the defect size is normalised against.
    crop_area: f64,
}

impl DefCharVector {
    pub fn from_raw(values: [f64; SLOT_COUNT], crop_area: f64) -> Self {
        Self {
            values,
            normalized: false,
            crop_area,
        }
    }

    /// Wrap already-normalised values, e.g. when loading a datastore.
    pub fn from_normalized(values: [f64; SLOT_COUNT]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "slot {} = {} is outside [0, 1]",
                SLOT_NAMES[i], values[i]
            )));
        }
        Ok(Self {
            values,
            normalized: true,
            crop_area: 0.0,
        })
    }

    pub fn values(&self) -> &[f64; SLOT_COUNT] {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        slot_index(name).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        SLOT_NAMES.iter().copied().zip(self.values.iter().copied())
    }
}

// crop_area only feeds normalisation, so it takes no part in equality
impl PartialEq for DefCharVector {
    fn eq(&self, other: &Self) -> bool {
        self.normalized == other.normalized && self.values == other.values
    }
}

/// Unnormalised DefChars of `record`. `siblings` are the other patterns of
/// the same source image (the record itself may be included).
pub fn extract_defchars(record: &PatternRecord, siblings: &[PatternRecord]) -> Result<DefCharVector> {
    let ctx = &record.context;
    let hsv = imaging::to_hsv(&ctx.image);
    let background = ctx.mask.inverted();
    let defect_stats = color_region_stats(&hsv, &ctx.mask)?;
    let background_stats = color_region_stats(&hsv, &background)?;
    let (hue_diff, sat_diff, bri_diff) = color_complexity(&hsv, &ctx.mask, &background)?;

    let polygon = geometry::polygon_from_mask(&record.mask)?;
    let info = shape_info(&polygon)?;
    let cx = shape_complexity(&polygon)?;
    let (size, neighbour) = meta_info(record, siblings);

    let mut values = [0.0; SLOT_COUNT];
    values[DEFECT_COLOUR..DEFECT_COLOUR + 12].copy_from_slice(&defect_stats.to_slots());
    values[BACKGROUND_COLOUR..BACKGROUND_COLOUR + 12].copy_from_slice(&background_stats.to_slots());
    values[COLOUR_COMPLEXITY..COLOUR_COMPLEXITY + 3].copy_from_slice(&[hue_diff, sat_diff, bri_diff]);
    values[SHAPE_INFO..SHAPE_INFO + 5].copy_from_slice(&[
        info.num_edges as f64,
        info.coverage,
        info.aspect_ratio,
        info.avg_turn_angle,
        info.mode_turn_angle,
    ]);
    values[SHAPE_COMPLEXITY..SHAPE_COMPLEXITY + 4].copy_from_slice(&[
        cx.edge_ratio,
        cx.followed_turns,
        cx.small_turns,
        cx.reversed_turns,
    ]);
    values[DEFECT_SIZE] = size as f64;
    values[NEIGHBOUR] = neighbour.value() as f64;

    let crop_area = record.crop.width() as f64 * record.crop.height() as f64;
    Ok(DefCharVector::from_raw(values, crop_area))
}

fn normalize_colour_block(raw: &[f64], out: &mut [f64]) {
    let hue = |v: f64| v / 359.0;
    let level = |v: f64| v / 254.0;
    out[0] = hue(raw[0]);
    out[1] = hue(raw[1]);
    out[2] = (raw[2] - 1.0) / 359.0;
    out[3] = raw[3] / 180.0;
    for (base, _) in [(4, "sat"), (8, "bri")] {
        out[base] = level(raw[base]);
        out[base + 1] = level(raw[base + 1]);
        out[base + 2] = (raw[base + 2] - 1.0) / 254.0;
        out[base + 3] = level(raw[base + 3]);
    }
}

/// Fixed-range scaling of every slot into `[0, 1]`.
pub fn normalize(v: &DefCharVector) -> Result<DefCharVector> {
    if v.normalized {
        return Err(Error::AlreadyNormalized);
    }
    let raw = &v.values;
    let mut out = *raw;
    normalize_colour_block(&raw[DEFECT_COLOUR..DEFECT_COLOUR + 12], &mut out[DEFECT_COLOUR..DEFECT_COLOUR + 12]);
    normalize_colour_block(
        &raw[BACKGROUND_COLOUR..BACKGROUND_COLOUR + 12],
        &mut out[BACKGROUND_COLOUR..BACKGROUND_COLOUR + 12],
    );
    out[SHAPE_INFO] = (raw[SHAPE_INFO] - 3.0) / (MAX_EDGES - 3) as f64;
    out[SHAPE_INFO + 3] = raw[SHAPE_INFO + 3] / 180.0;
    out[SHAPE_INFO + 4] = raw[SHAPE_INFO + 4] / 180.0;
    out[DEFECT_SIZE] = if v.crop_area > 0.0 {
        raw[DEFECT_SIZE] / v.crop_area
    } else {
        1.0
    };
    out[NEIGHBOUR] = raw[NEIGHBOUR] / 2.0;
    for x in &mut out {
        *x = x.clamp(0.0, 1.0);
    }
    Ok(DefCharVector {
        values: out,
        normalized: true,
        crop_area: v.crop_area,
    })
}

/// Relative frequencies of the 256 LBP codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpHistogram {
    bins: Vec<f64>,
}

impl LbpHistogram {
    pub const BINS: usize = 256;

    pub fn from_bins(bins: Vec<f64>) -> Result<Self> {
        if bins.len() != Self::BINS {
            return Err(Error::dims(format!("{} bins", Self::BINS), format!("{} bins", bins.len())));
        }
        if bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument("histogram bins must be finite and nonnegative".into()));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }
}

// clockwise from the top-left neighbour; the first neighbour is the MSB
const LBP_NEIGHBOURS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// LBP code of an interior pixel: bit set where the neighbour is at least the
/// centre value.
pub fn lbp_code(gray: &GrayImage, x: u32, y: u32) -> u8 {
    let centre = gray.get(x, y);
    LBP_NEIGHBOURS.iter().fold(0u8, |code, &(dx, dy)| {
        let n = gray.get((x as i64 + dx) as u32, (y as i64 + dy) as u32);
        (code << 1) | u8::from(n >= centre)
    })
}

pub fn lbp_histogram(gray: &GrayImage) -> Result<LbpHistogram> {
    let (w, h) = (gray.width(), gray.height());
    if w < 3 || h < 3 {
        return Err(Error::TooSmall { width: w, height: h });
    }
    let mut counts = [0u64; 256];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            counts[lbp_code(gray, x, y) as usize] += 1;
        }
    }
    let total = ((w - 2) as u64 * (h - 2) as u64) as f64;
    Ok(LbpHistogram {
        bins: counts.iter().map(|&c| c as f64 / total).collect(),
    })
}

pub fn raw_feature(record: &PatternRecord, side: u32) -> ImageRgb {
    imaging::resize(&record.crop, side)
}

/// Descriptor of `record` as stored in a datastore. DefChars come out
/// normalised; `side` is required for the resized-crop descriptors.
pub fn extract_payload(
    kind: FeatureKind,
    side: Option<u32>,
    record: &PatternRecord,
    siblings: &[PatternRecord],
) -> Result<Payload> {
    let side_or_err = || {
        side.filter(|&s| s >= 1)
            .ok_or_else(|| Error::InvalidArgument(format!("feature {kind} needs an image side")))
    };
    match kind {
        FeatureKind::DefChars => normalize(&extract_defchars(record, siblings)?).map(Payload::DefChars),
        FeatureKind::RawImage => Ok(Payload::Image(raw_feature(record, side_or_err()?))),
        FeatureKind::Lbp => {
            let resized = raw_feature(record, side_or_err()?);
            lbp_histogram(&imaging::to_grayscale(&resized)).map(Payload::Lbp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::imaging::{crop_pattern, to_hsv};
    use proptest::prelude::*;

    fn hsv_row(colours: &[[u8; 3]]) -> ImageHsv {
        to_hsv(&ImageRgb::new(colours.len() as u32, 1, colours.to_vec()).unwrap())
    }

    fn all(n: u32) -> Mask {
        Mask::from_fn(n, 1, |_, _| true)
    }

    /// RGB whose hue is `deg` degrees at full saturation and value.
    fn hue_rgb(deg: u32) -> [u8; 3] {
        imaging::hsv_to_rgb(imaging::Hsv {
            h: deg as f64,
            s: 255.0,
            v: 255.0,
        })
    }

    #[test]
    fn slot_layout() {
        assert_eq!(SLOT_NAMES.len(), 38);
        assert_eq!(SLOT_NAMES[COLOUR_COMPLEXITY], "hue_diff");
        assert_eq!(SLOT_NAMES[SHAPE_INFO], "num_edges");
        assert_eq!(SLOT_NAMES[SHAPE_COMPLEXITY], "edge_ratio");
        assert_eq!(SLOT_NAMES[DEFECT_SIZE], "defect_size");
        let mut unique = SLOT_NAMES.to_vec();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 38);
    }

    #[test]
    fn uniform_red_stats() {
        let s = color_region_stats(&hsv_row(&[[255, 0, 0]; 4]), &all(4)).unwrap();
        assert_eq!((s.avg_hue, s.mode_hue, s.unique_hue, s.hue_range), (0, 0, 1, 0));
        assert_eq!((s.avg_sat, s.avg_bri, s.sat_range), (255, 255, 0));
    }

    #[test]
    fn hue_range_is_circular() {
        let img = hsv_row(&[hue_rgb(10), hue_rgb(350)]);
        assert_eq!(img.pixels()[1].hue_level(), 350);
        assert_eq!(color_region_stats(&img, &all(2)).unwrap().hue_range, 20);
    }

    #[test]
    fn hue_counts_by_hand() {
        let img = hsv_row(&[hue_rgb(10), hue_rgb(10), hue_rgb(20)]);
        let s = color_region_stats(&img, &all(3)).unwrap();
        // (10 + 10 + 20) / 3 = 13.33
        assert_eq!((s.mode_hue, s.unique_hue, s.avg_hue), (10, 2, 13));
    }

    #[test]
    fn mode_tie_takes_smallest() {
        let img = hsv_row(&[hue_rgb(40), hue_rgb(30)]);
        assert_eq!(color_region_stats(&img, &all(2)).unwrap().mode_hue, 30);
    }

    #[test]
    fn empty_region_errors() {
        let img = hsv_row(&[[1, 2, 3]]);
        let none = Mask::empty(1, 1);
        assert!(matches!(color_region_stats(&img, &none), Err(Error::EmptyRegion)));
        assert!(matches!(color_complexity(&img, &all(1), &none), Err(Error::EmptyRegion)));
    }

    #[test]
    fn colour_complexity_fixtures() {
        let same = hsv_row(&[[10, 200, 30], [10, 200, 30]]);
        let left = Mask::from_fn(2, 1, |x, _| x == 0);
        let right = Mask::from_fn(2, 1, |x, _| x == 1);
        assert_eq!(color_complexity(&same, &left, &right).unwrap(), (0.0, 0.0, 0.0));

        let rb = hsv_row(&[[255, 0, 0], [0, 0, 255]]);
        assert_eq!(color_complexity(&rb, &left, &right).unwrap().0, 1.0);

        // defect all h=0, background half h=0 and half h=120
        let img = hsv_row(&[[255, 0, 0], [255, 0, 0], [0, 255, 0]]);
        let defect = Mask::from_fn(3, 1, |x, _| x == 0);
        let background = Mask::from_fn(3, 1, |x, _| x > 0);
        let (hue, sat, bri) = color_complexity(&img, &defect, &background).unwrap();
        assert!((hue - 0.5).abs() < 1e-15);
        assert_eq!((sat, bri), (0.0, 0.0));
    }

    #[test]
    fn shape_fixtures() {
        let rect = Polygon::from_coords(&[(0.0, 0.0), (8.0, 0.0), (8.0, 5.0), (0.0, 5.0)]).unwrap();
        let info = shape_info(&rect).unwrap();
        assert_eq!(info.num_edges, 4);
        assert_eq!(info.coverage, 1.0);
        assert_eq!((info.avg_turn_angle, info.mode_turn_angle), (90.0, 90.0));
        assert_eq!(info.aspect_ratio, 5.0 / 8.0);

        let square = Polygon::from_coords(&[(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (0.0, 3.0)]).unwrap();
        assert_eq!(shape_info(&square).unwrap().aspect_ratio, 1.0);
        let c = shape_complexity(&square).unwrap();
        assert_eq!(
            (c.edge_ratio, c.followed_turns, c.reversed_turns, c.small_turns),
            (1.0, 1.0, 0.0, 0.0)
        );

        let tri = Polygon::from_coords(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]).unwrap();
        let info = shape_info(&tri).unwrap();
        assert_eq!((info.coverage, info.aspect_ratio), (0.5, 1.0));
        // angles 90, 45, 45
        assert_eq!((info.avg_turn_angle, info.mode_turn_angle), (60.0, 45.0));

        let h = 3f64.sqrt() / 2.0;
        let eq = Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (0.5, h)]).unwrap();
        assert_eq!(shape_complexity(&eq).unwrap().small_turns, 1.0);
    }

    #[test]
    fn notched_hexagon_turns() {
        let p = Polygon::from_coords(&[
            (0.0, 0.0),
            (2.0, 0.0),
            (4.0, 2.0),
            (6.0, 0.0),
            (6.0, 6.0),
            (0.0, 6.0),
        ])
        .unwrap();
        // signs [+,+,-,+,+,+]: pairs (1,2) and (2,3) disagree
        let c = shape_complexity(&p).unwrap();
        assert!((c.reversed_turns - 2.0 / 6.0).abs() < 1e-15);
        assert!((c.followed_turns + c.reversed_turns - 1.0).abs() < 1e-15);
    }

    fn record_at(id: &str, x0: u32, y0: u32, w: u32, h: u32) -> PatternRecord {
        let img = ImageRgb::filled(600, 400, [0, 0, 0]);
        let mask = Mask::from_fn(600, 400, |x, y| (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y));
        crop_pattern(&img, &mask, 1, id, "img").unwrap()
    }

    #[test]
    fn neighbour_categories() {
        let a = record_at("a", 10, 10, 20, 20);
        assert_eq!(meta_info(&a, &[]), (400, NeighbourCategory::NoNeighbour));
        assert_eq!(meta_info(&a, std::slice::from_ref(&a)).1, NeighbourCategory::NoNeighbour);

        let touching = record_at("b", 30, 10, 5, 5);
        assert_eq!(box_gap(a.source_bbox(), touching.source_bbox()), 0.0);
        assert_eq!(meta_info(&a, &[touching]).1, NeighbourCategory::Short);

        let far = record_at("c", 180, 10, 5, 5);
        assert_eq!(box_gap(a.source_bbox(), far.source_bbox()), 150.0);
        assert_eq!(meta_info(&a, std::slice::from_ref(&far)).1, NeighbourCategory::Long);

        let near = record_at("d", 130, 10, 5, 5);
        assert_eq!(meta_info(&a, &[far, near]).1, NeighbourCategory::Short);
    }

    fn red_square_on_blue() -> PatternRecord {
        let img = ImageRgb::from_fn(40, 40, |x, y| {
            if (10..30).contains(&x) && (10..30).contains(&y) {
                [255, 0, 0]
            } else {
                [0, 0, 255]
            }
        });
        let mask = Mask::from_fn(40, 40, |x, y| (10..30).contains(&x) && (10..30).contains(&y));
        crop_pattern(&img, &mask, 1, "sq", "img").unwrap()
    }

    #[test]
    fn red_square_on_blue_fixture() {
        let v = extract_defchars(&red_square_on_blue(), &[]).unwrap();
        assert_eq!(v.get("defect_avg_hue"), Some(0.0));
        assert_eq!(v.get("background_avg_hue"), Some(240.0));
        assert_eq!(v.get("hue_diff"), Some(1.0));
        assert_eq!(v.get("coverage"), Some(1.0));
        assert_eq!(v.get("num_edges"), Some(4.0));
        assert_eq!(v.get("defect_size"), Some(400.0));
        assert_eq!(v.get("neighbour_distance"), Some(2.0));
        assert_eq!(v.as_slice().len(), 38);
        assert!(!v.is_normalized());
    }

    #[test]
    fn normalize_endpoints() {
        let mut raw = [0.0; SLOT_COUNT];
        raw[0] = 359.0;
        raw[2] = 1.0;
        raw[6] = 1.0;
        raw[10] = 1.0;
        raw[SHAPE_INFO] = 200.0;
        raw[NEIGHBOUR] = 1.0;
        raw[DEFECT_SIZE] = 50.0;
        let n = normalize(&DefCharVector::from_raw(raw, 100.0)).unwrap();
        assert_eq!(n.values()[0], 1.0);
        assert_eq!(n.values()[1], 0.0);
        assert_eq!(n.values()[2], 0.0);
        assert_eq!(n.values()[SHAPE_INFO], 1.0);
        assert_eq!(n.values()[NEIGHBOUR], 0.5);
        assert_eq!(n.values()[DEFECT_SIZE], 0.5);
        assert!(matches!(normalize(&n), Err(Error::AlreadyNormalized)));
    }

    #[test]
    fn normalize_clamps_level_255() {
        let mut raw = [0.0; SLOT_COUNT];
        raw[4] = 255.0;
        raw[6] = 256.0;
        let n = normalize(&DefCharVector::from_raw(raw, 1.0)).unwrap();
        assert_eq!((n.values()[4], n.values()[6]), (1.0, 1.0));
    }

    #[test]
    fn lbp_fixtures() {
        let flat = GrayImage::from_fn(5, 4, |_, _| 77);
        let h = lbp_histogram(&flat).unwrap();
        assert_eq!(h.bins()[255], 1.0);

        let peak = GrayImage::from_fn(3, 3, |x, y| if (x, y) == (1, 1) { 100 } else { 50 });
        assert_eq!(lbp_histogram(&peak).unwrap().bins()[0], 1.0);

        assert!(matches!(
            lbp_histogram(&GrayImage::from_fn(2, 5, |_, _| 0)),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn lbp_gradient_by_hand() {
        // value = 10 * x + y
        //   0 10 20 30
        //   1 11 21 31
        //   2 12 22 32
        //   3 13 23 33
        let g = GrayImage::from_fn(4, 4, |x, y| (10 * x + y) as u8);
        // centre 11 at (1,1): TL 0, T 10, TR 20, R 21, BR 22, B 12, BL 2, L 1
        //   -> 0 0 1 1 1 1 0 0 = 0b0011_1100 = 60
        assert_eq!(lbp_code(&g, 1, 1), 0b0011_1100);
        // every interior pixel sees the same layout
        assert_eq!(lbp_code(&g, 2, 1), 60);
        assert_eq!(lbp_code(&g, 1, 2), 60);
        assert_eq!(lbp_code(&g, 2, 2), 60);
        assert_eq!(lbp_histogram(&g).unwrap().bins()[60], 1.0);

        // transposed: value = x + 10 * y
        // centre 11: TL 0, T 1, TR 2, R 12, BR 22, B 21, BL 20, L 10
        //   -> 0 0 0 1 1 1 1 0 = 30
        let t = GrayImage::from_fn(4, 4, |x, y| (x + 10 * y) as u8);
        assert_eq!(lbp_code(&t, 1, 1), 30);
    }

    #[test]
    fn raw_feature_sizes() {
        let rec = red_square_on_blue();
        assert_eq!(raw_feature(&rec, 20).pixels(), rec.crop.pixels());
        let small = raw_feature(&rec, 8);
        assert_eq!((small.width(), small.height()), (8, 8));
    }

    #[test]
    fn feature_kind_names() {
        for k in FeatureKind::ALL {
            assert_eq!(k.name().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("sift".parse::<FeatureKind>().is_err());
    }

    proptest! {
        #[test]
        fn lbp_invariant_under_constant_shift(
            w in 3u32..10, h in 3u32..10, shift in 0u8..50,
            seed in proptest::collection::vec(0u8..200, 100),
        ) {
            let g = GrayImage::from_fn(w, h, |x, y| seed[(y * 10 + x) as usize]);
            let shifted = GrayImage::from_fn(w, h, |x, y| seed[(y * 10 + x) as usize] + shift);
            let a = lbp_histogram(&g).unwrap();
            prop_assert_eq!(&a, &lbp_histogram(&shifted).unwrap());
            prop_assert!((a.bins().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn colour_complexity_is_symmetric(
            colours in proptest::collection::vec(any::<[u8; 3]>(), 12),
            split in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let img = to_hsv(&ImageRgb::new(12, 1, colours).unwrap());
            let a = Mask::new(12, 1, split).unwrap();
            let b = a.inverted();
            prop_assume!(!a.is_empty() && !b.is_empty());
            let ab = color_complexity(&img, &a, &b).unwrap();
            let ba = color_complexity(&img, &b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(color_complexity(&img, &a, &a).unwrap(), (0.0, 0.0, 0.0));
        }

        #[test]
        fn normalize_is_monotone_per_slot(
            slot in 0usize..SLOT_COUNT,
            base in proptest::collection::vec(0.0f64..400.0, SLOT_COUNT),
            bump in 0.0f64..100.0,
        ) {
            let mut raw = [0.0; SLOT_COUNT];
            raw.copy_from_slice(&base);
            let lo = normalize(&DefCharVector::from_raw(raw, 500.0)).unwrap();
            raw[slot] += bump;
            let hi = normalize(&DefCharVector::from_raw(raw, 500.0)).unwrap();
            prop_assert!(hi.values()[slot] >= lo.values()[slot]);
            prop_assert!(hi.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

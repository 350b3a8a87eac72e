//! Similarity measures for retrieval.
//!
//! Image-based measures (MSE, SAM, UIQ) compare resized crops pixel by pixel;
//! feature-based measures (Euclidean, Cosine, Manhattan, Jaccard) compare
//! descriptor vectors. Each measure carries the direction in which it ranks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageRgb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Manhattan,
    Euclidean,
    Cosine,
    Jaccard,
    Mse,
    Sam,
    Uiq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    FeatureVector,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerIsSimilar,
    HigherIsSimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricDescriptor {
    pub metric: Metric,
    pub input_kind: InputKind,
    pub direction: Direction,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Manhattan,
        Metric::Euclidean,
        Metric::Cosine,
        Metric::Jaccard,
        Metric::Mse,
        Metric::Sam,
        Metric::Uiq,
    ];

    /// Feature-based measures in report order.
    pub const FEATURE: [Metric; 4] = [Metric::Cosine, Metric::Euclidean, Metric::Jaccard, Metric::Manhattan];

    /// Image-based measures in report order.
    pub const IMAGE: [Metric; 3] = [Metric::Mse, Metric::Sam, Metric::Uiq];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Manhattan => "manhattan",
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
            Metric::Jaccard => "jaccard",
            Metric::Mse => "mse",
            Metric::Sam => "sam",
            Metric::Uiq => "uiq",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Metric::Manhattan => "Manhattan",
            Metric::Euclidean => "Euclidean",
            Metric::Cosine => "Cosine",
            Metric::Jaccard => "Jaccard",
            Metric::Mse => "MSE",
            Metric::Sam => "SAM",
            Metric::Uiq => "UIQ",
        }
    }

    pub fn input_kind(self) -> InputKind {
        match self {
            Metric::Mse | Metric::Sam | Metric::Uiq => InputKind::Image,
            _ => InputKind::FeatureVector,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Metric::Cosine | Metric::Jaccard | Metric::Uiq => Direction::HigherIsSimilar,
            _ => Direction::LowerIsSimilar,
        }
    }

    pub fn descriptor(self) -> MetricDescriptor {
        MetricDescriptor {
            metric: self,
            input_kind: self.input_kind(),
            direction: self.direction(),
        }
    }

    pub fn compare_vectors(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Metric::Manhattan => manhattan(x, y),
            Metric::Euclidean => euclidean(x, y),
            Metric::Cosine => cosine(x, y),
            Metric::Jaccard => jaccard(x, y),
            other => Err(Error::KindMismatch {
                expected: "feature-vector metric".into(),
                found: other.name().into(),
            }),
        }
    }

    pub fn compare_images(self, x: &ImageRgb, y: &ImageRgb) -> Result<f64> {
        match self {
            Metric::Mse => mse(x, y),
            Metric::Sam => sam(x, y),
            Metric::Uiq => uiq(x, y),
            other => Err(Error::KindMismatch {
                expected: "image metric".into(),
                found: other.name().into(),
            }),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

fn check_vectors(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::dims(format!("{} elements", x.len()), format!("{} elements", y.len())));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty feature vector".into()));
    }
    Ok(())
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    check_vectors(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

pub fn manhattan(x: &[f64], y: &[f64]) -> Result<f64> {
    check_vectors(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
}

pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    check_vectors(x, y)?;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// Weighted Jaccard similarity `sum(min) / sum(max)` over nonnegative vectors.
pub fn jaccard(x: &[f64], y: &[f64]) -> Result<f64> {
    check_vectors(x, y)?;
    if let Some(i) = x.iter().zip(y).position(|(a, b)| *a < 0.0 || *b < 0.0) {
        return Err(Error::NegativeInput(i));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        num += a.min(*b);
        den += a.max(*b);
    }
    if den == 0.0 {
        return Err(Error::BothZero);
    }
    Ok(num / den)
}

fn check_images(x: &ImageRgb, y: &ImageRgb) -> Result<()> {
    if x.width() != y.width() || x.height() != y.height() {
        return Err(Error::dims(
            format!("{}x{}", x.width(), x.height()),
            format!("{}x{}", y.width(), y.height()),
        ));
    }
    Ok(())
}

/// Interleaved samples of a multi-channel image, as `f64`.
#[derive(Debug, Clone, Copy)]
pub struct Planes<'a> {
    pub samples: &'a [f64],
    pub channels: usize,
}

impl<'a> Planes<'a> {
    pub fn new(samples: &'a [f64], channels: usize) -> Self {
        assert!(channels >= 1 && samples.len().is_multiple_of(channels));
        Self { samples, channels }
    }

    fn channel(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().skip(k).step_by(self.channels).copied()
    }
}

fn check_planes(x: Planes<'_>, y: Planes<'_>) -> Result<()> {
    if x.channels != y.channels || x.samples.len() != y.samples.len() {
        return Err(Error::dims(
            format!("{} samples x {} channels", x.samples.len(), x.channels),
            format!("{} samples x {} channels", y.samples.len(), y.channels),
        ));
    }
    if x.samples.is_empty() {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    Ok(())
}

pub fn mse_planes(x: Planes<'_>, y: Planes<'_>) -> Result<f64> {
    check_planes(x, y)?;
    let sum: f64 = x.samples.iter().zip(y.samples).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.samples.len() as f64)
}

/// Mean over channels of the angle, in radians, between the two images'
/// channel vectors.
pub fn sam_planes(x: Planes<'_>, y: Planes<'_>) -> Result<f64> {
    check_planes(x, y)?;
    let mut total = 0.0;
    for k in 0..x.channels {
        let xn = x.channel(k).map(|a| a * a).sum::<f64>().sqrt();
        let yn = y.channel(k).map(|b| b * b).sum::<f64>().sqrt();
        if xn == 0.0 || yn == 0.0 {
            return Err(Error::ZeroChannel(k));
        }
        // 2·atan2(|x̂ - ŷ|, |x̂ + ŷ|) equals acos(x̂·ŷ) but stays accurate near 0 and π
        let (mut diff, mut sum) = (0.0, 0.0);
        for (a, b) in x.channel(k).zip(y.channel(k)) {
            let (u, v) = (a / xn, b / yn);
            diff += (u - v) * (u - v);
            sum += (u + v) * (u + v);
        }
        total += 2.0 * diff.sqrt().atan2(sum.sqrt());
    }
    Ok(total / x.channels as f64)
}

/// Universal image quality index, computed over the whole image per channel
/// and averaged.
pub fn uiq_planes(x: Planes<'_>, y: Planes<'_>) -> Result<f64> {
    check_planes(x, y)?;
    let n = (x.samples.len() / x.channels) as f64;
    let mut total = 0.0;
    for k in 0..x.channels {
        let mx = x.channel(k).sum::<f64>() / n;
        let my = y.channel(k).sum::<f64>() / n;
        let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
        for (a, b) in x.channel(k).zip(y.channel(k)) {
            let (da, db) = (a - mx, b - my);
            vx += da * da;
            vy += db * db;
            cov += da * db;
        }
        let (vx, vy, cov) = (vx / n, vy / n, cov / n);
        let (sx, sy) = (vx.sqrt(), vy.sqrt());
        let mean_sq = mx * mx + my * my;
        if sx == 0.0 || sy == 0.0 || mean_sq == 0.0 {
            return Err(Error::DegenerateStatistics(k));
        }
        let correlation = cov / (sx * sy);
        let luminance = 2.0 * mx * my / mean_sq;
        let contrast = 2.0 * sx * sy / (vx + vy);
        total += correlation * luminance * contrast;
    }
    Ok(total / x.channels as f64)
}

fn samples(img: &ImageRgb) -> Vec<f64> {
    img.pixels().iter().flatten().map(|&v| v as f64).collect()
}

fn with_planes(x: &ImageRgb, y: &ImageRgb, f: impl Fn(Planes<'_>, Planes<'_>) -> Result<f64>) -> Result<f64> {
    check_images(x, y)?;
    let (a, b) = (samples(x), samples(y));
    f(Planes::new(&a, 3), Planes::new(&b, 3))
}

pub fn mse(x: &ImageRgb, y: &ImageRgb) -> Result<f64> {
    with_planes(x, y, mse_planes)
}

pub fn sam(x: &ImageRgb, y: &ImageRgb) -> Result<f64> {
    with_planes(x, y, sam_planes)
}

pub fn uiq(x: &ImageRgb, y: &ImageRgb) -> Result<f64> {
    with_planes(x, y, uiq_planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn names_round_trip_and_unknown_fails() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!(matches!("ssim".parse::<Metric>(), Err(Error::UnknownMetric(_))));
        assert_eq!("Manhattan".parse::<Metric>().unwrap(), Metric::Manhattan);
    }

    #[test]
    fn directions() {
        for m in [Metric::Mse, Metric::Sam, Metric::Euclidean, Metric::Manhattan] {
            assert_eq!(m.direction(), Direction::LowerIsSimilar);
        }
        for m in [Metric::Cosine, Metric::Jaccard, Metric::Uiq] {
            assert_eq!(m.direction(), Direction::HigherIsSimilar);
        }
        assert_eq!(Metric::Uiq.input_kind(), InputKind::Image);
        assert_eq!(Metric::Jaccard.input_kind(), InputKind::FeatureVector);
    }

    #[test]
    fn mse_fixtures() {
        let black = ImageRgb::filled(3, 2, [0, 0, 0]);
        let white = ImageRgb::filled(3, 2, [255, 255, 255]);
        assert_eq!(mse(&black, &black).unwrap(), 0.0);
        assert_eq!(mse(&black, &white).unwrap(), 65025.0);
        assert!(matches!(
            mse(&black, &ImageRgb::filled(2, 3, [0, 0, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sam_fixtures() {
        let img = ImageRgb::from_fn(3, 3, |x, y| [x as u8 + 1, y as u8 + 2, 9]);
        assert!(sam(&img, &img).unwrap().abs() < 1e-9);

        let x = [1.0, 2.0, 3.0, 4.0, 0.5, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!(sam_planes(Planes::new(&x, 3), Planes::new(&y, 3)).unwrap().abs() < 1e-9);

        // two pixels, every channel x=(1,0) and y=(0,1)
        let a = ImageRgb::new(2, 1, vec![[1, 1, 1], [0, 0, 0]]).unwrap();
        let b = ImageRgb::new(2, 1, vec![[0, 0, 0], [1, 1, 1]]).unwrap();
        assert!((sam(&a, &b).unwrap() - FRAC_PI_2).abs() < 1e-12);

        let zero_red = ImageRgb::filled(2, 2, [0, 5, 5]);
        assert!(matches!(sam(&zero_red, &img_2x2()), Err(Error::ZeroChannel(0))));
    }

    fn img_2x2() -> ImageRgb {
        ImageRgb::new(2, 2, vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12]]).unwrap()
    }

    #[test]
    fn uiq_fixtures() {
        let img = img_2x2();
        assert!((uiq(&img, &img).unwrap() - 1.0).abs() < 1e-6);
        let flat = ImageRgb::filled(2, 2, [4, 4, 4]);
        assert!(matches!(uiq(&flat, &img), Err(Error::DegenerateStatistics(0))));
        assert!(matches!(uiq(&img, &flat), Err(Error::DegenerateStatistics(0))));
    }

    #[test]
    fn vector_fixtures() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[0.0, 1.0]), Err(Error::ZeroVector)));
        assert!((manhattan(&[0.2, 0.5], &[0.4, 0.1]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(jaccard(&[0.2, 0.7], &[0.2, 0.7]).unwrap(), 1.0);
        assert_eq!(jaccard(&[0.5, 0.0], &[0.0, 0.5]).unwrap(), 0.0);
        assert_eq!(jaccard(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(jaccard(&[0.0, 0.0], &[0.0, 0.0]), Err(Error::BothZero)));
        assert!(matches!(jaccard(&[-1.0, 0.0], &[0.0, 1.0]), Err(Error::NegativeInput(0))));
        assert!(matches!(manhattan(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn normalized_manhattan_is_bounded_by_length() {
        let ones = [1.0; 38];
        let zeros = [0.0; 38];
        assert_eq!(manhattan(&ones, &zeros).unwrap(), 38.0);
    }

    #[test]
    fn dispatch_rejects_wrong_kind() {
        let img = img_2x2();
        assert!(Metric::Manhattan.compare_images(&img, &img).is_err());
        assert!(Metric::Mse.compare_vectors(&[1.0], &[1.0]).is_err());
    }
}

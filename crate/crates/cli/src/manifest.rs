//! Dataset manifests: which images to read and where their annotations are.
//!
//! ```json
//! {
//!   "root": "data",
//!   "images": [
//!     {"image": "a.png", "patterns": [
//!       {"class": 1, "mask": "a_crack.png"},
//!       {"class": 2, "polygon": [[10, 10], [40, 12], [25, 30]]}
//!     ]},
//!     {"image": "b.png", "label_mask": "b_labels.png"}
//!   ]
//! }
//! ```
//!
//! `root` is resolved against the manifest's directory and every other path
//! against `root`. A label mask is a grayscale PNG in which each
//! 8-connected region of value `v > 0` is one pattern of class `v`.

use std::path::{Path, PathBuf};

use defchars::geometry::{connected_components, rasterize};
use defchars::imaging::{crop_pattern, read_gray, read_image, read_mask};
use defchars::{ImageRgb, Mask, PatternRecord, Point};
use serde::Deserialize;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub root: Option<PathBuf>,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ImageEntry {
    Patterns { image: PathBuf, patterns: Vec<PatternEntry> },
    LabelMask { image: PathBuf, label_mask: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
pub struct PatternEntry {
    pub class: u32,
    #[serde(flatten)]
    pub annotation: Annotation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    Mask(PathBuf),
    Polygon(Vec<[f64; 2]>),
    /// Several rings, filled even-odd.
    Polygons(Vec<Vec<[f64; 2]>>),
}

/// Polygon annotation file: a single ring `[[x, y], ...]` or
/// `{"rings": [[[x, y], ...], ...]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PolygonFile {
    Ring(Vec<[f64; 2]>),
    Rings { rings: Vec<Vec<[f64; 2]>> },
}

impl DatasetManifest {
    pub fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("invalid manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let root = match &manifest.root {
            Some(r) => base.join(r),
            None => base,
        };
        manifest.check(&root)?;
        Ok((manifest, root))
    }

    /// Every referenced file must exist and every class must be positive.
    fn check(&self, root: &Path) -> CliResult<()> {
        let exists = |p: &Path| -> CliResult<()> {
            let full = root.join(p);
            if full.is_file() {
                Ok(())
            } else {
                Err(CliError::input(format!("missing file {}", full.display())))
            }
        };
        for entry in &self.images {
            match entry {
                ImageEntry::Patterns { image, patterns } => {
                    exists(image)?;
                    for p in patterns {
                        if p.class == 0 {
                            return Err(CliError::input(format!(
                                "{}: class labels must be positive integers",
                                image.display()
                            )));
                        }
                        if let Annotation::Mask(m) = &p.annotation {
                            exists(m)?;
                        }
                    }
                }
                ImageEntry::LabelMask { image, label_mask } => {
                    exists(image)?;
                    exists(label_mask)?;
                }
            }
        }
        Ok(())
    }

    /// Crop every annotated pattern. Pattern ids are `<image>#<n>` with `n`
    /// counting from 0 in annotation order.
    pub fn records(&self, root: &Path) -> CliResult<Vec<PatternRecord>> {
        let mut out = Vec::new();
        for entry in &self.images {
            let (image_path, img, masks) = match entry {
                ImageEntry::Patterns { image, patterns } => {
                    let img = load_image(root, image)?;
                    let masks = patterns
                        .iter()
                        .map(|p| {
                            let mask = match &p.annotation {
                                Annotation::Mask(m) => load_mask(root, m, &img)?,
                                Annotation::Polygon(ring) => polygon_mask(std::slice::from_ref(ring), &img),
                                Annotation::Polygons(rings) => polygon_mask(rings, &img),
                            };
                            Ok((p.class, mask))
                        })
                        .collect::<CliResult<Vec<_>>>()?;
                    (image, img, masks)
                }
                ImageEntry::LabelMask { image, label_mask } => {
                    let img = load_image(root, image)?;
                    let masks = label_regions(root, label_mask, &img)?;
                    (image, img, masks)
                }
            };
            let source = image_path.to_string_lossy().replace('\\', "/");
            for (n, (class, mask)) in masks.into_iter().enumerate() {
                let id = format!("{source}#{n}");
                let record = crop_pattern(&img, &mask, class, id.clone(), source.clone())
                    .map_err(|e| CliError::input(format!("pattern {id}: {e}")))?;
                out.push(record);
            }
        }
        Ok(out)
    }
}

fn load_image(root: &Path, p: &Path) -> CliResult<ImageRgb> {
    let full = root.join(p);
    read_image(&full).map_err(|e| CliError::input(format!("{}: {e}", full.display())))
}

fn load_mask(root: &Path, p: &Path, img: &ImageRgb) -> CliResult<Mask> {
    let full = root.join(p);
    let mask = read_mask(&full).map_err(|e| CliError::input(format!("{}: {e}", full.display())))?;
    if (mask.width(), mask.height()) != (img.width(), img.height()) {
        return Err(CliError::input(format!(
            "{}: mask is {}x{}, image is {}x{}",
            full.display(),
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    Ok(mask)
}

fn label_regions(root: &Path, p: &Path, img: &ImageRgb) -> CliResult<Vec<(u32, Mask)>> {
    let full = root.join(p);
    let gray = read_gray(&full).map_err(|e| CliError::input(format!("{}: {e}", full.display())))?;
    if (gray.width(), gray.height()) != (img.width(), img.height()) {
        return Err(CliError::input(format!("{}: label mask size differs from image", full.display())));
    }
    let mut values: Vec<u8> = gray.pixels().iter().copied().filter(|&v| v > 0).collect();
    values.sort_unstable();
    values.dedup();
    let mut regions = Vec::new();
    for v in values {
        let mask = Mask::from_fn(gray.width(), gray.height(), |x, y| gray.get(x, y) == v);
        regions.extend(connected_components(&mask).into_iter().map(|m| (u32::from(v), m)));
    }
    Ok(regions)
}

pub fn polygon_mask(rings: &[Vec<[f64; 2]>], img: &ImageRgb) -> Mask {
    let rings: Vec<Vec<Point>> = rings
        .iter()
        .map(|r| r.iter().map(|&[x, y]| Point::new(x, y)).collect())
        .collect();
    rasterize(&rings, img.width(), img.height())
}

/// Read a polygon annotation file and rasterize it over `img`.
pub fn read_polygon_file(path: &Path, img: &ImageRgb) -> CliResult<Mask> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read polygon file {}: {e}", path.display())))?;
    let rings = match serde_json::from_str::<PolygonFile>(&text)
        .map_err(|e| CliError::input(format!("invalid polygon file {}: {e}", path.display())))?
    {
        PolygonFile::Ring(r) => vec![r],
        PolygonFile::Rings { rings } => rings,
    };
    Ok(polygon_mask(&rings, img))
}

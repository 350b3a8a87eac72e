//! Synthetic annotated datasets written to disk for CLI tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use defchars::imaging::{encode_mask_png, encode_png};
use defchars::{ImageRgb, Mask};

pub const RED: [u8; 3] = [220, 30, 30];
pub const GREEN: [u8; 3] = [40, 200, 60];
pub const BLUE: [u8; 3] = [30, 40, 210];
pub const GREY: [u8; 3] = [128, 128, 128];

#[derive(Debug, Clone, Copy)]
pub enum Shape {
    /// Axis-aligned square with top-left corner and side.
    Square(u32, u32, u32),
    /// Right triangle with the right angle at the top-left corner.
    Triangle(u32, u32, u32),
    /// Disc with centre and radius.
    Disc(u32, u32, u32),
}

impl Shape {
    pub fn contains(self, x: u32, y: u32) -> bool {
        let (x, y) = (x as i64, y as i64);
        match self {
            Shape::Square(x0, y0, s) => {
                let (x0, y0, s) = (x0 as i64, y0 as i64, s as i64);
                x >= x0 && x < x0 + s && y >= y0 && y < y0 + s
            }
            Shape::Triangle(x0, y0, s) => {
                let (dx, dy, s) = (x - x0 as i64, y - y0 as i64, s as i64);
                dx >= 0 && dy >= 0 && dx + dy < s
            }
            Shape::Disc(cx, cy, r) => {
                let (dx, dy, r) = (x - cx as i64, y - cy as i64, r as i64);
                dx * dx + dy * dy <= r * r
            }
        }
    }
}

pub struct Pattern {
    pub class: u32,
    pub shape: Shape,
    pub colour: [u8; 3],
}

pub struct Scene {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    pub patterns: Vec<Pattern>,
}

impl Scene {
    pub fn image(&self) -> ImageRgb {
        ImageRgb::from_fn(self.width, self.height, |x, y| {
            self.patterns
                .iter()
                .rev()
                .find(|p| p.shape.contains(x, y))
                .map_or(self.background, |p| p.colour)
        })
    }

    pub fn mask(&self, i: usize) -> Mask {
        let shape = self.patterns[i].shape;
        Mask::from_fn(self.width, self.height, |x, y| shape.contains(x, y))
    }
}

/// Write every scene as `<name>.png` plus one mask PNG per pattern, and a
/// manifest referencing them. Returns the manifest path.
pub fn write_dataset(dir: &Path, scenes: &[Scene]) -> PathBuf {
    fs::create_dir_all(dir.join("data")).unwrap();
    let mut images = Vec::new();
    for scene in scenes {
        let image_name = format!("{}.png", scene.name);
        fs::write(dir.join("data").join(&image_name), encode_png(&scene.image())).unwrap();
        let mut patterns = Vec::new();
        for (i, p) in scene.patterns.iter().enumerate() {
            let mask_name = format!("{}_mask{i}.png", scene.name);
            fs::write(dir.join("data").join(&mask_name), encode_mask_png(&scene.mask(i))).unwrap();
            patterns.push(serde_json::json!({"class": p.class, "mask": mask_name}));
        }
        images.push(serde_json::json!({"image": image_name, "patterns": patterns}));
    }
    let manifest = dir.join("manifest.json");
    let body = serde_json::json!({"root": "data", "images": images});
    fs::write(&manifest, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    manifest
}

/// Three images holding five patterns of three classes.
pub fn three_image_scenes() -> Vec<Scene> {
    vec![
        Scene {
            name: "img0".into(),
            width: 48,
            height: 48,
            background: GREY,
            patterns: vec![
                Pattern {
                    class: 1,
                    shape: Shape::Square(4, 4, 12),
                    colour: RED,
                },
                Pattern {
                    class: 2,
                    shape: Shape::Triangle(26, 24, 18),
                    colour: BLUE,
                },
            ],
        },
        Scene {
            name: "img1".into(),
            width: 48,
            height: 48,
            background: GREY,
            patterns: vec![Pattern {
                class: 1,
                shape: Shape::Square(18, 14, 14),
                colour: RED,
            }],
        },
        Scene {
            name: "img2".into(),
            width: 48,
            height: 48,
            background: [90, 90, 100],
            patterns: vec![
                Pattern {
                    class: 3,
                    shape: Shape::Disc(14, 30, 9),
                    colour: GREEN,
                },
                Pattern {
                    class: 2,
                    shape: Shape::Triangle(28, 4, 16),
                    colour: BLUE,
                },
            ],
        },
    ]
}

/// `per_class` identical single-pattern images for each of `classes` well
/// separated classes.
pub fn duplicate_scenes(classes: u32, per_class: u32) -> Vec<Scene> {
    let looks = [
        (Shape::Square(10, 10, 12), RED, GREY),
        (Shape::Triangle(6, 8, 20), BLUE, [240, 240, 200]),
        (Shape::Disc(16, 16, 8), GREEN, [20, 20, 20]),
        (Shape::Square(4, 12, 6), [250, 200, 0], [0, 90, 160]),
    ];
    let mut scenes = Vec::new();
    for c in 0..classes {
        let (shape, colour, background) = looks[c as usize % looks.len()];
        for i in 0..per_class {
            scenes.push(Scene {
                name: format!("c{c}_{i}"),
                width: 32,
                height: 32,
                background,
                patterns: vec![Pattern {
                    class: c + 1,
                    shape,
                    colour,
                }],
            });
        }
    }
    scenes
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("defchars").chain(args.iter().copied());
    let code = defchars_cli::run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

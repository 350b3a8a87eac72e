//! Seeded synthetic workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use defchars::geometry::rasterize;
use defchars::imaging::crop_pattern;
use defchars::store::EntryMeta;
use defchars::{Datastore, DefCharVector, FeatureKind, ImageRgb, Payload, PatternRecord, Point};
use defchars::features::SLOT_COUNT;

/// Size of the largest annotated dataset the benchmarks are sized for.
pub const LARGEST_DATASET: usize = 7007;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_defchars(r: &mut impl Rng) -> Payload {
    let mut arr = [0.0; SLOT_COUNT];
    arr.iter_mut().for_each(|v| *v = r.gen());
    Payload::DefChars(DefCharVector::from_normalized(arr).expect("values lie in [0, 1]"))
}

/// Store of `n` uniformly random normalized DefChars vectors over four classes.
pub fn defchars_store(n: usize, seed: u64) -> Datastore {
    let mut r = rng(seed);
    let items: Vec<_> = (0..n)
        .map(|i| {
            let meta = EntryMeta::new(1 + (i % 4) as u32, format!("img{i:05}.png"));
            (meta, random_defchars(&mut r))
        })
        .collect();
    Datastore::build(FeatureKind::DefChars, None, items).expect("single kind")
}

/// Store of `n` random `side` x `side` images.
pub fn image_store(n: usize, side: u32, seed: u64) -> Datastore {
    let mut r = rng(seed);
    let items: Vec<_> = (0..n)
        .map(|i| {
            let img = ImageRgb::from_fn(side, side, |_, _| [r.gen(), r.gen(), r.gen()]);
            (EntryMeta::new(1 + (i % 4) as u32, format!("img{i:05}.png")), Payload::Image(img))
        })
        .collect();
    Datastore::build(FeatureKind::RawImage, Some(side), items).expect("single kind")
}

/// One random star-shaped pattern on a noisy `side` x `side` background.
pub fn random_record(r: &mut impl Rng, side: u32, id: usize) -> PatternRecord {
    let c = side as f64 / 2.0;
    let radius = r.gen_range(c * 0.3..c * 0.8);
    let n = r.gen_range(4..16);
    let mut angles: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let ring: Vec<Point> = angles
        .iter()
        .map(|&t| {
            let rad = radius * r.gen_range(0.5..=1.0);
            Point::new(c + rad * t.cos(), c + rad * t.sin())
        })
        .collect();
    let mut mask = rasterize(&[ring], side, side);
    if mask.is_empty() {
        mask.set(side / 2, side / 2, true);
    }
    let fg: [u8; 3] = [r.gen(), r.gen(), r.gen()];
    let bg: [u8; 3] = [r.gen(), r.gen(), r.gen()];
    let img = ImageRgb::from_fn(side, side, |x, y| {
        let base = if mask.get(x, y) { fg } else { bg };
        base.map(|v| v.saturating_add(r.gen_range(0..16)))
    });
    let source = format!("img{id:05}.png");
    crop_pattern(&img, &mask, 1 + (id % 4) as u32, format!("{source}#0"), source).expect("mask is nonempty")
}

pub fn random_records(n: usize, side: u32, seed: u64) -> Vec<PatternRecord> {
    let mut r = rng(seed);
    (0..n).map(|i| random_record(&mut r, side, i)).collect()
}

//! Append-only datastore of extracted descriptors, its on-disk format, and
//! exhaustive top-k retrieval.
//!
//! A saved store is a directory holding `manifest.json` and one data file:
//! `entries.csv` for vector payloads (DefChars, LBP) or `entries.bin` for
//! resized images.

use std::cmp::Ordering;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{DefCharVector, FeatureKind, LbpHistogram, SLOT_COUNT, SLOT_NAMES};
use crate::imaging::ImageRgb;
use crate::metrics::{Direction, InputKind, Metric, MetricDescriptor};

pub const STORE_MAGIC: &str = "defchars-store";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const CSV_FILE: &str = "entries.csv";
const BIN_FILE: &str = "entries.bin";
const BIN_MAGIC: &[u8; 8] = b"DCIMG\0\0\x01";

/// Below this many entries scoring stays on the calling thread.
const PARALLEL_MIN_ENTRIES: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Payload {
    DefChars(DefCharVector),
    Lbp(LbpHistogram),
    Image(ImageRgb),
}

impl Payload {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Payload::DefChars(_) => FeatureKind::DefChars,
            Payload::Lbp(_) => FeatureKind::Lbp,
            Payload::Image(_) => FeatureKind::RawImage,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Payload::DefChars(v) => Some(v.as_slice()),
            Payload::Lbp(h) => Some(h.bins()),
            Payload::Image(_) => None,
        }
    }

    pub fn as_image(&self) -> Option<&ImageRgb> {
        match self {
            Payload::Image(img) => Some(img),
            _ => None,
        }
    }

    /// Score `self` (the query) against `other` under `metric`.
    pub fn score(&self, other: &Payload, metric: Metric) -> Result<f64> {
        match (self, other) {
            (Payload::Image(a), Payload::Image(b)) => metric.compare_images(a, b),
            _ => match (self.as_vector(), other.as_vector()) {
                (Some(a), Some(b)) if self.kind() == other.kind() => metric.compare_vectors(a, b),
                _ => Err(Error::KindMismatch {
                    expected: self.kind().to_string(),
                    found: other.kind().to_string(),
                }),
            },
        }
    }
}

pub fn input_kind_of(kind: FeatureKind) -> InputKind {
    match kind {
        FeatureKind::RawImage => InputKind::Image,
        FeatureKind::DefChars | FeatureKind::Lbp => InputKind::FeatureVector,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryMeta {
    pub class_label: u32,
    pub source_image: String,
}

impl EntryMeta {
    pub fn new(class_label: u32, source_image: impl Into<String>) -> Self {
        Self {
            class_label,
            source_image: source_image.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub index: usize,
    pub meta: EntryMeta,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datastore {
    kind: FeatureKind,
    /// Side length the crops were resized to, for resized-crop descriptors.
    side: Option<u32>,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub score: f64,
    /// The metric could not be evaluated for this entry; it is ranked last
    /// with a sentinel score.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedResults {
    pub metric: MetricDescriptor,
    pub hits: Vec<Hit>,
}

impl RankedResults {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.hits.iter().map(|h| h.index)
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Total order used for ranking: evaluable before failed, then by score in
/// the metric's direction, then by ascending index.
pub fn rank_order(direction: Direction, a: &Hit, b: &Hit) -> Ordering {
    a.failed
        .cmp(&b.failed)
        .then_with(|| match direction {
            Direction::LowerIsSimilar => a.score.total_cmp(&b.score),
            Direction::HigherIsSimilar => b.score.total_cmp(&a.score),
        })
        .then(a.index.cmp(&b.index))
}

fn sentinel(direction: Direction) -> f64 {
    match direction {
        Direction::LowerIsSimilar => f64::INFINITY,
        Direction::HigherIsSimilar => f64::NEG_INFINITY,
    }
}

fn kind_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::KindMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

impl Datastore {
    pub fn new(kind: FeatureKind, side: Option<u32>) -> Self {
        Self {
            kind,
            side,
            entries: Vec::new(),
        }
    }

    /// Build a store, assigning indices in input order.
    pub fn build(
        kind: FeatureKind,
        side: Option<u32>,
        items: impl IntoIterator<Item = (EntryMeta, Payload)>,
    ) -> Result<Self> {
        let items: Vec<_> = items.into_iter().collect();
        if let Some((_, first)) = items.first() {
            if items.iter().any(|(_, p)| p.kind() != first.kind()) {
                return Err(Error::MixedKinds);
            }
        }
        let mut store = Self::new(kind, side);
        for (meta, payload) in items {
            store.append(payload, meta)?;
        }
        Ok(store)
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn side(&self) -> Option<u32> {
        self.side
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&Entry> {
        self.entries.get(index)
    }

    /// Append one entry and return its index.
    pub fn append(&mut self, payload: Payload, meta: EntryMeta) -> Result<usize> {
        if payload.kind() != self.kind {
            return Err(kind_mismatch(self.kind, payload.kind()));
        }
        match &payload {
            Payload::DefChars(v) if !v.is_normalized() => return Err(Error::UnnormalizedVector),
            Payload::Image(img) => {
                let dims = self
                    .entries
                    .first()
                    .and_then(|e| e.payload.as_image())
                    .map(|i| (i.width(), i.height()))
                    .or(self.side.map(|s| (s, s)));
                if let Some(dims) = dims {
                    if dims != (img.width(), img.height()) {
                        return Err(Error::dims(
                            format!("{}x{}", dims.0, dims.1),
                            format!("{}x{}", img.width(), img.height()),
                        ));
                    }
                }
            }
            _ => {}
        }
        let index = self.entries.len();
        self.entries.push(Entry { index, meta, payload });
        Ok(index)
    }

    fn check_query(&self, query: &Payload, metric: Metric) -> Result<()> {
        if metric.input_kind() != input_kind_of(self.kind) {
            return Err(kind_mismatch(
                format!("metric for {} store", self.kind),
                format!("{} metric", metric),
            ));
        }
        if query.kind() != self.kind {
            return Err(kind_mismatch(self.kind, query.kind()));
        }
        Ok(())
    }

    /// Every entry's score against `query`, in index order, skipping
    /// `exclude`.
    pub fn score_all(&self, query: &Payload, metric: Metric, exclude: Option<usize>) -> Result<Vec<Hit>> {
        self.check_query(query, metric)?;
        let fallback = sentinel(metric.direction());
        let score = |e: &Entry| match query.score(&e.payload, metric) {
            Ok(s) if !s.is_nan() => Hit {
                index: e.index,
                score: s,
                failed: false,
            },
            _ => Hit {
                index: e.index,
                score: fallback,
                failed: true,
            },
        };
        let keep = |e: &&Entry| Some(e.index) != exclude;
        Ok(if self.entries.len() >= PARALLEL_MIN_ENTRIES {
            self.entries.par_iter().filter(keep).map(score).collect()
        } else {
            self.entries.iter().filter(keep).map(score).collect()
        })
    }

    /// Exhaustive scan returning the `k` most similar entries.
    pub fn retrieve(&self, query: &Payload, metric: Metric, k: usize) -> Result<RankedResults> {
        self.retrieve_excluding(query, metric, k, None)
    }

    /// As [`Datastore::retrieve`], never returning the entry at `exclude`.
    pub fn retrieve_excluding(
        &self,
        query: &Payload,
        metric: Metric,
        k: usize,
        exclude: Option<usize>,
    ) -> Result<RankedResults> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut hits = self.score_all(query, metric, exclude)?;
        let direction = metric.direction();
        let order = |a: &Hit, b: &Hit| rank_order(direction, a, b);
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, order);
            hits.truncate(k);
        }
        hits.sort_unstable_by(order);
        Ok(RankedResults {
            metric: metric.descriptor(),
            hits,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (file, data, slot_names) = match self.kind {
            FeatureKind::DefChars => (
                CSV_FILE,
                self.vector_csv(&SLOT_NAMES.map(String::from))?,
                SLOT_NAMES.map(String::from).to_vec(),
            ),
            FeatureKind::Lbp => {
                let names = lbp_slot_names();
                (CSV_FILE, self.vector_csv(&names)?, names)
            }
            FeatureKind::RawImage => (BIN_FILE, self.image_blob(), vec!["r".into(), "g".into(), "b".into()]),
        };
        let manifest = Manifest {
            magic: STORE_MAGIC.into(),
            format_version: FORMAT_VERSION,
            feature_kind: self.kind.name().into(),
            side: self.side,
            slot_names,
            entry_count: self.entries.len(),
            data_file: file.into(),
            checksum: sha256_hex(&data),
            created_by: concat!("defchars ", env!("CARGO_PKG_VERSION")).into(),
        };
        let data_path = dir.join(file);
        fs::write(&data_path, &data).map_err(|e| Error::io(&data_path, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&raw)
            .map_err(|e| Error::FormatVersionMismatch(format!("unreadable manifest: {e}")))?;
        if manifest.magic != STORE_MAGIC {
            return Err(Error::FormatVersionMismatch(format!("bad magic {:?}", manifest.magic)));
        }
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch(format!(
                "format version {} (supported: {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        let kind: FeatureKind = manifest
            .feature_kind
            .parse()
            .map_err(|_| Error::FormatVersionMismatch(format!("unknown feature kind {:?}", manifest.feature_kind)))?;
        if manifest.data_file.contains(['/', '\\']) {
            return Err(Error::MalformedStore(format!("data file {:?} escapes the store", manifest.data_file)));
        }
        let data_path = dir.join(&manifest.data_file);
        let data = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let found = sha256_hex(&data);
        if found != manifest.checksum {
            return Err(Error::ChecksumMismatch {
                expected: manifest.checksum,
                found,
            });
        }
        let mut store = Datastore::new(kind, manifest.side);
        match kind {
            FeatureKind::DefChars | FeatureKind::Lbp => store.read_vector_csv(&data, &manifest.slot_names)?,
            FeatureKind::RawImage => store.read_image_blob(&data)?,
        }
        if store.len() != manifest.entry_count {
            return Err(Error::MalformedStore(format!(
                "manifest lists {} entries, data holds {}",
                manifest.entry_count,
                store.len()
            )));
        }
        Ok(store)
    }

    fn vector_csv(&self, slot_names: &[String]) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["index".to_string(), "class".into(), "source".into()];
        header.extend(slot_names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for e in &self.entries {
            let values = e.payload.as_vector().expect("vector store");
            let mut row = vec![e.index.to_string(), e.meta.class_label.to_string(), e.meta.source_image.clone()];
            row.extend(values.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::MalformedStore(e.to_string()))
    }

    fn read_vector_csv(&mut self, data: &[u8], slot_names: &[String]) -> Result<()> {
        let width = match self.kind {
            FeatureKind::DefChars => SLOT_COUNT,
            _ => LbpHistogram::BINS,
        };
        if slot_names.len() != width {
            return Err(Error::FormatVersionMismatch(format!(
                "{} slot names, expected {width}",
                slot_names.len()
            )));
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
        let header = r.headers().map_err(csv_err)?.clone();
        let expected: Vec<&str> = ["index", "class", "source"]
            .into_iter()
            .chain(slot_names.iter().map(String::as_str))
            .collect();
        if header.iter().ne(expected.iter().copied()) {
            return Err(Error::FormatVersionMismatch("data header does not match manifest".into()));
        }
        for (row_no, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            if record.len() != 3 + width {
                return Err(Error::MalformedStore(format!(
                    "row {row_no}: {} fields, expected {}",
                    record.len(),
                    3 + width
                )));
            }
            let index: usize = parse_field(&record[0], row_no)?;
            if index != self.entries.len() {
                return Err(Error::MalformedStore(format!("row {row_no}: index {index} is out of order")));
            }
            let meta = EntryMeta::new(parse_field(&record[1], row_no)?, &record[2]);
            let values = (3..3 + width)
                .map(|i| parse_field::<f64>(&record[i], row_no))
                .collect::<Result<Vec<_>>>()?;
            let payload = match self.kind {
                FeatureKind::DefChars => {
                    let mut arr = [0.0; SLOT_COUNT];
                    arr.copy_from_slice(&values);
                    Payload::DefChars(DefCharVector::from_normalized(arr)?)
                }
                _ => Payload::Lbp(LbpHistogram::from_bins(values)?),
            };
            self.append(payload, meta)?;
        }
        Ok(())
    }

    fn image_blob(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BIN_MAGIC);
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            let img = e.payload.as_image().expect("image store");
            out.extend_from_slice(&(e.index as u64).to_le_bytes());
            out.extend_from_slice(&e.meta.class_label.to_le_bytes());
            out.extend_from_slice(&(e.meta.source_image.len() as u32).to_le_bytes());
            out.extend_from_slice(e.meta.source_image.as_bytes());
            out.extend_from_slice(&img.width().to_le_bytes());
            out.extend_from_slice(&img.height().to_le_bytes());
            for px in img.pixels() {
                out.write_all(px).expect("writing to a Vec cannot fail");
            }
        }
        out
    }

    fn read_image_blob(&mut self, data: &[u8]) -> Result<()> {
        let mut cur = ByteCursor { data, pos: 0 };
        if cur.take(8)? != BIN_MAGIC {
            return Err(Error::FormatVersionMismatch("bad image data magic".into()));
        }
        let count = cur.u64()?;
        for _ in 0..count {
            let index = cur.u64()? as usize;
            if index != self.entries.len() {
                return Err(Error::MalformedStore(format!("image entry {index} is out of order")));
            }
            let class_label = cur.u32()?;
            let len = cur.u32()? as usize;
            let source = std::str::from_utf8(cur.take(len)?)
                .map_err(|e| Error::MalformedStore(e.to_string()))?
                .to_string();
            let (w, h) = (cur.u32()?, cur.u32()?);
            let bytes = cur.take(w as usize * h as usize * 3)?;
            let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            let img = ImageRgb::new(w, h, pixels)?;
            self.append(Payload::Image(img), EntryMeta::new(class_label, source))?;
        }
        if cur.pos != data.len() {
            return Err(Error::MalformedStore("trailing bytes after image entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    magic: String,
    format_version: u32,
    feature_kind: String,
    side: Option<u32>,
    slot_names: Vec<String>,
    entry_count: usize,
    data_file: String,
    checksum: String,
    created_by: String,
}

pub fn lbp_slot_names() -> Vec<String> {
    (0..LbpHistogram::BINS).map(|i| format!("lbp_{i:03}")).collect()
}

fn sha256_hex(data: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(data)))
}

fn csv_err(e: csv::Error) -> Error {
    Error::MalformedStore(e.to_string())
}

fn parse_field<T: std::str::FromStr>(s: &str, row: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::MalformedStore(format!("row {row}: cannot parse {s:?}")))
}

struct ByteCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::MalformedStore("image data is truncated".into()))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

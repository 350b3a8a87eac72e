//! Precision@K, AP@K and mAP@K, and the leave-one-out benchmark over a set of
//! pattern records.
//!
//! AP@K here is the mean of Precision@K over the queries of one class, not
//! the rank-weighted average precision. Standard deviations are population
//! deviations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract_payload, FeatureKind};
use crate::imaging::PatternRecord;
use crate::metrics::Metric;
use crate::store::{input_kind_of, Datastore, EntryMeta, Hit, RankedResults};

pub const DEFAULT_KS: [usize; 5] = [1, 5, 10, 15, 20];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyClass);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }

    /// `"0.88 ± 0.06"`.
    pub fn display(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Fraction of the top `k` hits that are relevant. The denominator is `k`
/// even when fewer than `k` hits exist.
pub fn precision_at_k(ranked: &RankedResults, k: usize, is_relevant: impl Fn(&Hit) -> bool) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let relevant = ranked.hits.iter().take(k).filter(|h| is_relevant(h)).count();
    Ok(relevant as f64 / k as f64)
}

pub fn ap_at_k(per_query_precisions: &[f64]) -> Result<MeanStd> {
    MeanStd::of(per_query_precisions)
}

/// Classes are weighted equally regardless of their size.
pub fn map_at_k(per_class_ap_means: &[f64]) -> Result<MeanStd> {
    MeanStd::of(per_class_ap_means)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub feature: FeatureKind,
    pub metric: Metric,
    /// Resize side for the raw-image and LBP descriptors.
    pub side: Option<u32>,
    pub ks: Vec<usize>,
}

impl EvalConfig {
    pub fn new(feature: FeatureKind, metric: Metric, side: Option<u32>) -> Self {
        Self {
            feature,
            metric,
            side,
            ks: DEFAULT_KS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metric.input_kind() != input_kind_of(self.feature) {
            return Err(Error::KindMismatch {
                expected: format!("metric for {}", self.feature),
                found: self.metric.to_string(),
            });
        }
        match (self.feature.needs_side(), self.side) {
            (true, None) | (true, Some(0)) => {
                return Err(Error::InvalidArgument(format!("feature {} needs an image size", self.feature)))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidArgument(format!("feature {} takes no image size", self.feature)))
            }
            _ => {}
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidArgument("K list must be nonempty and every K at least 1".into()));
        }
        if self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("K list must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.ks.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class_label: u32,
    /// Queries of this class that were scored.
    pub queries: usize,
    /// One entry per K; empty when no query of the class could be scored.
    pub ap: Vec<MeanStd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub extraction_s_per_query: f64,
    pub retrieval_s_per_query: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub feature: FeatureKind,
    pub metric: Metric,
    pub side: Option<u32>,
    pub ks: Vec<usize>,
    pub patterns: usize,
    pub classes: Vec<ClassReport>,
    pub map: Vec<MeanStd>,
    /// Mean of the mAP means, with the mean of the mAP deviations.
    pub average: MeanStd,
    pub failed_extractions: usize,
    pub failed_queries: usize,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionFailure {
    pub id: String,
    pub source_image: String,
    pub error: String,
}

/// Descriptors of a whole dataset, reusable across metrics of the same kind.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub store: Datastore,
    /// Pattern id of each store entry.
    pub ids: Vec<String>,
    pub failures: Vec<ExtractionFailure>,
    /// Wall-clock extraction seconds per attempted pattern.
    pub seconds: Vec<f64>,
}

impl Extraction {
    pub fn mean_seconds(&self) -> f64 {
        mean_or_zero(&self.seconds)
    }
}

fn mean_or_zero(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sort by `(source_image, id)`, which fixes store indices independently of
/// input order.
pub fn canonical_order(records: &mut [PatternRecord]) {
    records.sort_by(|a, b| (&a.source_image, &a.id).cmp(&(&b.source_image, &b.id)));
}

/// Extract every record's descriptor in parallel and index the successes in
/// canonical order.
pub fn extract_dataset(records: &[PatternRecord], feature: FeatureKind, side: Option<u32>) -> Result<Extraction> {
    let mut order: Vec<&PatternRecord> = records.iter().collect();
    order.sort_by(|a, b| (&a.source_image, &a.id).cmp(&(&b.source_image, &b.id)));
    if let Some(w) = order.windows(2).find(|w| w[0].source_image == w[1].source_image && w[0].id == w[1].id) {
        return Err(Error::InvalidArgument(format!(
            "duplicate pattern id {:?} in {:?}",
            w[0].id, w[0].source_image
        )));
    }
    let sorted: Vec<PatternRecord> = order.into_iter().cloned().collect();

    // records of one source image are contiguous after sorting
    let mut groups: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (i, r) in sorted.iter().enumerate() {
        groups.entry(r.source_image.as_str()).or_insert((i, i)).1 = i + 1;
    }

    let outcomes: Vec<(Result<_>, f64)> = sorted
        .par_iter()
        .map(|r| {
            let (lo, hi) = groups[r.source_image.as_str()];
            let start = Instant::now();
            let payload = extract_payload(feature, side, r, &sorted[lo..hi]);
            (payload, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut store = Datastore::new(feature, side);
    let mut ids = Vec::new();
    let mut failures = Vec::new();
    let mut seconds = Vec::with_capacity(sorted.len());
    for (record, (payload, secs)) in sorted.iter().zip(outcomes) {
        seconds.push(secs);
        match payload {
            Ok(p) => {
                store.append(p, EntryMeta::new(record.class_label, record.source_image.clone()))?;
                ids.push(record.id.clone());
            }
            Err(e) => failures.push(ExtractionFailure {
                id: record.id.clone(),
                source_image: record.source_image.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(Extraction {
        store,
        ids,
        failures,
        seconds,
    })
}

struct QueryOutcome {
    class_label: u32,
    precisions: Option<Vec<f64>>,
    seconds: f64,
}

/// Leave-one-out sweep: every store entry queries the rest of the store.
pub fn evaluate_extraction(extraction: &Extraction, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let store = &extraction.store;
    if store.kind() != config.feature || store.side() != config.side {
        return Err(Error::KindMismatch {
            expected: format!("{} store", config.feature),
            found: format!("{} store", store.kind()),
        });
    }
    let max_k = config.max_k();
    let outcomes: Vec<QueryOutcome> = store
        .entries()
        .par_iter()
        .map(|entry| {
            let start = Instant::now();
            let ranked = store.retrieve_excluding(&entry.payload, config.metric, max_k, Some(entry.index));
            let seconds = start.elapsed().as_secs_f64();
            let precisions = ranked.ok().filter(|r| r.hits.iter().any(|h| !h.failed)).map(|r| {
                let relevant =
                    |h: &Hit| !h.failed && store.entries()[h.index].meta.class_label == entry.meta.class_label;
                config
                    .ks
                    .iter()
                    .map(|&k| precision_at_k(&r, k, relevant).expect("K validated"))
                    .collect()
            });
            QueryOutcome {
                class_label: entry.meta.class_label,
                precisions,
                seconds,
            }
        })
        .collect();

    let mut by_class: BTreeMap<u32, Vec<&Vec<f64>>> = BTreeMap::new();
    let mut failed_queries = 0;
    for o in &outcomes {
        let slot = by_class.entry(o.class_label).or_default();
        match &o.precisions {
            Some(p) => slot.push(p),
            None => failed_queries += 1,
        }
    }

    let classes: Vec<ClassReport> = by_class
        .iter()
        .map(|(&class_label, queries)| ClassReport {
            class_label,
            queries: queries.len(),
            ap: (0..config.ks.len())
                .filter_map(|ki| ap_at_k(&queries.iter().map(|p| p[ki]).collect::<Vec<_>>()).ok())
                .collect(),
        })
        .collect();

    let scored: Vec<&ClassReport> = classes.iter().filter(|c| !c.ap.is_empty()).collect();
    let map = if scored.is_empty() {
        Vec::new()
    } else {
        (0..config.ks.len())
            .map(|ki| map_at_k(&scored.iter().map(|c| c.ap[ki].mean).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
    };
    let average = MeanStd {
        mean: mean_or_zero(&map.iter().map(|m| m.mean).collect::<Vec<_>>()),
        std: mean_or_zero(&map.iter().map(|m| m.std).collect::<Vec<_>>()),
    };

    Ok(EvalReport {
        feature: config.feature,
        metric: config.metric,
        side: config.side,
        ks: config.ks.clone(),
        patterns: store.len() + extraction.failures.len(),
        classes,
        map,
        average,
        failed_extractions: extraction.failures.len(),
        failed_queries,
        timings: Timings {
            extraction_s_per_query: extraction.mean_seconds(),
            retrieval_s_per_query: mean_or_zero(&outcomes.iter().map(|o| o.seconds).collect::<Vec<_>>()),
        },
    })
}

/// Extract, index and run the leave-one-out sweep for one configuration.
pub fn run_benchmark(records: &[PatternRecord], config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    if records.len() < 2 {
        return Err(Error::InvalidArgument("a benchmark needs at least 2 patterns".into()));
    }
    let extraction = extract_dataset(records, config.feature, config.side)?;
    evaluate_extraction(&extraction, config)
}

/// Mean extraction and retrieval seconds per query.
pub fn time_phases(records: &[PatternRecord], config: &EvalConfig) -> Result<Timings> {
    run_benchmark(records, config).map(|r| r.timings)
}

fn size_label(side: Option<u32>) -> String {
    side.map_or_else(|| "Raw".to_string(), |s| s.to_string())
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("writing to a Vec cannot fail");
    String::from_utf8(w.into_inner().expect("flush to Vec")).expect("csv of UTF-8 fields is UTF-8")
}

fn summary_header(ks: &[usize]) -> Vec<String> {
    let mut h = vec!["Feature".to_string(), "Similarity Metric".into(), "Image Size".into()];
    h.extend(ks.iter().map(|k| format!("mAP@{k}")));
    h.push("Average".into());
    h
}

fn summary_row(r: &EvalReport) -> Vec<String> {
    let mut row = vec![
        r.feature.display_name().to_string(),
        r.metric.display_name().to_string(),
        size_label(r.side),
    ];
    if r.map.is_empty() {
        row.extend(r.ks.iter().map(|_| "n/a".to_string()));
        row.push("n/a".into());
    } else {
        row.extend(r.map.iter().map(MeanStd::display));
        row.push(r.average.display());
    }
    row
}

/// Summary CSV, one row per report. All reports must share one K list.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let ks = reports.first().map_or(&DEFAULT_KS[..], |r| &r.ks[..]);
    let mut out = csv_line(&summary_header(ks));
    for r in reports {
        out.push_str(&csv_line(&summary_row(r)));
    }
    out
}

/// Summary as an aligned text table.
pub fn summary_table(reports: &[EvalReport]) -> String {
    let ks = reports.first().map_or(&DEFAULT_KS[..], |r| &r.ks[..]);
    let mut rows = vec![summary_header(ks)];
    rows.extend(reports.iter().map(summary_row));
    aligned(&rows)
}

fn class_rows(r: &EvalReport) -> Vec<Vec<String>> {
    let mut header = vec!["Class".to_string(), "Queries".into()];
    header.extend(r.ks.iter().map(|k| format!("AP@{k}")));
    let mut rows = vec![header];
    for c in &r.classes {
        let mut row = vec![c.class_label.to_string(), c.queries.to_string()];
        if c.ap.is_empty() {
            row.extend(r.ks.iter().map(|_| "n/a".to_string()));
        } else {
            row.extend(c.ap.iter().map(MeanStd::display));
        }
        rows.push(row);
    }
    rows
}

pub fn class_csv(report: &EvalReport) -> String {
    class_rows(report).iter().map(|r| csv_line(r)).collect()
}

pub fn class_table(report: &EvalReport) -> String {
    aligned(&class_rows(report))
}

/// Timings are kept out of the other report files so those stay
/// byte-reproducible.
pub fn timings_csv(reports: &[EvalReport]) -> String {
    let mut out = csv_line(&[
        "Feature".into(),
        "Similarity Metric".into(),
        "Image Size".into(),
        "Extraction s/query".into(),
        "Retrieval s/query".into(),
    ]);
    for r in reports {
        out.push_str(&csv_line(&[
            r.feature.display_name().into(),
            r.metric.display_name().into(),
            size_label(r.side),
            format!("{:.6}", r.timings.extraction_s_per_query),
            format!("{:.6}", r.timings.retrieval_s_per_query),
        ]));
    }
    out
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s}{}", " ".repeat(widths[c] - s.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let rule: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
            let _ = writeln!(out, "{}", "-".repeat(rule));
        }
    }
    out
}

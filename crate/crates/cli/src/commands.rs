//! The four subcommands. Data goes to `out`, diagnostics to `err`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use defchars::evaluation::{
    class_csv, class_table, evaluate_extraction, extract_dataset, summary_csv, summary_table, timings_csv, EvalConfig,
    EvalReport, Extraction,
};
use defchars::features::{extract_defchars, extract_payload, normalize};
use defchars::imaging::{crop_pattern, read_image, read_mask};
use defchars::{Datastore, FeatureKind, ImageRgb, Mask, PatternRecord};

use crate::config::{EvaluateConfig, IndexConfig, QueryConfig};
use crate::manifest::{read_polygon_file, DatasetManifest};
use crate::{CliError, CliResult, PatternArgs};

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

fn load_records(manifest: &Path) -> CliResult<Vec<PatternRecord>> {
    let (m, root) = DatasetManifest::load(manifest)?;
    m.records(&root)
}

pub fn index(cfg: &IndexConfig, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> CliResult<()> {
    let records = load_records(&cfg.manifest)?;
    let start = Instant::now();
    let extraction = extract_dataset(&records, cfg.feature, cfg.side)?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(f) = extraction.failures.first() {
        return Err(CliError::input(format!(
            "{} of {} patterns could not be extracted; first: {} ({})",
            extraction.failures.len(),
            records.len(),
            f.id,
            f.error
        )));
    }
    extraction.store.save(&cfg.store)?;
    writeln!(out, "indexed {} patterns into {}", extraction.store.len(), cfg.store.display())?;
    writeln!(
        err,
        "extraction: {:.6} s/pattern ({elapsed:.3} s wall)",
        extraction.mean_seconds()
    )?;
    Ok(())
}

/// Crop the pattern named on the command line, along with its sibling
/// patterns from the same image.
fn command_line_pattern(p: &PatternArgs) -> CliResult<(PatternRecord, Vec<PatternRecord>)> {
    let image = read_image(&p.image).map_err(|e| CliError::input(format!("{}: {e}", p.image.display())))?;
    let source = p.image.to_string_lossy().into_owned();
    let mask = match (&p.mask, &p.polygon) {
        (Some(m), _) => checked_mask(m, &image)?,
        (None, Some(poly)) => read_polygon_file(poly, &image)?,
        (None, None) => return Err(CliError::config("give --mask or --polygon")),
    };
    let record = crop_pattern(&image, &mask, 0, "query", source.clone())?;
    let mut siblings = vec![record.clone()];
    for (i, path) in p.sibling_masks.iter().enumerate() {
        let m = checked_mask(path, &image)?;
        siblings.push(crop_pattern(&image, &m, 0, format!("sibling{i}"), source.clone())?);
    }
    Ok((record, siblings))
}

fn checked_mask(path: &Path, image: &ImageRgb) -> CliResult<Mask> {
    let mask = read_mask(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if (mask.width(), mask.height()) != (image.width(), image.height()) {
        return Err(CliError::input(format!("{}: mask size differs from image", path.display())));
    }
    Ok(mask)
}

pub fn query(cfg: &QueryConfig, pattern: &PatternArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let store = Datastore::load(&cfg.store)?;
    let (record, siblings) = command_line_pattern(pattern)?;
    let payload = extract_payload(store.kind(), store.side(), &record, &siblings)?;
    let ranked = store.retrieve(&payload, cfg.metric, cfg.k)?;
    writeln!(out, "rank,index,source,class,score")?;
    for (rank, hit) in ranked.hits.iter().enumerate() {
        let meta = &store.entries()[hit.index].meta;
        let score = if hit.failed { "failed".to_string() } else { hit.score.to_string() };
        writeln!(
            out,
            "{},{},{},{},{score}",
            rank + 1,
            hit.index,
            csv_field(&meta.source_image),
            meta.class_label
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn extract(pattern: &PatternArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let (record, siblings) = command_line_pattern(pattern)?;
    let raw = extract_defchars(&record, &siblings)?;
    let norm = normalize(&raw)?;
    writeln!(out, "slot,raw,normalized")?;
    for ((name, r), (_, n)) in raw.iter().zip(norm.iter()) {
        writeln!(out, "{name},{r},{n}")?;
    }
    Ok(())
}

fn report_slug(r: &EvalReport) -> String {
    match r.side {
        Some(s) => format!("{}_{}_{s}", r.feature.name(), r.metric.name()),
        None => format!("{}_{}", r.feature.name(), r.metric.name()),
    }
}

/// Run every grid cell. A failing cell is reported and skipped; the command
/// then exits with that cell's error code after writing the other reports.
pub fn evaluate(cfg: &EvaluateConfig, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> CliResult<()> {
    let records = load_records(&cfg.manifest)?;
    if records.len() < 2 {
        return Err(CliError::input("evaluation needs at least 2 annotated patterns"));
    }
    let classes_dir = cfg.out.join("classes");
    fs::create_dir_all(&classes_dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", classes_dir.display())))?;

    let mut extractions: BTreeMap<(FeatureKind, Option<u32>), Result<Extraction, CliError>> = BTreeMap::new();
    let mut reports = Vec::new();
    let mut first_failure: Option<CliError> = None;
    for cell in &cfg.grid {
        let extraction = extractions
            .entry((cell.feature, cell.side))
            .or_insert_with(|| extract_dataset(&records, cell.feature, cell.side).map_err(CliError::from));
        let config = EvalConfig {
            feature: cell.feature,
            metric: cell.metric,
            side: cell.side,
            ks: cfg.ks.clone(),
        };
        let result = match extraction {
            Ok(x) => evaluate_extraction(x, &config).map_err(CliError::from),
            Err(e) => Err(e.clone()),
        };
        match result {
            Ok(report) => {
                if report.failed_extractions > 0 || report.failed_queries > 0 {
                    writeln!(
                        err,
                        "warning: {}: {} failed extractions, {} failed queries excluded",
                        report_slug(&report),
                        report.failed_extractions,
                        report.failed_queries
                    )?;
                }
                let slug = report_slug(&report);
                write_file(&classes_dir.join(format!("{slug}.csv")), &class_csv(&report))?;
                write_file(&classes_dir.join(format!("{slug}.txt")), &class_table(&report))?;
                reports.push(report);
            }
            Err(e) => {
                let side = cell.side.map_or_else(String::new, |s| format!(" size {s}"));
                writeln!(err, "error: {} + {}{side}: {e}", cell.feature, cell.metric)?;
                first_failure.get_or_insert(e);
            }
        }
    }

    let summary = summary_table(&reports);
    write_file(&cfg.out.join("summary.csv"), &summary_csv(&reports))?;
    write_file(&cfg.out.join("summary.txt"), &summary)?;
    write_file(&cfg.out.join("timings.csv"), &timings_csv(&reports))?;
    write!(out, "{summary}")?;
    match first_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

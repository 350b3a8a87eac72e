//! Run configuration: a JSON file mirroring the flags, overridden by flags.
//!
//! ```json
//! {"manifest": "data/manifest.json", "feature": "raw", "metric": ["mse", "uiq"],
//!  "size": [8, 20], "k": [1, 5, 10], "store": "store", "out": "reports", "threads": 4}
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.
//! List-valued keys also accept a single value or a comma-separated string.

use std::path::{Path, PathBuf};

use defchars::evaluation::DEFAULT_KS;
use defchars::metrics::Metric;
use defchars::FeatureKind;
use serde::Deserialize;

use crate::{CliError, CliResult, EvaluateArgs, IndexArgs, QueryArgs};

pub const DEFAULT_SIDES: [u32; 4] = [8, 20, 50, 100];
pub const DEFAULT_QUERY_K: usize = 10;

/// Flag-like value from the config file: a number, a string, or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ListValue {
    Text(String),
    Number(u64),
    List(Vec<serde_json::Value>),
}

impl ListValue {
    fn to_flag(&self) -> String {
        match self {
            ListValue::Text(s) => s.clone(),
            ListValue::Number(n) => n.to_string(),
            ListValue::List(items) => items
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub feature: Option<ListValue>,
    pub metric: Option<ListValue>,
    pub size: Option<ListValue>,
    pub k: Option<ListValue>,
    pub store: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.store, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn pick(flag: &Option<String>, file: &Option<ListValue>) -> Option<String> {
    flag.clone().or_else(|| file.as_ref().map(ListValue::to_flag))
}

fn split(list: &str) -> impl Iterator<Item = &str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_features(list: &str) -> CliResult<Vec<FeatureKind>> {
    let v = split(list)
        .map(|s| s.parse::<FeatureKind>().map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    non_empty(v, "feature")
}

pub fn parse_metrics(list: &str) -> CliResult<Vec<Metric>> {
    let v = split(list)
        .map(|s| s.parse::<Metric>().map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    non_empty(v, "metric")
}

fn parse_positive<T: std::str::FromStr + PartialEq + Default>(list: &str, what: &str) -> CliResult<Vec<T>> {
    let v = split(list)
        .map(|s| match s.parse::<T>() {
            Ok(n) if n != T::default() => Ok(n),
            _ => Err(CliError::config(format!("invalid {what} {s:?}: expected a positive integer"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    non_empty(v, what)
}

pub fn parse_sides(list: &str) -> CliResult<Vec<u32>> {
    parse_positive(list, "size")
}

/// Sorted, deduplicated K list.
pub fn parse_ks(list: &str) -> CliResult<Vec<usize>> {
    let mut v = parse_positive::<usize>(list, "k")?;
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

fn non_empty<T>(v: Vec<T>, what: &str) -> CliResult<Vec<T>> {
    if v.is_empty() {
        Err(CliError::config(format!("empty {what} list")))
    } else {
        Ok(v)
    }
}

fn single<T: Copy>(v: Vec<T>, what: &str) -> CliResult<T> {
    match v.as_slice() {
        [one] => Ok(*one),
        _ => Err(CliError::config(format!("expected a single {what}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub manifest: PathBuf,
    pub feature: FeatureKind,
    pub side: Option<u32>,
    pub store: PathBuf,
}

impl IndexConfig {
    pub fn resolve(a: &IndexArgs, f: &FileConfig) -> CliResult<Self> {
        let manifest = a
            .manifest
            .clone()
            .or(f.manifest.clone())
            .ok_or_else(|| CliError::config("index needs --manifest"))?;
        let store = a
            .store
            .clone()
            .or(f.store.clone())
            .ok_or_else(|| CliError::config("index needs --store"))?;
        let feature = match pick(&a.feature, &f.feature) {
            Some(s) => single(parse_features(&s)?, "feature")?,
            None => FeatureKind::DefChars,
        };
        let side = side_for(feature, pick(&a.size, &f.size))?;
        Ok(Self {
            manifest,
            feature,
            side,
            store,
        })
    }
}

fn side_for(feature: FeatureKind, size: Option<String>) -> CliResult<Option<u32>> {
    match (feature.needs_side(), size) {
        (true, Some(s)) => Ok(Some(single(parse_sides(&s)?, "size")?)),
        (true, None) => Err(CliError::config(format!("feature {feature} needs --size"))),
        (false, _) => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryConfig {
    pub store: PathBuf,
    pub metric: Metric,
    pub k: usize,
}

impl QueryConfig {
    pub fn resolve(a: &QueryArgs, f: &FileConfig) -> CliResult<Self> {
        let store = a
            .store
            .clone()
            .or(f.store.clone())
            .ok_or_else(|| CliError::config("query needs --store"))?;
        let metric = match pick(&a.metric, &f.metric) {
            Some(s) => single(parse_metrics(&s)?, "metric")?,
            None => return Err(CliError::config("query needs --metric")),
        };
        let k = match pick(&a.k, &f.k) {
            Some(s) => single(parse_positive(&s, "k")?, "k")?,
            None => DEFAULT_QUERY_K,
        };
        Ok(Self { store, metric, k })
    }
}

/// One row of the evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub feature: FeatureKind,
    pub side: Option<u32>,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateConfig {
    pub manifest: PathBuf,
    pub grid: Vec<GridCell>,
    pub ks: Vec<usize>,
    pub out: PathBuf,
}

impl EvaluateConfig {
    pub fn resolve(a: &EvaluateArgs, f: &FileConfig) -> CliResult<Self> {
        let manifest = a
            .manifest
            .clone()
            .or(f.manifest.clone())
            .ok_or_else(|| CliError::config("evaluate needs --manifest"))?;
        let out = a
            .out
            .clone()
            .or(f.out.clone())
            .ok_or_else(|| CliError::config("evaluate needs --out"))?;
        let features = match pick(&a.feature, &f.feature) {
            Some(s) => parse_features(&s)?,
            None => FeatureKind::ALL.to_vec(),
        };
        let metrics = pick(&a.metric, &f.metric).map(|s| parse_metrics(&s)).transpose()?;
        let sides = match pick(&a.size, &f.size) {
            Some(s) => parse_sides(&s)?,
            None => DEFAULT_SIDES.to_vec(),
        };
        let ks = match pick(&a.k, &f.k) {
            Some(s) => parse_ks(&s)?,
            None => DEFAULT_KS.to_vec(),
        };
        Ok(Self {
            manifest,
            grid: build_grid(&features, metrics.as_deref(), &sides)?,
            ks,
            out,
        })
    }
}

/// Expand features x sizes x metrics, keeping only metrics that apply to
/// each feature. Without an explicit metric list every applicable metric is
/// used.
pub fn build_grid(features: &[FeatureKind], metrics: Option<&[Metric]>, sides: &[u32]) -> CliResult<Vec<GridCell>> {
    let mut grid = Vec::new();
    for &feature in features {
        let applicable: Vec<Metric> = match metrics {
            Some(list) => list
                .iter()
                .copied()
                .filter(|m| m.input_kind() == defchars::store::input_kind_of(feature))
                .collect(),
            None => Metric::ALL
                .iter()
                .copied()
                .filter(|m| m.input_kind() == defchars::store::input_kind_of(feature))
                .collect(),
        };
        if applicable.is_empty() {
            return Err(CliError::config(format!("no requested metric applies to feature {feature}")));
        }
        let feature_sides: Vec<Option<u32>> = if feature.needs_side() {
            sides.iter().map(|&s| Some(s)).collect()
        } else {
            vec![None]
        };
        for side in feature_sides {
            for &metric in &applicable {
                if !grid.contains(&GridCell { feature, side, metric }) {
                    grid.push(GridCell { feature, side, metric });
                }
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_covers_every_compatible_cell() {
        let grid = build_grid(&FeatureKind::ALL, None, &DEFAULT_SIDES).unwrap();
        assert_eq!(grid.len(), 4 + 3 * 4 + 4 * 4);
    }

    #[test]
    fn defchars_grid_with_four_metrics() {
        let metrics = parse_metrics("manhattan,cosine,euclidean,jaccard").unwrap();
        let grid = build_grid(&[FeatureKind::DefChars], Some(&metrics), &DEFAULT_SIDES).unwrap();
        assert_eq!(grid.len(), 4);
        assert!(grid.iter().all(|c| c.side.is_none()));
    }

    #[test]
    fn raw_grid_matches_image_rows() {
        let metrics = parse_metrics("mse,sam,uiq").unwrap();
        let grid = build_grid(&[FeatureKind::RawImage], Some(&metrics), &DEFAULT_SIDES).unwrap();
        assert_eq!(grid.len(), 12);
    }

    #[test]
    fn incompatible_only_is_a_config_error() {
        let err = build_grid(&[FeatureKind::DefChars], Some(&[Metric::Mse]), &[8]).unwrap_err();
        assert_eq!(err.code, crate::EXIT_CONFIG);
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_ks("20, 1,5,5").unwrap(), vec![1, 5, 20]);
        assert!(parse_ks("0").is_err());
        assert!(parse_sides("").is_err());
        assert!(parse_metrics("hamming").is_err());
        assert_eq!(parse_features("raw,lbp").unwrap(), vec![FeatureKind::RawImage, FeatureKind::Lbp]);
    }

    #[test]
    fn file_values_become_flags() {
        let f: FileConfig = serde_json::from_str(r#"{"metric": ["mse", "uiq"], "size": 8, "k": "1,5"}"#).unwrap();
        assert_eq!(f.metric.unwrap().to_flag(), "mse,uiq");
        assert_eq!(f.size.unwrap().to_flag(), "8");
        assert_eq!(f.k.unwrap().to_flag(), "1,5");
    }
}

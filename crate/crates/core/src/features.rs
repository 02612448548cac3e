//! Time-domain vibration features, min-max normalization, and dataset
//! builders for the direct and lagged time-series experiments.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{PanfisError, Result};
use crate::exec::Strategy;
use crate::learner::Sample;

pub const MIN_WINDOW: usize = 8;
pub const DEFAULT_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Rms,
    Variance,
    Skewness,
    Kurtosis,
    ShapeFactor,
    CrestFactor,
    Entropy,
    HistogramUpper,
    HistogramLower,
}

impl Feature {
    /// Column order used everywhere.
    pub const ALL: [Feature; 9] = [
        Feature::Rms,
        Feature::Variance,
        Feature::Skewness,
        Feature::Kurtosis,
        Feature::ShapeFactor,
        Feature::CrestFactor,
        Feature::Entropy,
        Feature::HistogramUpper,
        Feature::HistogramLower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Rms => "rms",
            Feature::Variance => "variance",
            Feature::Skewness => "skewness",
            Feature::Kurtosis => "kurtosis",
            Feature::ShapeFactor => "shape_factor",
            Feature::CrestFactor => "crest_factor",
            Feature::Entropy => "entropy",
            Feature::HistogramUpper => "histogram_upper",
            Feature::HistogramLower => "histogram_lower",
        }
    }

    pub fn index(self) -> usize {
        Feature::ALL.iter().position(|&f| f == self).unwrap()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = PanfisError;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| PanfisError::InvalidInput(format!("unknown feature '{s}'")))
    }
}

/// The nine features of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub source: String,
    pub rms: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub shape_factor: f64,
    pub crest_factor: f64,
    pub entropy: f64,
    pub histogram_upper: f64,
    pub histogram_lower: f64,
}

impl FeatureVector {
    pub fn values(&self) -> [f64; 9] {
        [
            self.rms,
            self.variance,
            self.skewness,
            self.kurtosis,
            self.shape_factor,
            self.crest_factor,
            self.entropy,
            self.histogram_upper,
            self.histogram_lower,
        ]
    }

    pub fn from_values(source: impl Into<String>, v: [f64; 9]) -> Self {
        FeatureVector {
            source: source.into(),
            rms: v[0],
            variance: v[1],
            skewness: v[2],
            kurtosis: v[3],
            shape_factor: v[4],
            crest_factor: v[5],
            entropy: v[6],
            histogram_upper: v[7],
            histogram_lower: v[8],
        }
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.values()[feature.index()]
    }
}

/// Extract the nine features from one window with a `bins`-bin histogram.
///
/// Degenerate windows: a constant window has zero variance, skewness and
/// kurtosis; an all-zero window also reports zero shape and crest factors.
pub fn extract_features(source: &str, window: &[f64], bins: usize) -> Result<FeatureVector> {
    if window.len() < MIN_WINDOW {
        return Err(PanfisError::InvalidInput(format!(
            "window '{source}' has {} samples, need at least {MIN_WINDOW}",
            window.len()
        )));
    }
    if bins < 2 {
        return Err(PanfisError::InvalidInput("histogram needs at least 2 bins".into()));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(PanfisError::InvalidInput(format!("window '{source}' has non-finite samples")));
    }
    let n = window.len() as f64;
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak = min.abs().max(max.abs());

    let rms = (window.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let mean_abs = window.iter().map(|x| x.abs()).sum::<f64>() / n;

    let (variance, skewness, kurtosis) = if min == max {
        (0.0, 0.0, 0.0)
    } else {
        let mean = window.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in window {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        (m2, m3 / m2.powf(1.5), m4 / (m2 * m2))
    };

    let (shape_factor, crest_factor) = if rms > 0.0 {
        (rms / mean_abs, peak / rms)
    } else {
        (0.0, 0.0)
    };

    let delta = (max - min) / (bins - 1) as f64;
    let entropy = if delta > 0.0 {
        let mut counts = vec![0usize; bins];
        for x in window {
            let k = ((x - min) / delta).round() as usize;
            counts[k.min(bins - 1)] += 1;
        }
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    } else {
        0.0
    };

    Ok(FeatureVector {
        source: source.to_string(),
        rms,
        variance,
        skewness,
        kurtosis,
        shape_factor,
        crest_factor,
        entropy,
        histogram_upper: max + delta / 2.0,
        histogram_lower: min - delta / 2.0,
    })
}

/// Windows are independent; extraction fans out under `strategy`.
pub fn extract_all(windows: &[(String, Vec<f64>)], bins: usize, strategy: Strategy) -> Result<Vec<FeatureVector>> {
    strategy
        .map(windows, |(id, w)| extract_features(id, w, bins))
        .into_iter()
        .collect()
}

/// Per-column min-max scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(PanfisError::InvalidInput(
                "normalizer needs at least 2 vectors".into(),
            ));
        }
        let width = rows[0].as_ref().len();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(PanfisError::DimensionMismatch { expected: width, actual: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Normalizer { min, max })
    }

    /// `(v - min) / (max - min)`, unclamped; zero-range columns map to 0.5.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    (v - self.min[j]) / range
                } else {
                    0.5
                }
            })
            .collect()
    }
}

/// Predict `target` from the other eight features of the same row. The
/// first `split` rows train, the rest test.
pub fn build_direct_dataset<R: AsRef<[f64]>>(
    rows: &[R],
    target: Feature,
    split: usize,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if rows.len() < 2 {
        return Err(PanfisError::InvalidInput("direct dataset needs at least 2 rows".into()));
    }
    if split == 0 || split > rows.len() {
        return Err(PanfisError::InvalidInput(format!(
            "split {split} out of range for {} rows",
            rows.len()
        )));
    }
    let t = target.index();
    let samples = rows
        .iter()
        .map(|row| {
            let row = row.as_ref();
            if row.len() != Feature::ALL.len() {
                return Err(PanfisError::DimensionMismatch { expected: 9, actual: row.len() });
            }
            let x = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != t)
                .map(|(_, &v)| v)
                .collect();
            Ok(Sample::new(x, row[t]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut train = samples;
    let test = train.split_off(split);
    Ok((train, test))
}

/// Lag-2 samples `([y[n-1], y[n-2]], y[n])` for `n = 2..T`.
pub fn build_timeseries_dataset(series: &[f64]) -> Result<Vec<Sample>> {
    if series.len() < 3 {
        return Err(PanfisError::InvalidInput(format!(
            "series of length {} is too short, need at least 3",
            series.len()
        )));
    }
    Ok((2..series.len())
        .map(|n| Sample::new(vec![series[n - 1], series[n - 2]], series[n]))
        .collect())
}

const VALUE_COLUMNS: [&str; 3] = ["value", "signal", "amplitude"];
const WINDOW_COLUMNS: [&str; 2] = ["window", "window_id"];

fn parse_number(field: &str, line: u64, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| PanfisError::Parse {
        line,
        message: format!("column '{column}': '{field}' is not a number"),
    })
}

/// Read raw vibration windows from a CSV file with a header row.
///
/// With a `window`/`window_id` column, rows are grouped by it in order of
/// first appearance. Otherwise the file is one window, or is cut into
/// consecutive windows of `window_size` samples (a trailing partial window
/// is dropped).
pub fn read_raw_windows(path: &Path, window_size: Option<usize>) -> Result<Vec<(String, Vec<f64>)>> {
    let file = std::fs::File::open(path).map_err(|e| PanfisError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let window_col = names.iter().position(|h| WINDOW_COLUMNS.contains(&h.as_str()));
    let value_col = names
        .iter()
        .position(|h| VALUE_COLUMNS.contains(&h.as_str()))
        .or_else(|| (0..names.len()).find(|&i| Some(i) != window_col))
        .ok_or_else(|| PanfisError::InvalidInput(format!("{}: no signal column", path.display())))?;
    let stem = path
        .file_stem()
        .map_or_else(|| "window".to_string(), |s| s.to_string_lossy().into_owned());

    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = record.get(value_col).ok_or_else(|| PanfisError::Parse {
            line,
            message: "missing signal field".into(),
        })?;
        let value = parse_number(field, line, &names[value_col])?;
        if !value.is_finite() {
            return Err(PanfisError::Parse { line, message: "non-finite sample".into() });
        }
        let id = match window_col {
            Some(c) => record
                .get(c)
                .ok_or_else(|| PanfisError::Parse { line, message: "missing window id".into() })?
                .trim()
                .to_string(),
            None => stem.clone(),
        };
        match groups.iter_mut().find(|(g, _)| *g == id) {
            Some((_, samples)) => samples.push(value),
            None => groups.push((id, vec![value])),
        }
    }

    match (window_col, window_size) {
        (None, Some(size)) if size > 0 => {
            let signal = groups.pop().map(|(_, s)| s).unwrap_or_default();
            Ok(signal
                .chunks_exact(size)
                .enumerate()
                .map(|(k, chunk)| (format!("{stem}:{k}"), chunk.to_vec()))
                .collect())
        }
        _ => Ok(groups),
    }
}

/// Write a feature table: `index` column then the nine features in fixed order.
pub fn write_feature_table<W: std::io::Write>(rows: &[FeatureVector], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index"];
    header.extend(Feature::ALL.iter().map(|f| f.name()));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.source.clone()];
        record.extend(row.values().iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| PanfisError::io("feature table", e))?;
    Ok(())
}

/// Read a feature table; columns are located by name, extra columns ignored.
pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureVector>> {
    let file = std::fs::File::open(path).map_err(|e| PanfisError::io(path, e))?;
    read_feature_table_from(file)
}

pub fn read_feature_table_from<R: std::io::Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let columns = Feature::ALL
        .iter()
        .map(|f| {
            headers
                .iter()
                .position(|h| h == f.name())
                .ok_or_else(|| PanfisError::InvalidInput(format!("feature table lacks column '{f}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let index_col = headers.iter().position(|h| h == "index");

    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = [0.0; 9];
        for (slot, (&col, feature)) in values.iter_mut().zip(columns.iter().zip(Feature::ALL)) {
            let field = record.get(col).ok_or_else(|| PanfisError::Parse {
                line,
                message: format!("missing field '{feature}'"),
            })?;
            *slot = parse_number(field, line, feature.name())?;
        }
        let source = index_col
            .and_then(|c| record.get(c))
            .map_or_else(|| k.to_string(), |s| s.trim().to_string());
        rows.push(FeatureVector::from_values(source, values));
    }
    Ok(rows)
}

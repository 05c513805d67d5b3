//! Multi-channel CSV ingestion.
//!
//! Each numeric column of a CSV file becomes one [`ChannelSeries`]. A leading
//! timestamp (or any other non-numeric) column is detected by a failed parse
//! of its first data row and dropped. Leading/trailing non-finite entries are
//! trimmed; interior gaps are either linearly interpolated (when enabled) or
//! rejected.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest run of consecutive interior gaps that interpolation will fill.
pub const MAX_GAP_RUN: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: no numeric columns after the header row")]
    NoNumericColumns { path: PathBuf },
    #[error("{path}: file has a header but no data rows")]
    NoDataRows { path: PathBuf },
    #[error("{channel}: non-finite value at row {row} (interpolation disabled)")]
    NonFiniteInterior { channel: String, row: usize },
    #[error("{channel}: gap run of {run} consecutive values exceeds the limit of {MAX_GAP_RUN}")]
    GapRunTooLong { channel: String, run: usize },
    #[error("series {id}: non-finite value at index {index}")]
    NonFiniteValue { id: String, index: usize },
    #[error("duplicate series id {id}")]
    DuplicateSeries { id: String },
}

/// One channel of one dataset: an ordered sequence of finite f64 samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub dataset_name: String,
    pub channel_name: String,
    pub values: Vec<f64>,
}

impl ChannelSeries {
    /// Build a series, rejecting any non-finite value.
    pub fn new(
        dataset_name: impl Into<String>,
        channel_name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self, CorpusError> {
        let series = Self {
            dataset_name: dataset_name.into(),
            channel_name: channel_name.into(),
            values,
        };
        if let Some(index) = series.values.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFiniteValue {
                id: series.id(),
                index,
            });
        }
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Stable identifier used in reports and per-sequence CSV output.
    pub fn id(&self) -> String {
        format!("{}/{}", self.dataset_name, self.channel_name)
    }
}

/// Raw shape of a loaded dataset: L data rows by C numeric columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub name: String,
    pub rows: usize,
    pub channels: usize,
}

/// An immutable collection of channel series plus the raw per-dataset shapes.
///
/// Totals are computed from the raw shapes, so trimming leading/trailing gaps
/// from individual channels does not change them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    series: Vec<ChannelSeries>,
    datasets: Vec<DatasetShape>,
}

impl Corpus {
    pub fn new(
        series: Vec<ChannelSeries>,
        datasets: Vec<DatasetShape>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for s in &series {
            if !seen.insert(s.id()) {
                return Err(CorpusError::DuplicateSeries { id: s.id() });
            }
        }
        Ok(Self { series, datasets })
    }

    /// Build a corpus directly from series, deriving dataset shapes.
    ///
    /// Each dataset's L is the longest channel; C is its channel count.
    pub fn from_series(series: Vec<ChannelSeries>) -> Result<Self, CorpusError> {
        let mut datasets: Vec<DatasetShape> = Vec::new();
        for s in &series {
            match datasets.iter_mut().find(|d| d.name == s.dataset_name) {
                Some(d) => {
                    d.rows = d.rows.max(s.len());
                    d.channels += 1;
                }
                None => datasets.push(DatasetShape {
                    name: s.dataset_name.clone(),
                    rows: s.len(),
                    channels: 1,
                }),
            }
        }
        Self::new(series, datasets)
    }

    pub fn series(&self) -> &[ChannelSeries] {
        &self.series
    }

    pub fn datasets(&self) -> &[DatasetShape] {
        &self.datasets
    }

    /// Sum of per-dataset row counts L.
    pub fn total_observations(&self) -> u64 {
        self.datasets.iter().map(|d| d.rows as u64).sum()
    }

    /// Sum of per-dataset L x C.
    pub fn total_points(&self) -> u64 {
        self.datasets
            .iter()
            .map(|d| d.rows as u64 * d.channels as u64)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub interpolate_interior_gaps: bool,
}

/// Per-dataset table plus corpus totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub total_observations: u64,
    pub total_points: u64,
    pub per_dataset: Vec<DatasetShape>,
}

/// Exact integer totals over the loaded corpus.
pub fn corpus_summary(corpus: &Corpus) -> CorpusSummary {
    CorpusSummary {
        total_observations: corpus.total_observations(),
        total_points: corpus.total_points(),
        per_dataset: corpus.datasets().to_vec(),
    }
}

/// Load one CSV file into a list of channel series.
///
/// The first row must be a header. A column is numeric iff its first data row
/// parses as f64; all other columns are dropped. Values that fail to parse
/// (or parse non-finite) in a numeric column are treated as gaps.
pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<Vec<ChannelSeries>, CorpusError> {
    load_dataset(path, options).map(|(_, series)| series)
}

/// Like [`load_csv`], also returning the raw dataset shape (L rows, C numeric columns).
pub fn load_dataset(
    path: &Path,
    options: &LoadOptions,
) -> Result<(DatasetShape, Vec<ChannelSeries>), CorpusError> {
    let unreadable = |source: csv::Error| CorpusError::Unreadable {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(unreadable)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(unreadable)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut records = reader.records();
    let first = match records.next() {
        Some(rec) => rec.map_err(unreadable)?,
        None => {
            return Err(CorpusError::NoDataRows {
                path: path.to_path_buf(),
            })
        }
    };

    // Numeric columns are decided by the first data row.
    let numeric_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| {
            first
                .get(c)
                .is_some_and(|v| v.trim().parse::<f64>().is_ok())
        })
        .collect();
    if numeric_cols.is_empty() {
        return Err(CorpusError::NoNumericColumns {
            path: path.to_path_buf(),
        });
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); numeric_cols.len()];
    let push_row = |record: &csv::StringRecord, columns: &mut Vec<Vec<f64>>| {
        for (slot, &c) in numeric_cols.iter().enumerate() {
            let parsed = record
                .get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .unwrap_or(f64::NAN);
            columns[slot].push(if parsed.is_finite() { parsed } else { f64::NAN });
        }
    };
    push_row(&first, &mut columns);
    let mut rows = 1usize;
    for record in records {
        let record = record.map_err(unreadable)?;
        push_row(&record, &mut columns);
        rows += 1;
    }

    let dataset_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned());

    let mut series = Vec::with_capacity(columns.len());
    for (slot, mut values) in columns.into_iter().enumerate() {
        let channel_name = headers[numeric_cols[slot]].clone();
        let channel_id = format!("{dataset_name}/{channel_name}");
        trim_and_fill(&mut values, &channel_id, options)?;
        series.push(ChannelSeries {
            dataset_name: dataset_name.clone(),
            channel_name,
            values,
        });
    }

    let shape = DatasetShape {
        name: dataset_name,
        rows,
        channels: series.len(),
    };
    Ok((shape, series))
}

/// Load several files into one corpus. Files are read in parallel but the
/// resulting corpus order always follows the input path order.
pub fn load_corpus(paths: &[PathBuf], options: &LoadOptions) -> Result<Corpus, CorpusError> {
    let loaded: Vec<(DatasetShape, Vec<ChannelSeries>)> = paths
        .par_iter()
        .map(|p| load_dataset(p, options))
        .collect::<Result<_, _>>()?;
    let mut datasets = Vec::with_capacity(loaded.len());
    let mut series = Vec::new();
    for (shape, mut s) in loaded {
        datasets.push(shape);
        series.append(&mut s);
    }
    Corpus::new(series, datasets)
}

/// Trim leading/trailing gaps, then fill or reject interior ones.
fn trim_and_fill(
    values: &mut Vec<f64>,
    channel_id: &str,
    options: &LoadOptions,
) -> Result<(), CorpusError> {
    let first_finite = values.iter().position(|v| v.is_finite());
    let Some(start) = first_finite else {
        values.clear();
        return Ok(());
    };
    let end = values.iter().rposition(|v| v.is_finite()).unwrap() + 1;
    values.drain(end..);
    values.drain(..start);

    let mut i = 0;
    while i < values.len() {
        if values[i].is_finite() {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < values.len() && !values[i].is_finite() {
            i += 1;
        }
        let run = i - run_start;
        if !options.interpolate_interior_gaps {
            return Err(CorpusError::NonFiniteInterior {
                channel: channel_id.to_string(),
                row: run_start + start,
            });
        }
        if run > MAX_GAP_RUN {
            return Err(CorpusError::GapRunTooLong {
                channel: channel_id.to_string(),
                run,
            });
        }
        // Interior by construction: run_start > 0 and i < len are finite.
        let left = values[run_start - 1];
        let right = values[i];
        let span = (run + 1) as f64;
        for (step, value) in values[run_start..i].iter_mut().enumerate() {
            *value = left + (right - left) * (step + 1) as f64 / span;
        }
    }
    Ok(())
}

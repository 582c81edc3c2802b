//! Feature-window datasets: types, CSV ingestion and per-subject validation.
//!
//! The on-disk format is a UTF-8 CSV with a mandatory header
//! `subject_id,window_id,label,f0,...,f{F-1}`. Labels are encoded as
//! `1` (fear), `0` (non-fear) and `-1` (unknown).

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Fear,
    NonFear,
    Unknown,
}

impl ClassLabel {
    pub fn code(self) -> i8 {
        match self {
            ClassLabel::Fear => 1,
            ClassLabel::NonFear => 0,
            ClassLabel::Unknown => -1,
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "1" => Some(ClassLabel::Fear),
            "0" => Some(ClassLabel::NonFear),
            "-1" => Some(ClassLabel::Unknown),
            _ => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != ClassLabel::Unknown
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::Fear => "fear",
            ClassLabel::NonFear => "non_fear",
            ClassLabel::Unknown => "unknown",
        })
    }
}

/// One labeled feature window of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub subject_id: String,
    pub window_id: u64,
    pub label: ClassLabel,
    pub features: Vec<f64>,
}

/// An immutable, validated collection of observations.
///
/// Subjects are kept in first-appearance order and every observation row
/// order is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    feature_count: usize,
    subject_ids: Vec<String>,
    subject_rows: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset, checking that it is non-empty, that every feature
    /// vector has `feature_count` entries and that all values are finite.
    pub fn new(observations: Vec<Observation>, feature_count: usize) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut subject_ids = Vec::new();
        let mut subject_rows: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (row, obs) in observations.iter().enumerate() {
            if obs.features.len() != feature_count {
                return Err(Error::RaggedRow {
                    row: row + 1,
                    found: obs.features.len() + 3,
                    expected: feature_count + 3,
                });
            }
            if let Some(j) = obs.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: row + 1,
                    column: format!("f{j}"),
                    value: obs.features[j].to_string(),
                });
            }
            let slot = *index.entry(obs.subject_id.as_str()).or_insert_with(|| {
                subject_ids.push(obs.subject_id.clone());
                subject_rows.push(Vec::new());
                subject_ids.len() - 1
            });
            subject_rows[slot].push(row);
        }
        Ok(Dataset {
            observations,
            feature_count,
            subject_ids,
            subject_rows,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn into_observations(self) -> Vec<Observation> {
        self.observations
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn subject_count(&self) -> usize {
        self.subject_ids.len()
    }

    /// Row indices of each subject, aligned with [`Dataset::subject_ids`].
    pub fn subject_rows(&self) -> &[Vec<usize>] {
        &self.subject_rows
    }

    pub fn subject_position(&self, subject_id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == subject_id)
    }

    /// Observations of one subject, in row order.
    pub fn subject_observations(&self, subject_id: &str) -> Vec<&Observation> {
        match self.subject_position(subject_id) {
            Some(i) => self.subject_rows[i].iter().map(|&r| &self.observations[r]).collect(),
            None => Vec::new(),
        }
    }

    /// Keeps only the subjects accepted by `keep`, preserving row order.
    pub fn retain_subjects(&self, keep: impl Fn(&str) -> bool) -> Result<Dataset> {
        let observations = self
            .observations
            .iter()
            .filter(|o| keep(&o.subject_id))
            .cloned()
            .collect();
        Dataset::new(observations, self.feature_count)
    }

    pub fn has_unknown_labels(&self) -> bool {
        self.observations.iter().any(|o| !o.label.is_known())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["subject_id".to_string(), "window_id".to_string(), "label".to_string()];
        header.extend((0..self.feature_count).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for obs in &self.observations {
            let mut record = Vec::with_capacity(self.feature_count + 3);
            record.push(obs.subject_id.clone());
            record.push(obs.window_id.to_string());
            record.push(obs.label.code().to_string());
            // `Display` for f64 is the shortest representation that parses back exactly.
            record.extend(obs.features.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// How many feature columns a file must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureSchema {
    #[default]
    Infer,
    Expect(usize),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub schema: FeatureSchema,
    /// Accept `-1` labels. Only enrollment inputs should set this.
    pub allow_unlabeled: bool,
}

impl LoadOptions {
    pub fn training() -> Self {
        LoadOptions::default()
    }

    pub fn enrollment() -> Self {
        LoadOptions {
            allow_unlabeled: true,
            ..LoadOptions::default()
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file), options)
}

pub fn read_dataset<R: Read>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    for (i, name) in ["subject_id", "window_id", "label"].iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(Error::MissingColumn((*name).to_string()));
        }
    }
    let header_features = header.len() - 3;
    let feature_count = match options.schema {
        FeatureSchema::Infer => header_features,
        FeatureSchema::Expect(f) => {
            if header_features < f {
                return Err(Error::MissingColumn(format!("f{header_features}")));
            }
            if header_features > f {
                return Err(Error::RaggedRow {
                    row: 0,
                    found: header.len(),
                    expected: f + 3,
                });
            }
            f
        }
    };
    for j in 0..feature_count {
        if header.get(j + 3) != Some(format!("f{j}").as_str()) {
            return Err(Error::MissingColumn(format!("f{j}")));
        }
    }

    let expected = feature_count + 3;
    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected,
            });
        }
        let window_id = record[1].parse::<u64>().map_err(|_| Error::Parse {
            row,
            column: "window_id".into(),
            value: record[1].to_string(),
        })?;
        let label = ClassLabel::from_code(&record[2]).ok_or_else(|| Error::Parse {
            row,
            column: "label".into(),
            value: record[2].to_string(),
        })?;
        if !label.is_known() && !options.allow_unlabeled {
            return Err(Error::UnlabeledInTraining { row });
        }
        let mut features = Vec::with_capacity(feature_count);
        for j in 0..feature_count {
            let cell = &record[j + 3];
            let value = cell.parse::<f64>().map_err(|_| Error::Parse {
                row,
                column: format!("f{j}"),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    row,
                    column: format!("f{j}"),
                    value: cell.to_string(),
                });
            }
            features.push(value);
        }
        observations.push(Observation {
            subject_id: record[0].to_string(),
            window_id,
            label,
            features,
        });
    }
    Dataset::new(observations, feature_count)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectClassCounts {
    pub subject_id: String,
    pub fear: usize,
    pub non_fear: usize,
    pub unknown: usize,
    pub flagged: bool,
}

/// Per-subject class counts and the subjects that must be excluded before
/// profile building.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min_per_class: usize,
    pub subjects: Vec<SubjectClassCounts>,
    pub flagged: Vec<String>,
}

impl ValidationReport {
    pub fn is_flagged(&self, subject_id: &str) -> bool {
        self.flagged.iter().any(|s| s == subject_id)
    }
}

pub const DEFAULT_MIN_PER_CLASS: usize = 2;

/// Flags every subject with fewer than `min_per_class` windows in either class.
pub fn validate_dataset(d: &Dataset, min_per_class: usize) -> ValidationReport {
    let mut subjects = Vec::with_capacity(d.subject_count());
    let mut flagged = Vec::new();
    for (id, rows) in d.subject_ids().iter().zip(d.subject_rows()) {
        let (mut fear, mut non_fear, mut unknown) = (0, 0, 0);
        for &r in rows {
            match d.observations()[r].label {
                ClassLabel::Fear => fear += 1,
                ClassLabel::NonFear => non_fear += 1,
                ClassLabel::Unknown => unknown += 1,
            }
        }
        let is_flagged = fear < min_per_class || non_fear < min_per_class;
        if is_flagged {
            flagged.push(id.clone());
        }
        subjects.push(SubjectClassCounts {
            subject_id: id.clone(),
            fear,
            non_fear,
            unknown,
            flagged: is_flagged,
        });
    }
    ValidationReport {
        min_per_class,
        subjects,
        flagged,
    }
}

/// Drops flagged subjects, logging each exclusion. Fails with
/// `EmptyDataset` if nobody is left.
pub fn exclude_flagged(d: &Dataset, report: &ValidationReport) -> Result<Dataset> {
    if report.flagged.is_empty() {
        return Ok(d.clone());
    }
    for s in &report.flagged {
        log::warn!(
            "excluding subject {s}: fewer than {} windows in a class",
            report.min_per_class
        );
    }
    d.retain_subjects(|s| !report.is_flagged(s))
}

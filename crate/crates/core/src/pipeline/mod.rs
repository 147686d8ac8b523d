//! Dataset ingestion, splits, batch augmentation, prediction, synthetic
//! data, and the cumulative rotation-session workflow.
//!
//! Manifests are CSV files with header `id,image_path,label[,label2,...]`;
//! ids are unique, labels live in [0, 1], and augmented copies carry a
//! `_rotNNN` suffix so they can always be traced back to (and split with)
//! their source image.

mod session;
mod synth;

pub use session::{init_session, read_ledger, run_session, write_ledger, SessionState};
pub use synth::{generate_synthetic_dataset, render_synthetic_patch, Ellipse};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::augment::{rotate_lossless, AugmentError, RotationAngle, BASELINE_ANGLES};
use crate::imgio::{read_ppm, resize, write_ppm, ImgError, ResizeMethod};
use crate::metric::MetricError;
use crate::nn::{Dataset, ModelGraph, NnError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Img(#[from] ImgError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Invalid(String),
}

/// One dataset row: a patch on disk plus its reference labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub image_path: PathBuf,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_columns(&self) -> usize {
        self.rows.first().map_or(0, |r| r.labels.len())
    }
}

/// Accepted manifest/reference layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestSchema {
    /// `id,image_path,label[,label2,...]`
    Standard,
    /// `slide,rid,y`: id becomes `<slide>_<rid>`, the image is expected at
    /// `<slide>_<rid>.ppm` next to the manifest.
    BreastPathQ,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, PipelineError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| PipelineError::File {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

fn parse_label(path: &Path, line: u64, text: &str) -> Result<f64, PipelineError> {
    let v: f64 = text.parse().map_err(|_| PipelineError::Manifest {
        path: path.to_path_buf(),
        line,
        reason: format!("label '{text}' is not a number"),
    })?;
    if !(0.0..=1.0).contains(&v) {
        return Err(PipelineError::Manifest {
            path: path.to_path_buf(),
            line,
            reason: format!("label {v} outside [0, 1]"),
        });
    }
    Ok(v)
}

/// Load and validate a manifest: unique ids, labels in [0, 1], and every
/// referenced image present on disk. Problems are reported with their line
/// number.
pub fn load_manifest(path: impl AsRef<Path>, schema: ManifestSchema) -> Result<Manifest, PipelineError> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let err_at = |line: u64, reason: String| PipelineError::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let headers = reader
        .headers()
        .map_err(|e| err_at(1, e.to_string()))?
        .clone();
    let header_fields: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    match schema {
        ManifestSchema::Standard => {
            if header_fields.len() < 3
                || header_fields[0] != "id"
                || header_fields[1] != "image_path"
                || !header_fields[2].starts_with("label")
            {
                return Err(err_at(
                    1,
                    format!("expected header id,image_path,label[,label2,...], got {header_fields:?}"),
                ));
            }
        }
        ManifestSchema::BreastPathQ => {
            if header_fields != ["slide", "rid", "y"] {
                return Err(err_at(1, format!("expected header slide,rid,y, got {header_fields:?}")));
            }
        }
    }
    let n_labels = match schema {
        ManifestSchema::Standard => header_fields.len() - 2,
        ManifestSchema::BreastPathQ => 1,
    };
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err_at(0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let (id, image_path, labels) = match schema {
            ManifestSchema::Standard => {
                if record.len() != n_labels + 2 {
                    return Err(err_at(
                        line,
                        format!("expected {} fields, got {}", n_labels + 2, record.len()),
                    ));
                }
                let id = record[0].to_string();
                let image_path = resolve_path(base_dir, &record[1]);
                let labels = record
                    .iter()
                    .skip(2)
                    .map(|f| parse_label(path, line, f))
                    .collect::<Result<Vec<_>, _>>()?;
                (id, image_path, labels)
            }
            ManifestSchema::BreastPathQ => {
                if record.len() != 3 {
                    return Err(err_at(line, format!("expected 3 fields, got {}", record.len())));
                }
                let id = format!("{}_{}", &record[0], &record[1]);
                let image_path = base_dir.join(format!("{id}.ppm"));
                let labels = vec![parse_label(path, line, &record[2])?];
                (id, image_path, labels)
            }
        };
        if id.is_empty() {
            return Err(err_at(line, "empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(err_at(line, format!("duplicate id '{id}'")));
        }
        if !image_path.is_file() {
            return Err(err_at(line, format!("image not found: {}", image_path.display())));
        }
        rows.push(ManifestRow {
            id,
            image_path,
            labels,
        });
    }
    let manifest = Manifest { rows };
    for row in &manifest.rows {
        if row.labels.len() != manifest.label_columns() {
            return Err(PipelineError::Invalid(format!(
                "row '{}' has {} labels, expected {}",
                row.id,
                row.labels.len(),
                manifest.label_columns()
            )));
        }
    }
    Ok(manifest)
}

fn resolve_path(base: &Path, text: &str) -> PathBuf {
    let p = Path::new(text);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Write a manifest in the standard schema.
///
/// Image paths under the manifest's own directory are written relative to
/// it, so a dataset directory can be moved as a unit.
pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut writer = csv::Writer::from_path(path).map_err(|e| PipelineError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let n_labels = manifest.label_columns().max(1);
    let mut header = vec!["id".to_string(), "image_path".to_string(), "label".to_string()];
    for i in 2..=n_labels {
        header.push(format!("label{i}"));
    }
    header.truncate(2 + n_labels);
    let write_err = |e: csv::Error| PipelineError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    writer.write_record(&header).map_err(write_err)?;
    for row in &manifest.rows {
        // paths outside the manifest dir are made absolute so the loader's
        // manifest-relative resolution cannot misread them
        let written = match row.image_path.strip_prefix(base_dir) {
            Ok(relative) => relative.to_path_buf(),
            Err(_) if row.image_path.is_absolute() => row.image_path.clone(),
            Err(_) => std::path::absolute(&row.image_path).map_err(|e| PipelineError::Io {
                path: row.image_path.clone(),
                source: e,
            })?,
        };
        let mut record = vec![row.id.clone(), written.display().to_string()];
        record.extend(row.labels.iter().map(|v| format!("{v}")));
        writer.write_record(&record).map_err(write_err)?;
    }
    writer.flush().map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Strip the `_rotNNN` suffix augmented copies carry, so a row can be
/// grouped with its source image.
pub fn source_key(id: &str) -> &str {
    let trimmed = id.trim_end_matches(|c: char| c.is_ascii_digit());
    if id.len() - trimmed.len() == 3 {
        if let Some(base) = trimmed.strip_suffix("_rot") {
            if !base.is_empty() {
                return base;
            }
        }
    }
    id
}

/// Deterministic train/validation split.
///
/// Rows are grouped by source image (augmented copies always follow their
/// source to the same side), groups are shuffled from the seed, and the
/// first `train_fraction` of groups become the training side.
pub fn split_manifest(
    manifest: &Manifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(Manifest, Manifest), PipelineError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PipelineError::Invalid(format!(
            "split fraction must be inside (0, 1), got {train_fraction}"
        )));
    }
    if manifest.is_empty() {
        return Err(PipelineError::Invalid("cannot split an empty manifest".into()));
    }
    let mut groups: Vec<&str> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for row in &manifest.rows {
        let key = source_key(&row.id);
        if seen.insert(key) {
            groups.push(key);
        }
    }
    let mut rng = crate::seeds::rng(crate::seeds::derive(seed, "split"));
    for i in (1..groups.len()).rev() {
        use rand::Rng as _;
        let j = rng.random_range(0..=i);
        groups.swap(i, j);
    }
    let n_train = ((groups.len() as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train == groups.len() {
        return Err(PipelineError::Invalid(format!(
            "split {train_fraction} leaves an empty side for {} groups",
            groups.len()
        )));
    }
    let train_groups: BTreeSet<&str> = groups[..n_train].iter().copied().collect();
    let mut train = Manifest::default();
    let mut val = Manifest::default();
    for row in &manifest.rows {
        if train_groups.contains(source_key(&row.id)) {
            train.rows.push(row.clone());
        } else {
            val.rows.push(row.clone());
        }
    }
    Ok((train, val))
}

/// Rotate every manifest image by every angle, writing
/// `<id>_rot<theta:03d>.ppm` files into `out_dir`. Output row order is
/// (source order) x (angle order) regardless of worker count.
pub fn augment_with_angles(
    manifest: &Manifest,
    angles: &[RotationAngle],
    out_dir: impl AsRef<Path>,
) -> Result<Manifest, PipelineError> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut jobs = Vec::with_capacity(manifest.len() * angles.len());
    for row in &manifest.rows {
        for &angle in angles {
            jobs.push((row, angle));
        }
    }
    let rows: Vec<ManifestRow> = jobs
        .par_iter()
        .map(|(row, angle)| -> Result<ManifestRow, PipelineError> {
            let patch = read_ppm(&row.image_path)?;
            let augmented = rotate_lossless(&patch, *angle, &row.id);
            let id = format!("{}_rot{:03}", row.id, angle.degrees());
            let file = out_dir.join(format!("{id}.ppm"));
            write_ppm(&augmented.image, &file)?;
            Ok(ManifestRow {
                id,
                image_path: file,
                labels: row.labels.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Manifest { rows })
}

/// The four baseline rotations (0, 90, 180, 270), exact permutations.
pub fn baseline_augment(manifest: &Manifest, out_dir: impl AsRef<Path>) -> Result<Manifest, PipelineError> {
    let angles: Vec<RotationAngle> = BASELINE_ANGLES
        .iter()
        .map(|&d| RotationAngle::new(i64::from(d)))
        .collect();
    augment_with_angles(manifest, &angles, out_dir)
}

/// Lazily loads manifest images at a fixed square resolution.
///
/// Images larger than the target are area-downscaled, smaller ones are
/// bilinearly upscaled, matching sizes pass through untouched. Pixels are
/// fed to the network channel-major in [0, 1].
pub struct ManifestDataset {
    rows: Vec<ManifestRow>,
    resolution: usize,
}

impl ManifestDataset {
    pub fn new(manifest: &Manifest, resolution: usize) -> Self {
        Self {
            rows: manifest.rows.clone(),
            resolution,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.id.as_str())
    }

    /// Per-rater label columns (transposed rows).
    pub fn label_columns(&self) -> Vec<Vec<f64>> {
        let n = self.rows.first().map_or(0, |r| r.labels.len());
        let mut cols = vec![Vec::with_capacity(self.rows.len()); n];
        for row in &self.rows {
            for (c, &v) in row.labels.iter().enumerate() {
                cols[c].push(v);
            }
        }
        cols
    }
}

/// Load one image as a channel-major float vector at `resolution`.
pub fn load_image_input(path: &Path, resolution: usize) -> Result<Vec<f32>, PipelineError> {
    let patch = read_ppm(path)?;
    let float = patch.to_float();
    let float = if float.width() == resolution && float.height() == resolution {
        float
    } else {
        let method = if float.width() > resolution || float.height() > resolution {
            ResizeMethod::Area
        } else {
            ResizeMethod::Bilinear
        };
        resize(&float, resolution, resolution, method)?
    };
    // HWC -> CHW
    let (w, h) = (float.width(), float.height());
    let mut out = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out[c * h * w + y * w + x] = float.get(x, y, c);
            }
        }
    }
    Ok(out)
}

impl Dataset for ManifestDataset {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn input(&self, index: usize) -> Result<Vec<f32>, NnError> {
        let row = &self.rows[index];
        load_image_input(&row.image_path, self.resolution)
            .map_err(|e| NnError::Dataset(format!("row '{}': {e}", row.id)))
    }

    fn labels(&self, index: usize) -> Vec<f64> {
        self.rows[index].labels.clone()
    }
}

/// Eval-mode predictions for every manifest row, in manifest order.
///
/// Rows are independent, so they fan out over the current worker pool; the
/// output order is defined by the manifest, not by completion order.
pub fn predict(
    graph: &ModelGraph<f32>,
    manifest: &Manifest,
    resolution: usize,
) -> Result<Vec<(String, f64)>, PipelineError> {
    let dataset = ManifestDataset::new(manifest, resolution);
    let sample_len = 3 * resolution * resolution;
    let preds: Vec<(String, f64)> = (0..dataset.len())
        .into_par_iter()
        .map(|i| -> Result<(String, f64), PipelineError> {
            let input = dataset.input(i)?;
            if input.len() != sample_len {
                return Err(PipelineError::Invalid(format!(
                    "row {i}: image does not match resolution {resolution}"
                )));
            }
            let single = crate::nn::Tensor::new(vec![1, 3, resolution, resolution], input)
                .map_err(PipelineError::Nn)?;
            let out = crate::nn::forward(graph, &single, crate::nn::Mode::Eval, 0)?;
            Ok((manifest.rows[i].id.clone(), f64::from(out.data()[0])))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(preds)
}

/// Write `id,prediction` rows.
pub fn write_predictions(preds: &[(String, f64)], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut out = String::from("id,prediction\n");
    for (id, v) in preds {
        out.push_str(&format!("{id},{v}\n"));
    }
    std::fs::write(path, out).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read an `id,prediction` file.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>, PipelineError> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| PipelineError::File {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "prediction" {
        return Err(PipelineError::Manifest {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header id,prediction, got {headers:?}"),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| PipelineError::File {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let v: f64 = record[1].parse().map_err(|_| PipelineError::Manifest {
            path: path.to_path_buf(),
            line,
            reason: format!("prediction '{}' is not a number", &record[1]),
        })?;
        out.push((record[0].to_string(), v));
    }
    Ok(out)
}

/// Read a reference file (`id,label1[,label2,...]` or the BreastPathQ
/// layout) into ids plus per-rater label columns.
pub fn read_reference(
    path: impl AsRef<Path>,
    schema: ManifestSchema,
) -> Result<(Vec<String>, Vec<Vec<f64>>), PipelineError> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::File {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .clone();
    let header_fields: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    let n_labels = match schema {
        ManifestSchema::Standard => {
            if header_fields.len() < 2 || header_fields[0] != "id" {
                return Err(PipelineError::Manifest {
                    path: path.to_path_buf(),
                    line: 1,
                    reason: format!("expected header id,label1[,label2,...], got {header_fields:?}"),
                });
            }
            header_fields.len() - 1
        }
        ManifestSchema::BreastPathQ => {
            if header_fields != ["slide", "rid", "y"] {
                return Err(PipelineError::Manifest {
                    path: path.to_path_buf(),
                    line: 1,
                    reason: format!("expected header slide,rid,y, got {header_fields:?}"),
                });
            }
            1
        }
    };
    let mut ids = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_labels];
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| PipelineError::File {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err_at = |reason: String| PipelineError::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let (id, values): (String, Vec<&str>) = match schema {
            ManifestSchema::Standard => {
                if record.len() != n_labels + 1 {
                    return Err(err_at(format!("expected {} fields, got {}", n_labels + 1, record.len())));
                }
                (record[0].to_string(), record.iter().skip(1).collect())
            }
            ManifestSchema::BreastPathQ => {
                if record.len() != 3 {
                    return Err(err_at(format!("expected 3 fields, got {}", record.len())));
                }
                (format!("{}_{}", &record[0], &record[1]), vec![&record[2]])
            }
        };
        if !seen.insert(id.clone()) {
            return Err(err_at(format!("duplicate id '{id}'")));
        }
        for (c, text) in values.iter().enumerate() {
            columns[c].push(parse_label(path, line, text)?);
        }
        ids.push(id);
    }
    Ok((ids, columns))
}

//! Cumulative rotation-session workflow.
//!
//! A session draws 30 fresh angles from the ledger pool, renders their
//! lossless rotations for every base image, appends them to the cumulative
//! training manifest, reloads the previous weights into a freshly
//! constructed network, trains, and evaluates PK on the held-out set.
//! After s sessions the cumulative manifest holds `base * (4 + 30s)` rows
//! (4 baseline rotations plus 30 per session), and no angle is ever
//! reused.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::augment::{sample_session_angles, ANGLES_PER_SESSION};
use crate::metric::{average_pk, AveragePk};
use crate::models::{build, ModelKind};
use crate::nn::{load_weights, save_weights, train, TrainConfig, TrainLog};
use crate::seeds;

use super::{
    augment_with_angles, baseline_augment, load_manifest, predict, save_manifest, source_key,
    Manifest, ManifestDataset, ManifestSchema, PipelineError,
};

/// Persistent state of a session chain, stored as a `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    /// Completed sessions.
    pub session_index: u32,
    pub seed: u64,
    pub model: ModelKind,
    pub size: usize,
    pub weights_path: PathBuf,
    pub val_manifest: PathBuf,
    pub cumulative_manifest: PathBuf,
    pub ledger_path: PathBuf,
    pub rotations_dir: PathBuf,
    pub cumulative_rotation_count: u32,
    state_path: PathBuf,
}

impl SessionState {
    pub fn state_path(&self) -> &Path {
        &self.state_path
    }

    pub fn save(&self) -> Result<(), PipelineError> {
        let mut text = String::new();
        let _ = writeln!(text, "session_index = {}", self.session_index);
        let _ = writeln!(text, "seed = {}", self.seed);
        let _ = writeln!(text, "model = {}", self.model);
        let _ = writeln!(text, "size = {}", self.size);
        let _ = writeln!(text, "weights = {}", self.weights_path.display());
        let _ = writeln!(text, "val_manifest = {}", self.val_manifest.display());
        let _ = writeln!(text, "cumulative_manifest = {}", self.cumulative_manifest.display());
        let _ = writeln!(text, "ledger = {}", self.ledger_path.display());
        let _ = writeln!(text, "rotations_dir = {}", self.rotations_dir.display());
        let _ = writeln!(text, "cumulative_rotation_count = {}", self.cumulative_rotation_count);
        std::fs::write(&self.state_path, text).map_err(|source| PipelineError::Io {
            path: self.state_path.clone(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut map = std::collections::BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Manifest {
                path: path.to_path_buf(),
                line: (i + 1) as u64,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<&String, PipelineError> {
            map.get(key).ok_or_else(|| PipelineError::File {
                path: path.to_path_buf(),
                reason: format!("missing key '{key}'"),
            })
        };
        let parse_err = |key: &str, v: &str| PipelineError::File {
            path: path.to_path_buf(),
            reason: format!("bad value for '{key}': {v}"),
        };
        Ok(Self {
            session_index: get("session_index")?.parse().map_err(|_| parse_err("session_index", get("session_index").unwrap()))?,
            seed: get("seed")?.parse().map_err(|_| parse_err("seed", get("seed").unwrap()))?,
            model: get("model")?.parse().map_err(|_| parse_err("model", get("model").unwrap()))?,
            size: get("size")?.parse().map_err(|_| parse_err("size", get("size").unwrap()))?,
            weights_path: PathBuf::from(get("weights")?),
            val_manifest: PathBuf::from(get("val_manifest")?),
            cumulative_manifest: PathBuf::from(get("cumulative_manifest")?),
            ledger_path: PathBuf::from(get("ledger")?),
            rotations_dir: PathBuf::from(get("rotations_dir")?),
            cumulative_rotation_count: get("cumulative_rotation_count")?
                .parse()
                .map_err(|_| parse_err("cumulative_rotation_count", get("cumulative_rotation_count").unwrap()))?,
            state_path: path.to_path_buf(),
        })
    }
}

/// One angle per line.
pub fn read_ledger(path: &Path) -> Result<BTreeSet<u16>, PipelineError> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut set = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let angle: u16 = line.parse().map_err(|_| PipelineError::Manifest {
            path: path.to_path_buf(),
            line: (i + 1) as u64,
            reason: format!("'{line}' is not an angle"),
        })?;
        set.insert(angle);
    }
    Ok(set)
}

pub fn write_ledger(path: &Path, ledger: &BTreeSet<u16>) -> Result<(), PipelineError> {
    let mut text = String::new();
    for angle in ledger {
        let _ = writeln!(text, "{angle}");
    }
    std::fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_base(base: &Manifest) -> Result<(), PipelineError> {
    if base.is_empty() {
        return Err(PipelineError::Invalid("base manifest is empty".into()));
    }
    for row in &base.rows {
        if source_key(&row.id) != row.id {
            return Err(PipelineError::Invalid(format!(
                "base manifest must hold unaugmented sources, found rotated id '{}'",
                row.id
            )));
        }
    }
    Ok(())
}

/// Create a session chain: baseline-augment the base manifest into the
/// cumulative training set and record where everything lives.
///
/// `initial_weights` points at the baseline-trained model the first
/// session resumes from; `val_manifest` is the held-out set used for early
/// stopping and PK tracking in every session.
#[allow(clippy::too_many_arguments)]
pub fn init_session(
    state_path: impl AsRef<Path>,
    base: &Manifest,
    model: ModelKind,
    size: usize,
    initial_weights: impl AsRef<Path>,
    val_manifest: impl AsRef<Path>,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<SessionState, PipelineError> {
    check_base(base)?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let baseline = baseline_augment(base, out_dir.join("baseline"))?;
    let cumulative_manifest = out_dir.join("cumulative.csv");
    save_manifest(&baseline, &cumulative_manifest)?;
    let ledger_path = out_dir.join("ledger.txt");
    write_ledger(&ledger_path, &BTreeSet::new())?;
    let state = SessionState {
        session_index: 0,
        seed,
        model,
        size,
        weights_path: initial_weights.as_ref().to_path_buf(),
        val_manifest: val_manifest.as_ref().to_path_buf(),
        cumulative_manifest,
        ledger_path,
        rotations_dir: out_dir.to_path_buf(),
        cumulative_rotation_count: 0,
        state_path: state_path.as_ref().to_path_buf(),
    };
    state.save()?;
    Ok(state)
}

/// Run the next session and persist the updated state.
///
/// The training seed, the angle draw, and the fresh-graph construction all
/// derive from `(state seed, session index)`, so a chain replayed from the
/// same state file reproduces identical weights and PK values.
pub fn run_session(
    state: &mut SessionState,
    base: &Manifest,
    config: &TrainConfig,
) -> Result<(TrainLog, AveragePk), PipelineError> {
    check_base(base)?;
    let next = state.session_index + 1;
    let mut ledger = read_ledger(&state.ledger_path)?;
    let angles = sample_session_angles(state.seed, next, &ledger)?;

    let session_dir = state.rotations_dir.join(format!("session_{next:03}"));
    let new_rows = augment_with_angles(base, &angles, &session_dir)?;
    let mut cumulative = load_manifest(&state.cumulative_manifest, ManifestSchema::Standard)?;
    cumulative.rows.extend(new_rows.rows);
    save_manifest(&cumulative, &state.cumulative_manifest)?;

    // weights re-load into a newly constructed network of the same topology
    let mut graph = build(
        state.model,
        [3, state.size, state.size],
        seeds::derive_indexed(state.seed, "session-reinit", u64::from(next)),
    )?;
    load_weights(&mut graph, &state.weights_path)?;

    let val = load_manifest(&state.val_manifest, ManifestSchema::Standard)?;
    let train_ds = ManifestDataset::new(&cumulative, state.size);
    let val_ds = ManifestDataset::new(&val, state.size);
    let mut cfg = config.clone();
    cfg.seed = seeds::derive_indexed(state.seed, "session-train", u64::from(next));
    let log = train(&mut graph, &train_ds, &val_ds, &cfg)?;

    let preds = predict(&graph, &val, state.size)?;
    let scores: Vec<f64> = preds.iter().map(|(_, v)| *v).collect();
    let pk = average_pk(&val_ds.label_columns(), &scores)?;

    let weights_path = state.rotations_dir.join(format!("weights_s{next:03}.cpkw"));
    save_weights(&graph, &weights_path)?;
    for angle in &angles {
        ledger.insert(angle.degrees());
    }
    write_ledger(&state.ledger_path, &ledger)?;

    state.session_index = next;
    state.cumulative_rotation_count += ANGLES_PER_SESSION as u32;
    state.weights_path = weights_path;
    state.save()?;
    Ok((log, pk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamParams, LossKind, OptimizerKind};

    fn tiny_config(seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 1,
            batch_size: 8,
            early_stop_patience: 1,
            optimizer: OptimizerKind::Adam(AdamParams::default()),
            loss: LossKind::Mse,
            seed,
            train_fraction: 0.8,
        }
    }

    #[test]
    fn state_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.txt");
        let state = SessionState {
            session_index: 3,
            seed: 42,
            model: ModelKind::TinyDeep,
            size: 24,
            weights_path: PathBuf::from("w.cpkw"),
            val_manifest: PathBuf::from("val.csv"),
            cumulative_manifest: PathBuf::from("cum.csv"),
            ledger_path: PathBuf::from("ledger.txt"),
            rotations_dir: PathBuf::from("rots"),
            cumulative_rotation_count: 90,
            state_path: path.clone(),
        };
        state.save().unwrap();
        let loaded = SessionState::load(&path).unwrap();
        assert_eq!(loaded, state);
    }

    #[test]
    fn ledger_round_trips_and_tolerates_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.txt");
        assert!(read_ledger(&path).unwrap().is_empty());
        let set: BTreeSet<u16> = [17, 200, 301].into_iter().collect();
        write_ledger(&path, &set).unwrap();
        assert_eq!(read_ledger(&path).unwrap(), set);
    }

    #[test]
    fn session_chain_grows_cumulative_set_and_ledger() {
        let dir = tempfile::tempdir().unwrap();
        // 4 base images of 24x24 keeps the training cost trivial
        let base = crate::pipeline::generate_synthetic_dataset(4, 24, 11, dir.path().join("base")).unwrap();
        let val = crate::pipeline::generate_synthetic_dataset(4, 24, 12, dir.path().join("val")).unwrap();
        let val_path = dir.path().join("val.csv");
        save_manifest(&val, &val_path).unwrap();

        let graph = build(ModelKind::TinyDeep, [3, 24, 24], 5).unwrap();
        let w0 = dir.path().join("w0.cpkw");
        save_weights(&graph, &w0).unwrap();

        let mut state = init_session(
            dir.path().join("state.txt"),
            &base,
            ModelKind::TinyDeep,
            24,
            &w0,
            &val_path,
            77,
            dir.path().join("sessions"),
        )
        .unwrap();
        let cumulative = load_manifest(&state.cumulative_manifest, ManifestSchema::Standard).unwrap();
        assert_eq!(cumulative.len(), 4 * 4);

        let (log1, pk1) = run_session(&mut state, &base, &tiny_config(1)).unwrap();
        assert_eq!(state.session_index, 1);
        assert_eq!(state.cumulative_rotation_count, 30);
        assert!(!log1.epochs.is_empty());
        assert!((0.0..=1.0).contains(&pk1.mean_pk));
        let cumulative = load_manifest(&state.cumulative_manifest, ManifestSchema::Standard).unwrap();
        assert_eq!(cumulative.len(), 4 * (4 + 30));
        assert_eq!(read_ledger(&state.ledger_path).unwrap().len(), 30);

        let (_, _) = run_session(&mut state, &base, &tiny_config(1)).unwrap();
        let cumulative = load_manifest(&state.cumulative_manifest, ManifestSchema::Standard).unwrap();
        assert_eq!(cumulative.len(), 4 * (4 + 60));
        assert_eq!(read_ledger(&state.ledger_path).unwrap().len(), 60);
    }

    #[test]
    fn identical_chains_reproduce_the_same_pk_sequence() {
        let run_chain = |root: &std::path::Path| -> Vec<f64> {
            let base = crate::pipeline::generate_synthetic_dataset(3, 16, 51, root.join("base")).unwrap();
            let val = crate::pipeline::generate_synthetic_dataset(3, 16, 52, root.join("val")).unwrap();
            let val_path = root.join("val.csv");
            save_manifest(&val, &val_path).unwrap();
            let graph = build(ModelKind::TinyDeep, [3, 16, 16], 5).unwrap();
            let w0 = root.join("w0.cpkw");
            save_weights(&graph, &w0).unwrap();
            let mut state = init_session(
                root.join("state.txt"),
                &base,
                ModelKind::TinyDeep,
                16,
                &w0,
                &val_path,
                909,
                root.join("sessions"),
            )
            .unwrap();
            (0..2)
                .map(|_| run_session(&mut state, &base, &tiny_config(1)).unwrap().1.mean_pk)
                .collect()
        };
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        assert_eq!(run_chain(dir1.path()), run_chain(dir2.path()));
    }

    #[test]
    fn rotated_base_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = crate::pipeline::generate_synthetic_dataset(2, 24, 1, dir.path().join("b")).unwrap();
        let augmented = baseline_augment(&base, dir.path().join("aug")).unwrap();
        let err = check_base(&augmented).unwrap_err();
        assert!(err.to_string().contains("unaugmented"), "{err}");
    }
}

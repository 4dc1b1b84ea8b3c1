//! Run-directory persistence: append-only versioned artifacts, the binary
//! formats for Fisher diagonals and assembled models, and JSON records that
//! tie the stages together.
//!
//! Every artifact is written as `name.v{n}.ext` with `n` one past the highest
//! existing version, and its format tag is appended to `manifest.jsonl`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::TaskSplit;
use crate::error::{Error, Result};
use crate::nn::{
    check_magic, get_f64s, get_u64, load_checkpoint, put_f64s, put_u64, read_spec, save_checkpoint, write_spec, ModelSpec,
};
use crate::pipeline::{AdjustmentMode, AssembledModel, Stage1Output, Stage2Output};
use crate::proxy::{DiagFisher, ProxyBreakdown};

pub const CHECKPOINT_FORMAT: &str = "ltshare-checkpoint/1";
pub const MODEL_FORMAT: &str = "ltshare-model/1";
pub const FISHER_FORMAT: &str = "ltshare-fisher/1";
pub const STAGE1_FORMAT: &str = "ltshare-stage1/1";
pub const STAGE2_FORMAT: &str = "ltshare-stage2/1";
pub const SELECTION_FORMAT: &str = "ltshare-selection/1";
pub const DATASET_FORMAT: &str = "ltshare-dataset-csv/1";
pub const GRID_FORMAT: &str = "ltshare-grid-csv/1";
pub const METRICS_FORMAT: &str = "ltshare-metrics-csv/1";
pub const CONFIG_FORMAT: &str = "ltshare-config/1";

const MODEL_MAGIC: &[u8; 8] = b"LTSMODEL";
const MODEL_VERSION: u32 = 1;
const FISHER_MAGIC: &[u8; 8] = b"LTSFISHR";
const FISHER_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub artifact: String,
    pub format: String,
}

/// A directory of versioned artifacts.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    /// Opens an existing directory without creating it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::MissingArtifact(root));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn versions(&self, name: &str, ext: &str) -> Result<Vec<u32>> {
        let prefix = format!("{name}.v");
        let suffix = format!(".{ext}");
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let file = entry?.file_name();
            let Some(file) = file.to_str() else { continue };
            if let Some(v) = file.strip_prefix(&prefix).and_then(|r| r.strip_suffix(&suffix)) {
                if let Ok(v) = v.parse() {
                    out.push(v);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Path of the next version; nothing is created.
    pub fn next_path(&self, name: &str, ext: &str) -> Result<PathBuf> {
        let v = self.versions(name, ext)?.last().map_or(1, |v| v + 1);
        Ok(self.root.join(format!("{name}.v{v}.{ext}")))
    }

    pub fn latest(&self, name: &str, ext: &str) -> Result<Option<PathBuf>> {
        Ok(self.versions(name, ext)?.last().map(|v| self.root.join(format!("{name}.v{v}.{ext}"))))
    }

    /// Like [`RunDir::latest`] but a missing artifact is an error.
    pub fn require(&self, name: &str, ext: &str) -> Result<PathBuf> {
        self.latest(name, ext)?.ok_or_else(|| Error::MissingArtifact(self.root.join(format!("{name}.v*.{ext}"))))
    }

    /// Resolves a file name recorded by an earlier stage.
    pub fn resolve(&self, file: &str) -> Result<PathBuf> {
        let p = self.root.join(file);
        if !p.exists() {
            return Err(Error::MissingArtifact(p));
        }
        Ok(p)
    }

    /// Writes a new version through `write` and records it in the manifest.
    pub fn write_with(
        &self,
        name: &str,
        ext: &str,
        format: &str,
        write: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<PathBuf> {
        let path = self.next_path(name, ext)?;
        write(&path)?;
        self.record(&path, format)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, format: &str, value: &T) -> Result<PathBuf> {
        self.write_with(name, "json", format, |p| {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
            w.flush()?;
            Ok(())
        })
    }

    pub fn write_text(&self, name: &str, ext: &str, format: &str, text: &str) -> Result<PathBuf> {
        self.write_with(name, ext, format, |p| Ok(fs::write(p, text)?))
    }

    fn record(&self, path: &Path, format: &str) -> Result<()> {
        let entry = ManifestEntry { artifact: file_name(path), format: format.into() };
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join(MANIFEST))?;
        writeln!(f, "{}", serde_json::to_string(&entry)?)?;
        Ok(())
    }

    pub fn manifest(&self) -> Result<Vec<ManifestEntry>> {
        let p = self.root.join(MANIFEST);
        if !p.exists() {
            return Ok(Vec::new());
        }
        fs::read_to_string(p)?.lines().map(|l| Ok(serde_json::from_str(l)?)).collect()
    }
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads a JSON record and checks its `format` field.
pub fn read_tagged_json<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let v: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    match v.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == format => Ok(serde_json::from_value(v)?),
        Some(f) => Err(Error::Format(format!("{}: expected {format}, found {f}", path.display()))),
        None => Err(Error::Format(format!("{}: no format tag", path.display()))),
    }
}

pub fn write_fisher(w: &mut impl Write, a: &DiagFisher, b: &DiagFisher) -> Result<()> {
    w.write_all(FISHER_MAGIC)?;
    w.write_all(&FISHER_VERSION.to_le_bytes())?;
    put_u64(w, a.sample_count as u64)?;
    put_f64s(w, &a.values)?;
    put_u64(w, b.sample_count as u64)?;
    put_f64s(w, &b.values)
}

/// `limit` bounds each array length so a corrupt header cannot force a huge allocation.
pub fn read_fisher(r: &mut impl Read, limit: usize) -> Result<(DiagFisher, DiagFisher)> {
    check_magic(r, FISHER_MAGIC, FISHER_VERSION)?;
    let na = get_u64(r)? as usize;
    let a = DiagFisher::new(get_f64s(r, limit)?, na).map_err(|e| Error::Format(e.to_string()))?;
    let nb = get_u64(r)? as usize;
    let b = DiagFisher::new(get_f64s(r, limit)?, nb).map_err(|e| Error::Format(e.to_string()))?;
    Ok((a, b))
}

fn put_usizes(w: &mut impl Write, xs: &[usize]) -> Result<()> {
    put_u64(w, xs.len() as u64)?;
    xs.iter().try_for_each(|&x| put_u64(w, x as u64))
}

fn get_usizes(r: &mut impl Read, limit: usize) -> Result<Vec<usize>> {
    let n = get_u64(r)? as usize;
    if n > limit {
        return Err(Error::Format(format!("index list length {n} exceeds limit {limit}")));
    }
    (0..n).map(|_| get_u64(r).map(|v| v as usize)).collect()
}

/// Layout: magic `LTSMODEL`, `u32` version, the network spec as in parameter
/// checkpoints, `u64` C, head and tail class lists, priors, `f64` tau, `u8`
/// adjustment tag, then encoder, decoder A and decoder B arrays.
pub fn write_model(w: &mut impl Write, m: &AssembledModel) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    write_spec(w, &m.spec)?;
    put_u64(w, m.c as u64)?;
    put_usizes(w, &m.split.head)?;
    put_usizes(w, &m.split.tail)?;
    put_f64s(w, &m.priors)?;
    w.write_all(&m.tau.to_le_bytes())?;
    w.write_all(&[match m.adjustment {
        AdjustmentMode::Training => 0u8,
        AdjustmentMode::PostHoc => 1u8,
    }])?;
    put_f64s(w, &m.encoder)?;
    put_f64s(w, &m.decoder_a)?;
    put_f64s(w, &m.decoder_b)
}

pub fn read_model(r: &mut impl Read) -> Result<AssembledModel> {
    check_magic(r, MODEL_MAGIC, MODEL_VERSION)?;
    let spec: ModelSpec = read_spec(r)?;
    let c = get_u64(r)? as usize;
    if c > spec.depth() {
        return Err(Error::Format(format!("shared depth {c} exceeds trunk depth {}", spec.depth())));
    }
    let k = spec.head_dims.0 + spec.head_dims.1;
    let head = get_usizes(r, k)?;
    let tail = get_usizes(r, k)?;
    let priors = get_f64s(r, k)?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let tau = f64::from_le_bytes(b);
    let mut tag = [0u8];
    r.read_exact(&mut tag)?;
    let adjustment = match tag[0] {
        0 => AdjustmentMode::Training,
        1 => AdjustmentMode::PostHoc,
        t => return Err(Error::Format(format!("unknown adjustment tag {t}"))),
    };
    let encoder = get_f64s(r, spec.total_params())?;
    let decoder_a = get_f64s(r, spec.total_params())?;
    let decoder_b = get_f64s(r, spec.total_params())?;
    let split = TaskSplit { head, tail };
    let mut seen = vec![false; k];
    for &cls in split.head.iter().chain(&split.tail) {
        if cls >= k || std::mem::replace(&mut seen[cls], true) {
            return Err(Error::Format("class split is not a partition".into()));
        }
    }
    if split.head.len() != spec.head_dims.0
        || priors.len() != k
        || encoder.len() != spec.encoder_params(c)
        || decoder_a.len() != spec.decoder_params(crate::nn::Task::A, c)
        || decoder_b.len() != spec.decoder_params(crate::nn::Task::B, c)
    {
        return Err(Error::Format("model arrays do not match the recorded architecture".into()));
    }
    Ok(AssembledModel { spec, c, split, encoder, decoder_a, decoder_b, priors, tau, adjustment })
}

pub fn save_model(path: &Path, m: &AssembledModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AssembledModel> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    read_model(&mut BufReader::new(File::open(path)?))
}

/// Stage-1 metadata; the parameters and Fishers live in the files it names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Record {
    pub format: String,
    pub train_data: String,
    pub checkpoint_a: String,
    pub checkpoint_b: String,
    pub fisher: String,
    pub split: TaskSplit,
    pub priors: Vec<f64>,
    pub sample_count: usize,
    pub losses_a: Vec<f64>,
    pub losses_b: Vec<f64>,
}

/// Writes both checkpoints, the Fisher file and the metadata record; returns
/// the record path.
pub fn save_stage1(dir: &RunDir, s1: &Stage1Output, train_data: &str) -> Result<PathBuf> {
    let ca = dir.write_with("stage1_a", "ckpt", CHECKPOINT_FORMAT, |p| save_checkpoint(p, &s1.spec, &s1.params_a))?;
    let cb = dir.write_with("stage1_b", "ckpt", CHECKPOINT_FORMAT, |p| save_checkpoint(p, &s1.spec, &s1.params_b))?;
    let fi = dir.write_with("fisher", "bin", FISHER_FORMAT, |p| {
        let mut w = BufWriter::new(File::create(p)?);
        write_fisher(&mut w, &s1.fisher_a, &s1.fisher_b)?;
        w.flush()?;
        Ok(())
    })?;
    let rec = Stage1Record {
        format: STAGE1_FORMAT.into(),
        train_data: train_data.into(),
        checkpoint_a: file_name(&ca),
        checkpoint_b: file_name(&cb),
        fisher: file_name(&fi),
        split: s1.split.clone(),
        priors: s1.priors.clone(),
        sample_count: s1.sample_count,
        losses_a: s1.losses_a.clone(),
        losses_b: s1.losses_b.clone(),
    };
    dir.write_json("stage1", STAGE1_FORMAT, &rec)
}

pub fn load_stage1(dir: &RunDir, record: &Path) -> Result<(Stage1Record, Stage1Output)> {
    let rec: Stage1Record = read_tagged_json(record, STAGE1_FORMAT)?;
    let (spec, params_a) = load_checkpoint(&dir.resolve(&rec.checkpoint_a)?)?;
    let (spec_b, params_b) = load_checkpoint(&dir.resolve(&rec.checkpoint_b)?)?;
    if spec != spec_b {
        return Err(Error::Structure("stage-1 checkpoints disagree on the architecture".into()));
    }
    let fisher_path = dir.resolve(&rec.fisher)?;
    let (fisher_a, fisher_b) = read_fisher(&mut BufReader::new(File::open(fisher_path)?), spec.total_params())?;
    if fisher_a.len() != spec.total_params() || fisher_b.len() != spec.total_params() {
        return Err(Error::Structure("Fisher length does not match the checkpoint".into()));
    }
    let s1 = Stage1Output {
        spec,
        split: rec.split.clone(),
        priors: rec.priors.clone(),
        params_a,
        params_b,
        fisher_a,
        fisher_b,
        sample_count: rec.sample_count,
        losses_a: rec.losses_a.clone(),
        losses_b: rec.losses_b.clone(),
    };
    Ok((rec, s1))
}

/// The chosen structure plus the grid it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub format: String,
    pub stage1: String,
    pub grid: String,
    pub c: usize,
    pub w_a: f64,
    pub best: ProxyBreakdown,
    pub c_candidates: Vec<usize>,
    pub w_candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Record {
    pub format: String,
    pub stage1: String,
    pub selection: String,
    pub checkpoint: String,
    pub w_a: f64,
    pub epoch_losses: Vec<f64>,
}

pub fn save_stage2(dir: &RunDir, s2: &Stage2Output, spec: &ModelSpec, stage1: &str, selection: &str) -> Result<PathBuf> {
    let ck = dir.write_with("stage2", "ckpt", CHECKPOINT_FORMAT, |p| save_checkpoint(p, spec, &s2.params))?;
    let rec = Stage2Record {
        format: STAGE2_FORMAT.into(),
        stage1: stage1.into(),
        selection: selection.into(),
        checkpoint: file_name(&ck),
        w_a: s2.w_a,
        epoch_losses: s2.epoch_losses.clone(),
    };
    dir.write_json("stage2", STAGE2_FORMAT, &rec)
}

pub fn load_stage2(dir: &RunDir, record: &Path) -> Result<(Stage2Record, Stage2Output)> {
    let rec: Stage2Record = read_tagged_json(record, STAGE2_FORMAT)?;
    let (_, params) = load_checkpoint(&dir.resolve(&rec.checkpoint)?)?;
    let s2 = Stage2Output { params, w_a: rec.w_a, epoch_losses: rec.epoch_losses.clone() };
    Ok((rec, s2))
}

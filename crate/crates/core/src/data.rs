//! Long-tailed Gaussian-mixture data with known posteriors, head/tail splits
//! and per-task label projection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Batch;
use crate::numerics::log_sum_exp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub num_classes: usize,
    pub input_dim: usize,
    pub imbalance_ratio: f64,
    /// Sample count of the most frequent class.
    pub n_max: usize,
    pub class_mean_scale: f64,
    pub noise_sigma: f64,
    /// When set, class means are drawn inside a random subspace of this dimension.
    pub latent_dim: Option<usize>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            input_dim: 8,
            imbalance_ratio: 10.0,
            n_max: 200,
            class_mean_scale: 1.5,
            noise_sigma: 1.0,
            latent_dim: None,
            seed: 0,
        }
    }
}

impl GenConfig {
    /// Exponential profile `n_k = round(n_max * IR^(-k/(K-1)))`.
    pub fn class_counts(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let k = self.num_classes;
        let counts: Vec<usize> = (0..k)
            .map(|i| {
                let frac = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
                (self.n_max as f64 * self.imbalance_ratio.powf(-frac)).round() as usize
            })
            .collect();
        if counts[k - 1] == 0 {
            return Err(Error::Config(format!(
                "least frequent class rounds to zero samples (n_max {}, IR {})",
                self.n_max, self.imbalance_ratio
            )));
        }
        Ok(counts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        if !(self.imbalance_ratio >= 1.0) {
            return Err(Error::Config("imbalance ratio must be >= 1".into()));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::Config("noise_sigma must be positive".into()));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be positive".into()));
        }
        if let Some(r) = self.latent_dim {
            if r == 0 || r > self.input_dim {
                return Err(Error::Config(format!("latent_dim {r} must lie in 1..={}", self.input_dim)));
            }
        }
        Ok(())
    }
}

/// Isotropic Gaussian mixture: the ground truth behind a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    /// One mean per class, each of length `input_dim`.
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
    pub priors: Vec<f64>,
}

impl Generator {
    /// Realizes the class means from `cfg.seed`; priors follow the class counts.
    pub fn from_config(cfg: &GenConfig) -> Result<Self> {
        let counts = cfg.class_counts()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let means = match cfg.latent_dim {
            None => (0..cfg.num_classes)
                .map(|_| (0..cfg.input_dim).map(|_| cfg.class_mean_scale * normal()).collect())
                .collect(),
            Some(r) => {
                // basis entries N(0, 1/r) keep each mean coordinate at variance scale^2
                let basis: Vec<f64> = (0..cfg.input_dim * r).map(|_| normal() / (r as f64).sqrt()).collect();
                (0..cfg.num_classes)
                    .map(|_| {
                        let z: Vec<f64> = (0..r).map(|_| normal()).collect();
                        (0..cfg.input_dim)
                            .map(|i| cfg.class_mean_scale * (0..r).map(|j| basis[i * r + j] * z[j]).sum::<f64>())
                            .collect()
                    })
                    .collect()
            }
        };
        let n: usize = counts.iter().sum();
        let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(Self { means, sigma: cfg.noise_sigma, priors })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn input_dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Bayes posterior over classes at `y`.
    pub fn posterior(&self, y: &[f64]) -> Vec<f64> {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut logits: Vec<f64> = self
            .means
            .iter()
            .zip(&self.priors)
            .map(|(m, &p)| {
                let d2: f64 = m.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                p.ln() - d2 * inv
            })
            .collect();
        let lse = log_sum_exp(&logits);
        for l in &mut logits {
            *l = (*l - lse).exp();
        }
        logits
    }

    fn draw_point(&self, class: usize, rng: &mut impl Rng, out: &mut Vec<f64>) {
        for &m in &self.means[class] {
            out.push(m + self.sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }

    /// Exactly `counts[k]` points of class `k`, rows grouped by class.
    pub fn sample_stratified(&self, counts: &[usize], seed: u64) -> LongTailDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = counts.iter().sum();
        let d = self.input_dim();
        let mut x = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                self.draw_point(k, &mut rng, &mut x);
                labels.push(k);
            }
        }
        LongTailDataset::from_parts(Matrix::from_vec(n, d, x), labels, self.num_classes())
            .expect("generator labels are in range")
    }

    /// `n` i.i.d. draws from the mixture (labels from the priors).
    pub fn sample_iid(&self, n: usize, seed: u64) -> LongTailDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.input_dim();
        let mut x = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.num_classes() - 1;
            for (j, &p) in self.priors.iter().enumerate() {
                acc += p;
                if u < acc {
                    k = j;
                    break;
                }
            }
            self.draw_point(k, &mut rng, &mut x);
            labels.push(k);
        }
        LongTailDataset::from_parts(Matrix::from_vec(n, d, x), labels, self.num_classes())
            .expect("generator labels are in range")
    }

    /// Features only, i.i.d. from the marginal `Q_Y`.
    pub fn sample_features(&self, n: usize, seed: u64) -> Matrix {
        self.sample_iid(n, seed).features
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(w, &GeneratorFile { format: GENERATOR_FORMAT.into(), generator: self.clone() })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let f: GeneratorFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if f.format != GENERATOR_FORMAT {
            return Err(Error::Format(format!("unsupported generator format {}", f.format)));
        }
        Ok(f.generator)
    }
}

const GENERATOR_FORMAT: &str = "ltshare-generator/1";

#[derive(Serialize, Deserialize)]
struct GeneratorFile {
    format: String,
    generator: Generator,
}

/// Single-label dataset with one-hot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTailDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub class_counts: Vec<usize>,
    pub generator: Option<Generator>,
}

impl LongTailDataset {
    pub fn from_parts(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Structure("feature and label counts differ".into()));
        }
        let mut class_counts = vec![0; num_classes];
        for (i, &l) in labels.iter().enumerate() {
            if l >= num_classes {
                return Err(Error::Ingest { line: i + 1, msg: format!("label {l} out of range 0..{num_classes}") });
            }
            class_counts[l] += 1;
        }
        Ok(Self { features, labels, num_classes, class_counts, generator: None })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn priors(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.class_counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn one_hot(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), self.num_classes);
        for (i, &l) in self.labels.iter().enumerate() {
            m.set(i, l, 1.0);
        }
        m
    }

    /// Training batch with the head/tail label projections.
    pub fn to_batch(&self, split: &TaskSplit) -> Batch {
        let (z_a, z_b) = project_labels(&self.one_hot(), split);
        Batch { features: self.features.clone(), z_a, z_b, sample_weights: None }
    }

    pub fn subset(&self, idx: &[usize]) -> LongTailDataset {
        let labels: Vec<usize> = idx.iter().map(|&i| self.labels[i]).collect();
        let mut d = LongTailDataset::from_parts(self.features.select_rows(idx), labels, self.num_classes)
            .expect("labels already validated");
        d.generator = self.generator.clone();
        d
    }

    /// Rows are feature values followed by the integer class label.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for (row, &l) in self.features.iter_rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(l.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}

/// Generates the long-tailed dataset described by `cfg`.
pub fn generate(cfg: &GenConfig) -> Result<LongTailDataset> {
    let generator = Generator::from_config(cfg)?;
    let counts = cfg.class_counts()?;
    let mut ds = generator.sample_stratified(&counts, cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    ds.generator = Some(generator);
    Ok(ds)
}

/// Parses feature columns followed by an integer label. `num_classes` of
/// `None` infers `K = max label + 1`.
pub fn read_csv(r: impl Read, num_classes: Option<usize>) -> Result<LongTailDataset> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, rec) in rd.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Ingest { line, msg: e.to_string() })?;
        if rec.len() < 2 {
            return Err(Error::Ingest { line, msg: "need at least one feature and a label".into() });
        }
        let d = rec.len() - 1;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::Ingest { line, msg: format!("expected {w} features, found {d}") });
            }
            _ => {}
        }
        for f in rec.iter().take(d) {
            let v: f64 = f.parse().map_err(|_| Error::Ingest { line, msg: format!("bad feature value {f:?}") })?;
            features.push(v);
        }
        let lab = &rec[d];
        let l: usize = lab.parse().map_err(|_| Error::Ingest { line, msg: format!("bad label {lab:?}") })?;
        if let Some(k) = num_classes {
            if l >= k {
                return Err(Error::Ingest { line, msg: format!("label {l} out of range 0..{k}") });
            }
        }
        labels.push(l);
    }
    let d = width.unwrap_or(0);
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    LongTailDataset::from_parts(Matrix::from_vec(labels.len(), d, features), labels, k)
}

pub fn load_csv(path: &Path, num_classes: Option<usize>) -> Result<LongTailDataset> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    read_csv(BufReader::new(File::open(path)?), num_classes)
}

/// Seeded stratified split. Each class sends `round(fraction * n_k)` rows to
/// the test side. Returns `(train, test)` with rows in original order.
pub fn holdout_split(ds: &LongTailDataset, fraction: f64, seed: u64) -> Result<(LongTailDataset, LongTailDataset)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("holdout fraction {fraction} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; ds.len()];
    for k in 0..ds.num_classes {
        let mut rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == k).collect();
        rows.shuffle(&mut rng);
        let take = (fraction * rows.len() as f64).round() as usize;
        for &i in &rows[..take] {
            is_test[i] = true;
        }
    }
    let train: Vec<usize> = (0..ds.len()).filter(|&i| !is_test[i]).collect();
    let test: Vec<usize> = (0..ds.len()).filter(|&i| is_test[i]).collect();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Ordered head (task A) and tail (task B) class lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplit {
    pub head: Vec<usize>,
    pub tail: Vec<usize>,
}

impl TaskSplit {
    pub fn num_classes(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    /// `(is_head, position within its group)` for every original class.
    pub fn locate(&self, class: usize) -> Option<(bool, usize)> {
        if let Some(p) = self.head.iter().position(|&c| c == class) {
            return Some((true, p));
        }
        self.tail.iter().position(|&c| c == class).map(|p| (false, p))
    }

    pub fn group(&self, task: crate::nn::Task) -> &[usize] {
        match task {
            crate::nn::Task::A => &self.head,
            crate::nn::Task::B => &self.tail,
        }
    }
}

/// Sorts classes by descending count (stable, so ties keep ascending index)
/// and gives the first `ceil(K/2)` to the head task.
pub fn split_classes(class_counts: &[usize]) -> Result<TaskSplit> {
    let k = class_counts.len();
    if k < 2 {
        return Err(Error::Config("need at least two classes to split".into()));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| class_counts[b].cmp(&class_counts[a]));
    let n_head = k.div_ceil(2);
    Ok(TaskSplit { head: order[..n_head].to_vec(), tail: order[n_head..].to_vec() })
}

/// Restricts one-hot rows to the head and tail columns, in split order.
pub fn project_labels(one_hot: &Matrix, split: &TaskSplit) -> (Matrix, Matrix) {
    (one_hot.select_cols(&split.head), one_hot.select_cols(&split.tail))
}

/// Inverse of [`project_labels`].
pub fn unproject_labels(z_a: &Matrix, z_b: &Matrix, split: &TaskSplit) -> Matrix {
    let mut out = Matrix::zeros(z_a.rows(), split.num_classes());
    for i in 0..z_a.rows() {
        for (j, &c) in split.head.iter().enumerate() {
            out.set(i, c, z_a.get(i, j));
        }
        for (j, &c) in split.tail.iter().enumerate() {
            out.set(i, c, z_b.get(i, j));
        }
    }
    out
}

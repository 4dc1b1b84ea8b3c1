use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{accumulate, Workspace};
use super::{Batch, ModelSpec, ParamVector, Task};
use crate::error::{Error, Result};

/// Weighted two-task BCE objective with per-class additive logit offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub w_a: f64,
    pub w_b: f64,
    pub offsets_a: Vec<f64>,
    pub offsets_b: Vec<f64>,
}

impl Objective {
    /// Zero offsets.
    pub fn new(w_a: f64, w_b: f64, spec: &ModelSpec) -> Self {
        Self { w_a, w_b, offsets_a: vec![0.0; spec.head_dims.0], offsets_b: vec![0.0; spec.head_dims.1] }
    }

    pub fn single(task: Task, spec: &ModelSpec) -> Self {
        match task {
            Task::A => Self::new(1.0, 0.0, spec),
            Task::B => Self::new(0.0, 1.0, spec),
        }
    }

    pub fn with_offsets(mut self, offsets_a: Vec<f64>, offsets_b: Vec<f64>) -> Self {
        self.offsets_a = offsets_a;
        self.offsets_b = offsets_b;
        self
    }

    pub fn offsets(&self, task: Task) -> &[f64] {
        match task {
            Task::A => &self.offsets_a,
            Task::B => &self.offsets_b,
        }
    }

    pub fn offsets_mut(&mut self, task: Task) -> &mut Vec<f64> {
        match task {
            Task::A => &mut self.offsets_a,
            Task::B => &mut self.offsets_b,
        }
    }

    pub(crate) fn check(&self, spec: &ModelSpec) -> Result<()> {
        if !(self.w_a >= 0.0 && self.w_b >= 0.0) {
            return Err(Error::Domain("task weights must be nonnegative".into()));
        }
        if self.offsets_a.len() != spec.head_dims.0 || self.offsets_b.len() != spec.head_dims.1 {
            return Err(Error::Structure("logit offsets do not match head widths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, momentum: 0.9, epochs: 60, batch_size: 32, seed: 0 }
    }
}

/// Which parameter blocks a training call may update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask(Vec<bool>);

impl BlockMask {
    pub fn all(spec: &ModelSpec) -> Self {
        Self(vec![true; spec.block_count()])
    }

    /// Trunk layers `C+1..=L` and both heads.
    pub fn decoders(spec: &ModelSpec, c: usize) -> Self {
        Self((0..spec.block_count()).map(|b| b >= c).collect())
    }

    /// Trunk layers `C+1..=L` and the head of `task`.
    pub fn task_decoder(spec: &ModelSpec, c: usize, task: Task) -> Self {
        let other = spec.head_block(task.other());
        Self((0..spec.block_count()).map(|b| b >= c && b != other).collect())
    }

    pub fn from_fn(spec: &ModelSpec, f: impl Fn(usize) -> bool) -> Self {
        Self((0..spec.block_count()).map(f).collect())
    }

    pub fn is_trainable(&self, block: usize) -> bool {
        self.0[block]
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ParamVector,
    /// Mean objective over the mini-batches of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD with momentum on `obj`, updating only blocks in `mask`.
///
/// Every row contributes to both task terms. Batch order comes from a
/// per-call ChaCha stream seeded with `opt.seed`, reshuffled every epoch.
pub fn train(
    params: &ParamVector,
    spec: &ModelSpec,
    data: &Batch,
    obj: &Objective,
    opt: &OptimConfig,
    mask: &BlockMask,
) -> Result<TrainReport> {
    if !params.is_consistent_with(spec) {
        return Err(Error::Structure("parameter layout does not match model spec".into()));
    }
    if data.features.cols() != spec.input_dim
        || data.z_a.cols() != spec.head_dims.0
        || data.z_b.cols() != spec.head_dims.1
    {
        return Err(Error::Structure("training data does not match model spec".into()));
    }
    obj.check(spec)?;
    if opt.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }

    let mut params = params.clone();
    let n = data.len();
    let mut epoch_losses = Vec::with_capacity(opt.epochs);
    if n == 0 || opt.epochs == 0 {
        return Ok(TrainReport { params, epoch_losses });
    }

    let ranges: Vec<_> = params
        .blocks()
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask.is_trainable(i))
        .map(|(_, b)| b.range())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new();
    let (in_dim, ka, kb) = (spec.input_dim, spec.head_dims.0, spec.head_dims.1);
    let mut xb = Vec::new();
    let mut zab = Vec::new();
    let mut zbb = Vec::new();
    let mut swb = Vec::new();

    for epoch in 0..opt.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(opt.batch_size) {
            xb.clear();
            zab.clear();
            zbb.clear();
            swb.clear();
            for &i in chunk {
                xb.extend_from_slice(&data.features.row(i)[..in_dim]);
                zab.extend_from_slice(&data.z_a.row(i)[..ka]);
                zbb.extend_from_slice(&data.z_b.row(i)[..kb]);
                if let Some(w) = &data.sample_weights {
                    swb.push(w[i]);
                }
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let sw = data.sample_weights.as_ref().map(|_| &swb[..]);
            let (la, lb) = accumulate(
                params.values(),
                params.blocks(),
                spec,
                &xb,
                [(obj.w_a > 0.0).then_some(&zab[..]), (obj.w_b > 0.0).then_some(&zbb[..])],
                sw,
                chunk.len(),
                obj,
                &mut ws,
                &mut grad,
            );
            let loss = obj.w_a * la + obj.w_b * lb;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            sum += loss;
            batches += 1;
            let values = params.values_mut();
            for r in &ranges {
                for j in r.clone() {
                    velocity[j] = opt.momentum * velocity[j] + grad[j];
                    values[j] -= opt.learning_rate * velocity[j];
                }
            }
        }
        let mean = sum / batches as f64;
        if params.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport { params, epoch_losses })
}

//! Minimal dense two-head network with manual backpropagation.
//!
//! The parameter layout is a flat `f64` array split into blocks: one block per
//! trunk layer (in depth order), then the task-A head, then the task-B head.
//! Each block stores its weight matrix row-major (`out x in`) followed by the
//! bias vector. The shared encoder of depth `C` is therefore always a prefix
//! of the flat array.

mod checkpoint;
mod network;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub(crate) use checkpoint::{check_magic, get_f64s, get_u64, put_f64s, put_u64, read_spec, write_spec};
pub use network::{bce_loss_grad, forward, joint_loss_grad, per_sample_score, JointLoss, Workspace};
pub use train::{train, BlockMask, Objective, OptimConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub(crate) fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// One of the two label groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    A,
    B,
}

impl Task {
    pub fn other(self) -> Task {
        match self {
            Task::A => Task::B,
            Task::B => Task::A,
        }
    }
}

/// Architecture of the two-head network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub trunk_widths: Vec<usize>,
    pub activation: Activation,
    /// Output widths of the (head, tail) classifiers.
    pub head_dims: (usize, usize),
}

impl ModelSpec {
    pub fn new(input_dim: usize, trunk_widths: Vec<usize>, activation: Activation, head_dims: (usize, usize)) -> Result<Self> {
        let spec = Self { input_dim, trunk_widths, activation, head_dims };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Structure("input_dim must be positive".into()));
        }
        if self.trunk_widths.is_empty() {
            return Err(Error::Structure("trunk needs at least one layer".into()));
        }
        if self.trunk_widths.contains(&0) {
            return Err(Error::Structure("trunk widths must be positive".into()));
        }
        if self.head_dims.0 == 0 || self.head_dims.1 == 0 {
            return Err(Error::Structure("both heads need at least one class".into()));
        }
        Ok(())
    }

    /// Trunk depth `L`.
    pub fn depth(&self) -> usize {
        self.trunk_widths.len()
    }

    pub fn head_dim(&self, task: Task) -> usize {
        match task {
            Task::A => self.head_dims.0,
            Task::B => self.head_dims.1,
        }
    }

    pub fn block_count(&self) -> usize {
        self.depth() + 2
    }

    pub fn head_block(&self, task: Task) -> usize {
        match task {
            Task::A => self.depth(),
            Task::B => self.depth() + 1,
        }
    }

    /// `(fan_in, fan_out)` of every block in layout order.
    pub fn block_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.block_count());
        let mut fan_in = self.input_dim;
        for &w in &self.trunk_widths {
            shapes.push((fan_in, w));
            fan_in = w;
        }
        shapes.push((fan_in, self.head_dims.0));
        shapes.push((fan_in, self.head_dims.1));
        shapes
    }

    pub fn block_index(&self) -> Vec<Block> {
        let mut offset = 0;
        self.block_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let b = Block { offset, fan_in, fan_out };
                offset += b.len();
                b
            })
            .collect()
    }

    /// Length of the flat two-head parameter array.
    pub fn total_params(&self) -> usize {
        self.block_shapes().iter().map(|&(i, o)| (i + 1) * o).sum()
    }

    /// `d_phi(C)`: parameters in trunk layers `1..=C`.
    pub fn encoder_params(&self, c: usize) -> usize {
        assert!(c <= self.depth(), "shared depth {c} exceeds trunk depth {}", self.depth());
        self.block_shapes()[..c].iter().map(|&(i, o)| (i + 1) * o).sum()
    }

    /// `d_psi^t(C)`: trunk layers `C+1..=L` plus the head of `task`.
    pub fn decoder_params(&self, task: Task, c: usize) -> usize {
        self.task_params(task) - self.encoder_params(c)
    }

    /// Parameters of the single-task network (full trunk and one head).
    pub fn task_params(&self, task: Task) -> usize {
        let shapes = self.block_shapes();
        let (i, o) = shapes[self.head_block(task)];
        self.encoder_params(self.depth()) + (i + 1) * o
    }
}

/// Location of one dense layer inside the flat parameter array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let w_end = self.offset + self.fan_in * self.fan_out;
        w_end..w_end + self.fan_out
    }
}

/// Flat parameter storage with its per-layer block table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    blocks: Vec<Block>,
}

impl ParamVector {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self { values: vec![0.0; spec.total_params()], blocks: spec.block_index() }
    }

    pub fn from_values(spec: &ModelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_params() {
            return Err(Error::Structure(format!(
                "parameter count {} does not match spec ({})",
                values.len(),
                spec.total_params()
            )));
        }
        Ok(Self { values, blocks: spec.block_index() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[self.blocks[i].range()]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.blocks[i].range();
        &mut self.values[r]
    }

    /// Union of the first `c` trunk blocks (a prefix of the flat array).
    pub fn encoder_slice(&self, c: usize) -> &[f64] {
        let end = self.encoder_end(c);
        &self.values[..end]
    }

    pub(crate) fn encoder_end(&self, c: usize) -> usize {
        assert!(c + 2 <= self.blocks.len(), "shared depth {c} exceeds trunk depth");
        self.blocks[..c].iter().map(Block::len).sum()
    }

    /// True if the block table fits `spec` exactly.
    pub fn is_consistent_with(&self, spec: &ModelSpec) -> bool {
        self.blocks == spec.block_index() && self.values.len() == spec.total_params()
    }
}

/// Seeded initialization: weights uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`,
/// biases zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamVector::zeros(spec);
    for b in spec.block_index() {
        let scale = 1.0 / (b.fan_in as f64).sqrt();
        for v in &mut params.values[b.weight_range()] {
            *v = rng.random_range(-scale..scale);
        }
    }
    params
}

/// Features plus per-task binary label blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Matrix,
    pub z_a: Matrix,
    pub z_b: Matrix,
    pub sample_weights: Option<Vec<f64>>,
}

impl Batch {
    pub fn new(features: Matrix, z_a: Matrix, z_b: Matrix) -> Result<Self> {
        let b = Self { features, z_a, z_b, sample_weights: None };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self, task: Task) -> &Matrix {
        match task {
            Task::A => &self.z_a,
            Task::B => &self.z_b,
        }
    }

    /// Checks shapes and the single-label property of `[z_A | z_B]`.
    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.z_a.rows() != n || self.z_b.rows() != n {
            return Err(Error::Structure("label rows do not match feature rows".into()));
        }
        if let Some(w) = &self.sample_weights {
            if w.len() != n {
                return Err(Error::Structure("sample weight count does not match rows".into()));
            }
        }
        for i in 0..n {
            let row: Vec<f64> = self.z_a.row(i).iter().chain(self.z_b.row(i)).copied().collect();
            if row.iter().any(|&z| z != 0.0 && z != 1.0) || row.iter().sum::<f64>() != 1.0 {
                return Err(Error::Structure(format!("row {i} is not single-label")));
            }
        }
        Ok(())
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            features: self.features.select_rows(idx),
            z_a: self.z_a.select_rows(idx),
            z_b: self.z_b.select_rows(idx),
            sample_weights: self.sample_weights.as_ref().map(|w| idx.iter().map(|&i| w[i]).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ModelSpec {
        ModelSpec::new(3, vec![4], Activation::Relu, (2, 3)).unwrap()
    }

    #[test]
    fn counts_task_network() {
        let s = spec();
        assert_eq!(s.task_params(Task::A), 26);
        assert_eq!(s.task_params(Task::B), 3 * 4 + 4 + 4 * 3 + 3);
        for c in 0..=s.depth() {
            for t in [Task::A, Task::B] {
                assert_eq!(s.encoder_params(c) + s.decoder_params(t, c), s.task_params(t));
            }
        }
    }

    #[test]
    fn blocks_tile_the_array() {
        let s = ModelSpec::new(5, vec![7, 3, 2], Activation::Tanh, (4, 1)).unwrap();
        let p = init_params(&s, 1);
        let mut next = 0;
        for b in p.blocks() {
            assert_eq!(b.offset, next);
            next += b.len();
        }
        assert_eq!(next, p.len());
        for c in 0..=s.depth() {
            assert_eq!(p.encoder_slice(c).len(), s.encoder_params(c));
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let s = ModelSpec::new(6, vec![5, 4], Activation::Relu, (3, 2)).unwrap();
        let a = init_params(&s, 7);
        let b = init_params(&s, 7);
        assert_eq!(a.values(), b.values());
        for blk in a.blocks() {
            assert!(a.values()[blk.bias_range()].iter().all(|&v| v == 0.0));
            let bound = 1.0 / (blk.fan_in as f64).sqrt();
            assert!(a.values()[blk.weight_range()].iter().all(|v| v.abs() <= bound));
        }
        assert_ne!(init_params(&s, 8).values(), a.values());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ModelSpec::new(0, vec![2], Activation::Relu, (1, 1)).is_err());
        assert!(ModelSpec::new(2, vec![], Activation::Relu, (1, 1)).is_err());
        assert!(ModelSpec::new(2, vec![2, 0], Activation::Relu, (1, 1)).is_err());
        assert!(ModelSpec::new(2, vec![2], Activation::Relu, (0, 1)).is_err());
    }

    #[test]
    fn batch_rejects_multi_label_rows() {
        let x = Matrix::zeros(1, 2);
        let za = Matrix::from_rows(&[[1.0, 0.0]]);
        let zb = Matrix::from_rows(&[[1.0]]);
        assert!(Batch::new(x, za, zb).is_err());
    }
}

//! The three-stage procedure: independent task training with Fisher
//! estimation, proxy-based structure selection, weighted joint training,
//! branch assembly, optional decoder refinement, and prediction.

use serde::{Deserialize, Serialize};

use crate::data::{split_classes, LongTailDataset, TaskSplit};
use crate::error::{Error, Result};
use crate::info::TaskPredictor;
use crate::matrix::Matrix;
use crate::nn::{
    forward, init_params, joint_loss_grad, train, Activation, Batch, BlockMask, ModelSpec, Objective, OptimConfig,
    ParamVector, Task,
};
use crate::proxy::{default_weight_grid, encoder_mismatch, estimate_diag_fisher, grid_search, DiagFisher, GridResult};

/// Where the logit-adjustment offsets are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjustmentMode {
    /// Added to the logits inside the training loss; prediction uses raw logits.
    #[default]
    Training,
    /// Training is unadjusted; `-tau log pi` is added at prediction time.
    PostHoc,
}

/// How Stage 2 is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage2Init {
    /// Same seeded initialization as Stage 1.
    #[default]
    Shared,
    /// Trunk `w_A phi^A + w_B phi^B`, heads from the Stage-1 networks.
    WarmStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trunk_widths: Vec<usize>,
    pub activation: Activation,
    pub init_seed: u64,
    pub stage1: OptimConfig,
    pub stage2: OptimConfig,
    /// `epochs = 0` disables refinement.
    pub refine: OptimConfig,
    pub tau: f64,
    pub adjustment: AdjustmentMode,
    pub stage2_init: Stage2Init,
    /// `None` means every depth `0..=L`.
    pub c_candidates: Option<Vec<usize>>,
    pub w_candidates: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trunk_widths: vec![16, 16],
            activation: Activation::Relu,
            init_seed: 0,
            stage1: OptimConfig::default(),
            stage2: OptimConfig::default(),
            refine: OptimConfig { epochs: 0, ..OptimConfig::default() },
            tau: 1.0,
            adjustment: AdjustmentMode::Training,
            stage2_init: Stage2Init::Shared,
            c_candidates: None,
            w_candidates: default_weight_grid(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.trunk_widths.is_empty() || self.trunk_widths.contains(&0) {
            return Err(Error::Config("trunk widths must be a nonempty list of positive integers".into()));
        }
        for o in [&self.stage1, &self.stage2, &self.refine] {
            if o.batch_size == 0 || !(o.learning_rate > 0.0) || !(0.0..1.0).contains(&o.momentum) {
                return Err(Error::Config("optimizer needs batch_size > 0, lr > 0, momentum in [0, 1)".into()));
            }
        }
        if self.w_candidates.is_empty() || self.w_candidates.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Config("weight candidates must be a nonempty subset of [0, 1]".into()));
        }
        if let Some(cs) = &self.c_candidates {
            if cs.is_empty() {
                return Err(Error::Config("depth candidates must be nonempty".into()));
            }
            if let Some(c) = cs.iter().find(|&&c| c > self.trunk_widths.len()) {
                return Err(Error::Config(format!("depth candidate {c} exceeds trunk depth")));
            }
        }
        Ok(())
    }

    pub fn spec_for(&self, input_dim: usize, split: &TaskSplit) -> Result<ModelSpec> {
        ModelSpec::new(input_dim, self.trunk_widths.clone(), self.activation, (split.head.len(), split.tail.len()))
    }

    pub fn depth_candidates(&self) -> Vec<usize> {
        self.c_candidates.clone().unwrap_or_else(|| (0..=self.trunk_widths.len()).collect())
    }

    fn training_tau(&self) -> f64 {
        match self.adjustment {
            AdjustmentMode::Training => self.tau,
            AdjustmentMode::PostHoc => 0.0,
        }
    }
}

/// `tau * log pi_k` for every class.
pub fn logit_offsets(priors: &[f64], tau: f64) -> Result<Vec<f64>> {
    if priors.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Domain("logit adjustment needs strictly positive priors".into()));
    }
    let s: f64 = priors.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("priors sum to {s}")));
    }
    Ok(priors.iter().map(|p| if tau == 0.0 { 0.0 } else { tau * p.ln() }).collect())
}

fn grouped(offsets: &[f64], split: &TaskSplit) -> (Vec<f64>, Vec<f64>) {
    (split.head.iter().map(|&c| offsets[c]).collect(), split.tail.iter().map(|&c| offsets[c]).collect())
}

/// Everything the later stages need from Stage 1.
#[derive(Debug, Clone)]
pub struct Stage1Output {
    pub spec: ModelSpec,
    pub split: TaskSplit,
    pub priors: Vec<f64>,
    pub params_a: ParamVector,
    pub params_b: ParamVector,
    pub fisher_a: DiagFisher,
    pub fisher_b: DiagFisher,
    pub sample_count: usize,
    pub losses_a: Vec<f64>,
    pub losses_b: Vec<f64>,
}

/// Objective for weights `(w_A, 1 - w_A)` with the configured offsets.
pub fn stage_objective(config: &RunConfig, spec: &ModelSpec, split: &TaskSplit, priors: &[f64], w_a: f64) -> Result<Objective> {
    let (oa, ob) = grouped(&logit_offsets(priors, config.training_tau())?, split);
    Ok(Objective::new(w_a, 1.0 - w_a, spec).with_offsets(oa, ob))
}

/// Trains both tasks from the shared initialization and estimates their
/// diagonal Fishers at the trained parameters.
pub fn stage1(config: &RunConfig, data: &LongTailDataset) -> Result<Stage1Output> {
    config.validate()?;
    let split = split_classes(&data.class_counts)?;
    let priors = data.priors();
    let spec = config.spec_for(data.features.cols(), &split)?;
    let batch = data.to_batch(&split);
    stage1_on_batch(config, &spec, &split, &priors, &batch)
}

/// [`stage1`] on a prepared batch; task A sees only `z_A` and task B only `z_B`.
pub fn stage1_on_batch(
    config: &RunConfig,
    spec: &ModelSpec,
    split: &TaskSplit,
    priors: &[f64],
    batch: &Batch,
) -> Result<Stage1Output> {
    let init = init_params(spec, config.init_seed);
    let mask = BlockMask::all(spec);
    let run = |task: Task| -> Result<(ParamVector, Vec<f64>, DiagFisher)> {
        let w_a = if task == Task::A { 1.0 } else { 0.0 };
        let obj = stage_objective(config, spec, split, priors, w_a)?;
        let rep = train(&init, spec, batch, &obj, &config.stage1, &mask)?;
        let fisher = estimate_diag_fisher(&rep.params, spec, batch, task, obj.offsets(task))?;
        Ok((rep.params, rep.epoch_losses, fisher))
    };
    let (ra, rb) = rayon::join(|| run(Task::A), || run(Task::B));
    let (params_a, losses_a, fisher_a) = ra?;
    let (params_b, losses_b, fisher_b) = rb?;
    Ok(Stage1Output {
        spec: spec.clone(),
        split: split.clone(),
        priors: priors.to_vec(),
        params_a,
        params_b,
        fisher_a,
        fisher_b,
        sample_count: batch.len(),
        losses_a,
        losses_b,
    })
}

/// Proxy grid over the configured candidates.
pub fn select_structure(s1: &Stage1Output, c_candidates: &[usize], w_candidates: &[f64]) -> Result<GridResult> {
    let delta = encoder_mismatch(&s1.params_a, &s1.params_b, s1.spec.depth())?;
    grid_search(&s1.fisher_a, &s1.fisher_b, &delta, s1.sample_count, &s1.spec, c_candidates, w_candidates)
}

#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub params: ParamVector,
    pub w_a: f64,
    pub epoch_losses: Vec<f64>,
}

impl Stage2Output {
    /// The first `C` trunk layers.
    pub fn encoder(&self, c: usize) -> &[f64] {
        self.params.encoder_slice(c)
    }
}

/// Trains the full two-head network on `w_A BCE_A + (1 - w_A) BCE_B`.
pub fn stage2(config: &RunConfig, s1: &Stage1Output, batch: &Batch, w_a: f64) -> Result<Stage2Output> {
    if !(0.0..=1.0).contains(&w_a) {
        return Err(Error::Domain(format!("w_A = {w_a} outside [0, 1]")));
    }
    let spec = &s1.spec;
    let init = match config.stage2_init {
        Stage2Init::Shared => init_params(spec, config.init_seed),
        Stage2Init::WarmStart => {
            let mut p = s1.params_a.clone();
            let trunk = spec.encoder_params(spec.depth());
            let w_b = 1.0 - w_a;
            let (va, vb) = (s1.params_a.values(), s1.params_b.values());
            for j in 0..trunk {
                p.values_mut()[j] = w_a * va[j] + w_b * vb[j];
            }
            let hb = spec.head_block(Task::B);
            p.block_mut(hb).copy_from_slice(s1.params_b.block(hb));
            p
        }
    };
    let obj = stage_objective(config, spec, &s1.split, &s1.priors, w_a)?;
    let rep = train(&init, spec, batch, &obj, &config.stage2, &BlockMask::all(spec))?;
    Ok(Stage2Output { params: rep.params, w_a, epoch_losses: rep.epoch_losses })
}

/// Shared encoder plus two task decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledModel {
    pub spec: ModelSpec,
    pub c: usize,
    pub split: TaskSplit,
    pub encoder: Vec<f64>,
    /// Trunk layers `C+1..=L` then the head, for each task.
    pub decoder_a: Vec<f64>,
    pub decoder_b: Vec<f64>,
    pub priors: Vec<f64>,
    pub tau: f64,
    pub adjustment: AdjustmentMode,
}

impl AssembledModel {
    pub fn decoder(&self, task: Task) -> &[f64] {
        match task {
            Task::A => &self.decoder_a,
            Task::B => &self.decoder_b,
        }
    }

    /// The branch for `task` in the full two-head layout; the other head is zero.
    pub fn branch_params(&self, task: Task) -> ParamVector {
        let mut p = ParamVector::zeros(&self.spec);
        let enc_end = self.encoder.len();
        p.values_mut()[..enc_end].copy_from_slice(&self.encoder);
        let trunk_end = self.spec.encoder_params(self.spec.depth());
        let dec = self.decoder(task);
        let mid = trunk_end - enc_end;
        p.values_mut()[enc_end..trunk_end].copy_from_slice(&dec[..mid]);
        let hb = self.spec.head_block(task);
        p.block_mut(hb).copy_from_slice(&dec[mid..]);
        p
    }

    fn set_decoder_from(&mut self, task: Task, params: &ParamVector) {
        let enc_end = self.encoder.len();
        let trunk_end = self.spec.encoder_params(self.spec.depth());
        let mut dec = params.values()[enc_end..trunk_end].to_vec();
        dec.extend_from_slice(params.block(self.spec.head_block(task)));
        match task {
            Task::A => self.decoder_a = dec,
            Task::B => self.decoder_b = dec,
        }
    }

    /// Offsets used by the training loss, grouped per task.
    pub fn training_offsets(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let tau = match self.adjustment {
            AdjustmentMode::Training => self.tau,
            AdjustmentMode::PostHoc => 0.0,
        };
        Ok(grouped(&logit_offsets(&self.priors, tau)?, &self.split))
    }

    fn inference_offsets(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let tau = match self.adjustment {
            AdjustmentMode::Training => 0.0,
            AdjustmentMode::PostHoc => -self.tau,
        };
        Ok(grouped(&logit_offsets(&self.priors, tau)?, &self.split))
    }

    /// Raw branch logits.
    pub fn logits(&self, features: &Matrix, task: Task) -> Result<Matrix> {
        forward(&self.branch_params(task), &self.spec, features, task)
    }

    /// Scores in original class order used for the argmax.
    pub fn class_scores(&self, features: &Matrix) -> Result<Matrix> {
        let sa = self.logits(features, Task::A)?;
        let sb = self.logits(features, Task::B)?;
        let (oa, ob) = self.inference_offsets()?;
        let mut out = Matrix::zeros(features.rows(), self.split.num_classes());
        for i in 0..features.rows() {
            for (j, &c) in self.split.head.iter().enumerate() {
                out.set(i, c, sa.get(i, j) + oa[j]);
            }
            for (j, &c) in self.split.tail.iter().enumerate() {
                out.set(i, c, sb.get(i, j) + ob[j]);
            }
        }
        Ok(out)
    }

    pub fn predict_batch(&self, features: &Matrix) -> Result<Vec<usize>> {
        Ok(self.class_scores(features)?.iter_rows().map(argmax_first).collect())
    }
}

impl TaskPredictor for AssembledModel {
    /// Logits of the fitted conditional, i.e. with the training-time offsets.
    fn task_logits(&self, features: &Matrix, task: Task) -> Result<Matrix> {
        let mut s = self.logits(features, task)?;
        let (oa, ob) = self.training_offsets()?;
        let off = if task == Task::A { oa } else { ob };
        for i in 0..s.rows() {
            for (v, o) in s.row_mut(i).iter_mut().zip(&off) {
                *v += o;
            }
        }
        Ok(s)
    }
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Stage-2 encoder (layers `1..=C`) with Stage-1 decoders.
pub fn assemble(s1: &Stage1Output, s2: &Stage2Output, c: usize, config: &RunConfig) -> Result<AssembledModel> {
    let spec = &s1.spec;
    if c > spec.depth() {
        return Err(Error::Structure(format!("shared depth {c} exceeds trunk depth {}", spec.depth())));
    }
    if !s2.params.is_consistent_with(spec) || !s1.params_a.is_consistent_with(spec) || !s1.params_b.is_consistent_with(spec) {
        return Err(Error::Structure("stage outputs disagree on the architecture".into()));
    }
    let mut model = AssembledModel {
        spec: spec.clone(),
        c,
        split: s1.split.clone(),
        encoder: s2.encoder(c).to_vec(),
        decoder_a: Vec::new(),
        decoder_b: Vec::new(),
        priors: s1.priors.clone(),
        tau: config.tau,
        adjustment: config.adjustment,
    };
    model.set_decoder_from(Task::A, &s1.params_a);
    model.set_decoder_from(Task::B, &s1.params_b);
    Ok(model)
}

/// Fine-tunes each decoder on its own task with the encoder frozen.
pub fn refine_decoders(model: &AssembledModel, batch: &Batch, opt: &OptimConfig) -> Result<AssembledModel> {
    let mut out = model.clone();
    if opt.epochs == 0 {
        return Ok(out);
    }
    let (oa, ob) = model.training_offsets()?;
    for task in [Task::A, Task::B] {
        let w_a = if task == Task::A { 1.0 } else { 0.0 };
        let obj = Objective::new(w_a, 1.0 - w_a, &model.spec).with_offsets(oa.clone(), ob.clone());
        let mask = BlockMask::task_decoder(&model.spec, model.c, task);
        let rep = train(&model.branch_params(task), &model.spec, batch, &obj, opt, &mask)?;
        out.set_decoder_from(task, &rep.params);
    }
    Ok(out)
}

/// Argmax over the concatenated branch logits mapped back to original class
/// indices; ties go to the smallest class index.
pub fn predict(model: &AssembledModel, y: &[f64]) -> Result<usize> {
    let x = Matrix::from_vec(1, y.len(), y.to_vec());
    Ok(model.predict_batch(&x)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub overall_accuracy: f64,
    pub head_accuracy: f64,
    pub tail_accuracy: f64,
    pub bce_a: f64,
    pub bce_b: f64,
    pub samples: usize,
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "overall_accuracy,head_accuracy,tail_accuracy,bce_a,bce_b,samples";

    pub fn csv_row(&self) -> String {
        format!(
            "{:?},{:?},{:?},{:?},{:?},{}",
            self.overall_accuracy, self.head_accuracy, self.tail_accuracy, self.bce_a, self.bce_b, self.samples
        )
    }
}

/// Accuracy overall and per label group, plus task-wise BCE of the fitted
/// conditional.
pub fn evaluate(model: &AssembledModel, data: &LongTailDataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Domain("evaluation set is empty".into()));
    }
    let pred = model.predict_batch(&data.features)?;
    let (mut hit, mut head_hit, mut head_n, mut tail_hit, mut tail_n) = (0, 0, 0, 0, 0);
    for (&p, &l) in pred.iter().zip(&data.labels) {
        let ok = p == l;
        hit += ok as usize;
        match model.split.locate(l) {
            Some((true, _)) => {
                head_n += 1;
                head_hit += ok as usize;
            }
            _ => {
                tail_n += 1;
                tail_hit += ok as usize;
            }
        }
    }
    let batch = data.to_batch(&model.split);
    let (oa, ob) = model.training_offsets()?;
    let bce = |task: Task, off: Vec<f64>| -> Result<f64> {
        let w_a = if task == Task::A { 1.0 } else { 0.0 };
        let obj = Objective::new(w_a, 1.0 - w_a, &model.spec).with_offsets(off.clone(), off);
        let obj = match task {
            Task::A => Objective { offsets_b: vec![0.0; model.spec.head_dims.1], ..obj },
            Task::B => Objective { offsets_a: vec![0.0; model.spec.head_dims.0], ..obj },
        };
        let jl = joint_loss_grad(&model.branch_params(task), &model.spec, &batch, &obj)?;
        Ok(if task == Task::A { jl.task_a } else { jl.task_b })
    };
    let ratio = |h: usize, n: usize| if n == 0 { f64::NAN } else { h as f64 / n as f64 };
    Ok(Metrics {
        overall_accuracy: ratio(hit, data.len()),
        head_accuracy: ratio(head_hit, head_n),
        tail_accuracy: ratio(tail_hit, tail_n),
        bce_a: bce(Task::A, oa)?,
        bce_b: bce(Task::B, ob)?,
        samples: data.len(),
    })
}

/// Everything produced by one end-to-end run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub stage1: Stage1Output,
    pub selection: GridResult,
    pub stage2: Stage2Output,
    pub assembled: AssembledModel,
    pub model: AssembledModel,
    pub metrics: Option<Metrics>,
}

/// Stage 1, selection, Stage 2, assembly and (if configured) refinement.
pub fn full_run(config: &RunConfig, train_data: &LongTailDataset, test_data: Option<&LongTailDataset>) -> Result<RunOutcome> {
    let s1 = stage1(config, train_data)?;
    let batch = train_data.to_batch(&s1.split);
    let selection = select_structure(&s1, &config.depth_candidates(), &config.w_candidates)?;
    let s2 = stage2(config, &s1, &batch, selection.best.w_a)?;
    let assembled = assemble(&s1, &s2, selection.best.c, config)?;
    let model = refine_decoders(&assembled, &batch, &config.refine)?;
    let metrics = test_data.map(|t| evaluate(&model, t)).transpose()?;
    Ok(RunOutcome { stage1: s1, selection, stage2: s2, assembled, model, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GenConfig};

    fn small() -> (RunConfig, LongTailDataset) {
        let cfg = GenConfig { num_classes: 4, input_dim: 3, imbalance_ratio: 4.0, n_max: 40, class_mean_scale: 3.0, noise_sigma: 1.0, latent_dim: None, seed: 3 };
        let run = RunConfig {
            trunk_widths: vec![6, 5],
            activation: Activation::Tanh,
            stage1: OptimConfig { epochs: 20, ..OptimConfig::default() },
            stage2: OptimConfig { epochs: 20, ..OptimConfig::default() },
            ..RunConfig::default()
        };
        (run, generate(&cfg).unwrap())
    }

    #[test]
    fn offsets_examples() {
        let u = logit_offsets(&[0.25; 4], 1.0).unwrap();
        assert!(u.windows(2).all(|w| w[0] == w[1]));
        assert!(logit_offsets(&[0.9, 0.1], 0.0).unwrap().iter().all(|&o| o == 0.0));
        let o = logit_offsets(&[0.9, 0.1], 1.0).unwrap();
        assert!((o[0] - 0.9f64.ln()).abs() < 1e-15 && (o[1] - 0.1f64.ln()).abs() < 1e-15);
        assert!((o[0] + 0.105360515657826).abs() < 1e-12 && (o[1] + 2.302585092994046).abs() < 1e-12);
        assert!(matches!(logit_offsets(&[1.0, 0.0], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn assembly_at_extremes() {
        let (run, data) = small();
        let s1 = stage1(&run, &data).unwrap();
        let batch = data.to_batch(&s1.split);
        let s2 = stage2(&run, &s1, &batch, 0.5).unwrap();
        let m0 = assemble(&s1, &s2, 0, &run).unwrap();
        assert_eq!(m0.branch_params(Task::A).block(0), s1.params_a.block(0));
        let la = m0.logits(&data.features, Task::A).unwrap();
        assert_eq!(la, forward(&s1.params_a, &s1.spec, &data.features, Task::A).unwrap());
        let lb = m0.logits(&data.features, Task::B).unwrap();
        assert_eq!(lb, forward(&s1.params_b, &s1.spec, &data.features, Task::B).unwrap());

        let l = s1.spec.depth();
        let ml = assemble(&s1, &s2, l, &run).unwrap();
        assert_eq!(ml.decoder_a, s1.params_a.block(s1.spec.head_block(Task::A)));
        assert_eq!(ml.decoder_b, s1.params_b.block(s1.spec.head_block(Task::B)));
        assert_eq!(ml.encoder.len(), s1.spec.encoder_params(l));
        assert_eq!(assemble(&s1, &s2, 1, &run).unwrap(), assemble(&s1, &s2, 1, &run).unwrap());
        for c in 0..=l {
            let m = assemble(&s1, &s2, c, &run).unwrap();
            assert_eq!(m.decoder_a.len(), s1.spec.decoder_params(Task::A, c));
            assert_eq!(m.decoder_b.len(), s1.spec.decoder_params(Task::B, c));
        }
    }

    #[test]
    fn refinement_freezes_encoder() {
        let (run, data) = small();
        let s1 = stage1(&run, &data).unwrap();
        let batch = data.to_batch(&s1.split);
        let s2 = stage2(&run, &s1, &batch, 0.6).unwrap();
        let m = assemble(&s1, &s2, 1, &run).unwrap();
        let same = refine_decoders(&m, &batch, &OptimConfig { epochs: 0, ..OptimConfig::default() }).unwrap();
        assert_eq!(same, m);
        let r = refine_decoders(&m, &batch, &OptimConfig { epochs: 3, ..OptimConfig::default() }).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r.encoder), bits(&m.encoder));
        assert_ne!(r.decoder_a, m.decoder_a);
    }

    #[test]
    fn predict_maps_back_to_class_indices() {
        let spec = ModelSpec::new(1, vec![1], Activation::Relu, (2, 1)).unwrap();
        let mut m = AssembledModel {
            spec: spec.clone(),
            c: 1,
            split: TaskSplit { head: vec![2, 0], tail: vec![1] },
            encoder: vec![1.0, 0.0],
            decoder_a: vec![0.0; 4],
            decoder_b: vec![0.0; 2],
            priors: vec![0.5, 0.3, 0.2],
            tau: 1.0,
            adjustment: AdjustmentMode::Training,
        };
        // head logits (bias only): s_A = [2.0, 0.1] for classes (2, 0); tail s_B = [0.5] for class 1
        m.decoder_a = vec![0.0, 0.0, 2.0, 0.1];
        m.decoder_b = vec![0.0, 0.5];
        assert_eq!(predict(&m, &[0.3]).unwrap(), 2);
        // exact tie across branches goes to the smallest class index
        m.decoder_a = vec![0.0, 0.0, 1.0, 0.2];
        m.decoder_b = vec![0.0, 1.0];
        assert_eq!(predict(&m, &[0.3]).unwrap(), 1);
    }

    #[test]
    fn stage1_task_a_never_reads_tail_labels() {
        let (run, data) = small();
        let split = split_classes(&data.class_counts).unwrap();
        let spec = run.spec_for(3, &split).unwrap();
        let mut batch = data.to_batch(&split);
        let clean = stage1_on_batch(&run, &spec, &split, &data.priors(), &batch).unwrap();
        batch.z_b.as_mut_slice().iter_mut().for_each(|v| *v = f64::NAN);
        let init = init_params(&spec, run.init_seed);
        let obj = stage_objective(&run, &spec, &split, &data.priors(), 1.0).unwrap();
        let rep = train(&init, &spec, &batch, &obj, &run.stage1, &BlockMask::all(&spec)).unwrap();
        assert_eq!(rep.params, clean.params_a);
    }

    #[test]
    fn stage2_with_unit_weight_replays_stage1() {
        let (run, data) = small();
        let s1 = stage1(&run, &data).unwrap();
        let batch = data.to_batch(&s1.split);
        let s2 = stage2(&run, &s1, &batch, 1.0).unwrap();
        assert_eq!(s2.epoch_losses, s1.losses_a);
        assert_eq!(s2.params, s1.params_a);
    }
}

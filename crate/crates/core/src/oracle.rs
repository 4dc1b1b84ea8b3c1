//! Monte-Carlo estimates of the task-wise KL risk over the `(C, w_A)` grid,
//! rank comparison against the proxy, weight sweeps, and a logistic-regression
//! anchor for the classical `d / 2N` asymptotics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_classes, GenConfig, Generator, LongTailDataset, TaskSplit};
use crate::error::{Error, Result};
use crate::info::{consistent_log_masses, projected_posterior, taskwise_risk, RiskMode};
use crate::matrix::Matrix;
use crate::numerics::sigmoid;
use crate::pipeline::{assemble, evaluate, refine_decoders, select_structure, stage1, stage2, RunConfig, Stage1Output};
use crate::proxy::{GridResult, ProxyBreakdown};

/// A cell needs at least this fraction of successful resamples.
pub const MIN_SUCCESS_FRACTION: f64 = 0.8;

const REPORT_FORMAT: &str = "ltshare-oracle/1";
const SWEEP_FORMAT: &str = "ltshare-sweep/1";

/// SplitMix64 finalizer over `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub generator: GenConfig,
    /// Rescales the generator's class counts to this total when set.
    pub train_size: Option<usize>,
    pub eval_size: usize,
    /// Size of each class in the balanced accuracy set.
    pub test_per_class: usize,
    pub risk_mode: RiskMode,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig::default(),
            train_size: None,
            eval_size: 2000,
            test_per_class: 50,
            risk_mode: RiskMode::Restricted,
            seed: 0,
        }
    }
}

/// Ground truth and the frozen evaluation material shared by every cell.
#[derive(Debug, Clone)]
pub struct Study {
    pub generator: Generator,
    pub train_counts: Vec<usize>,
    pub split: TaskSplit,
    pub eval_points: Matrix,
    pub test_set: LongTailDataset,
    pub risk_mode: RiskMode,
    pub seed: u64,
}

impl Study {
    pub fn new(cfg: &StudyConfig) -> Result<Self> {
        let generator = Generator::from_config(&cfg.generator)?;
        let base = cfg.generator.class_counts()?;
        let train_counts = match cfg.train_size {
            Some(n) => apportion(&base, n)?,
            None => base,
        };
        if cfg.eval_size == 0 {
            return Err(Error::Config("eval_size must be positive".into()));
        }
        let split = split_classes(&train_counts)?;
        let eval_points = generator.sample_features(cfg.eval_size, derive_seed(cfg.seed, 10, 0));
        let balanced = vec![cfg.test_per_class; generator.num_classes()];
        let test_set = generator.sample_stratified(&balanced, derive_seed(cfg.seed, 11, 0));
        Ok(Self { generator, train_counts, split, eval_points, test_set, risk_mode: cfg.risk_mode, seed: cfg.seed })
    }

    pub fn train_size(&self) -> usize {
        self.train_counts.iter().sum()
    }

    /// The training set of resample `m`.
    pub fn draw_train(&self, m: usize) -> LongTailDataset {
        self.generator.sample_stratified(&self.train_counts, derive_seed(self.seed, 1, m as u64))
    }
}

/// Largest-remainder apportionment of `n` in proportion to `weights`, each
/// share at least 1.
pub fn apportion(weights: &[usize], n: usize) -> Result<Vec<usize>> {
    let total: usize = weights.iter().sum();
    if total == 0 || n < weights.len() {
        return Err(Error::Config(format!("cannot spread {n} samples over {} classes", weights.len())));
    }
    let spare = n - weights.len();
    let exact: Vec<f64> = weights.iter().map(|&w| w as f64 * spare as f64 / total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize + 1).collect();
    let mut left = n - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())).then(i.cmp(&j)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    Ok(out)
}

/// Per-resample seeds: the training draw, the initialization and the shuffles.
pub fn resample_config(template: &RunConfig, study_seed: u64, m: usize) -> RunConfig {
    let m = m as u64;
    let mut cfg = template.clone();
    cfg.init_seed = derive_seed(study_seed ^ template.init_seed, 2, m);
    cfg.stage1.seed = derive_seed(study_seed ^ template.stage1.seed, 3, m);
    cfg.stage2.seed = derive_seed(study_seed ^ template.stage2.seed, 4, m);
    cfg.refine.seed = derive_seed(study_seed ^ template.refine.seed, 5, m);
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSample {
    pub risk: f64,
    pub accuracy: f64,
    pub head_accuracy: f64,
    pub tail_accuracy: f64,
}

struct ResampleResult {
    stage1: Option<Stage1Output>,
    cells: Vec<std::result::Result<CellSample, String>>,
}

fn run_resample(study: &Study, template: &RunConfig, cs: &[usize], ws: &[f64], m: usize) -> ResampleResult {
    let n_cells = cs.len() * ws.len();
    let fail_all = |e: Error| ResampleResult { stage1: None, cells: vec![Err(e.to_string()); n_cells] };
    let cfg = resample_config(template, study.seed, m);
    let train_set = study.draw_train(m);
    let s1 = match stage1(&cfg, &train_set) {
        Ok(s) => s,
        Err(e) => return fail_all(e),
    };
    let batch = train_set.to_batch(&s1.split);
    let mut cells = vec![Err(String::new()); n_cells];
    let needs_stage2 = cs.iter().any(|&c| c > 0);
    for (wi, &w) in ws.iter().enumerate() {
        let s2 = if needs_stage2 {
            stage2(&cfg, &s1, &batch, w).map_err(|e| e.to_string())
        } else {
            Ok(crate::pipeline::Stage2Output { params: s1.params_a.clone(), w_a: w, epoch_losses: Vec::new() })
        };
        for (ci, &c) in cs.iter().enumerate() {
            let idx = ci * ws.len() + wi;
            cells[idx] = s2.clone().and_then(|s2| {
                let run = || -> Result<CellSample> {
                    let model = assemble(&s1, &s2, c, &cfg)?;
                    let model = refine_decoders(&model, &batch, &cfg.refine)?;
                    let risk = taskwise_risk(&study.generator, &model.split, &model, &study.eval_points, study.risk_mode)?;
                    let met = evaluate(&model, &study.test_set)?;
                    Ok(CellSample {
                        risk: risk.total,
                        accuracy: met.overall_accuracy,
                        head_accuracy: met.head_accuracy,
                        tail_accuracy: met.tail_accuracy,
                    })
                };
                run().map_err(|e| e.to_string())
            });
        }
    }
    ResampleResult { stage1: Some(s1), cells }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "nan_as_null")]
    pub mean: f64,
    #[serde(with = "nan_as_null")]
    pub stderr: f64,
    pub count: usize,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            f64::NAN
        } else {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, stderr, count: n }
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)`.
    pub fn z_distance(&self, other: &Summary) -> f64 {
        (self.mean - other.mean).abs() / (self.stderr * self.stderr + other.stderr * other.stderr).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub c: usize,
    pub w_a: f64,
    pub risk: Summary,
    pub accuracy: Summary,
    pub head_accuracy: Summary,
    pub tail_accuracy: Summary,
    pub successes: usize,
    pub resamples: usize,
    pub valid: bool,
}

impl CellStats {
    fn from_samples(c: usize, w_a: f64, samples: &[CellSample], resamples: usize) -> Self {
        let col = |f: fn(&CellSample) -> f64| Summary::of(&samples.iter().map(f).collect::<Vec<_>>());
        Self {
            c,
            w_a,
            risk: col(|s| s.risk),
            accuracy: col(|s| s.accuracy),
            head_accuracy: col(|s| s.head_accuracy),
            tail_accuracy: col(|s| s.tail_accuracy),
            successes: samples.len(),
            resamples,
            valid: samples.len() as f64 >= MIN_SUCCESS_FRACTION * resamples as f64 && samples.len() >= 2,
        }
    }
}

/// Raw per-resample samples for every cell, in `(C, w)` row-major order.
#[derive(Debug, Clone)]
pub struct GridSamples {
    pub cs: Vec<usize>,
    pub ws: Vec<f64>,
    pub samples: Vec<Vec<CellSample>>,
    pub failures: Vec<String>,
    pub resamples: usize,
    pub representative: Option<Stage1Output>,
}

impl GridSamples {
    pub fn stats(&self) -> Vec<CellStats> {
        self.cs
            .iter()
            .flat_map(|&c| self.ws.iter().map(move |&w| (c, w)))
            .zip(&self.samples)
            .map(|((c, w), s)| CellStats::from_samples(c, w, s, self.resamples))
            .collect()
    }
}

/// Runs resamples `range` of the study over the grid. Each resample draws a
/// training set, runs Stage 1 once, Stage 2 once per weight, then assembles
/// every depth from those outputs.
pub fn collect_grid(
    study: &Study,
    template: &RunConfig,
    cs: &[usize],
    ws: &[f64],
    range: std::ops::Range<usize>,
) -> Result<GridSamples> {
    template.validate()?;
    if cs.is_empty() || ws.is_empty() {
        return Err(Error::Config("oracle grid must be nonempty".into()));
    }
    if range.len() < 2 {
        return Err(Error::Config("the oracle needs at least two resamples".into()));
    }
    if let Some(&c) = cs.iter().find(|&&c| c > template.trunk_widths.len()) {
        return Err(Error::Config(format!("depth {c} exceeds trunk depth")));
    }
    let results: Vec<ResampleResult> =
        range.clone().into_par_iter().map(|m| run_resample(study, template, cs, ws, m)).collect();
    let mut samples = vec![Vec::new(); cs.len() * ws.len()];
    let mut failures = Vec::new();
    let mut representative = None;
    for (k, r) in results.into_iter().enumerate() {
        for (cell, out) in samples.iter_mut().zip(r.cells) {
            match out {
                Ok(s) => cell.push(s),
                Err(e) => {
                    if !failures.contains(&e) && failures.len() < 16 {
                        failures.push(e);
                    }
                }
            }
        }
        if k == 0 {
            representative = r.stage1;
        }
    }
    Ok(GridSamples { cs: cs.to_vec(), ws: ws.to_vec(), samples, failures, resamples: range.len(), representative })
}

/// Mean risk and standard error at one grid point over `m` resamples.
pub fn mc_gen_error(study: &Study, template: &RunConfig, c: usize, w_a: f64, m: usize) -> Result<CellStats> {
    let g = collect_grid(study, template, &[c], &[w_a], 0..m)?;
    Ok(g.stats().remove(0))
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with average-rank ties; `None` when either side is
/// constant or fewer than two pairs exist.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: usize,
    pub w_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub format: String,
    pub train_size: usize,
    pub resamples: usize,
    pub cells: Vec<CellStats>,
    pub proxy: Vec<ProxyBreakdown>,
    pub spearman: Option<f64>,
    pub invalid_cells: usize,
    pub oracle_best: Option<GridCell>,
    pub proxy_best: GridCell,
    /// 1 + number of valid cells with strictly smaller mean risk.
    pub proxy_best_oracle_rank: Option<usize>,
    pub failures: Vec<String>,
}

impl OracleReport {
    /// Builds the comparison from oracle cells and a proxy grid over the same points.
    pub fn compare(cells: Vec<CellStats>, proxy: &GridResult, train_size: usize, resamples: usize, failures: Vec<String>) -> Result<Self> {
        let proxy_rows: Vec<ProxyBreakdown> = cells
            .iter()
            .map(|cell| {
                proxy
                    .get(cell.c, cell.w_a)
                    .copied()
                    .ok_or_else(|| Error::Structure(format!("proxy grid lacks ({}, {})", cell.c, cell.w_a)))
            })
            .collect::<Result<_>>()?;
        let valid: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].valid).collect();
        let risks: Vec<f64> = valid.iter().map(|&i| cells[i].risk.mean).collect();
        let totals: Vec<f64> = valid.iter().map(|&i| proxy_rows[i].total).collect();
        let oracle_best = valid
            .iter()
            .min_by(|&&i, &&j| cells[i].risk.mean.total_cmp(&cells[j].risk.mean))
            .map(|&i| GridCell { c: cells[i].c, w_a: cells[i].w_a });
        let pb = proxy.best;
        let proxy_best_oracle_rank = cells
            .iter()
            .find(|c| c.valid && c.c == pb.c && c.w_a == pb.w_a)
            .map(|best| 1 + risks.iter().filter(|&&r| r < best.risk.mean).count());
        Ok(Self {
            format: REPORT_FORMAT.into(),
            train_size,
            resamples,
            spearman: spearman(&totals, &risks),
            invalid_cells: cells.len() - valid.len(),
            cells,
            proxy: proxy_rows,
            oracle_best,
            proxy_best: GridCell { c: pb.c, w_a: pb.w_a },
            proxy_best_oracle_rank,
            failures,
        })
    }

    pub fn valid_cells(&self) -> usize {
        self.cells.len() - self.invalid_cells
    }

    pub const CSV_HEADER: &'static str = "C,w_A,risk_mean,risk_stderr,proxy_total,accuracy_mean,accuracy_stderr,\
head_accuracy_mean,tail_accuracy_mean,successes,resamples,valid";

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (c, p) in self.cells.iter().zip(&self.proxy) {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{}",
                c.c,
                c.w_a,
                c.risk.mean,
                c.risk.stderr,
                p.total,
                c.accuracy.mean,
                c.accuracy.stderr,
                c.head_accuracy.mean,
                c.tail_accuracy.mean,
                c.successes,
                c.resamples,
                c.valid
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::Format(format!("unsupported oracle report format {}", r.format)));
        }
        Ok(r)
    }
}

/// Oracle grid plus the proxy grid of the first resample's Stage-1 run.
pub fn grid_compare(study: &Study, template: &RunConfig, cs: &[usize], ws: &[f64], m: usize) -> Result<OracleReport> {
    let g = collect_grid(study, template, cs, ws, 0..m)?;
    let s1 = g
        .representative
        .as_ref()
        .ok_or_else(|| Error::Verification(format!("representative Stage-1 run failed: {:?}", g.failures.first())))?;
    let proxy = select_structure(s1, cs, ws)?;
    OracleReport::compare(g.stats(), &proxy, study.train_size(), m, g.failures)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub format: String,
    pub c: usize,
    pub rows: Vec<CellStats>,
}

impl SweepTable {
    pub const CSV_HEADER: &'static str = "w_A,accuracy_mean,accuracy_stderr,head_accuracy_mean,head_accuracy_stderr,\
tail_accuracy_mean,tail_accuracy_stderr,risk_mean,risk_stderr,successes";

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                r.w_a,
                r.accuracy.mean,
                r.accuracy.stderr,
                r.head_accuracy.mean,
                r.head_accuracy.stderr,
                r.tail_accuracy.mean,
                r.tail_accuracy.stderr,
                r.risk.mean,
                r.risk.stderr,
                r.successes
            )?;
        }
        Ok(())
    }

    /// Row with the highest mean overall accuracy (first on ties).
    pub fn best_accuracy(&self) -> Option<&CellStats> {
        self.rows.iter().filter(|r| r.valid).fold(None, |b: Option<&CellStats>, r| match b {
            Some(b) if b.accuracy.mean >= r.accuracy.mean => Some(b),
            _ => Some(r),
        })
    }

    pub fn row(&self, w_a: f64) -> Option<&CellStats> {
        self.rows.iter().find(|r| r.w_a == w_a)
    }
}

/// Accuracy and risk per weight at fixed `C`.
pub fn weight_sweep(study: &Study, template: &RunConfig, c: usize, ws: &[f64], m: usize) -> Result<SweepTable> {
    let g = collect_grid(study, template, &[c], ws, 0..m)?;
    Ok(SweepTable { format: SWEEP_FORMAT.into(), c, rows: g.stats() })
}

/// Logistic-regression MLE by Newton's method on `[x, 1]`.
pub fn fit_logistic(features: &Matrix, z: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = (features.rows(), features.cols() + 1);
    if n != z.len() || n == 0 {
        return Err(Error::Structure("features and labels disagree".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| if j + 1 == d { 1.0 } else { features.get(i, j) });
    let zv = DVector::from_column_slice(z);
    let mut theta = DVector::zeros(d);
    for iter in 0..100 {
        let s = &x * &theta;
        let p = s.map(sigmoid);
        let grad = x.transpose() * (&zv - &p);
        let w = p.map(|v| v * (1.0 - v));
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let hess = x.transpose() * xw;
        let step = hess
            .cholesky()
            .ok_or(Error::Divergence { epoch: iter, loss: f64::NAN })?
            .solve(&grad);
        theta += &step;
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { epoch: iter, loss: f64::NAN });
        }
        if step.amax() < 1e-12 {
            return Ok(theta.iter().copied().collect());
        }
    }
    Err(Error::Divergence { epoch: 100, loss: f64::NAN })
}

/// KL risk of a fitted logistic model for "class == `positive`" against the
/// generator's posterior, averaged over `eval_points`.
pub fn logistic_risk(generator: &Generator, positive: usize, theta: &[f64], eval_points: &Matrix) -> Result<f64> {
    if theta.len() != eval_points.cols() + 1 {
        return Err(Error::Structure("coefficient count does not match the features".into()));
    }
    let mut acc = 0.0;
    for y in eval_points.iter_rows() {
        let s: f64 = y.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[theta.len() - 1];
        let q = projected_posterior(&generator.posterior(y), &[positive]);
        let lp = consistent_log_masses(&[s], RiskMode::Restricted);
        acc += q.iter().zip(&lp).filter(|(&qo, _)| qo > 0.0).map(|(&qo, &lo)| qo * (qo.ln() - lo)).sum::<f64>().max(0.0);
    }
    Ok(acc / eval_points.rows() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorReport {
    pub parameters: usize,
    pub train_size: usize,
    pub risk: Summary,
    /// `d / (2N)`.
    pub reference: f64,
    pub failures: usize,
}

impl AnchorReport {
    pub fn ratio(&self) -> f64 {
        self.risk.mean / self.reference
    }
}

/// Well-specified Bernoulli-logit study: a two-class equal-covariance mixture,
/// whose class-0 posterior is exactly logistic in `y`, fitted by MLE on `n`
/// i.i.d. draws, `m` times.
pub fn logistic_anchor(generator: &Generator, n: usize, m: usize, eval_points: &Matrix, seed: u64) -> Result<AnchorReport> {
    if generator.num_classes() != 2 {
        return Err(Error::Config("the logistic anchor needs a two-class generator".into()));
    }
    let runs: Vec<Result<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let data = generator.sample_iid(n, derive_seed(seed, 20, i as u64));
            let z: Vec<f64> = data.labels.iter().map(|&l| (l == 0) as u8 as f64).collect();
            let theta = fit_logistic(&data.features, &z)?;
            logistic_risk(generator, 0, &theta, eval_points)
        })
        .collect();
    let ok: Vec<f64> = runs.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let d = generator.input_dim() + 1;
    Ok(AnchorReport {
        parameters: d,
        train_size: n,
        risk: Summary::of(&ok),
        reference: d as f64 / (2.0 * n as f64),
        failures: m - ok.len(),
    })
}

/// Splits `samples` into halves and returns their summaries.
pub fn halves(samples: &[f64]) -> (Summary, Summary) {
    let h = samples.len() / 2;
    (Summary::of(&samples[..h]), Summary::of(&samples[h..]))
}

//! Diagonal empirical Fisher, encoder mismatch, and the second-order
//! bias/variance proxy used to rank `(C, w_A)` candidates.
//!
//! With diagonal Fisher entries `a_j` (task A) and `b_j` (task B) over the
//! shared slice, and `w_B = 1 - w_A`:
//!
//! ```text
//! encoder variance = 1/(2N) * sum_j (a_j + b_j) (w_A^2 a_j + w_B^2 b_j) / (w_A a_j + w_B b_j)^2
//! encoder bias     = 1/2    * sum_j delta_j^2 (w_B^2 a_j + w_A^2 b_j)
//! decoder variance = (d_psi^A(C) + d_psi^B(C)) / (2N)
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{per_sample_score, Batch, ModelSpec, Objective, ParamVector, Task, Workspace};

/// Coordinates whose weighted curvature falls below this are treated as dead.
pub const DEAD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagFisher {
    pub values: Vec<f64>,
    pub sample_count: usize,
}

impl DiagFisher {
    pub fn new(values: Vec<f64>, sample_count: usize) -> Result<Self> {
        if let Some(j) = values.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::Domain(format!("Fisher entry {j} is negative or NaN")));
        }
        Ok(Self { values, sample_count })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean squared per-sample score of `log P(z_t | y)` at `params`.
pub fn estimate_diag_fisher(
    params: &ParamVector,
    spec: &ModelSpec,
    data: &Batch,
    task: Task,
    logit_offsets: &[f64],
) -> Result<DiagFisher> {
    if data.is_empty() {
        return Err(Error::Domain("cannot estimate Fisher from an empty dataset".into()));
    }
    if !params.is_consistent_with(spec) || data.features.cols() != spec.input_dim {
        return Err(Error::Structure("parameters, spec and data disagree".into()));
    }
    let mut obj = Objective::single(task, spec);
    if logit_offsets.len() != spec.head_dim(task) {
        return Err(Error::Structure("logit offsets do not match head width".into()));
    }
    *obj.offsets_mut(task) = logit_offsets.to_vec();
    let labels = data.labels(task);
    let mut acc = vec![0.0; params.len()];
    let mut g = vec![0.0; params.len()];
    let mut ws = Workspace::new();
    for i in 0..data.len() {
        per_sample_score(params, spec, data.features.row(i), labels.row(i), task, &obj, &mut ws, &mut g);
        for (a, &v) in acc.iter_mut().zip(&g) {
            *a += v * v;
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    DiagFisher::new(acc, data.len())
}

/// `phi^B - phi^A` over the encoder slice of depth `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchVector(pub Vec<f64>);

pub fn encoder_mismatch(params_a: &ParamVector, params_b: &ParamVector, c: usize) -> Result<MismatchVector> {
    if params_a.blocks() != params_b.blocks() {
        return Err(Error::Structure("task networks have different architectures".into()));
    }
    if c + 2 > params_a.blocks().len() {
        return Err(Error::Structure(format!("shared depth {c} exceeds trunk depth")));
    }
    let a = params_a.encoder_slice(c);
    let b = params_b.encoder_slice(c);
    Ok(MismatchVector(a.iter().zip(b).map(|(x, y)| y - x).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyBreakdown {
    pub c: usize,
    pub w_a: f64,
    pub encoder_variance: f64,
    pub encoder_bias: f64,
    pub decoder_variance: f64,
    pub total: f64,
}

fn check_inputs(fa: &DiagFisher, fb: &DiagFisher, w_a: f64, n: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&w_a) {
        return Err(Error::Domain(format!("w_A = {w_a} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    for f in [fa, fb] {
        if f.values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Domain("negative Fisher entry".into()));
        }
    }
    Ok(())
}

#[inline]
fn variance_term(a: f64, b: f64, wa: f64, wb: f64) -> f64 {
    let h = wa * a + wb * b;
    if h < DEAD_EPS {
        return 0.0;
    }
    (a + b) * (wa * wa * a + wb * wb * b) / (h * h)
}

/// Evaluates the proxy at one `(C, w_A)` point.
pub fn proxy_eval(
    fisher_a: &DiagFisher,
    fisher_b: &DiagFisher,
    delta: &MismatchVector,
    c: usize,
    w_a: f64,
    n: usize,
    spec: &ModelSpec,
) -> Result<ProxyBreakdown> {
    check_inputs(fisher_a, fisher_b, w_a, n)?;
    if c > spec.depth() {
        return Err(Error::Structure(format!("shared depth {c} exceeds trunk depth {}", spec.depth())));
    }
    let d_phi = spec.encoder_params(c);
    if delta.0.len() != d_phi {
        return Err(Error::Structure(format!("mismatch length {} != d_phi({c}) = {d_phi}", delta.0.len())));
    }
    if fisher_a.len() < d_phi || fisher_b.len() < d_phi {
        return Err(Error::Structure("Fisher shorter than the encoder slice".into()));
    }
    let w_b = 1.0 - w_a;
    let (a, b) = (&fisher_a.values[..d_phi], &fisher_b.values[..d_phi]);
    let mut var = 0.0;
    let mut bias = 0.0;
    for ((&aj, &bj), &dj) in a.iter().zip(b).zip(&delta.0) {
        var += variance_term(aj, bj, w_a, w_b);
        bias += dj * dj * (w_b * w_b * aj + w_a * w_a * bj);
    }
    let nf = n as f64;
    let encoder_variance = var / (2.0 * nf);
    let encoder_bias = 0.5 * bias;
    let decoder_variance = (spec.decoder_params(Task::A, c) + spec.decoder_params(Task::B, c)) as f64 / (2.0 * nf);
    Ok(ProxyBreakdown {
        c,
        w_a,
        encoder_variance,
        encoder_bias,
        decoder_variance,
        total: encoder_variance + encoder_bias + decoder_variance,
    })
}

/// Full proxy table plus its argmin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ProxyBreakdown,
    pub table: Vec<ProxyBreakdown>,
}

/// Ordering used to pick a winner: smaller total, then smaller `C`, then
/// `w_A` closer to 1/2.
fn better(x: &ProxyBreakdown, y: &ProxyBreakdown) -> bool {
    if x.total != y.total {
        return x.total < y.total;
    }
    if x.c != y.c {
        return x.c < y.c;
    }
    (x.w_a - 0.5).abs() < (y.w_a - 0.5).abs()
}

fn argmin<'a>(rows: impl Iterator<Item = &'a ProxyBreakdown>) -> Option<ProxyBreakdown> {
    rows.fold(None, |best: Option<ProxyBreakdown>, r| match best {
        Some(b) if !better(r, &b) => Some(b),
        _ => Some(*r),
    })
}

impl GridResult {
    /// Best row restricted to one shared depth.
    pub fn best_for_c(&self, c: usize) -> Option<ProxyBreakdown> {
        argmin(self.table.iter().filter(|r| r.c == c))
    }

    pub fn get(&self, c: usize, w_a: f64) -> Option<&ProxyBreakdown> {
        self.table.iter().find(|r| r.c == c && r.w_a == w_a)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "C,w_A,encoder_variance,encoder_bias,decoder_variance,total")?;
        for r in &self.table {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?},{:?}",
                r.c, r.w_a, r.encoder_variance, r.encoder_bias, r.decoder_variance, r.total
            )?;
        }
        Ok(())
    }
}

/// `w_A` in `{0, 0.1, ..., 1.0}`.
pub fn default_weight_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Evaluates every `(C, w_A)` candidate and returns the argmin.
///
/// `delta_full` is the mismatch over the whole trunk; the slice for depth `C`
/// is its prefix. Per-layer partial sums are computed once per weight so the
/// cost is `O(|W| * d_phi(L) + |C| * |W| * L)`.
pub fn grid_search(
    fisher_a: &DiagFisher,
    fisher_b: &DiagFisher,
    delta_full: &MismatchVector,
    n: usize,
    spec: &ModelSpec,
    c_candidates: &[usize],
    w_candidates: &[f64],
) -> Result<GridResult> {
    if c_candidates.is_empty() || w_candidates.is_empty() {
        return Err(Error::Config("empty candidate grid".into()));
    }
    let depth = spec.depth();
    if let Some(&c) = c_candidates.iter().find(|&&c| c > depth) {
        return Err(Error::Config(format!("candidate depth {c} exceeds trunk depth {depth}")));
    }
    let d_trunk = spec.encoder_params(depth);
    if delta_full.0.len() != d_trunk {
        return Err(Error::Structure("mismatch must cover the full trunk".into()));
    }
    if fisher_a.len() < d_trunk || fisher_b.len() < d_trunk {
        return Err(Error::Structure("Fisher shorter than the trunk".into()));
    }
    for &w in w_candidates {
        check_inputs(fisher_a, fisher_b, w, n)?;
    }
    let bounds: Vec<usize> = (0..=depth).map(|c| spec.encoder_params(c)).collect();
    let a = &fisher_a.values[..d_trunk];
    let b = &fisher_b.values[..d_trunk];
    let d = &delta_full.0;

    // bias is linear in (w_B^2, w_A^2): per-layer sums of delta^2 a and delta^2 b
    let mut bias_a = vec![0.0; depth + 1];
    let mut bias_b = vec![0.0; depth + 1];
    for l in 0..depth {
        let (s, e) = (bounds[l], bounds[l + 1]);
        let (mut sa, mut sb) = (0.0, 0.0);
        for j in s..e {
            sa += d[j] * d[j] * a[j];
            sb += d[j] * d[j] * b[j];
        }
        bias_a[l + 1] = bias_a[l] + sa;
        bias_b[l + 1] = bias_b[l] + sb;
    }

    let nf = n as f64;
    let mut table = Vec::with_capacity(c_candidates.len() * w_candidates.len());
    let max_c = *c_candidates.iter().max().unwrap();
    let mut var_prefix = vec![0.0; depth + 1];
    let mut per_w = Vec::with_capacity(w_candidates.len());
    for &w_a in w_candidates {
        let w_b = 1.0 - w_a;
        for l in 0..max_c {
            let s: f64 = (bounds[l]..bounds[l + 1]).map(|j| variance_term(a[j], b[j], w_a, w_b)).sum();
            var_prefix[l + 1] = var_prefix[l] + s;
        }
        per_w.push(var_prefix.clone());
    }
    for &c in c_candidates {
        let dec = (spec.decoder_params(Task::A, c) + spec.decoder_params(Task::B, c)) as f64 / (2.0 * nf);
        for (wi, &w_a) in w_candidates.iter().enumerate() {
            let w_b = 1.0 - w_a;
            let encoder_variance = per_w[wi][c] / (2.0 * nf);
            let encoder_bias = 0.5 * (w_b * w_b * bias_a[c] + w_a * w_a * bias_b[c]);
            table.push(ProxyBreakdown {
                c,
                w_a,
                encoder_variance,
                encoder_bias,
                decoder_variance: dec,
                total: encoder_variance + encoder_bias + dec,
            });
        }
    }
    let best = argmin(table.iter()).expect("grid is nonempty");
    Ok(GridResult { best, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn spec() -> ModelSpec {
        ModelSpec::new(3, vec![2, 2], Activation::Relu, (2, 2)).unwrap()
    }

    fn fisher(v: Vec<f64>) -> DiagFisher {
        DiagFisher::new(v, 100).unwrap()
    }

    #[test]
    fn empty_encoder_has_only_decoder_variance() {
        let spec = spec();
        let f = fisher(vec![1.0; spec.total_params()]);
        let p = proxy_eval(&f, &f, &MismatchVector(vec![]), 0, 0.3, 1000, &spec).unwrap();
        assert_eq!(p.encoder_variance, 0.0);
        assert_eq!(p.encoder_bias, 0.0);
        let dec = (spec.task_params(Task::A) + spec.task_params(Task::B)) as f64 / 2000.0;
        assert_eq!(p.total, dec);
    }

    #[test]
    fn identical_fishers_halve_variance_at_balance() {
        let spec = spec();
        let d_phi = spec.encoder_params(1);
        let vals: Vec<f64> = (0..spec.total_params()).map(|j| 0.1 + j as f64 * 0.01).collect();
        let f = fisher(vals);
        let zero = MismatchVector(vec![0.0; d_phi]);
        let bal = proxy_eval(&f, &f, &zero, 1, 0.5, 1000, &spec).unwrap();
        assert!((bal.encoder_variance - 0.5 * d_phi as f64 / 1000.0).abs() < 1e-15);
        let edge = proxy_eval(&f, &f, &zero, 1, 1.0, 1000, &spec).unwrap();
        assert!((edge.encoder_variance - d_phi as f64 / 1000.0).abs() < 1e-15);
        assert_eq!(bal.encoder_bias, 0.0);
    }

    #[test]
    fn dead_coordinates_are_skipped() {
        let spec = spec();
        let d_phi = spec.encoder_params(2);
        let mut a = vec![1.0; spec.total_params()];
        let mut b = vec![1.0; spec.total_params()];
        a[0] = 0.0;
        b[0] = 0.0;
        let p = proxy_eval(&fisher(a), &fisher(b), &MismatchVector(vec![0.0; d_phi]), 2, 0.5, 10, &spec).unwrap();
        assert!((p.encoder_variance - (d_phi - 1) as f64 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_fisher_and_bad_weight() {
        assert!(DiagFisher::new(vec![-1.0], 1).is_err());
        let spec = spec();
        let bad = DiagFisher { values: vec![-1.0; spec.total_params()], sample_count: 1 };
        let good = fisher(vec![1.0; spec.total_params()]);
        assert!(matches!(
            proxy_eval(&bad, &good, &MismatchVector(vec![]), 0, 0.5, 10, &spec),
            Err(Error::Domain(_))
        ));
        assert!(proxy_eval(&good, &good, &MismatchVector(vec![]), 0, 1.5, 10, &spec).is_err());
    }

    #[test]
    fn bias_minimized_at_fisher_ratio() {
        // one-coordinate bias quadratic: 1/2 delta^2 ((1-w)^2 a + w^2 b) with a = 4, b = 1
        let best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .min_by(|x, y| {
                let f = |w: f64| (1.0 - w).powi(2) * 4.0 + w * w;
                f(*x).partial_cmp(&f(*y)).unwrap()
            })
            .unwrap();
        assert!((best - 0.8).abs() < 1e-12);
        let spec = ModelSpec::new(1, vec![1], Activation::Relu, (1, 1)).unwrap();
        let mut a = vec![0.0; spec.total_params()];
        let mut b = vec![0.0; spec.total_params()];
        a[0] = 4.0;
        b[0] = 1.0;
        let delta = MismatchVector(vec![0.3, 0.0]);
        let (fa, fb) = (fisher(a), fisher(b));
        let bias_at = |w: f64| proxy_eval(&fa, &fb, &delta, 1, w, 1 << 40, &spec).unwrap().encoder_bias;
        assert!(bias_at(0.8) < bias_at(0.79) && bias_at(0.8) < bias_at(0.81));
    }

    #[test]
    fn grid_matches_pointwise_evaluation() {
        let spec = ModelSpec::new(3, vec![4, 3, 2], Activation::Tanh, (2, 3)).unwrap();
        let np = spec.total_params();
        let a: Vec<f64> = (0..np).map(|j| ((j * 7919) % 13) as f64 * 0.05).collect();
        let b: Vec<f64> = (0..np).map(|j| ((j * 104729) % 11) as f64 * 0.03).collect();
        let dfull: Vec<f64> = (0..spec.encoder_params(3)).map(|j| ((j % 5) as f64 - 2.0) * 0.01).collect();
        let (fa, fb) = (fisher(a), fisher(b));
        let cs: Vec<usize> = (0..=3).collect();
        let ws = default_weight_grid();
        let g = grid_search(&fa, &fb, &MismatchVector(dfull.clone()), 500, &spec, &cs, &ws).unwrap();
        assert_eq!(g.table.len(), 44);
        for r in &g.table {
            let d = MismatchVector(dfull[..spec.encoder_params(r.c)].to_vec());
            let p = proxy_eval(&fa, &fb, &d, r.c, r.w_a, 500, &spec).unwrap();
            assert!((p.total - r.total).abs() <= 1e-12 * p.total.max(1.0));
            assert!(g.best.total <= r.total);
        }
    }

    #[test]
    fn grid_single_candidate_and_ties() {
        let spec = ModelSpec::new(2, vec![2], Activation::Relu, (1, 1)).unwrap();
        let f = fisher(vec![1.0; spec.total_params()]);
        let d = MismatchVector(vec![0.0; spec.encoder_params(1)]);
        let g = grid_search(&f, &f, &d, 10, &spec, &[1], &[0.3]).unwrap();
        assert_eq!((g.best.c, g.best.w_a), (1, 0.3));
        // at C = 0 every weight ties; the tie goes to w_A = 0.5
        let g = grid_search(&f, &f, &d, 10, &spec, &[0], &default_weight_grid()).unwrap();
        assert_eq!(g.best.w_a, 0.5);
        assert!(grid_search(&f, &f, &d, 10, &spec, &[], &[0.5]).is_err());
    }

    #[test]
    fn mismatch_basics() {
        let spec = ModelSpec::new(3, vec![4, 3], Activation::Relu, (2, 2)).unwrap();
        let pa = crate::nn::init_params(&spec, 1);
        let pb = crate::nn::init_params(&spec, 2);
        assert!(encoder_mismatch(&pa, &pa, 2).unwrap().0.iter().all(|&v| v == 0.0));
        assert!(encoder_mismatch(&pa, &pb, 0).unwrap().0.is_empty());
        let norms: Vec<f64> =
            (0..=2).map(|c| encoder_mismatch(&pa, &pb, c).unwrap().0.iter().map(|v| v * v).sum()).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
        let other = crate::nn::init_params(&ModelSpec::new(3, vec![5, 3], Activation::Relu, (2, 2)).unwrap(), 1);
        assert!(matches!(encoder_mismatch(&pa, &other, 1), Err(Error::Structure(_))));
    }
}

//! Exact information measures on small discrete alphabets, the brute-force
//! check of the joint-KL decomposition, and the task-wise KL risk of a
//! factorized predictor against a known generator.
//!
//! All quantities are in nats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Generator, TaskSplit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Task;
use crate::numerics::{log_sigmoid, log_sum_exp};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

#[inline]
fn safe_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// `D(p || q) = sum p log(p/q)`, with `0 log 0 = 0`.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!("alphabet sizes differ: {} vs {}", p.len(), q.len())));
    }
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::Domain(format!("q({i}) = 0 where p({i}) = {pi}")));
        }
        d += pi * (safe_ln(pi) - safe_ln(qi));
    }
    Ok(d.max(0.0))
}

/// `I(U; V)` from a joint table with rows indexed by `u`.
pub fn mutual_information(joint: &Matrix) -> f64 {
    let pu: Vec<f64> = joint.iter_rows().map(|r| r.iter().sum()).collect();
    let mut pv = vec![0.0; joint.cols()];
    for r in joint.iter_rows() {
        for (a, &b) in pv.iter_mut().zip(r) {
            *a += b;
        }
    }
    let mut mi = 0.0;
    for (u, r) in joint.iter_rows().enumerate() {
        for (v, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += p * (safe_ln(p) - safe_ln(pu[u]) - safe_ln(pv[v]));
            }
        }
    }
    mi
}

/// Joint table `p(y, z_A, z_B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    pub ny: usize,
    pub na: usize,
    pub nb: usize,
    /// Flattened as `[(y * na + a) * nb + b]`.
    pub table: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(ny: usize, na: usize, nb: usize, table: Vec<f64>) -> Result<Self> {
        let j = Self { ny, na, nb, table };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.table.len() != self.ny * self.na * self.nb {
            return Err(Error::Structure("joint table size mismatch".into()));
        }
        if self.table.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Domain("negative probability in joint".into()));
        }
        let s: f64 = self.table.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("joint sums to {s}")));
        }
        Ok(())
    }

    #[inline]
    pub fn p(&self, y: usize, a: usize, b: usize) -> f64 {
        self.table[(y * self.na + a) * self.nb + b]
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.ny)
            .map(|y| (0..self.na).flat_map(|a| (0..self.nb).map(move |b| (a, b))).map(|(a, b)| self.p(y, a, b)).sum())
            .collect()
    }

    /// `Q(y, z_A)`, rows by `y`.
    pub fn marginal_ya(&self) -> Matrix {
        let mut m = Matrix::zeros(self.ny, self.na);
        for y in 0..self.ny {
            for a in 0..self.na {
                m.set(y, a, (0..self.nb).map(|b| self.p(y, a, b)).sum());
            }
        }
        m
    }

    /// `Q(y, z_B)`, rows by `y`.
    pub fn marginal_yb(&self) -> Matrix {
        let mut m = Matrix::zeros(self.ny, self.nb);
        for y in 0..self.ny {
            for b in 0..self.nb {
                m.set(y, b, (0..self.na).map(|a| self.p(y, a, b)).sum());
            }
        }
        m
    }

    /// Relabels every axis by the given permutations.
    pub fn permuted(&self, py: &[usize], pa: &[usize], pb: &[usize]) -> Self {
        let mut table = vec![0.0; self.table.len()];
        for y in 0..self.ny {
            for a in 0..self.na {
                for b in 0..self.nb {
                    table[(py[y] * self.na + pa[a]) * self.nb + pb[b]] = self.p(y, a, b);
                }
            }
        }
        Self { table, ..self.clone() }
    }
}

/// `I(Z_A; Z_B | Y)` under the joint.
pub fn conditional_mutual_information(q: &DiscreteJoint) -> f64 {
    let qy = q.marginal_y();
    let qya = q.marginal_ya();
    let qyb = q.marginal_yb();
    let mut cmi = 0.0;
    for y in 0..q.ny {
        for a in 0..q.na {
            for b in 0..q.nb {
                let p = q.p(y, a, b);
                if p > 0.0 {
                    // log [p(a,b|y) / (p(a|y) p(b|y))] = log [p(y,a,b) p(y) / (p(y,a) p(y,b))]
                    cmi += p * (safe_ln(p) + safe_ln(qy[y]) - safe_ln(qya.get(y, a)) - safe_ln(qyb.get(y, b)));
                }
            }
        }
    }
    cmi
}

/// Per-task conditional tables `P_A(z_A | y)` and `P_B(z_B | y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizedConditional {
    pub p_a: Matrix,
    pub p_b: Matrix,
}

impl FactorizedConditional {
    pub fn new(p_a: Matrix, p_b: Matrix) -> Result<Self> {
        let f = Self { p_a, p_b };
        for (name, m) in [("P_A", &f.p_a), ("P_B", &f.p_b)] {
            for (y, r) in m.iter_rows().enumerate() {
                if r.iter().any(|&v| !(v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("{name} row {y} is not a distribution")));
                }
            }
        }
        Ok(f)
    }

    /// The product of the conditionals of `q`.
    pub fn from_joint(q: &DiscreteJoint) -> Self {
        let qy = q.marginal_y();
        let mut p_a = q.marginal_ya();
        let mut p_b = q.marginal_yb();
        for y in 0..q.ny {
            p_a.row_mut(y).iter_mut().for_each(|v| *v /= qy[y]);
            p_b.row_mut(y).iter_mut().for_each(|v| *v /= qy[y]);
        }
        Self { p_a, p_b }
    }
}

/// The four terms of the decomposition together with its residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaTerms {
    pub joint_kl: f64,
    pub task_a_kl: f64,
    pub task_b_kl: f64,
    pub cmi: f64,
    pub residual: f64,
}

/// Evaluates `D(Q_W||P_W) - D(Q_XA||P_XA) - D(Q_XB||P_XB) - I_Q(Z_A;Z_B|Y)` by
/// enumerating every outcome, where `P_W = Q_Y P_A P_B` and
/// `P_Xt = Q_Y P_t`.
pub fn lemma_terms(q: &DiscreteJoint, p: &FactorizedConditional) -> Result<LemmaTerms> {
    q.validate()?;
    if p.p_a.rows() != q.ny || p.p_b.rows() != q.ny || p.p_a.cols() != q.na || p.p_b.cols() != q.nb {
        return Err(Error::Structure("conditional tables do not match the joint alphabets".into()));
    }
    let qy = q.marginal_y();
    let mut pw = Vec::with_capacity(q.table.len());
    for y in 0..q.ny {
        for a in 0..q.na {
            for b in 0..q.nb {
                pw.push(qy[y] * p.p_a.get(y, a) * p.p_b.get(y, b));
            }
        }
    }
    let joint_kl = kl(&q.table, &pw)?;
    let marginal_model = |cond: &Matrix| -> Vec<f64> {
        let mut out = Vec::with_capacity(cond.rows() * cond.cols());
        for (y, r) in cond.iter_rows().enumerate() {
            out.extend(r.iter().map(|&v| qy[y] * v));
        }
        out
    };
    let task_a_kl = kl(q.marginal_ya().as_slice(), &marginal_model(&p.p_a))?;
    let task_b_kl = kl(q.marginal_yb().as_slice(), &marginal_model(&p.p_b))?;
    let cmi = conditional_mutual_information(q);
    Ok(LemmaTerms { joint_kl, task_a_kl, task_b_kl, cmi, residual: joint_kl - task_a_kl - task_b_kl - cmi })
}

pub fn verify_lemma1(q: &DiscreteJoint, p: &FactorizedConditional) -> Result<f64> {
    lemma_terms(q, p).map(|t| t.residual)
}

fn random_simplex(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { -rng.random::<f64>().max(1e-300).ln() })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
            return v;
        }
    }
}

/// A random joint over `|Y| <= max_y`, `|Z_A|, |Z_B| <= max_z` (some cells
/// exactly zero) and a strictly positive factorized conditional.
pub fn random_lemma_instance(rng: &mut impl Rng, max_y: usize, max_z: usize) -> (DiscreteJoint, FactorizedConditional) {
    let ny = rng.random_range(1..=max_y);
    let na = rng.random_range(2..=max_z.max(2));
    let nb = rng.random_range(2..=max_z.max(2));
    let mut table = random_simplex(rng, ny * na * nb, 0.25);
    // renormalize in a fixed order so the sum is 1 to rounding
    let s: f64 = table.iter().sum();
    table.iter_mut().for_each(|x| *x /= s);
    let q = DiscreteJoint { ny, na, nb, table };
    let p_a = Matrix::from_vec(ny, na, (0..ny).flat_map(|_| random_simplex(rng, na, 0.0)).collect());
    let p_b = Matrix::from_vec(ny, nb, (0..ny).flat_map(|_| random_simplex(rng, nb, 0.0)).collect());
    (q, FactorizedConditional { p_a, p_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub trials: usize,
    pub max_abs_residual: f64,
}

/// Runs the decomposition check over `trials` seeded random instances.
pub fn lemma_trials(trials: usize, seed: u64) -> Result<LemmaSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (q, p) = random_lemma_instance(&mut rng, 4, 4);
        worst = worst.max(verify_lemma1(&q, &p)?.abs());
    }
    Ok(LemmaSummary { trials, max_abs_residual: worst })
}

/// How the factorized Bernoulli conditional is compared with the projected
/// posterior, which lives on the `|t| + 1` single-label-consistent outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMode {
    /// Restrict the model to the consistent outcomes and renormalize.
    #[default]
    Restricted,
    /// Use the raw product-Bernoulli masses of those outcomes.
    Unrestricted,
}

/// Anything that produces per-task conditional logits at input points.
pub trait TaskPredictor {
    /// Logits whose independent sigmoids give `P_t(z_t | y)`, one row per point.
    fn task_logits(&self, features: &Matrix, task: Task) -> Result<Matrix>;
}

/// Log-masses of the `|t| + 1` consistent outcomes (all-zero first).
pub fn consistent_log_masses(logits: &[f64], mode: RiskMode) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len() + 1);
    match mode {
        RiskMode::Restricted => {
            // P(0) ∝ prod(1 - s_k), P(e_j) ∝ P(0) e^{s_j}: a softmax over [0, s]
            out.push(0.0);
            out.extend_from_slice(logits);
            let lse = log_sum_exp(&out);
            out.iter_mut().for_each(|v| *v -= lse);
        }
        RiskMode::Unrestricted => {
            let log_p0: f64 = logits.iter().map(|&s| log_sigmoid(-s)).sum();
            out.push(log_p0);
            out.extend(logits.iter().map(|&s| log_p0 + s));
        }
    }
    let floor = PROB_FLOOR.ln();
    out.iter_mut().for_each(|v| {
        if !(*v >= floor) {
            *v = floor;
        }
    });
    out
}

/// Projected posterior for one group: all-zero mass first, then the group's classes.
pub fn projected_posterior(posterior: &[f64], group: &[usize]) -> Vec<f64> {
    let mut in_group = vec![false; posterior.len()];
    for &c in group {
        in_group[c] = true;
    }
    let rest: f64 = posterior.iter().zip(&in_group).filter(|(_, &g)| !g).map(|(p, _)| p).sum();
    std::iter::once(rest).chain(group.iter().map(|&c| posterior[c])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub task_a: f64,
    pub task_b: f64,
    pub total: f64,
}

/// Monte-Carlo task-wise KL risk over `eval_points` drawn from `Q_Y`.
pub fn taskwise_risk(
    generator: &Generator,
    split: &TaskSplit,
    model: &impl TaskPredictor,
    eval_points: &Matrix,
    mode: RiskMode,
) -> Result<RiskBreakdown> {
    if eval_points.rows() == 0 {
        return Err(Error::Domain("no evaluation points".into()));
    }
    if split.num_classes() != generator.num_classes() {
        return Err(Error::Structure("split does not match generator class count".into()));
    }
    let sa = model.task_logits(eval_points, Task::A)?;
    let sb = model.task_logits(eval_points, Task::B)?;
    let mut sums = [0.0; 2];
    for (i, y) in eval_points.iter_rows().enumerate() {
        let post = generator.posterior(y);
        for (t, (logits, group)) in [(&sa, &split.head), (&sb, &split.tail)].into_iter().enumerate() {
            let q = projected_posterior(&post, group);
            let lp = consistent_log_masses(logits.row(i), mode);
            let mut d = 0.0;
            for (&qo, &lo) in q.iter().zip(&lp) {
                if qo > 0.0 {
                    d += qo * (safe_ln(qo) - lo);
                }
            }
            sums[t] += d.max(0.0);
        }
    }
    let n = eval_points.rows() as f64;
    let (a, b) = (sums[0] / n, sums[1] / n);
    Ok(RiskBreakdown { task_a: a, task_b: b, total: a + b })
}

use super::{Activation, Batch, Block, ModelSpec, ParamVector, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Objective;
use crate::numerics::{sigmoid, softplus};

/// Reusable activation and delta buffers for one forward/backward pass.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    logits: [Vec<f64>; 2],
    head_delta: [Vec<f64>; 2],
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Losses and gradient of the weighted two-task objective on one batch.
#[derive(Debug, Clone)]
pub struct JointLoss {
    pub total: f64,
    pub task_a: f64,
    pub task_b: f64,
    pub grad: ParamVector,
}

fn dense_forward(w: &[f64], fan_in: usize, fan_out: usize, input: &[f64], n: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(n * fan_out, 0.0);
    let (weights, bias) = w.split_at(fan_in * fan_out);
    for i in 0..n {
        let x = &input[i * fan_in..(i + 1) * fan_in];
        let row = &mut out[i * fan_out..(i + 1) * fan_out];
        for (o, r) in row.iter_mut().enumerate() {
            let wr = &weights[o * fan_in..(o + 1) * fan_in];
            *r = bias[o] + wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

fn trunk_forward(params: &[f64], blocks: &[Block], act: Activation, depth: usize, x: &[f64], n: usize, ws: &mut Workspace) {
    ws.pre.resize_with(depth, Vec::new);
    ws.post.resize_with(depth, Vec::new);
    for l in 0..depth {
        let b = blocks[l];
        let (before, after) = ws.post.split_at_mut(l);
        let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
        dense_forward(&params[b.range()], b.fan_in, b.fan_out, input, n, &mut ws.pre[l]);
        let post = &mut after[0];
        post.clear();
        post.extend(ws.pre[l].iter().map(|&z| act.apply(z)));
    }
}

fn check_dims(params: &ParamVector, spec: &ModelSpec, features: &Matrix) -> Result<()> {
    if !params.is_consistent_with(spec) {
        return Err(Error::Structure("parameter layout does not match model spec".into()));
    }
    if features.cols() != spec.input_dim {
        return Err(Error::Structure(format!(
            "feature width {} does not match input_dim {}",
            features.cols(),
            spec.input_dim
        )));
    }
    Ok(())
}

/// Raw per-class logits of one branch (`n x |task|`).
pub fn forward(params: &ParamVector, spec: &ModelSpec, features: &Matrix, task: Task) -> Result<Matrix> {
    check_dims(params, spec, features)?;
    let n = features.rows();
    let mut ws = Workspace::new();
    trunk_forward(params.values(), params.blocks(), spec.activation, spec.depth(), features.as_slice(), n, &mut ws);
    let hb = params.blocks()[spec.head_block(task)];
    let mut out = Vec::new();
    let h: &[f64] = &ws.post[spec.depth() - 1];
    dense_forward(&params.values()[hb.range()], hb.fan_in, hb.fan_out, h, n, &mut out);
    Ok(Matrix::from_vec(n, hb.fan_out, out))
}

/// Mean Bernoulli negative log-likelihood for one task and its exact gradient.
pub fn bce_loss_grad(
    params: &ParamVector,
    spec: &ModelSpec,
    batch: &Batch,
    task: Task,
    logit_offsets: &[f64],
) -> Result<(f64, ParamVector)> {
    let (wa, wb) = match task {
        Task::A => (1.0, 0.0),
        Task::B => (0.0, 1.0),
    };
    let mut obj = Objective::new(wa, wb, spec);
    *obj.offsets_mut(task) = logit_offsets.to_vec();
    let jl = joint_loss_grad(params, spec, batch, &obj)?;
    let loss = match task {
        Task::A => jl.task_a,
        Task::B => jl.task_b,
    };
    Ok((loss, jl.grad))
}

/// `w_A * BCE_A + w_B * BCE_B` on a batch, with the gradient of the total.
pub fn joint_loss_grad(params: &ParamVector, spec: &ModelSpec, batch: &Batch, obj: &Objective) -> Result<JointLoss> {
    check_dims(params, spec, &batch.features)?;
    obj.check(spec)?;
    let mut grad = ParamVector::zeros(spec);
    let mut ws = Workspace::new();
    let (la, lb) = accumulate(
        params.values(),
        params.blocks(),
        spec,
        batch.features.as_slice(),
        [Some(batch.z_a.as_slice()), Some(batch.z_b.as_slice())],
        batch.sample_weights.as_deref(),
        batch.len(),
        obj,
        &mut ws,
        grad.values_mut(),
    );
    let total = obj.w_a * la + obj.w_b * lb;
    if !total.is_finite() {
        return Err(Error::Domain(format!("non-finite loss {total}")));
    }
    Ok(JointLoss { total, task_a: la, task_b: lb, grad })
}

/// Gradient of `log P(z | y)` for one sample and one task, written into `out`.
///
/// `out` must have the full two-head parameter length; entries of the other
/// head come back zero.
#[allow(clippy::too_many_arguments)]
pub fn per_sample_score(
    params: &ParamVector,
    spec: &ModelSpec,
    features: &[f64],
    labels: &[f64],
    task: Task,
    obj: &Objective,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|g| *g = 0.0);
    let z = match task {
        Task::A => [Some(labels), None],
        Task::B => [None, Some(labels)],
    };
    let single = match task {
        Task::A => Objective { w_a: 1.0, w_b: 0.0, ..obj.clone() },
        Task::B => Objective { w_a: 0.0, w_b: 1.0, ..obj.clone() },
    };
    accumulate(params.values(), params.blocks(), spec, features, z, None, 1, &single, ws, out);
    out.iter_mut().for_each(|g| *g = -*g);
}

/// Forward + backward over `n` rows; adds the objective gradient into `grad`
/// and returns the two unweighted task losses. A task whose labels are `None`
/// is skipped entirely and reports a loss of zero.
#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate(
    params: &[f64],
    blocks: &[Block],
    spec: &ModelSpec,
    x: &[f64],
    z: [Option<&[f64]>; 2],
    sample_weights: Option<&[f64]>,
    n: usize,
    obj: &Objective,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> (f64, f64) {
    let depth = spec.depth();
    let act = spec.activation;
    trunk_forward(params, blocks, act, depth, x, n, ws);
    let inv_n = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let width = spec.trunk_widths[depth - 1];

    let mut losses = [0.0; 2];
    let weights = [obj.w_a, obj.w_b];
    let offsets = [&obj.offsets_a[..], &obj.offsets_b[..]];
    for (t, task) in [Task::A, Task::B].into_iter().enumerate() {
        let Some(zt) = z[t] else { continue };
        let hb = blocks[spec.head_block(task)];
        let k = hb.fan_out;
        dense_forward(&params[hb.range()], hb.fan_in, k, &ws.post[depth - 1], n, &mut ws.logits[t]);
        let delta = &mut ws.head_delta[t];
        delta.clear();
        delta.resize(n * k, 0.0);
        let mut loss = 0.0;
        for i in 0..n {
            let sw = sample_weights.map_or(1.0, |w| w[i]);
            for c in 0..k {
                let u = ws.logits[t][i * k + c] + offsets[t][c];
                let zi = zt[i * k + c];
                loss += sw * (softplus(u) - zi * u);
                delta[i * k + c] = weights[t] * sw * inv_n * (sigmoid(u) - zi);
            }
        }
        losses[t] = loss * inv_n;
    }

    // head gradients and delta at the trunk output
    ws.delta.clear();
    ws.delta.resize(n * width, 0.0);
    for (t, task) in [Task::A, Task::B].into_iter().enumerate() {
        if weights[t] == 0.0 || z[t].is_none() {
            continue;
        }
        let hb = blocks[spec.head_block(task)];
        let h = &ws.post[depth - 1];
        dense_backward(
            &params[hb.range()],
            hb,
            h,
            &ws.head_delta[t],
            n,
            &mut grad[hb.range()],
            Some(&mut ws.delta),
        );
    }

    for l in (0..depth).rev() {
        let b = blocks[l];
        for ((d, &zv), &av) in ws.delta.iter_mut().zip(&ws.pre[l]).zip(&ws.post[l]) {
            *d *= act.derivative(zv, av);
        }
        let input: &[f64] = if l == 0 { x } else { &ws.post[l - 1] };
        if l == 0 {
            dense_backward(&params[b.range()], b, input, &ws.delta, n, &mut grad[b.range()], None);
        } else {
            ws.delta_prev.clear();
            ws.delta_prev.resize(n * b.fan_in, 0.0);
            dense_backward(&params[b.range()], b, input, &ws.delta, n, &mut grad[b.range()], Some(&mut ws.delta_prev));
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
    }
    (losses[0], losses[1])
}

/// Accumulates `dW += delta^T input`, `db += sum delta` and optionally
/// `delta_in += delta W`.
fn dense_backward(
    w: &[f64],
    b: Block,
    input: &[f64],
    delta: &[f64],
    n: usize,
    grad: &mut [f64],
    delta_in: Option<&mut Vec<f64>>,
) {
    let (fi, fo) = (b.fan_in, b.fan_out);
    let (gw, gb) = grad.split_at_mut(fi * fo);
    for i in 0..n {
        let x = &input[i * fi..(i + 1) * fi];
        let d = &delta[i * fo..(i + 1) * fo];
        for (o, &dv) in d.iter().enumerate() {
            if dv == 0.0 {
                continue;
            }
            gb[o] += dv;
            for (g, &xv) in gw[o * fi..(o + 1) * fi].iter_mut().zip(x) {
                *g += dv * xv;
            }
        }
    }
    if let Some(din) = delta_in {
        let weights = &w[..fi * fo];
        for i in 0..n {
            let d = &delta[i * fo..(i + 1) * fo];
            let out = &mut din[i * fi..(i + 1) * fi];
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                for (r, &wv) in out.iter_mut().zip(&weights[o * fi..(o + 1) * fi]) {
                    *r += dv * wv;
                }
            }
        }
    }
}

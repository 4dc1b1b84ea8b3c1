//! Compares backprop gradients of the two-head loss with central differences.

use ltshare::nn::{init_params, joint_loss_grad, Activation, Batch, ModelSpec, Objective};
use ltshare::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ltshare::Result<()> {
    let spec = ModelSpec::new(3, vec![5, 4], Activation::Tanh, (2, 3))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 12;
    let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut za = Matrix::zeros(n, 2);
    let mut zb = Matrix::zeros(n, 3);
    for i in 0..n {
        // one active label overall, so some rows have an all-zero block
        let k = rng.random_range(0..5);
        if k < 2 {
            za.set(i, k, 1.0);
        } else {
            zb.set(i, k - 2, 1.0);
        }
    }
    let batch = Batch::new(x, za, zb)?;
    let obj = Objective::new(0.6, 0.4, &spec).with_offsets(vec![-0.2, -0.9], vec![-1.5, -2.0, -2.3]);
    let params = init_params(&spec, 3);
    let g = joint_loss_grad(&params, &spec, &batch, &obj)?;
    println!("loss {:.6} = 0.6 * {:.6} + 0.4 * {:.6}", g.total, g.task_a, g.task_b);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..params.len() {
        let mut p = params.clone();
        p.values_mut()[j] += h;
        let up = joint_loss_grad(&p, &spec, &batch, &obj)?.total;
        p.values_mut()[j] -= 2.0 * h;
        let down = joint_loss_grad(&p, &spec, &batch, &obj)?.total;
        let fd = (up - down) / (2.0 * h);
        let an = g.grad.values()[j];
        worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-6));
    }
    println!("{} parameters, max relative error {:.2e}", params.len(), worst);
    Ok(())
}

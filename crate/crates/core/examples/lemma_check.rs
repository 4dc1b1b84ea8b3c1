//! Checks the joint-KL decomposition on random discrete joints.
//!
//! `cargo run --example lemma_check -- [trials] [seed]`

use ltshare::info::{lemma_terms, lemma_trials, random_lemma_instance, FactorizedConditional};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ltshare::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (q, p) = random_lemma_instance(&mut rng, 3, 3);
    let t = lemma_terms(&q, &p)?;
    println!("one instance ({}x{}x{}):", q.ny, q.na, q.nb);
    println!("  joint KL     {:.6}", t.joint_kl);
    println!("  task A KL    {:.6}", t.task_a_kl);
    println!("  task B KL    {:.6}", t.task_b_kl);
    println!("  I(Z_A;Z_B|Y) {:.6}", t.cmi);
    println!("  residual     {:.3e}", t.residual);

    // with the true marginals plugged in, only the dependence term is left
    let own = lemma_terms(&q, &FactorizedConditional::from_joint(&q))?;
    println!("marginals of Q itself: joint KL {:.6} vs cmi {:.6}", own.joint_kl, own.cmi);

    let s = lemma_trials(trials, seed)?;
    println!("{} trials: max |residual| = {:.3e}", s.trials, s.max_abs_residual);
    Ok(())
}

//! Mean KL risk of a fitted logistic model against d / (2N).
//!
//! `cargo run --release --example logistic_anchor -- [resamples] [N]`

use ltshare::data::{GenConfig, Generator};
use ltshare::oracle::logistic_anchor;

fn main() -> ltshare::Result<()> {
    let mut args = std::env::args().skip(1);
    let m = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let gen = Generator::from_config(&GenConfig {
        num_classes: 2,
        input_dim: 9,
        imbalance_ratio: 1.0,
        n_max: 1000,
        class_mean_scale: 0.5,
        seed: 5,
        ..GenConfig::default()
    })?;
    let eval = gen.sample_features(10_000, 99);
    let r = logistic_anchor(&gen, n, m, &eval, 3)?;
    println!("d = {}, N = {}, M = {}", r.parameters, r.train_size, r.risk.count);
    println!("mean risk {:.3e} +- {:.1e}", r.risk.mean, r.risk.stderr);
    println!("d/(2N)    {:.3e}", r.reference);
    println!("ratio     {:.3}", r.ratio());
    Ok(())
}

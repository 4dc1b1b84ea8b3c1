//! Overall, head and tail accuracy as w_A moves at a fixed shared depth.
//!
//! `cargo run --release --example weight_sweep -- [resamples]`

use ltshare::data::GenConfig;
use ltshare::nn::OptimConfig;
use ltshare::oracle::{weight_sweep, Study, StudyConfig};
use ltshare::pipeline::RunConfig;

fn main() -> ltshare::Result<()> {
    let m = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let study = Study::new(&StudyConfig {
        generator: GenConfig {
            num_classes: 8,
            input_dim: 6,
            imbalance_ratio: 30.0,
            n_max: 150,
            class_mean_scale: 1.2,
            latent_dim: Some(3),
            seed: 1,
            ..GenConfig::default()
        },
        eval_size: 500,
        test_per_class: 40,
        seed: 3,
        ..StudyConfig::default()
    })?;
    let opt = OptimConfig { learning_rate: 0.02, momentum: 0.9, epochs: 15, batch_size: 32, seed: 0 };
    let run = RunConfig {
        trunk_widths: vec![12, 12],
        stage1: opt.clone(),
        stage2: opt.clone(),
        refine: OptimConfig { epochs: 5, ..opt },
        ..RunConfig::default()
    };
    let ws: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let table = weight_sweep(&study, &run, 2, &ws, m)?;
    table.write_csv(std::io::stdout().lock())?;
    if let Some(b) = table.best_accuracy() {
        println!("peak accuracy {:.4} at w_A = {}", b.accuracy.mean, b.w_a);
    }
    Ok(())
}

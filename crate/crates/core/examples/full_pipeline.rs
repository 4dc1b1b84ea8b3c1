//! End to end: Stage 1, selection, Stage 2, assembly, refinement and
//! evaluation, with the model written to disk and read back.

use ltshare::data::{generate, holdout_split, GenConfig};
use ltshare::nn::OptimConfig;
use ltshare::pipeline::{evaluate, full_run, RunConfig};
use ltshare::store::{load_model, save_model};

fn main() -> ltshare::Result<()> {
    let data = generate(&GenConfig {
        num_classes: 10,
        input_dim: 8,
        imbalance_ratio: 20.0,
        n_max: 200,
        class_mean_scale: 1.5,
        latent_dim: Some(3),
        seed: 1,
        ..GenConfig::default()
    })?;
    let (train, test) = holdout_split(&data, 0.3, 11)?;
    let opt = OptimConfig { learning_rate: 0.02, momentum: 0.9, epochs: 30, batch_size: 32, seed: 4 };
    let run = RunConfig {
        trunk_widths: vec![16, 16, 16],
        init_seed: 3,
        stage1: opt.clone(),
        stage2: OptimConfig { seed: 5, ..opt.clone() },
        refine: OptimConfig { epochs: 10, seed: 6, ..opt },
        ..RunConfig::default()
    };

    let out = full_run(&run, &train, Some(&test))?;
    println!("selected C = {}, w_A = {}", out.selection.best.c, out.selection.best.w_a);
    let before = evaluate(&out.assembled, &test)?;
    let after = out.metrics.unwrap();
    println!("assembled: {}", before.csv_row());
    println!("refined:   {}", after.csv_row());

    let path = std::env::temp_dir().join("ltshare_example.model");
    save_model(&path, &out.model)?;
    assert_eq!(load_model(&path)?, out.model);
    println!("model round-tripped through {}", path.display());
    Ok(())
}

//! Stage 1 on a toy long-tailed set, then the proxy over every (C, w_A).

use ltshare::data::{generate, GenConfig};
use ltshare::nn::OptimConfig;
use ltshare::pipeline::{select_structure, stage1, RunConfig};

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
    let opt = OptimConfig { learning_rate: 0.02, momentum: 0.9, epochs: 30, batch_size: 32, seed: 4 };
    let run = RunConfig { trunk_widths: vec![16, 16, 16], stage1: opt, init_seed: 3, ..RunConfig::default() };

    let s1 = stage1(&run, &data)?;
    let grid = select_structure(&s1, &run.depth_candidates(), &run.w_candidates)?;
    println!("{:>3} {:>5} {:>12} {:>12} {:>12} {:>12}", "C", "w_A", "enc var", "enc bias", "dec var", "total");
    for c in run.depth_candidates() {
        let r = grid.best_for_c(c).unwrap();
        println!(
            "{:>3} {:>5.2} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.c, r.w_a, r.encoder_variance, r.encoder_bias, r.decoder_variance, r.total
        );
    }
    println!("selected C = {}, w_A = {}", grid.best.c, grid.best.w_a);
    grid.write_csv(std::io::stdout().lock())?;
    Ok(())
}

//! Monte-Carlo risk over a (C, w_A) grid next to the proxy.
//!
//! `cargo run --release --example oracle_grid -- [resamples]`

use ltshare::data::GenConfig;
use ltshare::nn::OptimConfig;
use ltshare::oracle::{grid_compare, Study, StudyConfig};
use ltshare::pipeline::RunConfig;

fn main() -> ltshare::Result<()> {
    let m = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let study = Study::new(&StudyConfig {
        generator: GenConfig {
            num_classes: 8,
            input_dim: 6,
            imbalance_ratio: 20.0,
            n_max: 150,
            class_mean_scale: 1.2,
            latent_dim: Some(3),
            seed: 1,
            ..GenConfig::default()
        },
        eval_size: 1000,
        test_per_class: 30,
        seed: 7,
        ..StudyConfig::default()
    })?;
    let opt = OptimConfig { learning_rate: 0.02, momentum: 0.9, epochs: 15, batch_size: 32, seed: 0 };
    let run = RunConfig {
        trunk_widths: vec![12, 12, 12],
        stage1: opt.clone(),
        stage2: opt.clone(),
        refine: OptimConfig { epochs: 0, ..opt },
        ..RunConfig::default()
    };
    let ws = [0.0, 0.25, 0.5, 0.75, 1.0];
    let report = grid_compare(&study, &run, &[0, 1, 2, 3], &ws, m)?;

    println!("N = {}, M = {}", report.train_size, report.resamples);
    for (cell, p) in report.cells.iter().zip(&report.proxy) {
        println!(
            "C={} w_A={:.2}  risk {:.4} +- {:.4}  proxy {:.4e}  acc {:.3}",
            cell.c, cell.w_a, cell.risk.mean, cell.risk.stderr, p.total, cell.accuracy.mean
        );
    }
    match report.spearman {
        Some(r) => println!("spearman {r:.3}"),
        None => println!("spearman undefined"),
    }
    println!("oracle best {:?}, proxy best {:?}, rank {:?}", report.oracle_best, report.proxy_best, report.proxy_best_oracle_rank);
    Ok(())
}

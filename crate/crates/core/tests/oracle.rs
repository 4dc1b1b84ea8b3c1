use std::path::Path;

use ltshare::config::CommandConfig;
use ltshare::data::GenConfig;
use ltshare::nn::{Activation, OptimConfig};
use ltshare::oracle::{collect_grid, grid_compare, halves, mc_gen_error, spearman, weight_sweep, OracleReport, Study, StudyConfig};
use ltshare::pipeline::RunConfig;

fn opt(epochs: usize) -> OptimConfig {
    OptimConfig { learning_rate: 0.05, momentum: 0.9, epochs, batch_size: 16, seed: 0 }
}

fn template(widths: Vec<usize>) -> RunConfig {
    RunConfig {
        trunk_widths: widths,
        activation: Activation::Tanh,
        stage1: opt(10),
        stage2: opt(10),
        refine: opt(0),
        ..RunConfig::default()
    }
}

fn small_study(seed: u64) -> Study {
    Study::new(&StudyConfig {
        generator: GenConfig {
            num_classes: 4,
            input_dim: 3,
            imbalance_ratio: 4.0,
            n_max: 60,
            class_mean_scale: 1.5,
            noise_sigma: 1.0,
            latent_dim: None,
            seed: 2,
        },
        eval_size: 400,
        test_per_class: 20,
        seed,
        ..StudyConfig::default()
    })
    .unwrap()
}

#[test]
fn halves_of_the_resamples_agree() {
    let study = small_study(5);
    let g = collect_grid(&study, &template(vec![5, 5]), &[1], &[0.5], 0..30).unwrap();
    let risks: Vec<f64> = g.samples[0].iter().map(|s| s.risk).collect();
    assert_eq!(risks.len(), 30);
    assert!(risks.iter().all(|&r| r >= 0.0));
    let (a, b) = halves(&risks);
    assert!(a.z_distance(&b) < 3.0, "{a:?} vs {b:?}");
}

#[test]
fn doubling_resamples_keeps_the_mean() {
    let study = small_study(6);
    let t = template(vec![5, 5]);
    let m10 = mc_gen_error(&study, &t, 2, 0.7, 10).unwrap();
    let m20 = mc_gen_error(&study, &t, 2, 0.7, 20).unwrap();
    assert!(m10.valid && m20.valid);
    assert!(m10.risk.mean >= 0.0 && m10.risk.stderr >= 0.0);
    assert!(m10.risk.z_distance(&m20.risk) < 2.0, "{:?} vs {:?}", m10.risk, m20.risk);
}

#[test]
fn separable_two_class_risk_vanishes_with_data() {
    let study = Study::new(&StudyConfig {
        generator: GenConfig {
            num_classes: 2,
            input_dim: 2,
            imbalance_ratio: 1.0,
            n_max: 10_000,
            class_mean_scale: 4.0,
            noise_sigma: 1.0,
            latent_dim: None,
            seed: 8,
        },
        eval_size: 2000,
        test_per_class: 100,
        seed: 9,
        ..StudyConfig::default()
    })
    .unwrap();
    assert_eq!(study.train_size(), 20_000);
    let mut t = template(vec![8]);
    t.stage1 = OptimConfig { learning_rate: 0.01, epochs: 5, batch_size: 64, ..opt(5) };
    t.stage2 = t.stage1.clone();
    let cell = mc_gen_error(&study, &t, 1, 0.5, 4).unwrap();
    assert!(cell.risk.mean < 0.01, "{:?}", cell.risk);
}

#[test]
fn grid_compare_against_itself_and_round_trip() {
    let study = small_study(7);
    let report = grid_compare(&study, &template(vec![4, 4]), &[0, 1, 2], &[0.0, 0.5, 1.0], 3).unwrap();
    let totals: Vec<f64> = report.proxy.iter().map(|p| p.total).collect();
    assert_eq!(spearman(&totals, &totals), Some(1.0));
    if let Some(r) = report.spearman {
        assert!((-1.0..=1.0).contains(&r));
    }
    assert!(report.cells.iter().all(|c| c.risk.mean >= 0.0 && c.risk.stderr >= 0.0));
    let back = OracleReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn frozen_reference_instance_reproduces() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let cfg = CommandConfig::load(&dir.join("golden.toml")).unwrap();
    let golden = OracleReport::from_json(&std::fs::read_to_string(dir.join("golden_oracle.json")).unwrap()).unwrap();
    let study = Study::new(&cfg.study_config().unwrap()).unwrap();
    let report = grid_compare(&study, &cfg.run, &cfg.run.depth_candidates(), &cfg.run.w_candidates, cfg.study.resamples).unwrap();
    assert_eq!(report.spearman, golden.spearman);
    assert_eq!(report.oracle_best, golden.oracle_best);
    assert_eq!(report.proxy_best, golden.proxy_best);
    assert_eq!(report.proxy_best_oracle_rank, golden.proxy_best_oracle_rank);
    for (a, b) in report.cells.iter().zip(&golden.cells) {
        assert!((a.risk.mean - b.risk.mean).abs() <= 1e-9 * b.risk.mean.abs(), "{a:?} vs {b:?}");
        assert_eq!(a.accuracy.mean, b.accuracy.mean);
    }
}

#[test]
fn symmetric_tasks_give_a_symmetric_curve() {
    let study = Study::new(&StudyConfig {
        generator: GenConfig {
            num_classes: 2,
            input_dim: 3,
            imbalance_ratio: 1.0,
            n_max: 60,
            class_mean_scale: 0.8,
            noise_sigma: 1.0,
            latent_dim: None,
            seed: 4,
        },
        eval_size: 400,
        test_per_class: 100,
        seed: 12,
        ..StudyConfig::default()
    })
    .unwrap();
    let ws = [0.2, 0.35, 0.65, 0.8];
    let t = weight_sweep(&study, &template(vec![4, 4]), 2, &ws, 10).unwrap();
    for (lo, hi) in [(0.2, 0.8), (0.35, 0.65)] {
        let (a, b) = (t.row(lo).unwrap().accuracy, t.row(hi).unwrap().accuracy);
        let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!((a.mean - b.mean).abs() < 2.0 * se.max(1e-12) || a.mean == b.mean, "w={lo}: {a:?} vs w={hi}: {b:?}");
    }
}

#[test]
fn head_only_weight_does_not_help_the_tail() {
    let study = Study::new(&StudyConfig {
        generator: GenConfig {
            num_classes: 6,
            input_dim: 4,
            imbalance_ratio: 20.0,
            n_max: 100,
            class_mean_scale: 1.2,
            noise_sigma: 1.0,
            latent_dim: None,
            seed: 3,
        },
        eval_size: 400,
        test_per_class: 30,
        seed: 13,
        ..StudyConfig::default()
    })
    .unwrap();
    let t = weight_sweep(&study, &template(vec![6, 6]), 2, &[0.5, 1.0], 6).unwrap();
    let (bal, head) = (t.row(0.5).unwrap(), t.row(1.0).unwrap());
    assert!(head.tail_accuracy.mean <= bal.tail_accuracy.mean, "{:?} vs {:?}", head.tail_accuracy, bal.tail_accuracy);
}

//! Command-line front end. Each subcommand reads its inputs from the run
//! directory and writes new versioned artifacts back into it; `full-run`
//! chains the staged commands.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_list, CommandConfig, Overrides};
use crate::data::{generate, holdout_split, load_csv, Generator, LongTailDataset};
use crate::error::{Error, Result};
use crate::info::lemma_trials;
use crate::oracle::{grid_compare, weight_sweep, Study};
use crate::pipeline::{assemble, evaluate, refine_decoders, select_structure, stage1, stage2, Metrics};
use crate::store::{
    file_name, load_model, load_stage1, load_stage2, read_tagged_json, save_model, save_stage1, save_stage2, RunDir,
    SelectionRecord, CONFIG_FORMAT, DATASET_FORMAT, GRID_FORMAT, METRICS_FORMAT, MODEL_FORMAT, SELECTION_FORMAT,
};

#[derive(Debug, Parser)]
#[command(name = "ltshare", version, about = "Head/tail task sharing for long-tailed classification")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    /// TOML configuration file; a config snapshot from an earlier run works too.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed from which every named seed is derived.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel jobs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Shared-depth candidates, e.g. `0,1,2`.
    #[arg(long, global = true)]
    pub grid_c: Option<String>,
    /// Task-A weight candidates, e.g. `0,0.5,1`.
    #[arg(long, global = true)]
    pub grid_w: Option<String>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Monte-Carlo resamples for `oracle` and `sweep`.
    #[arg(long, global = true)]
    pub resamples: Option<usize>,
    /// Training-set size per resample for `oracle` and `sweep`.
    #[arg(long, global = true)]
    pub train_size: Option<usize>,
    /// Skip decoder refinement.
    #[arg(long, global = true)]
    pub no_refine: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or ingest) a dataset and write the train/test split.
    GenData,
    /// Train both tasks independently and estimate their Fishers.
    Stage1,
    /// Evaluate the proxy grid and record the selected structure.
    Search,
    /// Joint weighted training at the selected task weight.
    Stage2,
    /// Combine the Stage-2 encoder with the Stage-1 decoders.
    Assemble,
    /// Fine-tune the decoders with the encoder frozen.
    Refine,
    /// Accuracy and task-wise BCE on the held-out split.
    Eval,
    /// All of the above in sequence.
    FullRun,
    /// Check the risk decomposition on random discrete instances.
    VerifyLemma {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Monte-Carlo risk over the grid compared with the proxy.
    Oracle,
    /// Accuracy and risk against the task weight at a fixed depth.
    Sweep {
        /// Shared depth; defaults to the configured sweep depth or the full trunk.
        #[arg(long)]
        depth: Option<usize>,
    },
}

impl Flags {
    pub fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            out: self.out.clone(),
            seed: self.seed,
            jobs: self.jobs,
            grid_c: self.grid_c.as_deref().map(parse_list).transpose()?,
            grid_w: self.grid_w.as_deref().map(parse_list).transpose()?,
            tau: self.tau,
            resamples: self.resamples,
            train_size: self.train_size,
            trials: None,
            no_refine: self.no_refine,
        })
    }

    pub fn resolve(&self, trials: Option<usize>) -> Result<CommandConfig> {
        let base = match &self.config {
            Some(p) => CommandConfig::load(p)?,
            None => CommandConfig::default(),
        };
        base.apply(&Overrides { trials, ..self.overrides()? })
    }
}

/// Resolves the configuration, snapshots it, and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    let trials = match cli.command {
        Command::VerifyLemma { trials } => trials,
        _ => None,
    };
    let cfg = cli.flags.resolve(trials)?;
    let dir = RunDir::create(&cfg.out)?;
    dir.write_text("config", "toml", CONFIG_FORMAT, &cfg.to_toml()?)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(&cli.command, &cfg, &dir))
}

fn dispatch(cmd: &Command, cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    match cmd {
        Command::GenData => gen_data(cfg, dir),
        Command::Stage1 => run_stage1(cfg, dir),
        Command::Search => search(cfg, dir),
        Command::Stage2 => run_stage2(cfg, dir),
        Command::Assemble => run_assemble(cfg, dir),
        Command::Refine => refine(cfg, dir),
        Command::Eval => eval(cfg, dir).map(|_| ()),
        Command::FullRun => full(cfg, dir),
        Command::VerifyLemma { .. } => verify_lemma(cfg, dir),
        Command::Oracle => oracle(cfg, dir),
        Command::Sweep { depth } => sweep(cfg, dir, *depth),
    }
}

fn num_classes(cfg: &CommandConfig) -> Option<usize> {
    match cfg.data.csv {
        Some(_) => cfg.data.num_classes,
        None => Some(cfg.data.generator.num_classes),
    }
}

fn save_dataset(dir: &RunDir, name: &str, ds: &LongTailDataset) -> Result<PathBuf> {
    dir.write_with(name, "csv", DATASET_FORMAT, |p| ds.save_csv(p))
}

pub fn gen_data(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let ds = match &cfg.data.csv {
        Some(p) => load_csv(p, cfg.data.num_classes)?,
        None => {
            let g = Generator::from_config(&cfg.data.generator)?;
            dir.write_with("generator", "json", "ltshare-generator/1", |p| g.save(p))?;
            generate(&cfg.data.generator)?
        }
    };
    let (train, test) = holdout_split(&ds, cfg.data.holdout_fraction, cfg.data.holdout_seed)?;
    let tp = save_dataset(dir, "train", &train)?;
    save_dataset(dir, "test", &test)?;
    println!(
        "dataset: {} rows, {} classes, counts {:?}; train {} / test {} -> {}",
        ds.len(),
        ds.num_classes,
        ds.class_counts,
        train.len(),
        test.len(),
        file_name(&tp)
    );
    Ok(())
}

fn latest_dataset(cfg: &CommandConfig, dir: &RunDir, name: &str) -> Result<(PathBuf, LongTailDataset)> {
    let p = dir.require(name, "csv")?;
    let ds = load_csv(&p, num_classes(cfg))?;
    Ok((p, ds))
}

pub fn run_stage1(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let (tp, train) = latest_dataset(cfg, dir, "train")?;
    let s1 = stage1(&cfg.run, &train)?;
    let rec = save_stage1(dir, &s1, &file_name(&tp))?;
    println!(
        "stage1: {} params, head {:?} / tail {:?}, final loss A {:.6} B {:.6} -> {}",
        s1.spec.total_params(),
        s1.split.head,
        s1.split.tail,
        s1.losses_a.last().copied().unwrap_or(f64::NAN),
        s1.losses_b.last().copied().unwrap_or(f64::NAN),
        file_name(&rec)
    );
    Ok(())
}

pub fn search(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let rec_path = dir.require("stage1", "json")?;
    let (_, s1) = load_stage1(dir, &rec_path)?;
    let cs = cfg.run.depth_candidates();
    let ws = cfg.run.w_candidates.clone();
    let t = Instant::now();
    let grid = select_structure(&s1, &cs, &ws)?;
    let elapsed = t.elapsed();
    let gp = dir.write_with("grid", "csv", GRID_FORMAT, |p| {
        let mut w = BufWriter::new(File::create(p)?);
        grid.write_csv(&mut w)?;
        Ok(std::io::Write::flush(&mut w)?)
    })?;
    let sel = SelectionRecord {
        format: SELECTION_FORMAT.into(),
        stage1: file_name(&rec_path),
        grid: file_name(&gp),
        c: grid.best.c,
        w_a: grid.best.w_a,
        best: grid.best,
        c_candidates: cs.clone(),
        w_candidates: ws.clone(),
    };
    let sp = dir.write_json("selection", SELECTION_FORMAT, &sel)?;
    println!(
        "search: {}x{} grid in {:.3} ms; C* = {}, w_A* = {} (proxy {:.6e}) -> {}",
        cs.len(),
        ws.len(),
        elapsed.as_secs_f64() * 1e3,
        sel.c,
        sel.w_a,
        sel.best.total,
        file_name(&sp)
    );
    Ok(())
}

pub fn run_stage2(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let sel_path = dir.require("selection", "json")?;
    let sel: SelectionRecord = read_tagged_json(&sel_path, SELECTION_FORMAT)?;
    let (rec, s1) = load_stage1(dir, &dir.resolve(&sel.stage1)?)?;
    let train = load_csv(&dir.resolve(&rec.train_data)?, num_classes(cfg))?;
    let s2 = stage2(&cfg.run, &s1, &train.to_batch(&s1.split), sel.w_a)?;
    let p = save_stage2(dir, &s2, &s1.spec, &sel.stage1, &file_name(&sel_path))?;
    println!(
        "stage2: w_A = {}, final loss {:.6} -> {}",
        s2.w_a,
        s2.epoch_losses.last().copied().unwrap_or(f64::NAN),
        file_name(&p)
    );
    Ok(())
}

pub fn run_assemble(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let (rec2, s2) = load_stage2(dir, &dir.require("stage2", "json")?)?;
    let sel: SelectionRecord = read_tagged_json(&dir.resolve(&rec2.selection)?, SELECTION_FORMAT)?;
    let (_, s1) = load_stage1(dir, &dir.resolve(&rec2.stage1)?)?;
    let model = assemble(&s1, &s2, sel.c, &cfg.run)?;
    let p = dir.write_with("assembled", "model", MODEL_FORMAT, |p| save_model(p, &model))?;
    println!("assemble: C = {}, w_A = {} -> {}", model.c, s2.w_a, file_name(&p));
    Ok(())
}

pub fn refine(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let model = load_model(&dir.require("assembled", "model")?)?;
    let (_, train) = latest_dataset(cfg, dir, "train")?;
    let refined = refine_decoders(&model, &train.to_batch(&model.split), &cfg.run.refine)?;
    let p = dir.write_with("model", "model", MODEL_FORMAT, |p| save_model(p, &refined))?;
    println!("refine: {} epochs -> {}", cfg.run.refine.epochs, file_name(&p));
    Ok(())
}

pub fn eval(cfg: &CommandConfig, dir: &RunDir) -> Result<Metrics> {
    let mp = match dir.latest("model", "model")? {
        Some(p) => p,
        None => dir.require("assembled", "model")?,
    };
    let model = load_model(&mp)?;
    let (_, test) = latest_dataset(cfg, dir, "test")?;
    let m = evaluate(&model, &test)?;
    let p = dir.write_text("metrics", "csv", METRICS_FORMAT, &format!("{}\n{}\n", Metrics::CSV_HEADER, m.csv_row()))?;
    println!(
        "eval ({}): accuracy {:.4} (head {:.4}, tail {:.4}), BCE A {:.5} B {:.5} on {} rows -> {}",
        file_name(&mp),
        m.overall_accuracy,
        m.head_accuracy,
        m.tail_accuracy,
        m.bce_a,
        m.bce_b,
        m.samples,
        file_name(&p)
    );
    Ok(m)
}

pub fn full(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    gen_data(cfg, dir)?;
    run_stage1(cfg, dir)?;
    search(cfg, dir)?;
    let grid = dir.require("grid", "csv")?;
    print!("proxy table ({}):\n{}", file_name(&grid), std::fs::read_to_string(&grid)?);
    run_stage2(cfg, dir)?;
    run_assemble(cfg, dir)?;
    refine(cfg, dir)?;
    eval(cfg, dir)?;
    Ok(())
}

pub fn verify_lemma(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let s = lemma_trials(cfg.lemma.trials, cfg.lemma.seed)?;
    dir.write_json("lemma", "ltshare-lemma/1", &serde_json::json!({"format": "ltshare-lemma/1", "seed": cfg.lemma.seed, "summary": s}))?;
    println!("verify-lemma: {} trials, max |residual| = {:.3e}", s.trials, s.max_abs_residual);
    if !(s.max_abs_residual < 1e-10) {
        return Err(Error::Verification(format!("max residual {:e} >= 1e-10", s.max_abs_residual)));
    }
    Ok(())
}

pub fn oracle(cfg: &CommandConfig, dir: &RunDir) -> Result<()> {
    let study = Study::new(&cfg.study_config()?)?;
    let cs = cfg.run.depth_candidates();
    let report = grid_compare(&study, &cfg.run, &cs, &cfg.run.w_candidates, cfg.study.resamples)?;
    let cp = dir.write_with("oracle", "csv", "ltshare-oracle-csv/1", |p| report.write_csv(BufWriter::new(File::create(p)?)))?;
    let fmt = report.format.clone();
    dir.write_text("oracle", "json", &fmt, &report.to_json()?)?;
    let cell = |c: Option<&crate::oracle::GridCell>| c.map_or("none".to_string(), |c| format!("(C={}, w_A={})", c.c, c.w_a));
    println!(
        "oracle: N = {}, M = {}, {} valid cells ({} invalid); spearman {}; oracle best {}, proxy best {} at oracle rank {} -> {}",
        report.train_size,
        report.resamples,
        report.valid_cells(),
        report.invalid_cells,
        report.spearman.map_or("undefined".into(), |r| format!("{r:.4}")),
        cell(report.oracle_best.as_ref()),
        cell(Some(&report.proxy_best)),
        report.proxy_best_oracle_rank.map_or("n/a".into(), |r| r.to_string()),
        file_name(&cp)
    );
    Ok(())
}

pub fn sweep(cfg: &CommandConfig, dir: &RunDir, depth: Option<usize>) -> Result<()> {
    let c = depth.or(cfg.study.sweep_depth).unwrap_or(cfg.run.trunk_widths.len());
    if c > cfg.run.trunk_widths.len() {
        return Err(Error::Config(format!("sweep depth {c} exceeds trunk depth")));
    }
    let study = Study::new(&cfg.study_config()?)?;
    let table = weight_sweep(&study, &cfg.run, c, &cfg.run.w_candidates, cfg.study.resamples)?;
    let cp = dir.write_with("sweep", "csv", "ltshare-sweep-csv/1", |p| table.write_csv(BufWriter::new(File::create(p)?)))?;
    dir.write_json("sweep", &table.format.clone(), &table)?;
    for r in &table.rows {
        println!(
            "  w_A = {:<4} accuracy {:.4} +- {:.4}  head {:.4}  tail {:.4}  risk {:.5}",
            r.w_a, r.accuracy.mean, r.accuracy.stderr, r.head_accuracy.mean, r.tail_accuracy.mean, r.risk.mean
        );
    }
    match table.best_accuracy() {
        Some(b) => println!("sweep: C = {c}, best w_A = {} (accuracy {:.4}) -> {}", b.w_a, b.accuracy.mean, file_name(&cp)),
        None => println!("sweep: C = {c}, no valid rows -> {}", file_name(&cp)),
    }
    Ok(())
}

use std::path::{Path, PathBuf};

use addlab_core::analysis::{
    carry_loss_report, class_coverage, error_histogram, find_min_fraction, learning_map, probe, render_map,
    sweep_csv, sweep_train_fraction, SplitFamily,
};
use addlab_core::dataset::{build_image_set, read_packed, write_packed};
use addlab_core::glyph::{render_formula, Scale};
use addlab_core::io_util::{read_file, write_atomic};
use addlab_core::nn::{grad_check_report, NetworkSpec};
use addlab_core::splits::{
    commutativity_split, integer_exclusion_split, load_manifest, parse_intervals, random_pair_split, save_manifest,
    uniform_random_split,
};
use addlab_core::train::{
    evaluate, load_checkpoint, predictions_csv, run_trials, save_checkpoint, summarize, train, trials_csv,
    EarlyStop, OptimizerConfig, TrainConfig, TrialResult,
};
use addlab_core::{AdditionKey, ImageSet, RenderConfig, SplitManifest};
use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::args::*;
use crate::manifest::{beside, Run};
use crate::UsageError;

pub fn render_config(c: &CanvasArgs) -> RenderConfig {
    let mut cfg = RenderConfig::square(c.size);
    cfg.ink = c.ink;
    cfg.background = c.background;
    if let Some(s) = c.scale {
        cfg.scale = Scale::Fixed(s);
    }
    cfg
}

/// The default architecture for the set's canvas.
pub fn network_for(set: &ImageSet) -> Result<NetworkSpec> {
    let cfg = &set.render_cfg;
    if cfg.width != cfg.height {
        bail!("small-cnn needs a square canvas, got {}x{}", cfg.width, cfg.height);
    }
    Ok(NetworkSpec::small_cnn(cfg.width as usize, set.n_max)?)
}

pub fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let base = TrainConfig::default();
    let optimizer = match a.optimizer {
        OptimizerName::Adam => match (a.lr, base.optimizer) {
            (Some(lr), OptimizerConfig::Adam { beta1, beta2, eps, .. }) => OptimizerConfig::Adam { lr, beta1, beta2, eps },
            (Some(lr), _) => OptimizerConfig::adam(lr),
            (None, OptimizerConfig::Adam { .. }) => base.optimizer,
            (None, _) => OptimizerConfig::adam(1e-3),
        },
        OptimizerName::Sgd => OptimizerConfig::Sgd { lr: a.lr.unwrap_or(0.01), momentum: a.momentum },
    };
    let early_stop = if a.no_early_stop {
        None
    } else {
        let d = base.early_stop.unwrap_or(EarlyStop { train_acc_target: 1.0, patience: 3 });
        Some(EarlyStop { patience: a.patience.unwrap_or(d.patience), ..d })
    };
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(base.epochs),
        batch_size: a.batch_size.unwrap_or(base.batch_size),
        optimizer,
        seed: a.seed,
        deterministic: !a.nondeterministic,
        early_stop,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn read_trial(path: &Path) -> Result<TrialResult> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("{}: not a trial JSON file", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |a| format!("{a:.4}"))
}

pub fn gen(argv: &[String], a: &GenArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    let set = build_image_set(a.n_max, &render_config(&a.canvas))?;
    write_packed(&set, &a.out)?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    println!("{} images ({}x{}) -> {}", set.len(), set.render_cfg.width, set.render_cfg.height, a.out.display());
    Ok(())
}

pub fn render(argv: &[String], a: &RenderArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    let img = render_formula(AdditionKey::new(a.n, a.m), a.n_max, &render_config(&a.canvas))?;
    write_atomic(&a.out, &img.to_pgm())?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    Ok(())
}

fn need<T: Copy>(v: Option<T>, flag: &str, protocol: &str) -> Result<T> {
    v.ok_or_else(|| UsageError(format!("--{flag} is required for --protocol {protocol}")).into())
}

pub fn build_split(a: &SplitArgs, n_max: u32) -> Result<SplitManifest> {
    let only = |allowed: &[&str]| -> Result<()> {
        let given = [
            ("train-fraction", a.train_fraction.is_some()),
            ("test-fraction", a.test_fraction.is_some()),
            ("intervals", a.intervals.is_some()),
        ];
        match given.iter().find(|(f, set)| *set && !allowed.contains(f)) {
            Some((f, _)) => Err(UsageError(format!("--{f} does not apply to this protocol")).into()),
            None => Ok(()),
        }
    };
    Ok(match a.protocol {
        ProtocolName::Commutativity => {
            only(&["train-fraction"])?;
            commutativity_split(n_max, a.train_fraction.unwrap_or(0.5), a.seed)?
        }
        ProtocolName::RandomPair => {
            only(&["train-fraction"])?;
            random_pair_split(n_max, need(a.train_fraction, "train-fraction", "random-pair")?, a.seed)?
        }
        ProtocolName::Uniform => {
            only(&["test-fraction"])?;
            uniform_random_split(n_max, need(a.test_fraction, "test-fraction", "uniform")?, a.seed)?
        }
        ProtocolName::Exclusion => {
            only(&["intervals"])?;
            let text = a.intervals.as_deref().ok_or_else(|| UsageError("--intervals is required for --protocol exclusion".into()))?;
            integer_exclusion_split(n_max, &parse_intervals(text).map_err(|e| UsageError(e.to_string()))?)?
        }
    })
}

pub fn split(argv: &[String], a: &SplitArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    run.seed(a.seed);
    let n_max = match (&a.omega, a.n_max) {
        (Some(path), _) => {
            run.input(path)?;
            read_packed(path)?.n_max
        }
        (None, Some(n)) => n,
        (None, None) => unreachable!("clap requires one of --omega/--n-max"),
    };
    let manifest = build_split(a, n_max)?;
    save_manifest(&manifest, &a.out)?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    println!("{}: |Φ|={} |Ψ|={}", manifest.protocol.name(), manifest.train_count(), manifest.test_count());
    Ok(())
}

fn default_trial_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("trial.json")
}

pub fn train_cmd(argv: &[String], a: &TrainCmd) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let mut run = Run::start(argv, a);
    run.seed(cfg.seed);
    run.deterministic(cfg.deterministic);
    run.input(&a.omega)?;
    run.input(&a.split)?;
    let set = read_packed(&a.omega)?;
    let manifest = load_manifest(&a.split)?;
    let out = train(&network_for(&set)?, &set, &manifest, &cfg)?;
    save_checkpoint(&out.checkpoint, &a.out)?;
    let trial_path = a.predictions.clone().unwrap_or_else(|| default_trial_path(&a.out));
    write_json(&trial_path, &out.result)?;
    run.output(&a.out)?;
    run.output(&trial_path)?;
    run.finish(&beside(&a.out))?;
    let r = &out.result;
    println!("epochs {} train_top1 {:.4} test_top1 {}", r.epochs_run, r.train_top1, fmt_acc(r.test_top1));
    Ok(())
}

pub fn eval(argv: &[String], a: &EvalArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    run.input(&a.ckpt)?;
    run.input(&a.omega)?;
    let ckpt = load_checkpoint(&a.ckpt)?;
    let set = read_packed(&a.omega)?;
    let manifest = match &a.split {
        Some(p) => {
            run.input(p)?;
            Some(load_manifest(p)?)
        }
        None => None,
    };
    let keys: Vec<AdditionKey> = match (a.keys, &manifest) {
        (KeySelection::All, _) => set.keys().collect(),
        (KeySelection::Train, Some(m)) => m.train_keys(),
        (KeySelection::Test, Some(m)) => m.test_keys(),
        (_, None) => return Err(UsageError("--keys train/test needs --split".into()).into()),
    };
    let preds = evaluate(&ckpt, &set, &keys, manifest.as_ref())?;
    if is_json(&a.out) {
        write_json(&a.out, &preds)?;
    } else {
        write_atomic(&a.out, predictions_csv(&preds).as_bytes())?;
    }
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    let hits = preds.iter().filter(|p| p.correct()).count();
    println!("{hits}/{} correct", preds.len());
    Ok(())
}

#[derive(Serialize)]
struct TrialsSummaryFile<'a> {
    protocol: &'a str,
    n_max: u32,
    seed: u64,
    summary: addlab_core::train::TrialSummary,
}

/// Trains the trials and writes `trials.csv`, `summary.json` and per-trial
/// `trial-<t>.json` / `split-<t>.json` (plus checkpoints when asked).
pub fn write_trials(
    run: &mut Run,
    set: &ImageSet,
    template: &SplitManifest,
    cfg: &TrainConfig,
    trials: usize,
    out_dir: &Path,
    save_ckpts: bool,
) -> Result<Vec<(TrialResult, SplitManifest)>> {
    let spec = network_for(set)?;
    let outs = run_trials(&spec, set, template, cfg, trials)?;
    let mut kept = Vec::with_capacity(outs.len());
    for o in outs {
        let t = o.result.trial;
        run.seed(o.result.seed);
        let trial_path = out_dir.join(format!("trial-{t}.json"));
        let split_path = out_dir.join(format!("split-{t}.json"));
        write_json(&trial_path, &o.result)?;
        save_manifest(&o.split, &split_path)?;
        run.output(&trial_path)?;
        run.output(&split_path)?;
        if save_ckpts {
            let p = out_dir.join(format!("trial-{t}.ckpt"));
            save_checkpoint(&o.checkpoint, &p)?;
            run.output(&p)?;
        }
        kept.push((o.result, o.split));
    }
    let results: Vec<TrialResult> = kept.iter().map(|(r, _)| r.clone()).collect();
    let csv_path = out_dir.join("trials.csv");
    write_atomic(&csv_path, trials_csv(&results).as_bytes())?;
    run.output(&csv_path)?;
    let summary = summarize(&results)?;
    let summary_path = out_dir.join("summary.json");
    write_json(
        &summary_path,
        &TrialsSummaryFile { protocol: template.protocol.name(), n_max: set.n_max, seed: cfg.seed, summary: summary.clone() },
    )?;
    run.output(&summary_path)?;
    println!(
        "{} trials: test_top1 mean {} min {} max {}; train_top1 mean {:.4}",
        summary.trials,
        fmt_acc(summary.mean_test_top1),
        fmt_acc(summary.min_test_top1),
        fmt_acc(summary.max_test_top1),
        summary.mean_train_top1
    );
    Ok(kept)
}

pub fn trials(argv: &[String], a: &TrialsArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    if a.trials == 0 {
        return Err(UsageError("--trials must be at least 1".into()).into());
    }
    let mut run = Run::start(argv, a);
    run.deterministic(cfg.deterministic);
    run.input(&a.omega)?;
    run.input(&a.split)?;
    let set = read_packed(&a.omega)?;
    let template = load_manifest(&a.split)?;
    write_trials(&mut run, &set, &template, &cfg, a.trials, &a.out_dir, a.save_checkpoints)?;
    run.finish(&a.out_dir.join("run.json"))?;
    Ok(())
}

pub fn family(f: FamilyName) -> SplitFamily {
    match f {
        FamilyName::Commutativity => SplitFamily::Commutativity,
        FamilyName::RandomPair => SplitFamily::RandomPair,
        FamilyName::Uniform => SplitFamily::UniformRandom,
    }
}

pub fn sweep(argv: &[String], a: &SweepArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    if a.fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(UsageError("--fractions must be strictly ascending".into()).into());
    }
    let mut run = Run::start(argv, a);
    run.seed(cfg.seed);
    run.deterministic(cfg.deterministic);
    run.input(&a.omega)?;
    let set = read_packed(&a.omega)?;
    let rows = sweep_train_fraction(&set, family(a.family), &a.fractions, &network_for(&set)?, &cfg, a.trials)?;
    write_atomic(&a.out, sweep_csv(&rows).as_bytes())?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    for r in &rows {
        println!("fraction {} test_top1 {}", r.fraction, fmt_acc(r.mean_test_top1));
    }
    if let Some(target) = a.target {
        match find_min_fraction(&rows, target) {
            Some(f) => println!("smallest fraction reaching {target}: {f}"),
            None => println!("no swept fraction reaches {target}"),
        }
    }
    Ok(())
}

pub fn map(argv: &[String], a: &MapArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    run.input(&a.split)?;
    run.input(&a.trial)?;
    let manifest = load_manifest(&a.split)?;
    let map = learning_map(&manifest, &read_trial(&a.trial)?)?;
    write_atomic(&a.out, &render_map(&map, a.cell).map_err(|e| UsageError(e.to_string()))?)?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    let c = map.counts();
    println!(
        "train right {} wrong {}; test right {} wrong {}",
        c.train_right, c.train_wrong, c.test_right, c.test_wrong
    );
    Ok(())
}

pub fn hist(argv: &[String], a: &HistArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    let mut trials = Vec::with_capacity(a.trials.len());
    for p in &a.trials {
        run.input(p)?;
        trials.push(read_trial(p)?);
    }
    let h = error_histogram(&trials)?;
    write_atomic(&a.out, h.to_csv().as_bytes())?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    println!("{} test errors over {} trials", h.total(), h.trials);
    Ok(())
}

pub fn carry(argv: &[String], a: &CarryArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    run.input(&a.trial)?;
    let report = carry_loss_report(&read_trial(&a.trial)?);
    if is_json(&a.out) {
        write_json(&a.out, &report)?;
    } else {
        write_atomic(&a.out, report.to_csv().as_bytes())?;
    }
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    println!("{} test errors, {} lost ten", report.total_errors, report.lost_ten);
    Ok(())
}

pub fn probe_cmd(argv: &[String], a: &ProbeArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    run.input(&a.ckpt)?;
    run.input(&a.omega)?;
    let ckpt = load_checkpoint(&a.ckpt)?;
    let set = read_packed(&a.omega)?;
    let report = probe(&ckpt, &set, AdditionKey::new(a.n, a.m))?;
    print!("{}", report.table(a.top));
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        run.output(out)?;
        run.finish(&beside(out))?;
    }
    Ok(())
}

pub fn coverage(argv: &[String], a: &CoverageArgs) -> Result<()> {
    let mut run = Run::start(argv, a);
    run.input(&a.split)?;
    let cov = class_coverage(&load_manifest(&a.split)?)?;
    write_json(&a.out, &cov)?;
    run.output(&a.out)?;
    run.finish(&beside(&a.out))?;
    let zero: Vec<String> = cov.iter().filter(|c| c.zero).map(|c| c.label.to_string()).collect();
    println!("zero-coverage labels: {}", if zero.is_empty() { "none".into() } else { zero.join(",") });
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    if a.classes < 2 {
        return Err(UsageError("--classes must be at least 2".into()).into());
    }
    let spec = NetworkSpec::toy(a.classes);
    let (eps, limit) = match a.precision {
        Precision::F32 => (a.eps.unwrap_or(1e-3), 1e-3),
        Precision::F64 => (a.eps.unwrap_or(1e-4), 1e-6),
    };
    let mut worst: f64 = 0.0;
    for seed in 0..a.seeds {
        let r = match a.precision {
            Precision::F32 => grad_check_report::<f32, f64>(&spec, seed, eps)?,
            Precision::F64 => grad_check_report::<f64, f64>(&spec, seed, eps)?,
        };
        println!("seed {seed}: max relative error {:.3e} ({} parameters)", r.max_rel_error, r.params_checked);
        worst = worst.max(r.max_rel_error);
    }
    println!("worst {worst:.3e} (limit {limit:.0e}, eps {eps:.0e})");
    if worst >= limit {
        bail!("gradient check failed: {worst:.3e} >= {limit:.0e}");
    }
    Ok(())
}

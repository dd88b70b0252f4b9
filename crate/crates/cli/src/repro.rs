//! Experiment recipes. A run directory is named after the digest of its
//! recipe, so rerunning the same recipe rewrites the same files.

use std::path::Path;

use addlab_core::analysis::{
    carry_loss_report, class_coverage, error_histogram, learning_map, probe, sweep_csv, sweep_train_fraction,
    write_map, SplitFamily, DEFAULT_CELL_SIZE,
};
use addlab_core::dataset::{build_image_set, write_packed};
use addlab_core::io_util::{sha256_hex, write_atomic};
use addlab_core::train::{load_checkpoint, TrainConfig};
use addlab_core::{AdditionKey, ImageSet, RenderConfig, SplitProtocol};
use anyhow::Result;
use serde::Serialize;

use crate::args::{Experiment, ReproArgs, ScaleName};
use crate::commands::{network_for, write_trials};
use crate::manifest::Run;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arm {
    Trials { name: String, protocol: SplitProtocol },
    Sweep { name: String, family: SplitFamily, fractions: Vec<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct Recipe {
    pub experiment: Experiment,
    pub scale: ScaleName,
    pub n_max: u32,
    pub size: u32,
    pub trials: usize,
    pub train: TrainConfig,
    pub arms: Vec<Arm>,
    /// Keys whose probability tables are dumped from the first trial of the first arm.
    pub probes: Vec<AdditionKey>,
}

fn trials_arm(name: &str, protocol: SplitProtocol) -> Arm {
    Arm::Trials { name: name.into(), protocol }
}

fn exclusion(intervals: &[[u32; 2]]) -> SplitProtocol {
    SplitProtocol::IntegerExclusion { intervals: intervals.to_vec() }
}

pub fn recipe(a: &ReproArgs) -> Recipe {
    let full = a.scale == ScaleName::Full;
    let size = if full { 224 } else { 64 };
    let default_trials = if full { 10 } else { 3 };
    let (n_max, trials, arms, probes) = match a.experiment {
        Experiment::Exp1 => (
            if full { 99 } else { 29 },
            default_trials,
            vec![trials_arm("commutativity", SplitProtocol::Commutativity { train_fraction: 0.5 })],
            vec![],
        ),
        Experiment::Exp2 => (
            29,
            if full { 10 } else { 1 },
            vec![Arm::Sweep {
                name: "random-pair".into(),
                family: SplitFamily::RandomPair,
                fractions: if full { vec![0.5, 0.6, 0.7, 0.8, 0.86, 0.9] } else { vec![0.5, 0.7, 0.86] },
            }],
            vec![],
        ),
        Experiment::Exp3 => (
            if full { 99 } else { 29 },
            if full { 10 } else { 1 },
            vec![Arm::Sweep {
                name: "uniform".into(),
                family: SplitFamily::UniformRandom,
                fractions: if full { vec![0.15, 0.3, 0.5, 0.7, 0.85] } else { vec![0.15, 0.5, 0.85] },
            }],
            vec![],
        ),
        Experiment::Exp4 => (29, 1, vec![trials_arm("exclude-13", exclusion(&[[13, 13]]))], vec![]),
        Experiment::Exp5 => (
            99,
            1,
            vec![
                trials_arm("exclude-33-37-62-68", exclusion(&[[33, 37], [62, 68]])),
                trials_arm("collapse-60-69", exclusion(&[[60, 69]])),
            ],
            vec![AdditionKey::new(66, 65)],
        ),
    };
    let base = TrainConfig::default();
    Recipe {
        experiment: a.experiment,
        scale: a.scale,
        n_max,
        size,
        trials: a.trials.unwrap_or(trials),
        train: TrainConfig { seed: a.seed, epochs: a.epochs.unwrap_or(base.epochs), ..base },
        arms,
        probes,
    }
}

fn name_of(e: Experiment) -> &'static str {
    match e {
        Experiment::Exp1 => "exp1",
        Experiment::Exp2 => "exp2",
        Experiment::Exp3 => "exp3",
        Experiment::Exp4 => "exp4",
        Experiment::Exp5 => "exp5",
    }
}

fn run_arm(run: &mut Run, set: &ImageSet, recipe: &Recipe, arm: &Arm, dir: &Path, probes: &[AdditionKey]) -> Result<()> {
    match arm {
        Arm::Trials { protocol, .. } => {
            let template = protocol.apply(set.n_max, recipe.train.seed)?;
            let kept = write_trials(run, set, &template, &recipe.train, recipe.trials, dir, true)?;
            for (result, split) in &kept {
                let t = result.trial;
                let map = learning_map(split, result)?;
                let map_path = dir.join(format!("map-{t}.ppm"));
                write_map(&map, DEFAULT_CELL_SIZE, &map_path)?;
                run.output(&map_path)?;
                let carry_path = dir.join(format!("carry-{t}.csv"));
                write_atomic(&carry_path, carry_loss_report(result).to_csv().as_bytes())?;
                run.output(&carry_path)?;
            }
            let results: Vec<_> = kept.iter().map(|(r, _)| r.clone()).collect();
            let hist_path = dir.join("hist.csv");
            write_atomic(&hist_path, error_histogram(&results)?.to_csv().as_bytes())?;
            run.output(&hist_path)?;
            let cov_path = dir.join("coverage.json");
            let mut text = serde_json::to_string_pretty(&class_coverage(&kept[0].1)?)?;
            text.push('\n');
            write_atomic(&cov_path, text.as_bytes())?;
            run.output(&cov_path)?;
            if !probes.is_empty() {
                let ckpt = load_checkpoint(&dir.join("trial-0.ckpt"))?;
                for &key in probes {
                    let report = probe(&ckpt, set, key)?;
                    print!("{}", report.table(5));
                    let p = dir.join(format!("probe-{}-{}.json", key.n, key.m));
                    let mut text = serde_json::to_string_pretty(&report)?;
                    text.push('\n');
                    write_atomic(&p, text.as_bytes())?;
                    run.output(&p)?;
                }
            }
        }
        Arm::Sweep { family, fractions, .. } => {
            let rows = sweep_train_fraction(set, *family, fractions, &network_for(set)?, &recipe.train, recipe.trials)?;
            let p = dir.join("sweep.csv");
            write_atomic(&p, sweep_csv(&rows).as_bytes())?;
            run.output(&p)?;
            print!("{}", sweep_csv(&rows));
        }
    }
    Ok(())
}

pub fn repro(argv: &[String], a: &ReproArgs) -> Result<()> {
    let recipe = recipe(a);
    if a.scale == ScaleName::Full {
        eprintln!(
            "addlab: warning: full scale renders {}x{} images and trains {} trial(s) per arm; expect many CPU hours",
            recipe.size, recipe.size, recipe.trials
        );
    }
    let recipe_json = serde_json::to_vec(&recipe)?;
    let digest = sha256_hex(&recipe_json);
    let scale = match a.scale {
        ScaleName::Desk => "desk",
        ScaleName::Full => "full",
    };
    let dir = a.out_root.join(format!("{}-{scale}-{}", name_of(a.experiment), &digest[..12]));
    let mut run = Run::start(argv, &recipe);
    run.seed(recipe.train.seed);

    let recipe_path = dir.join("recipe.json");
    let mut text = serde_json::to_string_pretty(&recipe)?;
    text.push('\n');
    write_atomic(&recipe_path, text.as_bytes())?;
    run.output(&recipe_path)?;

    let set = build_image_set(recipe.n_max, &RenderConfig::square(recipe.size))?;
    let omega = dir.join("omega.apack");
    write_packed(&set, &omega)?;
    run.output(&omega)?;

    for (i, arm) in recipe.arms.iter().enumerate() {
        let name = match arm {
            Arm::Trials { name, .. } | Arm::Sweep { name, .. } => name,
        };
        println!("== {name}");
        let probes = if i == 0 { recipe.probes.as_slice() } else { &[] };
        run_arm(&mut run, &set, &recipe, arm, &dir.join(name), probes)?;
    }
    run.finish(&dir.join("run.json"))?;
    println!("{}", dir.display());
    Ok(())
}

//! Generate a dataset, train embeddings, train both agents, then compare
//! against a reasoner-only run.
//!
//! cargo run --release --example cooperative_training -- path_len=6 batches=2000

use std::time::Instant;

use coopkg::agents::Agents;
use coopkg::embed::{train_embeddings, EmbedConfig};
use coopkg::eval::{compare, evaluate, EvalConfig};
use coopkg::reward::{RewardScheme, Scheme};
use coopkg::synth::{generate, reachability_report, GenSpec};
use coopkg::train::{OptimizerKind, Trainer, TrainConfig};

fn main() -> coopkg::Result<()> {
    let mut spec = GenSpec {
        path_len: 2,
        ..GenSpec::default()
    };
    let mut embed = EmbedConfig::default();
    let mut cfg = TrainConfig::default();
    let mut log_every = 50;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "path_len" => spec.path_len = v.parse().unwrap(),
            "entities" => spec.entities = v.parse().unwrap(),
            "queries" => spec.queries = v.parse().unwrap(),
            "distractors" => spec.distractor_ratio = v.parse().unwrap(),
            "seed" => {
                spec.seed = v.parse().unwrap();
                cfg.seed = spec.seed;
            }
            "dim" => embed.dim = v.parse().unwrap(),
            "epochs" => embed.epochs = v.parse().unwrap(),
            "batches" => cfg.batches = v.parse().unwrap(),
            "episodes" => cfg.episodes_per_batch = v.parse().unwrap(),
            "lr" => {
                cfg.reasoner_lr = v.parse().unwrap();
                cfg.extractor_lr = cfg.reasoner_lr;
            }
            "lr_reasoner" => cfg.reasoner_lr = v.parse().unwrap(),
            "lr_extractor" => cfg.extractor_lr = v.parse().unwrap(),
            "entropy" => cfg.entropy_weight = v.parse().unwrap(),
            "scheme" => cfg.reward = RewardScheme::new(v.parse::<Scheme>()?),
            "optimizer" => cfg.optimizer = v.parse::<OptimizerKind>()?,
            "drift" => cfg.drift_bonus = v.parse().unwrap(),
            "log_every" => log_every = v.parse().unwrap(),
            _ => panic!("unknown argument {k}"),
        }
    }
    let start = Instant::now();
    let generated = generate(&spec)?;
    let ds = &generated.dataset;
    let report = reachability_report(&ds.graph, &ds.queries, spec.path_len + 2)?;
    println!("dataset {} distances {}", &ds.id()[..12], report.histogram_line());

    let emb = train_embeddings(&ds.graph, &embed)?;
    println!(
        "embeddings: loss {:.4} -> {:.4}",
        emb.losses.first().unwrap_or(&0.0),
        emb.losses.last().unwrap_or(&0.0)
    );
    let table = emb.table;

    let agents = Agents::random(embed.dim, cfg.seed, cfg.seed + 1);
    let mut trainer = Trainer::new(cfg.clone(), ds, &table, agents)?;
    for b in 0..cfg.batches {
        let m = trainer.step()?;
        if b % log_every == 0 || b + 1 == cfg.batches {
            println!(
                "batch {:5} success {:.3} adoption {:.3} hops {:.2}",
                m.batch, m.success_rate, m.adoption_rate, m.avg_hops
            );
        }
    }
    let (agents, _) = trainer.finish();
    let eval_cfg = EvalConfig {
        horizon: cfg.horizon,
        ..EvalConfig::default()
    };
    let coop = evaluate(&agents, ds, &table, &eval_cfg)?;
    let solo = evaluate(
        &agents,
        ds,
        &table,
        &EvalConfig {
            extractor_enabled: false,
            ..eval_cfg
        },
    )?;
    println!("cooperative:\n{coop}");
    println!("reasoner only:\n{solo}");
    println!("delta:\n{}", compare(&coop, &solo)?);
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

//! Train briefly, then evaluate greedy and sampled decoding with and without
//! the extractor, and print where each query's answer landed.
//!
//! cargo run --release --example evaluate_baseline -- batches=300 samples=20

use coopkg::agents::{Agents, SelectMode};
use coopkg::embed::{train_embeddings, EmbedConfig};
use coopkg::eval::{compare, evaluate, evaluate_with, EvalConfig, EvalMode};
use coopkg::seed;
use coopkg::synth::{generate, GenSpec};
use coopkg::train::{PolicyPilot, TrainConfig, Trainer};

fn main() -> coopkg::Result<()> {
    let mut batches = 300;
    let mut samples = 20;
    let mut path_len = 2;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "batches" => batches = v.parse().unwrap(),
            "samples" => samples = v.parse().unwrap(),
            "path_len" => path_len = v.parse().unwrap(),
            _ => panic!("unknown argument {k}"),
        }
    }
    let ds = generate(&GenSpec {
        path_len,
        ..GenSpec::default()
    })?
    .dataset;
    let table = train_embeddings(&ds.graph, &EmbedConfig::default())?.table;
    let cfg = TrainConfig {
        batches,
        horizon: path_len + 1,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(cfg.clone(), &ds, &table, Agents::random(table.dim(), 0, 1))?;
    trainer.run(batches)?;
    let (agents, _) = trainer.finish();

    let greedy = EvalConfig {
        horizon: cfg.horizon,
        ..EvalConfig::default()
    };
    let sampled = EvalConfig {
        mode: EvalMode::Sample { samples },
        ..greedy.clone()
    };
    for (name, ecfg) in [("greedy", &greedy), ("sampled", &sampled)] {
        let coop = evaluate(&agents, &ds, &table, ecfg)?;
        let solo = evaluate(
            &agents,
            &ds,
            &table,
            &EvalConfig {
                extractor_enabled: false,
                ..ecfg.clone()
            },
        )?;
        println!("{name} decoding, both agents:\n{coop}");
        println!("{name} decoding, reasoner only:\n{solo}");
        println!("difference:\n{}\n", compare(&coop, &solo)?);
    }

    // Per-query detail for sampled decoding.
    let (_, results) = evaluate_with(&ds, &sampled, |qi| {
        let rng = seed::rng(sampled.seed, &format!("eval/query/{qi}"));
        PolicyPilot::new(&agents, &table, SelectMode::Sample, rng)
    })?;
    for (q, r) in ds.queries.iter().zip(&results) {
        let top: Vec<&str> = r.ranking.iter().take(3).map(|&e| ds.graph.entity_name(e)).collect();
        println!(
            "{:>6} {:>4}: answer rank {:>5}, {}/{} successes, top {:?}",
            ds.graph.entity_name(q.source),
            ds.graph.relation_name(q.relation),
            r.answer_rank.map_or("-".to_owned(), |x| x.to_string()),
            r.successes,
            r.rollouts,
            top
        );
    }
    Ok(())
}

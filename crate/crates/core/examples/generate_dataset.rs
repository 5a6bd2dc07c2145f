//! Generate a synthetic dataset, check its path lengths with and without the
//! planted facts, and optionally write it to disk.
//!
//! cargo run --example generate_dataset -- path_len=4 queries=10 out=data

use coopkg::synth::{generate, reachability_report, with_genuine_injected, GenSpec};

fn main() -> coopkg::Result<()> {
    let mut spec = GenSpec::default();
    let mut out = None;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "path_len" => spec.path_len = v.parse().unwrap(),
            "entities" => spec.entities = v.parse().unwrap(),
            "queries" => spec.queries = v.parse().unwrap(),
            "branching" => spec.branching = v.parse().unwrap(),
            "ablation" => spec.ablation = v.parse().unwrap(),
            "distractors" => spec.distractor_ratio = v.parse().unwrap(),
            "seed" => spec.seed = v.parse().unwrap(),
            "out" => out = Some(v.to_owned()),
            _ => panic!("unknown argument {k}"),
        }
    }
    let generated = generate(&spec)?;
    let ds = &generated.dataset;
    println!("dataset {}", ds.id());
    println!(
        "{} entities, {} edges (inverses included), {} queries",
        ds.graph.entity_count(),
        ds.graph.edge_count(),
        ds.queries.len()
    );
    println!("pool: {} triples, {} genuine", ds.pool.len(), ds.pool.genuine_count());

    let horizon = spec.path_len + 2;
    let base = reachability_report(&ds.graph, &ds.queries, horizon)?;
    let injected = reachability_report(&with_genuine_injected(ds)?, &ds.queries, horizon)?;
    println!("shortest paths in the base graph: {}", base.histogram_line());
    println!("with genuine pool triples added:  {}", injected.histogram_line());
    println!("unreachable within {horizon} hops: {}", base.unreachable_count());

    for q in ds.queries.iter().take(3) {
        let answers: Vec<&str> = q.answers.iter().map(|&e| ds.graph.entity_name(e)).collect();
        println!(
            "  ({}, {}, ?) answers {:?}",
            ds.graph.entity_name(q.source),
            ds.graph.relation_name(q.relation),
            answers
        );
    }

    if let Some(dir) = out {
        generated.files.write_to(std::path::Path::new(&dir))?;
        println!("wrote graph.tsv, pool.tsv and queries.tsv to {dir}");
    }
    Ok(())
}

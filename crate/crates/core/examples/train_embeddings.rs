//! Fit translational embeddings on a generated graph, show the loss curve,
//! how held-out query relations are handled, and a checkpoint round trip.
//!
//! cargo run --release --example train_embeddings -- dim=32 epochs=200

use coopkg::embed::{train_embeddings, EmbedConfig, EmbeddingTable, RelationStatus};
use coopkg::kg::RelationId;
use coopkg::synth::{generate, GenSpec};

fn main() -> coopkg::Result<()> {
    let mut cfg = EmbedConfig::default();
    let mut spec = GenSpec::default();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "dim" => cfg.dim = v.parse().unwrap(),
            "epochs" => cfg.epochs = v.parse().unwrap(),
            "lr" => cfg.learning_rate = v.parse().unwrap(),
            "negatives" => cfg.negatives = v.parse().unwrap(),
            "margin" => cfg.margin = v.parse().unwrap(),
            "seed" => {
                cfg.seed = v.parse().unwrap();
                spec.seed = cfg.seed;
            }
            _ => panic!("unknown argument {k}"),
        }
    }
    let ds = generate(&spec)?.dataset;
    let trained = train_embeddings(&ds.graph, &cfg)?;
    let step = (trained.losses.len() / 10).max(1);
    for (epoch, loss) in trained.losses.iter().enumerate().step_by(step) {
        println!("epoch {epoch:4} loss {loss:.4}");
    }
    let table = trained.table;

    let mut counts = [0usize; 3];
    for r in 0..table.relation_count() {
        match table.relation_status(RelationId(r as u32)) {
            Some(RelationStatus::Trained) => counts[0] += 1,
            Some(RelationStatus::ZeroShot) => counts[1] += 1,
            Some(RelationStatus::Fixed) => counts[2] += 1,
            None => {}
        }
    }
    println!(
        "relations: {} trained, {} zero-shot, {} fixed",
        counts[0], counts[1], counts[2]
    );
    // Query relations never occur in the graph, so they share the mean vector.
    let q = ds.queries[0].relation;
    println!(
        "query relation {} is {:?}",
        ds.graph.relation_name(q),
        table.relation_status(q).unwrap()
    );

    let qy = &ds.queries[0];
    println!(
        "similarity(source, answer) {:.3}",
        table.similarity(qy.source, qy.answers[0])?
    );

    let text = table.to_checkpoint();
    let back = EmbeddingTable::from_checkpoint(&text)?;
    assert_eq!(back.to_checkpoint(), text);
    println!("checkpoint: {} bytes, round trip stable", text.len());
    Ok(())
}

//! Train to convergence, move every genuine pool triple one hop down its
//! equivalent path, and compare how fast training recovers with and without
//! the drift-exploration bonus.
//!
//! cargo run --release --example drift_exploration -- seeds=3 bonus=0.2 window=100

use coopkg::agents::Agents;
use coopkg::embed::{train_embeddings, EmbedConfig};
use coopkg::synth::{generate, shift_genuine, GenSpec};
use coopkg::train::{recovery_batch, TrainConfig, Trainer};

fn main() -> coopkg::Result<()> {
    let mut seeds = 3;
    let mut bonus = 0.2;
    let mut window = 100;
    let mut pre = 1000;
    let mut post = 1000;
    let mut path_len = 6;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "seeds" => seeds = v.parse().unwrap(),
            "bonus" => bonus = v.parse().unwrap(),
            "window" => window = v.parse().unwrap(),
            "pre" => pre = v.parse().unwrap(),
            "post" => post = v.parse().unwrap(),
            "path_len" => path_len = v.parse().unwrap(),
            _ => panic!("unknown argument {k}"),
        }
    }
    let smooth = 20;
    for seed in 0..seeds {
        let spec = GenSpec {
            path_len,
            seed,
            ..GenSpec::default()
        };
        let ds = generate(&spec)?.dataset;
        let moved = ds.with_pool(shift_genuine(&ds, 1)?);
        let table = train_embeddings(&ds.graph, &EmbedConfig::default())?.table;
        let cfg = TrainConfig {
            seed,
            drift_window: window,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(cfg, &ds, &table, Agents::random(table.dim(), seed, seed + 1))?;
        trainer.run(pre)?;
        let tail = &trainer.log()[pre - smooth..];
        let before = tail.iter().map(|m| m.success_rate).sum::<f64>() / smooth as f64;
        let target = 0.9 * before;

        let mut outcomes = Vec::new();
        for r_max in [bonus, 0.0] {
            let mut arm = trainer.clone();
            arm.set_dataset(&moved)?;
            arm.set_drift(r_max, window)?;
            arm.run(post)?;
            let rates: Vec<f64> = arm.log()[pre..].iter().map(|m| m.success_rate).collect();
            let first = rates[..smooth].iter().sum::<f64>() / smooth as f64;
            let last = rates[post - smooth..].iter().sum::<f64>() / smooth as f64;
            outcomes.push((r_max, recovery_batch(&rates, smooth, target), first, last));
        }
        println!("seed {seed}: pre-swap success {before:.3}, target {target:.3}");
        for (r_max, rec, first, last) in outcomes {
            let rec = rec.map_or("never".to_owned(), |b| format!("{b} batches"));
            println!("  bonus {r_max:.2}: recovered after {rec}; success {first:.3} -> {last:.3}");
        }
    }
    Ok(())
}

//! Zero-sum view of the competitive scheme: solve a few textbook games, then
//! build the payoff matrix between simple reasoner and extractor strategies
//! before and after training.
//!
//! cargo run --release --example minimax_game -- batches=300

use coopkg::agents::Agents;
use coopkg::embed::{train_embeddings, EmbedConfig};
use coopkg::reward::RewardScheme;
use coopkg::synth::{generate, GenSpec};
use coopkg::train::{bounds, game_payoff_matrix, solve_minimax, PayoffMatrix, TrainConfig, Trainer};

fn show(m: &PayoffMatrix) -> coopkg::Result<()> {
    print!("{:>10}", "");
    for (name, _) in &m.cols {
        print!("{name:>10}");
    }
    println!();
    for ((name, _), row) in m.rows.iter().zip(&m.values) {
        print!("{name:>10}");
        for v in row {
            print!("{v:>10.3}");
        }
        println!();
    }
    let sol = solve_minimax(&m.values)?;
    println!(
        "value {:.4} via {:?}, reasoner mix {:.3?}, extractor mix {:.3?}",
        sol.value, sol.method, sol.row, sol.col
    );
    Ok(())
}

fn main() -> coopkg::Result<()> {
    let mut batches = 300;
    let mut episodes = 20;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        match k {
            "batches" => batches = v.parse().unwrap(),
            "episodes" => episodes = v.parse().unwrap(),
            _ => panic!("unknown argument {k}"),
        }
    }

    for (name, game) in [
        ("matching pennies", vec![vec![1.0, -1.0], vec![-1.0, 1.0]]),
        ("saddle point", vec![vec![3.0, 1.0], vec![4.0, 2.0]]),
        (
            "rock paper scissors",
            vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]],
        ),
    ] {
        let sol = solve_minimax(&game)?;
        let (lo, hi) = bounds(&game, &sol.row, &sol.col);
        println!("{name}: value {:.4}, guaranteed in [{:.4}, {:.4}]", sol.value + 0.0, lo + 0.0, hi + 0.0);
    }

    let ds = generate(&GenSpec::default())?.dataset;
    let table = train_embeddings(&ds.graph, &EmbedConfig::default())?.table;
    let reward = RewardScheme::game(0.1, 0.2)?;
    let cfg = TrainConfig {
        reward,
        batches,
        ..TrainConfig::default()
    };
    let initial = Agents::random(table.dim(), 0, 1);

    println!("\nbefore training (reasoner return minus extractor return):");
    show(&game_payoff_matrix(&initial, &ds, &table, &reward, cfg.horizon, episodes, 0)?)?;

    let mut trainer = Trainer::new(cfg.clone(), &ds, &table, initial)?;
    trainer.run(batches)?;
    let (agents, log) = trainer.finish();
    let last = log.last().expect("at least one batch");
    println!(
        "\nafter {batches} GAME batches: success {:.3}, rejected proposals {:.3}",
        last.success_rate,
        last.rejected_proposals.unwrap_or(0.0)
    );
    show(&game_payoff_matrix(&agents, &ds, &table, &reward, cfg.horizon, episodes, 0)?)?;
    Ok(())
}

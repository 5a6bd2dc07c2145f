//! Play a few hand-scripted episodes on a five-entity graph and print what
//! each reward scheme pays the two agents.
//!
//! cargo run --example reward_schemes

use coopkg::dataset::{ExtractionPool, PoolTriple, Provenance, Query};
use coopkg::embed::EmbeddingTable;
use coopkg::env::{EpisodeState, ExtractorAction, ReasonerAction};
use coopkg::kg::{GraphBuilder, Triple};
use coopkg::reward::{compute_rewards, RewardScheme, Scheme};

/// One step of a script: what the extractor does, then which relation the
/// reasoner follows (`None` stays put).
type Step = (ExtractorAction, Option<&'static str>);

fn main() -> coopkg::Result<()> {
    // a -p-> b -p-> c, plus an unrelated a -s-> x
    let mut b = GraphBuilder::new();
    b.add_text("a\tp\tb\nb\tp\tc\na\ts\tx\n")?;
    let [a, c, x] = ["a", "c", "x"].map(|n| b.entity(n).unwrap());
    let q = b.intern_relation("q")?;
    let graph = b.build();
    let pool = ExtractionPool::new(vec![
        PoolTriple {
            triple: Triple::new(a, q, c),
            provenance: Provenance::Genuine,
        },
        PoolTriple {
            triple: Triple::new(a, q, x),
            provenance: Provenance::Distractor,
        },
    ]);
    let query = Query::new(a, q, vec![c]);
    let table = EmbeddingTable::initialize(&graph, 8, 0)?;

    let scripts: [(&str, Vec<Step>); 4] = [
        (
            "walk the base path",
            vec![(ExtractorAction::Abstain, Some("p")), (ExtractorAction::Abstain, Some("p"))],
        ),
        (
            "inject the missing fact and use it",
            vec![(ExtractorAction::Inject(0), Some("q")), (ExtractorAction::Abstain, None)],
        ),
        (
            "inject the fact but walk around it",
            vec![(ExtractorAction::Inject(0), Some("p")), (ExtractorAction::Abstain, Some("p"))],
        ),
        (
            "follow an injected distractor",
            vec![(ExtractorAction::Inject(1), Some("q")), (ExtractorAction::Abstain, None)],
        ),
    ];

    let schemes = [
        RewardScheme::new(Scheme::Coop),
        RewardScheme::new(Scheme::Adopt),
        RewardScheme::new(Scheme::Shaped),
        RewardScheme::game(0.1, 0.2)?,
    ];
    for (name, script) in &scripts {
        let mut state = EpisodeState::reset(&graph, &pool, &query, script.len())?;
        for &(inject, follow) in script {
            state.step_extractor(inject)?;
            let actions = state.reasoner_actions()?;
            let choice = match follow {
                None => ReasonerAction::SelfLoop,
                Some(rel) => {
                    let r = graph.relation_id(rel)?;
                    *actions
                        .iter()
                        .find(|a| matches!(a, ReasonerAction::Hop(e) if e.relation == r))
                        .expect("scripted relation is available")
                }
            };
            state.step_reasoner(choice)?;
        }
        let traj = state.trajectory()?;
        println!(
            "{name}: terminal {}, success {}, injected {}, adopted {}",
            graph.entity_name(traj.terminal),
            traj.success,
            traj.injected.len(),
            traj.adopted.len()
        );
        for s in &schemes {
            let r = compute_rewards(&traj, s, &table)?;
            println!("  {:6} reasoner {:+.3}  extractor {:+.3}", s.scheme.name(), r.reasoner, r.extractor);
        }
    }
    Ok(())
}

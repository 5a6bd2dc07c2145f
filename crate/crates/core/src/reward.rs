//! Terminal returns for both agents under the four credit-assignment schemes.
//!
//! | scheme | reasoner | extractor |
//! |--------|----------|-----------|
//! | `Coop`   | 1 on success | 1 on success |
//! | `Adopt`  | 1 on success | 1 on success with ≥1 adopted injection |
//! | `Shaped` | as `Adopt`; on failure `max_a sim(terminal, a)` | same |
//! | `Game`   | `max(0, 1 − c_h·hops)` on success | `max(0, 1 − c_r·rejected)` on success |
//!
//! There is no discounting; rewards arrive once, at the end.

use std::fmt;
use std::str::FromStr;

use crate::embed::EmbeddingTable;
use crate::env::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Coop,
    Adopt,
    Shaped,
    Game,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Coop, Scheme::Adopt, Scheme::Shaped, Scheme::Game];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Coop => "COOP",
            Scheme::Adopt => "ADOPT",
            Scheme::Shaped => "SHAPED",
            Scheme::Game => "GAME",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown reward scheme `{s}` (COOP|ADOPT|SHAPED|GAME)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardScheme {
    pub scheme: Scheme,
    /// Per-hop cost for the reasoner under `Game`.
    pub hop_cost: f64,
    /// Per-rejected-proposal cost for the extractor under `Game`.
    pub rejection_cost: f64,
}

impl RewardScheme {
    pub fn new(scheme: Scheme) -> Self {
        RewardScheme {
            scheme,
            hop_cost: 0.1,
            rejection_cost: 0.2,
        }
    }

    pub fn game(hop_cost: f64, rejection_cost: f64) -> Result<Self> {
        let s = RewardScheme {
            scheme: Scheme::Game,
            hop_cost,
            rejection_cost,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme == Scheme::Game && !(self.hop_cost > 0.0 && self.rejection_cost > 0.0) {
            return Err(Error::InvalidArgument("GAME costs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardPair {
    pub reasoner: f64,
    pub extractor: f64,
}

impl RewardPair {
    pub fn both(v: f64) -> Self {
        RewardPair {
            reasoner: v,
            extractor: v,
        }
    }
}

/// Returns of a finished trajectory. `table` is consulted only for the
/// shaped failure reward.
pub fn compute_rewards(traj: &Trajectory, scheme: &RewardScheme, table: &EmbeddingTable) -> Result<RewardPair> {
    if traj.steps.len() < traj.horizon && !ended_by_stop(traj) {
        return Err(Error::NotTerminal);
    }
    scheme.validate()?;
    let success = if traj.success { 1.0 } else { 0.0 };
    let adopted_any = !traj.adopted.is_empty();
    let adopt = RewardPair {
        reasoner: success,
        extractor: if traj.success && adopted_any { 1.0 } else { 0.0 },
    };
    Ok(match scheme.scheme {
        Scheme::Coop => RewardPair::both(success),
        Scheme::Adopt => adopt,
        Scheme::Shaped if traj.success => adopt,
        Scheme::Shaped => {
            let mut best: f64 = 0.0;
            for &a in &traj.query.answers {
                best = best.max(table.similarity(traj.terminal, a)?);
            }
            RewardPair::both(best)
        }
        Scheme::Game if traj.success => RewardPair {
            reasoner: (1.0 - scheme.hop_cost * traj.hops as f64).max(0.0),
            extractor: (1.0 - scheme.rejection_cost * traj.rejected() as f64).max(0.0),
        },
        Scheme::Game => RewardPair::both(0.0),
    })
}

fn ended_by_stop(traj: &Trajectory) -> bool {
    matches!(
        traj.steps.last().map(|s| s.reasoner_action()),
        Some(crate::env::ReasonerAction::SelfLoop)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ExtractionPool, Query};
    use crate::env::{EpisodeState, ExtractorAction, ReasonerAction};
    use crate::kg::{Edge, GraphBuilder, KnowledgeGraph, Triple};

    struct Fixture {
        graph: KnowledgeGraph,
        pool: ExtractionPool,
        query: Query,
        table: EmbeddingTable,
    }

    // s -p-> m -p-> t -p-> u ; pool: (s q t), (s p x)
    fn fixture() -> Fixture {
        let mut b = GraphBuilder::new();
        b.add_text("s\tp\tm\nm\tp\tt\nt\tp\tu\n").unwrap();
        let [s, t, x] = ["s", "t", "x"].map(|n| b.intern_entity(n));
        let q = b.intern_relation("q").unwrap();
        let p = b.relation("p").unwrap();
        let graph = b.build();
        let pool = ExtractionPool::from_triples([Triple::new(s, q, t), Triple::new(s, p, x)]);
        let table = EmbeddingTable::initialize(&graph, 4, 2).unwrap();
        Fixture {
            graph,
            pool,
            query: Query::new(s, q, vec![t]),
            table,
        }
    }

    fn run(f: &Fixture, script: &[(ExtractorAction, &str, &str)], horizon: usize) -> Trajectory {
        let mut s = EpisodeState::reset(&f.graph, &f.pool, &f.query, horizon).unwrap();
        for (ex, rel, tail) in script {
            s.step_extractor(*ex).unwrap();
            let act = if *rel == "STOP" {
                ReasonerAction::SelfLoop
            } else {
                ReasonerAction::Hop(Edge::new(f.graph.relation_id(rel).unwrap(), f.graph.entity_id(tail).unwrap()))
            };
            s.step_reasoner(act).unwrap();
        }
        s.trajectory().unwrap()
    }

    #[test]
    fn coop_pays_both_on_success() {
        let f = fixture();
        let t = run(
            &f,
            &[
                (ExtractorAction::Inject(0), "q", "t"),
                (ExtractorAction::Abstain, "p", "u"),
                (ExtractorAction::Abstain, "p_inv", "t"),
            ],
            3,
        );
        assert!(t.success);
        assert_eq!(t.hops, 3);
        let r = compute_rewards(&t, &RewardScheme::new(Scheme::Coop), &f.table).unwrap();
        assert_eq!(r, RewardPair::both(1.0));
    }

    #[test]
    fn adopt_without_injection_pays_only_reasoner() {
        let f = fixture();
        let t = run(
            &f,
            &[
                (ExtractorAction::Abstain, "p", "m"),
                (ExtractorAction::Abstain, "p", "t"),
                (ExtractorAction::Abstain, "STOP", ""),
            ],
            3,
        );
        assert!(t.success);
        let r = compute_rewards(&t, &RewardScheme::new(Scheme::Adopt), &f.table).unwrap();
        assert_eq!((r.reasoner, r.extractor), (1.0, 0.0));
    }

    #[test]
    fn shaped_failure_uses_similarity() {
        let mut f = fixture();
        let t = run(&f, &[(ExtractorAction::Abstain, "p", "m"), (ExtractorAction::Abstain, "STOP", "")], 3);
        assert!(!t.success);
        // place m at distance 1 from the gold entity t
        let dim = f.table.dim();
        let m_vec: Vec<f64> = f.table.entity(t.query.answers[0]).unwrap().to_vec();
        let mut text = f.table.to_checkpoint();
        let m_name = "m";
        let shifted: Vec<String> = m_vec
            .iter()
            .enumerate()
            .map(|(i, v)| crate::numfmt::fmt_f64(if i == 0 { v + 1.0 } else { *v }))
            .collect();
        let old_line = text.lines().find(|l| l.starts_with(&format!("E\t{m_name}\t"))).unwrap().to_owned();
        text = text.replace(&old_line, &format!("E\t{m_name}\t{}", shifted.join("\t")));
        f.table = EmbeddingTable::from_checkpoint(&text).unwrap();
        assert_eq!(f.table.dim(), dim);
        let r = compute_rewards(&t, &RewardScheme::new(Scheme::Shaped), &f.table).unwrap();
        assert!((r.reasoner - 0.5).abs() < 1e-8 && (r.extractor - 0.5).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn game_costs() {
        let f = fixture();
        // 3 hops, 2 injected, 1 adopted
        let t = run(
            &f,
            &[
                (ExtractorAction::Inject(1), "p", "m"),
                (ExtractorAction::Abstain, "p_inv", "s"),
                (ExtractorAction::Inject(0), "q", "t"),
            ],
            3,
        );
        assert!(t.success);
        assert_eq!((t.hops, t.injected.len(), t.adopted.len()), (3, 2, 1));
        let r = compute_rewards(&t, &RewardScheme::game(0.1, 0.2).unwrap(), &f.table).unwrap();
        assert!((r.reasoner - 0.7).abs() < 1e-12 && (r.extractor - 0.8).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn game_failure_pays_nothing_and_costs_must_be_positive() {
        let f = fixture();
        let t = run(&f, &[(ExtractorAction::Abstain, "STOP", "")], 3);
        let r = compute_rewards(&t, &RewardScheme::game(0.1, 0.2).unwrap(), &f.table).unwrap();
        assert_eq!(r, RewardPair::both(0.0));
        assert!(RewardScheme::game(0.0, 0.2).is_err());
    }

    #[test]
    fn non_terminal_is_an_error() {
        let f = fixture();
        let mut t = run(&f, &[(ExtractorAction::Abstain, "STOP", "")], 3);
        t.steps.clear();
        assert!(matches!(
            compute_rewards(&t, &RewardScheme::new(Scheme::Coop), &f.table),
            Err(Error::NotTerminal)
        ));
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("coop".parse::<Scheme>().is_ok());
        assert!("BOGUS".parse::<Scheme>().is_err());
    }
}

//! Joint episode over the overlay graph.
//!
//! Each step the extractor acts first (inject one incident pool triple or
//! abstain), then the reasoner hops along an out-edge or stops with
//! `SELF_LOOP`. Transitions are deterministic. An episode ends on `SELF_LOOP`
//! or after `horizon` reasoner actions; the entity it ends on is the answer.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::dataset::{ExtractionPool, Query};
use crate::error::{Error, Result};
use crate::kg::{AddOutcome, Edge, EntityId, GraphOverlay, KnowledgeGraph, Triple};

pub const DEFAULT_HORIZON: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReasonerAction {
    Hop(Edge),
    SelfLoop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtractorAction {
    /// Index into the extraction pool.
    Inject(usize),
    Abstain,
}

/// What one step looked like, enough to replay it or recompute its
/// action probabilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub entity: EntityId,
    /// Pool triples injected before this step.
    pub injected_before: usize,
    pub extractor_candidates: Vec<ExtractorAction>,
    pub extractor_choice: usize,
    pub reasoner_actions: Vec<ReasonerAction>,
    pub reasoner_choice: usize,
}

impl StepRecord {
    pub fn extractor_action(&self) -> ExtractorAction {
        self.extractor_candidates[self.extractor_choice]
    }

    pub fn reasoner_action(&self) -> ReasonerAction {
        self.reasoner_actions[self.reasoner_choice]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub query: Query,
    pub horizon: usize,
    pub steps: Vec<StepRecord>,
    pub terminal: EntityId,
    pub success: bool,
    /// Non-self-loop reasoner moves.
    pub hops: usize,
    /// Pool indices in injection order.
    pub injected: Vec<usize>,
    /// Injected pool indices whose edge (either direction) was traversed.
    pub adopted: Vec<usize>,
    /// Sum of log-probabilities of the chosen actions, when known.
    pub log_prob: f64,
}

impl Trajectory {
    /// Injected triples the reasoner never used.
    pub fn rejected(&self) -> usize {
        self.injected.len() - self.adopted.len()
    }

    /// Directed edges walked, as `(from, edge)`.
    pub fn path(&self) -> Vec<(EntityId, Edge)> {
        self.steps
            .iter()
            .filter_map(|s| match s.reasoner_action() {
                ReasonerAction::Hop(e) => Some((s.entity, e)),
                ReasonerAction::SelfLoop => None,
            })
            .collect()
    }

    /// Replays the recorded actions on a fresh episode, checking each was
    /// legal at its step and that the outcome matches.
    pub fn replay(&self, graph: &KnowledgeGraph, pool: &ExtractionPool) -> Result<()> {
        let mut state = EpisodeState::reset(graph, pool, &self.query, self.horizon)?;
        for rec in &self.steps {
            if state.current() != rec.entity || state.step() != rec.step {
                return Err(Error::IllegalAction(format!("state diverged at step {}", rec.step)));
            }
            state.step_extractor(rec.extractor_action())?;
            state.step_reasoner(rec.reasoner_action())?;
        }
        let replayed = state.trajectory()?;
        if replayed.terminal != self.terminal
            || replayed.success != self.success
            || replayed.adopted != self.adopted
            || replayed.injected != self.injected
        {
            return Err(Error::IllegalAction("replayed outcome differs".into()));
        }
        Ok(())
    }

    /// One event per line, tab-separated, fixed field order.
    pub fn dump(&self, graph: &KnowledgeGraph, pool: &ExtractionPool) -> String {
        let mut out = String::new();
        let answers: Vec<&str> = self.query.answers.iter().map(|&a| graph.entity_name(a)).collect();
        let _ = writeln!(
            out,
            "query\t{}\t{}\t{}",
            graph.entity_name(self.query.source),
            graph.relation_name(self.query.relation),
            answers.join(",")
        );
        for rec in &self.steps {
            let extractor = match rec.extractor_action() {
                ExtractorAction::Abstain => "ABSTAIN".to_owned(),
                ExtractorAction::Inject(i) => match pool.get(i) {
                    Some(p) => format!("inject\t{i}\t{}", graph.format_triple(&p.triple)),
                    None => format!("inject\t{i}\t?"),
                },
            };
            let reasoner = match rec.reasoner_action() {
                ReasonerAction::SelfLoop => "SELF_LOOP".to_owned(),
                ReasonerAction::Hop(e) => {
                    format!("hop\t{}\t{}", graph.relation_name(e.relation), graph.entity_name(e.tail))
                }
            };
            let _ = writeln!(
                out,
                "step\t{}\tat\t{}\textractor\t{}\treasoner\t{}",
                rec.step,
                graph.entity_name(rec.entity),
                extractor,
                reasoner
            );
        }
        let _ = writeln!(
            out,
            "end\tterminal\t{}\tsuccess\t{}\thops\t{}\tinjected\t{}\tadopted\t{}\trejected\t{}",
            graph.entity_name(self.terminal),
            self.success,
            self.hops,
            self.injected.len(),
            self.adopted.len(),
            self.rejected()
        );
        out
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeState<'a> {
    overlay: GraphOverlay<'a>,
    pool: &'a ExtractionPool,
    query: &'a Query,
    horizon: usize,
    current: EntityId,
    step: usize,
    history: Vec<Edge>,
    injected: Vec<usize>,
    adopted: BTreeSet<usize>,
    terminal: bool,
    records: Vec<StepRecord>,
    pending: Option<(Vec<ExtractorAction>, usize)>,
}

impl<'a> EpisodeState<'a> {
    pub fn reset(
        graph: &'a KnowledgeGraph,
        pool: &'a ExtractionPool,
        query: &'a Query,
        horizon: usize,
    ) -> Result<Self> {
        graph.check_entity(query.source)?;
        graph.check_relation(query.relation)?;
        for &a in &query.answers {
            graph.check_entity(a)?;
        }
        for p in pool.entries() {
            graph.check_entity(p.triple.head)?;
            graph.check_entity(p.triple.tail)?;
            graph.check_relation(p.triple.relation)?;
        }
        Ok(EpisodeState {
            overlay: GraphOverlay::new(graph),
            pool,
            query,
            horizon,
            current: query.source,
            step: 0,
            history: Vec::new(),
            injected: Vec::new(),
            adopted: BTreeSet::new(),
            terminal: horizon == 0,
            records: Vec::new(),
            pending: None,
        })
    }

    pub fn current(&self) -> EntityId {
        self.current
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn query(&self) -> &'a Query {
        self.query
    }

    pub fn graph(&self) -> &'a KnowledgeGraph {
        self.overlay.base()
    }

    pub fn overlay(&self) -> &GraphOverlay<'a> {
        &self.overlay
    }

    pub fn pool(&self) -> &'a ExtractionPool {
        self.pool
    }

    pub fn history(&self) -> &[Edge] {
        &self.history
    }

    pub fn injected(&self) -> &[usize] {
        &self.injected
    }

    pub fn adopted(&self) -> &BTreeSet<usize> {
        &self.adopted
    }

    /// Injected pool triples not (yet) on the path.
    pub fn unused(&self) -> Vec<usize> {
        self.injected
            .iter()
            .copied()
            .filter(|i| !self.adopted.contains(i))
            .collect()
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Pool triple `index` rewritten to start at the current entity.
    pub fn oriented(&self, index: usize) -> Option<Triple> {
        let p = self.pool.get(index)?;
        self.graph().orient_from(&p.triple, self.current)
    }

    /// Incident, not-yet-injected pool triples in pool order, then `Abstain`.
    pub fn extractor_candidates(&self) -> Vec<ExtractorAction> {
        let mut out: Vec<ExtractorAction> = self
            .pool
            .entries()
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                (p.triple.head == self.current || p.triple.tail == self.current)
                    && !self.injected.contains(i)
            })
            .map(|(i, _)| ExtractorAction::Inject(i))
            .collect();
        out.push(ExtractorAction::Abstain);
        out
    }

    pub fn step_extractor(&mut self, action: ExtractorAction) -> Result<Option<AddOutcome>> {
        if self.terminal {
            return Err(Error::AlreadyTerminal);
        }
        if self.pending.is_some() {
            return Err(Error::IllegalAction(format!(
                "extractor already acted at step {}",
                self.step
            )));
        }
        let candidates = self.extractor_candidates();
        let choice = candidates
            .iter()
            .position(|c| *c == action)
            .ok_or_else(|| Error::IllegalAction(format!("{action:?} is not an extractor candidate")))?;
        let outcome = match action {
            ExtractorAction::Abstain => None,
            ExtractorAction::Inject(i) => {
                let t = self.pool.entries()[i].triple;
                let outcome = self.overlay.add_triple(t)?;
                self.injected.push(i);
                Some(outcome)
            }
        };
        self.pending = Some((candidates, choice));
        Ok(outcome)
    }

    /// Out-edges of the current entity over base ∪ injected, then `SelfLoop`.
    pub fn reasoner_actions(&self) -> Result<Vec<ReasonerAction>> {
        let mut out: Vec<ReasonerAction> = self
            .overlay
            .neighbors(self.current)?
            .into_iter()
            .map(ReasonerAction::Hop)
            .collect();
        out.push(ReasonerAction::SelfLoop);
        Ok(out)
    }

    /// Applies the reasoner's move. If the extractor did not act this step it
    /// is recorded as a forced abstention.
    pub fn step_reasoner(&mut self, action: ReasonerAction) -> Result<()> {
        if self.terminal {
            return Err(Error::AlreadyTerminal);
        }
        let actions = self.reasoner_actions()?;
        let choice = actions
            .iter()
            .position(|a| *a == action)
            .ok_or_else(|| Error::IllegalAction(format!("{action:?} is not a legal reasoner move")))?;
        let (extractor_candidates, extractor_choice) = self
            .pending
            .take()
            .unwrap_or_else(|| (vec![ExtractorAction::Abstain], 0));
        self.records.push(StepRecord {
            step: self.step,
            entity: self.current,
            injected_before: self.injected.len()
                - usize::from(matches!(
                    extractor_candidates[extractor_choice],
                    ExtractorAction::Inject(_)
                )),
            extractor_candidates,
            extractor_choice,
            reasoner_actions: actions,
            reasoner_choice: choice,
        });
        let graph = self.graph();
        match action {
            ReasonerAction::SelfLoop => {
                self.history.push(Edge::new(graph.self_loop(), self.current));
                self.terminal = true;
            }
            ReasonerAction::Hop(edge) => {
                let walked = Triple::new(self.current, edge.relation, edge.tail);
                for &i in &self.injected {
                    let t = self.pool.entries()[i].triple;
                    if graph.orient_from(&t, self.current) == Some(walked) {
                        self.adopted.insert(i);
                    }
                }
                self.history.push(edge);
                self.current = edge.tail;
            }
        }
        self.step += 1;
        if self.step >= self.horizon {
            self.terminal = true;
        }
        Ok(())
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        if !self.terminal {
            return Err(Error::NotTerminal);
        }
        let hops = self
            .records
            .iter()
            .filter(|r| matches!(r.reasoner_action(), ReasonerAction::Hop(_)))
            .count();
        Ok(Trajectory {
            query: self.query.clone(),
            horizon: self.horizon,
            steps: self.records.clone(),
            terminal: self.current,
            success: self.query.is_answer(self.current),
            hops,
            injected: self.injected.clone(),
            adopted: self
                .injected
                .iter()
                .copied()
                .filter(|i| self.adopted.contains(i))
                .collect(),
            log_prob: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphBuilder;

    struct World {
        graph: KnowledgeGraph,
        pool: ExtractionPool,
        query: Query,
    }

    // a -p-> b -p-> c, isolated x; pool: (a q x), (y q a), (a p b)
    fn world() -> World {
        let mut b = GraphBuilder::new();
        b.add_text("a\tp\tb\nb\tp\tc\n").unwrap();
        let [a, x, y] = ["a", "x", "y"].map(|n| b.intern_entity(n));
        let q = b.intern_relation("q").unwrap();
        let p = b.relation("p").unwrap();
        let bb = b.entity("b").unwrap();
        let graph = b.build();
        let pool = ExtractionPool::from_triples([
            Triple::new(a, q, x),
            Triple::new(y, q, a),
            Triple::new(a, p, bb),
        ]);
        let query = Query::new(a, q, vec![x]);
        World { graph, pool, query }
    }

    fn id(w: &World, n: &str) -> EntityId {
        w.graph.entity_id(n).unwrap()
    }

    #[test]
    fn reset_starts_at_source() {
        let w = world();
        let s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        assert_eq!(s.current(), w.query.source);
        assert_eq!(s.step(), 0);
        assert!(s.history().is_empty());
        assert!(s.overlay().is_empty());
    }

    #[test]
    fn resets_do_not_share_overlays() {
        let w = world();
        let mut s1 = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        let s2 = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        s1.step_extractor(ExtractorAction::Inject(0)).unwrap();
        assert_eq!(s1.overlay().len(), 1);
        assert!(s2.overlay().is_empty());
    }

    #[test]
    fn zero_horizon_is_immediately_terminal() {
        let w = world();
        let s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 0).unwrap();
        let t = s.trajectory().unwrap();
        assert!(!t.success);
        let at_answer = Query::new(id(&w, "a"), w.query.relation, vec![id(&w, "a")]);
        let s = EpisodeState::reset(&w.graph, &w.pool, &at_answer, 0).unwrap();
        assert!(s.trajectory().unwrap().success);
    }

    #[test]
    fn reset_rejects_invalid_ids() {
        let w = world();
        let bad = Query::new(EntityId(99), w.query.relation, vec![id(&w, "x")]);
        assert!(EpisodeState::reset(&w.graph, &w.pool, &bad, 3).is_err());
    }

    #[test]
    fn candidates_include_both_orientations() {
        let w = world();
        let s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        let c = s.extractor_candidates();
        assert_eq!(
            c,
            vec![
                ExtractorAction::Inject(0),
                ExtractorAction::Inject(1),
                ExtractorAction::Inject(2),
                ExtractorAction::Abstain
            ]
        );
        let q = w.query.relation;
        assert_eq!(s.oriented(1), Some(Triple::new(id(&w, "a"), w.graph.inverse(q), id(&w, "y"))));
    }

    #[test]
    fn empty_pool_offers_only_abstain() {
        let w = world();
        let empty = ExtractionPool::default();
        let s = EpisodeState::reset(&w.graph, &empty, &w.query, 3).unwrap();
        assert_eq!(s.extractor_candidates(), vec![ExtractorAction::Abstain]);
    }

    #[test]
    fn injected_triples_are_not_offered_again() {
        let w = world();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        s.step_extractor(ExtractorAction::Inject(0)).unwrap();
        s.step_reasoner(ReasonerAction::Hop(Edge::new(w.graph.relation_id("p").unwrap(), id(&w, "b"))))
            .unwrap();
        s.step_extractor(ExtractorAction::Abstain).unwrap();
        let back = Edge::new(w.graph.relation_id("p_inv").unwrap(), id(&w, "a"));
        s.step_reasoner(ReasonerAction::Hop(back)).unwrap();
        assert!(!s.extractor_candidates().contains(&ExtractorAction::Inject(0)));
        assert!(s.extractor_candidates().contains(&ExtractorAction::Inject(1)));
    }

    #[test]
    fn injection_extends_the_action_set() {
        let w = world();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        let before = s.reasoner_actions().unwrap();
        s.step_extractor(ExtractorAction::Inject(0)).unwrap();
        let after = s.reasoner_actions().unwrap();
        let new = ReasonerAction::Hop(Edge::new(w.query.relation, id(&w, "x")));
        assert!(!before.contains(&new));
        assert!(after.contains(&new));
        assert!(before.iter().all(|a| after.contains(a)));
        assert_eq!(after.last(), Some(&ReasonerAction::SelfLoop));
    }

    #[test]
    fn abstain_and_redundant_injection_leave_actions_alone() {
        let w = world();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        let before = s.reasoner_actions().unwrap();
        assert_eq!(s.step_extractor(ExtractorAction::Abstain).unwrap(), None);
        assert_eq!(s.reasoner_actions().unwrap(), before);

        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        let outcome = s.step_extractor(ExtractorAction::Inject(2)).unwrap();
        assert_eq!(outcome, Some(AddOutcome::Redundant));
        assert_eq!(s.reasoner_actions().unwrap(), before);
    }

    #[test]
    fn extractor_may_act_once_per_step() {
        let w = world();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        s.step_extractor(ExtractorAction::Abstain).unwrap();
        assert!(matches!(s.step_extractor(ExtractorAction::Abstain), Err(Error::IllegalAction(_))));
    }

    #[test]
    fn illegal_actions_are_errors() {
        let w = world();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        assert!(s.step_extractor(ExtractorAction::Inject(7)).is_err());
        let nowhere = ReasonerAction::Hop(Edge::new(w.query.relation, id(&w, "c")));
        assert!(matches!(s.step_reasoner(nowhere), Err(Error::IllegalAction(_))));
    }

    #[test]
    fn isolated_entity_can_only_stop() {
        let w = world();
        let q = Query::new(id(&w, "x"), w.query.relation, vec![id(&w, "a")]);
        let s = EpisodeState::reset(&w.graph, &w.pool, &q, 3).unwrap();
        assert_eq!(s.reasoner_actions().unwrap(), vec![ReasonerAction::SelfLoop]);
    }

    #[test]
    fn two_out_edges_give_three_actions() {
        let w = world();
        let q = Query::new(id(&w, "b"), w.query.relation, vec![id(&w, "a")]);
        let s = EpisodeState::reset(&w.graph, &w.pool, &q, 3).unwrap();
        assert_eq!(s.reasoner_actions().unwrap().len(), 3);
    }

    #[test]
    fn self_loop_at_answer_succeeds() {
        let w = world();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        s.step_extractor(ExtractorAction::Inject(0)).unwrap();
        s.step_reasoner(ReasonerAction::Hop(Edge::new(w.query.relation, id(&w, "x")))).unwrap();
        assert!(!s.is_terminal());
        s.step_reasoner(ReasonerAction::SelfLoop).unwrap();
        let t = s.trajectory().unwrap();
        assert!(t.success);
        assert_eq!(t.hops, 1);
        assert_eq!(t.injected, vec![0]);
        assert_eq!(t.adopted, vec![0]);
        assert_eq!(t.rejected(), 0);
        t.replay(&w.graph, &w.pool).unwrap();
        assert!(s.step_reasoner(ReasonerAction::SelfLoop).is_err());
    }

    #[test]
    fn horizon_ends_the_episode() {
        let w = world();
        let p = w.graph.relation_id("p").unwrap();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 2).unwrap();
        s.step_reasoner(ReasonerAction::Hop(Edge::new(p, id(&w, "b")))).unwrap();
        assert!(s.trajectory().is_err());
        s.step_reasoner(ReasonerAction::Hop(Edge::new(p, id(&w, "c")))).unwrap();
        let t = s.trajectory().unwrap();
        assert_eq!(t.terminal, id(&w, "c"));
        assert_eq!(t.hops, 2);
        assert_eq!(t.steps.len(), 2);
        assert!(!t.success);
    }

    #[test]
    fn inverse_traversal_counts_as_adoption() {
        let w = world();
        let q = w.query.relation;
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 3).unwrap();
        s.step_extractor(ExtractorAction::Inject(1)).unwrap();
        s.step_reasoner(ReasonerAction::Hop(Edge::new(w.graph.inverse(q), id(&w, "y")))).unwrap();
        assert!(s.adopted().contains(&1));
        assert!(s.unused().is_empty());
    }

    #[test]
    fn unused_injection_is_rejected() {
        let w = world();
        let p = w.graph.relation_id("p").unwrap();
        let mut s = EpisodeState::reset(&w.graph, &w.pool, &w.query, 1).unwrap();
        s.step_extractor(ExtractorAction::Inject(0)).unwrap();
        s.step_reasoner(ReasonerAction::Hop(Edge::new(p, id(&w, "b")))).unwrap();
        let t = s.trajectory().unwrap();
        assert_eq!(t.rejected(), 1);
        assert!(t.adopted.is_empty());
        let dump = t.dump(&w.graph, &w.pool);
        assert_eq!(dump.lines().count(), 3);
        assert!(dump.lines().nth(1).unwrap().starts_with("step\t0\tat\ta\textractor\tinject\t0\ta\tq\tx"));
    }
}

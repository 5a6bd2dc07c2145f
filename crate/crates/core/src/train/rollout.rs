use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{extractor_distribution, reasoner_distribution, select_action, Agents, SelectMode};
use crate::dataset::{ExtractionPool, Query};
use crate::embed::EmbeddingTable;
use crate::env::{EpisodeState, ExtractorAction, ReasonerAction, Trajectory};
use crate::error::Result;
use crate::kg::KnowledgeGraph;

/// Chooses actions for both agents. Returns `(index, log-probability)`.
pub trait Pilot {
    /// When false the extractor never acts; every step records a forced abstention.
    fn extractor_active(&self) -> bool {
        true
    }

    fn extractor(&mut self, state: &EpisodeState<'_>, candidates: &[ExtractorAction]) -> Result<(usize, f64)>;

    fn reasoner(&mut self, state: &EpisodeState<'_>, actions: &[ReasonerAction]) -> Result<(usize, f64)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Policy(SelectMode),
    Uniform,
    /// Extractor only: never act.
    Disabled,
}

/// Drives both agents from their parameters.
pub struct PolicyPilot<'a> {
    pub agents: &'a Agents,
    pub table: &'a EmbeddingTable,
    pub reasoner: Control,
    pub extractor: Control,
    pub rng: ChaCha8Rng,
}

impl<'a> PolicyPilot<'a> {
    pub fn new(agents: &'a Agents, table: &'a EmbeddingTable, mode: SelectMode, rng: ChaCha8Rng) -> Self {
        PolicyPilot {
            agents,
            table,
            reasoner: Control::Policy(mode),
            extractor: Control::Policy(mode),
            rng,
        }
    }

    pub fn reasoner_only(mut self) -> Self {
        self.extractor = Control::Disabled;
        self
    }
}

fn uniform(n: usize, rng: &mut ChaCha8Rng) -> (usize, f64) {
    (rng.gen_range(0..n), -(n as f64).ln())
}

impl Pilot for PolicyPilot<'_> {
    fn extractor_active(&self) -> bool {
        self.extractor != Control::Disabled
    }

    fn extractor(&mut self, state: &EpisodeState<'_>, candidates: &[ExtractorAction]) -> Result<(usize, f64)> {
        match self.extractor {
            Control::Policy(mode) => {
                let d = extractor_distribution(&self.agents.extractor, self.table, state, candidates)?;
                let i = select_action(&d.probs, mode, &mut self.rng)?;
                Ok((i, d.log_prob(i)))
            }
            Control::Uniform => Ok(uniform(candidates.len(), &mut self.rng)),
            Control::Disabled => Ok((candidates.len() - 1, 0.0)),
        }
    }

    fn reasoner(&mut self, state: &EpisodeState<'_>, actions: &[ReasonerAction]) -> Result<(usize, f64)> {
        match self.reasoner {
            Control::Policy(mode) => {
                let d = reasoner_distribution(&self.agents.reasoner, self.table, state, actions)?;
                let i = select_action(&d.probs, mode, &mut self.rng)?;
                Ok((i, d.log_prob(i)))
            }
            Control::Uniform | Control::Disabled => Ok(uniform(actions.len(), &mut self.rng)),
        }
    }
}

/// Plays one episode to termination. `log_prob` of the result sums both
/// agents' choices.
pub fn rollout<P: Pilot + ?Sized>(
    graph: &KnowledgeGraph,
    pool: &ExtractionPool,
    query: &Query,
    horizon: usize,
    pilot: &mut P,
) -> Result<Trajectory> {
    let mut state = EpisodeState::reset(graph, pool, query, horizon)?;
    let mut log_prob = 0.0;
    while !state.is_terminal() {
        if pilot.extractor_active() {
            let candidates = state.extractor_candidates();
            let (i, lp) = pilot.extractor(&state, &candidates)?;
            state.step_extractor(candidates[i])?;
            log_prob += lp;
        }
        let actions = state.reasoner_actions()?;
        let (i, lp) = pilot.reasoner(&state, &actions)?;
        state.step_reasoner(actions[i])?;
        log_prob += lp;
    }
    let mut t = state.trajectory()?;
    t.log_prob = log_prob;
    Ok(t)
}

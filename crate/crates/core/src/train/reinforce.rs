//! REINFORCE surrogate `Σ_traj Σ_t (G − b)·log π(a_t | s_t) + β·H(π(·| s_t))`
//! and its gradient, per agent.

use crate::agents::{encode_state, extractor_policy, reasoner_policy, AgentKind, Distribution, PolicyParams};
use crate::dataset::ExtractionPool;
use crate::embed::EmbeddingTable;
use crate::env::{ExtractorAction, StepRecord, Trajectory};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;

/// Read-only inputs needed to rebuild a step's action distribution.
#[derive(Clone, Copy)]
pub struct PolicyContext<'a> {
    pub graph: &'a KnowledgeGraph,
    pub pool: &'a ExtractionPool,
    pub table: &'a EmbeddingTable,
}

/// Distribution the agent of `params` saw at `rec`, and the index it chose.
pub fn step_distribution(
    params: &PolicyParams,
    ctx: PolicyContext<'_>,
    traj: &Trajectory,
    rec: &StepRecord,
) -> Result<(Distribution, usize)> {
    let msg = encode_state(ctx.table, rec.entity, &traj.query)?;
    match params.kind() {
        AgentKind::Reasoner => {
            let d = reasoner_policy(params, &msg, rec.entity, &rec.reasoner_actions, ctx.table, ctx.graph.self_loop())?;
            Ok((d, rec.reasoner_choice))
        }
        AgentKind::Extractor => {
            let oriented = rec
                .extractor_candidates
                .iter()
                .map(|c| match c {
                    ExtractorAction::Abstain => Ok(None),
                    ExtractorAction::Inject(i) => ctx
                        .pool
                        .get(*i)
                        .and_then(|p| ctx.graph.orient_from(&p.triple, rec.entity))
                        .map(Some)
                        .ok_or_else(|| Error::IllegalAction(format!("pool triple {i} not incident"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let d = extractor_policy(params, &msg, &oriented, ctx.table)?;
            Ok((d, rec.extractor_choice))
        }
    }
}

/// Surrogate objective from forward passes only.
pub fn surrogate_objective(
    params: &PolicyParams,
    ctx: PolicyContext<'_>,
    batch: &[(&Trajectory, f64)],
    baseline: f64,
    entropy_weight: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (traj, ret) in batch {
        for rec in &traj.steps {
            let (d, choice) = step_distribution(params, ctx, traj, rec)?;
            total += (ret - baseline) * d.log_prob(choice) + entropy_weight * d.entropy();
        }
    }
    Ok(total)
}

/// `(objective, ∇objective)`.
pub fn reinforce_gradient(
    params: &PolicyParams,
    ctx: PolicyContext<'_>,
    batch: &[(&Trajectory, f64)],
    baseline: f64,
    entropy_weight: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("empty training batch"));
    }
    let mut grad = vec![0.0; params.len()];
    let mut objective = 0.0;
    for (traj, ret) in batch {
        for rec in &traj.steps {
            let (d, choice) = step_distribution(params, ctx, traj, rec)?;
            objective += crate::agents::accumulate_gradient(params, &d, choice, ret - baseline, entropy_weight, &mut grad);
        }
    }
    if !objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("policy gradient"));
    }
    Ok((objective, grad))
}

/// One plain gradient-ascent step. On error `params` is left untouched.
pub fn reinforce_update(
    params: &mut PolicyParams,
    ctx: PolicyContext<'_>,
    batch: &[(&Trajectory, f64)],
    learning_rate: f64,
    baseline: f64,
    entropy_weight: f64,
) -> Result<f64> {
    let (objective, grad) = reinforce_gradient(params, ctx, batch, baseline, entropy_weight)?;
    Optimizer::new(OptimizerKind::Sgd, learning_rate, params.len()).apply(&mut params.values, &grad)?;
    Ok(objective)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::InvalidArgument(format!("unknown optimizer `{s}` (sgd|adam)"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

/// Gradient-ascent optimizer state for one parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, len: usize) -> Self {
        let n = if kind == OptimizerKind::Adam { len } else { 0 };
        Optimizer {
            kind,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() {
            return Err(Error::InvalidArgument("gradient length mismatch".into()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("policy gradient"));
        }
        if self.lr == 0.0 {
            return Ok(());
        }
        let step: Vec<f64> = match self.kind {
            OptimizerKind::Sgd => grad.iter().map(|g| self.lr * g).collect(),
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                grad.iter()
                    .enumerate()
                    .map(|(i, g)| {
                        self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
                        self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
                        self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS)
                    })
                    .collect()
            }
        };
        if step.iter().zip(params.iter()).any(|(s, p)| !(p + s).is_finite()) {
            return Err(Error::NonFinite("parameter update"));
        }
        params.iter_mut().zip(step).for_each(|(p, s)| *p += s);
        Ok(())
    }
}

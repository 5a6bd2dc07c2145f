//! Stochastic policies for the reasoner and the extractor.
//!
//! Both agents score each legal action with a small perceptron
//! `w2 · tanh(W1 x + b1)` (hidden width = embedding dimension) and take a
//! softmax over the legal set. The input `x` starts with the message
//! `[e_t; e_s; r_q]` the reasoner shares with the extractor:
//!
//! * reasoner: `[message; relation; tail]` of the candidate hop
//!   (`SELF_LOOP` uses its relation vector and the current entity);
//! * extractor: `[message; head; relation; tail]` of the candidate triple
//!   oriented from the current entity, or `[message; abstain]` with a learned
//!   abstain vector.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Query;
use crate::embed::EmbeddingTable;
use crate::env::{EpisodeState, ExtractorAction, ReasonerAction};
use crate::error::{Error, Result};
use crate::kg::{EntityId, Triple};
use crate::numfmt::{fmt_f64, parse_f64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Reasoner,
    Extractor,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Reasoner => "reasoner",
            AgentKind::Extractor => "extractor",
        }
    }

    fn input_blocks(self) -> usize {
        match self {
            AgentKind::Reasoner => 5,
            AgentKind::Extractor => 6,
        }
    }
}

/// Flat parameter vector `[W1 | b1 | w2 | abstain]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    kind: AgentKind,
    dim: usize,
    hidden: usize,
    input: usize,
    extra: usize,
    seed: u64,
    pub values: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(kind: AgentKind, dim: usize) -> Self {
        let input = kind.input_blocks() * dim;
        let hidden = dim;
        let extra = if kind == AgentKind::Extractor { 3 * dim } else { 0 };
        PolicyParams {
            kind,
            dim,
            hidden,
            input,
            extra,
            seed: 0,
            values: vec![0.0; hidden * input + 2 * hidden + extra],
        }
    }

    /// Uniform fan-in scaled initialization.
    pub fn random(kind: AgentKind, dim: usize, seed: u64) -> Self {
        let mut p = Self::zeros(kind, dim);
        p.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = 1.0 / (p.input as f64).sqrt();
        let w2 = 1.0 / (p.hidden as f64).sqrt();
        let (a, b) = (p.w1_range(), p.w2_range());
        for v in &mut p.values[a] {
            *v = rng.gen_range(-w1..w1);
        }
        for v in &mut p.values[b] {
            *v = rng.gen_range(-w2..w2);
        }
        let e = p.abstain_range();
        let s = 1.0 / (dim as f64).sqrt();
        for v in &mut p.values[e] {
            *v = rng.gen_range(-s..s);
        }
        p
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input + self.hidden;
        s..s + self.hidden
    }

    fn abstain_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input + 2 * self.hidden;
        s..s + self.extra
    }

    pub fn abstain_vector(&self) -> &[f64] {
        &self.values[self.abstain_range()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn score(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let w1 = &self.values[self.w1_range()];
        let b1 = &self.values[self.b1_range()];
        let w2 = &self.values[self.w2_range()];
        let mut logit = 0.0;
        for j in 0..self.hidden {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let pre = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            hidden[j] = pre.tanh();
            logit += w2[j] * hidden[j];
        }
        logit
    }

    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# coopkg policy checkpoint");
        let _ = writeln!(out, "agent\t{}", self.kind.name());
        let _ = writeln!(out, "dim\t{}", self.dim);
        let _ = writeln!(out, "input\t{}", self.input);
        let _ = writeln!(out, "hidden\t{}", self.hidden);
        let _ = writeln!(out, "extra\t{}", self.extra);
        let _ = writeln!(out, "params\t{}", self.values.len());
        let _ = writeln!(out, "seed\t{}", self.seed);
        for chunk in self.values.chunks(8) {
            let row: Vec<String> = chunk.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut header = std::collections::BTreeMap::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() == 2 && fields[0].chars().all(|c| c.is_ascii_lowercase()) {
                header.insert(fields[0].to_owned(), fields[1].to_owned());
                continue;
            }
            for f in fields {
                values.push(parse_f64(f).ok_or_else(|| bad(format!("line {}: bad float `{f}`", i + 1)))?);
            }
        }
        let get = |k: &str| -> Result<usize> {
            header
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("missing or bad `{k}`")))
        };
        let kind = match header.get("agent").map(String::as_str) {
            Some("reasoner") => AgentKind::Reasoner,
            Some("extractor") => AgentKind::Extractor,
            other => return Err(bad(format!("bad agent tag {other:?}"))),
        };
        let mut p = PolicyParams::zeros(kind, get("dim")?);
        if get("input")? != p.input || get("hidden")? != p.hidden || get("extra")? != p.extra {
            return Err(bad("layer shapes inconsistent with dimension".into()));
        }
        if get("params")? != values.len() || values.len() != p.values.len() {
            return Err(bad(format!("expected {} parameters, found {}", p.values.len(), values.len())));
        }
        p.seed = header
            .get("seed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing or bad `seed`".into()))?;
        p.values = values;
        Ok(p)
    }
}

/// Both agents' parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Agents {
    pub reasoner: PolicyParams,
    pub extractor: PolicyParams,
}

impl Agents {
    pub fn random(dim: usize, reasoner_seed: u64, extractor_seed: u64) -> Self {
        Agents {
            reasoner: PolicyParams::random(AgentKind::Reasoner, dim, reasoner_seed),
            extractor: PolicyParams::random(AgentKind::Extractor, dim, extractor_seed),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Agents {
            reasoner: PolicyParams::zeros(AgentKind::Reasoner, dim),
            extractor: PolicyParams::zeros(AgentKind::Extractor, dim),
        }
    }
}

/// `[embed(e_t); embed(e_s); embed(r_q)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Message(pub Vec<f64>);

pub fn encode_state(table: &EmbeddingTable, current: EntityId, query: &Query) -> Result<Message> {
    let mut v = Vec::with_capacity(3 * table.dim());
    v.extend_from_slice(table.entity(current)?);
    v.extend_from_slice(table.entity(query.source)?);
    v.extend_from_slice(table.relation(query.relation)?);
    Ok(Message(v))
}

/// Scored action set: per-action inputs and hidden activations kept for
/// the backward pass.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    abstain_row: Option<usize>,
}

impl Distribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn log_prob(&self, i: usize) -> f64 {
        let m = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = self.logits.iter().map(|l| (l - m).exp()).sum();
        self.logits[i] - m - z.ln()
    }

    pub fn entropy(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let p = self.probs[i];
                if p > 0.0 {
                    -p * self.log_prob(i)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn forward(params: &PolicyParams, inputs: Vec<Vec<f64>>, abstain_row: Option<usize>) -> Result<Distribution> {
    if inputs.is_empty() {
        return Err(Error::Empty("no legal actions to score"));
    }
    let mut hidden = Vec::with_capacity(inputs.len());
    let mut logits = Vec::with_capacity(inputs.len());
    for x in &inputs {
        let mut h = vec![0.0; params.hidden];
        logits.push(params.score(x, &mut h));
        hidden.push(h);
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exp.iter().sum();
    let probs = exp.iter().map(|e| e / z).collect();
    Ok(Distribution {
        probs,
        logits,
        inputs,
        hidden,
        abstain_row,
    })
}

pub fn reasoner_policy(
    params: &PolicyParams,
    message: &Message,
    current: EntityId,
    actions: &[ReasonerAction],
    table: &EmbeddingTable,
    self_loop: crate::kg::RelationId,
) -> Result<Distribution> {
    let inputs = actions
        .iter()
        .map(|a| {
            let (r, t) = match a {
                ReasonerAction::Hop(e) => (e.relation, e.tail),
                ReasonerAction::SelfLoop => (self_loop, current),
            };
            let mut x = Vec::with_capacity(params.input);
            x.extend_from_slice(&message.0);
            x.extend_from_slice(table.relation(r)?);
            x.extend_from_slice(table.entity(t)?);
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    forward(params, inputs, None)
}

/// `candidates[i]` is the oriented triple, or `None` for abstain.
pub fn extractor_policy(
    params: &PolicyParams,
    message: &Message,
    candidates: &[Option<Triple>],
    table: &EmbeddingTable,
) -> Result<Distribution> {
    let mut abstain_row = None;
    let inputs = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut x = Vec::with_capacity(params.input);
            x.extend_from_slice(&message.0);
            match c {
                Some(t) => {
                    x.extend_from_slice(table.entity(t.head)?);
                    x.extend_from_slice(table.relation(t.relation)?);
                    x.extend_from_slice(table.entity(t.tail)?);
                }
                None => {
                    abstain_row = Some(i);
                    x.extend_from_slice(params.abstain_vector());
                }
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    if candidates.iter().filter(|c| c.is_none()).count() > 1 {
        return Err(Error::InvalidArgument("at most one abstain candidate".into()));
    }
    forward(params, inputs, abstain_row)
}

/// Reasoner distribution for the current state of an episode.
pub fn reasoner_distribution(
    params: &PolicyParams,
    table: &EmbeddingTable,
    state: &EpisodeState<'_>,
    actions: &[ReasonerAction],
) -> Result<Distribution> {
    let msg = encode_state(table, state.current(), state.query())?;
    reasoner_policy(params, &msg, state.current(), actions, table, state.graph().self_loop())
}

/// Extractor distribution for the current state of an episode.
pub fn extractor_distribution(
    params: &PolicyParams,
    table: &EmbeddingTable,
    state: &EpisodeState<'_>,
    candidates: &[ExtractorAction],
) -> Result<Distribution> {
    let msg = encode_state(table, state.current(), state.query())?;
    let oriented = orient_candidates(state, candidates)?;
    extractor_policy(params, &msg, &oriented, table)
}

pub(crate) fn orient_candidates(
    state: &EpisodeState<'_>,
    candidates: &[ExtractorAction],
) -> Result<Vec<Option<Triple>>> {
    candidates
        .iter()
        .map(|c| match c {
            ExtractorAction::Abstain => Ok(None),
            ExtractorAction::Inject(i) => state
                .oriented(*i)
                .map(Some)
                .ok_or_else(|| Error::IllegalAction(format!("pool triple {i} not incident"))),
        })
        .collect()
}

/// Adds `∇θ [advantage · log π(choice) + entropy_weight · H(π)]` into
/// `grad` and returns the objective value.
pub fn accumulate_gradient(
    params: &PolicyParams,
    dist: &Distribution,
    choice: usize,
    advantage: f64,
    entropy_weight: f64,
    grad: &mut [f64],
) -> f64 {
    let n = dist.len();
    let logp: Vec<f64> = (0..n).map(|i| dist.log_prob(i)).collect();
    let entropy: f64 = (0..n).map(|i| -dist.probs[i] * logp[i]).sum();
    let objective = advantage * logp[choice] + entropy_weight * entropy;
    if n == 1 {
        return objective;
    }
    let (w1r, b1r, w2r, exr) = (params.w1_range(), params.b1_range(), params.w2_range(), params.abstain_range());
    let w1 = &params.values[w1r.clone()];
    let w2 = &params.values[w2r.clone()];
    for k in 0..n {
        let p = dist.probs[k];
        let indicator = if k == choice { 1.0 } else { 0.0 };
        let dlogit = advantage * (indicator - p) - entropy_weight * p * (logp[k] + entropy);
        if dlogit == 0.0 {
            continue;
        }
        let x = &dist.inputs[k];
        let h = &dist.hidden[k];
        for j in 0..params.hidden {
            grad[w2r.start + j] += dlogit * h[j];
            let dpre = dlogit * w2[j] * (1.0 - h[j] * h[j]);
            if dpre == 0.0 {
                continue;
            }
            grad[b1r.start + j] += dpre;
            let row = w1r.start + j * params.input;
            for (g, v) in grad[row..row + params.input].iter_mut().zip(x) {
                *g += dpre * v;
            }
            if dist.abstain_row == Some(k) {
                let offset = 3 * params.dim;
                for a in 0..params.extra {
                    grad[exr.start + a] += dpre * w1[j * params.input + offset + a];
                }
            }
        }
    }
    objective
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    Greedy,
    Sample,
}

/// Greedy: argmax, lowest index on ties. Sample: inverse-CDF draw.
pub fn select_action<R: Rng + ?Sized>(probs: &[f64], mode: SelectMode, rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Empty("empty distribution"));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::NonFinite("action distribution"));
    }
    match mode {
        SelectMode::Greedy => {
            let mut best = 0;
            for (i, p) in probs.iter().enumerate() {
                if *p > probs[best] {
                    best = i;
                }
            }
            Ok(best)
        }
        SelectMode::Sample => {
            let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
            let mut acc = 0.0;
            let mut last_positive = 0;
            for (i, p) in probs.iter().enumerate() {
                if *p > 0.0 {
                    last_positive = i;
                }
                acc += p;
                if u < acc {
                    return Ok(i);
                }
            }
            Ok(last_positive)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Edge, KnowledgeGraph, RelationId};
    use proptest::prelude::*;

    fn table() -> (KnowledgeGraph, EmbeddingTable) {
        let g = KnowledgeGraph::load_triples("a\tr\tb\nb\tr\tc\na\ts\tc\n").unwrap();
        let t = EmbeddingTable::initialize(&g, 4, 5).unwrap();
        (g, t)
    }

    fn hops(g: &KnowledgeGraph) -> Vec<ReasonerAction> {
        let a = g.entity_id("a").unwrap();
        let mut v: Vec<ReasonerAction> = g.neighbors(a).unwrap().iter().copied().map(ReasonerAction::Hop).collect();
        v.push(ReasonerAction::SelfLoop);
        v
    }

    fn query(g: &KnowledgeGraph) -> Query {
        Query::new(g.entity_id("a").unwrap(), g.relation_id("r").unwrap(), vec![g.entity_id("c").unwrap()])
    }

    #[test]
    fn message_layout_at_reset() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        assert_eq!(m.0.len(), 12);
        assert_eq!(&m.0[0..4], t.entity(q.source).unwrap());
        assert_eq!(&m.0[4..8], t.entity(q.source).unwrap());
        assert_eq!(&m.0[8..12], t.relation(q.relation).unwrap());
        assert_eq!(m, encode_state(&t, q.source, &q).unwrap());
        assert!(encode_state(&t, EntityId(40), &q).is_err());
    }

    #[test]
    fn unseen_query_relation_uses_zero_shot_block() {
        let mut b = crate::kg::GraphBuilder::new();
        b.add_text("a\tr\tb\n").unwrap();
        let unseen = b.intern_relation("u").unwrap();
        let g = b.build();
        let t = EmbeddingTable::initialize(&g, 4, 1).unwrap();
        let q = Query::new(g.entity_id("a").unwrap(), unseen, vec![g.entity_id("b").unwrap()]);
        let m = encode_state(&t, q.source, &q).unwrap();
        let z = t.zero_shot_relation().unwrap();
        assert_eq!(&m.0[8..12], z.as_slice());
    }

    #[test]
    fn singleton_and_zero_params() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        let p = PolicyParams::random(AgentKind::Reasoner, 4, 1);
        let d = reasoner_policy(&p, &m, q.source, &[ReasonerAction::SelfLoop], &t, g.self_loop()).unwrap();
        assert_eq!(d.probs, vec![1.0]);
        let z = PolicyParams::zeros(AgentKind::Reasoner, 4);
        let acts = hops(&g);
        let d = reasoner_policy(&z, &m, q.source, &acts, &t, g.self_loop()).unwrap();
        for p in &d.probs {
            assert!((p - 1.0 / acts.len() as f64).abs() < 1e-15);
        }
        let ez = PolicyParams::zeros(AgentKind::Extractor, 4);
        let d = extractor_policy(&ez, &m, &[None], &t).unwrap();
        assert_eq!(d.probs, vec![1.0]);
        let tr = Triple::new(q.source, q.relation, g.entity_id("b").unwrap());
        let d = extractor_policy(&ez, &m, &[Some(tr), Some(tr), None], &t).unwrap();
        assert!(d.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn duplicate_extractor_candidates_tie() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        let p = PolicyParams::random(AgentKind::Extractor, 4, 8);
        let tr = Triple::new(q.source, q.relation, g.entity_id("c").unwrap());
        let other = Triple::new(q.source, g.relation_id("s").unwrap(), g.entity_id("b").unwrap());
        let d = extractor_policy(&p, &m, &[Some(tr), Some(other), Some(tr), None], &t).unwrap();
        assert_eq!(d.probs[0], d.probs[2]);
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reasoner_is_permutation_equivariant() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        let p = PolicyParams::random(AgentKind::Reasoner, 4, 2);
        let acts = hops(&g);
        let d = reasoner_policy(&p, &m, q.source, &acts, &t, g.self_loop()).unwrap();
        let mut rev = acts.clone();
        rev.reverse();
        let dr = reasoner_policy(&p, &m, q.source, &rev, &t, g.self_loop()).unwrap();
        for i in 0..acts.len() {
            assert!((d.probs[i] - dr.probs[acts.len() - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn greedy_selection_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[0.2, 0.8], SelectMode::Greedy, &mut rng).unwrap(), 1);
        assert_eq!(select_action(&[0.5, 0.5], SelectMode::Greedy, &mut rng).unwrap(), 0);
        assert!(select_action(&[f64::NAN, 1.0], SelectMode::Greedy, &mut rng).is_err());
        assert!(select_action(&[], SelectMode::Sample, &mut rng).is_err());
    }

    #[test]
    fn sampled_frequencies_track_probabilities() {
        let probs = [0.1, 0.25, 0.05, 0.6];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&probs, SelectMode::Sample, &mut rng).unwrap()] += 1;
        }
        for i in 0..4 {
            let f = counts[i] as f64 / n as f64;
            assert!((f - probs[i]).abs() < 0.01, "{i}: {f}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        for kind in [AgentKind::Reasoner, AgentKind::Extractor] {
            let mut p = PolicyParams::random(kind, 3, 17);
            p.values.iter_mut().for_each(|v| *v = crate::numfmt::quantize(*v));
            let text = p.to_checkpoint();
            let back = PolicyParams::from_checkpoint(&text).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.to_checkpoint(), text);
        }
        assert!(PolicyParams::from_checkpoint("agent\treasoner\ndim\t2\n").is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        let acts = hops(&g);
        let p = PolicyParams::random(AgentKind::Reasoner, 4, 3);
        let obj = |p: &PolicyParams| {
            let d = reasoner_policy(p, &m, q.source, &acts, &t, g.self_loop()).unwrap();
            0.7 * d.log_prob(1) + 0.3 * d.entropy()
        };
        let d = reasoner_policy(&p, &m, q.source, &acts, &t, g.self_loop()).unwrap();
        let mut grad = vec![0.0; p.len()];
        let v = accumulate_gradient(&p, &d, 1, 0.7, 0.3, &mut grad);
        assert!((v - obj(&p)).abs() < 1e-12);
        let h = 1e-5;
        for i in 0..p.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.values[i] += h;
            b.values[i] -= h;
            let fd = (obj(&a) - obj(&b)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7 + 1e-5 * fd.abs(), "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn abstain_vector_gradient() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        let p = PolicyParams::random(AgentKind::Extractor, 4, 4);
        let c = [Some(Triple::new(q.source, RelationId(0), g.entity_id("b").unwrap())), None];
        let obj = |p: &PolicyParams| extractor_policy(p, &m, &c, &t).unwrap().log_prob(1);
        let d = extractor_policy(&p, &m, &c, &t).unwrap();
        let mut grad = vec![0.0; p.len()];
        accumulate_gradient(&p, &d, 1, 1.0, 0.0, &mut grad);
        let h = 1e-5;
        for i in p.abstain_range() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.values[i] += h;
            b.values[i] -= h;
            let fd = (obj(&a) - obj(&b)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7 + 1e-5 * fd.abs());
        }
    }

    proptest! {
        #[test]
        fn distributions_are_valid(seed in 0u64..500, scale in 0.0f64..20.0, n in 1usize..4) {
            let (g, t) = table();
            let q = query(&g);
            let m = encode_state(&t, q.source, &q).unwrap();
            let mut p = PolicyParams::random(AgentKind::Reasoner, 4, seed);
            p.values.iter_mut().for_each(|v| *v *= scale);
            let acts: Vec<_> = hops(&g).into_iter().rev().take(n).collect();
            let d = reasoner_policy(&p, &m, q.source, &acts, &t, g.self_loop()).unwrap();
            prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.probs.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn greedy_ignores_positive_rescaling(logits in proptest::collection::vec(-5.0f64..5.0, 1..8), c in 0.1f64..10.0) {
            let soft = |l: &[f64]| {
                let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = l.iter().map(|x| (x - m).exp()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|x| x / z).collect::<Vec<_>>()
            };
            let scaled: Vec<f64> = logits.iter().map(|l| l * c).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let a = select_action(&soft(&logits), SelectMode::Greedy, &mut rng).unwrap();
            let b = select_action(&soft(&scaled), SelectMode::Greedy, &mut rng).unwrap();
            prop_assert_eq!(logits[a], logits[b]);
        }
    }

    #[test]
    fn edge_hop_scoring_uses_tail() {
        let (g, t) = table();
        let q = query(&g);
        let m = encode_state(&t, q.source, &q).unwrap();
        let p = PolicyParams::random(AgentKind::Reasoner, 4, 6);
        let r = g.relation_id("r").unwrap();
        let acts = [
            ReasonerAction::Hop(Edge::new(r, g.entity_id("b").unwrap())),
            ReasonerAction::Hop(Edge::new(r, g.entity_id("c").unwrap())),
        ];
        let d = reasoner_policy(&p, &m, q.source, &acts, &t, g.self_loop()).unwrap();
        assert_ne!(d.logits[0], d.logits[1]);
    }
}

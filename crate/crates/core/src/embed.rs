//! Entity and relation embeddings used for state encoding and soft rewards.
//!
//! Training uses a translational margin-ranking objective with negative
//! sampling. The table is frozen once trained; triples injected during
//! episodes reuse the vectors of entities and relations already present.
//! Relations with no edge in the training graph receive the zero-shot
//! vector (mean of trained relation vectors). `SELF_LOOP` is pinned to the
//! zero translation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::numfmt::{fmt_f64, parse_f64, quantize};

/// Energy model over (head, relation, tail) vectors; lower energy = more plausible.
pub trait Scorer {
    fn tag(&self) -> &'static str;

    fn energy(&self, head: &[f64], relation: &[f64], tail: &[f64]) -> f64;

    /// Adds `scale * ∂energy/∂(head, relation, tail)` into the three buffers.
    fn accumulate_grad(
        &self,
        head: &[f64],
        relation: &[f64],
        tail: &[f64],
        scale: f64,
        grads: (&mut [f64], &mut [f64], &mut [f64]),
    );
}

/// `‖h + r − t‖²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Translational;

impl Scorer for Translational {
    fn tag(&self) -> &'static str {
        "translational"
    }

    fn energy(&self, head: &[f64], relation: &[f64], tail: &[f64]) -> f64 {
        head.iter()
            .zip(relation)
            .zip(tail)
            .map(|((h, r), t)| (h + r - t).powi(2))
            .sum()
    }

    fn accumulate_grad(
        &self,
        head: &[f64],
        relation: &[f64],
        tail: &[f64],
        scale: f64,
        (gh, gr, gt): (&mut [f64], &mut [f64], &mut [f64]),
    ) {
        for i in 0..head.len() {
            let g = 2.0 * (head[i] + relation[i] - tail[i]) * scale;
            gh[i] += g;
            gr[i] += g;
            gt[i] -= g;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 16,
            epochs: 100,
            learning_rate: 0.01,
            negatives: 2,
            margin: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationStatus {
    Trained,
    ZeroShot,
    /// The stop action's zero translation.
    Fixed,
}

impl RelationStatus {
    fn tag(self) -> &'static str {
        match self {
            RelationStatus::Trained => "trained",
            RelationStatus::ZeroShot => "zero_shot",
            RelationStatus::Fixed => "fixed",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "trained" => Some(RelationStatus::Trained),
            "zero_shot" => Some(RelationStatus::ZeroShot),
            "fixed" => Some(RelationStatus::Fixed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    scorer: String,
    seed: u64,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entities: Vec<f64>,
    relations: Vec<f64>,
    status: Vec<RelationStatus>,
    /// Zero-shot vectors for relation names outside the graph vocabulary.
    extra: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Seeded random initialization: unit-norm entities and relations, the
    /// stop relation at zero, relations without edges set to zero-shot.
    pub fn initialize(graph: &KnowledgeGraph, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 6.0 / (dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-bound..bound)).collect();
            for row in v.chunks_mut(dim) {
                normalize(row);
            }
            v
        };
        let entities = draw(graph.entity_count());
        let mut relations = draw(graph.relation_count());

        let mut has_edge = vec![false; graph.relation_count()];
        for e in 0..graph.entity_count() {
            for edge in graph.neighbors(EntityId(e as u32))? {
                has_edge[edge.relation.index()] = true;
            }
        }
        let self_loop = graph.self_loop().index();
        relations[self_loop * dim..(self_loop + 1) * dim].fill(0.0);
        let status = (0..graph.relation_count())
            .map(|r| {
                if r == self_loop {
                    RelationStatus::Fixed
                } else if has_edge[r] {
                    RelationStatus::Trained
                } else {
                    RelationStatus::ZeroShot
                }
            })
            .collect();

        let mut table = EmbeddingTable {
            dim,
            scorer: Translational.tag().to_owned(),
            seed,
            entity_names: graph.entity_names().to_vec(),
            relation_names: (0..graph.relation_count())
                .map(|r| graph.relation_name(RelationId(r as u32)).into_owned())
                .collect(),
            entities,
            relations,
            status,
            extra: BTreeMap::new(),
        };
        table.refresh_zero_shot();
        Ok(table)
    }

    fn refresh_zero_shot(&mut self) {
        let Ok(mean) = self.zero_shot_relation() else {
            return;
        };
        for r in 0..self.status.len() {
            if self.status[r] == RelationStatus::ZeroShot {
                self.relations[r * self.dim..(r + 1) * self.dim].copy_from_slice(&mean);
            }
        }
        for v in self.extra.values_mut() {
            v.copy_from_slice(&mean);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scorer_tag(&self) -> &str {
        &self.scorer
    }

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn relation_status(&self, r: RelationId) -> Option<RelationStatus> {
        self.status.get(r.index()).copied()
    }

    pub fn entity(&self, e: EntityId) -> Result<&[f64]> {
        let i = e.index();
        if i >= self.entity_count() {
            return Err(Error::UnknownEntity(e.0));
        }
        Ok(&self.entities[i * self.dim..(i + 1) * self.dim])
    }

    /// Relation vector; zero-shot relations return the registered mean.
    pub fn relation(&self, r: RelationId) -> Result<&[f64]> {
        let i = r.index();
        if i >= self.relation_count() {
            return Err(Error::UnknownRelation(r.0));
        }
        Ok(&self.relations[i * self.dim..(i + 1) * self.dim])
    }

    /// Mean of all trained relation vectors.
    pub fn zero_shot_relation(&self) -> Result<Vec<f64>> {
        let mut mean = vec![0.0; self.dim];
        let mut n = 0usize;
        for (r, status) in self.status.iter().enumerate() {
            if *status == RelationStatus::Trained {
                for (m, v) in mean.iter_mut().zip(&self.relations[r * self.dim..(r + 1) * self.dim]) {
                    *m += v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Empty("no trained relation vectors to average"));
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        Ok(mean)
    }

    /// Vector for a relation name outside the vocabulary. Registered on first
    /// use so later lookups return the same vector.
    pub fn register_unseen(&mut self, name: &str) -> Result<&[f64]> {
        if let Some(i) = self.relation_names.iter().position(|n| n == name) {
            return self.relation(RelationId(i as u32));
        }
        if !self.extra.contains_key(name) {
            let v = self.zero_shot_relation()?.into_iter().map(quantize).collect();
            self.extra.insert(name.to_owned(), v);
        }
        Ok(&self.extra[name])
    }

    /// `1 / (1 + ‖a − b‖)`.
    pub fn similarity(&self, a: EntityId, b: EntityId) -> Result<f64> {
        let (x, y) = (self.entity(a)?, self.entity(b)?);
        Ok(vector_similarity(x, y))
    }

    /// Plausibility `−energy` under the table's scorer.
    pub fn score(&self, t: &Triple) -> Result<f64> {
        Ok(-Translational.energy(
            self.entity(t.head)?,
            self.relation(t.relation)?,
            self.entity(t.tail)?,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|v| v.is_finite())
    }

    fn quantize_in_place(&mut self) {
        for v in self.entities.iter_mut().chain(self.relations.iter_mut()) {
            *v = quantize(*v);
        }
        for v in self.extra.values_mut().flatten() {
            *v = quantize(*v);
        }
    }

    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# coopkg embedding checkpoint");
        let _ = writeln!(out, "dim\t{}", self.dim);
        let _ = writeln!(out, "entities\t{}", self.entity_count());
        let _ = writeln!(out, "relations\t{}", self.relation_count());
        let _ = writeln!(out, "scorer\t{}", self.scorer);
        let _ = writeln!(out, "seed\t{}", self.seed);
        let row = |out: &mut String, prefix: &str, name: &str, v: &[f64]| {
            out.push_str(prefix);
            out.push('\t');
            out.push_str(name);
            for x in v {
                out.push('\t');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        };
        for (i, name) in self.entity_names.iter().enumerate() {
            row(&mut out, "E", name, &self.entities[i * self.dim..(i + 1) * self.dim]);
        }
        for (i, name) in self.relation_names.iter().enumerate() {
            let prefix = format!("R\t{}", self.status[i].tag());
            row(&mut out, &prefix, name, &self.relations[i * self.dim..(i + 1) * self.dim]);
        }
        for (name, v) in &self.extra {
            row(&mut out, "X", name, v);
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut header: BTreeMap<&str, &str> = BTreeMap::new();
        let mut table = EmbeddingTable {
            dim: 0,
            scorer: String::new(),
            seed: 0,
            entity_names: Vec::new(),
            relation_names: Vec::new(),
            entities: Vec::new(),
            relations: Vec::new(),
            status: Vec::new(),
            extra: BTreeMap::new(),
        };
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "E" | "R" | "X" => {
                    if table.dim == 0 {
                        let dim = header.get("dim").ok_or_else(|| bad("missing dim".into()))?;
                        table.dim = dim.parse().map_err(|_| bad(format!("bad dim `{dim}`")))?;
                    }
                    let skip = if fields[0] == "R" { 3 } else { 2 };
                    if fields.len() != skip + table.dim {
                        return Err(bad(format!("line {}: expected {} values", lineno + 1, table.dim)));
                    }
                    let values = fields[skip..]
                        .iter()
                        .map(|s| parse_f64(s).ok_or_else(|| bad(format!("line {}: bad float `{s}`", lineno + 1))))
                        .collect::<Result<Vec<_>>>()?;
                    match fields[0] {
                        "E" => {
                            table.entity_names.push(fields[1].to_owned());
                            table.entities.extend(values);
                        }
                        "R" => {
                            let status = RelationStatus::from_tag(fields[1])
                                .ok_or_else(|| bad(format!("line {}: bad status `{}`", lineno + 1, fields[1])))?;
                            table.status.push(status);
                            table.relation_names.push(fields[2].to_owned());
                            table.relations.extend(values);
                        }
                        _ => {
                            table.extra.insert(fields[1].to_owned(), values);
                        }
                    }
                }
                key if fields.len() == 2 => {
                    header.insert(key, fields[1]);
                }
                _ => return Err(bad(format!("line {}: unrecognized row", lineno + 1))),
            }
        }
        let count = |key: &str| -> Result<usize> {
            header
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("missing or bad `{key}`")))
        };
        table.dim = count("dim")?;
        if count("entities")? != table.entity_names.len() || count("relations")? != table.relation_names.len() {
            return Err(bad("row counts disagree with header".into()));
        }
        table.scorer = header.get("scorer").ok_or_else(|| bad("missing scorer".into()))?.to_string();
        if table.scorer != Translational.tag() {
            return Err(bad(format!("unsupported scorer `{}`", table.scorer)));
        }
        table.seed = header
            .get("seed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing or bad `seed`".into()))?;
        Ok(table)
    }

    /// Errors unless the table's vocabularies match the graph's.
    pub fn check_compatible(&self, graph: &KnowledgeGraph) -> Result<()> {
        if self.entity_names != graph.entity_names() {
            return Err(Error::Checkpoint("entity vocabulary differs from the dataset".into()));
        }
        let rels: Vec<String> = (0..graph.relation_count())
            .map(|r| graph.relation_name(RelationId(r as u32)).into_owned())
            .collect();
        if self.relation_names != rels {
            return Err(Error::Checkpoint("relation vocabulary differs from the dataset".into()));
        }
        Ok(())
    }
}

pub fn vector_similarity(x: &[f64], y: &[f64]) -> f64 {
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    1.0 / (1.0 + d)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// A positive triple and one corruption of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankingPair {
    pub positive: Triple,
    pub negative: Triple,
}

/// Margin ranking loss `Σ max(0, margin + E(pos) − E(neg))` and its gradient
/// with respect to the flat entity and relation buffers.
pub fn margin_loss<S: Scorer>(
    scorer: &S,
    dim: usize,
    entities: &[f64],
    relations: &[f64],
    pairs: &[RankingPair],
    margin: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let mut ge = vec![0.0; entities.len()];
    let mut gr = vec![0.0; relations.len()];
    let mut loss = 0.0;
    for p in pairs {
        loss += accumulate_pair(scorer, dim, entities, relations, p, margin, &mut ge, &mut gr);
    }
    (loss, ge, gr)
}

#[allow(clippy::too_many_arguments)]
fn accumulate_pair<S: Scorer>(
    scorer: &S,
    dim: usize,
    entities: &[f64],
    relations: &[f64],
    pair: &RankingPair,
    margin: f64,
    ge: &mut [f64],
    gr: &mut [f64],
) -> f64 {
    let row = |buf: &[f64], i: usize| buf[i * dim..(i + 1) * dim].to_vec();
    let energy = |t: &Triple| {
        scorer.energy(
            &row(entities, t.head.index()),
            &row(relations, t.relation.index()),
            &row(entities, t.tail.index()),
        )
    };
    let hinge = margin + energy(&pair.positive) - energy(&pair.negative);
    if hinge <= 0.0 {
        return 0.0;
    }
    for (t, sign) in [(&pair.positive, 1.0), (&pair.negative, -1.0)] {
        let (h, r, tl) = (
            row(entities, t.head.index()),
            row(relations, t.relation.index()),
            row(entities, t.tail.index()),
        );
        let mut bh = vec![0.0; dim];
        let mut br = vec![0.0; dim];
        let mut bt = vec![0.0; dim];
        scorer.accumulate_grad(&h, &r, &tl, sign, (&mut bh, &mut br, &mut bt));
        for i in 0..dim {
            ge[t.head.index() * dim + i] += bh[i];
            gr[t.relation.index() * dim + i] += br[i];
            ge[t.tail.index() * dim + i] += bt[i];
        }
    }
    hinge
}

#[derive(Clone, Debug)]
pub struct TrainedEmbeddings {
    pub table: EmbeddingTable,
    /// Mean hinge loss per epoch.
    pub losses: Vec<f64>,
}

pub fn train_embeddings(graph: &KnowledgeGraph, cfg: &EmbedConfig) -> Result<TrainedEmbeddings> {
    if cfg.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    if graph.edge_count() == 0 {
        return Err(Error::Empty("cannot train embeddings on a graph without edges"));
    }
    let mut table = EmbeddingTable::initialize(graph, cfg.dim, cfg.seed)?;
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e1b0);
    let mut edges: Vec<Triple> = Vec::with_capacity(graph.edge_count());
    for e in 0..graph.entity_count() {
        let h = EntityId(e as u32);
        for edge in graph.neighbors(h)? {
            edges.push(Triple::new(h, edge.relation, edge.tail));
        }
    }
    let n_ent = graph.entity_count() as u32;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let scorer = Translational;
    let mut ge = vec![0.0; table.entities.len()];
    let mut gr = vec![0.0; table.relations.len()];
    for _ in 0..cfg.epochs {
        edges.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut terms = 0usize;
        for pos in &edges {
            for _ in 0..cfg.negatives.max(1) {
                let mut neg = *pos;
                for _ in 0..10 {
                    neg = *pos;
                    let e = EntityId(rng.gen_range(0..n_ent));
                    if rng.gen_bool(0.5) {
                        neg.head = e;
                    } else {
                        neg.tail = e;
                    }
                    if !graph.contains(&neg) {
                        break;
                    }
                }
                let pair = RankingPair {
                    positive: *pos,
                    negative: neg,
                };
                let touched = [pos.head, pos.tail, neg.head, neg.tail];
                let loss = accumulate_pair(
                    &scorer,
                    dim,
                    &table.entities,
                    &table.relations,
                    &pair,
                    cfg.margin,
                    &mut ge,
                    &mut gr,
                );
                epoch_loss += loss;
                terms += 1;
                if loss > 0.0 {
                    for e in touched {
                        let i = e.index() * dim;
                        for k in i..i + dim {
                            table.entities[k] -= cfg.learning_rate * ge[k];
                            ge[k] = 0.0;
                        }
                    }
                    let i = pos.relation.index() * dim;
                    for k in i..i + dim {
                        table.relations[k] -= cfg.learning_rate * gr[k];
                        gr[k] = 0.0;
                    }
                    for e in touched {
                        let i = e.index() * dim;
                        normalize(&mut table.entities[i..i + dim]);
                    }
                }
            }
        }
        losses.push(epoch_loss / terms.max(1) as f64);
    }
    if !table.is_finite() {
        return Err(Error::NonFinite("embedding table"));
    }
    table.refresh_zero_shot();
    table.quantize_in_place();
    Ok(TrainedEmbeddings { table, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphBuilder;

    fn cfg(dim: usize, epochs: usize) -> EmbedConfig {
        EmbedConfig {
            dim,
            epochs,
            learning_rate: 0.05,
            negatives: 2,
            margin: 1.0,
            seed: 3,
        }
    }

    #[test]
    fn loss_drops_on_a_single_edge() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\n").unwrap();
        let t = train_embeddings(&g, &cfg(4, 50)).unwrap();
        assert!(t.losses[49] < t.losses[0], "{:?}", t.losses);
    }

    #[test]
    fn zero_epochs_is_the_initialization() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\nb\ts\tc\n").unwrap();
        let t = train_embeddings(&g, &cfg(8, 0)).unwrap();
        let mut init = EmbeddingTable::initialize(&g, 8, 3).unwrap();
        init.quantize_in_place();
        assert_eq!(t.table, init);
        assert!(t.losses.is_empty());
    }

    #[test]
    fn trained_chain_prefers_held_pair() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\nb\tr\tc\n").unwrap();
        let t = train_embeddings(&g, &cfg(8, 200)).unwrap();
        let r = g.relation_id("r").unwrap();
        let [a, b, c] = ["a", "b", "c"].map(|n| g.entity_id(n).unwrap());
        let held = t.table.score(&Triple::new(a, r, b)).unwrap();
        let corrupt = t.table.score(&Triple::new(a, r, c)).unwrap();
        assert!(held > corrupt, "{held} vs {corrupt}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\n").unwrap();
        assert!(train_embeddings(&g, &cfg(0, 1)).is_err());
        let empty = KnowledgeGraph::load_triples("").unwrap();
        assert!(train_embeddings(&empty, &cfg(4, 1)).is_err());
    }

    #[test]
    fn zero_shot_is_mean_of_trained() {
        let mut b = GraphBuilder::new();
        b.add_named("a", "r", "b").unwrap();
        let unseen = b.intern_relation("never").unwrap();
        let g = b.build();
        let mut t = train_embeddings(&g, &cfg(4, 5)).unwrap().table;
        let r = g.relation_id("r").unwrap();
        let (v1, v2) = (t.relation(r).unwrap().to_vec(), t.relation(g.inverse(r)).unwrap().to_vec());
        let mean = t.zero_shot_relation().unwrap();
        for i in 0..4 {
            assert!((mean[i] - (v1[i] + v2[i]) / 2.0).abs() < 1e-12);
        }
        assert_eq!(t.relation_status(unseen), Some(RelationStatus::ZeroShot));
        let stored = t.relation(unseen).unwrap().to_vec();
        for i in 0..4 {
            assert!((stored[i] - mean[i]).abs() < 1e-8);
        }
        let first = t.register_unseen("brand_new").unwrap().to_vec();
        let second = t.register_unseen("brand_new").unwrap().to_vec();
        assert_eq!(first, second);
        assert_eq!(first, mean.iter().map(|&x| quantize(x)).collect::<Vec<_>>());
    }

    #[test]
    fn zero_shot_of_a_single_vector_is_that_vector() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\n").unwrap();
        let mut t = EmbeddingTable::initialize(&g, 3, 1).unwrap();
        // leave only the forward relation marked trained
        let inv = g.inverse(g.relation_id("r").unwrap());
        t.status[inv.index()] = RelationStatus::ZeroShot;
        let v = t.relation(g.relation_id("r").unwrap()).unwrap().to_vec();
        assert_eq!(t.zero_shot_relation().unwrap(), v);
    }

    #[test]
    fn zero_shot_needs_trained_relations() {
        let mut b = GraphBuilder::new();
        b.intern_entity("a");
        b.intern_relation("r").unwrap();
        let g = b.build();
        let t = EmbeddingTable::initialize(&g, 3, 1).unwrap();
        assert!(t.zero_shot_relation().is_err());
    }

    #[test]
    fn similarity_formula() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\n").unwrap();
        let mut t = EmbeddingTable::initialize(&g, 2, 1).unwrap();
        t.entities = vec![0.0, 0.0, 0.6, 0.8];
        let [a, b] = ["a", "b"].map(|n| g.entity_id(n).unwrap());
        assert_eq!(t.similarity(a, a).unwrap(), 1.0);
        assert!((t.similarity(a, b).unwrap() - 0.5).abs() < 1e-15);
        assert!(t.similarity(a, EntityId(9)).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\nb\ts\tc\n").unwrap();
        let mut t = train_embeddings(&g, &cfg(5, 10)).unwrap().table;
        t.register_unseen("extra").unwrap();
        let text = t.to_checkpoint();
        let back = EmbeddingTable::from_checkpoint(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_checkpoint(), text);
        back.check_compatible(&g).unwrap();
    }

    #[test]
    fn loss_gradient_matches_central_differences() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\nb\ts\tc\n").unwrap();
        let dim = 3;
        let t = EmbeddingTable::initialize(&g, dim, 9).unwrap();
        assert!(t.entities.len() + t.relations.len() <= 50);
        let [a, b, c] = ["a", "b", "c"].map(|n| g.entity_id(n).unwrap());
        let r = g.relation_id("r").unwrap();
        let s = g.relation_id("s").unwrap();
        let pairs = [
            RankingPair { positive: Triple::new(a, r, b), negative: Triple::new(a, r, c) },
            RankingPair { positive: Triple::new(b, s, c), negative: Triple::new(a, s, c) },
            RankingPair { positive: Triple::new(b, g.inverse(r), a), negative: Triple::new(c, g.inverse(r), a) },
        ];
        let margin = 10.0; // keep every hinge active so the loss is smooth here
        let (_, ge, gr) = margin_loss(&Translational, dim, &t.entities, &t.relations, &pairs, margin);
        let h = 1e-5;
        let loss = |e: &[f64], r: &[f64]| margin_loss(&Translational, dim, e, r, &pairs, margin).0;
        for i in 0..t.entities.len() {
            let (mut p, mut m) = (t.entities.clone(), t.entities.clone());
            p[i] += h;
            m[i] -= h;
            let fd = (loss(&p, &t.relations) - loss(&m, &t.relations)) / (2.0 * h);
            assert!((fd - ge[i]).abs() <= 1e-4 * fd.abs().max(1e-3), "entity {i}: {fd} vs {}", ge[i]);
        }
        for i in 0..t.relations.len() {
            let (mut p, mut m) = (t.relations.clone(), t.relations.clone());
            p[i] += h;
            m[i] -= h;
            let fd = (loss(&t.entities, &p) - loss(&t.entities, &m)) / (2.0 * h);
            assert!((fd - gr[i]).abs() <= 1e-4 * fd.abs().max(1e-3), "relation {i}: {fd} vs {}", gr[i]);
        }
    }

    #[test]
    fn training_is_reproducible() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\nb\ts\tc\nc\tr\ta\n").unwrap();
        let x = train_embeddings(&g, &cfg(6, 20)).unwrap();
        let y = train_embeddings(&g, &cfg(6, 20)).unwrap();
        assert_eq!(x.table, y.table);
        assert_eq!(x.losses, y.losses);
    }
}

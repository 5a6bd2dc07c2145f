//! Synthetic incomplete knowledge graphs.
//!
//! Each query `(source, r_q)` gets a planted answer reachable through an
//! equivalent path of exactly `path_len` hops over fresh intermediate
//! entities. The direct `r_q` edge is moved from the graph into the
//! extraction pool with probability `ablation`. Distractor pool triples are
//! random background facts anchored at query sources that never shorten any
//! query's bounded distance to its answers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, DatasetFiles, ExtractionPool, PoolTriple, Provenance, Query};
use crate::error::{Error, Result};
use crate::kg::{EntityId, GraphOverlay, KnowledgeGraph, Neighborhood, Triple};

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    /// Total entity count, background plus per-query path entities.
    pub entities: usize,
    /// Named relations, query relations included.
    pub relations: usize,
    /// How many of `relations` are reserved for queries.
    pub query_relations: usize,
    /// Out-degree of each background entity.
    pub branching: usize,
    /// Hops in each planted equivalent path.
    pub path_len: usize,
    pub queries: usize,
    pub ablation: f64,
    pub distractor_ratio: f64,
    /// Distractors may not shorten any query distance that is at most this.
    pub guard_hops: usize,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            entities: 200,
            relations: 12,
            query_relations: 4,
            branching: 2,
            path_len: 2,
            queries: 20,
            ablation: 1.0,
            distractor_ratio: 1.0,
            guard_hops: 3,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn background_entities(&self) -> usize {
        self.entities.saturating_sub(self.queries * self.path_len)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSpec(m));
        if self.path_len < 1 {
            return fail("path length must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.ablation) {
            return fail(format!("ablation ratio {} outside [0, 1]", self.ablation));
        }
        if !(self.distractor_ratio >= 0.0 && self.distractor_ratio.is_finite()) {
            return fail(format!("distractor ratio {} must be >= 0", self.distractor_ratio));
        }
        if self.queries == 0 {
            return fail("query count must be positive".into());
        }
        if self.query_relations == 0 || self.relations <= self.query_relations {
            return fail(format!(
                "need at least one query relation and one path relation (relations={}, query_relations={})",
                self.relations, self.query_relations
            ));
        }
        let needed = self.queries * self.path_len + 2;
        if self.entities < needed {
            return fail(format!(
                "{} entities cannot hold {} queries with {}-hop paths plus 2 background entities (need {needed})",
                self.entities, self.queries, self.path_len
            ));
        }
        let background = self.background_entities();
        if self.queries > background * self.query_relations {
            return fail(format!(
                "{} queries exceed the {} distinct (source, relation) pairs",
                self.queries,
                background * self.query_relations
            ));
        }
        if self.branching >= background {
            return fail(format!(
                "branching {} must be below the background entity count {background}",
                self.branching
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub dataset: Dataset,
    pub files: DatasetFiles,
    pub spec: GenSpec,
}

pub fn generate(spec: &GenSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let background = spec.background_entities();
    let query_rels: Vec<String> = (0..spec.query_relations).map(|i| format!("rq{i}")).collect();
    let path_rels: Vec<String> = (0..spec.relations - spec.query_relations)
        .map(|i| format!("p{i}"))
        .collect();
    let bg_name = |i: usize| format!("b{i}");

    let mut graph_lines: Vec<[String; 3]> = Vec::new();
    let mut seen = BTreeSet::new();
    for h in 0..background {
        let mut placed = 0;
        let mut attempts = 0;
        while placed < spec.branching && attempts < 100 * spec.branching {
            attempts += 1;
            let t = rng.gen_range(0..background);
            let r = rng.gen_range(0..path_rels.len());
            if t == h || !seen.insert((h, r, t)) {
                continue;
            }
            graph_lines.push([bg_name(h), path_rels[r].clone(), bg_name(t)]);
            placed += 1;
        }
    }

    // compositional rule per query relation: r_q ≡ p_a ∘ p_b ∘ …
    let patterns: Vec<Vec<usize>> = (0..spec.query_relations)
        .map(|_| {
            (0..spec.path_len)
                .map(|_| rng.gen_range(0..path_rels.len()))
                .collect()
        })
        .collect();

    let mut pairs: Vec<(usize, usize)> = (0..background)
        .flat_map(|b| (0..spec.query_relations).map(move |q| (b, q)))
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(spec.queries);

    let mut query_lines = Vec::new();
    let mut genuine_lines: Vec<[String; 3]> = Vec::new();
    for (j, &(src, qrel)) in pairs.iter().enumerate() {
        let answer = format!("q{j}_ans");
        let mut prev = bg_name(src);
        for (k, &p) in patterns[qrel].iter().enumerate() {
            let next = if k + 1 == spec.path_len {
                answer.clone()
            } else {
                format!("q{j}_m{}", k + 1)
            };
            graph_lines.push([prev, path_rels[p].clone(), next.clone()]);
            prev = next;
        }
        let direct = [bg_name(src), query_rels[qrel].clone(), answer.clone()];
        if rng.gen::<f64>() < spec.ablation {
            genuine_lines.push(direct);
        } else {
            graph_lines.push(direct);
        }
        query_lines.push([bg_name(src), query_rels[qrel].clone(), answer]);
    }

    let join = |lines: &[[String; 3]], suffix: Option<&str>| {
        let mut s = String::new();
        for l in lines {
            s.push_str(&l.join("\t"));
            if let Some(x) = suffix {
                s.push('\t');
                s.push_str(x);
            }
            s.push('\n');
        }
        s
    };

    // reserve every name before placing distractors so ids are stable
    let staged = DatasetFiles {
        graph: join(&graph_lines, None),
        pool: join(&genuine_lines, Some("genuine")),
        queries: join(&query_lines, None),
    };
    let staged_ds = Dataset::parse(&staged)?;
    let distractors = place_distractors(spec, &staged_ds, &path_rels, &mut rng)?;

    let mut pool = staged.pool.clone();
    for [h, r, t] in &distractors {
        pool.push_str(&format!("{h}\t{r}\t{t}\tdistractor\n"));
    }
    let files = DatasetFiles {
        graph: staged.graph,
        pool,
        queries: staged.queries,
    };
    let dataset = Dataset::parse(&files)?;
    Ok(GeneratedDataset {
        dataset,
        files,
        spec: spec.clone(),
    })
}

fn place_distractors(
    spec: &GenSpec,
    ds: &Dataset,
    path_rels: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[String; 3]>> {
    let wanted = (spec.distractor_ratio * ds.pool.len() as f64).round() as usize;
    if wanted == 0 {
        return Ok(Vec::new());
    }
    let g = &ds.graph;
    let background: Vec<EntityId> = (0..spec.background_entities())
        .map(|i| g.entity_id(&format!("b{i}")))
        .collect::<Result<_>>()?;
    let rels = path_rels
        .iter()
        .map(|r| g.relation_id(r))
        .collect::<Result<Vec<_>>>()?;

    let mut overlay = GraphOverlay::new(g);
    for t in ds.pool.genuine() {
        overlay.add_triple(*t)?;
    }
    let reference = bounded_distances(&overlay, &ds.queries, spec.guard_hops)?;

    let mut placed: Vec<Triple> = Vec::new();
    let mut attempts = 0;
    while placed.len() < wanted {
        attempts += 1;
        if attempts > 1000 * wanted {
            return Err(Error::InvalidSpec(format!(
                "placed only {} of {wanted} distractors without creating shortcuts",
                placed.len()
            )));
        }
        let anchor = ds.queries[rng.gen_range(0..ds.queries.len())].source;
        let other = background[rng.gen_range(0..background.len())];
        let rel = rels[rng.gen_range(0..rels.len())];
        if other == anchor {
            continue;
        }
        let t = if rng.gen_bool(0.5) {
            Triple::new(anchor, rel, other)
        } else {
            Triple::new(other, rel, anchor)
        };
        if overlay.contains(&t) {
            continue;
        }
        let mut trial = overlay.clone();
        trial.add_triple(t)?;
        if bounded_distances(&trial, &ds.queries, spec.guard_hops)? != reference {
            continue;
        }
        overlay = trial;
        placed.push(t);
    }
    Ok(placed
        .iter()
        .map(|t| {
            [
                g.entity_name(t.head).to_owned(),
                g.relation_name(t.relation).into_owned(),
                g.entity_name(t.tail).to_owned(),
            ]
        })
        .collect())
}

fn bounded_distances<N: Neighborhood>(
    graph: &N,
    queries: &[Query],
    max_hops: usize,
) -> Result<Vec<Option<usize>>> {
    queries
        .iter()
        .map(|q| {
            Ok(shortest_distance(graph, q.source, &q.answers, Some(max_hops))?
                .filter(|&d| d <= max_hops))
        })
        .collect()
}

/// Breadth-first hop distance from `source` to the nearest of `targets`,
/// following forward and inverse edges. `limit` stops the search early.
pub fn shortest_distance<N: Neighborhood>(
    graph: &N,
    source: EntityId,
    targets: &[EntityId],
    limit: Option<usize>,
) -> Result<Option<usize>> {
    graph.graph().check_entity(source)?;
    if targets.contains(&source) {
        return Ok(Some(0));
    }
    let mut dist = vec![usize::MAX; graph.graph().entity_count()];
    dist[source.index()] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(e) = queue.pop_front() {
        let d = dist[e.index()];
        if limit.is_some_and(|l| d >= l) {
            continue;
        }
        for edge in graph.out_edges(e)?.iter() {
            let t = edge.tail.index();
            if dist[t] == usize::MAX {
                dist[t] = d + 1;
                if targets.contains(&edge.tail) {
                    return Ok(Some(d + 1));
                }
                queue.push_back(edge.tail);
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachabilityReport {
    pub max_hops: usize,
    /// Exact shortest distance per query; `None` if disconnected.
    pub distances: Vec<Option<usize>>,
    /// Distance → query count; `None` counts disconnected queries.
    pub histogram: BTreeMap<Option<usize>, usize>,
}

impl ReachabilityReport {
    pub fn reachable_within(&self, query: usize) -> bool {
        self.distances[query].is_some_and(|d| d <= self.max_hops)
    }

    pub fn unreachable_count(&self) -> usize {
        (0..self.distances.len())
            .filter(|&i| !self.reachable_within(i))
            .count()
    }

    /// Most frequent finite distance, smallest first on ties.
    pub fn mode(&self) -> Option<usize> {
        self.histogram
            .iter()
            .filter_map(|(d, c)| d.map(|d| (d, *c)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(d, _)| d)
    }

    /// `distance=count` pairs, `inf` for disconnected.
    pub fn histogram_line(&self) -> String {
        self.histogram
            .iter()
            .map(|(d, c)| match d {
                Some(d) => format!("{d}={c}"),
                None => format!("inf={c}"),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn reachability_report<N: Neighborhood>(
    graph: &N,
    queries: &[Query],
    max_hops: usize,
) -> Result<ReachabilityReport> {
    let mut distances = Vec::with_capacity(queries.len());
    let mut histogram = BTreeMap::new();
    for q in queries {
        let d = shortest_distance(graph, q.source, &q.answers, None)?;
        *histogram.entry(d).or_insert(0) += 1;
        distances.push(d);
    }
    Ok(ReachabilityReport {
        max_hops,
        distances,
        histogram,
    })
}

/// Overlay of the base graph with every genuine pool triple injected.
pub fn with_genuine_injected(ds: &Dataset) -> Result<GraphOverlay<'_>> {
    let mut overlay = GraphOverlay::new(&ds.graph);
    for t in ds.pool.genuine() {
        overlay.add_triple(*t)?;
    }
    Ok(overlay)
}

/// Moves each genuine pool triple `(source, r, answer)` of a query so it
/// starts `hops` steps along a shortest base-graph path from `source` to
/// `answer` instead. Other pool entries are kept. Models drift in which the
/// missing fact surfaces somewhere else.
pub fn shift_genuine(ds: &Dataset, hops: usize) -> Result<ExtractionPool> {
    let entries = ds
        .pool
        .entries()
        .iter()
        .map(|p| {
            let t = p.triple;
            let planted = p.provenance == Provenance::Genuine
                && ds.queries.iter().any(|q| q.source == t.head && q.is_answer(t.tail));
            if !planted {
                return Ok(*p);
            }
            let path = shortest_path(&ds.graph, t.head, t.tail)?
                .ok_or_else(|| Error::InvalidArgument(format!("no base path for pool triple {}", ds.graph.format_triple(&t))))?;
            if hops == 0 || hops >= path.len() - 1 {
                return Err(Error::InvalidArgument(format!(
                    "cannot shift by {hops} along a {}-hop path",
                    path.len() - 1
                )));
            }
            Ok(PoolTriple {
                triple: Triple::new(path[hops], t.relation, t.tail),
                provenance: Provenance::Genuine,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtractionPool::new(entries))
}

/// Entities along one shortest path, endpoints included.
fn shortest_path(graph: &KnowledgeGraph, from: EntityId, to: EntityId) -> Result<Option<Vec<EntityId>>> {
    let mut parent = vec![None; graph.entity_count()];
    let mut seen = vec![false; graph.entity_count()];
    seen[from.index()] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(e) = queue.pop_front() {
        if e == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(p) = parent[cur.index()] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for edge in graph.neighbors(e)? {
            if !seen[edge.tail.index()] {
                seen[edge.tail.index()] = true;
                parent[edge.tail.index()] = Some(e);
                queue.push_back(edge.tail);
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(path_len: usize, ablation: f64, distractor_ratio: f64) -> GenSpec {
        GenSpec {
            entities: 120,
            path_len,
            queries: 10,
            ablation,
            distractor_ratio,
            seed: 11,
            ..GenSpec::default()
        }
    }

    #[test]
    fn six_hop_paths_when_fully_ablated() {
        let g = generate(&spec(6, 1.0, 1.0)).unwrap();
        let ds = &g.dataset;
        let report = reachability_report(&ds.graph, &ds.queries, 3).unwrap();
        assert!(report.distances.iter().all(|&d| d == Some(6)));
        assert_eq!(report.unreachable_count(), ds.queries.len());
        assert_eq!(report.mode(), Some(6));
        let injected = with_genuine_injected(ds).unwrap();
        let after = reachability_report(&injected, &ds.queries, 3).unwrap();
        assert!(after.distances.iter().all(|&d| d == Some(1)));
    }

    #[test]
    fn no_ablation_no_distractors_gives_empty_pool() {
        let g = generate(&spec(3, 0.0, 0.0)).unwrap();
        assert!(g.dataset.pool.is_empty());
        let report = reachability_report(&g.dataset.graph, &g.dataset.queries, 3).unwrap();
        assert!(report.distances.iter().all(|&d| d == Some(1)));
    }

    #[test]
    fn distractors_match_ratio_and_are_labelled() {
        let g = generate(&spec(2, 1.0, 2.0)).unwrap();
        let pool = &g.dataset.pool;
        let genuine = pool.genuine_count();
        let distractors = pool
            .entries()
            .iter()
            .filter(|p| p.provenance == Provenance::Distractor)
            .count();
        assert_eq!(genuine, 10);
        assert_eq!(distractors, 20);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&spec(4, 0.5, 1.0)).unwrap();
        let b = generate(&spec(4, 0.5, 1.0)).unwrap();
        assert_eq!(a.files, b.files);
        let mut other = spec(4, 0.5, 1.0);
        other.seed = 12;
        assert_ne!(generate(&other).unwrap().files, a.files);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut s = spec(6, 1.0, 1.0);
        s.entities = 30;
        assert!(matches!(generate(&s), Err(Error::InvalidSpec(_))));
        let mut s = spec(0, 1.0, 1.0);
        s.path_len = 0;
        assert!(generate(&s).is_err());
        let mut s = spec(2, 1.5, 1.0);
        s.ablation = 1.5;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn empty_query_list_gives_empty_report() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\n").unwrap();
        let r = reachability_report(&g, &[], 3).unwrap();
        assert!(r.distances.is_empty());
        assert!(r.histogram.is_empty());
    }

    #[test]
    fn shifted_pool_starts_mid_path() {
        let g = generate(&spec(6, 1.0, 1.0)).unwrap();
        let ds = &g.dataset;
        let pool = shift_genuine(ds, 1).unwrap();
        assert_eq!(pool.len(), ds.pool.len());
        let moved = ds.with_pool(pool);
        for (q, d) in ds.queries.iter().zip(reachability_report(&with_genuine_injected(&moved).unwrap(), &ds.queries, 3).unwrap().distances) {
            assert_eq!(d, Some(2), "query from {}", ds.graph.entity_name(q.source));
        }
        assert!(shift_genuine(ds, 6).is_err());
        assert!(shift_genuine(ds, 0).is_err());
    }
}

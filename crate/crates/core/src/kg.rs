//! Triple store for the reasoner's world.
//!
//! Every forward relation `r` with vocabulary index `k` gets id `2k`; its
//! inverse gets `2k + 1`. The stop action `SELF_LOOP` takes the id right after
//! the last inverse, so `relation_count() == 2 * named + 1`. Every stored edge
//! `(h, r, t)` is paired with `(t, r⁻¹, h)`.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

pub const SELF_LOOP_NAME: &str = "SELF_LOOP";
const INVERSE_SUFFIX: &str = "_inv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Odd ids are inverse directions.
    pub fn is_inverse_direction(self) -> bool {
        self.0 % 2 == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// An out-edge `(relation, tail)`. Ordered by relation id, then tail id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Edge {
    pub fn new(relation: RelationId, tail: EntityId) -> Self {
        Edge { relation, tail }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Accumulates vocabularies and triples before freezing them into a
/// [`KnowledgeGraph`]. Ids handed out here are final.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.intern(name))
    }

    /// Returns the forward id of `name`.
    pub fn intern_relation(&mut self, name: &str) -> Result<RelationId> {
        if name == SELF_LOOP_NAME {
            return Err(Error::InvalidArgument(format!(
                "relation name `{SELF_LOOP_NAME}` is reserved"
            )));
        }
        Ok(RelationId(2 * self.relations.intern(name)))
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(|k| RelationId(2 * k))
    }

    /// Adds a forward triple. Returns `false` if it was already present.
    pub fn add_triple(&mut self, triple: Triple) -> bool {
        debug_assert!(!triple.relation.is_inverse_direction());
        if self.seen.insert(triple) {
            self.triples.push(triple);
            true
        } else {
            self.duplicates += 1;
            false
        }
    }

    pub fn add_named(&mut self, head: &str, relation: &str, tail: &str) -> Result<bool> {
        let h = self.intern_entity(head);
        let r = self.intern_relation(relation)?;
        let t = self.intern_entity(tail);
        Ok(self.add_triple(Triple::new(h, r, t)))
    }

    /// Reads triple-file text: one `head TAB relation TAB tail` per line,
    /// blank lines and `#` comments skipped.
    pub fn add_text(&mut self, text: &str) -> Result<()> {
        for (lineno, fields) in data_lines(text) {
            if fields.len() != 3 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            check_names(lineno, &fields)?;
            self.add_named(fields[0], fields[1], fields[2])
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
        }
        Ok(())
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn build(self) -> KnowledgeGraph {
        let named = self.relations.len() as u32;
        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); self.entities.len()];
        for t in &self.triples {
            adjacency[t.head.index()].push(Edge::new(t.relation, t.tail));
            adjacency[t.tail.index()].push(Edge::new(RelationId(t.relation.0 + 1), t.head));
        }
        for edges in &mut adjacency {
            edges.sort_unstable();
            edges.dedup();
        }
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            self_loop: RelationId(2 * named),
            adjacency,
            triples: self.triples,
            duplicates: self.duplicates,
        }
    }
}

/// Splits text into `(1-based line number, tab fields)`, skipping blanks and
/// comments.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

pub(crate) fn check_names(lineno: usize, fields: &[&str]) -> Result<()> {
    if let Some(empty) = fields.iter().position(|f| f.trim().is_empty()) {
        return Err(Error::parse(lineno, format!("field {} is empty", empty + 1)));
    }
    Ok(())
}

/// Immutable knowledge graph with inverse-edge closure.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    self_loop: RelationId,
    adjacency: Vec<Vec<Edge>>,
    triples: Vec<Triple>,
    duplicates: usize,
}

impl KnowledgeGraph {
    /// Parses triple-file text into a graph.
    pub fn load_triples(text: &str) -> Result<Self> {
        let mut builder = GraphBuilder::new();
        builder.add_text(text)?;
        Ok(builder.build())
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Forward, inverse and `SELF_LOOP` ids.
    pub fn relation_count(&self) -> usize {
        self.self_loop.index() + 1
    }

    pub fn named_relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn self_loop(&self) -> RelationId {
        self.self_loop
    }

    pub fn inverse(&self, r: RelationId) -> RelationId {
        if r == self.self_loop {
            r
        } else {
            RelationId(r.0 ^ 1)
        }
    }

    /// Number of directed edges, inverses included.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Duplicate triple lines skipped while loading.
    pub fn duplicates_ignored(&self) -> usize {
        self.duplicates
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.entities.len() {
            Ok(())
        } else {
            Err(Error::UnknownEntity(e.0))
        }
    }

    pub fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.index() < self.relation_count() {
            Ok(())
        } else {
            Err(Error::UnknownRelation(r.0))
        }
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.entities
            .get(name)
            .map(EntityId)
            .ok_or_else(|| Error::UnknownEntityName(name.to_owned()))
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId> {
        if name == SELF_LOOP_NAME {
            return Ok(self.self_loop);
        }
        if let Some(k) = self.relations.get(name) {
            return Ok(RelationId(2 * k));
        }
        name.strip_suffix(INVERSE_SUFFIX)
            .and_then(|base| self.relations.get(base))
            .map(|k| RelationId(2 * k + 1))
            .ok_or_else(|| Error::UnknownRelationName(name.to_owned()))
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        self.entities.name(e.0).unwrap_or("<invalid>")
    }

    pub fn relation_name(&self, r: RelationId) -> Cow<'_, str> {
        if r == self.self_loop {
            return Cow::Borrowed(SELF_LOOP_NAME);
        }
        match self.relations.name(r.0 / 2) {
            Some(name) if r.is_inverse_direction() => Cow::Owned(format!("{name}{INVERSE_SUFFIX}")),
            Some(name) => Cow::Borrowed(name),
            None => Cow::Borrowed("<invalid>"),
        }
    }

    pub fn entity_names(&self) -> &[String] {
        self.entities.names()
    }

    /// Out-edges of `e`, sorted, without the self-loop.
    pub fn neighbors(&self, e: EntityId) -> Result<&[Edge]> {
        self.adjacency
            .get(e.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownEntity(e.0))
    }

    /// True if the directed edge is stored (either as loaded or as an inverse).
    pub fn contains(&self, t: &Triple) -> bool {
        self.adjacency
            .get(t.head.index())
            .is_some_and(|edges| edges.binary_search(&Edge::new(t.relation, t.tail)).is_ok())
    }

    /// Loaded forward triples in file order, duplicates removed.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Serializes the loaded triples back to triple-file text.
    pub fn to_triple_text(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&self.format_triple(t));
            out.push('\n');
        }
        out
    }

    pub fn format_triple(&self, t: &Triple) -> String {
        format!(
            "{}\t{}\t{}",
            self.entity_name(t.head),
            self.relation_name(t.relation),
            self.entity_name(t.tail)
        )
    }

    /// Rewrites a triple so `e` is its head, inverting the relation if `e`
    /// was the tail. `None` if `e` is not incident.
    pub fn orient_from(&self, t: &Triple, e: EntityId) -> Option<Triple> {
        if t.head == e {
            Some(*t)
        } else if t.tail == e {
            Some(Triple::new(t.tail, self.inverse(t.relation), t.head))
        } else {
            None
        }
    }
}

/// Anything that can answer out-edge queries.
pub trait Neighborhood {
    fn graph(&self) -> &KnowledgeGraph;
    fn out_edges(&self, e: EntityId) -> Result<Cow<'_, [Edge]>>;
}

impl Neighborhood for KnowledgeGraph {
    fn graph(&self) -> &KnowledgeGraph {
        self
    }

    fn out_edges(&self, e: EntityId) -> Result<Cow<'_, [Edge]>> {
        self.neighbors(e).map(Cow::Borrowed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    /// Already added to this overlay.
    AlreadyAdded,
    /// Already an edge of the base graph; nothing stored.
    Redundant,
}

/// Per-episode copy-on-write layer of added triples over a shared base graph.
#[derive(Clone, Debug)]
pub struct GraphOverlay<'g> {
    base: &'g KnowledgeGraph,
    added: BTreeMap<EntityId, Vec<Edge>>,
    triples: Vec<Triple>,
}

impl<'g> GraphOverlay<'g> {
    pub fn new(base: &'g KnowledgeGraph) -> Self {
        GraphOverlay {
            base,
            added: BTreeMap::new(),
            triples: Vec::new(),
        }
    }

    pub fn base(&self) -> &'g KnowledgeGraph {
        self.base
    }

    /// Triples added so far, in insertion order, as given.
    pub fn added_triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.base.contains(t) || self.contains_added(t)
    }

    fn contains_added(&self, t: &Triple) -> bool {
        self.added
            .get(&t.head)
            .is_some_and(|edges| edges.binary_search(&Edge::new(t.relation, t.tail)).is_ok())
    }

    /// Adds `t` and its inverse. Idempotent.
    pub fn add_triple(&mut self, t: Triple) -> Result<AddOutcome> {
        self.base.check_entity(t.head)?;
        self.base.check_entity(t.tail)?;
        self.base.check_relation(t.relation)?;
        if t.relation == self.base.self_loop() {
            return Err(Error::InvalidArgument(
                "cannot add a SELF_LOOP triple".into(),
            ));
        }
        if self.base.contains(&t) {
            return Ok(AddOutcome::Redundant);
        }
        if self.contains_added(&t) {
            return Ok(AddOutcome::AlreadyAdded);
        }
        let inverse = Triple::new(t.tail, self.base.inverse(t.relation), t.head);
        for edge in [t, inverse] {
            let list = self.added.entry(edge.head).or_default();
            let e = Edge::new(edge.relation, edge.tail);
            if let Err(pos) = list.binary_search(&e) {
                list.insert(pos, e);
            }
        }
        self.triples.push(t);
        Ok(AddOutcome::Added)
    }

    /// Base ∪ overlay out-edges of `e`, sorted and deduplicated.
    pub fn neighbors(&self, e: EntityId) -> Result<Vec<Edge>> {
        let base = self.base.neighbors(e)?;
        match self.added.get(&e) {
            None => Ok(base.to_vec()),
            Some(extra) => {
                let mut merged = Vec::with_capacity(base.len() + extra.len());
                let (mut i, mut j) = (0, 0);
                while i < base.len() && j < extra.len() {
                    match base[i].cmp(&extra[j]) {
                        std::cmp::Ordering::Less => {
                            merged.push(base[i]);
                            i += 1;
                        }
                        std::cmp::Ordering::Greater => {
                            merged.push(extra[j]);
                            j += 1;
                        }
                        std::cmp::Ordering::Equal => {
                            merged.push(base[i]);
                            i += 1;
                            j += 1;
                        }
                    }
                }
                merged.extend_from_slice(&base[i..]);
                merged.extend_from_slice(&extra[j..]);
                Ok(merged)
            }
        }
    }
}

impl Neighborhood for GraphOverlay<'_> {
    fn graph(&self) -> &KnowledgeGraph {
        self.base
    }

    fn out_edges(&self, e: EntityId) -> Result<Cow<'_, [Edge]>> {
        self.neighbors(e).map(Cow::Owned)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> KnowledgeGraph {
        KnowledgeGraph::load_triples("a\tr\tb\nb\tr\tc\n").unwrap()
    }

    #[test]
    fn single_line_graph() {
        let g = KnowledgeGraph::load_triples("a\tr\tb").unwrap();
        assert_eq!(g.entity_count(), 2);
        assert_eq!(g.relation_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let r = g.relation_id("r").unwrap();
        assert_eq!(g.relation_id("r_inv").unwrap(), g.inverse(r));
        assert_eq!(g.relation_name(g.self_loop()), SELF_LOOP_NAME);
        assert_eq!(g.inverse(g.self_loop()), g.self_loop());
    }

    #[test]
    fn empty_graph_rejects_every_id() {
        let g = KnowledgeGraph::load_triples("").unwrap();
        assert_eq!(g.entity_count(), 0);
        assert!(matches!(g.neighbors(EntityId(0)), Err(Error::UnknownEntity(0))));
    }

    #[test]
    fn father_of_twice_is_a_two_hop_path() {
        let g = KnowledgeGraph::load_triples(
            "stanley\tfatherOf\tbarack_sr\nbarack_sr\tfatherOf\tobama\n",
        )
        .unwrap();
        assert_eq!(g.entity_count(), 3);
        let f = g.relation_id("fatherOf").unwrap();
        let stanley = g.entity_id("stanley").unwrap();
        let mid = g.entity_id("barack_sr").unwrap();
        let obama = g.entity_id("obama").unwrap();
        assert_eq!(g.neighbors(stanley).unwrap(), &[Edge::new(f, mid)]);
        assert!(g.neighbors(mid).unwrap().contains(&Edge::new(f, obama)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = KnowledgeGraph::load_triples("a\tr\tb\n# c\n\nx\ty\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = KnowledgeGraph::load_triples("a\tSELF_LOOP\tb\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicates_are_counted_and_dropped() {
        let g = KnowledgeGraph::load_triples("a\tr\tb\na\tr\tb\n").unwrap();
        assert_eq!(g.duplicates_ignored(), 1);
        assert_eq!(g.triples().len(), 1);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn chain_middle_sees_both_directions() {
        let g = chain();
        let r = g.relation_id("r").unwrap();
        let [a, b, c] = ["a", "b", "c"].map(|n| g.entity_id(n).unwrap());
        let mut expected = vec![Edge::new(g.inverse(r), a), Edge::new(r, c)];
        expected.sort();
        assert_eq!(g.neighbors(b).unwrap(), expected.as_slice());
    }

    #[test]
    fn isolated_entity_has_no_edges() {
        let mut b = GraphBuilder::new();
        b.add_named("a", "r", "b").unwrap();
        let lonely = b.intern_entity("z");
        let g = b.build();
        assert!(g.neighbors(lonely).unwrap().is_empty());
    }

    #[test]
    fn overlay_add_is_visible_both_ways_and_idempotent() {
        let mut b = GraphBuilder::new();
        let a = b.intern_entity("a");
        let x = b.intern_entity("x");
        let r = b.intern_relation("r").unwrap();
        let g = b.build();
        let mut o = GraphOverlay::new(&g);
        let t = Triple::new(a, r, x);
        assert_eq!(o.add_triple(t).unwrap(), AddOutcome::Added);
        assert_eq!(o.add_triple(t).unwrap(), AddOutcome::AlreadyAdded);
        assert_eq!(o.len(), 1);
        assert_eq!(o.neighbors(a).unwrap(), vec![Edge::new(r, x)]);
        assert_eq!(o.neighbors(x).unwrap(), vec![Edge::new(g.inverse(r), a)]);
        assert!(g.neighbors(a).unwrap().is_empty());
    }

    #[test]
    fn overlay_flags_base_edges_as_redundant() {
        let g = chain();
        let r = g.relation_id("r").unwrap();
        let [a, b] = ["a", "b"].map(|n| g.entity_id(n).unwrap());
        let mut o = GraphOverlay::new(&g);
        assert_eq!(o.add_triple(Triple::new(a, r, b)).unwrap(), AddOutcome::Redundant);
        assert_eq!(
            o.add_triple(Triple::new(b, g.inverse(r), a)).unwrap(),
            AddOutcome::Redundant
        );
        assert!(o.is_empty());
    }

    #[test]
    fn overlays_are_isolated() {
        let g = chain();
        let r = g.relation_id("r").unwrap();
        let [a, c] = ["a", "c"].map(|n| g.entity_id(n).unwrap());
        let mut first = GraphOverlay::new(&g);
        let second = GraphOverlay::new(&g);
        first.add_triple(Triple::new(a, r, c)).unwrap();
        assert!(first.neighbors(a).unwrap().contains(&Edge::new(r, c)));
        assert!(!second.neighbors(a).unwrap().contains(&Edge::new(r, c)));
    }

    #[test]
    fn round_trip_text() {
        let text = "a\tr\tb\nb\ts\tc\nc\tr\ta\n";
        let g = KnowledgeGraph::load_triples(text).unwrap();
        assert_eq!(g.to_triple_text(), text);
    }
}

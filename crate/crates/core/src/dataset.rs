//! Queries, the extraction pool, and their on-disk text formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kg::{check_names, data_lines, EntityId, GraphBuilder, KnowledgeGraph, RelationId, Triple};

pub const GRAPH_FILE: &str = "graph.tsv";
pub const POOL_FILE: &str = "pool.tsv";
pub const QUERY_FILE: &str = "queries.tsv";

/// A structured query `(source, relation, ?)` with its gold answer set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub source: EntityId,
    pub relation: RelationId,
    /// Sorted, deduplicated.
    pub answers: Vec<EntityId>,
}

impl Query {
    pub fn new(source: EntityId, relation: RelationId, mut answers: Vec<EntityId>) -> Self {
        answers.sort_unstable();
        answers.dedup();
        Query {
            source,
            relation,
            answers,
        }
    }

    pub fn is_answer(&self, e: EntityId) -> bool {
        self.answers.binary_search(&e).is_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Genuine,
    Distractor,
    Unlabeled,
}

impl Provenance {
    fn label(self) -> Option<&'static str> {
        match self {
            Provenance::Genuine => Some("genuine"),
            Provenance::Distractor => Some("distractor"),
            Provenance::Unlabeled => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolTriple {
    pub triple: Triple,
    pub provenance: Provenance,
}

/// Pre-extracted candidate triples the extractor may inject.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractionPool {
    entries: Vec<PoolTriple>,
}

impl ExtractionPool {
    pub fn new(entries: Vec<PoolTriple>) -> Self {
        ExtractionPool { entries }
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        ExtractionPool {
            entries: triples
                .into_iter()
                .map(|triple| PoolTriple {
                    triple,
                    provenance: Provenance::Unlabeled,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PoolTriple> {
        self.entries.get(index)
    }

    pub fn entries(&self) -> &[PoolTriple] {
        &self.entries
    }

    pub fn genuine(&self) -> impl Iterator<Item = &Triple> {
        self.entries
            .iter()
            .filter(|p| p.provenance == Provenance::Genuine)
            .map(|p| &p.triple)
    }

    pub fn genuine_count(&self) -> usize {
        self.genuine().count()
    }
}

/// Graph, queries and pool sharing one vocabulary.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: KnowledgeGraph,
    pub queries: Vec<Query>,
    pub pool: ExtractionPool,
    id: String,
}

/// The three dataset files as text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetFiles {
    pub graph: String,
    pub pool: String,
    pub queries: String,
}

impl DatasetFiles {
    /// Hex SHA-256 over the three files, used as the dataset identity.
    pub fn content_id(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.graph, &self.pool, &self.queries] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            (GRAPH_FILE, &self.graph),
            (POOL_FILE, &self.pool),
            (QUERY_FILE, &self.queries),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn read_from(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        Ok(DatasetFiles {
            graph: read(GRAPH_FILE)?,
            pool: read(POOL_FILE)?,
            queries: read(QUERY_FILE)?,
        })
    }
}

impl Dataset {
    pub fn new(graph: KnowledgeGraph, queries: Vec<Query>, pool: ExtractionPool) -> Self {
        let mut ds = Dataset {
            graph,
            queries,
            pool,
            id: String::new(),
        };
        ds.id = ds.to_files().content_id();
        ds
    }

    /// Content hash of the serialized dataset.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Same graph and queries with a different pool.
    pub fn with_pool(&self, pool: ExtractionPool) -> Self {
        Dataset::new(self.graph.clone(), self.queries.clone(), pool)
    }

    pub fn parse(files: &DatasetFiles) -> Result<Self> {
        let mut builder = GraphBuilder::new();
        builder.add_text(&files.graph)?;
        let pool = parse_pool(&mut builder, &files.pool)?;
        let queries = parse_queries(&mut builder, &files.queries)?;
        Ok(Dataset::new(builder.build(), queries, pool))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Dataset::parse(&DatasetFiles::read_from(dir)?)
    }

    pub fn to_files(&self) -> DatasetFiles {
        let g = &self.graph;
        let mut pool = String::new();
        for p in self.pool.entries() {
            pool.push_str(&g.format_triple(&p.triple));
            if let Some(label) = p.provenance.label() {
                pool.push('\t');
                pool.push_str(label);
            }
            pool.push('\n');
        }
        let mut queries = String::new();
        for q in &self.queries {
            let answers: Vec<&str> = q.answers.iter().map(|&a| g.entity_name(a)).collect();
            let _ = writeln!(
                queries,
                "{}\t{}\t{}",
                g.entity_name(q.source),
                g.relation_name(q.relation),
                answers.join(",")
            );
        }
        DatasetFiles {
            graph: g.to_triple_text(),
            pool,
            queries,
        }
    }
}

fn parse_pool(builder: &mut GraphBuilder, text: &str) -> Result<ExtractionPool> {
    let mut entries = Vec::new();
    for (lineno, fields) in data_lines(text) {
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("pool line needs 3 or 4 fields, found {}", fields.len()),
            ));
        }
        check_names(lineno, &fields)?;
        let provenance = match fields.get(3).copied() {
            None => Provenance::Unlabeled,
            Some("genuine") => Provenance::Genuine,
            Some("distractor") => Provenance::Distractor,
            Some(other) => {
                return Err(Error::parse(
                    lineno,
                    format!("pool label must be genuine|distractor, got `{other}`"),
                ))
            }
        };
        let head = builder.intern_entity(fields[0]);
        let relation = builder
            .intern_relation(fields[1])
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        let tail = builder.intern_entity(fields[2]);
        entries.push(PoolTriple {
            triple: Triple::new(head, relation, tail),
            provenance,
        });
    }
    Ok(ExtractionPool::new(entries))
}

fn parse_queries(builder: &mut GraphBuilder, text: &str) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    for (lineno, fields) in data_lines(text) {
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("query line needs 3 fields, found {}", fields.len()),
            ));
        }
        check_names(lineno, &fields)?;
        let source = builder.intern_entity(fields[0]);
        let relation = builder
            .intern_relation(fields[1])
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        let answers = fields[2]
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|a| builder.intern_entity(a))
            .collect::<Vec<_>>();
        if answers.is_empty() {
            return Err(Error::parse(lineno, "query has no answers"));
        }
        queries.push(Query::new(source, relation, answers));
    }
    Ok(queries)
}

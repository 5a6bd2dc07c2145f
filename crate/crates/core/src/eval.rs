//! Query-answering metrics for a pair of policies.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::agents::{Agents, SelectMode};
use crate::dataset::Dataset;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kg::EntityId;
use crate::numfmt::fmt_f64;
use crate::train::{rollout, Pilot, PolicyPilot};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Greedy,
    Sample { samples: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub horizon: usize,
    pub k: usize,
    pub seed: u64,
    /// False evaluates the reasoner alone (extractor always abstains).
    pub extractor_enabled: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalMode::Greedy,
            horizon: crate::env::DEFAULT_HORIZON,
            k: 10,
            seed: 0,
            extractor_enabled: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub dataset_id: String,
    pub queries: usize,
    pub k: usize,
    pub hits_at_1: f64,
    pub hits_at_k: f64,
    pub mrr: f64,
    /// Fraction of rollouts ending on an answer.
    pub success_rate: f64,
    pub avg_hops: f64,
    pub adoption_rate: f64,
}

pub const METRICS_HEADER: &str = "dataset_id,queries,k,hits_at_1,hits_at_k,mrr,success_rate,avg_hops,adoption_rate";

impl Metrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset_id,
            self.queries,
            self.k,
            fmt_f64(self.hits_at_1),
            fmt_f64(self.hits_at_k),
            fmt_f64(self.mrr),
            fmt_f64(self.success_rate),
            fmt_f64(self.avg_hops),
            fmt_f64(self.adoption_rate)
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{METRICS_HEADER}\n{}\n", self.csv_row())
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "queries       {}", self.queries)?;
        writeln!(f, "hits@1        {:.4}", self.hits_at_1)?;
        writeln!(f, "hits@{:<8} {:.4}", self.k, self.hits_at_k)?;
        writeln!(f, "mrr           {:.4}", self.mrr)?;
        writeln!(f, "success rate  {:.4}", self.success_rate)?;
        writeln!(f, "avg hops      {:.4}", self.avg_hops)?;
        write!(f, "adoption rate {:.4}", self.adoption_rate)
    }
}

/// Per-query result: terminal entities in rank order.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub ranking: Vec<EntityId>,
    /// 1-based rank of the best-placed answer.
    pub answer_rank: Option<usize>,
    pub rollouts: usize,
    pub successes: usize,
    pub hops: usize,
    pub injected: usize,
    pub adopted: usize,
}

/// Evaluates with pilots built per query by `make_pilot(query_index)`.
pub fn evaluate_with<P, F>(dataset: &Dataset, config: &EvalConfig, make_pilot: F) -> Result<(Metrics, Vec<QueryResult>)>
where
    P: Pilot,
    F: Fn(usize) -> P + Sync,
{
    if dataset.queries.is_empty() {
        return Err(Error::Empty("dataset has no queries"));
    }
    if config.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let samples = match config.mode {
        EvalMode::Greedy => 1,
        EvalMode::Sample { samples: 0 } => return Err(Error::InvalidArgument("samples must be positive".into())),
        EvalMode::Sample { samples } => samples,
    };
    let results = (0..dataset.queries.len())
        .into_par_iter()
        .map(|qi| {
            let query = &dataset.queries[qi];
            let mut pilot = make_pilot(qi);
            // terminal -> (count, summed log-prob)
            let mut terminals: BTreeMap<EntityId, (usize, f64)> = BTreeMap::new();
            let mut r = QueryResult {
                ranking: Vec::new(),
                answer_rank: None,
                rollouts: samples,
                successes: 0,
                hops: 0,
                injected: 0,
                adopted: 0,
            };
            for _ in 0..samples {
                let t = rollout(&dataset.graph, &dataset.pool, query, config.horizon, &mut pilot)?;
                let e = terminals.entry(t.terminal).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += t.log_prob;
                r.successes += usize::from(t.success);
                r.hops += t.hops;
                r.injected += t.injected.len();
                r.adopted += t.adopted.len();
            }
            let mut ranked: Vec<(EntityId, usize, f64)> =
                terminals.into_iter().map(|(e, (c, lp))| (e, c, lp / c as f64)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
            r.ranking = ranked.into_iter().map(|(e, _, _)| e).collect();
            r.answer_rank = r.ranking.iter().position(|e| query.is_answer(*e)).map(|p| p + 1);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let nq = results.len() as f64;
    let rollouts: usize = results.iter().map(|r| r.rollouts).sum();
    let injected: usize = results.iter().map(|r| r.injected).sum();
    let metrics = Metrics {
        dataset_id: dataset.id().to_owned(),
        queries: results.len(),
        k: config.k,
        hits_at_1: results.iter().filter(|r| r.answer_rank == Some(1)).count() as f64 / nq,
        hits_at_k: results.iter().filter(|r| r.answer_rank.is_some_and(|x| x <= config.k)).count() as f64 / nq,
        mrr: results.iter().map(|r| r.answer_rank.map_or(0.0, |x| 1.0 / x as f64)).sum::<f64>() / nq,
        success_rate: results.iter().map(|r| r.successes).sum::<usize>() as f64 / rollouts as f64,
        avg_hops: results.iter().map(|r| r.hops).sum::<usize>() as f64 / rollouts as f64,
        adoption_rate: if injected == 0 {
            0.0
        } else {
            results.iter().map(|r| r.adopted).sum::<usize>() as f64 / injected as f64
        },
    };
    Ok((metrics, results))
}

pub fn evaluate(agents: &Agents, dataset: &Dataset, table: &EmbeddingTable, config: &EvalConfig) -> Result<Metrics> {
    table.check_compatible(&dataset.graph)?;
    let mode = match config.mode {
        EvalMode::Greedy => SelectMode::Greedy,
        EvalMode::Sample { .. } => SelectMode::Sample,
    };
    evaluate_with(dataset, config, |qi| {
        let rng = crate::seed::rng(config.seed, &format!("eval/query/{qi}"));
        let p = PolicyPilot::new(agents, table, mode, rng);
        if config.extractor_enabled {
            p
        } else {
            p.reasoner_only()
        }
    })
    .map(|(m, _)| m)
}

/// Field-wise `a − b`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsDelta {
    pub dataset_id: String,
    pub hits_at_1: f64,
    pub hits_at_k: f64,
    pub mrr: f64,
    pub success_rate: f64,
    pub avg_hops: f64,
    pub adoption_rate: f64,
}

impl MetricsDelta {
    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("hits_at_1", self.hits_at_1),
            ("hits_at_k", self.hits_at_k),
            ("mrr", self.mrr),
            ("success_rate", self.success_rate),
            ("avg_hops", self.avg_hops),
            ("adoption_rate", self.adoption_rate),
        ]
    }
}

impl fmt::Display for MetricsDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.fields().iter().map(|(n, v)| format!("{n:<14}{v:+.4}")).collect();
        f.write_str(&lines.join("\n"))
    }
}

pub fn compare(a: &Metrics, b: &Metrics) -> Result<MetricsDelta> {
    if a.dataset_id != b.dataset_id {
        return Err(Error::DatasetMismatch(a.dataset_id.clone(), b.dataset_id.clone()));
    }
    Ok(MetricsDelta {
        dataset_id: a.dataset_id.clone(),
        hits_at_1: a.hits_at_1 - b.hits_at_1,
        hits_at_k: a.hits_at_k - b.hits_at_k,
        mrr: a.mrr - b.mrr,
        success_rate: a.success_rate - b.success_rate,
        avg_hops: a.avg_hops - b.avg_hops,
        adoption_rate: a.adoption_rate - b.adoption_rate,
    })
}

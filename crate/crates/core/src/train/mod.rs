//! Policy-gradient training of the two agents.

mod drift;
mod minimax;
mod reinforce;
mod rollout;

pub use drift::{VisitState, VisitTable};
pub use minimax::{bounds, fictitious_play, solve_minimax, MinimaxSolution, SolveMethod, TOLERANCE};
pub use reinforce::{
    reinforce_gradient, reinforce_update, step_distribution, surrogate_objective, Optimizer, OptimizerKind,
    PolicyContext,
};
pub use rollout::{rollout, Control, Pilot, PolicyPilot};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::{Agents, SelectMode};
use crate::dataset::Dataset;
use crate::embed::EmbeddingTable;
use crate::env::{ReasonerAction, Trajectory};
use crate::error::{Error, Result};
use crate::numfmt::fmt_f64;
use crate::reward::{compute_rewards, RewardPair, RewardScheme, Scheme};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub episodes_per_batch: usize,
    pub batches: usize,
    pub reasoner_lr: f64,
    pub extractor_lr: f64,
    pub entropy_weight: f64,
    pub baseline_decay: f64,
    pub reward: RewardScheme,
    pub horizon: usize,
    pub seed: u64,
    pub drift_window: usize,
    pub drift_bonus: f64,
    pub optimizer: OptimizerKind,
    /// False trains the reasoner alone; the extractor always abstains.
    pub extractor_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes_per_batch: 32,
            batches: 300,
            reasoner_lr: 0.01,
            extractor_lr: 0.01,
            entropy_weight: 0.01,
            baseline_decay: 0.9,
            reward: RewardScheme::new(Scheme::Coop),
            horizon: crate::env::DEFAULT_HORIZON,
            seed: 0,
            drift_window: 10,
            drift_bonus: 0.0,
            optimizer: OptimizerKind::Adam,
            extractor_enabled: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.episodes_per_batch == 0 {
            return bad("episodes per batch must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.drift_window == 0 {
            return bad("drift window must be at least 1");
        }
        for (name, v) in [
            ("reasoner learning rate", self.reasoner_lr),
            ("extractor learning rate", self.extractor_lr),
            ("entropy weight", self.entropy_weight),
            ("drift bonus", self.drift_bonus),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline decay must be in [0, 1)");
        }
        self.reward.validate()
    }

    /// Whether the drift bonus is added to the reasoner's return.
    pub fn drift_applies(&self) -> bool {
        self.drift_bonus > 0.0 && self.reward.scheme != Scheme::Game
    }
}

pub const METRICS_HEADER: &str =
    "batch,success_rate,avg_return_reasoner,avg_return_extractor,adoption_rate,avg_hops,rejected_proposals";

#[derive(Clone, Debug, PartialEq)]
pub struct BatchMetrics {
    pub batch: usize,
    pub success_rate: f64,
    /// Scheme return, without drift bonus.
    pub avg_return_reasoner: f64,
    pub avg_return_extractor: f64,
    /// Adopted injections over all injections; 0 when nothing was injected.
    pub adoption_rate: f64,
    pub avg_hops: f64,
    /// Mean rejected proposals per episode; only reported under `Game`.
    pub rejected_proposals: Option<f64>,
}

impl BatchMetrics {
    pub fn summarize(batch: usize, episodes: &[(Trajectory, RewardPair)], scheme: Scheme) -> Self {
        let n = episodes.len().max(1) as f64;
        let mean = |f: &dyn Fn(&(Trajectory, RewardPair)) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        let injected: usize = episodes.iter().map(|(t, _)| t.injected.len()).sum();
        let adopted: usize = episodes.iter().map(|(t, _)| t.adopted.len()).sum();
        BatchMetrics {
            batch,
            success_rate: mean(&|(t, _)| f64::from(u8::from(t.success))),
            avg_return_reasoner: mean(&|(_, r)| r.reasoner),
            avg_return_extractor: mean(&|(_, r)| r.extractor),
            adoption_rate: if injected == 0 { 0.0 } else { adopted as f64 / injected as f64 },
            avg_hops: mean(&|(t, _)| t.hops as f64),
            rejected_proposals: (scheme == Scheme::Game).then(|| mean(&|(t, _)| t.rejected() as f64)),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.batch,
            fmt_f64(self.success_rate),
            fmt_f64(self.avg_return_reasoner),
            fmt_f64(self.avg_return_extractor),
            fmt_f64(self.adoption_rate),
            fmt_f64(self.avg_hops),
            self.rejected_proposals.map(fmt_f64).unwrap_or_default()
        )
    }

    fn is_finite(&self) -> bool {
        [
            self.success_rate,
            self.avg_return_reasoner,
            self.avg_return_extractor,
            self.adoption_rate,
            self.avg_hops,
            self.rejected_proposals.unwrap_or(0.0),
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn metrics_csv(log: &[BatchMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in log {
        out.push_str(&m.csv_row());
        out.push('\n');
    }
    out
}

/// Batch-by-batch trainer. The dataset can be swapped between batches.
#[derive(Clone)]
pub struct Trainer<'a> {
    config: TrainConfig,
    dataset: &'a Dataset,
    table: &'a EmbeddingTable,
    agents: Agents,
    baselines: [f64; 2],
    optimizers: [Optimizer; 2],
    visits: VisitTable,
    batch: usize,
    log: Vec<BatchMetrics>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, dataset: &'a Dataset, table: &'a EmbeddingTable, agents: Agents) -> Result<Self> {
        config.validate()?;
        if dataset.queries.is_empty() {
            return Err(Error::Empty("dataset has no queries"));
        }
        table.check_compatible(&dataset.graph)?;
        if agents.reasoner.dim() != table.dim() || agents.extractor.dim() != table.dim() {
            return Err(Error::InvalidArgument(format!(
                "policy dimension {} does not match embedding dimension {}",
                agents.reasoner.dim(),
                table.dim()
            )));
        }
        let optimizers = [
            Optimizer::new(config.optimizer, config.reasoner_lr, agents.reasoner.len()),
            Optimizer::new(config.optimizer, config.extractor_lr, agents.extractor.len()),
        ];
        Ok(Trainer {
            config,
            dataset,
            table,
            agents,
            baselines: [0.0; 2],
            optimizers,
            visits: VisitTable::new(),
            batch: 0,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn agents(&self) -> &Agents {
        &self.agents
    }

    pub fn log(&self) -> &[BatchMetrics] {
        &self.log
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn visits(&self) -> &VisitTable {
        &self.visits
    }

    /// Replaces the dataset (typically the same graph with a new pool).
    pub fn set_dataset(&mut self, dataset: &'a Dataset) -> Result<()> {
        if dataset.queries.is_empty() {
            return Err(Error::Empty("dataset has no queries"));
        }
        self.table.check_compatible(&dataset.graph)?;
        self.dataset = dataset;
        Ok(())
    }

    /// Changes the drift bonus from the next batch on. Visit history is kept.
    pub fn set_drift(&mut self, bonus: f64, window: usize) -> Result<()> {
        let mut c = self.config.clone();
        c.drift_bonus = bonus;
        c.drift_window = window;
        c.validate()?;
        self.config = c;
        Ok(())
    }

    fn sample_batch(&self) -> Result<Vec<Trajectory>> {
        let mut rng = crate::seed::rng(self.config.seed, &format!("train/batch/{}", self.batch));
        let jobs: Vec<(usize, u64)> = (0..self.config.episodes_per_batch)
            .map(|_| (rng.gen_range(0..self.dataset.queries.len()), rng.gen()))
            .collect();
        let ds = self.dataset;
        jobs.par_iter()
            .map(|&(q, s)| {
                let mut pilot = PolicyPilot::new(&self.agents, self.table, SelectMode::Sample, ChaCha8Rng::seed_from_u64(s));
                if !self.config.extractor_enabled {
                    pilot = pilot.reasoner_only();
                }
                rollout(&ds.graph, &ds.pool, &ds.queries[q], self.config.horizon, &mut pilot)
            })
            .collect()
    }

    /// Runs one batch of rollouts and updates both agents.
    pub fn step(&mut self) -> Result<BatchMetrics> {
        let trajectories = self.sample_batch()?;
        let mut episodes = Vec::with_capacity(trajectories.len());
        let mut returns = Vec::with_capacity(trajectories.len());
        for t in trajectories {
            let r = compute_rewards(&t, &self.config.reward, self.table)?;
            let mut bonus = 0.0;
            for rec in &t.steps {
                if let ReasonerAction::Hop(e) = rec.reasoner_action() {
                    let b = self.visits.drift_bonus(
                        (e.tail, t.query.relation),
                        self.batch,
                        self.config.drift_window,
                        self.config.drift_bonus,
                    );
                    if self.config.drift_applies() {
                        bonus += b;
                    }
                }
            }
            returns.push(RewardPair {
                reasoner: r.reasoner + bonus,
                extractor: r.extractor,
            });
            episodes.push((t, r));
        }
        let metrics = BatchMetrics::summarize(self.batch, &episodes, self.config.reward.scheme);
        if !metrics.is_finite() {
            return Err(Error::NonFinite("batch metrics"));
        }

        let ctx = PolicyContext {
            graph: &self.dataset.graph,
            pool: &self.dataset.pool,
            table: self.table,
        };
        let beta = self.config.entropy_weight;
        let rb: Vec<(&Trajectory, f64)> = episodes.iter().zip(&returns).map(|((t, _), r)| (t, r.reasoner)).collect();
        let (_, g_r) = reinforce_gradient(&self.agents.reasoner, ctx, &rb, self.baselines[0], beta)?;
        let g_e = if self.config.extractor_enabled {
            let eb: Vec<(&Trajectory, f64)> =
                episodes.iter().zip(&returns).map(|((t, _), r)| (t, r.extractor)).collect();
            Some(reinforce_gradient(&self.agents.extractor, ctx, &eb, self.baselines[1], beta)?.1)
        } else {
            None
        };
        // both agents move simultaneously from the same batch
        let mut reasoner = self.agents.reasoner.values.clone();
        self.optimizers[0].apply(&mut reasoner, &g_r)?;
        let mut extractor = self.agents.extractor.values.clone();
        if let Some(g) = &g_e {
            self.optimizers[1].apply(&mut extractor, g)?;
        }
        self.agents.reasoner.values = reasoner;
        self.agents.extractor.values = extractor;

        let n = returns.len() as f64;
        let d = self.config.baseline_decay;
        let mean_r = returns.iter().map(|r| r.reasoner).sum::<f64>() / n;
        let mean_e = returns.iter().map(|r| r.extractor).sum::<f64>() / n;
        self.baselines[0] = d * self.baselines[0] + (1.0 - d) * mean_r;
        self.baselines[1] = d * self.baselines[1] + (1.0 - d) * mean_e;

        self.batch += 1;
        self.log.push(metrics.clone());
        Ok(metrics)
    }

    pub fn run(&mut self, batches: usize) -> Result<()> {
        for _ in 0..batches {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> (Agents, Vec<BatchMetrics>) {
        (self.agents, self.log)
    }
}

/// Trains for `config.batches` batches starting from `agents`.
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
    table: &EmbeddingTable,
    agents: Agents,
) -> Result<(Agents, Vec<BatchMetrics>)> {
    let mut t = Trainer::new(config.clone(), dataset, table, agents)?;
    t.run(config.batches)?;
    Ok(t.finish())
}

/// First index `end` (counted in batches) at which the trailing mean of
/// `rates[end - smooth..end]` reaches `target`.
pub fn recovery_batch(rates: &[f64], smooth: usize, target: f64) -> Option<usize> {
    let smooth = smooth.max(1);
    (smooth..=rates.len()).find(|&end| rates[end - smooth..end].iter().sum::<f64>() / smooth as f64 >= target)
}

/// Empirical zero-sum view of the `Game` scheme: rows are reasoner
/// controls, columns extractor controls, and each entry is the mean of
/// `reasoner return − extractor return` over `episodes` rollouts per query.
#[derive(Clone, Debug)]
pub struct PayoffMatrix {
    pub rows: Vec<(&'static str, Control)>,
    pub cols: Vec<(&'static str, Control)>,
    pub values: Vec<Vec<f64>>,
}

pub fn game_payoff_matrix(
    agents: &Agents,
    dataset: &Dataset,
    table: &EmbeddingTable,
    reward: &RewardScheme,
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<PayoffMatrix> {
    if dataset.queries.is_empty() {
        return Err(Error::Empty("dataset has no queries"));
    }
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be positive".into()));
    }
    let rows = vec![
        ("greedy", Control::Policy(SelectMode::Greedy)),
        ("sample", Control::Policy(SelectMode::Sample)),
        ("uniform", Control::Uniform),
    ];
    let cols = vec![
        ("greedy", Control::Policy(SelectMode::Greedy)),
        ("sample", Control::Policy(SelectMode::Sample)),
        ("uniform", Control::Uniform),
        ("abstain", Control::Disabled),
    ];
    let mut values = vec![vec![0.0; cols.len()]; rows.len()];
    for (i, (rn, rc)) in rows.iter().enumerate() {
        for (j, (cn, cc)) in cols.iter().enumerate() {
            let mut pilot = PolicyPilot {
                agents,
                table,
                reasoner: *rc,
                extractor: *cc,
                rng: crate::seed::rng(seed, &format!("payoff/{rn}/{cn}")),
            };
            let mut total = 0.0;
            for q in &dataset.queries {
                for _ in 0..episodes {
                    let t = rollout(&dataset.graph, &dataset.pool, q, horizon, &mut pilot)?;
                    let r = compute_rewards(&t, reward, table)?;
                    total += r.reasoner - r.extractor;
                }
            }
            values[i][j] = total / (dataset.queries.len() * episodes) as f64;
        }
    }
    Ok(PayoffMatrix { rows, cols, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GenSpec};

    fn setup() -> (Dataset, EmbeddingTable) {
        let g = generate(&GenSpec {
            entities: 40,
            relations: 4,
            query_relations: 1,
            queries: 4,
            ..GenSpec::default()
        })
        .unwrap();
        let table = EmbeddingTable::initialize(&g.dataset.graph, 4, 1).unwrap();
        (g.dataset, table)
    }

    #[test]
    fn zero_batches_returns_initial_agents() {
        let (ds, table) = setup();
        let agents = Agents::random(4, 1, 2);
        let cfg = TrainConfig {
            batches: 0,
            ..TrainConfig::default()
        };
        let (out, log) = train(&cfg, &ds, &table, agents.clone()).unwrap();
        assert_eq!(out, agents);
        assert!(log.is_empty());
    }

    #[test]
    fn deterministic_logs() {
        let (ds, table) = setup();
        let cfg = TrainConfig {
            batches: 5,
            episodes_per_batch: 8,
            drift_bonus: 0.2,
            ..TrainConfig::default()
        };
        let a = train(&cfg, &ds, &table, Agents::random(4, 1, 2)).unwrap();
        let b = train(&cfg, &ds, &table, Agents::random(4, 1, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(metrics_csv(&a.1).lines().count(), 6);
    }

    #[test]
    fn zero_learning_rates_freeze_greedy_behaviour() {
        let (ds, table) = setup();
        let cfg = TrainConfig {
            batches: 3,
            episodes_per_batch: 4,
            reasoner_lr: 0.0,
            extractor_lr: 0.0,
            ..TrainConfig::default()
        };
        let agents = Agents::random(4, 1, 2);
        let (out, _) = train(&cfg, &ds, &table, agents.clone()).unwrap();
        assert_eq!(out, agents);
    }

    #[test]
    fn game_reports_rejections_only_under_game() {
        let (ds, table) = setup();
        let mut cfg = TrainConfig {
            batches: 1,
            episodes_per_batch: 4,
            ..TrainConfig::default()
        };
        let (_, log) = train(&cfg, &ds, &table, Agents::random(4, 1, 2)).unwrap();
        assert!(log[0].rejected_proposals.is_none());
        assert!(log[0].csv_row().ends_with(','));
        cfg.reward = RewardScheme::game(0.1, 0.2).unwrap();
        let (_, log) = train(&cfg, &ds, &table, Agents::random(4, 1, 2)).unwrap();
        assert!(log[0].rejected_proposals.is_some());
    }

    #[test]
    fn invalid_configs() {
        let (ds, table) = setup();
        for cfg in [
            TrainConfig { episodes_per_batch: 0, ..TrainConfig::default() },
            TrainConfig { drift_window: 0, ..TrainConfig::default() },
            TrainConfig { baseline_decay: 1.0, ..TrainConfig::default() },
            TrainConfig { reasoner_lr: f64::NAN, ..TrainConfig::default() },
        ] {
            assert!(train(&cfg, &ds, &table, Agents::random(4, 1, 2)).is_err());
        }
        assert!(train(&TrainConfig::default(), &ds, &table, Agents::random(3, 1, 2)).is_err());
    }

    #[test]
    fn recovery_uses_trailing_mean() {
        let rates = [0.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(recovery_batch(&rates, 1, 1.0), Some(2));
        assert_eq!(recovery_batch(&rates, 2, 1.0), Some(5));
        assert_eq!(recovery_batch(&rates, 3, 0.9), None);
        assert_eq!(recovery_batch(&[], 3, 0.0), None);
    }

    #[test]
    fn payoff_matrix_shape_and_solution() {
        let (ds, table) = setup();
        let m = game_payoff_matrix(
            &Agents::random(4, 1, 2),
            &ds,
            &table,
            &RewardScheme::game(0.1, 0.2).unwrap(),
            3,
            2,
            0,
        )
        .unwrap();
        assert_eq!((m.values.len(), m.values[0].len()), (3, 4));
        let s = solve_minimax(&m.values).unwrap();
        assert!(s.violation(&m.values) < 1e-6);
    }
}

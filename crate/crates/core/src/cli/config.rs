//! Run configuration: a line-oriented `section.key = value` file.
//!
//! ```text
//! # comment
//! run.seed = 7
//! run.dataset = data
//! gen.path_len = 6
//! train.scheme = COOP
//! ```
//!
//! Relative paths are resolved against the config file's directory.
//! Everything except `run.seed` has a default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::embed::EmbedConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, EvalMode};
use crate::reward::{RewardScheme, Scheme};
use crate::seed::derive;
use crate::synth::GenSpec;
use crate::train::{OptimizerKind, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// As written in the file, for the manifest.
    pub dataset: String,
    pub output: String,
    pub base_dir: PathBuf,
    pub gen: GenSpec,
    pub embed: EmbedConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Rollouts per query in sample mode; kept even when greedy so the echo round-trips.
    pub eval_samples: usize,
    pub report_episodes: usize,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}`: {e}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `section.key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !k.contains('.') {
                return Err(Error::Config(format!("line {}: key `{k}` has no section", i + 1)));
            }
            if entries.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }

        let mut c = RunConfig {
            seed: 0,
            dataset: "data".into(),
            output: "out".into(),
            base_dir: base_dir.to_path_buf(),
            gen: GenSpec::default(),
            embed: EmbedConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            eval_samples: 20,
            report_episodes: 20,
        };
        let mut seed = None;
        let mut eval_mode = "greedy".to_owned();
        let mut eval_horizon = None;
        let mut scheme = Scheme::Coop;
        let mut hop_cost = RewardScheme::new(Scheme::Game).hop_cost;
        let mut rejection_cost = RewardScheme::new(Scheme::Game).rejection_cost;
        for (k, v) in &entries {
            let k = k.as_str();
            let v = v.as_str();
            match k {
                "run.seed" => seed = Some(parse(k, v)?),
                "run.dataset" => c.dataset = v.to_owned(),
                "run.output" => c.output = v.to_owned(),
                "gen.entities" => c.gen.entities = parse(k, v)?,
                "gen.relations" => c.gen.relations = parse(k, v)?,
                "gen.query_relations" => c.gen.query_relations = parse(k, v)?,
                "gen.branching" => c.gen.branching = parse(k, v)?,
                "gen.path_len" => c.gen.path_len = parse(k, v)?,
                "gen.queries" => c.gen.queries = parse(k, v)?,
                "gen.ablation" => c.gen.ablation = parse(k, v)?,
                "gen.distractor_ratio" => c.gen.distractor_ratio = parse(k, v)?,
                "gen.guard_hops" => c.gen.guard_hops = parse(k, v)?,
                "embed.dim" => c.embed.dim = parse(k, v)?,
                "embed.epochs" => c.embed.epochs = parse(k, v)?,
                "embed.learning_rate" => c.embed.learning_rate = parse(k, v)?,
                "embed.negatives" => c.embed.negatives = parse(k, v)?,
                "embed.margin" => c.embed.margin = parse(k, v)?,
                "train.episodes_per_batch" => c.train.episodes_per_batch = parse(k, v)?,
                "train.batches" => c.train.batches = parse(k, v)?,
                "train.reasoner_lr" => c.train.reasoner_lr = parse(k, v)?,
                "train.extractor_lr" => c.train.extractor_lr = parse(k, v)?,
                "train.entropy_weight" => c.train.entropy_weight = parse(k, v)?,
                "train.baseline_decay" => c.train.baseline_decay = parse(k, v)?,
                "train.scheme" => scheme = parse(k, v)?,
                "train.hop_cost" => hop_cost = parse(k, v)?,
                "train.rejection_cost" => rejection_cost = parse(k, v)?,
                "train.horizon" => c.train.horizon = parse(k, v)?,
                "train.drift_window" => c.train.drift_window = parse(k, v)?,
                "train.drift_bonus" => c.train.drift_bonus = parse(k, v)?,
                "train.optimizer" => c.train.optimizer = parse::<OptimizerKind>(k, v)?,
                "train.extractor" => c.train.extractor_enabled = parse(k, v)?,
                "eval.mode" => eval_mode = v.to_ascii_lowercase(),
                "eval.samples" => c.eval_samples = parse(k, v)?,
                "eval.k" => c.eval.k = parse(k, v)?,
                "eval.horizon" => eval_horizon = Some(parse(k, v)?),
                "report.episodes" => c.report_episodes = parse(k, v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        c.seed = seed.ok_or_else(|| Error::Config("run.seed is required".into()))?;
        c.train.reward = RewardScheme {
            scheme,
            hop_cost,
            rejection_cost,
        };
        c.eval.mode = match eval_mode.as_str() {
            "greedy" => EvalMode::Greedy,
            "sample" => EvalMode::Sample { samples: c.eval_samples },
            other => return Err(Error::Config(format!("eval.mode: unknown mode `{other}` (greedy|sample)"))),
        };
        c.eval.horizon = eval_horizon.unwrap_or(c.train.horizon);
        c.gen.seed = derive(c.seed, "generate");
        c.embed.seed = derive(c.seed, "embed");
        c.train.seed = derive(c.seed, "train");
        c.eval.seed = derive(c.seed, "eval");
        c.gen.validate().map_err(|e| Error::Config(e.to_string()))?;
        c.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if c.embed.dim == 0 {
            return Err(Error::Config("embed.dim must be positive".into()));
        }
        if c.eval.k == 0 || c.report_episodes == 0 || c.eval_samples == 0 {
            return Err(Error::Config("eval.k, eval.samples and report.episodes must be positive".into()));
        }
        Ok(c)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.base_dir.join(&self.dataset)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }

    pub fn agent_seeds(&self) -> (u64, u64) {
        (derive(self.seed, "agents/reasoner"), derive(self.seed, "agents/extractor"))
    }

    /// Effective configuration, one `key = value` per line, sorted by key.
    pub fn echo(&self) -> Vec<String> {
        let g = &self.gen;
        let e = &self.embed;
        let t = &self.train;
        let mode = match self.eval.mode {
            EvalMode::Greedy => "greedy",
            EvalMode::Sample { .. } => "sample",
        };
        let mut lines: Vec<(String, String)> = vec![
            ("run.seed".into(), self.seed.to_string()),
            ("run.dataset".into(), self.dataset.clone()),
            ("run.output".into(), self.output.clone()),
            ("gen.entities".into(), g.entities.to_string()),
            ("gen.relations".into(), g.relations.to_string()),
            ("gen.query_relations".into(), g.query_relations.to_string()),
            ("gen.branching".into(), g.branching.to_string()),
            ("gen.path_len".into(), g.path_len.to_string()),
            ("gen.queries".into(), g.queries.to_string()),
            ("gen.ablation".into(), g.ablation.to_string()),
            ("gen.distractor_ratio".into(), g.distractor_ratio.to_string()),
            ("gen.guard_hops".into(), g.guard_hops.to_string()),
            ("embed.dim".into(), e.dim.to_string()),
            ("embed.epochs".into(), e.epochs.to_string()),
            ("embed.learning_rate".into(), e.learning_rate.to_string()),
            ("embed.negatives".into(), e.negatives.to_string()),
            ("embed.margin".into(), e.margin.to_string()),
            ("train.episodes_per_batch".into(), t.episodes_per_batch.to_string()),
            ("train.batches".into(), t.batches.to_string()),
            ("train.reasoner_lr".into(), t.reasoner_lr.to_string()),
            ("train.extractor_lr".into(), t.extractor_lr.to_string()),
            ("train.entropy_weight".into(), t.entropy_weight.to_string()),
            ("train.baseline_decay".into(), t.baseline_decay.to_string()),
            ("train.scheme".into(), t.reward.scheme.to_string()),
            ("train.hop_cost".into(), t.reward.hop_cost.to_string()),
            ("train.rejection_cost".into(), t.reward.rejection_cost.to_string()),
            ("train.horizon".into(), t.horizon.to_string()),
            ("train.drift_window".into(), t.drift_window.to_string()),
            ("train.drift_bonus".into(), t.drift_bonus.to_string()),
            ("train.optimizer".into(), t.optimizer.to_string()),
            ("train.extractor".into(), t.extractor_enabled.to_string()),
            ("eval.mode".into(), mode.into()),
            ("eval.samples".into(), self.eval_samples.to_string()),
            ("eval.k".into(), self.eval.k.to_string()),
            ("eval.horizon".into(), self.eval.horizon.to_string()),
            ("report.episodes".into(), self.report_episodes.to_string()),
        ];
        lines.sort();
        lines.into_iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

//! Run configuration: a JSON document with the blocks `instance`, `choice`,
//! `dynamics`, `sweep`, `training` and `output`.

use std::fmt;
use std::path::{Path, PathBuf};

use modelmarket::entry::{toy_market, Dataset, OpponentPool, RewardTable, ToyGenerator, TrainingConfig};
use modelmarket::environments::{builtin_fixture, load_fixture, ChoiceConfig, Fixture, InstanceSource};
use modelmarket::equilibrium::MoverOrder;
use modelmarket::{GameSpec, ScoreMatrix, StrategyProfile, UserPopulation};
use serde::Deserialize;

pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// A configuration problem, anchored to a line of the file when one applies.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub instance: Option<InstanceBlock>,
    pub choice: Option<ChoiceConfig>,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    pub sweep: Option<SweepBlock>,
    pub training: Option<TrainingBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Exactly one of `builtin`, `file` or `inline`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceBlock {
    pub builtin: Option<String>,
    pub file: Option<PathBuf>,
    pub inline: Option<InstanceSource>,
    /// Required for `inline`; overrides the fixture's count otherwise.
    pub n_platforms: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OrderConfig {
    Named(String),
    /// One-based platform numbers, repeated.
    Fixed(Vec<usize>),
}

impl Default for OrderConfig {
    fn default() -> Self {
        OrderConfig::Named("round_robin".into())
    }
}

impl OrderConfig {
    pub fn describe(&self) -> String {
        match self {
            OrderConfig::Named(n) => n.clone(),
            OrderConfig::Fixed(list) => list.iter().map(usize::to_string).collect::<Vec<_>>().join("|"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    #[serde(default)]
    pub order: OrderConfig,
    /// Model labels, one per platform. Drawn from the seed when absent.
    pub start: Option<Vec<String>>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        Self {
            order: OrderConfig::default(),
            start: None,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Models,
    Platforms,
    Population,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Models => "models",
            SweepAxis::Platforms => "platforms",
            SweepAxis::Population => "population",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// One seed per repetition; defaults to `seed + r`.
    pub seeds: Option<Vec<u64>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Resampling,
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Resampling => "resampling",
            Method::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MarketConfig {
    Builtin(String),
    Inline(Box<InlineMarket>),
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig::Builtin("toy".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineMarket {
    pub outcome_labels: Option<Vec<String>>,
    pub type_labels: Vec<String>,
    pub weights: Vec<f64>,
    /// One row per type, one entry per outcome.
    pub rewards: Vec<Vec<f64>>,
    pub incumbents: IncumbentBlock,
    pub dataset: DatasetBlock,
    pub n_platforms: usize,
    #[serde(default)]
    pub target_type: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncumbentBlock {
    pub labels: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetBlock {
    pub counts: Vec<f64>,
    pub attributes: Vec<usize>,
    pub attribute_prefs: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBlock {
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default = "both_methods")]
    pub methods: Vec<Method>,
    /// Defaults to the market's recommended settings.
    pub settings: Option<TrainingConfig>,
}

fn both_methods() -> Vec<Method> {
    vec![Method::Resampling, Method::Direct]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub prefix: String,
}

/// Everything an entry job trains against.
pub struct EntryMarket {
    pub name: String,
    pub rewards: RewardTable,
    pub population: UserPopulation<f64>,
    pub pool: OpponentPool,
    pub dataset: Dataset,
    pub base: ToyGenerator,
    pub n_platforms: usize,
    pub target_type: usize,
    pub settings: TrainingConfig,
}

/// A loaded configuration with the source text kept for error anchoring.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: String,
    text: String,
    base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: display.clone(),
            line: None,
            message: e.to_string(),
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(display, text, base_dir)
    }

    pub fn from_text(path: String, text: String, base_dir: PathBuf) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError {
            path: path.clone(),
            line: Some(e.line()),
            message: strip_position(&e.to_string()),
        })?;
        let loaded = Self {
            config,
            path,
            text,
            base_dir,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    /// An empty configuration, used when only flags are given.
    pub fn empty() -> Self {
        Self {
            config: RunConfig::default(),
            path: "<flags>".into(),
            text: String::new(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let needle = format!("\"{key}\"");
        let line = self
            .text
            .lines()
            .position(|l| l.contains(&needle))
            .map(|i| i + 1);
        ConfigError {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        if c.dynamics.max_steps == 0 {
            return Err(self.error("max_steps", "dynamics.max_steps must be at least 1"));
        }
        if let OrderConfig::Named(name) = &c.dynamics.order {
            if name != "round_robin" {
                return Err(self.error("order", format!("unknown mover order `{name}`; use \"round_robin\" or a platform list")));
            }
        }
        if let Some(inst) = &c.instance {
            let sources = [inst.builtin.is_some(), inst.file.is_some(), inst.inline.is_some()];
            if sources.iter().filter(|s| **s).count() != 1 {
                return Err(self.error("instance", "instance needs exactly one of builtin, file or inline"));
            }
            if inst.inline.is_some() && inst.n_platforms.is_none() {
                return Err(self.error("inline", "an inline instance needs n_platforms"));
            }
            if inst.n_platforms == Some(0) {
                return Err(self.error("n_platforms", "n_platforms must be at least 1"));
            }
        }
        if let Some(sweep) = &c.sweep {
            if sweep.repetitions == 0 {
                return Err(self.error("repetitions", "sweep.repetitions must be at least 1"));
            }
            if sweep.values.is_empty() {
                return Err(self.error("values", "sweep.values is empty"));
            }
            if let Some(seeds) = &sweep.seeds {
                if seeds.len() != sweep.repetitions {
                    return Err(self.error(
                        "seeds",
                        format!("{} seeds for {} repetitions", seeds.len(), sweep.repetitions),
                    ));
                }
            }
            for v in &sweep.values {
                let ok = match (sweep.axis, v) {
                    (SweepAxis::Models | SweepAxis::Platforms, SweepValue::Number(x)) => {
                        *x >= 1.0 && x.fract() == 0.0
                    }
                    (SweepAxis::Population, SweepValue::Number(x)) => x.is_finite(),
                    (SweepAxis::Population, SweepValue::Weights(w)) => {
                        !w.is_empty() && w.iter().all(|x| *x >= 0.0) && w.iter().sum::<f64>() > 0.0
                    }
                    _ => false,
                };
                if !ok {
                    return Err(self.error(
                        "values",
                        format!("sweep value {v:?} is not valid on the {} axis", sweep.axis.name()),
                    ));
                }
            }
        }
        if let Some(training) = &c.training {
            if training.methods.is_empty() {
                return Err(self.error("methods", "training.methods is empty"));
            }
            if let Some(settings) = &training.settings {
                settings
                    .validate()
                    .map_err(|e| self.error("settings", e.to_string()))?;
            }
            if let MarketConfig::Builtin(name) = &training.market {
                if name != "toy" {
                    return Err(self.error("market", format!("unknown market `{name}`; the builtin market is \"toy\"")));
                }
            }
        }
        Ok(())
    }

    /// The configured instance as a fixture with overrides applied.
    pub fn fixture(&self) -> Result<Fixture, ConfigError> {
        let inst = self
            .config
            .instance
            .as_ref()
            .ok_or_else(|| self.error("instance", "this command needs an instance block"))?;
        let mut fixture = if let Some(name) = &inst.builtin {
            builtin_fixture(name).map_err(|e| self.error("builtin", e.to_string()))?
        } else if let Some(file) = &inst.file {
            let path = if file.is_absolute() { file.clone() } else { self.base_dir.join(file) };
            load_fixture(&path).map_err(|e| self.error("file", e.to_string()))?
        } else {
            let source = inst.inline.clone().expect("validated");
            Fixture {
                name: "inline".into(),
                description: String::new(),
                notes: Vec::new(),
                n_platforms: inst.n_platforms.unwrap_or(1),
                choice: ChoiceConfig::default(),
                instance: source,
                checks: Vec::new(),
            }
        };
        if let Some(n) = inst.n_platforms {
            fixture.n_platforms = n;
        }
        if let Some(choice) = &self.config.choice {
            fixture.choice = choice.clone();
        }
        fixture
            .spec::<f64>()
            .map_err(|e| self.error("instance", e.to_string()))?;
        Ok(fixture)
    }

    pub fn spec(&self, fixture: &Fixture) -> Result<GameSpec<f64>, ConfigError> {
        fixture
            .spec()
            .map_err(|e| self.error("instance", e.to_string()))
    }

    pub fn mover_order(&self, n_platforms: usize) -> Result<MoverOrder, ConfigError> {
        match &self.config.dynamics.order {
            OrderConfig::Named(_) => Ok(MoverOrder::RoundRobin),
            OrderConfig::Fixed(list) => {
                if list.iter().any(|&i| i == 0 || i > n_platforms) {
                    return Err(self.error("order", format!("mover order names a platform outside 1..={n_platforms}")));
                }
                Ok(MoverOrder::Fixed(list.iter().map(|i| i - 1).collect()))
            }
        }
    }

    pub fn start_profile(&self, fixture: &Fixture, n_platforms: usize) -> Result<Option<StrategyProfile>, ConfigError> {
        let Some(labels) = &self.config.dynamics.start else {
            return Ok(None);
        };
        if labels.len() != n_platforms {
            return Err(self.error(
                "start",
                format!("start profile has {} entries for {n_platforms} platforms", labels.len()),
            ));
        }
        fixture
            .profile(labels)
            .map(Some)
            .map_err(|e| self.error("start", e.to_string()))
    }

    pub fn entry_market(&self) -> Result<EntryMarket, ConfigError> {
        let training = self
            .config
            .training
            .as_ref()
            .ok_or_else(|| self.error("training", "this command needs a training block"))?;
        let mut market = match &training.market {
            MarketConfig::Builtin(_) => {
                let m = toy_market();
                EntryMarket {
                    name: "toy".into(),
                    rewards: m.rewards,
                    population: m.population,
                    pool: m.pool,
                    dataset: m.dataset,
                    base: m.base,
                    n_platforms: m.n_platforms,
                    target_type: m.target_type,
                    settings: m.config,
                }
            }
            MarketConfig::Inline(inline) => self.inline_market(inline)?,
        };
        if let Some(settings) = &training.settings {
            market.settings = settings.clone();
        }
        Ok(market)
    }

    fn inline_market(&self, m: &InlineMarket) -> Result<EntryMarket, ConfigError> {
        let err = |e: modelmarket::GameError| self.error("market", e.to_string());
        let rewards = RewardTable::new(m.rewards.clone()).map_err(err)?;
        let population = UserPopulation::new(m.type_labels.clone(), m.weights.clone()).map_err(err)?;
        let pool = OpponentPool::new(
            ScoreMatrix::new(m.incumbents.labels.clone(), m.incumbents.scores.clone()).map_err(err)?,
        );
        let dataset = Dataset::new(
            m.dataset.counts.clone(),
            m.dataset.attributes.clone(),
            m.dataset.attribute_prefs.clone(),
        )
        .map_err(err)?;
        let labels = m
            .outcome_labels
            .clone()
            .unwrap_or_else(|| (1..=rewards.n_outcomes()).map(|i| format!("x{i}")).collect());
        let base = ToyGenerator::from_distribution(labels, &dataset.empirical()).map_err(err)?;
        if m.target_type >= population.len() {
            return Err(self.error("target_type", "target_type out of range"));
        }
        if m.n_platforms == 0 {
            return Err(self.error("n_platforms", "n_platforms must be at least 1"));
        }
        Ok(EntryMarket {
            name: "inline".into(),
            rewards,
            population,
            pool,
            dataset,
            base,
            n_platforms: m.n_platforms,
            target_type: m.target_type,
            settings: TrainingConfig::default(),
        })
    }
}

/// serde_json appends " at line L column C"; the line is reported separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedConfig, ConfigError> {
        LoadedConfig::from_text("cfg.json".into(), text.into(), PathBuf::new())
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let err = load("{\n  \"instance\": {\"builtin\": \"c1_rps\"},\n  \"dynamics\": {\"max_steps\": }\n}").err().unwrap();
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().starts_with("cfg.json:3:"), "{err}");
    }

    #[test]
    fn zero_steps_rejected_with_line() {
        let err = load("{\n  \"instance\": {\"builtin\": \"c1_rps\"},\n  \"dynamics\": {\n    \"max_steps\": 0\n  }\n}")
            .err()
            .unwrap();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("max_steps"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = load("{\"instanse\": {}}").err().unwrap();
        assert!(err.message.contains("instanse"), "{err}");
    }

    #[test]
    fn instance_source_must_be_unique() {
        assert!(load(r#"{"instance": {}}"#).is_err());
        assert!(load(r#"{"instance": {"builtin": "c1_rps", "file": "x.json"}}"#).is_err());
    }

    #[test]
    fn unknown_builtin_is_a_config_error() {
        let cfg = load(r#"{"instance": {"builtin": "nope"}}"#).unwrap();
        let err = cfg.fixture().err().unwrap();
        assert!(err.message.contains("nope"));
    }

    #[test]
    fn overrides_apply() {
        let cfg = load(r#"{"instance": {"builtin": "fig3_b", "n_platforms": 3}, "choice": {"kind": "softmax", "tau": 0.5}}"#).unwrap();
        let spec = cfg.spec(&cfg.fixture().unwrap()).unwrap();
        assert_eq!(spec.n_platforms(), 3);
        assert!(!spec.choice().is_hardmax());
    }

    #[test]
    fn sweep_values_checked_per_axis() {
        assert!(load(r#"{"sweep": {"axis": "platforms", "values": [1.5]}}"#).is_err());
        assert!(load(r#"{"sweep": {"axis": "models", "values": [[0.5, 0.5]]}}"#).is_err());
        assert!(load(r#"{"sweep": {"axis": "population", "values": [[0.5, 0.5], 0.2]}}"#).is_ok());
        assert!(load(r#"{"sweep": {"axis": "platforms", "values": [1], "repetitions": 2, "seeds": [1]}}"#).is_err());
    }
}

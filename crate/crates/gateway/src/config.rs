//! Service configuration in line-oriented `key = value` form.
//!
//! ```text
//! # comments start with '#'
//! tau = 0.7
//! top_k = 5
//! aggregation = weighted
//! roster = cardiology:0.4, neurology:0.2, endocrinology:0.2, rheumatology:0.2
//! scorer.neurology = http://127.0.0.1:9100/score
//! ```

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use kgtriage_core::diagnosis::{
    AgentProfile, AggregationMode, EngineConfig, RemoteScorer, Roster, SpecialistRule,
};
use kgtriage_core::kg::{canonical_id, Specialty};

pub const DATA_DIR_ENV: &str = "KGTRIAGE_DATA_DIR";
pub const DEFAULT_MAX_QUESTIONS: usize = 3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, reason: String },
    #[error("line {line}: `{key}` set twice")]
    DuplicateKey { line: usize, key: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct RosterEntry {
    pub specialty: Specialty,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub engine: EngineConfig,
    pub roster: Vec<RosterEntry>,
    /// Remote scorer endpoint per agent id (`gp` or a specialty name).
    pub scorers: BTreeMap<String, String>,
    pub scorer_timeout: Duration,
    pub max_clarifying_questions: usize,
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub augmenter_endpoint: Option<String>,
    pub augmenter_timeout: Duration,
    pub lexicon: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub max_chunk_chars: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let w = 1.0 / Specialty::CONSULTANT_DOMAINS.len() as f64;
        Self {
            engine: EngineConfig::default(),
            roster: Specialty::CONSULTANT_DOMAINS
                .iter()
                .map(|&specialty| RosterEntry { specialty, weight: w })
                .collect(),
            scorers: BTreeMap::new(),
            scorer_timeout: Duration::from_secs(5),
            max_clarifying_questions: DEFAULT_MAX_QUESTIONS,
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("kgtriage-data"),
            augmenter_endpoint: None,
            augmenter_timeout: Duration::from_secs(10),
            lexicon: None,
            patterns: None,
            max_chunk_chars: kgtriage_core::ingestion::DEFAULT_MAX_CHUNK_CHARS,
        }
    }
}

fn specialty(s: &str) -> Option<Specialty> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string())).ok()
}

fn specialty_name(s: Specialty) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_relative(text, None)
    }

    /// Parses a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse_relative(&text, path.parent())
    }

    fn parse_relative(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        let resolve = |p: &str| match base {
            Some(b) if Path::new(p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            let invalid = |reason: &str| ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                reason: reason.to_string(),
            };
            let number = |v: &str| v.parse::<f64>().map_err(|_| invalid("not a number"));
            let count = |v: &str| v.parse::<usize>().map_err(|_| invalid("not a non-negative integer"));
            match key {
                "tau" => cfg.engine.tau = number(value)?,
                "top_k" => cfg.engine.top_k = count(value)?,
                "specialist_set_rule" => {
                    cfg.engine.specialist_rule = match value {
                        "explicit-list" => SpecialistRule::ExplicitList,
                        "specialty-not-general" => SpecialistRule::SpecialtyNotGeneral,
                        _ => return Err(invalid("expected explicit-list or specialty-not-general")),
                    }
                }
                "specialist_ids" => {
                    cfg.engine.specialist_ids = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| canonical_id(s).ok_or_else(|| invalid("empty id")))
                        .collect::<Result<_, _>>()?
                }
                "aggregation" => {
                    cfg.engine.aggregation = match value {
                        "weighted" => AggregationMode::Weighted,
                        "uniform" => AggregationMode::Uniform,
                        _ => return Err(invalid("expected weighted or uniform")),
                    }
                }
                "roster" => {
                    let mut entries = Vec::new();
                    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let (name, weight) = part.split_once(':').ok_or_else(|| invalid("expected specialty:weight"))?;
                        let specialty = specialty(name).ok_or_else(|| invalid("unknown specialty"))?;
                        if specialty == Specialty::General {
                            return Err(invalid("general is the gp, not a consultant"));
                        }
                        entries.push(RosterEntry { specialty, weight: number(weight.trim())? });
                    }
                    cfg.roster = entries;
                }
                "scorer_timeout_secs" => cfg.scorer_timeout = Duration::from_secs_f64(number(value)?.max(0.0)),
                "max_clarifying_questions" => cfg.max_clarifying_questions = count(value)?,
                "listen" => cfg.listen = value.parse().map_err(|_| invalid("expected host:port"))?,
                "data_dir" => cfg.data_dir = resolve(value),
                "augmenter_endpoint" => cfg.augmenter_endpoint = (!value.is_empty()).then(|| value.to_string()),
                "augmenter_timeout_secs" => cfg.augmenter_timeout = Duration::from_secs_f64(number(value)?.max(0.0)),
                "lexicon" => cfg.lexicon = Some(resolve(value)),
                "patterns" => cfg.patterns = Some(resolve(value)),
                "max_chunk_chars" => cfg.max_chunk_chars = count(value)?,
                _ => match key.strip_prefix("scorer.") {
                    Some(agent) if agent == "gp" || specialty(agent).is_some_and(|s| s != Specialty::General) => {
                        cfg.scorers.insert(agent.to_string(), value.to_string());
                    }
                    _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                },
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_chunk_chars == 0 {
            return Err(ConfigError::Invalid("max_chunk_chars must be positive".into()));
        }
        self.build_roster().map(drop)
    }

    /// Applies the data-directory environment override.
    pub fn with_env(mut self) -> Self {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
            self.data_dir = PathBuf::from(dir);
        }
        self
    }

    pub fn build_roster(&self) -> Result<Roster, ConfigError> {
        let remote = |agent: &str| {
            self.scorers
                .get(agent)
                .map(|url| Arc::new(RemoteScorer::new(url.clone(), self.scorer_timeout)) as Arc<_>)
        };
        let mut gp = AgentProfile::gp();
        if let Some(s) = remote("gp") {
            gp = gp.with_scorer(s);
        }
        let mut agents = vec![gp];
        for entry in &self.roster {
            let mut agent = AgentProfile::consultant(entry.specialty, entry.weight);
            if let Some(s) = remote(&specialty_name(entry.specialty)) {
                agent = agent.with_scorer(s);
            }
            agents.push(agent);
        }
        let roster = Roster::new(agents).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.engine.aggregation == AggregationMode::Weighted {
            let sum: f64 = roster.consultants().map(|a| a.weight).sum();
            if (sum - 1.0).abs() > kgtriage_core::diagnosis::WEIGHT_SUM_TOLERANCE {
                return Err(ConfigError::Invalid(format!("consultant weights sum to {sum}, expected 1")));
            }
        }
        Ok(roster)
    }
}

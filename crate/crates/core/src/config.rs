//! The single TOML pipeline config: a global seed plus one section per stage.
//!
//! Stage sections start from built-in defaults (optionally a named preset)
//! and override individual keys. Relative paths resolve against the config
//! file's directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bench::AuditMode;
use crate::filter::FilterConfig;
use crate::metrics::PromptMode;
use crate::mining::MiningConfig;
use crate::train::{LossConfig, MixSampler, TrainConfig, TrainStage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("missing config key `{0}`")]
    Missing(String),
    #[error("invalid config key `{path}`: {detail}")]
    Invalid { path: String, detail: String },
    #[error("config file {path}: {detail}")]
    File { path: String, detail: String },
}

fn invalid(path: &str, detail: impl ToString) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), detail: detail.to_string() }
}

fn to_json(v: &toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s.clone()),
        toml::Value::Integer(i) => Value::from(*i),
        toml::Value::Float(f) => Value::from(*f),
        toml::Value::Boolean(b) => Value::Bool(*b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.iter().map(to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.iter().map(|(k, v)| (k.clone(), to_json(v))).collect()),
    }
}

/// Overlay the keys of `table` (minus `skip`) onto `defaults`.
fn overlay<T: Serialize + DeserializeOwned>(
    defaults: &T,
    table: Option<&toml::Table>,
    section: &str,
    skip: &[&str],
) -> Result<T, ConfigError> {
    let mut base = serde_json::to_value(defaults).expect("defaults serialize");
    if let (Some(obj), Some(t)) = (base.as_object_mut(), table) {
        for (k, v) in t {
            if !skip.contains(&k.as_str()) {
                obj.insert(k.clone(), to_json(v));
            }
        }
    }
    serde_json::from_value(base).map_err(|e| invalid(section, e))
}

fn get_str<'a>(t: Option<&'a toml::Table>, section: &str, key: &str) -> Result<Option<&'a str>, ConfigError> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(invalid(&format!("{section}.{key}"), "expected a string")),
    }
}

fn get_int(t: Option<&toml::Table>, section: &str, key: &str) -> Result<Option<i64>, ConfigError> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(toml::Value::Integer(i)) => Ok(Some(*i)),
        Some(_) => Err(invalid(&format!("{section}.{key}"), "expected an integer")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum JudgeSpec {
    /// Recorded replies from a JSONL file.
    Replay { id: String, path: PathBuf },
    /// OpenAI-style chat endpoint.
    Http {
        id: String,
        url: String,
        model: String,
        #[serde(default)]
        token_env: Option<String>,
    },
}

impl JudgeSpec {
    pub fn id(&self) -> &str {
        match self {
            JudgeSpec::Replay { id, .. } | JudgeSpec::Http { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningSection {
    pub config: MiningConfig,
    pub judges: Vec<JudgeSpec>,
    pub instruction_judge: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSection {
    pub config: FilterConfig,
    /// Benchmark JSONL files whose task prompts are decontaminated against.
    pub bench_prompts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembleSection {
    pub manifest: Option<PathBuf>,
    pub mode: AuditMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    /// Toy model; zero weights when no file is given.
    Toy { weights: Option<PathBuf> },
    Http { url: String },
}

impl std::str::FromStr for ScorerSpec {
    type Err = String;

    /// `toy`, `toy:<weights.json>` or `http:<url>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "toy" {
            return Ok(ScorerSpec::Toy { weights: None });
        }
        if let Some(path) = s.strip_prefix("toy:") {
            return Ok(ScorerSpec::Toy { weights: Some(PathBuf::from(path)) });
        }
        if let Some(url) = s.strip_prefix("http:") {
            let url = if url.starts_with("//") { format!("http:{url}") } else { url.to_string() };
            return Ok(ScorerSpec::Http { url });
        }
        Err(format!("unknown scorer {s:?} (expected toy, toy:<weights.json> or http:<url>)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSection {
    pub spec: Option<ScorerSpec>,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub stage: TrainStage,
    pub loss: LossConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub criteria_mode: PromptMode,
    pub k: usize,
    pub list_size: usize,
    pub count_impossible_as_miss: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { criteria_mode: PromptMode::Single, k: 10, list_size: 40, count_impossible_as_miss: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub path: PathBuf,
    pub sha256: String,
    pub rng_seed: u64,
    pub log_level: String,
    pub workers: Option<usize>,
    pub mining: MiningSection,
    pub filter: FilterSection,
    pub assemble: AssembleSection,
    pub scorer: ScorerSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    raw_train: Option<toml::Table>,
}

const TOP_KEYS: &[&str] = &["rng_seed", "log_level", "workers", "mining", "filter", "assemble", "scorer", "train", "eval"];

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File { path: path.display().to_string(), detail: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::parse(&text, &base)?;
        cfg.path = path.to_path_buf();
        Ok(cfg)
    }

    /// Parse config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let root: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::File { path: "<config>".into(), detail: e.to_string() })?;
        for k in root.keys() {
            if !TOP_KEYS.contains(&k.as_str()) {
                return Err(invalid(k, "unknown key"));
            }
        }
        let section = |name: &str| -> Result<Option<&toml::Table>, ConfigError> {
            match root.get(name) {
                None => Ok(None),
                Some(toml::Value::Table(t)) => Ok(Some(t)),
                Some(_) => Err(invalid(name, "expected a table")),
            }
        };
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let rng_seed = match root.get("rng_seed") {
            None => return Err(ConfigError::Missing("rng_seed".into())),
            Some(toml::Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(_) => return Err(invalid("rng_seed", "expected a non-negative integer")),
        };
        let log_level = match root.get("log_level") {
            None => "warn".to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(invalid("log_level", "expected a string")),
        };
        let workers = match root.get("workers") {
            None => None,
            Some(toml::Value::Integer(i)) if *i >= 1 => Some(*i as usize),
            Some(_) => return Err(invalid("workers", "expected a positive integer")),
        };

        let m = section("mining")?;
        let preset = match get_str(m, "mining", "preset")? {
            None | Some("eval") => MiningConfig::eval_defaults(),
            Some("train") => MiningConfig::train_defaults(),
            Some(other) => return Err(invalid("mining.preset", format!("unknown preset {other:?}"))),
        };
        let mining_cfg: MiningConfig = overlay(&preset, m, "mining", &["preset", "judges", "instruction_judge"])?;
        mining_cfg.validate().map_err(|e| invalid("mining", e))?;
        let judges: Vec<JudgeSpec> = match m.and_then(|t| t.get("judges")) {
            None => Vec::new(),
            Some(v) => serde_json::from_value(to_json(v)).map_err(|e| invalid("mining.judges", e))?,
        };
        let judges = judges
            .into_iter()
            .map(|j| match j {
                JudgeSpec::Replay { id, path } => JudgeSpec::Replay { id, path: resolve(&path.to_string_lossy()) },
                other => other,
            })
            .collect();
        let instruction_judge = get_str(m, "mining", "instruction_judge")?.map(str::to_string);

        let f = section("filter")?;
        let preset = match get_str(f, "filter", "preset")? {
            None | Some("pm") => FilterConfig::pm(),
            Some("pt") => FilterConfig::pt(),
            Some(other) => return Err(invalid("filter.preset", format!("unknown preset {other:?}"))),
        };
        let mut filter_cfg: FilterConfig = overlay(&preset, f, "filter", &["preset", "bench_prompts"])?;
        if f.and_then(|t| t.get("rng_seed")).is_none() {
            filter_cfg.rng_seed = rng_seed;
        }
        filter_cfg.validate().map_err(|e| invalid("filter", e))?;
        let bench_prompts = match f.and_then(|t| t.get("bench_prompts")) {
            None => Vec::new(),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(resolve).ok_or_else(|| invalid("filter.bench_prompts", "expected strings")))
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(invalid("filter.bench_prompts", "expected an array of paths")),
        };

        let a = section("assemble")?;
        let manifest = get_str(a, "assemble", "manifest")?.map(resolve);
        let mode = match get_str(a, "assemble", "mode")? {
            None | Some("lenient") => AuditMode::Lenient,
            Some("strict") => AuditMode::Strict,
            Some(other) => return Err(invalid("assemble.mode", format!("unknown mode {other:?}"))),
        };

        let s = section("scorer")?;
        let spec = match get_str(s, "scorer", "kind")? {
            None => None,
            Some("toy") => Some(ScorerSpec::Toy { weights: get_str(s, "scorer", "weights")?.map(resolve) }),
            Some("http") => Some(ScorerSpec::Http {
                url: get_str(s, "scorer", "url")?
                    .ok_or_else(|| ConfigError::Missing("scorer.url".into()))?
                    .to_string(),
            }),
            Some(other) => return Err(invalid("scorer.kind", format!("unknown scorer {other:?}"))),
        };
        let positive = |v: Option<i64>, key: &str, default: i64| -> Result<i64, ConfigError> {
            match v {
                None => Ok(default),
                Some(i) if i >= 1 => Ok(i),
                Some(_) => Err(invalid(&format!("scorer.{key}"), "must be at least 1")),
            }
        };
        let scorer = ScorerSection {
            spec,
            max_in_flight: positive(get_int(s, "scorer", "max_in_flight")?, "max_in_flight", 8)? as usize,
            max_attempts: positive(get_int(s, "scorer", "max_attempts")?, "max_attempts", 3)? as u32,
            timeout_secs: positive(get_int(s, "scorer", "timeout_secs")?, "timeout_secs", 120)? as u64,
        };

        let t = section("train")?;
        let stage = match get_str(t, "train", "stage")? {
            None => TrainStage::Pm,
            Some(s) => s.parse().map_err(|e| invalid("train.stage", e))?,
        };
        let train = train_section(t, stage, rng_seed)?;

        let eval: EvalSection = overlay(&EvalSection::default(), section("eval")?, "eval", &[])?;
        if eval.k == 0 || eval.list_size == 0 {
            return Err(invalid("eval", "k and list_size must be positive"));
        }

        let cfg = PipelineConfig {
            path: PathBuf::new(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
            rng_seed,
            log_level,
            workers,
            mining: MiningSection { config: mining_cfg, judges, instruction_judge },
            filter: FilterSection { config: filter_cfg, bench_prompts },
            assemble: AssembleSection { manifest, mode },
            scorer,
            train,
            eval,
            raw_train: t.cloned(),
        };
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Replace the global seed everywhere it was propagated.
    pub fn set_seed(&mut self, seed: u64) {
        self.rng_seed = seed;
        self.filter.config.rng_seed = seed;
        self.train.train.seed = seed;
        if let Some(m) = &mut self.train.train.mix {
            m.rng_seed = seed;
        }
    }

    /// Every input file named by the config must exist.
    fn check_paths(&self) -> Result<(), ConfigError> {
        let mut paths: Vec<(String, &Path)> = Vec::new();
        for (i, j) in self.mining.judges.iter().enumerate() {
            if let JudgeSpec::Replay { path, .. } = j {
                paths.push((format!("mining.judges[{i}].path"), path));
            }
        }
        for (i, p) in self.filter.bench_prompts.iter().enumerate() {
            paths.push((format!("filter.bench_prompts[{i}]"), p));
        }
        if let Some(p) = &self.assemble.manifest {
            paths.push(("assemble.manifest".into(), p));
        }
        if let Some(ScorerSpec::Toy { weights: Some(p) }) = &self.scorer.spec {
            paths.push(("scorer.weights".into(), p));
        }
        for (key, p) in paths {
            if !p.is_file() {
                return Err(invalid(&key, format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Override the train stage, resetting stage-dependent defaults that the
    /// config file did not set explicitly.
    pub fn with_stage(&self, stage: TrainStage) -> Result<TrainSection, ConfigError> {
        train_section(self.raw_train.as_ref(), stage, self.rng_seed)
    }
}

fn train_section(t: Option<&toml::Table>, stage: TrainStage, seed: u64) -> Result<TrainSection, ConfigError> {
    let loss: LossConfig = overlay(
        &LossConfig::for_stage(stage),
        t,
        "train",
        &["stage", "epochs", "lr", "batch_size", "seed", "cosine", "warmup_frac", "mix", "lm_alpha"],
    )?;
    let loss = LossConfig { stage, ..loss };
    if loss.lambda < 0.0 || loss.mu < 0.0 {
        return Err(invalid("train", "lambda and mu must be non-negative"));
    }
    let defaults = TrainConfig { epochs: stage.default_epochs(), seed, ..TrainConfig::default() };
    let mut train: TrainConfig =
        overlay(&defaults, t, "train", &["stage", "lambda", "mu", "literal_center_sign", "mix"])?;
    train.mix = match t.and_then(|t| t.get("mix")) {
        None | Some(toml::Value::Boolean(false)) => None,
        Some(toml::Value::Boolean(true)) => Some(MixSampler { rng_seed: seed, ..MixSampler::default() }),
        Some(toml::Value::Table(m)) => {
            let s: MixSampler = overlay(&MixSampler { rng_seed: seed, ..MixSampler::default() }, Some(m), "train.mix", &[])?;
            s.validate().map_err(|e| invalid("train.mix", e))?;
            Some(s)
        }
        Some(_) => return Err(invalid("train.mix", "expected a boolean or a table")),
    };
    Ok(TrainSection { stage, loss, train })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse("rng_seed = 7\n").unwrap();
        assert_eq!(c.rng_seed, 7);
        assert_eq!(c.filter.config.max_tokens, 4096);
        assert_eq!(c.filter.config.rng_seed, 7);
        assert_eq!(c.mining.config.min_stars, 15);
        assert_eq!(c.train.loss.lambda, 0.25);
        assert_eq!(c.train.train.epochs, 1);
        assert_eq!(c.train.train.seed, 7);
        assert_eq!(c.eval.k, 10);
    }

    #[test]
    fn missing_seed_names_key() {
        assert_eq!(parse("[filter]\n").unwrap_err().to_string(), "missing config key `rng_seed`");
    }

    #[test]
    fn presets_and_overrides() {
        let c = parse(
            "rng_seed = 1\n[mining]\npreset = \"train\"\nmin_stars = 20\ndate_to = 2019-02-28\n\
             [filter]\npreset = \"pt\"\nshingle_size = 5\n[train]\nstage = \"pt\"\nlr = 0.1\nmix = true\n",
        )
        .unwrap();
        assert_eq!(c.mining.config.min_stars, 20);
        assert_eq!(c.mining.config.date_to.to_string(), "2019-02-28");
        assert_eq!(c.filter.config.max_tokens, 2560);
        assert_eq!(c.filter.config.shingle_size, 5);
        assert_eq!((c.train.loss.lambda, c.train.loss.mu), (0.4, 0.01));
        assert_eq!(c.train.train.epochs, 2);
        assert_eq!(c.train.train.lr, 0.1);
        assert_eq!(c.train.train.mix.unwrap().rng_seed, 1);
    }

    #[test]
    fn validation_errors_carry_paths() {
        let e = parse("rng_seed = 1\n[filter]\nbands = 3\n").unwrap_err();
        assert!(e.to_string().contains("`filter`"), "{e}");
        let e = parse("rng_seed = 1\n[filter]\nbogus = 3\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse("rng_seed = 1\n[assemble]\nmanifest = \"/nonexistent.toml\"\n").unwrap_err();
        assert!(e.to_string().contains("assemble.manifest"), "{e}");
        let e = parse("rng_seed = 1\n[scorer]\nkind = \"http\"\n").unwrap_err();
        assert_eq!(e, ConfigError::Missing("scorer.url".into()));
        assert!(parse("rng_seed = 1\nextra = 2\n").is_err());
    }

    #[test]
    fn scorer_spec_strings() {
        assert_eq!("toy".parse::<ScorerSpec>().unwrap(), ScorerSpec::Toy { weights: None });
        assert_eq!(
            "http://localhost:9/".parse::<ScorerSpec>().unwrap(),
            ScorerSpec::Http { url: "http://localhost:9/".into() }
        );
        assert!("ftp:x".parse::<ScorerSpec>().is_err());
    }
}

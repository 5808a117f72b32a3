//! Flat `key = value` run configuration: a TOML file, then `--set` overrides, then `--seed`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use seqvae::artifact::read_to_string;
use seqvae::data::{PipelineConfig, RatingsFormat};
use seqvae::eval::{EvalOptions, IdcgMode};
use seqvae::models::{ModelConfig, ModelKind};
use seqvae::{Error, Result};

/// Everything a command needs besides paths. Model hyperparameters sit at the top level
/// next to the pipeline and evaluation options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelKind,

    pub delimiter: String,
    pub has_header: bool,
    pub min_rating: f64,
    pub max_rating: f64,
    /// Ratings strictly above this count as consumption.
    pub threshold: f64,
    pub min_history: usize,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub fold_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata_edges: Option<Vec<usize>>,

    pub cutoffs: Vec<usize>,
    pub idcg: IdcgMode,

    #[serde(flatten)]
    pub hyper: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig::default();
        RunConfig {
            model: ModelKind::Svae,
            delimiter: pipeline.format.delimiter,
            has_header: pipeline.format.has_header,
            min_rating: pipeline.format.min_rating,
            max_rating: pipeline.format.max_rating,
            threshold: pipeline.threshold,
            min_history: pipeline.min_history,
            train_fraction: pipeline.fractions.0,
            validation_fraction: pipeline.fractions.1,
            test_fraction: pipeline.fractions.2,
            fold_ratio: pipeline.fold_ratio,
            subsample_users: None,
            strata_edges: None,
            cutoffs: EvalOptions::default().cutoffs,
            idcg: IdcgMode::Full,
            hyper: ModelConfig::default(),
        }
    }
}

const OPTIONAL_KEYS: [&str; 2] = ["subsample_users", "strata_edges"];

fn known_keys() -> BTreeSet<String> {
    let table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    table
        .keys()
        .cloned()
        .chain(OPTIONAL_KEYS.iter().map(|k| k.to_string()))
        .collect()
}

/// `raw` as a TOML value, or as a bare string when it does not parse (so
/// `--set model=mvae` needs no quotes).
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut table = match path {
            Some(p) => read_to_string(p)?
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not KEY=VALUE")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        if let Some(seed) = seed {
            let seed = i64::try_from(seed)
                .map_err(|_| Error::Config(format!("seed {seed} is too large")))?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        let known = known_keys();
        if let Some(bad) = table.keys().find(|k| !known.contains(*k)) {
            return Err(Error::Config(format!("unknown config key {bad:?}")));
        }
        let config: RunConfig = table.try_into().map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::Config(
                "cutoffs must be a nonempty list of positive integers".into(),
            ));
        }
        if self.delimiter.is_empty() {
            return Err(Error::Config("delimiter must not be empty".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.hyper.seed
    }

    pub fn format(&self) -> RatingsFormat {
        RatingsFormat {
            delimiter: self.delimiter.clone(),
            min_rating: self.min_rating,
            max_rating: self.max_rating,
            has_header: self.has_header,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            format: self.format(),
            threshold: self.threshold,
            min_history: self.min_history,
            fractions: (
                self.train_fraction,
                self.validation_fraction,
                self.test_fraction,
            ),
            fold_ratio: self.fold_ratio,
            subsample_users: self.subsample_users,
            strata_edges: self.strata_edges.clone(),
            seed: self.seed(),
        }
    }

    pub fn eval_options(&self, keep_per_user: bool) -> EvalOptions {
        EvalOptions {
            cutoffs: self.cutoffs.clone(),
            idcg: self.idcg,
            keep_per_user,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// The file form: loading it back gives the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

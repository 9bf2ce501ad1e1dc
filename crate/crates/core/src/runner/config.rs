//! Experiment configuration.
//!
//! A config file is TOML. Top-level keys apply to every cell; each
//! `[[cells]]` table overrides them for one matrix cell. Without `[[cells]]`
//! the file describes a single cell. Keys are the [`ExperimentConfig`] field
//! names:
//!
//! ```toml
//! examples_file = "spider/dev.json"
//! db_root = "spider/database"
//! train_file = "spider/train_spider.json"
//! model_name = "code-davinci-002"
//! policy = "replay"
//! cache_file = "cache/codex.jsonl"
//! tokenizer = "p50k_base"
//! mode = "normalized"
//! seeds = [0, 1, 2]
//!
//! [[cells]]
//! setting = "zero_shot"
//! schema_format = "create_table"
//! content_format = "select_row:3"
//!
//! [[cells]]
//! setting = "cross_domain"
//! schema_format = "create_table"
//! content_format = "select_row:3"
//! m = 2
//! k = 2
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::DEFAULT_TIMEOUT_MS;
use crate::gateway::{Policy, DEFAULT_MAX_TOKENS};
use crate::prompt::{tokenizer, ContentFormat, NormalizationMode, PromptSpec, SchemaFormat, Setting};
use crate::sampler::DEFAULT_TOKEN_LIMIT;

use super::{Result, RunnerError};

pub const DEFAULT_BIN_WIDTH: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub schema_format: SchemaFormat,
    pub content_format: ContentFormat,
    pub mode: NormalizationMode,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub model_name: String,
    pub policy: Policy,
    pub tokenizer: String,
    /// Test examples (Spider dev format).
    pub examples_file: PathBuf,
    pub db_root: PathBuf,
    /// Cross-domain demonstration pool.
    pub train_file: Option<PathBuf>,
    /// Databases of `train_file`; defaults to `db_root`.
    pub train_db_root: Option<PathBuf>,
    pub cache_file: Option<PathBuf>,
    pub filter_cache_dir: Option<PathBuf>,
    pub dump_prompts: Option<PathBuf>,
    pub timeout_ms: u64,
    pub token_limit: usize,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Evaluate only the first `limit` test examples.
    pub limit: Option<usize>,
    pub workers: usize,
    pub bin_width: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::ZeroShot,
            schema_format: SchemaFormat::CreateTable,
            content_format: ContentFormat::NoContent,
            mode: NormalizationMode::Normalized,
            n: 0,
            m: 0,
            k: 0,
            seeds: vec![0, 1, 2],
            model_name: String::new(),
            policy: Policy::Replay,
            tokenizer: "whitespace".into(),
            examples_file: PathBuf::new(),
            db_root: PathBuf::new(),
            train_file: None,
            train_db_root: None,
            cache_file: None,
            filter_cache_dir: None,
            dump_prompts: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            token_limit: DEFAULT_TOKEN_LIMIT,
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
            limit: None,
            workers: 4,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunnerError {
    RunnerError::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    pub fn spec(&self) -> PromptSpec {
        PromptSpec {
            schema_format: self.schema_format,
            content_format: self.content_format,
            mode: self.mode,
            setting: self.setting,
        }
    }

    /// Checks the invariants and fills derived shot parameters: single-domain
    /// runs use one database with N examples, and a cross-domain N of 0 is
    /// taken to mean M x K.
    pub fn validated(mut self) -> Result<Self> {
        self.spec().validate().map_err(|e| invalid(e.to_string()))?;
        match self.setting {
            Setting::ZeroShot => {
                if self.n != 0 || self.m != 0 || self.k != 0 {
                    return Err(invalid("zero-shot runs take no demonstrations (n = m = k = 0)"));
                }
            }
            Setting::SingleDomain => {
                if self.n == 0 {
                    return Err(invalid("single-domain runs need n >= 1"));
                }
                if (self.m, self.k) == (0, 0) {
                    (self.m, self.k) = (1, self.n);
                }
                if (self.m, self.k) != (1, self.n) {
                    return Err(invalid("single-domain runs use m = 1 and k = n"));
                }
            }
            Setting::CrossDomain => {
                if self.m == 0 || self.k == 0 {
                    return Err(invalid("cross-domain runs need m >= 1 and k >= 1"));
                }
                if self.n == 0 {
                    self.n = self.m * self.k;
                }
                if self.m * self.k != self.n {
                    return Err(invalid(format!("m x k = {} but n = {}", self.m * self.k, self.n)));
                }
                if self.train_file.is_none() {
                    return Err(invalid("cross-domain runs need train_file"));
                }
            }
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        if self.seeds.iter().collect::<std::collections::HashSet<_>>().len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        if self.timeout_ms == 0 || self.token_limit == 0 || self.max_tokens == 0 || self.workers == 0 {
            return Err(invalid("timeout_ms, token_limit, max_tokens and workers must be positive"));
        }
        if self.bin_width == 0 {
            return Err(invalid("bin_width must be positive"));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid("temperature must be a non-negative number"));
        }
        if self.examples_file.as_os_str().is_empty() || self.db_root.as_os_str().is_empty() {
            return Err(invalid("examples_file and db_root are required"));
        }
        if self.policy != Policy::Live && self.cache_file.is_none() {
            return Err(invalid(format!("policy {} needs cache_file", self.policy)));
        }
        tokenizer(&self.tokenizer).map_err(|e| invalid(e.to_string()))?;
        Ok(self)
    }

    pub fn train_db_root(&self) -> &Path {
        self.train_db_root.as_deref().unwrap_or(&self.db_root)
    }

    /// Short description of the matrix cell.
    pub fn cell_label(&self) -> String {
        format!(
            "{} {} {} N={} M={} K={}",
            self.setting,
            self.spec().construction_label(),
            self.mode.short(),
            self.n,
            self.m,
            self.k
        )
    }
}

/// Merges `overrides` into `base`, key by key.
fn merged(base: &toml::Table, overrides: &toml::Table) -> toml::Table {
    let mut out = base.clone();
    for (k, v) in overrides {
        out.insert(k.clone(), v.clone());
    }
    out
}

/// Resolves a parsed config document into validated cells. `overrides`
/// (typically from command-line flags) win over both the file and its cells.
pub fn cells_from_table(doc: &toml::Table, overrides: &toml::Table) -> Result<Vec<ExperimentConfig>> {
    let mut base = doc.clone();
    let cells = match base.remove("cells") {
        None => vec![toml::Table::new()],
        Some(toml::Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                toml::Value::Table(t) => Ok(t),
                _ => Err(invalid("each [[cells]] entry must be a table")),
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(invalid("cells must be an array of tables")),
    };
    cells
        .iter()
        .map(|cell| {
            let table = merged(&merged(&base, cell), overrides);
            let cfg: ExperimentConfig = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
            cfg.validated()
        })
        .collect()
}

/// Reads a config file; relative paths inside it resolve against its directory.
pub fn load_config(path: &Path, overrides: &toml::Table) -> Result<Vec<ExperimentConfig>> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let cells = cells_from_table(&doc, overrides)?;
    Ok(cells.into_iter().map(|c| c.with_base_dir(dir)).collect())
}

impl ExperimentConfig {
    fn with_base_dir(mut self, dir: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.examples_file);
        fix(&mut self.db_root);
        for p in [
            &mut self.train_file,
            &mut self.train_db_root,
            &mut self.cache_file,
            &mut self.filter_cache_dir,
            &mut self.dump_prompts,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self
    }
}

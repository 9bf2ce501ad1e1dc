//! Demonstration sampling for the single-domain and cross-domain settings.
//!
//! Every draw uses a ChaCha8 generator seeded with the run seed and switched
//! to the stream numbered by the test example's index, so each test example
//! gets an independent, platform-stable sequence that does not depend on how
//! many other examples were processed before it.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::DatabaseContext;
use crate::prompt::{database_prompt, PromptSpec, SchemaFormat, TokenCounter};
use crate::sql::{template_key, SqlError};

pub const DEFAULT_TOKEN_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("no eligible demonstrations for a test example of {db_id}")]
    EmptyEligiblePool { db_id: String },
    #[error("pool example belongs to {found}, expected {expected}")]
    PoolMismatch { expected: String, found: String },
    #[error("need {needed} demonstration databases, only {available} available")]
    InsufficientDatabases { needed: usize, available: usize },
    #[error("database {db_id} has {available} examples, need {needed}")]
    InsufficientExamples { db_id: String, needed: usize, available: usize },
    #[error("cannot derive template of {sql:?}: {source}")]
    Template { sql: String, source: SqlError },
    #[error("demo filter cache: {0}")]
    Cache(#[from] io::Error),
}

pub type Result<T, E = SamplerError> = std::result::Result<T, E>;

/// An NLQ-SQL pair bound to a database.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub nlq: String,
    pub sql: String,
    pub db_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoGroup {
    pub db_id: String,
    pub examples: Vec<Example>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemonstrationSet {
    pub groups: Vec<DemoGroup>,
}

impl DemonstrationSet {
    /// Total number of demonstrations, N.
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.examples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.groups.iter().flat_map(|g| &g.examples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub token_limit: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 0,
            m: 0,
            k: 0,
            token_limit: DEFAULT_TOKEN_LIMIT,
        }
    }
}

/// Generator for one test example: `seed` selects the key, `stream` the test example.
pub fn example_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn key_of(sql: &str) -> Result<crate::sql::TemplateKey> {
    template_key(sql).map_err(|source| SamplerError::Template {
        sql: sql.to_string(),
        source,
    })
}

/// Draws up to `n` in-domain demonstrations, excluding every pool entry that
/// shares the test example's SQL template.
pub fn sample_single_domain(
    test: &Example,
    pool: &[Example],
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<DemonstrationSet> {
    if let Some(e) = pool.iter().find(|e| e.db_id != test.db_id) {
        return Err(SamplerError::PoolMismatch {
            expected: test.db_id.clone(),
            found: e.db_id.clone(),
        });
    }
    let group = |examples| DemonstrationSet {
        groups: vec![DemoGroup {
            db_id: test.db_id.clone(),
            examples,
        }],
    };
    if n == 0 {
        return Ok(group(Vec::new()));
    }
    let test_key = key_of(&test.sql)?;
    let mut eligible = Vec::with_capacity(pool.len());
    for e in pool {
        if e != test && key_of(&e.sql)? != test_key {
            eligible.push(e);
        }
    }
    if eligible.is_empty() {
        return Err(SamplerError::EmptyEligiblePool {
            db_id: test.db_id.clone(),
        });
    }
    let mut rng = example_rng(seed, stream);
    let picked = index::sample(&mut rng, eligible.len(), n.min(eligible.len()));
    Ok(group(picked.into_iter().map(|i| eligible[i].clone()).collect()))
}

/// Keeps the databases whose `CreateTable` database prompt (with the content
/// format of `spec`) counts fewer than `token_limit` tokens. Input order is kept.
pub fn filter_demo_databases<'a>(
    databases: &'a [DatabaseContext],
    spec: &PromptSpec,
    tokenizer: &dyn TokenCounter,
    token_limit: usize,
) -> Vec<&'a DatabaseContext> {
    let spec = PromptSpec {
        schema_format: SchemaFormat::CreateTable,
        ..*spec
    };
    databases
        .iter()
        .filter(|db| match database_prompt(db, &spec) {
            Ok(text) => tokenizer.count(&text) < token_limit,
            Err(e) => {
                log::warn!("dropping demonstration database {}: {e}", db.schema.db_id);
                false
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FilterCacheEntry {
    tokenizer: String,
    token_limit: usize,
    kept: Vec<String>,
}

/// [`filter_demo_databases`] memoized on disk under `cache_dir`, keyed by a
/// hash of the databases, the spec, the tokenizer name and the limit.
/// Returns the surviving db_ids.
pub fn filter_demo_databases_cached(
    databases: &[DatabaseContext],
    spec: &PromptSpec,
    tokenizer: &dyn TokenCounter,
    token_limit: usize,
    cache_dir: &Path,
) -> Result<Vec<String>> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&(spec.content_format, spec.mode, tokenizer.name(), token_limit)).expect("serializable"));
    for db in databases {
        hasher.update(serde_json::to_vec(db).expect("serializable"));
    }
    let path = cache_dir.join(format!("demo-filter-{}.json", hex::encode(hasher.finalize())));
    if let Ok(bytes) = fs::read(&path) {
        match serde_json::from_slice::<FilterCacheEntry>(&bytes) {
            Ok(entry) => return Ok(entry.kept),
            Err(e) => log::warn!("ignoring unreadable filter cache {}: {e}", path.display()),
        }
    }
    let kept: Vec<String> = filter_demo_databases(databases, spec, tokenizer, token_limit)
        .into_iter()
        .map(|db| db.schema.db_id.clone())
        .collect();
    fs::create_dir_all(cache_dir)?;
    let entry = FilterCacheEntry {
        tokenizer: tokenizer.name().to_string(),
        token_limit,
        kept: kept.clone(),
    };
    fs::write(&path, serde_json::to_vec_pretty(&entry).expect("serializable"))?;
    Ok(kept)
}

/// Draws `m` distinct databases from `eligible_dbs` (minus `exclude_db`) and
/// `k` examples from each, without replacement.
pub fn sample_cross_domain(
    training: &BTreeMap<String, Vec<Example>>,
    eligible_dbs: &[String],
    exclude_db: Option<&str>,
    m: usize,
    k: usize,
    seed: u64,
    stream: u64,
) -> Result<DemonstrationSet> {
    let candidates: Vec<&String> = eligible_dbs
        .iter()
        .filter(|db| Some(db.as_str()) != exclude_db)
        .collect();
    if candidates.len() < m {
        return Err(SamplerError::InsufficientDatabases {
            needed: m,
            available: candidates.len(),
        });
    }
    let mut rng = example_rng(seed, stream);
    let mut groups = Vec::with_capacity(m);
    for i in index::sample(&mut rng, candidates.len(), m) {
        let db_id = candidates[i];
        let pool = training.get(db_id).map_or(&[][..], Vec::as_slice);
        if pool.len() < k {
            return Err(SamplerError::InsufficientExamples {
                db_id: db_id.clone(),
                needed: k,
                available: pool.len(),
            });
        }
        let examples = index::sample(&mut rng, pool.len(), k)
            .into_iter()
            .map(|j| pool[j].clone())
            .collect();
        groups.push(DemoGroup {
            db_id: db_id.clone(),
            examples,
        });
    }
    Ok(DemonstrationSet { groups })
}

//! The per-cell pipeline: sample, assemble, count, complete, stitch, score.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::DatabaseContext;
use crate::eval::{execution_accuracy, EvalOutcome};
use crate::gateway::{
    default_stop_sequences, stitch_sql, CompletionProvider, CompletionRequest, Gateway, HttpProvider,
    Policy, ReplayCache,
};
use crate::prompt::{assemble_prompt, tokenizer, PromptText, Setting, TokenCounter, DEFAULT_ROWS};
use crate::sampler::{
    filter_demo_databases, filter_demo_databases_cached, sample_cross_domain, sample_single_domain, DemonstrationSet,
    Example, SamplerError,
};
use crate::sql::template_key;

use super::config::ExperimentConfig;
use super::dataset::{load_dataset, Dataset};
use super::{Result, RunnerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub example_id: String,
    pub db_id: String,
    pub question: String,
    pub gold: String,
    pub prediction: String,
    pub degenerate: bool,
    pub prompt_tokens: usize,
    pub fingerprint: String,
    pub outcome: EvalOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub example_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    /// Fraction of scored examples whose prediction matched.
    pub accuracy: f64,
    pub mean_tokens: f64,
    pub examples: Vec<ExampleRecord>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub construction: String,
    pub tokenizer: String,
    pub seeds: Vec<SeedReport>,
    /// Arithmetic mean of the per-seed accuracies.
    pub mean_accuracy: f64,
    /// Arithmetic mean of the per-seed mean token counts.
    pub mean_tokens: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Hands out gateways per cell, sharing one cache instance per cache file.
pub struct Gateways {
    caches: Mutex<HashMap<PathBuf, Arc<ReplayCache>>>,
    provider: Mutex<Option<Arc<dyn CompletionProvider>>>,
}

impl Default for Gateways {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateways {
    /// Providers are built from the environment on first use.
    pub fn new() -> Self {
        Self {
            caches: Mutex::new(HashMap::new()),
            provider: Mutex::new(None),
        }
    }

    pub fn with_provider(provider: Arc<dyn CompletionProvider>) -> Self {
        Self {
            caches: Mutex::new(HashMap::new()),
            provider: Mutex::new(Some(provider)),
        }
    }

    fn cache(&self, path: &Path) -> Result<Arc<ReplayCache>> {
        let mut caches = self.caches.lock().expect("cache map lock");
        if let Some(c) = caches.get(path) {
            return Ok(c.clone());
        }
        let cache = Arc::new(ReplayCache::open(path)?);
        caches.insert(path.to_path_buf(), cache.clone());
        Ok(cache)
    }

    fn provider(&self) -> Result<Arc<dyn CompletionProvider>> {
        let mut slot = self.provider.lock().expect("provider lock");
        if let Some(p) = slot.as_ref() {
            return Ok(p.clone());
        }
        let p: Arc<dyn CompletionProvider> = Arc::new(HttpProvider::from_env()?);
        *slot = Some(p.clone());
        Ok(p)
    }

    pub fn for_config(&self, config: &ExperimentConfig) -> Result<Gateway> {
        let cache_path = || {
            config
                .cache_file
                .as_deref()
                .ok_or_else(|| RunnerError::InvalidConfig(format!("policy {} needs cache_file", config.policy)))
        };
        let gateway = match config.policy {
            Policy::Replay => Gateway::replay(self.cache(cache_path()?)?),
            Policy::Record => Gateway::record(self.cache(cache_path()?)?, self.provider()?),
            Policy::Live => Gateway::live(self.provider()?),
        };
        Ok(gateway.with_max_in_flight(config.workers))
    }
}

/// Everything decided for one (seed, test example) before the model is called.
#[derive(Debug, Clone)]
pub struct PlannedExample {
    pub seed: u64,
    pub index: usize,
    pub demos: DemonstrationSet,
    pub prompt: PromptText,
    pub tokens: usize,
    pub request: CompletionRequest,
}

#[derive(Debug, Clone)]
pub enum Planned {
    Ready(Box<PlannedExample>),
    Skip(u64, SkipRecord),
}

fn load_contexts(files: &BTreeMap<String, PathBuf>, rows: usize) -> Result<HashMap<String, DatabaseContext>> {
    files
        .par_iter()
        .map(|(db_id, path)| Ok((db_id.clone(), DatabaseContext::load(path, rows)?)))
        .collect()
}

/// Demonstration pool of the cross-domain setting.
struct CrossPool {
    training: BTreeMap<String, Vec<Example>>,
    eligible: Vec<String>,
    contexts: HashMap<String, DatabaseContext>,
}

fn cross_pool(config: &ExperimentConfig, rows: usize, counter: &dyn TokenCounter) -> Result<CrossPool> {
    let train_file = config.train_file.as_deref().expect("validated cross-domain config has train_file");
    let train = load_dataset(train_file, config.train_db_root())?;
    let contexts = load_contexts(&train.db_files, rows)?;
    let ordered: Vec<DatabaseContext> = train.db_files.keys().map(|id| contexts[id].clone()).collect();
    let spec = config.spec();
    let kept: Vec<String> = match &config.filter_cache_dir {
        Some(dir) => filter_demo_databases_cached(&ordered, &spec, counter, config.token_limit, dir)?,
        None => filter_demo_databases(&ordered, &spec, counter, config.token_limit)
            .into_iter()
            .map(|db| db.schema.db_id.clone())
            .collect(),
    };
    let training = train.by_database();
    let eligible: Vec<String> = kept
        .into_iter()
        .filter(|db| training.get(db).is_some_and(|ex| ex.len() >= config.k))
        .collect();
    log::info!(
        "{} of {} training databases are eligible demonstration databases",
        eligible.len(),
        train.db_files.len()
    );
    Ok(CrossPool {
        training,
        eligible,
        contexts,
    })
}

fn leaks(test: &Example, demos: &DemonstrationSet, prompt: &PromptText) -> Result<bool> {
    let key = template_key(&test.sql).map_err(|source| SamplerError::Template {
        sql: test.sql.clone(),
        source,
    })?;
    for e in demos.examples() {
        if e.nlq == test.nlq || template_key(&e.sql).ok().as_ref() == Some(&key) {
            return Ok(true);
        }
    }
    let question = prompt.sections.last().map_or(prompt.text.len(), |s| s.start);
    Ok(prompt.text[..question].contains(&format!("Question: {}\n", test.nlq)))
}

#[allow(clippy::too_many_arguments)]
fn plan(
    config: &ExperimentConfig,
    dataset: &Dataset,
    contexts: &HashMap<String, DatabaseContext>,
    cross: Option<&CrossPool>,
    counter: &dyn TokenCounter,
    seed: u64,
    index: usize,
) -> Result<Planned> {
    let test = &dataset.examples[index];
    let example_id = index.to_string();
    let spec = config.spec();
    let no_demo_dbs = HashMap::new();
    let (demos, demo_dbs) = match config.setting {
        Setting::ZeroShot => (DemonstrationSet::default(), &no_demo_dbs),
        Setting::SingleDomain => {
            // Leave-one-out over the test database; identical questions are never shown.
            let pool: Vec<Example> = dataset
                .examples
                .iter()
                .enumerate()
                .filter(|(j, e)| *j != index && e.db_id == test.db_id && e.nlq != test.nlq)
                .map(|(_, e)| e.clone())
                .collect();
            match sample_single_domain(test, &pool, config.n, seed, index as u64) {
                Ok(d) => (d, &no_demo_dbs),
                Err(SamplerError::EmptyEligiblePool { .. }) => {
                    return Ok(Planned::Skip(
                        seed,
                        SkipRecord {
                            example_id,
                            reason: "no eligible in-domain demonstrations".into(),
                        },
                    ))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Setting::CrossDomain => {
            let pool = cross.expect("cross-domain pool is loaded");
            let d = sample_cross_domain(
                &pool.training,
                &pool.eligible,
                Some(&test.db_id),
                config.m,
                config.k,
                seed,
                index as u64,
            )?;
            (d, &pool.contexts)
        }
    };
    let prompt = assemble_prompt(&spec, &contexts[&test.db_id], &test.nlq, &demos, demo_dbs)?;
    if config.setting == Setting::SingleDomain && leaks(test, &demos, &prompt)? {
        return Err(RunnerError::Leakage { example_id });
    }
    let request = CompletionRequest {
        prompt: prompt.text.clone(),
        stop_sequences: default_stop_sequences(),
        max_tokens: config.max_tokens,
        temperature: config.temperature,
        model_name: config.model_name.clone(),
    };
    Ok(Planned::Ready(Box::new(PlannedExample {
        seed,
        index,
        tokens: counter.count(&prompt.text),
        demos,
        prompt,
        request,
    })))
}

fn dump_prompt(dir: &Path, job: &PlannedExample) -> Result<()> {
    let dir = dir.join(format!("seed{}", job.seed));
    fs::create_dir_all(&dir).map_err(|source| RunnerError::Io {
        path: dir.clone(),
        source,
    })?;
    let path = dir.join(format!("{:05}.txt", job.index));
    fs::write(&path, &job.prompt.text).map_err(|source| RunnerError::Io { path, source })
}

/// Runs one matrix cell with `gateway`.
/// The loaded inputs of one matrix cell.
pub struct Prepared {
    config: ExperimentConfig,
    dataset: Dataset,
    contexts: HashMap<String, DatabaseContext>,
    cross: Option<CrossPool>,
    counter: Arc<dyn TokenCounter>,
}

impl Prepared {
    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Samples demonstrations and assembles the prompt of test example `index` under `seed`.
    pub fn plan(&self, seed: u64, index: usize) -> Result<Planned> {
        if index >= self.dataset.examples.len() {
            return Err(RunnerError::InvalidConfig(format!(
                "example index {index} out of range ({} examples)",
                self.dataset.examples.len()
            )));
        }
        plan(
            &self.config,
            &self.dataset,
            &self.contexts,
            self.cross.as_ref(),
            self.counter.as_ref(),
            seed,
            index,
        )
    }
}

/// Validates `config` and loads its datasets and database contexts.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let config = config.clone().validated()?;
    let counter = tokenizer(&config.tokenizer)?;
    let mut dataset = load_dataset(&config.examples_file, &config.db_root)?;
    if let Some(limit) = config.limit {
        dataset.examples.truncate(limit);
    }
    let rows = config.content_format.rows().unwrap_or(DEFAULT_ROWS);
    let contexts = load_contexts(&dataset.db_files, rows)?;
    let cross = match config.setting {
        Setting::CrossDomain => Some(cross_pool(&config, rows, counter.as_ref())?),
        _ => None,
    };
    Ok(Prepared {
        config,
        dataset,
        contexts,
        cross,
        counter,
    })
}

pub fn run_experiment(config: &ExperimentConfig, gateway: &Gateway) -> Result<RunReport> {
    let prepared = prepare(config)?;
    let Prepared {
        ref config,
        ref dataset,
        ref counter,
        ..
    } = prepared;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| RunnerError::InvalidConfig(e.to_string()))?;

    let planned: Vec<Planned> = pool.install(|| {
        config
            .seeds
            .iter()
            .flat_map(|&seed| (0..dataset.examples.len()).map(move |i| (seed, i)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(seed, i)| prepared.plan(seed, i))
            .collect::<Result<Vec<_>>>()
    })?;

    if let Some(dir) = &config.dump_prompts {
        for p in &planned {
            if let Planned::Ready(job) = p {
                dump_prompt(dir, job)?;
            }
        }
    }

    if gateway.policy() == Policy::Replay {
        let cache = gateway.cache().expect("replay gateway has a cache");
        let missing: BTreeSet<String> = planned
            .iter()
            .filter_map(|p| match p {
                Planned::Ready(j) => Some(j.request.fingerprint()),
                Planned::Skip(..) => None,
            })
            .filter(|fp| !cache.contains(fp))
            .collect();
        if !missing.is_empty() {
            return Err(RunnerError::IncompleteReplayCache {
                missing: missing.into_iter().collect(),
            });
        }
    }

    let cue = config.mode.cue();
    let scored: Vec<std::result::Result<(u64, ExampleRecord), (u64, SkipRecord)>> = pool.install(|| {
        planned
            .into_par_iter()
            .map(|p| {
                let job = match p {
                    Planned::Ready(job) => job,
                    Planned::Skip(seed, s) => return Ok(Err((seed, s))),
                };
                let test = &dataset.examples[job.index];
                let response = gateway.complete(&job.request)?;
                let stitched = stitch_sql(cue, &response.text, &job.request.stop_sequences);
                let outcome = execution_accuracy(
                    &job.index.to_string(),
                    &stitched.sql,
                    &test.sql,
                    &dataset.db_files[&test.db_id],
                    config.timeout_ms,
                )?;
                Ok(Ok((
                    job.seed,
                    ExampleRecord {
                        example_id: job.index.to_string(),
                        db_id: test.db_id.clone(),
                        question: test.nlq.clone(),
                        gold: test.sql.clone(),
                        prediction: stitched.sql,
                        degenerate: stitched.degenerate,
                        prompt_tokens: job.tokens,
                        fingerprint: job.request.fingerprint(),
                        outcome,
                    },
                )))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut seeds: Vec<SeedReport> = config
        .seeds
        .iter()
        .map(|&seed| SeedReport {
            seed,
            accuracy: 0.0,
            mean_tokens: 0.0,
            examples: Vec::new(),
            skipped: Vec::new(),
        })
        .collect();
    for item in scored {
        match item {
            Ok((seed, rec)) => seed_slot(&mut seeds, seed).examples.push(rec),
            Err((seed, skip)) => seed_slot(&mut seeds, seed).skipped.push(skip),
        }
    }
    for s in &mut seeds {
        let n = s.examples.len();
        if n > 0 {
            s.accuracy = s.examples.iter().filter(|e| e.outcome.matched).count() as f64 / n as f64;
            s.mean_tokens = mean(s.examples.iter().map(|e| e.prompt_tokens as f64));
        }
    }
    Ok(RunReport {
        construction: config.spec().construction_label(),
        tokenizer: counter.name().to_string(),
        mean_accuracy: mean(seeds.iter().map(|s| s.accuracy)),
        mean_tokens: mean(seeds.iter().map(|s| s.mean_tokens)),
        seeds,
        config: config.clone(),
    })
}

fn seed_slot(seeds: &mut [SeedReport], seed: u64) -> &mut SeedReport {
    seeds.iter_mut().find(|s| s.seed == seed).expect("seed listed in config")
}

/// Result of one matrix cell; a failing cell does not stop the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub label: String,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

pub fn run_matrix(cells: &[ExperimentConfig], gateways: &Gateways) -> Vec<CellOutcome> {
    cells
        .iter()
        .map(|cfg| {
            let label = cfg.cell_label();
            let result = gateways.for_config(cfg).and_then(|gw| run_experiment(cfg, &gw));
            match result {
                Ok(report) => CellOutcome {
                    label,
                    report: Some(report),
                    error: None,
                },
                Err(e) => {
                    log::error!("cell {label} failed: {e}");
                    CellOutcome {
                        label,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

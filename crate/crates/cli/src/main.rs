//! `sqlprompt`: inspect databases, print prompts and demonstrations, run
//! experiment matrices and summarize their reports.

use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sqlprompt_core::catalog::DatabaseContext;
use sqlprompt_core::runner::tables::{all_tables, mcnemar_table, Table};
use sqlprompt_core::runner::{
    cells_from_table, emit_report, load_config, load_reports, prepare, run_matrix, ExperimentConfig, Gateways,
    Planned, PlannedExample, ReportFormat, RunReport,
};

#[derive(Parser)]
#[command(name = "sqlprompt", version, about = "Text-to-SQL prompt construction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the schema and sampled rows of one database as JSON.
    Introspect {
        #[arg(long)]
        db: PathBuf,
        /// Rows sampled per table.
        #[arg(long, default_value_t = 3)]
        rows: usize,
    },
    /// Print the assembled prompt for one test example.
    Prompt(Target),
    /// Print the demonstrations chosen for one test example as JSON.
    Sample(Target),
    /// Run every cell of a config and write the reports.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Report path; `.json` or `.csv` selects the format. Repeatable.
        #[arg(long, required = true)]
        out: Vec<PathBuf>,
    },
    /// Print the result tables of JSON reports as Markdown.
    Report {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Also write one CSV file per table into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Pairwise McNemar tests between comparable cells of JSON reports.
    Mcnemar {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Args)]
struct Target {
    #[command(flatten)]
    config: ConfigArgs,
    /// Matrix cell of the config file.
    #[arg(long, default_value_t = 0)]
    cell: usize,
    /// Position of the test example in the examples file.
    #[arg(long)]
    index: usize,
    /// Seed for the demonstration draw; defaults to the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Config file plus per-field overrides; flag names follow the config keys.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    schema_format: Option<String>,
    #[arg(long)]
    content_format: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    tokenizer: Option<String>,
    #[arg(long)]
    examples_file: Option<PathBuf>,
    #[arg(long)]
    db_root: Option<PathBuf>,
    #[arg(long)]
    train_file: Option<PathBuf>,
    #[arg(long)]
    train_db_root: Option<PathBuf>,
    #[arg(long)]
    cache_file: Option<PathBuf>,
    #[arg(long)]
    filter_cache_dir: Option<PathBuf>,
    /// Write each prompt to its own text file in this directory.
    #[arg(long)]
    dump_prompts: Option<PathBuf>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    token_limit: Option<usize>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    bin_width: Option<usize>,
}

fn int(v: impl TryInto<i64>) -> Result<toml::Value> {
    v.try_into().map(toml::Value::Integer).map_err(|_| anyhow::anyhow!("value out of range"))
}

/// Command-line paths are relative to the working directory, not the config file.
fn path(p: &Path) -> Result<toml::Value> {
    let p = std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))?;
    Ok(toml::Value::String(p.to_string_lossy().into_owned()))
}

impl ConfigArgs {
    fn overrides(&self) -> Result<toml::Table> {
        let mut t = toml::Table::new();
        let strings = [
            ("setting", &self.setting),
            ("schema_format", &self.schema_format),
            ("content_format", &self.content_format),
            ("mode", &self.mode),
            ("model_name", &self.model_name),
            ("policy", &self.policy),
            ("tokenizer", &self.tokenizer),
        ];
        for (key, value) in strings {
            if let Some(v) = value {
                t.insert(key.into(), toml::Value::String(v.clone()));
            }
        }
        let paths = [
            ("examples_file", &self.examples_file),
            ("db_root", &self.db_root),
            ("train_file", &self.train_file),
            ("train_db_root", &self.train_db_root),
            ("cache_file", &self.cache_file),
            ("filter_cache_dir", &self.filter_cache_dir),
            ("dump_prompts", &self.dump_prompts),
        ];
        for (key, value) in paths {
            if let Some(v) = value {
                t.insert(key.into(), path(v)?);
            }
        }
        let counts = [
            ("n", self.n),
            ("m", self.m),
            ("k", self.k),
            ("token_limit", self.token_limit),
            ("limit", self.limit),
            ("workers", self.workers),
            ("bin_width", self.bin_width),
        ];
        for (key, value) in counts {
            if let Some(v) = value {
                t.insert(key.into(), int(v)?);
            }
        }
        if let Some(v) = self.timeout_ms {
            t.insert("timeout_ms".into(), int(v)?);
        }
        if let Some(v) = self.max_tokens {
            t.insert("max_tokens".into(), int(v)?);
        }
        if let Some(v) = self.temperature {
            t.insert("temperature".into(), toml::Value::Float(v));
        }
        if let Some(seeds) = &self.seeds {
            let values = seeds.iter().map(|&s| int(s)).collect::<Result<Vec<_>>>()?;
            t.insert("seeds".into(), toml::Value::Array(values));
        }
        Ok(t)
    }

    fn cells(&self, overrides: &toml::Table) -> Result<Vec<ExperimentConfig>> {
        Ok(match &self.config {
            Some(file) => load_config(file, overrides)?,
            None => cells_from_table(&toml::Table::new(), overrides)?,
        })
    }
}

impl Target {
    /// Plans the requested example. Nothing is sent to a model, so the
    /// policy defaults to `live` and no cache file is needed.
    fn plan(&self) -> Result<Option<PlannedExample>> {
        let mut overrides = self.config.overrides()?;
        if self.config.policy.is_none() {
            overrides.insert("policy".into(), toml::Value::String("live".into()));
        }
        let mut cells = self.config.cells(&overrides)?;
        if self.cell >= cells.len() {
            bail!("cell {} out of range; the config has {} cell(s)", self.cell, cells.len());
        }
        let config = cells.swap_remove(self.cell);
        let seed = self.seed.unwrap_or(config.seeds[0]);
        let prepared = prepare(&config)?;
        match prepared.plan(seed, self.index)? {
            Planned::Ready(p) => Ok(Some(*p)),
            Planned::Skip(_, skip) => {
                eprintln!("example {} skipped: {}", skip.example_id, skip.reason);
                Ok(None)
            }
        }
    }
}

fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if out.is_terminal() {
        out.write_all(b"\n")?;
    }
    Ok(out.flush()?)
}

fn report_format(path: &Path) -> Result<ReportFormat> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    ext.parse()
        .with_context(|| format!("cannot infer report format of {}", path.display()))
}

fn read_reports(inputs: &[PathBuf]) -> Result<Vec<RunReport>> {
    let mut reports = Vec::new();
    for input in inputs {
        reports.extend(load_reports(input).with_context(|| format!("reading {}", input.display()))?);
    }
    Ok(reports)
}

fn file_stem(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn write_tables(tables: &[Table], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, table) in tables.iter().enumerate() {
        let file = dir.join(format!("{:02}_{}.csv", i + 1, file_stem(&table.title)));
        fs::write(&file, table.to_csv()?).with_context(|| format!("writing {}", file.display()))?;
    }
    Ok(())
}

fn markdown(tables: &[Table]) -> String {
    tables.iter().map(Table::to_markdown).collect::<Vec<_>>().join("\n")
}

/// Returns whether the command fully succeeded.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Introspect { db, rows } => {
            let context = DatabaseContext::load(&db, rows)?;
            println!("{}", serde_json::to_string_pretty(&context)?);
            Ok(true)
        }
        Command::Prompt(target) => match target.plan()? {
            Some(p) => print(&p.prompt.text).map(|_| true),
            None => Ok(false),
        },
        Command::Sample(target) => match target.plan()? {
            Some(p) => {
                println!("{}", serde_json::to_string_pretty(&p.demos)?);
                Ok(true)
            }
            None => Ok(false),
        },
        Command::Run { config, out } => {
            let formats = out.iter().map(|p| report_format(p)).collect::<Result<Vec<_>>>()?;
            let cells = config.cells(&config.overrides()?)?;
            let outcomes = run_matrix(&cells, &Gateways::new());
            let mut reports = Vec::new();
            for o in outcomes.iter() {
                match (&o.report, &o.error) {
                    (Some(r), _) => {
                        println!("{}\tEX {:.1}\ttokens {:.1}", o.label, 100.0 * r.mean_accuracy, r.mean_tokens);
                        reports.push(r.clone());
                    }
                    (None, error) => eprintln!("{}\tfailed: {}", o.label, error.as_deref().unwrap_or("unknown error")),
                }
            }
            for (path, format) in out.iter().zip(formats) {
                emit_report(&reports, format, path).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(reports.len() == outcomes.len())
        }
        Command::Report { input, out_dir } => {
            let tables = all_tables(&read_reports(&input)?)?;
            print!("{}", markdown(&tables));
            if let Some(dir) = out_dir {
                write_tables(&tables, &dir)?;
            }
            Ok(true)
        }
        Command::Mcnemar { input, alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                bail!("alpha must lie in (0, 1)");
            }
            let table = mcnemar_table(&read_reports(&input)?, alpha)?;
            print!("{}", table.to_markdown());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Result tables assembled from run reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::eval::{mcnemar_test, EvalOutcome};
use crate::prompt::{ContentFormat, NormalizationMode, SchemaFormat, Setting};

use super::run::RunReport;
use super::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        Self {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n| {} |\n|", self.title, self.headers.join(" | "));
        out.push_str(&"---|".repeat(self.headers.len()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Accuracy as a percentage with one decimal.
pub fn ex_percent(accuracy: f64) -> String {
    format!("{:.1}", accuracy * 100.0)
}

fn group_label(schema: SchemaFormat, content: ContentFormat) -> &'static str {
    match (schema.carries_relationships(), content) {
        (false, _) => "Table Schema",
        (true, ContentFormat::NoContent) => "+Relationship",
        (true, _) => "+Relationship+Content",
    }
}

/// Schema format, content kind and content rows, in canonical order.
type ConstructionKey = (usize, u8, usize);

/// Row order: schema formats, then content formats, in their canonical order.
fn construction_key(r: &RunReport) -> ConstructionKey {
    let c = &r.config;
    let schema = SchemaFormat::ALL.iter().position(|f| *f == c.schema_format).unwrap_or(usize::MAX);
    let content = match c.content_format {
        ContentFormat::NoContent => 0,
        ContentFormat::InsertRow(_) => 1,
        ContentFormat::SelectRow(_) => 2,
        ContentFormat::SelectCol(_) => 3,
    };
    (schema, content, c.content_format.rows().unwrap_or(0))
}

fn find(reports: &[&RunReport], mode: NormalizationMode) -> Option<f64> {
    reports.iter().find(|r| r.config.mode == mode).map(|r| r.mean_accuracy)
}

/// Zero-shot accuracy and prompt length per construction, unnormalized and normalized.
pub fn zero_shot_table(reports: &[RunReport]) -> Table {
    let mut t = Table::new("Zero-shot", &["Group", "Construction", "# Tokens (U)", "# Tokens (N)", "EX (U)", "EX (N)"]);
    let mut rows: BTreeMap<(usize, u8, usize), Vec<&RunReport>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.config.setting == Setting::ZeroShot) {
        rows.entry(construction_key(r)).or_default().push(r);
    }
    for group in rows.values() {
        let c = &group[0].config;
        let tokens = |mode| {
            group
                .iter()
                .find(|r| r.config.mode == mode)
                .map_or("-".to_string(), |r| format!("{:.0}", r.mean_tokens))
        };
        let ex = |mode| find(group, mode).map_or("-".to_string(), ex_percent);
        t.rows.push(vec![
            group_label(c.schema_format, c.content_format).to_string(),
            group[0].construction.clone(),
            tokens(NormalizationMode::Unnormalized),
            tokens(NormalizationMode::Normalized),
            ex(NormalizationMode::Unnormalized),
            ex(NormalizationMode::Normalized),
        ]);
    }
    t
}

/// Accuracy by construction (rows) and shot count N (columns) for one setting.
/// The zero-shot cell of the same construction fills the N = 0 column.
pub fn shots_table(reports: &[RunReport], setting: Setting, mode: NormalizationMode) -> Table {
    let in_scope = |r: &&RunReport| {
        r.config.mode == mode && (r.config.setting == setting || r.config.setting == Setting::ZeroShot)
    };
    let ns: BTreeSet<usize> = reports.iter().filter(in_scope).map(|r| r.config.n).collect();
    let mut headers = vec!["Construction".to_string()];
    headers.extend(ns.iter().map(|n| format!("{n}-shot")));
    let mut t = Table {
        title: format!("{setting} ({})", mode.short()),
        headers,
        rows: Vec::new(),
    };
    let mut rows: BTreeMap<(usize, u8, usize), BTreeMap<usize, &RunReport>> = BTreeMap::new();
    for r in reports.iter().filter(in_scope) {
        if setting == Setting::CrossDomain && r.config.setting == Setting::CrossDomain && r.config.m != 1 {
            // Cross-domain shot tables use a single demonstration database.
            continue;
        }
        rows.entry(construction_key(r)).or_default().insert(r.config.n, r);
    }
    for cells in rows.values() {
        if !cells.values().any(|r| r.config.setting == setting) {
            continue;
        }
        let mut row = vec![cells.values().next().expect("non-empty row").construction.clone()];
        row.extend(ns.iter().map(|n| cells.get(n).map_or("-".to_string(), |r| ex_percent(r.mean_accuracy))));
        t.rows.push(row);
    }
    t
}

/// Cross-domain accuracy over databases M (rows) and examples per database K (columns).
pub fn heatmaps(reports: &[RunReport]) -> Vec<Table> {
    let mut groups: BTreeMap<(ConstructionKey, &str), Vec<&RunReport>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.config.setting == Setting::CrossDomain) {
        groups.entry((construction_key(r), r.config.mode.short())).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((_, mode), group) in groups {
        let ms: BTreeSet<usize> = group.iter().map(|r| r.config.m).collect();
        let ks: BTreeSet<usize> = group.iter().map(|r| r.config.k).collect();
        let mut headers = vec!["M \\ K".to_string()];
        headers.extend(ks.iter().map(|k| k.to_string()));
        let mut t = Table {
            title: format!("{} ({mode})", group[0].construction),
            headers,
            rows: Vec::new(),
        };
        for m in &ms {
            let mut row = vec![m.to_string()];
            for k in &ks {
                let cell = group.iter().find(|r| r.config.m == *m && r.config.k == *k);
                row.push(cell.map_or("-".to_string(), |r| ex_percent(r.mean_accuracy)));
            }
            t.rows.push(row);
        }
        out.push(t);
    }
    out
}

/// One point per cross-domain cell: mean prompt length against accuracy.
pub fn length_scatter(reports: &[RunReport]) -> Table {
    let mut t = Table::new(
        "Prompt length and accuracy",
        &["Construction", "Mode", "M", "K", "Mean tokens", "EX"],
    );
    for r in reports.iter().filter(|r| r.config.setting == Setting::CrossDomain) {
        t.rows.push(vec![
            r.construction.clone(),
            r.config.mode.short().to_string(),
            r.config.m.to_string(),
            r.config.k.to_string(),
            format!("{:.1}", r.mean_tokens),
            ex_percent(r.mean_accuracy),
        ]);
    }
    t
}

/// Outcomes of every seed, keyed `seed/example`.
fn pooled_outcomes(r: &RunReport) -> Vec<EvalOutcome> {
    r.seeds
        .iter()
        .flat_map(|s| {
            s.examples.iter().map(move |e| EvalOutcome {
                example_id: format!("{}/{}", s.seed, e.example_id),
                ..e.outcome.clone()
            })
        })
        .collect()
}

/// Pairwise McNemar tests between constructions sharing setting, shots, model and mode.
pub fn mcnemar_table(reports: &[RunReport], alpha: f64) -> Result<Table> {
    let mut t = Table::new(
        "McNemar",
        &["Prompt 1", "Prompt 2", "Model", "Normalization", "Setting", "N", "b", "c", "p", "Significant"],
    );
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            let (ca, cb) = (&a.config, &b.config);
            let comparable = ca.setting == cb.setting
                && (ca.n, ca.m, ca.k) == (cb.n, cb.m, cb.k)
                && ca.model_name == cb.model_name
                && ca.mode == cb.mode
                && ca.seeds == cb.seeds
                && a.construction != b.construction;
            if !comparable {
                continue;
            }
            let r = mcnemar_test(&pooled_outcomes(a), &pooled_outcomes(b))?;
            t.rows.push(vec![
                a.construction.clone(),
                b.construction.clone(),
                ca.model_name.clone(),
                ca.mode.short().to_string(),
                ca.setting.to_string(),
                ca.n.to_string(),
                r.b.to_string(),
                r.c.to_string(),
                format!("{:.4}", r.p_value),
                if r.p_value < alpha { "yes" } else { "no" }.to_string(),
            ]);
        }
    }
    Ok(t)
}

/// Every table the reports support, in presentation order.
pub fn all_tables(reports: &[RunReport]) -> Result<Vec<Table>> {
    let mut out = Vec::new();
    if reports.iter().any(|r| r.config.setting == Setting::ZeroShot) {
        out.push(zero_shot_table(reports));
    }
    for setting in [Setting::SingleDomain, Setting::CrossDomain] {
        for mode in [NormalizationMode::Unnormalized, NormalizationMode::Normalized] {
            if reports.iter().any(|r| r.config.setting == setting && r.config.mode == mode) {
                out.push(shots_table(reports, setting, mode));
            }
        }
    }
    if reports.iter().any(|r| r.config.setting == Setting::CrossDomain) {
        out.extend(heatmaps(reports));
        out.push(length_scatter(reports));
    }
    let mc = mcnemar_table(reports, 0.05)?;
    if !mc.rows.is_empty() {
        out.push(mc);
    }
    Ok(out)
}

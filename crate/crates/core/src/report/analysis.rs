//! Turns a run directory into metrics, tests, charts and a markdown report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::chart::{render_distribution_chart, ChartGroup, ChartScale, ChartSpec};
use super::jsonl::{read_jsonl, write_jsonl};
use super::table::{
    comparison_table, markdown_attribute_table, markdown_comparison_table, metrics_table, AttributeSection,
};
use super::{files, ReportError};
use crate::domain::{Condition, FixedAttribute, Intent, IntentCatalog, Transcript};
use crate::metrics::{reports_by_condition, MetricOptions, MetricsReport};
use crate::orchestrator::{PipelineMode, RunConfig};
use crate::stats::{
    compare_groups, occupation_intent_anova, persona_avg_turns, persona_success_rates, two_sample_t, IntentTest,
    StatResult, StatsError, TVariant,
};

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub personas_file: PathBuf,
    pub personas: usize,
    pub transcripts: usize,
    pub aborted: usize,
    #[serde(default)]
    pub strict_replay: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn arm_label(&self) -> &'static str {
        match self.config.pipeline {
            PipelineMode::Monolithic => "monolithic",
            PipelineMode::PlannerResponder { strategy_enabled: false } => "planner/responder, strategy off",
            PipelineMode::PlannerResponder { strategy_enabled: true } => "planner/responder, strategy on",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisOptions {
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub t_variant: TVariant,
    #[serde(default)]
    pub chart_scale: ChartScale,
}

/// A test result or the reason it could not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestEntry<T> {
    Done(T),
    Skipped { skipped: String },
}

impl<T> TestEntry<T> {
    fn from(r: Result<T, StatsError>) -> Self {
        match r {
            Ok(v) => TestEntry::Done(v),
            Err(e) => TestEntry::Skipped { skipped: e.to_string() },
        }
    }
}

impl TestEntry<StatResult> {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            TestEntry::Done(r) => r.p_value,
            TestEntry::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub attribute: FixedAttribute,
    /// Observation unit for every test.
    pub unit: String,
    pub groups: Vec<String>,
    pub personas_per_group: Vec<usize>,
    pub success_rate: TestEntry<StatResult>,
    pub avg_turns_successful: TestEntry<StatResult>,
    pub intent_anova: TestEntry<Vec<IntentTest>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub options: AnalysisOptions,
    pub attributes: Vec<AttributeStats>,
}

#[derive(Debug, Clone)]
pub struct AttributeAnalysis {
    pub attribute: FixedAttribute,
    pub reports: Vec<(Condition, MetricsReport)>,
    pub stats: AttributeStats,
    pub chart: ChartSpec,
}

#[derive(Debug, Clone)]
pub struct RunAnalysis {
    pub manifest: RunManifest,
    pub attributes: Vec<AttributeAnalysis>,
    pub options: AnalysisOptions,
}

impl RunAnalysis {
    pub fn reports(&self) -> impl Iterator<Item = &(Condition, MetricsReport)> {
        self.attributes.iter().flat_map(|a| a.reports.iter())
    }
}

pub fn attribute_title(a: FixedAttribute) -> &'static str {
    match a {
        FixedAttribute::Gender => "Gender",
        FixedAttribute::Age => "Age",
        FixedAttribute::Occupation => "Occupation",
    }
}

/// Reads `run.json` and `transcripts.jsonl`; any unreadable line is an error.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<Transcript>), ReportError> {
    let manifest_path = dir.join(files::RUN_MANIFEST);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| ReportError::io(&manifest_path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| ReportError::Parse { path: manifest_path.clone(), line: e.line(), message: e.to_string() })?;
    let tpath = dir.join(files::TRANSCRIPTS);
    let transcripts = read_jsonl::<Transcript>(&tpath)?.into_strict(&tpath)?;
    if transcripts.is_empty() {
        return Err(ReportError::Empty(tpath));
    }
    Ok((manifest, transcripts))
}

fn chart_intents(catalog: &IntentCatalog, reports: &[(Condition, MetricsReport)]) -> Vec<Intent> {
    let mut intents: Vec<Intent> = catalog.intents().to_vec();
    let extra: BTreeSet<&Intent> = reports
        .iter()
        .flat_map(|(_, r)| r.intent_distribution.keys().chain(r.success_intent_distribution.keys()))
        .filter(|i| !catalog.contains(i))
        .collect();
    intents.extend(extra.into_iter().cloned());
    intents
}

pub fn analyze_transcripts(manifest: RunManifest, transcripts: &[Transcript], options: AnalysisOptions) -> RunAnalysis {
    let mut by_attribute: BTreeMap<FixedAttribute, Vec<Transcript>> = BTreeMap::new();
    for t in transcripts {
        by_attribute.entry(t.condition.attribute()).or_default().push(t.clone());
    }
    let catalog = &manifest.config.intents;
    let attributes = by_attribute
        .into_iter()
        .map(|(attribute, ts)| {
            let reports = reports_by_condition(&ts, options.metrics);
            let success = persona_success_rates(&ts);
            let turns = persona_avg_turns(&ts);
            let groups: Vec<String> = success.keys().map(|c| c.label().to_string()).collect();
            let personas_per_group = success.values().map(Vec::len).collect();
            let success_groups: Vec<&Vec<f64>> = success.values().collect();
            let turn_groups: Vec<Vec<f64>> = success.keys().map(|c| turns.get(c).cloned().unwrap_or_default()).collect();
            let stats = AttributeStats {
                attribute,
                unit: "persona".into(),
                groups,
                personas_per_group,
                success_rate: TestEntry::from(compare_groups(&success_groups, options.t_variant)),
                avg_turns_successful: TestEntry::from(compare_groups(&turn_groups, options.t_variant)),
                intent_anova: TestEntry::from(occupation_intent_anova(&ts, catalog, options.metrics.chit_chat_breaks_runs)),
            };
            let mut chart = ChartSpec::new(
                format!("Intent distribution by {}", attribute_title(attribute).to_lowercase()),
                chart_intents(catalog, &reports),
                reports
                    .iter()
                    .map(|(c, r)| ChartGroup {
                        label: c.label().to_string(),
                        overall: r.intent_distribution.clone(),
                        success: r.success_intent_distribution.clone(),
                    })
                    .collect(),
            );
            chart.scale = options.chart_scale;
            AttributeAnalysis { attribute, reports, stats, chart }
        })
        .collect();
    RunAnalysis { manifest, attributes, options }
}

pub fn analyze_dir(dir: &Path, options: AnalysisOptions) -> Result<RunAnalysis, ReportError> {
    let (manifest, transcripts) = load_run(dir)?;
    Ok(analyze_transcripts(manifest, &transcripts, options))
}

pub fn chart_path(attribute: FixedAttribute) -> PathBuf {
    Path::new(files::CHARTS_DIR).join(format!("{}.svg", attribute.token()))
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ReportError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| ReportError::io(path, e))
}

fn json_pretty<T: Serialize>(v: &T) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| ReportError::Json(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn stat_row(attribute: &str, metric: &str, r: &TestEntry<StatResult>) -> String {
    match r {
        TestEntry::Done(s) => format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            attribute,
            metric,
            serde_json::to_value(s.test).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            fmt_stat(s.statistic),
            s.df.iter().map(|d| fmt_df(*d)).collect::<Vec<_>>().join(", "),
            fmt_p(s.p_value),
        ),
        TestEntry::Skipped { skipped } => format!("| {attribute} | {metric} | skipped: {skipped} | | | |\n"),
    }
}

fn fmt_stat(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        format!("{v}")
    }
}

fn fmt_df(d: f64) -> String {
    if d.fract() == 0.0 {
        format!("{d:.0}")
    } else {
        format!("{d:.2}")
    }
}

fn fmt_p(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 1e-4 => format!("{p:.2e}"),
        Some(p) => format!("{p:.4}"),
        None => "undefined".into(),
    }
}

pub fn render_report(a: &RunAnalysis) -> Result<String, ReportError> {
    let m = &a.manifest;
    let c = &m.config;
    let mut out = String::from("# Simulation report\n\n## Run\n\n");
    out.push_str(&format!("- pipeline: {}\n", m.arm_label()));
    out.push_str(&format!("- seed: {}\n", c.seed));
    out.push_str(&format!(
        "- personas: {}, conversations per persona: {}, max turns: {}\n",
        m.personas, c.conversations_per_persona, c.max_turns
    ));
    out.push_str(&format!("- transcripts: {} (aborted, excluded: {})\n", m.transcripts, m.aborted));
    out.push_str(&format!("- models: user `{}`, planner `{}`", c.roles.user.model, c.roles.planner.model));
    if let (PipelineMode::PlannerResponder { .. }, Some(r)) = (c.pipeline, &c.roles.responder) {
        out.push_str(&format!(", responder `{}`", r.model));
    }
    out.push_str("\n\n## Metrics\n\n");
    let reports: Vec<Vec<MetricsReport>> =
        a.attributes.iter().map(|x| x.reports.iter().map(|(_, r)| r.clone()).collect()).collect();
    let sections: Vec<AttributeSection<'_>> = a
        .attributes
        .iter()
        .zip(&reports)
        .map(|(x, r)| AttributeSection {
            title: attribute_title(x.attribute).into(),
            reports: r,
            success_p: x.stats.success_rate.p_value(),
        })
        .collect();
    out.push_str(&markdown_attribute_table(&sections));

    out.push_str("\n## Significance tests\n\nObservation unit: one value per persona.\n\n");
    out.push_str("| Attribute | Metric | Test | Statistic | df | p |\n|---|---|---|---|---|---|\n");
    for x in &a.attributes {
        let name = attribute_title(x.attribute);
        out.push_str(&stat_row(name, "success rate", &x.stats.success_rate));
        out.push_str(&stat_row(name, "avg. turns (successful)", &x.stats.avg_turns_successful));
        match &x.stats.intent_anova {
            TestEntry::Done(tests) => {
                for t in tests {
                    let metric = format!("intent share: {} (Bonferroni x{})", t.intent, t.bonferroni_factor);
                    out.push_str(&stat_row(name, &metric, &TestEntry::Done(t.result.clone())));
                }
            }
            TestEntry::Skipped { skipped } => {
                out.push_str(&format!("| {name} | intent shares | skipped: {skipped} | | | |\n"));
            }
        }
    }

    out.push_str("\n## Charts\n\n");
    for x in &a.attributes {
        let p = chart_path(x.attribute);
        out.push_str(&format!("![{}]({})\n", attribute_title(x.attribute), p.display()));
    }
    out.push_str("\n## Manifest\n\n```json\n");
    out.push_str(&json_pretty(m)?);
    out.push_str("```\n");
    Ok(out)
}

/// Writes metrics.csv, metrics.jsonl, stats.json, charts/ and report.md.
pub fn write_run_artifacts(a: &RunAnalysis, out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    let reports: Vec<MetricsReport> = a.reports().map(|(_, r)| r.clone()).collect();

    let p = out.join(files::METRICS_CSV);
    write(&p, &metrics_table(&reports))?;
    written.push(p);

    let p = out.join(files::METRICS_JSONL);
    write_jsonl(&p, &reports)?;
    written.push(p);

    let stats = StatsFile { options: a.options, attributes: a.attributes.iter().map(|x| x.stats.clone()).collect() };
    let p = out.join(files::STATS_JSON);
    write(&p, &json_pretty(&stats)?)?;
    written.push(p);

    for x in &a.attributes {
        let p = out.join(chart_path(x.attribute));
        write(&p, &render_distribution_chart(&x.chart)?)?;
        written.push(p);
    }

    let p = out.join(files::REPORT_MD);
    write(&p, &render_report(a)?)?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub condition: String,
    pub without: Option<MetricsReport>,
    pub with: Option<MetricsReport>,
    /// Per-persona success rates, without vs with.
    pub success_rate_test: TestEntry<StatResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub without: String,
    pub with: String,
    pub rows: Vec<ComparisonRow>,
}

/// Condition-by-condition comparison of two runs, in condition order.
pub fn compare_runs(
    without: &RunAnalysis,
    with: &RunAnalysis,
    without_transcripts: &[Transcript],
    with_transcripts: &[Transcript],
) -> Comparison {
    let a: BTreeMap<Condition, &MetricsReport> = without.reports().map(|(c, r)| (*c, r)).collect();
    let b: BTreeMap<Condition, &MetricsReport> = with.reports().map(|(c, r)| (*c, r)).collect();
    let sa = persona_success_rates(without_transcripts);
    let sb = persona_success_rates(with_transcripts);
    let conditions: BTreeSet<Condition> = a.keys().chain(b.keys()).copied().collect();
    let rows = conditions
        .into_iter()
        .map(|c| {
            let test = match (sa.get(&c), sb.get(&c)) {
                (Some(x), Some(y)) => TestEntry::from(two_sample_t(x, y, without.options.t_variant)),
                _ => TestEntry::Skipped { skipped: "condition missing from one run".into() },
            };
            ComparisonRow {
                condition: c.label().to_string(),
                without: a.get(&c).map(|r| (*r).clone()),
                with: b.get(&c).map(|r| (*r).clone()),
                success_rate_test: test,
            }
        })
        .collect();
    Comparison { without: without.manifest.arm_label().into(), with: with.manifest.arm_label().into(), rows }
}

/// Writes comparison.csv, comparison.md and comparison.json.
pub fn write_comparison(c: &Comparison, out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let rows: Vec<(String, Option<&MetricsReport>, Option<&MetricsReport>)> =
        c.rows.iter().map(|r| (r.condition.clone(), r.without.as_ref(), r.with.as_ref())).collect();
    let mut written = Vec::new();

    let p = out.join(files::COMPARISON_CSV);
    write(&p, &comparison_table(&rows))?;
    written.push(p);

    let mut md = format!("# Comparison\n\nw/o: {}\n\nw/: {}\n\n", c.without, c.with);
    md.push_str(&markdown_comparison_table(&rows));
    md.push_str("\nSuccess-rate tests (per-persona rates, w/o vs w/):\n\n| Sec. | Test | Statistic | df | p |\n|---|---|---|---|---|\n");
    for r in &c.rows {
        let line = stat_row(&r.condition, "", &r.success_rate_test);
        // drop the empty metric column
        md.push_str(&line.replacen(" |  |", " |", 1));
    }
    let p = out.join(files::COMPARISON_MD);
    write(&p, &md)?;
    written.push(p);

    let p = out.join(files::COMPARISON_JSON);
    write(&p, &json_pretty(c)?)?;
    written.push(p);
    Ok(written)
}

// SPDX-License-Identifier: Apache-2.0

//! Benchmark runs and their statistics.
//!
//! A suite runs the pipeline `n` times per case and scores every final RTL
//! against the case's reference testbench, which the pipeline never sees.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diagnostics::{parse_compile_log, parse_sim_log};
use crate::error::{Error, Result};
use crate::llm::LlmGateway;
use crate::model::{
    ArtifactKind, DesignSpec, HdlLanguage, LoopKind, PipelineResult, PipelineStatus, RevisionHistory, SourceArtifact,
};
use crate::orchestrator::{run_pipeline, RunConfig};
use crate::toolchain;

/// Unbiased pass@k: 1 - C(n-c, k) / C(n, k), evaluated as a running
/// product so no binomial is ever formed.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64> {
    if c > n || k == 0 || k > n {
        return Err(Error::Validation(format!("pass@k needs 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")));
    }
    if k == 1 {
        return Ok(c as f64 / n as f64);
    }
    if n - c < k {
        return Ok(1.0);
    }
    // C(n-c, k) / C(n, k) = prod_{i=0}^{k-1} (n-c-i) / (n-i)
    let all_fail: f64 = (0..k).map(|i| (n - c - i) as f64 / (n - i) as f64).product();
    Ok((1.0 - all_fail).clamp(0.0, 1.0))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Relative improvement of a functional pass rate over its baseline, in
/// percent. Undefined for a zero baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaF {
    Value(f64),
    NotApplicable,
}

impl DeltaF {
    pub fn value(self) -> Option<f64> {
        match self {
            DeltaF::Value(v) => Some(v),
            DeltaF::NotApplicable => None,
        }
    }
}

impl fmt::Display for DeltaF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaF::Value(v) => write!(f, "{v:.2}"),
            DeltaF::NotApplicable => f.write_str("N/A"),
        }
    }
}

impl Serialize for DeltaF {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DeltaF::Value(v) => s.serialize_f64(*v),
            DeltaF::NotApplicable => s.serialize_str("N/A"),
        }
    }
}

impl<'de> Deserialize<'de> for DeltaF {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(DeltaF::Value(v)),
            Raw::Text(t) if t == "N/A" => Ok(DeltaF::NotApplicable),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"N/A\", got {t:?}"))),
        }
    }
}

fn check_pct(name: &str, v: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&v) {
        return Err(Error::Validation(format!("{name} {v} is not a percentage in [0, 100]")));
    }
    Ok(())
}

/// `100 * (ours - baseline) / baseline`, rounded to two decimals.
pub fn delta_f(ours_pct: f64, baseline_pct: f64) -> Result<DeltaF> {
    check_pct("ours", ours_pct)?;
    check_pct("baseline", baseline_pct)?;
    if baseline_pct == 0.0 {
        return Ok(DeltaF::NotApplicable);
    }
    Ok(DeltaF::Value(round2(100.0 * (ours_pct - baseline_pct) / baseline_pct)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDelta {
    pub value: DeltaF,
    /// Some entries were undefined, so the true mean is higher.
    pub lower_bound: bool,
}

/// Mean over the defined entries, rounded to two decimals.
pub fn mean_delta(deltas: &[DeltaF]) -> Result<MeanDelta> {
    if deltas.is_empty() {
        return Err(Error::Validation("mean_delta needs at least one entry".into()));
    }
    let defined: Vec<f64> = deltas.iter().filter_map(|d| d.value()).collect();
    let lower_bound = defined.len() < deltas.len();
    if defined.is_empty() {
        return Ok(MeanDelta { value: DeltaF::NotApplicable, lower_bound });
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(MeanDelta { value: DeltaF::Value(round2(mean)), lower_bound })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkCase {
    pub case_id: String,
    pub spec: DesignSpec,
    pub reference_testbench: SourceArtifact,
}

impl BenchmarkCase {
    pub fn new(case_id: impl Into<String>, spec: DesignSpec, reference_tb: impl Into<String>) -> Result<Self> {
        let mut h = RevisionHistory::new(ArtifactKind::Testbench, spec.language());
        let reference_testbench = h.append_revision(reference_tb)?;
        Ok(Self { case_id: case_id.into(), spec, reference_testbench })
    }
}

pub const SPEC_FILE: &str = "spec.txt";

/// Loads every subdirectory of `dir` holding `spec.txt` and
/// `ref_tb.<ext>`, sorted by name.
pub fn load_cases(dir: &Path, language: HdlLanguage) -> Result<Vec<BenchmarkCase>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    let tb_name = format!("ref_tb.{}", language.extension());
    let mut cases = Vec::new();
    for case_dir in dirs {
        let spec_path = case_dir.join(SPEC_FILE);
        let tb_path = case_dir.join(&tb_name);
        if !spec_path.is_file() || !tb_path.is_file() {
            log::warn!("skipping {}: needs {SPEC_FILE} and {tb_name}", case_dir.display());
            continue;
        }
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let id = case_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let spec = DesignSpec::new(read(&spec_path)?, language)?;
        cases.push(BenchmarkCase::new(id, spec, read(&tb_path)?)?);
    }
    if cases.is_empty() {
        return Err(Error::Validation(format!("no benchmark cases found in {}", dir.display())));
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleRecord {
    pub case_id: String,
    pub sample_index: u32,
    pub pipeline_result: PipelineResult,
    pub syntax_pass: bool,
    /// Scored against the reference testbench, not the generated one.
    pub functional_pass: bool,
}

impl SampleRecord {
    pub fn new(
        case_id: impl Into<String>,
        sample_index: u32,
        pipeline_result: PipelineResult,
        syntax_pass: bool,
        functional_pass: bool,
    ) -> Result<Self> {
        if functional_pass && !syntax_pass {
            return Err(Error::InvariantViolation("a sample cannot pass functionally without passing syntax".into()));
        }
        Ok(Self { case_id: case_id.into(), sample_index, pipeline_result, syntax_pass, functional_pass })
    }
}

impl<'de> Deserialize<'de> for SampleRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            case_id: String,
            sample_index: u32,
            pipeline_result: PipelineResult,
            syntax_pass: bool,
            functional_pass: bool,
        }
        let r = Raw::deserialize(d)?;
        SampleRecord::new(r.case_id, r.sample_index, r.pipeline_result, r.syntax_pass, r.functional_pass)
            .map_err(serde::de::Error::custom)
    }
}

/// Mean milliseconds per sample, split by loop and by LLM vs. tool time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub syntax_llm_ms: f64,
    pub syntax_tool_ms: f64,
    pub functional_llm_ms: f64,
    pub functional_tool_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub model_id: String,
    pub language: HdlLanguage,
    pub toolchain: String,
    pub max_syntax_iters: u32,
    pub max_functional_iters: u32,
    pub cases: usize,
    pub workers: usize,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub metadata: ReportMetadata,
    /// Samples per case.
    pub n: u32,
    pub k: u32,
    pub pass_at_1_syntax: f64,
    pub pass_at_1_functional: f64,
    /// Functional pass rate of the baseline this report is compared to.
    #[serde(default)]
    pub baseline_functional: Option<f64>,
    #[serde(default)]
    pub delta_f: Option<DeltaF>,
    pub latency: LatencyBreakdown,
    pub records: Vec<SampleRecord>,
}

impl SuiteReport {
    /// Aggregates records: per-case pass@1 averaged over cases, in percent.
    pub fn from_records(records: Vec<SampleRecord>, n: u32, metadata: ReportMetadata) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("samples per case must be at least 1".into()));
        }
        let mut case_ids: Vec<&str> = records.iter().map(|r| r.case_id.as_str()).collect();
        case_ids.dedup();
        let (mut syn, mut fun) = (0.0, 0.0);
        for id in &case_ids {
            let samples: Vec<&SampleRecord> = records.iter().filter(|r| r.case_id == *id).collect();
            let total = samples.len() as u64;
            syn += pass_at_k(total, samples.iter().filter(|r| r.syntax_pass).count() as u64, 1)?;
            fun += pass_at_k(total, samples.iter().filter(|r| r.functional_pass).count() as u64, 1)?;
        }
        let cases = case_ids.len().max(1) as f64;
        let mut latency = LatencyBreakdown::default();
        for r in &records {
            let (sl, st) = r.pipeline_result.loop_durations(LoopKind::Syntax);
            let (fl, ft) = r.pipeline_result.loop_durations(LoopKind::Functional);
            latency.syntax_llm_ms += sl as f64;
            latency.syntax_tool_ms += st as f64;
            latency.functional_llm_ms += fl as f64;
            latency.functional_tool_ms += ft as f64;
        }
        let samples = records.len().max(1) as f64;
        latency.syntax_llm_ms /= samples;
        latency.syntax_tool_ms /= samples;
        latency.functional_llm_ms /= samples;
        latency.functional_tool_ms /= samples;
        Ok(Self {
            metadata,
            n,
            k: 1,
            pass_at_1_syntax: 100.0 * syn / cases,
            pass_at_1_functional: 100.0 * fun / cases,
            baseline_functional: None,
            delta_f: None,
            latency,
            records,
        })
    }

    /// Records Δ_F against a baseline functional pass rate.
    pub fn attach_baseline(&mut self, baseline_functional_pct: f64) -> Result<DeltaF> {
        let d = delta_f(self.pass_at_1_functional, baseline_functional_pct)?;
        self.baseline_functional = Some(baseline_functional_pct);
        self.delta_f = Some(d);
        Ok(d)
    }
}

fn score_functional(case: &BenchmarkCase, rtl: &SourceArtifact, config: &RunConfig, dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let log = toolchain::compile(&[rtl.clone(), case.reference_testbench.clone()], &config.profile, dir)?;
    if !parse_compile_log(&log, &config.rules).clean {
        return Ok(false);
    }
    let sim = toolchain::simulate(&config.profile, dir)?;
    Ok(parse_sim_log(&sim, &config.rules).all_passed)
}

fn run_sample<F>(case: &BenchmarkCase, sample: u32, config: &RunConfig, gateway_for: &F) -> Result<SampleRecord>
where
    F: Fn(&str, u32) -> Result<LlmGateway> + Sync,
{
    let mut run_config = config.clone();
    run_config.workdir = config.workdir.join(&case.case_id).join(format!("sample-{sample}"));
    // benchmark runs never ask a human
    run_config.interactive = false;

    let outcome =
        gateway_for(&case.case_id, sample).and_then(|gw| run_pipeline(case.spec.clone(), &run_config, gw, None));
    let result = match outcome {
        Ok(r) => r,
        Err(e) => {
            log::error!("{} sample {sample}: {e}", case.case_id);
            let status = match e {
                Error::Llm { .. } | Error::Extraction(_) => PipelineStatus::LlmFailure,
                _ => PipelineStatus::ToolFailure,
            };
            let mut r = PipelineResult::new(status, None, None, Vec::new())?;
            r.failure = Some(e.to_string());
            r
        }
    };
    let syntax_pass = result.syntax_clean && result.final_rtl.is_some();
    let functional_pass = match (&result.final_rtl, syntax_pass) {
        (Some(rtl), true) => {
            score_functional(case, rtl, config, &run_config.workdir.join("score")).unwrap_or_else(|e| {
                log::warn!("{} sample {sample}: scoring failed: {e}", case.case_id);
                false
            })
        }
        _ => false,
    };
    SampleRecord::new(&case.case_id, sample, result, syntax_pass, functional_pass)
}

/// Runs `n_samples` pipelines per case on a pool of `workers` threads.
/// Per-run workspaces live under `config.workdir/<case>/sample-<i>`.
/// Failing runs become failing samples; the suite itself only fails on
/// bad arguments.
pub fn run_suite<F>(
    cases: &[BenchmarkCase],
    config: &RunConfig,
    gateway_for: F,
    n_samples: u32,
    workers: usize,
) -> Result<SuiteReport>
where
    F: Fn(&str, u32) -> Result<LlmGateway> + Sync,
{
    if n_samples == 0 || workers == 0 {
        return Err(Error::Validation("n_samples and workers must be at least 1".into()));
    }
    config.validate()?;
    if let Some(bad) = cases.iter().find(|c| c.spec.language() != config.language) {
        return Err(Error::Validation(format!("case `{}` is not {}", bad.case_id, config.language)));
    }
    let started_at = chrono::Utc::now().to_rfc3339();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let per_case: Vec<Result<Vec<SampleRecord>>> = pool.install(|| {
        cases
            .par_iter()
            .map(|case| (0..n_samples).map(|i| run_sample(case, i, config, &gateway_for)).collect())
            .collect()
    });
    let mut records = Vec::new();
    for r in per_case {
        records.extend(r?);
    }
    let metadata = ReportMetadata {
        model_id: config.generation.model_id.clone(),
        language: config.language,
        toolchain: config.profile.name.clone(),
        max_syntax_iters: config.max_syntax_iters,
        max_functional_iters: config.max_functional_iters,
        cases: cases.len(),
        workers,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
    };
    SuiteReport::from_records(records, n_samples, metadata)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

const CSV_HEADER: [&str; 9] = [
    "case_id",
    "sample_index",
    "status",
    "syntax_pass",
    "functional_pass",
    "syntax_iterations",
    "functional_iterations",
    "llm_ms",
    "tool_ms",
];

/// Serializes a report. CSV has one row per sample and, when there are
/// samples, an `AGGREGATE` footer whose pass columns hold pass@1 in
/// percent and whose timing columns hold per-sample means.
pub fn render_report(report: &SuiteReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in &report.records {
                let p = &r.pipeline_result;
                w.write_record([
                    r.case_id.clone(),
                    r.sample_index.to_string(),
                    p.status.to_string(),
                    r.syntax_pass.to_string(),
                    r.functional_pass.to_string(),
                    p.syntax_iterations().to_string(),
                    p.functional_iterations().to_string(),
                    p.total_llm_ms.to_string(),
                    p.total_tool_ms.to_string(),
                ])?;
            }
            if !report.records.is_empty() {
                let count = report.records.len() as f64;
                let mean = |f: &dyn Fn(&SampleRecord) -> f64| report.records.iter().map(f).sum::<f64>() / count;
                let l = &report.latency;
                w.write_record([
                    "AGGREGATE".to_string(),
                    report.n.to_string(),
                    report.delta_f.map_or_else(String::new, |d| d.to_string()),
                    format!("{:.2}", report.pass_at_1_syntax),
                    format!("{:.2}", report.pass_at_1_functional),
                    format!("{:.2}", mean(&|r| r.pipeline_result.syntax_iterations() as f64)),
                    format!("{:.2}", mean(&|r| r.pipeline_result.functional_iterations() as f64)),
                    format!("{:.2}", l.syntax_llm_ms + l.functional_llm_ms),
                    format!("{:.2}", l.syntax_tool_ms + l.functional_tool_ms),
                ])?;
            }
            w.into_inner().map_err(|e| Error::Validation(format!("csv flush: {e}")))
        }
    }
}

pub fn export_report(report: &SuiteReport, format: ReportFormat, path: &Path) -> Result<()> {
    let bytes = render_report(report, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: &Path) -> Result<SuiteReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Plain-text summary: pass rates, Δ_F and where the time went.
pub fn render_summary(report: &SuiteReport, color: bool) -> String {
    let (bold, reset) = if color { ("\x1b[1m", "\x1b[0m") } else { ("", "") };
    let m = &report.metadata;
    let l = &report.latency;
    let mut s = String::new();
    let _ = writeln!(s, "{bold}Suite report{reset}: {} on {} via {}", m.model_id, m.language, m.toolchain);
    let _ = writeln!(
        s,
        "cases {}, samples per case {}, budgets {}/{}",
        m.cases, report.n, m.max_syntax_iters, m.max_functional_iters
    );
    let _ = writeln!(s, "{:<24}{:>10.2}", "pass@1 syntax (%)", report.pass_at_1_syntax);
    let _ = writeln!(s, "{:<24}{:>10.2}", "pass@1 functional (%)", report.pass_at_1_functional);
    if let (Some(base), Some(d)) = (report.baseline_functional, report.delta_f) {
        let _ = writeln!(s, "{:<24}{:>10.2}", "baseline functional (%)", base);
        let _ = writeln!(s, "{:<24}{:>10}", "delta F (%)", d.to_string());
    }
    let _ = writeln!(s, "{bold}Mean latency per sample (ms){reset}");
    let _ = writeln!(s, "{:<12}{:>12}{:>12}", "loop", "llm", "tools");
    let _ = writeln!(s, "{:<12}{:>12.1}{:>12.1}", "syntax", l.syntax_llm_ms, l.syntax_tool_ms);
    let _ = writeln!(s, "{:<12}{:>12.1}{:>12.1}", "functional", l.functional_llm_ms, l.functional_tool_ms);
    let mut statuses: Vec<(String, usize)> = Vec::new();
    for r in &report.records {
        let name = r.pipeline_result.status.to_string();
        match statuses.iter_mut().find(|(n, _)| *n == name) {
            Some((_, c)) => *c += 1,
            None => statuses.push((name, 1)),
        }
    }
    statuses.sort();
    let _ = writeln!(s, "{bold}Run outcomes{reset}");
    for (name, count) in statuses {
        let _ = writeln!(s, "{name:<24}{count:>10}");
    }
    s
}

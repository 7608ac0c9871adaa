// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Machine output goes to files, logs to stderr.

use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{run_id, BackendKind, Settings};
use crate::error::{Error, Result};
use crate::eval::{self, ReportFormat};
use crate::model::{DesignSpec, HdlLanguage, PipelineStatus};
use crate::orchestrator::{run_pipeline, Clarifier, RESULT_FILE};
use crate::toolchain::{self, Availability};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TOOL: i32 = 3;
pub const EXIT_LLM: i32 = 4;
pub const EXIT_EXHAUSTED: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "hdlrefine",
    version,
    about = "Generate and repair HDL designs with an LLM, a compiler and a simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LangArg {
    Verilog,
    Vhdl,
}

impl From<LangArg> for HdlLanguage {
    fn from(l: LangArg) -> Self {
        match l {
            LangArg::Verilog => HdlLanguage::Verilog,
            LangArg::Vhdl => HdlLanguage::Vhdl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Text,
    Json,
    Csv,
}

/// Settings shared by `generate` and `bench`; flags override the config.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration file (TOML)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Target language
    #[arg(long, value_enum)]
    pub lang: Option<LangArg>,
    /// Syntax-loop iteration budget
    #[arg(long, value_name = "N")]
    pub max_syntax_iters: Option<u32>,
    /// Functional-loop iteration budget
    #[arg(long, value_name = "N")]
    pub max_func_iters: Option<u32>,
    /// LLM backend: mock, openai or anthropic
    #[arg(long, value_name = "NAME")]
    pub backend: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one design from a natural-language request
    Generate {
        /// Request text
        #[arg(long, value_name = "TEXT", conflicts_with = "spec", required_unless_present = "spec")]
        prompt: Option<String>,
        /// File holding the request text
        #[arg(long, value_name = "PATH")]
        spec: Option<PathBuf>,
        /// Ask clarification questions on the terminal when the request is vague
        #[arg(long)]
        interactive: bool,
        /// Run workspace (default: <workdir_root>/<run-id>)
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a benchmark suite and write a report
    Bench {
        /// Directory with one subdirectory per case (spec.txt, ref_tb.<ext>)
        #[arg(long, value_name = "DIR")]
        cases: PathBuf,
        /// Samples per case
        #[arg(long, value_name = "N", default_value_t = 1)]
        n: u32,
        /// Cases run in parallel
        #[arg(long, value_name = "N", default_value_t = 1)]
        workers: usize,
        /// Report path (JSON; default: <workdir_root>/suite-report.json)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also write the report as CSV
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Baseline report whose functional pass rate delta F is computed against
        #[arg(long, value_name = "PATH")]
        baseline: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a stored suite report
    Report {
        /// Report JSON written by `bench`
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output format
        #[arg(long, value_enum, default_value_t = RenderMode::Text)]
        format: RenderMode,
        /// Baseline report for delta F
        #[arg(long, value_name = "PATH")]
        baseline: Option<PathBuf>,
    },
    /// Check that the configured toolchain is installed and works
    Doctor {
        /// Run configuration file (TOML)
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Target language
        #[arg(long, value_enum)]
        lang: Option<LangArg>,
    },
}

fn load_settings(config: Option<&Path>) -> Result<Settings> {
    match config {
        Some(p) => Settings::load(p),
        None => Ok(Settings::default()),
    }
}

fn settings_for(run: &RunArgs) -> Result<Settings> {
    let mut s = load_settings(run.config.as_deref())?;
    if let Some(l) = run.lang {
        s.file.language = l.into();
    }
    if let Some(n) = run.max_syntax_iters {
        s.file.max_syntax_iters = n;
    }
    if let Some(n) = run.max_func_iters {
        s.file.max_functional_iters = n;
    }
    if let Some(b) = &run.backend {
        s.file.llm.backend = b.parse::<BackendKind>()?;
    }
    Ok(s)
}

/// Reads one answer per question from stdin, asking on stderr.
struct TerminalClarifier;

impl Clarifier for TerminalClarifier {
    fn answer(&mut self, questions: &[String]) -> Result<Vec<String>> {
        let stdin = std::io::stdin();
        let mut answers = Vec::new();
        for q in questions {
            eprint!("{q}\n> ");
            let _ = std::io::stderr().flush();
            let mut line = String::new();
            stdin.lock().read_line(&mut line).map_err(|e| Error::io("<stdin>", e))?;
            answers.push(line.trim().to_string());
        }
        Ok(answers)
    }
}

fn status_code(status: PipelineStatus) -> i32 {
    match status {
        PipelineStatus::Success => EXIT_OK,
        PipelineStatus::SyntaxExhausted | PipelineStatus::FunctionalExhausted => EXIT_EXHAUSTED,
        PipelineStatus::ToolFailure => EXIT_TOOL,
        PipelineStatus::LlmFailure => EXIT_LLM,
    }
}

pub fn error_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::Config(_) => EXIT_USAGE,
        Error::Tool(_) => EXIT_TOOL,
        Error::Llm { .. } | Error::Extraction(_) => EXIT_LLM,
        _ => EXIT_FAILURE,
    }
}

fn generate(
    prompt: Option<String>,
    spec: Option<PathBuf>,
    interactive: bool,
    out: Option<PathBuf>,
    run: &RunArgs,
) -> Result<i32> {
    let mut settings = settings_for(run)?;
    if interactive {
        settings.file.interactive = true;
    }
    let text = match (prompt, spec) {
        (Some(p), _) => p,
        (None, Some(path)) => std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?,
        (None, None) => return Err(Error::Validation("give --prompt or --spec".into())),
    };
    let workdir = out.unwrap_or_else(|| settings.new_run_dir());
    let config = settings.run_config(workdir.clone())?;
    let spec = DesignSpec::new(text, config.language)?;
    let gateway = settings.gateway(None)?;
    let mut clarifier = TerminalClarifier;
    let clarifier: Option<&mut dyn Clarifier> = if config.interactive { Some(&mut clarifier) } else { None };
    let result = run_pipeline(spec, &config, gateway, clarifier)?;
    log::info!(
        "{}: {} syntax / {} functional iteration(s), llm {} ms, tools {} ms",
        result.status,
        result.syntax_iterations(),
        result.functional_iterations(),
        result.total_llm_ms,
        result.total_tool_ms
    );
    if let Some(f) = &result.failure {
        log::error!("{f}");
    }
    println!("{}", workdir.join(RESULT_FILE).display());
    Ok(status_code(result.status))
}

#[allow(clippy::too_many_arguments)]
fn bench(
    cases: &Path,
    n: u32,
    workers: usize,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    baseline: Option<PathBuf>,
    run: &RunArgs,
) -> Result<i32> {
    let mut settings = settings_for(run)?;
    settings.file.interactive = false;
    let root = settings.workdir_root().join(format!("bench-{}", run_id()));
    let config = settings.run_config(root.clone())?;
    let cases = eval::load_cases(cases, config.language)?;
    let mut report = eval::run_suite(&cases, &config, |case, _| settings.gateway(Some(case)), n, workers)?;
    if let Some(b) = baseline {
        report.attach_baseline(eval::load_report(&b)?.pass_at_1_functional)?;
    }
    let out = out.unwrap_or_else(|| settings.workdir_root().join("suite-report.json"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    eval::export_report(&report, ReportFormat::Json, &out)?;
    if let Some(csv) = csv {
        eval::export_report(&report, ReportFormat::Csv, &csv)?;
    }
    log::info!(
        "pass@1 syntax {:.2}%, functional {:.2}% over {} case(s)",
        report.pass_at_1_syntax,
        report.pass_at_1_functional,
        report.metadata.cases
    );
    println!("{}", out.display());
    Ok(EXIT_OK)
}

fn report(input: &Path, format: RenderMode, baseline: Option<PathBuf>) -> Result<i32> {
    let mut report = eval::load_report(input)?;
    if let Some(b) = baseline {
        report.attach_baseline(eval::load_report(&b)?.pass_at_1_functional)?;
    }
    let stdout = std::io::stdout();
    let color = stdout.is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty());
    let bytes = match format {
        RenderMode::Text => eval::render_summary(&report, color).into_bytes(),
        RenderMode::Json => eval::render_report(&report, ReportFormat::Json)?,
        RenderMode::Csv => eval::render_report(&report, ReportFormat::Csv)?,
    };
    stdout.lock().write_all(&bytes).map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

fn doctor(config: Option<PathBuf>, lang: Option<LangArg>) -> Result<i32> {
    let mut settings = load_settings(config.as_deref())?;
    if let Some(l) = lang {
        settings.file.language = l.into();
    }
    let profile = settings.profile()?;
    let mut code = EXIT_OK;
    for entry in toolchain::doctor(std::slice::from_ref(&profile)) {
        let line = match &entry.availability {
            Availability::Available => "ok".to_string(),
            Availability::Missing { command } => {
                code = EXIT_TOOL;
                format!("missing `{command}`")
            }
            Availability::ProbeFailed { detail } => {
                code = EXIT_TOOL;
                format!("probe failed: {detail}")
            }
        };
        println!("{} ({}): {line}", entry.profile, entry.language);
    }
    Ok(code)
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Generate { prompt, spec, interactive, out, run } => generate(prompt, spec, interactive, out, &run),
        Command::Bench { cases, n, workers, out, csv, baseline, run } => {
            bench(&cases, n, workers, out, csv, baseline, &run)
        }
        Command::Report { input, format, baseline } => report(&input, format, baseline),
        Command::Doctor { config, lang } => doctor(config, lang),
    };
    outcome.unwrap_or_else(|e| {
        log::error!("{e}");
        eprintln!("error: {e}");
        error_code(&e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn parser_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_every_flag_and_nothing_else() {
        let mut root = Cli::command();
        root.build();
        let re = regex::Regex::new(r"--[a-z][a-z-]*").unwrap();
        for sub in root.get_subcommands_mut() {
            let help = sub.render_long_help().to_string();
            let declared: Vec<String> =
                sub.get_arguments().filter_map(|a| a.get_long().map(|l| format!("--{l}"))).collect();
            for flag in &declared {
                assert!(help.contains(flag.as_str()), "{} help lacks {flag}", sub.get_name());
            }
            for m in re.find_iter(&help) {
                assert!(
                    declared.iter().any(|d| d == m.as_str()),
                    "{} help mentions unknown {}",
                    sub.get_name(),
                    m.as_str()
                );
            }
        }
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(dispatch(["hdlrefine", "generate", "--bogus"]), EXIT_USAGE);
        assert_eq!(dispatch(["hdlrefine"]), EXIT_USAGE);
        assert_eq!(dispatch(["hdlrefine", "generate", "--prompt", "x", "--spec", "y"]), EXIT_USAGE);
    }

    #[test]
    fn flags_override_config() {
        let run = RunArgs {
            config: None,
            lang: Some(LangArg::Vhdl),
            max_syntax_iters: Some(3),
            max_func_iters: Some(4),
            backend: Some("openai".into()),
        };
        let s = settings_for(&run).unwrap();
        assert_eq!(s.file.language, HdlLanguage::Vhdl);
        assert_eq!((s.file.max_syntax_iters, s.file.max_functional_iters), (3, 4));
        assert_eq!(s.file.llm.backend, BackendKind::OpenAi);
        let bad = RunArgs { backend: Some("nope".into()), ..run };
        assert!(settings_for(&bad).is_err());
    }
}

//! The `vidquiz` command line. Exit codes: 0 ok, 1 usage, 2 validation, 3 backend.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analytics::{self, report, ReportInput};
use crate::annotations::{aggregate_emotion_cues, load_emotion_observations, load_visual_cues, DEFAULT_THRESHOLD_K};
use crate::bank::{load_bank, save_bank, QuestionBank, MIN_PER_STRATEGY};
use crate::engine::{export_jsonl, parse_jsonl};
use crate::llm::{BackendMode, Gateway};
use crate::pipeline::{
    generate_bank, load_transcript, validate_question, Draft, GenerateConfig, GenerateError, InputError, PipelineError, VideoInputs,
};
use crate::service::{self, ServiceConfig, ServiceError};
use crate::simulate::{run_script, Script};
use crate::strategy::{Strategy, StrategySet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vidquiz", version, about = "Quiz questions for captioned lecture videos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Transcript,
    Emotion,
    Visual,
    All,
}

impl StrategyArg {
    pub fn set(self) -> StrategySet {
        match self {
            StrategyArg::Transcript => StrategySet::single(Strategy::Transcript),
            StrategyArg::Emotion => StrategySet::single(Strategy::Emotion),
            StrategyArg::Visual => StrategySet::single(Strategy::Visual),
            StrategyArg::All => StrategySet::ALL,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a WebVTT or SRT file into transcript JSON.
    IngestCaptions {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate emotion observations and load visual annotations.
    IngestAnnotations {
        #[arg(long)]
        emotion: PathBuf,
        #[arg(long)]
        visual: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_K)]
        threshold_k: u32,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a question bank.
    #[command(group(ArgGroup::new("mode").required(true).args(["record", "replay", "live"])))]
    Generate {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required_unless_present = "live")]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        record: bool,
        #[arg(long)]
        replay: bool,
        #[arg(long)]
        live: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a bank file against the schema, and optionally its content.
    ValidateBank {
        bank: PathBuf,
        /// Generation config; re-runs the content checks against the video's transcript.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Skip the per-strategy minimum.
        #[arg(long)]
        allow_partial: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Play a scripted session against a bank and write its event log.
    Simulate {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the analytics report.
    Report {
        /// Directory of `.jsonl` event logs.
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        self_efficacy: Option<PathBuf>,
        #[arg(long)]
        attitudes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("backend: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        match e {
            InputError::Read { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::Pipeline { source: PipelineError::Llm(_), .. } => CliError::Backend(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn read_bank(path: &Path) -> Result<QuestionBank, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    load_bank(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn invalid<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError {
    let path = path.display().to_string();
    move |e| CliError::Validation(format!("{path}: {e}"))
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if code == EXIT_OK { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let say = |w: &mut dyn Write, line: String| {
        let _ = writeln!(w, "{line}");
    };
    match command {
        Command::IngestCaptions { file, out: dest } => {
            let transcript = load_transcript(&file)?;
            write(&dest, pretty(&transcript))?;
            say(out, format!("{} segments, {} ms", transcript.len(), transcript.duration_ms()));
        }
        Command::IngestAnnotations { emotion, visual, threshold_k, out: dest } => {
            let observations = load_emotion_observations(&read(&emotion)?).map_err(invalid(&emotion))?;
            let emotion_cues = aggregate_emotion_cues(&observations, threshold_k).map_err(invalid(&emotion))?;
            let visual_cues = load_visual_cues(&read(&visual)?).map_err(invalid(&visual))?;
            let body = pretty(&json!({ "emotion_cues": emotion_cues, "visual_cues": visual_cues }));
            match dest {
                Some(path) => {
                    write(&path, body)?;
                    say(out, format!("{} emotion cues, {} visual cues", emotion_cues.len(), visual_cues.len()));
                }
                None => {
                    let _ = out.write_all(body.as_bytes());
                }
            }
        }
        Command::Generate { strategy, config, fixtures, record, replay, live: _, out: dest } => {
            let config = GenerateConfig::load(&config)?;
            config.generation.validate().map_err(|e| CliError::Validation(e.to_string()))?;
            let inputs = VideoInputs::load(&config)?;
            let mode = if replay {
                BackendMode::Replay
            } else if record {
                BackendMode::Record
            } else {
                BackendMode::Live
            };
            let backend = mode
                .build(fixtures.as_deref())
                .map_err(|e| CliError::Backend(e.to_string()))?
                .expect("only the off mode has no backend");
            let gateway = Gateway::new(backend);
            let (bank, outputs) = generate_bank(&inputs, &config.generation, strategy.set(), &gateway)?;
            write(&dest, save_bank(&bank))?;
            for (s, o) in &outputs {
                say(
                    err,
                    format!("{s}: {} questions, {} malformed, {} revision calls", o.questions.len(), o.malformed_count, o.revision_calls),
                );
            }
            say(out, format!("{} questions written to {} ({} model calls)", bank.questions().len(), dest.display(), gateway.call_count()));
        }
        Command::ValidateBank { bank, config, allow_partial } => {
            let parsed = read_bank(&bank)?;
            if !allow_partial {
                parsed.ensure_complete(MIN_PER_STRATEGY).map_err(|e| CliError::Validation(format!("{}: {e}", bank.display())))?;
            }
            if let Some(config) = config {
                recheck(&parsed, &GenerateConfig::load(&config)?, err)?;
            }
            say(out, format!("{} questions valid", parsed.questions().len()));
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config).map_err(|e| CliError::Usage(e.to_string()))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Backend(e.to_string()))?;
            runtime.block_on(service::serve(config)).map_err(|e| match e {
                ServiceError::Llm(_) | ServiceError::Io(_) => CliError::Backend(e.to_string()),
                ServiceError::Config(_) | ServiceError::Read { .. } => CliError::Usage(e.to_string()),
                _ => CliError::Validation(e.to_string()),
            })?;
        }
        Command::Simulate { bank, script, out: dest } => {
            let parsed = read_bank(&bank)?;
            let script: Script = serde_json::from_str(&read(&script)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", script.display())))?;
            let state = run_script(&parsed, &script).map_err(|e| CliError::Validation(e.to_string()))?;
            write(&dest, export_jsonl(state.log()))?;
            say(out, format!("{} events, completed: {}", state.log().len(), state.is_completed()));
        }
        Command::Report { logs, ratings, self_efficacy, attitudes, out: dest } => {
            let input = report_input(&logs, &ratings, self_efficacy.as_deref(), attitudes.as_deref())?;
            let built = report(&input);
            built.write_to(&dest).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", dest.display())))?;
            let _ = out.write_all(built.text.as_bytes());
        }
    }
    Ok(())
}

fn recheck(bank: &QuestionBank, config: &GenerateConfig, err: &mut dyn Write) -> Result<(), CliError> {
    let inputs = VideoInputs::load(config)?;
    let mut failures = 0;
    for strategy in Strategy::ALL {
        let enhanced = inputs.enhanced(strategy).map_err(|e| CliError::Validation(format!("{strategy}: {e}")))?;
        let generation = crate::pipeline::GenerationConfig { strategy, ..config.generation.clone() };
        for q in bank.by_strategy(strategy) {
            let report = validate_question(&Draft::from_question(q), &enhanced, &generation);
            for v in &report.violations {
                failures += 1;
                let _ = writeln!(err, "{}: {} ({v})", q.id, v.name());
            }
        }
    }
    match failures {
        0 => Ok(()),
        n => Err(CliError::Validation(format!("{n} content violations"))),
    }
}

fn report_input(logs: &Path, ratings: &Path, self_efficacy: Option<&Path>, attitudes: Option<&Path>) -> Result<ReportInput, CliError> {
    let entries = std::fs::read_dir(logs).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", logs.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut input = ReportInput::default();
    for path in paths {
        let events = parse_jsonl(&read(&path)?).map_err(invalid(&path))?;
        input.logs.push(events);
    }
    input.ratings = analytics::load_ratings(&read(ratings)?).map_err(invalid(ratings))?;
    if let Some(p) = self_efficacy {
        input.self_efficacy = analytics::load_self_efficacy(&read(p)?).map_err(invalid(p))?;
    }
    if let Some(p) = attitudes {
        input.attitudes = analytics::load_attitudes(&read(p)?).map_err(invalid(p))?;
    }
    Ok(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("vidquiz").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["generate", "--strategy", "all", "--config", "x.toml", "--out", "b.json"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["generate", "--strategy", "some", "--config", "x", "--replay", "--fixtures", "f", "--out", "o"]).0, EXIT_USAGE);
        let (code, _, err) = run_capture(&["validate-bank", "/nonexistent/bank.json"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error: usage:"), "{err}");
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("validate-bank"));
    }
}

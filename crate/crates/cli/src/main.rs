//! `pulsefeat` command-line interface.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 parse error,
//! 4 config error, 5 insufficient data, 6 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pulsefeat::pipeline::{extract_beats, run_pipeline, with_thread_cap, PipelineResult};
use pulsefeat::record::{parse_record, write_atomic};
use pulsefeat::results::{emit_beats, emit_results, ranking_markdown, read_ranking_json};
use pulsefeat::synth::{generate_record, SynthConfig};
use pulsefeat::{catalog, Error, RunConfig};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_CONFIG: u8 = 4;
const EXIT_INSUFFICIENT: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "pulsefeat",
    version,
    about = "ECG/PPG beat features and their association with blood pressure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic ECG/PPG/ABP record.
    Synth {
        /// Generator configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output record CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional ground-truth JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Detect beats and write per-beat fiducials, features, and BP.
    Extract {
        #[arg(long)]
        record: PathBuf,
        /// Analysis configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline and write every result file.
    Analyze {
        #[arg(long)]
        record: PathBuf,
        /// Analysis configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the top-ranked features from an `analyze` output directory.
    Report {
        /// Directory holding `ranking.json`.
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
    },
    /// Print the 222-feature catalog.
    Catalog {
        #[arg(long, value_enum, default_value_t = CatalogFormat::Csv)]
        format: CatalogFormat,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CatalogFormat {
    Csv,
    Markdown,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
            Error::InsufficientData { .. } => EXIT_INSUFFICIENT,
            Error::Io { .. } => EXIT_IO,
            Error::InvalidInput(_) | Error::DegenerateSeries(_) => EXIT_OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn run_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::from_path)
}

fn print_summary(result: &PipelineResult<f64>) {
    let s = &result.summary;
    eprintln!(
        "r_peaks={} onsets={} beats={} implausible={} bp_degenerate={} used={}",
        s.r_peaks,
        s.onsets,
        s.beats_paired,
        s.beats_implausible,
        s.beats_bp_degenerate,
        s.beats_used
    );
    for d in &s.diagnostics {
        eprintln!("note: {d}");
    }
    for seg in &result.segments {
        if let Some(n) = &seg.notice {
            eprintln!("note: {n}");
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            out,
            truth,
        } => {
            let mut cfg = match &config {
                Some(p) => SynthConfig::from_path(p)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let synth = with_thread_cap(|| generate_record(&cfg))??;
            synth.record.write(&out)?;
            if let Some(path) = truth {
                let text = serde_json::to_string_pretty(&synth.truth).map_err(|e| Failure {
                    code: EXIT_OTHER,
                    message: e.to_string(),
                })?;
                write_atomic(&path, text.as_bytes())?;
            }
            eprintln!(
                "wrote {} ({} beats)",
                out.display(),
                synth.truth.beats.len()
            );
        }
        Command::Extract {
            record,
            config,
            out,
        } => {
            let cfg = run_config(config.as_deref())?;
            let rec = parse_record(&record)?;
            let (beats, summary) = with_thread_cap(|| extract_beats(&rec, &cfg))??;
            let result = PipelineResult {
                fs: rec.fs(),
                beats,
                analysis: None,
                segments: Vec::new(),
                summary,
                top_k: cfg.ranking.top_k,
            };
            emit_beats(&result, &out)?;
            print_summary(&result);
        }
        Command::Analyze {
            record,
            config,
            out,
        } => {
            let cfg = run_config(config.as_deref())?;
            let rec = parse_record(&record)?;
            let result = run_pipeline(&rec, &cfg)?;
            emit_results(&result, &out)?;
            print_summary(&result);
            if result.insufficient_data() {
                return Err(Failure {
                    code: EXIT_INSUFFICIENT,
                    message: "too few usable beats for association".into(),
                });
            }
        }
        Command::Report { results, format } => {
            let report = read_ranking_json(&results.join("ranking.json"))?;
            match format {
                ReportFormat::Markdown => print!("{}", ranking_markdown(&report)),
                ReportFormat::Json => {
                    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure {
                        code: EXIT_OTHER,
                        message: e.to_string(),
                    })?;
                    println!("{text}");
                }
            }
        }
        Command::Catalog { format, out } => {
            let text = match format {
                CatalogFormat::Csv => catalog().to_csv(),
                CatalogFormat::Markdown => catalog().to_markdown(),
            };
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

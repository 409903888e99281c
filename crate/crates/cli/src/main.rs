// SPDX-License-Identifier: MIT OR Apache-2.0

//! `erasure`: train token probes, score and segment documents, and read out
//! the implicit vocabulary of a corpus.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use erasure_core::annotations::SpanKind;
use erasure_core::reports::Scheme;
use erasure_core::store::{Dtype, LayerId};
use log::info;

use crate::commands::Task;
use crate::config::{Overrides, RunConfig};
use crate::error::{validation, CliResult};
use crate::manifest::RunRecord;

#[derive(Parser, Debug)]
#[command(
    name = "erasure",
    version,
    about = "Token-erasure probes and implicit-vocabulary read-out"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Run seed; every component seed is derived from it.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    /// Probe layer grid, e.g. `-1,0,1,9`.
    #[arg(
        long,
        global = true,
        value_name = "LIST",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    layers: Option<Vec<LayerId>>,
    /// Probe offsets, e.g. `0,-1,-2`.
    #[arg(
        long,
        global = true,
        value_name = "LIST",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    offsets: Option<Vec<i32>>,
    /// Late layer for scoring.
    #[arg(long = "L", global = true, value_name = "N", allow_hyphen_values = true)]
    late_layer: Option<LayerId>,
    /// Longest span the segmenter considers.
    #[arg(long, global = true, value_name = "N")]
    max_span: Option<usize>,
    /// Fewest occurrences for a vocabulary entry.
    #[arg(long, global = true, value_name = "N")]
    min_count: Option<usize>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            jobs: self.jobs,
            seed: self.seed,
            layers: self.layers.clone(),
            offsets: self.offsets.clone(),
            late_layer: self.late_layer,
            max_span: self.max_span,
            min_count: self.min_count,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train or evaluate the probe grid.
    #[command(subcommand)]
    Probes(ProbesCommand),
    /// Write per-document delta tables.
    Score {
        /// Only this document.
        #[arg(long)]
        doc: Option<String>,
    },
    /// Segment documents; optionally render HTML reports.
    Segment {
        #[arg(long)]
        doc: Option<String>,
        #[arg(long)]
        report: bool,
    },
    /// Build or evaluate the corpus vocabulary.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Compare vocabularies read out with different late layers.
    #[command(name = "ablate-l")]
    AblateL {
        /// Late layers to compare, e.g. `5,9,17`.
        #[arg(long, value_delimiter = ',')]
        ls: Option<Vec<LayerId>>,
    },
    /// Probe-accuracy curves by position class.
    Report {
        /// last-vs-other, first-middle-last, by-ngram-length or overall.
        #[arg(long)]
        scheme: Option<String>,
        /// Span kinds defining the classes, e.g. `subject,entity`.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
    },
    /// Count annotated n-grams in a reference corpus.
    #[command(name = "freq-audit")]
    FreqAudit {
        /// Corpus directory to count in; defaults to the run corpus.
        #[arg(long, value_name = "DIR")]
        reference: Option<PathBuf>,
    },
    /// Write a synthetic corpus, annotations and config to `--out`.
    Synth {
        #[arg(long, default_value_t = 12)]
        docs: usize,
        /// f32 or f16.
        #[arg(long, default_value = "f32")]
        dtype: String,
    },
}

#[derive(Subcommand, Debug)]
enum ProbesCommand {
    Train,
    Eval,
}

#[derive(Subcommand, Debug)]
enum VocabCommand {
    Build,
    Eval {
        /// Vocabulary TSV; defaults to `<out>/vocab.tsv`.
        #[arg(long, value_name = "PATH")]
        vocab: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> CliResult<SpanKind> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| validation(format!("unknown span kind {s:?}")))
}

/// Folds subcommand options into the config and returns the task.
fn prepare(command: &Command, cfg: &mut RunConfig) -> CliResult<Task> {
    Ok(match command {
        Command::Probes(ProbesCommand::Train) => Task::ProbesTrain,
        Command::Probes(ProbesCommand::Eval) => Task::ProbesEval,
        Command::Score { doc } => Task::Score { doc: doc.clone() },
        Command::Segment { doc, report } => Task::Segment {
            doc: doc.clone(),
            report: *report,
        },
        Command::Vocab(VocabCommand::Build) => Task::VocabBuild,
        Command::Vocab(VocabCommand::Eval { vocab }) => Task::VocabEval { vocab: vocab.clone() },
        Command::AblateL { ls } => {
            if let Some(ls) = ls {
                cfg.ablation.ls = ls.clone();
            }
            Task::AblateL
        }
        Command::Report { scheme, kinds } => {
            if let Some(s) = scheme {
                cfg.report.scheme = s.parse::<Scheme>().map_err(|e| validation(e.to_string()))?;
            }
            if let Some(k) = kinds {
                cfg.report.kinds = k.iter().map(|s| parse_kind(s)).collect::<CliResult<_>>()?;
            }
            Task::Report
        }
        Command::FreqAudit { reference } => {
            if let Some(r) = reference {
                cfg.audit.reference_corpus = Some(r.clone());
            }
            Task::FreqAudit
        }
        Command::Synth { docs, dtype } => {
            let dtype = match dtype.as_str() {
                "f32" => Dtype::F32,
                "f16" => Dtype::F16,
                other => return Err(validation(format!("unsupported dtype {other:?}; use f32 or f16"))),
            };
            if *docs == 0 {
                return Err(validation("--docs must be at least 1"));
            }
            Task::Synth { docs: *docs, dtype }
        }
    })
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Probes(ProbesCommand::Train) => "probes train",
        Command::Probes(ProbesCommand::Eval) => "probes eval",
        Command::Score { .. } => "score",
        Command::Segment { .. } => "segment",
        Command::Vocab(VocabCommand::Build) => "vocab build",
        Command::Vocab(VocabCommand::Eval { .. }) => "vocab eval",
        Command::AblateL { .. } => "ablate-l",
        Command::Report { .. } => "report",
        Command::FreqAudit { .. } => "freq-audit",
        Command::Synth { .. } => "synth",
    }
}

fn run(cli: Cli, argv: Vec<String>) -> i32 {
    let overrides = cli.global.overrides();
    let (mut cfg, loaded) = match RunConfig::load(cli.global.config.as_deref(), &overrides) {
        Ok(cfg) => (cfg, Ok(())),
        Err(e) => {
            let mut cfg = RunConfig::default();
            cfg.apply(&overrides);
            (cfg, Err(e))
        }
    };
    let mut rec = RunRecord::new(command_name(&cli.command), argv, cfg.out.clone());
    let result = loaded
        .and_then(|()| match &cli.global.config {
            Some(path) => rec.input(path),
            None => Ok(()),
        })
        .and_then(|()| prepare(&cli.command, &mut cfg))
        .and_then(|task| {
            debug_assert_eq!(task.name(), command_name(&cli.command));
            commands::execute(&task, &cfg, &mut rec)
        });
    match rec.finish(&cfg, result.as_ref().err()) {
        Ok(path) => info!("run manifest written to {}", path.display()),
        Err(e) => eprintln!("error: cannot write run manifest: {e}"),
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli, argv));
}

// Copyright 2026 The evqa Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `evqa`: mine CQA instances, train and query generators, run the
//! evaluations and serve interactive sessions.

mod backend;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evqa::generation::{DecodeConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "evqa", version, about = "Question-guided event language modeling workbench")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an annotated corpus and report its size.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Fail on the first bad record instead of skipping it.
        #[arg(long)]
        strict: bool,
        /// Write the accepted documents here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine (context, question, answer) instances from a corpus.
    BuildTuples {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One instance per answering event instead of the first only.
        #[arg(long)]
        all_matches: bool,
        /// Do not emit generic-question instances for unanswered contexts.
        #[arg(long)]
        no_fallback: bool,
        #[arg(long, default_value_t = 1)]
        min_context: usize,
        #[arg(long)]
        strict: bool,
    },
    /// Fit a reference n-gram generator on mined instances.
    Train {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Also write the (input, target) training pairs as JSONL.
        #[arg(long)]
        export: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Generate next events for a context file (one event per line).
    Generate {
        #[arg(long)]
        backend: String,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        context: PathBuf,
        #[arg(long, conflicts_with = "question")]
        entity: Option<String>,
        #[arg(long)]
        question: Option<String>,
        #[arg(long, value_enum, default_value_t = GenMode::Sample)]
        mode: GenMode,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSONL output; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Self-BLEU of sampled event sequences by length.
    EvalDiversity {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, default_value_t = 10)]
        max_length: usize,
        #[arg(long, default_value_t = 5)]
        sequences: usize,
        /// Number of single-event contexts to sample from.
        #[arg(long, default_value_t = 100)]
        contexts: usize,
    },
    /// Failure rate of entity-guided generation.
    EvalControl {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, value_enum, default_value_t = ControlMode::Sampling)]
        mode: ControlMode,
        #[arg(long, value_enum, default_value_t = Criterion::Any)]
        criterion: Criterion,
        /// Candidates inspected per probe.
        #[arg(long, default_value_t = 5)]
        budget: usize,
    },
    /// Per-token perplexity of gold answers.
    EvalPpl {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, value_enum, default_value_t = PplMode::Marginalized)]
        mode: PplMode,
        /// Leave the generic question (or "none" entity) out of the
        /// marginalization set.
        #[arg(long)]
        no_generic: bool,
    },
    /// Narrative cloze accuracy against answers from other documents.
    EvalCloze {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, default_value_t = 5)]
        confounders: usize,
    },
    /// Fraction of gold schema events matched by generated events.
    EvalOverlap {
        /// JSONL of {domain, events: [text]}.
        #[arg(long)]
        generated: PathBuf,
        /// JSONL of {domain, events: [{predicate, text}]}.
        #[arg(long)]
        gold: PathBuf,
        /// JSONL of {predicate, synonyms: [...]}.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve interactive sessions over HTTP, or in the terminal with --tty.
    Serve {
        #[arg(long, env = "EVQA_BACKEND")]
        backend: String,
        #[arg(long, env = "EVQA_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, env = "EVQA_LOG_DIR")]
        log_dir: Option<PathBuf>,
        /// Default session length in seconds.
        #[arg(long, env = "EVQA_TIME_BUDGET", default_value_t = 240)]
        time_budget: u64,
        #[arg(long)]
        tty: bool,
        /// Variant for the terminal session.
        #[arg(long, default_value = "qgelm")]
        variant: Variant,
        /// Sampling seed for the terminal session.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Action log for the terminal session.
        #[arg(long)]
        tty_log: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Expose a backend over the line protocol on stdin/stdout.
    BackendServe {
        #[arg(long)]
        backend: String,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    backend: String,
    #[arg(long)]
    variant: Variant,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long, default_value_t = 512)]
    max_input_tokens: usize,
    #[arg(long, default_value_t = 50)]
    max_output_tokens: usize,
    #[arg(long, default_value_t = 5)]
    beam_size: usize,
    #[arg(long, default_value_t = 0.9)]
    top_p: f64,
}

impl DecodeArgs {
    fn config(&self, seed: u64) -> Result<DecodeConfig, commands::UsageError> {
        let cfg = DecodeConfig {
            max_input_tokens: self.max_input_tokens,
            max_output_tokens: self.max_output_tokens,
            beam_size: self.beam_size,
            num_samples: 1,
            random_seed: seed,
            top_p: self.top_p,
        };
        cfg.validate().map_err(|e| commands::UsageError(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenMode {
    Sample,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControlMode {
    Sampling,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Criterion {
    Any,
    Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PplMode {
    Guided,
    Marginalized,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .without_time()
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<commands::UsageError>() {
                eprintln!("error: {u}");
                eprintln!("Run `evqa --help` for usage.");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

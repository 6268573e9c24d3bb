//! `edl`: build the KB index, train the detectors and the ranker, link a
//! corpus, score it and inspect linking decisions.
//!
//! Failures print one line `error<TAB>code<TAB>message` to stderr and exit
//! with status 1.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edl_core::pipeline::{self, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "edl", version, about = "Trilingual entity discovery and linking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the KB search index from `kb` and the auxiliary tables.
    KbIndex(Common),
    /// Train the mention detector ensembles on `md_docs`/`md_gold`.
    TrainMd(Common),
    /// Train the ranker ensemble on `el_docs`/`el_gold`.
    TrainEl(Common),
    /// Detect, link and cluster the mentions of `docs`.
    Run(Common),
    /// Score `system` against `gold`.
    Eval(Common),
    /// Per-mention linking diagnostics as JSON lines.
    Diag(Common),
    /// Write the bundled synthetic data set to a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Config file of key=value lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one setting; repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed; ensemble member k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        for pair in &self.overrides {
            config.set_pair(pair)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(output) = &self.output {
            config.set("output", &output.to_string_lossy())?;
        }
        Ok(config)
    }
}

fn print(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn summary(summary: &pipeline::TrainSummary) {
    let folds: Vec<String> = summary.fold_sizes.iter().map(ToString::to_string).collect();
    print(&format!("items={}\n", summary.items));
    print(&format!("skipped={}\n", summary.skipped));
    print(&format!("fold_sizes={}\n", folds.join(",")));
    for path in &summary.checkpoints {
        print(&format!("checkpoint={}\n", path.display()));
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::KbIndex(c) => {
            let s = pipeline::cmd_kb_index(&c.config()?)?;
            print(&format!("entities={}\n", s.entities));
            print(&format!("index={}\n", s.index.display()));
            print(&format!("manifest={}\n", s.manifest.display()));
        }
        Command::TrainMd(c) => summary(&pipeline::cmd_train_md(&c.config()?)?),
        Command::TrainEl(c) => summary(&pipeline::cmd_train_el(&c.config()?)?),
        Command::Run(c) => {
            let config = c.config()?;
            let out = pipeline::cmd_run(&config)?;
            if config.optional_path("output").is_none() {
                print(&out.submission);
            }
        }
        Command::Eval(c) => print(&pipeline::cmd_eval(&c.config()?)?),
        Command::Diag(c) => {
            let config = c.config()?;
            let out = pipeline::cmd_diag(&config)?;
            if config.optional_path("output").is_none() {
                print(&out.jsonl);
                if let Some(table) = &out.candidate_report {
                    eprint!("{table}");
                }
            } else if let Some(table) = &out.candidate_report {
                print(table);
            }
        }
        Command::Synth { out } => {
            edl_core::synth::write_bundle(&out).map_err(|e| PipelineError::Io {
                path: out.clone(),
                source: e,
            })?;
            print(&format!("bundle={}\n", out.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{message}", e.code());
            ExitCode::FAILURE
        }
    }
}

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use langfeed::harness::eval::{evaluate, EvalConfig};
use langfeed::harness::play::interactive_play;
use langfeed::harness::server::{serve, ListenSpec};
use langfeed::{make, EnvConfig, Execution, FeedbackSelector, InstructionType};

#[derive(Parser)]
#[command(name = "langfeed", version, about = "Environments that teach through language feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the line-delimited JSON protocol.
    Serve {
        /// `stdio` or `host:port`.
        #[arg(long, default_value = "stdio")]
        listen: String,
    },
    /// Play an episode in the terminal.
    Play {
        #[command(flatten)]
        env: EnvArgs,
        /// Print the reward after each step.
        #[arg(long)]
        debug: bool,
    },
    /// Evaluate an agent over a range of seeds.
    Eval {
        #[command(flatten)]
        env: EnvArgs,
        /// Scripted agent id, `tcp://host:port` or `exec:command`.
        #[arg(long)]
        agent: String,
        #[arg(long, default_value_t = 20)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        /// Episodes per session (default: 100 for bandits, else 1).
        #[arg(long)]
        rounds: Option<u32>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every transcript, one JSON session per line.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Per-step deadline for external agents, in seconds.
        #[arg(long, default_value_t = 30)]
        deadline: u64,
        #[arg(long)]
        sequential: bool,
    },
    /// Parse and check every bundled asset.
    ValidateAssets,
}

#[derive(Args)]
struct EnvArgs {
    #[arg(long)]
    env: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `a`, `m`, `n` or a comma list such as `r,hp`.
    #[arg(long, default_value = "a")]
    feedback: FeedbackSelector,
    /// `b`, `p` or `c`.
    #[arg(long, default_value = "b")]
    instruction: InstructionType,
    /// Always use the first paraphrase.
    #[arg(long)]
    no_randomize: bool,
}

impl EnvArgs {
    fn config(&self) -> EnvConfig {
        EnvConfig::new(&self.env)
            .seed(self.seed)
            .feedback(self.feedback.clone())
            .instruction(self.instruction)
            .randomize_text(!self.no_randomize)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { listen } => {
            let spec: ListenSpec = listen.parse()?;
            serve(&spec)?;
        }
        Command::Play { env, debug } => {
            let mut handle = make(env.config())?;
            let stdin = io::stdin();
            interactive_play(&mut handle, Some(env.seed), stdin.lock(), io::stdout().lock(), debug)?;
        }
        Command::Eval { env, agent, episodes, seed_base, rounds, out, transcripts, deadline, sequential } => {
            let mut config = EvalConfig::new(env.config(), agent, episodes, seed_base)
                .execution(if sequential { Execution::Sequential } else { Execution::Parallel });
            config.rounds = rounds;
            config.deadline = std::time::Duration::from_secs(deadline);
            let (report, sessions) = evaluate(&config)?;
            if let Some(path) = transcripts {
                let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
                for s in &sessions {
                    serde_json::to_writer(&mut w, s)?;
                    writeln!(w)?;
                }
                w.flush()?;
            }
            match out {
                Some(path) => fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{}", report.to_json()),
            }
        }
        Command::ValidateAssets => {
            let s = langfeed::assets::validate_all()?;
            println!(
                "ok: {} template groups ({} templates), {} dictionary words, {} catalog items",
                s.template_groups, s.templates, s.dictionary_words, s.catalog_items
            );
        }
    }
    Ok(())
}

//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then the JSON config
//! file, then command-line flags. Exit codes: 0 success, 1 a cell or report
//! entry failed (or any runtime error), 2 invalid configuration or arguments.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::container;
use crate::data::{align_all, generate_synthetic, load_dataset, save_dataset, SignalSpec, SyntheticConfig, ALIGNED_KIND};
use crate::error::{Error, Result};
use crate::eval::TestKind;
use crate::experiment::{self, CellSpec, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "mmsa", version, about = "Multi-task multimodal sentiment regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Signal {
    /// Score planted in the verbal channel only.
    VerbalOnly,
    /// Polarity in verbal, intensity in vocal.
    SplitAspects,
    /// No planted signal.
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TestArg {
    RankSum,
    SignedRank,
}

impl From<TestArg> for TestKind {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::RankSum => TestKind::RankSum,
            TestArg::SignedRank => TestKind::SignedRank,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic dataset.
    Generate {
        /// Output segments file.
        #[arg(long)]
        out: PathBuf,
        /// JSON file with synthetic-data settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        signal: Option<Signal>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Average frame features over word intervals.
    Align {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every grid cell.
    Run {
        /// Experiment config (JSON). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Results directory (config key `output_dir`).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Replace the seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Epoch cap (config key `train.max_epochs`).
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Comma-separated `kind:tasks` cells, e.g. `verbal:S,EF:S+P+I`.
        #[arg(long)]
        cells: Option<String>,
        /// Significance test (config key `significance`).
        #[arg(long, value_enum)]
        test: Option<TestArg>,
    },
    /// Rebuild tables and plots from a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
    /// Wilcoxon test between two stored cells.
    Compare {
        #[arg(long)]
        results: PathBuf,
        /// First cell, `kind:tasks`.
        a: String,
        /// Second cell, `kind:tasks`.
        b: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "rank-sum")]
        test: TestArg,
    },
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Spec(_))
}

/// Parse `args` (including the program name), run the command, return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                EXIT_CONFIG
            } else {
                EXIT_FAILED
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Generate {
            out,
            config,
            n,
            seed,
            signal,
            noise,
        } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => SyntheticConfig::default(),
            };
            if let Some(n) = n {
                cfg.n_segments = n;
            }
            if let Some(s) = signal {
                cfg.signal = match s {
                    Signal::VerbalOnly => SignalSpec::verbal_only(),
                    Signal::SplitAspects => SignalSpec::split_aspects(),
                    Signal::None => SignalSpec::default(),
                };
            }
            if let Some(x) = noise {
                cfg.noise_level = x;
            }
            let records = generate_synthetic(&cfg, seed)?;
            save_dataset(&out, &records)?;
            println!("wrote {} records to {}", records.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Align { input, out } => {
            let (aligned, d) = align_all(&load_dataset(&input)?)?;
            container::write_file(&out, ALIGNED_KIND, &aligned)?;
            println!("aligned {} segments ({} words) to {}", aligned.len(), d.words, out.display());
            println!(
                "words without frames: vocal {}, visual {}; frames used: vocal {}/{}, visual {}/{}",
                d.vocal_empty_words,
                d.visual_empty_words,
                d.vocal_frames_used,
                d.vocal_frames_total,
                d.visual_frames_used,
                d.visual_frames_total
            );
            Ok(EXIT_OK)
        }
        Command::Run {
            config,
            output_dir,
            seed,
            max_epochs,
            cells,
            test,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(e) = max_epochs {
                cfg.train.max_epochs = e;
            }
            if let Some(list) = cells {
                cfg.cells = list
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| CellSpec::parse(s).map_err(|e| Error::Config(e.to_string())))
                    .collect::<Result<_>>()?;
            }
            if let Some(t) = test {
                cfg.significance = t.into();
            }
            cfg.validate()?;
            let workers = experiment::worker_count();
            eprintln!(
                "running {} cells x {} seeds on {workers} worker(s)",
                cfg.cells.len(),
                cfg.seeds.len()
            );
            let summary = experiment::run_experiment(&cfg, workers, &|m| eprintln!("{m}"))?;
            print!("{}", summary.table.render_text());
            let failed = summary.failed();
            println!("results in {}", cfg.output_dir.display());
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; see cells.jsonl");
                return Ok(EXIT_FAILED);
            }
            Ok(EXIT_OK)
        }
        Command::Report { results } => {
            let outcome = experiment::report(&results)?;
            print!("{}", outcome.table.render_text());
            if !outcome.missing.is_empty() {
                eprintln!("missing cells:");
                for m in &outcome.missing {
                    eprintln!("  {m}");
                }
                return Ok(EXIT_FAILED);
            }
            Ok(EXIT_OK)
        }
        Command::Compare {
            results,
            a,
            b,
            seed,
            test,
        } => {
            let ca = CellSpec::parse(&a).map_err(|e| Error::Config(e.to_string()))?;
            let cb = CellSpec::parse(&b).map_err(|e| Error::Config(e.to_string()))?;
            let r = experiment::compare_cells(&results, &ca, &cb, seed, test.into())?;
            println!(
                "{} vs {}: statistic {:.4}, p = {:.6} ({:?}, {:?}){}",
                r.model_a,
                r.model_b,
                r.statistic,
                r.p_value,
                r.test,
                r.method,
                if r.significant { ", significant at 0.05" } else { "" }
            );
            Ok(EXIT_OK)
        }
    }
}

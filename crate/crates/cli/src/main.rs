use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kvmem_cli::commands::{eval_checkpoint, generate_corpus, inspect_question, train_into};
use kvmem_cli::error::CliError;
use kvmem_cli::experiment::{parse_experiment_config, Baseline, SplitName};
use kvmem_cli::ladder::{LadderParams, LadderRow};
use kvmem_core::datagen::GenConfig;
use kvmem_core::featurize::Representation;
use kvmem_core::model::HyperParams;

#[derive(Parser)]
#[command(
    name = "kvmem",
    about = "Key-value memory network QA: synthetic corpus generation, training, evaluation, inspection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus directory from a TOML config.
    Generate {
        /// TOML file holding the generation config (all fields optional).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output corpus directory.
        #[arg(long)]
        out: PathBuf,
        /// Generate the six-corpus ladder instead of a single corpus.
        #[arg(long)]
        ladder: bool,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the movie count.
        #[arg(long)]
        movies: Option<usize>,
    },
    /// Train a model per an experiment TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Corpus directory (overrides the config file).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Output directory (overrides the config file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Baseline override: none, memnn, or supervised.
        #[arg(long)]
        baseline: Option<String>,
        /// Continue training from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on one corpus split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// train, dev, or test.
        #[arg(long, default_value = "test")]
        split: String,
        /// Directory for report_<split>.json / .txt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the full per-question rankings as JSONL.
        #[arg(long)]
        dump_rankings: Option<PathBuf>,
    },
    /// Print the hop-by-hop trace for one question.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
    /// Generate, train, and evaluate the full six-corpus ladder.
    Ladder {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        movies: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Memory representation for the document rows.
        #[arg(long, default_value = "window_center_title")]
        representation: String,
    },
}

fn load_gen_config(path: Option<&PathBuf>) -> Result<GenConfig, CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::usage(format!("generation config: {e}")))
        }
        None => Ok(GenConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out, ladder, seed, movies } => {
            let mut gen = load_gen_config(config.as_ref())?;
            if let Some(seed) = seed {
                gen.seed = seed;
            }
            if let Some(movies) = movies {
                gen.n_movies = movies;
            }
            if ladder {
                let dirs = kvmem_cli::ladder::generate_ladder_corpora(&gen, &out)?;
                for (label, dir) in dirs {
                    println!("{label}: {}", dir.display());
                }
            } else {
                let corpus = generate_corpus(&gen, &out)?;
                println!(
                    "wrote {}: {} movies, {} triples, {} documents, {} sentences, {}/{}/{} questions",
                    out.display(),
                    corpus.kb.movies.len(),
                    corpus.kb.triples.len(),
                    corpus.docs.docs.len(),
                    corpus.docs.stats.sentences,
                    corpus.qa.train.len(),
                    corpus.qa.dev.len(),
                    corpus.qa.test.len()
                );
                println!("recommended stop-word threshold: {}", corpus.recommended_f());
            }
            Ok(())
        }
        Command::Train { config, corpus, out, baseline, resume, epochs, seed } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", config.display())))?;
            let mut exp = parse_experiment_config(&text)?;
            if let Some(b) = baseline {
                exp.spec.baseline = Baseline::from_name(&b)
                    .ok_or_else(|| CliError::usage(format!("unknown baseline '{b}'")))?;
            }
            if let Some(e) = epochs {
                exp.hyper.epochs = e;
            }
            if let Some(s) = seed {
                exp.hyper.seed = s;
            }
            let corpus_dir = corpus
                .or(exp.corpus.clone())
                .ok_or_else(|| CliError::usage("no corpus directory given (flag --corpus or config)"))?;
            let out_dir = out
                .or(exp.out.clone())
                .ok_or_else(|| CliError::usage("no output directory given (flag --out or config)"))?;
            let run =
                train_into(&corpus_dir, exp.spec, exp.hyper, &out_dir, resume.as_deref())?;
            println!("checkpoint: {}", run.checkpoint_path.display());
            println!(
                "epochs: {}  best epoch: {}  best dev metric: {:.2}",
                run.checkpoint.epochs_done, run.checkpoint.best_epoch, run.checkpoint.best_metric
            );
            println!("train-slot hashing recall: {:.3}", run.hash_recall_train);
            println!("dev report:\n{}", run.dev_report.render_text());
            Ok(())
        }
        Command::Eval { checkpoint, corpus, split, out, dump_rankings } => {
            let split = SplitName::from_name(&split)
                .ok_or_else(|| CliError::usage(format!("unknown split '{split}'")))?;
            let run =
                eval_checkpoint(&checkpoint, &corpus, split, out.as_deref(), dump_rankings.as_deref())?;
            println!("{}", run.report.render_text());
            Ok(())
        }
        Command::Inspect { checkpoint, question, top_k } => {
            let rendered = inspect_question(&checkpoint, &question, top_k)?;
            print!("{rendered}");
            Ok(())
        }
        Command::Ladder { out, movies, seed, epochs, representation } => {
            let representation = Representation::from_name(&representation)
                .ok_or_else(|| CliError::usage(format!("unknown representation '{representation}'")))?;
            if representation == Representation::KbTriple || representation == Representation::WindowSentence {
                return Err(CliError::usage(
                    "ladder document rows need an entity-answer document representation".to_string(),
                ));
            }
            let mut gen = GenConfig { n_movies: 500, max_questions: Some(5000), ..GenConfig::default() };
            gen.n_actors = 600;
            gen.n_directors = 150;
            gen.n_writers = 300;
            gen.n_tags = 40;
            gen.n_genres = 15;
            gen.n_languages = 8;
            if let Some(m) = movies {
                gen.n_movies = m;
            }
            if let Some(s) = seed {
                gen.seed = s;
            }
            let mut hyper = HyperParams { epochs: 30, learn_rate: 0.1, ..HyperParams::default() };
            if let Some(e) = epochs {
                hyper.epochs = e;
            }
            let params = LadderParams { gen, hyper, doc_representation: representation, out: out.clone() };
            let rows: Vec<LadderRow> = kvmem_cli::ladder::run_ladder(&params)?;
            println!("{}", fs::read_to_string(out.join("ladder.txt"))?);
            for r in &rows {
                println!("{}: trained in {:.1}s", r.label, r.train_seconds);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

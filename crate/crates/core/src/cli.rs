//! The `retext` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or contract error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::build_vocab;
use crate::data::{load_labeled, load_stoplist, load_unlabeled, LabeledSet};
use crate::error::{Error, Result};
use crate::net::io::{load_embedding, load_model, save_embedding, save_model};
use crate::net::{decide, Model, TvEmbedding};
use crate::theory::{
    enumerate_regions, retex_simple_concept, retex_union, retex_universal, sample_two_view_model, seq_vector,
    verify_theorem1, Check, SimpleConcept,
};
use crate::train::{evaluate, model_select, parse_config, train_semi, train_tv, with_threads, Config, TargetKind};
use crate::tv::{unsupervised_target_spec, TargetSpec};

#[derive(Debug, Parser)]
#[command(
    name = "retext",
    version,
    about = "One-hot CNN text categorization with tv-embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of every configuration and the holdout split
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); does not change results
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a supervised CNN on labeled data
    TrainSup {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a tv-embedding on unlabeled data
    TrainTv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        unlabeled: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Supervised model providing partially-supervised targets
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        stoplist: Option<PathBuf>,
    },
    /// Train a CNN on labeled data with frozen tv-embeddings
    TrainSemi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        labeled: PathBuf,
        /// Comma-separated tv-embedding files
        #[arg(long, value_delimiter = ',', required = true)]
        tv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels for one document per line
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a model on labeled data
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
    },
    /// Check the tv-embedding theorem and the region-embedding constructions
    VerifyTheory {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 8)]
        x1: usize,
        #[arg(long, default_value_t = 8)]
        x2: usize,
        #[arg(long, default_value_t = 2)]
        y: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Failed(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(CliError::ChecksFailed(out)) => {
            print!("{out}");
            eprintln!("error: some checks failed");
            2
        }
    }
}

enum CliError {
    Usage(String),
    Failed(Error),
    ChecksFailed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e)
    }
}

type CliResult = std::result::Result<String, CliError>;

fn execute(cmd: Command) -> CliResult {
    match cmd {
        Command::TrainSup { common, labeled, out } => {
            let grid = load_grid(&common)?;
            let data = load_labeled(&labeled)?;
            threaded(common.threads, || train_labeled(&grid, &data, &[], &out))
        }
        Command::TrainSemi {
            common,
            labeled,
            tv,
            out,
        } => {
            let grid = load_grid(&common)?;
            let data = load_labeled(&labeled)?;
            let embeddings = tv.iter().map(|p| load_embedding(p)).collect::<Result<Vec<_>>>()?;
            threaded(common.threads, || train_labeled(&grid, &data, &embeddings, &out))
        }
        Command::TrainTv {
            common,
            unlabeled,
            out,
            source,
            stoplist,
        } => {
            let grid = load_grid(&common)?;
            let [cfg] = grid.as_slice() else {
                return Err(CliError::Usage(
                    "train-tv takes a single configuration, not a grid".into(),
                ));
            };
            let docs = load_unlabeled(&unlabeled)?;
            let source = source.map(|p| load_model(&p)).transpose()?;
            threaded(common.threads, || {
                train_embedding(cfg, &docs, source, stoplist.as_deref(), &out)
            })
        }
        Command::Predict { model, input, out } => {
            let model = load_model(&model)?;
            let docs = load_unlabeled(&input)?;
            let text = predictions(&model, &docs)?;
            match out {
                Some(path) => {
                    fs::write(&path, &text).map_err(|e| Error::io(path.display().to_string(), e))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Eval { model, labeled } => {
            let model = load_model(&model)?;
            let data = load_labeled(&labeled)?;
            Ok(evaluate(&model, &data)?.report())
        }
        Command::VerifyTheory {
            k,
            x1,
            x2,
            y,
            seed,
            tol,
        } => verify_theory(k, x1, x2, y, seed, tol),
    }
}

fn threaded(threads: usize, f: impl FnOnce() -> CliResult + Send) -> CliResult {
    with_threads(threads, f)?
}

fn load_grid(common: &Common) -> std::result::Result<Vec<Config>, CliError> {
    let text = fs::read_to_string(&common.config).map_err(|e| Error::io(common.config.display().to_string(), e))?;
    let mut grid = parse_config(&text)?;
    if let Some(seed) = common.seed {
        grid.iter_mut().for_each(|c| c.train.seed = seed);
    }
    Ok(grid)
}

fn train_labeled(grid: &[Config], data: &LabeledSet, embeddings: &[TvEmbedding], out: &Path) -> CliResult {
    let first = &grid[0];
    let mut report = String::new();
    let model = if first.holdout > 0.0 {
        if grid.iter().any(|c| c.holdout != first.holdout) {
            return Err(CliError::Usage("holdout cannot vary across the grid".into()));
        }
        let train_cfgs: Vec<_> = grid.iter().map(|c| c.train.clone()).collect();
        let sel = model_select(&train_cfgs, data, first.holdout, first.train.seed, embeddings)?;
        for (i, m) in sel.holdout.iter().enumerate() {
            let _ = writeln!(
                report,
                "config {i}: held-out error {:.4} micro-F {:.4}{}",
                m.error_rate,
                m.micro_f,
                if i == sel.best_index { "  (selected)" } else { "" }
            );
        }
        let _ = writeln!(report, "held-out metrics of the selected configuration:");
        report.push_str(&sel.best_holdout().report());
        sel.model
    } else {
        if grid.len() > 1 {
            return Err(CliError::Usage("a configuration grid needs holdout > 0".into()));
        }
        let model = train_semi(data, embeddings, &first.train)?;
        let _ = writeln!(report, "holdout disabled; training-set metrics:");
        report.push_str(&evaluate(&model, data)?.report());
        model
    };
    save_model(&model, out)?;
    Ok(report)
}

fn train_embedding(
    cfg: &Config,
    docs: &[Vec<String>],
    source: Option<Model>,
    stoplist: Option<&Path>,
    out: &Path,
) -> CliResult {
    let t = &cfg.train;
    let vocab = build_vocab(docs, t.vocab_size, t.min_count, t.vocab_ngram())?;
    let target = match (cfg.target.kind, source) {
        (_, Some(source)) => TargetSpec::PartiallySupervised {
            source: Box::new(source),
            tau: cfg.target.tau,
        },
        (TargetKind::PartiallySupervised, None) => {
            return Err(CliError::Usage("partially-supervised targets need --source".into()))
        }
        (TargetKind::Unsupervised, None) => {
            let stop = match stoplist.or(cfg.target.stoplist.as_deref()) {
                Some(p) => load_stoplist(p)?,
                None => Default::default(),
            };
            unsupervised_target_spec(
                &vocab,
                &stop,
                cfg.target.vocab_size,
                cfg.target.distinguish_for(t.spec.mode),
            )?
        }
    };
    let emb = train_tv(docs, &vocab, &target, t, &cfg.neg)?;
    save_embedding(&emb, out)?;
    Ok(format!(
        "tv-embedding: {} neurons, region {} size {}, vocabulary {}, target dim {}\n",
        emb.neurons(),
        emb.spec().mode,
        emb.spec().size,
        emb.vocab().len(),
        target.dim()
    ))
}

fn predictions(model: &Model, docs: &[Vec<String>]) -> Result<String> {
    let mut out = String::new();
    for (i, doc) in docs.iter().enumerate() {
        let scores = model.scores(doc).map_err(|e| match e {
            Error::Empty(_) => Error::InvalidArgument(format!("document {} yields no region", i + 1)),
            e => e,
        })?;
        let labels: Vec<&str> = decide(&scores, model.multi_label())
            .into_iter()
            .map(|l| model.labels()[l].as_str())
            .collect();
        let scores: Vec<String> = scores.iter().map(|s| format!("{s:.6}")).collect();
        let _ = writeln!(out, "{}\t{}", labels.join(","), scores.join(" "));
    }
    Ok(out)
}

fn exact_check(name: &'static str, residual: f64) -> Check {
    // exact constructions: any nonzero residual fails
    Check {
        name,
        residual,
        tol: f64::MIN_POSITIVE,
    }
}

/// Region-embedding constructions checked over every region.
pub fn proposition_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table: Vec<f64> = (0..9).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let net = retex_universal(&table, 3, 2)?;
    let mut worst: f64 = 0.0;
    for (i, r) in enumerate_regions(3, 2)?.iter().enumerate() {
        worst = worst.max((net.eval_region(r, 3)? - table[i]).abs());
    }
    let mut checks = vec![exact_check("universal_table", worst)];

    // vocab: easy=0 to=1 use=2 not=3
    let easy_to_use = SimpleConcept::new(vec![vec![0], vec![1], vec![2]], vec![1, 1, 1], 4)?;
    let not_then_use = SimpleConcept::new(vec![vec![3], vec![3], vec![2]], vec![1, -1, 1], 4)?;
    let (w, b) = retex_simple_concept(&easy_to_use, 4);
    let regions = enumerate_regions(4, 3)?;
    let mut worst: f64 = 0.0;
    for r in &regions {
        let out = (w.dot(&seq_vector(r, 4)?) + b).max(0.0);
        let truth = if easy_to_use.contains(r) { 1.0 } else { 0.0 };
        worst = worst.max((out - truth).abs());
    }
    checks.push(exact_check("simple_concept", worst));

    let concepts = [easy_to_use, not_then_use];
    let union = retex_union(&concepts, 4)?;
    let mut worst: f64 = 0.0;
    for r in &regions {
        let count = concepts.iter().filter(|c| c.contains(r)).count() as f64;
        worst = worst.max((union.eval_region(r, 4)? - count).abs());
    }
    checks.push(exact_check("concept_union", worst));
    Ok(checks)
}

fn verify_theory(k: usize, x1: usize, x2: usize, y: usize, seed: u64, tol: f64) -> CliResult {
    if !(tol > 0.0) {
        return Err(CliError::Usage("--tol must be > 0".into()));
    }
    let model = sample_two_view_model(k, x1, x2, y, seed)?;
    let mut report = verify_theorem1(&model, tol)?;
    report.checks.extend(proposition_checks(seed)?);
    let text = report.to_string();
    if report.passed() {
        Ok(text)
    } else {
        Err(CliError::ChecksFailed(text))
    }
}

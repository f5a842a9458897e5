//! The `enteval` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unknown keys or
//! task names), 2 on data, format and I/O errors.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use enteval::datagen::{generate, DatagenOptions};
use enteval::embed_io::{
    load_word_vectors, read_embeddings, write_embeddings, AvgVecEncoder, EmbeddingSet,
};
use enteval::tasks::{
    encode_avgvec, encoding_items, load_descriptions, read_jsonl, render_tsv, run_per_layer,
    run_task, to_jsonl, DataRoot, RunSettings, Task, TaskReport,
};
use enteval::toytrain::{
    build_corpus, curve_tsv, grad_check, train_variants, Decoders, LossSettings, SoftmaxMode,
    ToyBiLM, ToyConfig, TrainSettings, Variant,
};
use enteval::wikient::{extract_pairs, join_descriptions, parse_dump, WikiEntRecord};
use enteval::Error;

use config::{RunConfig, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "enteval",
    version,
    about = "Entity-representation evaluation toolkit"
)]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build task datasets from source corpora.
    Datagen(DatagenArgs),
    /// Extract hyperlink pairs from a MediaWiki XML export.
    Wikient(WikientArgs),
    /// Write word-averaging embeddings (or encoder manifests) for tasks.
    Embed(EmbedArgs),
    /// Train and score one probe, printing its details.
    Probe(EvalArgs),
    /// Evaluate tasks and print a TSV report.
    Eval(EvalArgs),
    /// Evaluate all headline tasks, optionally per layer.
    Report(ReportArgs),
    /// Train the toy bidirectional LM with hyperlink reconstruction.
    Toytrain(ToytrainArgs),
}

/// Flags that map onto config keys.
#[derive(Debug, Args, Default)]
struct RunFlags {
    /// Data root ({root}/{task}/{split}.jsonl).
    #[arg(long)]
    data_dir: Option<String>,
    /// `all` or comma-separated task names.
    #[arg(long, alias = "task")]
    tasks: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    l2: Option<String>,
    /// Mini-batch size, or `full`.
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    /// softmax_scaled | unnormalized
    #[arg(long)]
    mix_mode: Option<String>,
    /// A layer index, or `mix`.
    #[arg(long)]
    layer: Option<String>,
}

impl RunFlags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        [
            ("data_dir", &self.data_dir),
            ("tasks", &self.tasks),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("learning_rate", &self.learning_rate),
            ("l2", &self.l2),
            ("batch_size", &self.batch_size),
            ("patience", &self.patience),
            ("mix_mode", &self.mix_mode),
            ("layer", &self.layer),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Debug, Args)]
struct DatagenArgs {
    /// Directory holding the source corpora.
    #[arg(long)]
    sources: PathBuf,
    /// Output data root; defaults to the configured data dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Word vectors; defaults to {sources}/vectors.txt.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct WikientArgs {
    #[arg(long)]
    dump: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Word vectors for the averaging encoder.
    #[arg(long, required_unless_present = "manifest")]
    vectors: Option<PathBuf>,
    /// Output directory; defaults to {data_dir}/embeddings.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the items an external encoder must embed instead of vectors.
    #[arg(long)]
    manifest: bool,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// One embedding file (single data task only).
    #[arg(long, conflicts_with = "embeddings_dir")]
    embeddings: Option<PathBuf>,
    /// Directory of {task}.eev files; defaults to {data_dir}/embeddings.
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    /// One row per (task, layer) in addition to the mixed headline.
    #[arg(long)]
    per_layer: bool,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct ToytrainArgs {
    /// WikiEnt pairs JSONL.
    #[arg(long)]
    pairs: PathBuf,
    /// Description store JSONL.
    #[arg(long)]
    descriptions: PathBuf,
    /// Comma-separated: baseline, full, no_ctx, etn.
    #[arg(long, default_value = "full,no_ctx,etn")]
    variants: String,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Initial step; the step adapts after every accepted or rejected update.
    #[arg(long, default_value_t = 2.0)]
    learning_rate: f64,
    /// Sampled-softmax negatives; omit for exact softmax.
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long, default_value_t = 50)]
    positive_cap: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 8)]
    proj: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long, default_value_t = 20000)]
    max_vocab: usize,
    /// Loss-curve TSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also check gradients of every variant on the first pair.
    #[arg(long)]
    grad_check: bool,
    /// Central-difference step; below ~1e-5 round-off dominates.
    #[arg(long, default_value_t = 1e-4)]
    grad_epsilon: f64,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Core(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Core(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn resolve(config: &Option<PathBuf>, flags: &RunFlags) -> CliResult<RunConfig> {
    let text = match config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| io_err(p, e))?),
        None => None,
    };
    let env = std::env::var(DATA_DIR_ENV).ok();
    let pairs = flags.pairs();
    let borrowed: Vec<(&str, String)> = pairs.iter().map(|(k, v)| (*k, v.clone())).collect();
    Ok(RunConfig::resolve(
        env.as_deref(),
        text.as_deref(),
        &borrowed,
    )?)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let text = match cli.command {
        Command::Datagen(a) => datagen(&resolve(&cli.config, &a.run)?, &a)?,
        Command::Wikient(a) => wikient(&a)?,
        Command::Embed(a) => embed(&resolve(&cli.config, &a.run)?, &a)?,
        Command::Probe(a) => probe(&resolve(&cli.config, &a.run)?, &a)?,
        Command::Eval(a) => eval(&resolve(&cli.config, &a.run)?, &a)?,
        Command::Report(a) => report(&resolve(&cli.config, &a.run)?, &a)?,
        Command::Toytrain(a) => toytrain(&a)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| io_err(Path::new("<stdout>"), e))
}

/// Data tasks behind `tasks`: `ned` stands for conll and rare.
fn data_tasks(tasks: &[Task]) -> Vec<Task> {
    let mut out: Vec<Task> = Vec::new();
    for &t in tasks {
        let expanded: &[Task] = if t == Task::Ned {
            &[Task::Conll, Task::Rare]
        } else {
            std::slice::from_ref(&t)
        };
        for &e in expanded {
            if !out.contains(&e) {
                out.push(e);
            }
        }
    }
    out
}

fn datagen(cfg: &RunConfig, a: &DatagenArgs) -> CliResult<String> {
    let tasks = match &a.run.tasks {
        Some(t) if t.trim() == "all" => Task::data_tasks().to_vec(),
        Some(_) => data_tasks(&cfg.tasks),
        None => Task::data_tasks().to_vec(),
    };
    let opts = DatagenOptions {
        tasks,
        seed: cfg.seed,
        word_vectors: a.vectors.clone(),
    };
    let root = a.out.clone().unwrap_or_else(|| cfg.data_dir.clone());
    Ok(generate(&a.sources, &root, &opts)?.to_tsv())
}

fn wikient(a: &WikientArgs) -> CliResult<String> {
    let bytes = fs::read(&a.dump).map_err(|e| io_err(&a.dump, e))?;
    let extraction = extract_pairs(&parse_dump(&bytes)?);
    extraction.write(&a.out)?;
    let mut text = String::from("name\tvalue\n");
    for (k, v) in extraction.stats.to_map() {
        let _ = writeln!(text, "{k}\t{v}");
    }
    let _ = writeln!(text, "descriptions\t{}", extraction.descriptions.len());
    Ok(text)
}

fn embed(cfg: &RunConfig, a: &EmbedArgs) -> CliResult<String> {
    let root = DataRoot::new(&cfg.data_dir);
    let descriptions = load_descriptions(&root.descriptions())?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| cfg.data_dir.join("embeddings"));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let table = match (&a.vectors, a.manifest) {
        (Some(p), false) => Some(load_word_vectors(p)?.table),
        _ => None,
    };
    let mut text = String::from("task\titems\tfile\n");
    for task in data_tasks(&cfg.tasks) {
        let items = encoding_items(&root, task, &descriptions)?;
        let path = match &table {
            None => {
                let path = dir.join(format!("{task}.items.jsonl"));
                fs::write(&path, to_jsonl(&items)).map_err(|e| io_err(&path, e))?;
                path
            }
            Some(table) => {
                let encoder = AvgVecEncoder::new(table);
                let set = encode_avgvec(&items, &encoder)?;
                let path = dir.join(format!("{task}.eev"));
                write_embeddings(&set, &path)?;
                path
            }
        };
        let _ = writeln!(text, "{task}\t{}\t{}", items.len(), path.display());
    }
    Ok(text)
}

fn load_store(
    cfg: &RunConfig,
    single: &Option<PathBuf>,
    dir: &Option<PathBuf>,
) -> CliResult<BTreeMap<Task, EmbeddingSet>> {
    let needed = data_tasks(&cfg.tasks);
    if let Some(path) = single {
        if needed.len() != 1 {
            return Err(Failure::Usage(format!(
                "--embeddings takes one data task, got {}; use --embeddings-dir",
                needed.len()
            )));
        }
        return Ok(BTreeMap::from([(needed[0], read_embeddings(path)?)]));
    }
    let dir = dir
        .clone()
        .unwrap_or_else(|| cfg.data_dir.join("embeddings"));
    let loaded: Vec<(Task, EmbeddingSet)> = needed
        .par_iter()
        .map(|&t| read_embeddings(&dir.join(format!("{t}.eev"))).map(|s| (t, s)))
        .collect::<enteval::Result<_>>()?;
    Ok(loaded.into_iter().collect())
}

fn run_tasks(
    cfg: &RunConfig,
    store: &BTreeMap<Task, EmbeddingSet>,
    per_layer: bool,
) -> CliResult<Vec<TaskReport>> {
    let root = DataRoot::new(&cfg.data_dir);
    let settings: RunSettings = cfg.run_settings();
    let runs: Vec<Vec<TaskReport>> = cfg
        .tasks
        .par_iter()
        .map(|&t| {
            if per_layer {
                run_per_layer(t, &root, store, &settings)
            } else {
                run_task(t, &root, store, &settings).map(|r| vec![r])
            }
        })
        .collect::<enteval::Result<_>>()?;
    Ok(runs.into_iter().flatten().collect())
}

fn probe(cfg: &RunConfig, a: &EvalArgs) -> CliResult<String> {
    if cfg.tasks.len() != 1 {
        return Err(Failure::Usage(
            "probe runs exactly one task (--task)".into(),
        ));
    }
    let store = load_store(cfg, &a.embeddings, &a.embeddings_dir)?;
    let r = &run_tasks(cfg, &store, false)?[0];
    let mut text = String::from("field\tvalue\n");
    let _ = writeln!(text, "task\t{}", r.task);
    let _ = writeln!(text, "metric\t{}", r.metric);
    let _ = writeln!(text, "value\t{:.4}", r.value);
    let _ = writeln!(text, "layer\t{}", r.layer_label());
    let _ = writeln!(text, "seed\t{}", r.seed);
    let _ = writeln!(text, "n_parameters\t{}", r.n_parameters);
    for (name, v) in &r.components {
        let _ = writeln!(text, "component/{name}\t{v:.4}");
    }
    if let Some(mix) = &r.mix {
        let coefficients: Vec<String> = mix
            .coefficients()
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect();
        let _ = writeln!(text, "mix_coefficients\t{}", coefficients.join(","));
    }
    for note in &r.notes {
        let _ = writeln!(text, "note\t{note}");
    }
    Ok(text)
}

fn eval(cfg: &RunConfig, a: &EvalArgs) -> CliResult<String> {
    let store = load_store(cfg, &a.embeddings, &a.embeddings_dir)?;
    Ok(render_tsv(&run_tasks(cfg, &store, false)?, false))
}

fn report(cfg: &RunConfig, a: &ReportArgs) -> CliResult<String> {
    let mut cfg = cfg.clone();
    if a.run.tasks.is_none() {
        cfg.tasks = Task::HEADLINES.to_vec();
    }
    let store = load_store(&cfg, &None, &a.embeddings_dir)?;
    let text = render_tsv(&run_tasks(&cfg, &store, a.per_layer)?, true);
    if let Some(path) = &a.out {
        fs::write(path, &text).map_err(|e| io_err(path, e))?;
    }
    Ok(text)
}

fn toytrain(a: &ToytrainArgs) -> CliResult<String> {
    let variants: Vec<Variant> = a
        .variants
        .split(',')
        .map(|s| Variant::parse(s.trim()))
        .collect::<enteval::Result<_>>()?;
    let records: Vec<WikiEntRecord> = read_jsonl(&a.pairs)?;
    let descriptions = load_descriptions(&a.descriptions)?;
    let pairs = join_descriptions(&records, &descriptions)?;
    if pairs.is_empty() {
        return Err(Failure::Core(Error::Data(format!(
            "{}: no pairs",
            a.pairs.display()
        ))));
    }
    let (vocab, corpus) = build_corpus(&pairs, a.min_count, a.max_vocab);
    let config = ToyConfig {
        dim: a.dim,
        hidden: a.hidden,
        proj: a.proj,
        ..ToyConfig::default()
    };
    let model = ToyBiLM::new(vocab.len(), config, a.seed)?;
    let decoders = Decoders::new(&model, a.seed);
    let loss = LossSettings {
        softmax: a
            .negatives
            .map_or(SoftmaxMode::Full, |negatives| SoftmaxMode::Sampled {
                negatives,
            }),
        positive_cap: a.positive_cap,
    };
    let settings = TrainSettings {
        steps: a.steps,
        learning_rate: a.learning_rate,
        loss,
        seed: a.seed,
    };
    let runs = train_variants(&model, &decoders, &corpus, &variants, &settings)?;
    let curve = curve_tsv(&runs);
    if let Some(path) = &a.out {
        fs::write(path, &curve).map_err(|e| io_err(path, e))?;
    }
    let mut text = String::from("variant\tsteps\tinitial\tfinal\treduction\n");
    for r in &runs {
        let (first, last) = (r.curve[0], r.curve[r.curve.len() - 1]);
        let _ = writeln!(
            text,
            "{}\t{}\t{:.6}\t{:.6}\t{:.4}",
            r.variant.name(),
            last.step,
            first.total,
            last.total,
            r.reduction()
        );
    }
    if a.grad_check {
        text.push_str("variant\tmax_relative_error\tparameters\n");
        for &v in &variants {
            let g = grad_check(&model, &decoders, &corpus[0], v, a.grad_epsilon)?;
            let _ = writeln!(
                text,
                "{}\t{:.3e}\t{}",
                v.name(),
                g.max_relative_error,
                g.n_parameters
            );
        }
    }
    if a.out.is_none() {
        text.push_str(&curve);
    }
    Ok(text)
}

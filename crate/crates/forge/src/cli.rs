//! Command-line entry point.

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use metaphor_forge_core::eval::ratings::{dimension_correlations, filter_workers, mean_scores};
use metaphor_forge_core::eval::{mpg_score, ngram_overlap};
use metaphor_forge_core::lexrep::{generate_lexical_paraphrase, ParticlePolicy, Selection};
use metaphor_forge_core::masking::{build_dataset, LabeledVerbInstance, Vocab};
use metaphor_forge_core::nn::checkpoint;
use metaphor_forge_core::nn::decode::generate_metaphor;
use metaphor_forge_core::nn::model::init_params;
use metaphor_forge_core::nn::train::{fit, LossRecord, Trainer};
use metaphor_forge_core::text::{detokenize_tokens, lemmatize, tokenize, TokenSentence};
use metaphor_forge_core::{EmbeddingTable, WordNetGraph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::annotation::{self, AppState, Guidelines, RatingLog, Store, StoreConfig};
use crate::config::RunConfig;
use crate::corpus::{self, exclusion_hashes, read_corpus_file, read_dataset_dir, read_test_set, write_dataset};
use crate::import::{import_file, CorpusFormat};
use crate::ratings_io::{means_svg, read_ratings, write_correlations, write_means};
use crate::resources::{load_embeddings, load_wordnet, EmbeddingFormat};

/// Metaphoric paraphrase generation: lexical replacement, metaphor-masked
/// seq2seq training, and rating collection and analysis.
#[derive(Debug, Parser)]
#[command(name = "metaphor-forge", version, max_term_width = 100)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// TOML configuration file; flags given on the command line win over it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// WordNet index.verb
    #[arg(long, global = true, value_name = "FILE")]
    pub wordnet_index: Option<PathBuf>,
    /// WordNet data.verb
    #[arg(long, global = true, value_name = "FILE")]
    pub wordnet_data: Option<PathBuf>,
    /// word2vec embeddings file
    #[arg(long, global = true, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Layout of the embeddings file
    #[arg(long, global = true, value_enum, default_value_t = EmbeddingFormat::Text)]
    pub embeddings_format: EmbeddingFormat,
    /// Troponym levels to descend for lexical replacement
    #[arg(long, global = true, default_value_t = 1)]
    pub depth: usize,
    /// Context tokens kept on each side of the verb
    #[arg(long, global = true, default_value_t = 7)]
    pub window: usize,
    /// Vocabulary size, not counting the reserved tokens
    #[arg(long, global = true, default_value_t = 30_000)]
    pub vocab_cap: usize,
    /// Model checkpoint (written by train, read by generate)
    #[arg(long, global = true, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Port of the annotation service
    #[arg(long, global = true, default_value_t = 8080)]
    pub port: u16,
    /// Copy penalty of the mpg score
    #[arg(long, global = true, default_value_t = 0.25)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParticleArg {
    /// Replace the verb and keep the particle
    VerbOnly,
    /// Replace the verb and drop the particle
    VerbAndParticle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace the marked verb of each sentence with its best-fitting troponym
    Lexrep {
        /// Lines of `sentence TAB verb_index [TAB particle_index]`
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// JSON lines output [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Pick the lowest-scoring candidate instead of the highest
        #[arg(long)]
        worst_fit: bool,
        /// Insert the bare lemma instead of re-inflecting it
        #[arg(long)]
        no_inflect: bool,
        /// Allow multiword candidates such as `shoot_down`
        #[arg(long)]
        multiword: bool,
        /// Also pool troponyms of the verb's hypernyms
        #[arg(long)]
        sisters: bool,
        /// Treatment of a phrasal verb's particle, when the input marks one
        #[arg(long, value_enum, default_value_t = ParticleArg::VerbOnly)]
        particle: ParticleArg,
    },
    /// Build a metaphor-masked parallel dataset from labeled corpora
    BuildCorpus {
        /// Corpus in `label TAB verb_index TAB tokens` form (repeatable)
        #[arg(long, value_name = "FILE")]
        corpus: Vec<PathBuf>,
        /// Corpus in a native layout: vua, mohammad, stowe or trofi (repeatable)
        #[arg(long = "import", value_name = "FORMAT=FILE", value_parser = parse_import)]
        imports: Vec<(CorpusFormat, PathBuf)>,
        /// Test set whose sentences must not occur in the training data
        #[arg(long, value_name = "FILE")]
        exclude: Option<PathBuf>,
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the seq2seq model on a dataset directory
    Train {
        /// Directory written by build-corpus
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Maximum number of optimizer steps [default: from config, 2000]
        #[arg(long)]
        steps: Option<u64>,
        /// Stop once the training loss falls below this value
        #[arg(long)]
        target_loss: Option<f64>,
        /// CSV loss log [default: <checkpoint>.loss.csv]
        #[arg(long, value_name = "FILE")]
        loss_log: Option<PathBuf>,
    },
    /// Fill the masked verb of each literal sentence with a trained model
    Generate {
        /// Lines of `sentence TAB verb_index`, optionally `TAB gold` to score
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Vocabulary file [default: <checkpoint>.vocab]
        #[arg(long, value_name = "FILE")]
        vocab: Option<PathBuf>,
        /// Output lines [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Aggregate ratings into a means table and dimension correlations
    Evaluate {
        /// Rating log (JSON lines) or CSV ratings file
        #[arg(long, value_name = "FILE")]
        ratings: PathBuf,
        /// Means table [default: stdout]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Correlation table
        #[arg(long, value_name = "FILE")]
        correlations: Option<PathBuf>,
        /// SVG bar chart of the means
        #[arg(long, value_name = "FILE")]
        plot: Option<PathBuf>,
        /// Permutation shuffles per correlation [default: from config, 10000]
        #[arg(long)]
        shuffles: Option<usize>,
    },
    /// Overlap and mpg scores for paraphrase pairs
    Score {
        /// Lines of `x TAB y_prime`
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Tab-separated output [default: stdout]
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Run the annotation service
    Serve {
        /// Items to rate, one JSON object per line
        #[arg(long, value_name = "FILE")]
        items: PathBuf,
        /// Test items with expected scores, one JSON object per line
        #[arg(long, value_name = "FILE")]
        test_items: Option<PathBuf>,
        /// Append-only rating log, created if missing
        #[arg(long, value_name = "FILE")]
        log: PathBuf,
        /// Guideline text per dimension
        #[arg(long, value_name = "FILE")]
        guidelines: PathBuf,
        /// Static files of the browser client
        #[arg(long = "static", value_name = "DIR")]
        static_dir: Option<PathBuf>,
        /// Address to bind [default: from config, 127.0.0.1]
        #[arg(long)]
        host: Option<String>,
    },
}

fn parse_import(s: &str) -> Result<(CorpusFormat, PathBuf), String> {
    let (f, p) = s.split_once('=').ok_or("expected FORMAT=FILE")?;
    Ok((f.parse()?, PathBuf::from(p)))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("resource: {0}")]
    Resource(#[from] crate::resources::ResourceError),
    #[error("corpus: {0}")]
    Corpus(#[from] corpus::CorpusIoError),
    #[error("dataset: {0}")]
    Dataset(#[from] metaphor_forge_core::masking::CorpusError),
    #[error("model: {0}")]
    Model(#[from] metaphor_forge_core::nn::NnError),
    #[error("ratings: {0}")]
    Ratings(#[from] crate::ratings_io::RatingsIoError),
    #[error("annotation: {0}")]
    Setup(#[from] annotation::SetupError),
    #[error("annotation: {0}")]
    Log(#[from] annotation::log::LogError),
    #[error("annotation: {0}")]
    Store(#[from] annotation::store::StoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// Exit status per failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Missing(_) | CliError::Io { .. } => 3,
            CliError::Resource(_) | CliError::Corpus(_) | CliError::Ratings(_) | CliError::Input(_) => 4,
            CliError::Dataset(_) => 5,
            CliError::Model(_) => 6,
            CliError::Setup(_) | CliError::Log(_) | CliError::Store(_) => 7,
        }
    }
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn given(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Builds the effective configuration from defaults, the config file and
/// the flags that were actually typed.
pub fn effective_config(g: &GlobalArgs, m: &ArgMatches) -> Result<RunConfig, CliError> {
    let mut c = match &g.config {
        Some(p) => {
            require(p, "--config")?;
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    // a subcommand's matches also carry the global flags
    let m = match m.subcommand() {
        Some((_, sub)) => sub,
        None => m,
    };
    if given(m, "seed") {
        c.seed = g.seed;
    }
    if let Some(p) = &g.wordnet_index {
        c.resources.wordnet_index = Some(p.clone());
    }
    if let Some(p) = &g.wordnet_data {
        c.resources.wordnet_data = Some(p.clone());
    }
    if let Some(p) = &g.embeddings {
        c.resources.embeddings = Some(p.clone());
    }
    if given(m, "embeddings_format") {
        c.resources.embeddings_format = g.embeddings_format;
    }
    if given(m, "depth") {
        c.lexrep.depth = g.depth;
    }
    if given(m, "window") {
        c.masking.window = g.window;
    }
    if given(m, "vocab_cap") {
        c.masking.vocab_cap = g.vocab_cap;
    }
    if let Some(p) = &g.checkpoint {
        c.checkpoint = Some(p.clone());
    }
    if given(m, "port") {
        c.serve.port = g.port;
    }
    if given(m, "lambda") {
        c.metric.lambda = g.lambda;
    }
    c.propagate_seed();
    Ok(c)
}

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Missing(format!("{what} {} does not exist", path.display())))
    }
}

fn required_path<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{flag} is required for this command")))?;
    require(p, flag)?;
    Ok(p)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(io_at(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Parses the binary's arguments and runs the chosen command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli, &matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, matches: &ArgMatches) -> Result<(), CliError> {
    let config = effective_config(&cli.global, matches)?;
    config.validate()?;
    eprintln!("# effective configuration\n{}", config.to_toml().trim_end());
    match cli.command {
        Command::Lexrep {
            input,
            output: out,
            worst_fit,
            no_inflect,
            multiword,
            sisters,
            particle,
        } => {
            let mut c = config;
            c.lexrep.selection = if worst_fit { Selection::WorstFit } else { c.lexrep.selection };
            c.lexrep.inflect = c.lexrep.inflect && !no_inflect;
            c.lexrep.include_multiword |= multiword;
            c.lexrep.include_sisters |= sisters;
            if given_sub(matches, "particle") {
                c.lexrep.particle = match particle {
                    ParticleArg::VerbOnly => ParticlePolicy::VerbOnly,
                    ParticleArg::VerbAndParticle => ParticlePolicy::VerbAndParticle,
                };
            }
            run_lexrep(&c, &input, out.as_deref())
        }
        Command::BuildCorpus {
            corpus,
            imports,
            exclude,
            out,
        } => run_build_corpus(&config, &corpus, &imports, exclude.as_deref(), &out),
        Command::Train {
            data,
            steps,
            target_loss,
            loss_log,
        } => {
            let mut c = config;
            if let Some(s) = steps {
                c.training.fit.max_steps = s;
            }
            if target_loss.is_some() {
                c.training.fit.target_loss = target_loss;
            }
            run_train(&c, &data, loss_log.as_deref())
        }
        Command::Generate {
            input,
            vocab,
            output: out,
        } => run_generate(&config, &input, vocab.as_deref(), out.as_deref()),
        Command::Evaluate {
            ratings,
            out,
            correlations,
            plot,
            shuffles,
        } => {
            let mut c = config;
            if let Some(s) = shuffles {
                c.eval.correlation.shuffles = s;
            }
            run_evaluate(&c, &ratings, out.as_deref(), correlations.as_deref(), plot.as_deref())
        }
        Command::Score { input, output: out } => run_score(&config, &input, out.as_deref()),
        Command::Serve {
            items,
            test_items,
            log,
            guidelines,
            static_dir,
            host,
        } => {
            let mut c = config;
            if let Some(h) = host {
                c.serve.host = h;
            }
            run_serve(&c, &items, test_items.as_deref(), &log, &guidelines, static_dir)
        }
    }
}

fn given_sub(m: &ArgMatches, id: &str) -> bool {
    m.subcommand().is_some_and(|(_, sub)| given(sub, id))
}

fn load_graph(c: &RunConfig) -> Result<WordNetGraph, CliError> {
    let index = required_path(&c.resources.wordnet_index, "--wordnet-index")?;
    let data = required_path(&c.resources.wordnet_data, "--wordnet-data")?;
    Ok(load_wordnet(index, data)?)
}

fn load_table(c: &RunConfig, filter: Option<&HashSet<String>>) -> Result<EmbeddingTable, CliError> {
    let path = required_path(&c.resources.embeddings, "--embeddings")?;
    Ok(load_embeddings(path, c.resources.embeddings_format, filter)?)
}

/// `sentence TAB index [TAB rest...]` lines with their 1-based numbers.
fn read_marked(path: &Path, min_fields: usize) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    require(path, "input")?;
    let r = BufReader::new(fs::File::open(path).map_err(io_at(path))?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() < min_fields {
            return Err(CliError::Input(format!(
                "{}:{}: expected at least {min_fields} tab-separated fields",
                path.display(),
                i + 1
            )));
        }
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn marked_sentence(path: &Path, line: usize, text: &str, verb: &str, particle: Option<&str>) -> Result<TokenSentence, CliError> {
    let bad = |reason: String| CliError::Input(format!("{}:{line}: {reason}", path.display()));
    let s = tokenize(text).map_err(|e| bad(e.to_string()))?;
    let v: usize = verb.trim().parse().map_err(|_| bad(format!("bad verb index {verb:?}")))?;
    let mut s = s.with_verb(v).map_err(|e| bad(e.to_string()))?;
    if let Some(p) = particle.filter(|p| !p.trim().is_empty()) {
        let p: usize = p.trim().parse().map_err(|_| bad(format!("bad particle index {p:?}")))?;
        s = s.with_particle(p).map_err(|e| bad(e.to_string()))?;
    }
    Ok(s)
}

#[derive(Serialize)]
struct LexrepLine {
    input: String,
    output: Option<String>,
    verb_lemma: Option<String>,
    chosen: Option<String>,
    top: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn run_lexrep(c: &RunConfig, input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let rows = read_marked(input, 2)?;
    let sentences = rows
        .iter()
        .map(|(n, f)| marked_sentence(input, *n, &f[0], &f[1], f.get(2).map(String::as_str)))
        .collect::<Result<Vec<_>, _>>()?;
    let graph = load_graph(c)?;
    // only the words that can matter are kept from the embeddings file
    let mut wanted: HashSet<String> = HashSet::new();
    let opts = c.lexrep.candidate_options();
    for s in &sentences {
        wanted.extend(s.tokens().iter().cloned());
        if let Some(v) = s.verb() {
            let lemma = lemmatize(v, |l| graph.contains_lemma(l));
            wanted.extend(graph.candidate_lemmas(&lemma, &opts));
        }
    }
    let table = load_table(c, Some(&wanted))?;

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(sentences.len().max(1));
    let chunk = sentences.len().div_ceil(workers).max(1);
    let results: Vec<LexrepLine> = std::thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(chunk)
            .map(|part| {
                let (graph, table) = (&graph, &table);
                scope.spawn(move || {
                    part.iter()
                        .map(|s| match generate_lexical_paraphrase(s, graph, table, &c.lexrep) {
                            Ok(r) => LexrepLine {
                                input: r.input.to_string(),
                                output: Some(r.output.to_string()),
                                verb_lemma: Some(r.verb_lemma),
                                chosen: Some(r.chosen_lemma),
                                top: r.ranked_candidates.into_iter().take(5).collect(),
                                error: None,
                            },
                            Err(e) => LexrepLine {
                                input: s.to_string(),
                                output: None,
                                verb_lemma: None,
                                chosen: None,
                                top: Vec::new(),
                                error: Some(e.to_string()),
                            },
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("lexrep worker panicked")).collect()
    });

    let mut w = output(out)?;
    let path = out.unwrap_or(Path::new("<stdout>"));
    let mut failed = 0;
    for r in &results {
        if let Some(e) = &r.error {
            failed += 1;
            log::warn!("{}: {e}", r.input);
        }
        serde_json::to_writer(&mut w, r).map_err(|e| io_at(path)(e.into()))?;
        writeln!(w).map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))?;
    eprintln!("lexrep: {} sentences, {failed} without a replacement", results.len());
    Ok(())
}

fn run_build_corpus(
    c: &RunConfig,
    corpora: &[PathBuf],
    imports: &[(CorpusFormat, PathBuf)],
    exclude: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    if corpora.is_empty() && imports.is_empty() {
        return Err(CliError::Usage("give at least one --corpus or --import".into()));
    }
    let mut instances: Vec<LabeledVerbInstance> = Vec::new();
    for p in corpora {
        require(p, "--corpus")?;
        instances.extend(read_corpus_file(p)?);
    }
    for (format, p) in imports {
        require(p, "--import")?;
        let report = import_file(p, *format)?;
        eprintln!(
            "{}: {} instances, {} lines skipped",
            p.display(),
            report.instances.len(),
            report.skipped.len()
        );
        instances.extend(report.instances);
    }
    let exclude = match exclude {
        Some(p) => {
            require(p, "--exclude")?;
            exclusion_hashes(&read_test_set(p)?)
        }
        None => Default::default(),
    };
    let dataset = build_dataset(&instances, &c.masking, &exclude)?;
    write_dataset(out, &dataset)?;
    println!("{}", dataset.counts);
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_train(c: &RunConfig, data: &Path, loss_log: Option<&Path>) -> Result<(), CliError> {
    require(data, "--data")?;
    let ckpt = c
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::Usage("--checkpoint is required for train".into()))?;
    let (mut pairs, vocab) = read_dataset_dir(data)?;
    if pairs.is_empty() {
        return Err(CliError::Input(format!("{}: dataset is empty", data.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let heldout_n = (pairs.len() as f64 * c.training.heldout_fraction).floor() as usize;
    let heldout = if heldout_n > 0 {
        pairs.shuffle(&mut rng);
        pairs.split_off(pairs.len() - heldout_n)
    } else {
        Vec::new()
    };
    let longest = pairs
        .iter()
        .chain(&heldout)
        .map(|p| p.source.len().max(p.target.len()))
        .max()
        .unwrap_or(0);
    let mut tc = c.transformer.clone();
    tc.vocab_size = vocab.len();
    tc.max_len = tc.max_len.max(longest);
    let params = init_params(&tc)?;
    eprintln!(
        "train: {} pairs, {} held out, vocabulary {}, {} parameters",
        pairs.len(),
        heldout.len(),
        vocab.len(),
        params.parameter_count()
    );
    let log_path = loss_log.map_or_else(|| sibling(ckpt, ".loss.csv"), Path::to_path_buf);
    let mut log_w = BufWriter::new(fs::File::create(&log_path).map_err(io_at(&log_path))?);
    writeln!(log_w, "step,batch_loss,train_loss,heldout_loss").map_err(io_at(&log_path))?;
    let mut log_err = None;
    let started = Instant::now();
    let mut trainer = Trainer::new(params, c.training.schedule);
    let report = fit(&mut trainer, &pairs, &heldout, &c.training.fit, |r: &LossRecord| {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        if let Err(e) = writeln!(
            log_w,
            "{},{:.6},{},{}",
            r.step,
            r.batch_loss,
            opt(r.train_loss),
            opt(r.heldout_loss)
        ) {
            log_err.get_or_insert(e);
        }
        if let Some(t) = r.train_loss {
            log::info!("step {} train loss {t:.4}", r.step);
        }
    })?;
    if let Some(e) = log_err {
        return Err(io_at(&log_path)(e));
    }
    log_w.flush().map_err(io_at(&log_path))?;
    fs::write(ckpt, checkpoint::to_bytes(&trainer.params)).map_err(io_at(ckpt))?;
    let vocab_path = sibling(ckpt, ".vocab");
    fs::write(&vocab_path, vocab.to_text()).map_err(io_at(&vocab_path))?;
    println!(
        "steps={} stop={:?} train_loss={:.6} seconds={:.1}",
        trainer.optimizer.step(),
        report.stop,
        report.final_train_loss,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn run_generate(c: &RunConfig, input: &Path, vocab: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let ckpt = required_path(&c.checkpoint, "--checkpoint")?;
    let vocab_path = vocab.map_or_else(|| sibling(ckpt, ".vocab"), Path::to_path_buf);
    require(&vocab_path, "vocabulary")?;
    let vocab: Vocab = corpus::read_vocab(&vocab_path)?;
    let bytes = fs::read(ckpt).map_err(io_at(ckpt))?;
    let params = checkpoint::from_bytes(&bytes)?;
    if params.config().vocab_size != vocab.len() {
        return Err(CliError::Input(format!(
            "checkpoint expects {} tokens but {} has {}",
            params.config().vocab_size,
            vocab_path.display(),
            vocab.len()
        )));
    }
    let rows = read_marked(input, 2)?;
    let mut w = output(out)?;
    let path = out.unwrap_or(Path::new("<stdout>"));
    let (mut scored, mut correct) = (0usize, 0usize);
    for (n, f) in &rows {
        let s = marked_sentence(input, *n, &f[0], &f[1], None)?;
        let generated = match generate_metaphor(&params, &vocab, &s, &c.masking) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("{}:{n}: {e}", input.display());
                writeln!(w, "{}\t", s).map_err(io_at(path))?;
                continue;
            }
        };
        match f.get(2) {
            Some(gold) => {
                let gold = tokenize(gold).map_err(|e| CliError::Input(format!("{}:{n}: {e}", input.display())))?;
                let hit = generated.tokens() == gold.tokens();
                scored += 1;
                correct += usize::from(hit);
                writeln!(w, "{}\t{}\t{}", s, detokenize_tokens(generated.tokens()), u8::from(hit))
            }
            None => writeln!(w, "{}\t{}", s, detokenize_tokens(generated.tokens())),
        }
        .map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))?;
    if scored > 0 {
        eprintln!(
            "exact_match={:.4} correct={correct} total={scored}",
            correct as f64 / scored as f64
        );
    }
    Ok(())
}

fn run_evaluate(
    c: &RunConfig,
    ratings: &Path,
    out: Option<&Path>,
    correlations: Option<&Path>,
    plot: Option<&Path>,
) -> Result<(), CliError> {
    require(ratings, "--ratings")?;
    let set = read_ratings(ratings)?;
    let kept = filter_workers(&set.records, &set.keys, &c.eval.filter);
    eprintln!(
        "evaluate: {} ratings, {} after worker filtering",
        set.records.len(),
        kept.len()
    );
    let means = mean_scores(&kept, &set.items);
    let path = out.unwrap_or(Path::new("<stdout>"));
    let csv_err = |e: csv::Error| io_at(path)(io::Error::other(e));
    write_means(&means, output(out)?).map_err(csv_err)?;
    if let Some(p) = correlations {
        let rows = dimension_correlations(&kept, &set.items, &c.eval.correlation);
        let f = fs::File::create(p).map_err(io_at(p))?;
        write_correlations(&rows, f).map_err(|e| io_at(p)(io::Error::other(e)))?;
    }
    if let Some(p) = plot {
        fs::write(p, means_svg(&means)).map_err(io_at(p))?;
    }
    Ok(())
}

fn run_score(c: &RunConfig, input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let rows = read_marked(input, 2)?;
    let mut pairs = Vec::with_capacity(rows.len());
    let mut words = HashSet::new();
    for (n, f) in &rows {
        let tok = |s: &str| {
            tokenize(s)
                .map(TokenSentence::into_tokens)
                .map_err(|e| CliError::Input(format!("{}:{n}: {e}", input.display())))
        };
        let (x, y) = (tok(&f[0])?, tok(&f[1])?);
        words.extend(x.iter().chain(&y).cloned());
        pairs.push((x, y));
    }
    let table = load_table(c, Some(&words))?;
    let metric = c.metric;
    let mut w = output(out)?;
    let path = out.unwrap_or(Path::new("<stdout>"));
    writeln!(w, "x\ty_prime\toverlap_1\toverlap_2\tmpg").map_err(io_at(path))?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for (x, y) in &pairs {
        let o1 = ngram_overlap(y, x, 1).ok();
        let o2 = ngram_overlap(y, x, 2).ok();
        let mpg = match mpg_score(x, y, &table, &metric) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("{}: {e}", detokenize_tokens(y));
                None
            }
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            detokenize_tokens(x),
            detokenize_tokens(y),
            fmt(o1),
            fmt(o2),
            fmt(mpg)
        )
        .map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))?;
    Ok(())
}

fn run_serve(
    c: &RunConfig,
    items: &Path,
    tests: Option<&Path>,
    log_path: &Path,
    guidelines: &Path,
    static_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    require(items, "--items")?;
    require(guidelines, "--guidelines")?;
    if let Some(d) = &static_dir {
        require(d, "--static")?;
    }
    let items = annotation::load_items(items)?;
    let tests = match tests {
        Some(p) => {
            require(p, "--test-items")?;
            annotation::load_test_items(p)?
        }
        None => Vec::new(),
    };
    let guidelines = Guidelines::load(guidelines)?;
    let (log, old) = RatingLog::open(log_path)?;
    eprintln!("serve: {} items, {} test items, {} logged ratings", items.len(), tests.len(), old.len());
    let store_config = StoreConfig {
        ratings_per_item: c.serve.ratings_per_item,
        test_every: c.serve.test_every,
        lease_ttl: Duration::from_secs(c.serve.lease_seconds),
        filter: c.eval.filter,
    };
    let store = Store::new(items, tests, store_config, Some((log, old)))?;
    let state: Arc<AppState> = AppState::new(store, guidelines);
    let addr = format!("{}:{}", c.serve.host, c.serve.port);
    let rt = tokio::runtime::Runtime::new().map_err(io_at(Path::new("<runtime>")))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| CliError::Io {
                path: PathBuf::from(&addr),
                source,
            })?;
        let local = listener.local_addr().map_err(io_at(Path::new(&addr)))?;
        println!("listening on http://{local}");
        let _ = io::stdout().flush();
        let app = annotation::router(state, static_dir);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        annotation::serve(listener, app, shutdown)
            .await
            .map_err(io_at(Path::new(&addr)))
    })
}

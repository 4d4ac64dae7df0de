use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use jointvec::admm::{
    diagnostics_csv, write_diagnostics_csv, CorpusData, DiagnosticRecord, RelationalModel, Trainer, TrainingData,
};
use jointvec::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, StateVocabs};
use jointvec::config::{Aggregate, Objective, Relational, RunConfig};
use jointvec::corpus::{load_counted, load_text, Vocabulary};
use jointvec::embedding::WordVectors;
use jointvec::eval;
use jointvec::rng::{stream, Stream};
use jointvec::synthetic;
use jointvec::wordnet::{RelationTupleSet, Split, WordNet};
use jointvec::Error;

/// Relative data paths are resolved against this directory when it is set.
const DATA_ROOT_ENV: &str = "JOINTVEC_DATA";

const EXIT_DIVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "jointvec", version, about = "Joint corpus + WordNet word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one objective or a joint pair.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval {
        #[command(subcommand)]
        task: EvalTask,
    },
    /// Recompute diagnostics from the checkpoints of a run.
    Diagnose(DiagnoseArgs),
    /// Build or dump a vocabulary.
    Vocab {
        #[command(subcommand)]
        action: VocabAction,
    },
    /// Write a small synthetic dataset.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Raw text corpus, one sentence per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Counted n-grams, `count<TAB>w1 ... wn`.
    #[arg(long, conflicts_with = "corpus")]
    ngrams: Option<PathBuf>,
    /// Hypernym edges, `child<TAB>parent`.
    #[arg(long)]
    hypernyms: Option<PathBuf>,
    /// Synset membership, `synset<TAB>word`.
    #[arg(long)]
    members: Option<PathBuf>,
    /// Training relation tuples, `left<TAB>relation<TAB>right`.
    #[arg(long)]
    train_tuples: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// nlm, gd, transe, ntn, nlm+gd, nlm+transe or nlm+ntn.
    #[arg(long)]
    objective: Objective,
    /// Flat `key=value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory for checkpoints and diagnostics.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    W,
    V,
    Avg,
}

#[derive(Args)]
struct EvalCommon {
    /// Checkpoint directory.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which vectors to evaluate. Defaults to `v` when the checkpoint has a
    /// relational side, else `w`.
    #[arg(long, value_enum)]
    embedding_side: Option<SideArg>,
    /// Results file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalTask {
    /// Relation tuple classification with per-relation thresholds.
    Kb {
        #[command(flatten)]
        common: EvalCommon,
        /// Labelled dev tuples for threshold fitting.
        #[arg(long)]
        dev: PathBuf,
        /// Labelled test tuples.
        #[arg(long)]
        test: PathBuf,
        /// Defaults to the file the checkpoint was trained with.
        #[arg(long)]
        hypernyms: Option<PathBuf>,
        #[arg(long)]
        members: Option<PathBuf>,
    },
    /// Relational similarity over category files.
    Analogy {
        #[command(flatten)]
        common: EvalCommon,
        /// Category files, or directories of them.
        #[arg(long, required = true, num_args = 1..)]
        categories: Vec<PathBuf>,
        #[arg(long)]
        aggregate: Option<Aggregate>,
    },
    /// k-means cluster ids for every word.
    Clusters {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct DiagnoseArgs {
    /// A training output directory, or individual checkpoint directories.
    #[arg(required = true, num_args = 1..)]
    paths: Vec<PathBuf>,
    /// CSV destination; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VocabAction {
    /// Count a corpus and write `word<TAB>count`.
    Build {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, conflicts_with = "corpus")]
        ngrams: Option<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        max_size: usize,
        /// Destination; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the vocabulary of one checkpoint side with corpus counts.
    Dump {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "w")]
        side: DumpSide,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DumpSide {
    W,
    V,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Class-structured sentences with a matching two-level WordNet.
    Toy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Relation tuples planted on a translation grid.
    Planted {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Eval { task } => run_eval(task),
        Command::Diagnose(args) => diagnose(args),
        Command::Vocab { action } => vocab(action),
        Command::Generate { kind } => generate(kind),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV) {
            return Path::new(&root).join(path);
        }
    }
    path.to_path_buf()
}

fn existing(path: &Path) -> Result<PathBuf> {
    let p = resolve(path);
    if !p.is_file() {
        bail!("missing data file: {}", p.display());
    }
    Ok(p)
}

fn require<'a>(opt: &'a Option<PathBuf>, flag: &str, objective: Objective) -> Result<&'a PathBuf> {
    opt.as_ref()
        .ok_or_else(|| anyhow!("objective `{objective}` needs --{flag}"))
}

/// Everything a run reads from disk, plus the resolved paths for the
/// checkpoint metadata.
#[derive(Default)]
struct LoadedData {
    corpus: Option<CorpusData>,
    wordnet: Option<WordNet>,
    tuples: Option<RelationTupleSet>,
    paths: BTreeMap<String, String>,
}

impl LoadedData {
    fn training(&self) -> TrainingData<'_> {
        TrainingData {
            corpus: self.corpus.as_ref(),
            wordnet: self.wordnet.as_ref(),
            tuples: self.tuples.as_ref(),
        }
    }
}

fn load_corpus(config: &RunConfig, text: Option<&Path>, counted: Option<&Path>) -> Result<CorpusData> {
    let (vocab, ngrams) = match (text, counted) {
        (Some(p), _) => load_text(p, config.ngram_order, config.vocab_size)?,
        (None, Some(p)) => {
            let (v, n) = load_counted(p, config.vocab_size)?;
            if n.order() != config.ngram_order {
                bail!(
                    "{} holds {}-grams but ngram_order is {}",
                    p.display(),
                    n.order(),
                    config.ngram_order
                );
            }
            (v, n)
        }
        (None, None) => bail!("no corpus given"),
    };
    Ok(CorpusData { vocab, ngrams })
}

fn load_wordnet(config: &RunConfig, hypernyms: &Path, members: &Path) -> Result<WordNet> {
    let mut wn = WordNet::load(hypernyms, members, config.wordnet_vocab_size)?;
    if config.distance_cache {
        wn.graph.enable_distance_cache();
    }
    Ok(wn)
}

fn load_data(config: &RunConfig, objective: Objective, args: &DataArgs) -> Result<LoadedData> {
    let mut out = LoadedData::default();
    // Check every path before reading anything, so the error names the
    // first missing file rather than a downstream symptom.
    let mut record = |key: &str, p: &Path| -> Result<PathBuf> {
        let p = existing(p)?;
        out.paths.insert(key.to_string(), p.display().to_string());
        Ok(p)
    };
    let mut text = None;
    let mut counted = None;
    if objective.distributional {
        match (&args.corpus, &args.ngrams) {
            (Some(p), _) => text = Some(record("corpus", p)?),
            (None, Some(p)) => counted = Some(record("ngrams", p)?),
            (None, None) => bail!("objective `{objective}` needs --corpus or --ngrams"),
        }
    }
    let mut wn_paths = None;
    let mut tuples_path = None;
    if let Some(kind) = objective.relational {
        let h = record("hypernyms", require(&args.hypernyms, "hypernyms", objective)?)?;
        let m = record("members", require(&args.members, "members", objective)?)?;
        wn_paths = Some((h, m));
        if kind != Relational::Gd {
            tuples_path = Some(record(
                "train_tuples",
                require(&args.train_tuples, "train-tuples", objective)?,
            )?);
        }
    }

    if objective.distributional {
        out.corpus = Some(load_corpus(config, text.as_deref(), counted.as_deref())?);
    }
    if let Some((h, m)) = wn_paths {
        let wn = load_wordnet(config, &h, &m)?;
        if let Some(p) = tuples_path {
            let mut set = RelationTupleSet::default();
            set.read_split(&p, Split::Train, &wn.graph)?;
            out.tuples = Some(set);
        }
        out.wordnet = Some(wn);
    }
    Ok(out)
}

fn build_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(p) => RunConfig::from_file(&resolve(p))?,
        None => RunConfig::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        config.set(k.trim(), v)?;
    }
    if let Some(d) = args.dim {
        config.dim = d;
    }
    if let Some(r) = args.rho {
        config.rho = r;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(n) = args.iters {
        config.iterations = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn save(dir: &Path, trainer: &Trainer<'_>, data: &LoadedData) -> Result<()> {
    let vocabs = StateVocabs {
        w: data.corpus.as_ref().map(|c| &c.vocab),
        v: data.wordnet.as_ref().map(|w| &w.vocab),
    };
    let relations = data.tuples.as_ref().map(|t| t.relations.as_slice()).unwrap_or(&[]);
    save_checkpoint(dir, trainer.config(), trainer.state(), vocabs, relations, &data.paths)
        .with_context(|| format!("writing checkpoint {}", dir.display()))
}

fn train(args: TrainArgs) -> Result<ExitCode> {
    let config = build_config(&args)?;
    let data = load_data(&config, args.objective, &args.data)?;
    let mut trainer = Trainer::new(config.clone(), args.objective, data.training())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let diag_path = args.out.join("diagnostics.csv");

    for t in 1..=config.iterations {
        match trainer.step() {
            Ok(rec) => {
                info!(
                    "iteration {t}: loss {:.6} |y| {:.6} residual {:.6}",
                    rec.joint_loss, rec.mean_y_norm, rec.mean_scaled_residual
                );
                if t % config.checkpoint_every == 0 && t != config.iterations {
                    save(&args.out.join(format!("iter-{t:06}")), &trainer, &data)?;
                }
            }
            Err(e @ Error::Diverged { .. }) => {
                let dir = args.out.join("last_good");
                save(&dir, &trainer, &data)?;
                write_diagnostics_csv(&diag_path, trainer.history())?;
                eprintln!("error: {e}; last good state saved to {}", dir.display());
                return Ok(ExitCode::from(EXIT_DIVERGED));
            }
            Err(e) => return Err(e.into()),
        }
    }
    save(&args.out.join("final"), &trainer, &data)?;
    write_diagnostics_csv(&diag_path, trainer.history())?;
    Ok(ExitCode::SUCCESS)
}

/// Reloads the data a checkpoint was trained on, from its recorded paths.
fn reload_data(ck: &Checkpoint) -> Result<LoadedData> {
    let path = |k: &str| ck.data.get(k).map(PathBuf::from);
    let args = DataArgs {
        corpus: path("corpus"),
        ngrams: path("ngrams"),
        hypernyms: path("hypernyms"),
        members: path("members"),
        train_tuples: path("train_tuples"),
    };
    let mut data = load_data(&ck.config, ck.objective, &args)?;
    if let Some(t) = &data.tuples {
        if t.relations != ck.relations {
            bail!("relation list of the training tuples no longer matches the checkpoint");
        }
    }
    data.paths = ck.data.clone();
    Ok(data)
}

fn checkpoint_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for p in paths {
        if p.join("meta.txt").is_file() {
            dirs.push(p.clone());
            continue;
        }
        let mut found: Vec<PathBuf> = fs::read_dir(p)
            .with_context(|| format!("reading {}", p.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join("meta.txt").is_file())
            .collect();
        if found.is_empty() {
            bail!("no checkpoints under {}", p.display());
        }
        found.sort();
        dirs.extend(found);
    }
    Ok(dirs)
}

fn diagnose(args: DiagnoseArgs) -> Result<ExitCode> {
    let mut records: BTreeMap<usize, DiagnosticRecord> = BTreeMap::new();
    for dir in checkpoint_dirs(&args.paths)? {
        let ck = load_checkpoint(&dir)?;
        if ck.iteration == 0 {
            continue;
        }
        let data = reload_data(&ck)?;
        let trainer = Trainer::from_state(ck.config.clone(), data.training(), ck.to_state()?)?;
        records.insert(ck.iteration, trainer.diagnose()?);
    }
    let records: Vec<DiagnosticRecord> = records.into_values().collect();
    emit(&diagnostics_csv(&records), args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn pick_side(ck: &Checkpoint, side: Option<SideArg>) -> Result<WordVectors> {
    let side = side.unwrap_or(if ck.v.is_some() { SideArg::V } else { SideArg::W });
    let missing = |s: &str| anyhow!("checkpoint {} has no {s} embeddings", ck.objective);
    Ok(match side {
        SideArg::W => ck.w.clone().ok_or_else(|| missing("w"))?,
        SideArg::V => ck.v.clone().ok_or_else(|| missing("v"))?,
        SideArg::Avg => {
            if ck.w.is_none() || ck.v.is_none() {
                return Err(missing("w and v"));
            }
            ck.averaged()?
        }
    })
}

fn run_eval(task: EvalTask) -> Result<ExitCode> {
    match task {
        EvalTask::Kb {
            common,
            dev,
            test,
            hypernyms,
            members,
        } => {
            let ck = load_checkpoint(&common.checkpoint)?;
            let model = match &ck.rel {
                Some(RelationalModel::Kb(m)) => m,
                _ => bail!("kb evaluation needs a TransE or NTN checkpoint, got `{}`", ck.objective),
            };
            let emb = pick_side(&ck, common.embedding_side)?;
            let recorded = |k: &str| ck.data.get(k).map(PathBuf::from);
            let h = hypernyms
                .or_else(|| recorded("hypernyms"))
                .ok_or_else(|| anyhow!("--hypernyms is required"))?;
            let m = members
                .or_else(|| recorded("members"))
                .ok_or_else(|| anyhow!("--members is required"))?;
            let wn = load_wordnet(&ck.config, &existing(&h)?, &existing(&m)?)?;
            let mut tuples = RelationTupleSet {
                relations: ck.relations.clone(),
                ..Default::default()
            };
            tuples.read_split(&existing(&dev)?, Split::Dev, &wn.graph)?;
            tuples.read_split(&existing(&test)?, Split::Test, &wn.graph)?;
            for r in &tuples.relations[ck.relations.len()..] {
                warn!("relation `{r}` was not seen in training");
            }
            let scorer = eval::TupleScorer::new(model, &emb, &wn)?;
            let thresholds = eval::fit_thresholds(&scorer, &tuples.dev, &tuples.relations);
            let report = eval::kb_classify(&scorer, &thresholds, &tuples.test, &tuples.relations);
            eval::write_kb_csv(&common.out, &report)?;
            println!(
                "overall accuracy {:.4} over {} tuples",
                report.overall(),
                report.total()
            );
        }
        EvalTask::Analogy {
            common,
            categories,
            aggregate,
        } => {
            let ck = load_checkpoint(&common.checkpoint)?;
            let emb = pick_side(&ck, common.embedding_side)?;
            let mut files = Vec::new();
            for p in &categories {
                let p = resolve(p);
                if p.is_dir() {
                    let mut inner: Vec<PathBuf> = fs::read_dir(&p)
                        .with_context(|| format!("reading {}", p.display()))?
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|f| f.is_file())
                        .collect();
                    inner.sort();
                    files.extend(inner);
                } else if p.is_file() {
                    files.push(p);
                } else {
                    bail!("missing data file: {}", p.display());
                }
            }
            let cats = files
                .iter()
                .map(|f| eval::read_category(f))
                .collect::<jointvec::Result<Vec<_>>>()?;
            let agg = aggregate.unwrap_or(ck.config.analogy_aggregate);
            let results = eval::evaluate_analogies(&emb, &cats, agg);
            eval::write_analogy_csv(&common.out, &results)?;
            let mut pooled = eval::MaxDiffResult::default();
            for r in &results {
                pooled.merge(&r.maxdiff);
            }
            match pooled.accuracy() {
                Some(a) => println!("maxdiff accuracy {a:.4} over {} questions", pooled.questions),
                None => println!("no answerable maxdiff questions"),
            }
        }
        EvalTask::Clusters { common, k, seed } => {
            let ck = load_checkpoint(&common.checkpoint)?;
            let emb = pick_side(&ck, common.embedding_side)?;
            let k = k.unwrap_or(ck.config.kmeans_k);
            let mut rng = stream(seed.unwrap_or(ck.config.seed), Stream::Eval, 0);
            let (words, result) = eval::kmeans_export(&emb, k, &mut rng)?;
            eval::write_clusters_tsv(&common.out, &words, result.sse())?;
            println!("k={k} sse {}", result.sse());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn vocab_tsv(v: &Vocabulary) -> String {
    v.words()
        .iter()
        .enumerate()
        .map(|(id, w)| format!("{w}\t{}\n", v.count(id)))
        .collect()
}

fn vocab(action: VocabAction) -> Result<ExitCode> {
    match action {
        VocabAction::Build {
            corpus,
            ngrams,
            max_size,
            out,
        } => {
            let vocab = match (corpus, ngrams) {
                (Some(p), _) => load_text(&existing(&p)?, 1, max_size)?.0,
                (None, Some(p)) => load_counted(&existing(&p)?, max_size)?.0,
                (None, None) => bail!("vocab build needs --corpus or --ngrams"),
            };
            emit(&vocab_tsv(&vocab), out.as_deref())?;
        }
        VocabAction::Dump { checkpoint, side, out } => {
            let ck = load_checkpoint(&checkpoint)?;
            let data = reload_data(&ck)?;
            let (stored, vocab) = match side {
                DumpSide::W => (ck.w.as_ref(), data.corpus.as_ref().map(|c| &c.vocab)),
                DumpSide::V => (ck.v.as_ref(), data.wordnet.as_ref().map(|w| &w.vocab)),
            };
            let (stored, vocab) = match (stored, vocab) {
                (Some(s), Some(v)) => (s, v),
                _ => bail!("checkpoint `{}` has no such side", ck.objective),
            };
            if stored.vocab.words() != vocab.words() {
                bail!("the recorded training data no longer matches the checkpoint vocabulary");
            }
            emit(&vocab_tsv(vocab), out.as_deref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(kind: GenerateKind) -> Result<ExitCode> {
    match kind {
        GenerateKind::Toy { out, seed } => {
            let spec = synthetic::ToySpec {
                seed,
                ..Default::default()
            };
            synthetic::write_toy_files(&out, &synthetic::toy_world(&spec)?)?;
        }
        GenerateKind::Planted { out, seed } => {
            let spec = synthetic::PlantedSpec {
                seed,
                ..Default::default()
            };
            synthetic::write_planted_files(&out, &synthetic::planted_transe(&spec)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

//! Subcommand implementations. Each returns the text it prints on success.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::{json, Value};
use transnets_core::corpus::synth::{generate, SynthConfig};
use transnets_core::corpus::{Vocabulary, DEFAULT_RATIOS, DEFAULT_VOCAB_SIZE};
use transnets_core::embeddings::{random_embeddings, EmbeddingTable};
use transnets_core::eval::{evaluate, most_similar_review, retrieval_candidates, EvalReport, RetrievalResult};
use transnets_core::gradcheck::{run_suite, CheckOutcome, TOLERANCE};
use transnets_core::models::PairInput;
use transnets_core::training::{
    heldout_examples, train_loop, Checkpoint, ExampleBuilder, Partition, ProfileIndex, TrainConfig, TrainExample,
    TrainRun,
};

use crate::checkpoint::{config_digest, digest_hex, load_checkpoint, peek_digest, save_checkpoint};
use crate::dataset::{write_file, Dataset};
use crate::embedding_file::load_embeddings;
use crate::error::{Error, ErrorCode, Result};
use crate::experiment::{flag_layer, parse_layers, EmbeddingSource, ExperimentConfig};
use crate::records::{load_reviews, save_records, Format};
use crate::report::{format_eval, format_log, format_retrieval};

pub const CHECKPOINT_FILE: &str = "checkpoint.tnsn";
pub const LOG_FILE: &str = "train.log";
pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    /// Raw review file
    #[arg(long)]
    pub input: PathBuf,
    /// jsonl, yelp or amazon
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    /// Dataset directory to create
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Most frequent training tokens kept in the vocabulary
    #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
    pub vocab_size: usize,
}

pub fn prepare(args: &PrepareArgs) -> Result<String> {
    let format: Format = args.format.parse()?;
    let target = args.out.join(crate::dataset::RECORDS_FILE);
    if let (Ok(a), Ok(b)) = (fs::canonicalize(&args.input), fs::canonicalize(&target)) {
        if a == b {
            return Err(Error::new(
                ErrorCode::Config,
                "output directory would overwrite the input file",
            ));
        }
    }
    let loaded = load_reviews(&args.input, format)?;
    let dataset = Dataset::build(loaded.records, DEFAULT_RATIOS, args.seed, args.vocab_size)?;
    dataset.write(&args.out, loaded.dropped_empty)?;
    let s = dataset.stats();
    Ok(format!(
        "#Users\t#Items\t#Ratings & Reviews\n{}\t{}\t{}\ntrain/validation/test\t{}/{}/{}\tdropped_empty\t{}\n",
        s.users,
        s.items,
        s.reviews,
        dataset.split.train.len(),
        dataset.split.validation.len(),
        dataset.split.test.len(),
        loaded.dropped_empty
    ))
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// JSON experiment config; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the CPU-scale profile instead of the full-size defaults
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// mf, deepconn, deepconn-revab, transnet or transnet-ext
    #[arg(long)]
    pub model: Option<String>,
    /// Transform depth, or an inclusive range A..B to sweep
    #[arg(long)]
    pub layers: Option<String>,
    /// `random` or a path to a `token v1 ... vd` file
    #[arg(long)]
    pub embeddings: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub fm_rank: Option<usize>,
    /// squared or norm
    #[arg(long)]
    pub trans_loss: Option<String>,
    /// once-per-build or per-epoch
    #[arg(long)]
    pub profile_shuffle: Option<String>,
    #[arg(long)]
    pub fresh_step3_mask: bool,
    #[arg(long)]
    pub joint_training: bool,
    #[arg(long)]
    pub test_reviews: bool,
}

impl TrainArgs {
    /// Resolved configs, one per swept depth.
    pub fn configs(&self) -> Result<Vec<ExperimentConfig>> {
        let base = if self.desk {
            TrainConfig::desk()
        } else {
            TrainConfig::default()
        };
        let mut layers = Vec::new();
        if let Some(path) = &self.config {
            layers.push(ExperimentConfig::read_layer(path)?);
        }
        let depths = self.layers.as_deref().map(parse_layers).transpose()?;
        let set = |b: bool| b.then_some(Value::Bool(true));
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| json!(p));
        let embeddings = self.embeddings.as_ref().map(|e| {
            if e == "random" {
                json!("random")
            } else {
                json!({ "file": e })
            }
        });
        layers.push(flag_layer(vec![
            ("data", path(&self.data)),
            ("out", path(&self.out)),
            ("model", self.model.as_ref().map(|m| json!(m))),
            ("embeddings", embeddings),
            ("seed", self.seed.map(|v| json!(v))),
            ("max_epochs", self.epochs.map(|v| json!(v))),
            ("batch_size", self.batch_size.map(|v| json!(v))),
            ("eval_every", self.eval_every.map(|v| json!(v))),
            ("lr", self.lr.map(|v| json!(v))),
            ("keep_prob", self.keep_prob.map(|v| json!(v))),
            ("vocab_size", self.vocab_size.map(|v| json!(v))),
            ("dims.seq_len", self.seq_len.map(|v| json!(v))),
            ("dims.embed_dim", self.embed_dim.map(|v| json!(v))),
            ("dims.filters", self.filters.map(|v| json!(v))),
            ("dims.window", self.window.map(|v| json!(v))),
            ("dims.latent", self.latent.map(|v| json!(v))),
            ("dims.fm_rank", self.fm_rank.map(|v| json!(v))),
            ("trans_loss", self.trans_loss.as_ref().map(|v| json!(v))),
            ("profile_shuffle", self.profile_shuffle.as_ref().map(|v| json!(v))),
            ("fresh_step3_mask", set(self.fresh_step3_mask)),
            ("joint_training", set(self.joint_training)),
            ("test_reviews", set(self.test_reviews)),
        ]));
        let config = ExperimentConfig::layered(base, &layers)?;
        match depths {
            None => Ok(vec![config]),
            Some(d) if d.len() == 1 => {
                let mut c = config;
                c.train.dims.layers = d[0];
                Ok(vec![c])
            }
            Some(d) => Ok(d
                .into_iter()
                .map(|l| {
                    let mut c = config.clone();
                    c.train.dims.layers = l;
                    c.out = config.out.join(format!("L{l}"));
                    c
                })
                .collect()),
        }
    }
}

/// The first `config.vocab_size` tokens of the prepared vocabulary.
pub fn training_vocab(dataset: &Dataset, config: &TrainConfig) -> Result<Vocabulary> {
    let tokens = dataset.vocab.tokens();
    let keep = tokens.len().min(config.vocab_size);
    Ok(Vocabulary::from_tokens(tokens[..keep].to_vec())?)
}

pub fn embedding_table(config: &ExperimentConfig, vocab: &Vocabulary) -> Result<EmbeddingTable> {
    let dim = config.train.dims.embed_dim;
    match &config.embeddings {
        EmbeddingSource::Random => Ok(random_embeddings(vocab, dim, config.train.seed)?),
        EmbeddingSource::File(p) => load_embeddings(p, vocab, dim, config.train.seed),
    }
}

/// Trains one configuration and writes its outputs into `config.out`.
pub fn train_experiment(config: &ExperimentConfig) -> Result<TrainRun> {
    config.validate()?;
    let dataset = Dataset::load(&config.data)?;
    let vocab = training_vocab(&dataset, &config.train)?;
    let table = embedding_table(config, &vocab)?;
    let run = train_loop(&config.train, &dataset.split, &vocab, &table, &mut ())?;
    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join(CONFIG_FILE), &config.to_json())?;
    save_checkpoint(&out.join(CHECKPOINT_FILE), &run.best)?;
    write_file(&out.join(LOG_FILE), &format_log(&run.log))?;
    write_file(&out.join(SUMMARY_FILE), &summary(config, &run))?;
    Ok(run)
}

fn summary(config: &ExperimentConfig, run: &TrainRun) -> String {
    let b = &run.best;
    format!(
        "model\t{}\nlayers\t{}\nbatches\t{}\nbest_batch\t{}\nbest_val_mse\t{}\ntest_mse_at_best\t{}\nconfig_digest\t{}\n",
        config.train.model,
        config.train.dims.layers,
        run.batches,
        b.batch,
        b.best_val_mse,
        b.test_mse_at_best,
        digest_hex(&config_digest(&config.train))
    )
}

pub fn train(args: &TrainArgs) -> Result<String> {
    let configs = args.configs()?;
    let problems: Vec<String> = configs.iter().flat_map(ExperimentConfig::problems).collect();
    if !problems.is_empty() {
        return Err(Error::new(ErrorCode::Config, problems.join("; ")));
    }
    let sweep = configs.len() > 1;
    let mut out = String::from("layers\tbatches\tbest_batch\tbest_val_mse\ttest_mse_at_best\tout\n");
    for c in &configs {
        let run = train_experiment(c)?;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            c.train.dims.layers,
            run.batches,
            run.best.batch,
            run.best.best_val_mse,
            run.best.test_mse_at_best,
            c.out.display()
        );
    }
    if sweep {
        let root = args
            .out
            .clone()
            .unwrap_or_else(|| configs[0].out.parent().map(Path::to_path_buf).unwrap_or_default());
        write_file(&root.join("sweep.tsv"), &out)?;
    }
    Ok(out)
}

/// Checkpoint, dataset and profile index shared by the query commands.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Prepared dataset directory; defaults to the one named by --config
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Experiment config the checkpoint must have been trained with
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub struct Loaded {
    pub checkpoint: Checkpoint,
    pub dataset: Dataset,
    pub index: ProfileIndex,
}

impl Loaded {
    pub fn builder(&self) -> ExampleBuilder<'_> {
        ExampleBuilder::new(
            &self.index,
            &self.checkpoint.vocab,
            self.checkpoint.config.profile_rules(),
        )
    }
}

pub fn open(args: &ModelArgs) -> Result<Loaded> {
    let expected = args.config.as_deref().map(ExperimentConfig::load).transpose()?;
    if let Some(exp) = &expected {
        let bytes = fs::read(&args.checkpoint).map_err(|e| Error::io(&args.checkpoint, e))?;
        let stored = peek_digest(&bytes)?;
        let wanted = config_digest(&exp.train);
        if stored != wanted {
            return Err(Error::new(
                ErrorCode::DigestMismatch,
                format!(
                    "checkpoint was trained with config {} but {} has digest {}",
                    digest_hex(&stored),
                    args.config.as_ref().expect("config given").display(),
                    digest_hex(&wanted)
                ),
            ));
        }
    }
    let data = match (&args.data, &expected) {
        (Some(d), _) => d.clone(),
        (None, Some(exp)) => exp.data.clone(),
        (None, None) => return Err(Error::new(ErrorCode::Usage, "--data or --config is required")),
    };
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let dataset = Dataset::load(&data)?;
    let index = ProfileIndex::new(&dataset.split.train, &dataset.split.train_ids, &checkpoint.vocab);
    Ok(Loaded {
        checkpoint,
        dataset,
        index,
    })
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// train, validation or test
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Also write the report into this directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_partition(s: &str) -> Result<Partition> {
    match s {
        "train" => Ok(Partition::Train),
        "validation" => Ok(Partition::Validation),
        "test" => Ok(Partition::Test),
        other => Err(Error::new(ErrorCode::Usage, format!("unknown split {other:?}"))),
    }
}

/// Examples of one partition as the training loop builds them.
pub fn partition_examples(loaded: &Loaded, partition: Partition) -> Vec<TrainExample> {
    let builder = loaded.builder();
    match partition {
        Partition::Train => (0..loaded.index.len()).map(|i| builder.train_example(i, 0)).collect(),
        p => heldout_examples(&builder, &loaded.dataset.split, p),
    }
}

pub fn evaluate_split(loaded: &Loaded, partition: Partition) -> Result<EvalReport> {
    let ck = &loaded.checkpoint;
    Ok(evaluate(&ck.model, &ck.table, &partition_examples(loaded, partition))?)
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<String> {
    let partition = parse_partition(&args.split)?;
    let loaded = open(&args.model)?;
    let text = format_eval(&args.split, &evaluate_split(&loaded, partition)?);
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_file(&out.join(format!("eval_{}.tsv", args.split)), &text)?;
    }
    Ok(text)
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub item: String,
}

pub fn predict_pair(loaded: &Loaded, user: &str, item: &str) -> Result<f64> {
    let (a, b) = loaded.builder().query(user, item);
    let input = PairInput {
        user_id: user,
        item_id: item,
        text_a: &a,
        text_b: &b,
    };
    Ok(loaded.checkpoint.model.predict(&loaded.checkpoint.table, &input)?)
}

pub fn predict(args: &PredictArgs) -> Result<String> {
    let loaded = open(&args.model)?;
    let r = predict_pair(&loaded, &args.user, &args.item)?;
    Ok(format!("user\titem\tprediction\n{}\t{}\t{r}\n", args.user, args.item))
}

#[derive(Debug, Clone, Args)]
pub struct SimilarArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub item: String,
    /// Ranked candidates to print
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    /// Also write the ranking into this directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Training reviews of `item` by other users, ranked by distance to the
/// source representation of (user, item). Review ids are record line
/// numbers in the dataset, counted from 0.
pub fn similar_reviews(loaded: &Loaded, user: &str, item: &str) -> Result<RetrievalResult> {
    let ck = &loaded.checkpoint;
    let (a, b) = loaded.builder().query(user, item);
    let candidates = retrieval_candidates(&loaded.index, user, item, ck.config.dims.seq_len);
    Ok(most_similar_review(
        &ck.model,
        &ck.table,
        user,
        item,
        (&a, &b),
        &candidates,
    )?)
}

pub fn similar(args: &SimilarArgs) -> Result<String> {
    let loaded = open(&args.model)?;
    let text = format_retrieval(&similar_reviews(&loaded, &args.user, &args.item)?, args.k);
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_file(&out.join(format!("similar_{}_{}.tsv", args.user, args.item)), &text)?;
    }
    Ok(text)
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Random tiny configurations per case kind
    #[arg(long, default_value_t = 8)]
    pub configs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<String> {
    let report = run_suite(args.configs, args.seed)?;
    let mut by_kind: BTreeMap<&str, Vec<&CheckOutcome>> = BTreeMap::new();
    for o in &report.outcomes {
        by_kind.entry(o.name.split('#').next().unwrap_or(&o.name)).or_default().push(o);
    }
    let mut out = String::from("case\tconfigs\tchecked\tskipped\tmax_rel_error\tresult\n");
    for (name, os) in &by_kind {
        let worst = os.iter().map(|o| o.max_rel_error).fold(0.0, f64::max);
        let ok = os.iter().all(|o| o.passed());
        let _ = writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{worst:.3e}\t{}",
            os.len(),
            os.iter().map(|o| o.checked).sum::<usize>(),
            os.iter().map(|o| o.skipped).sum::<usize>(),
            if ok { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(
        out,
        "all\t{}\t{}\t{}\t{:.3e}\t{}",
        report.outcomes.len(),
        report.checked(),
        report.skipped(),
        report.max_rel_error(),
        if report.passed() { "pass" } else { "FAIL" }
    );
    if report.passed() {
        Ok(out)
    } else {
        print!("{out}");
        Err(Error::new(
            ErrorCode::Gradcheck,
            format!(
                "max relative error {:.3e} is not below {TOLERANCE:e}",
                report.max_rel_error()
            ),
        ))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON-lines file to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub items: usize,
    #[arg(long, default_value_t = 5000)]
    pub reviews: usize,
    /// Filler words per review
    #[arg(long, default_value_t = 6)]
    pub filler: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn synth(args: &SynthArgs) -> Result<String> {
    let cfg = SynthConfig {
        users: args.users,
        items: args.items,
        reviews: args.reviews,
        filler: args.filler,
        seed: args.seed,
    };
    if cfg.users == 0 || cfg.items == 0 {
        return Err(Error::new(ErrorCode::Config, "users and items must be positive"));
    }
    if cfg.reviews > cfg.users.saturating_mul(cfg.items) {
        return Err(Error::new(
            ErrorCode::Config,
            format!(
                "{} reviews exceed the {} distinct user-item pairs",
                cfg.reviews,
                cfg.users * cfg.items
            ),
        ));
    }
    let corpus = generate(&cfg);
    save_records(&args.out, &corpus.records)?;
    Ok(format!(
        "wrote {} reviews to {}\n",
        corpus.records.len(),
        args.out.display()
    ))
}

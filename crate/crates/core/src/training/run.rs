//! The training loop: epochs of shuffled batches, periodic evaluation and
//! selection of the checkpoint with the lowest validation MSE.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::data::{ExampleBuilder, Partition, ProfileIndex, ProfileRules, TrainExample};
use super::steps::{train_batch, BatchLosses, Optimizers};
use super::{ProfileShuffle, TrainConfig};
use crate::corpus::{DatasetSplit, Vocabulary};
use crate::embeddings::EmbeddingTable;
use crate::eval::evaluate;
use crate::models::Model;
use crate::rng::{self, fnv1a};
use crate::{Error, Result};

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    /// batches processed so far
    pub batch: usize,
    /// mean losses over the batches since the previous evaluation
    pub loss_t: Option<f64>,
    pub loss_trans: Option<f64>,
    pub loss_s: f64,
    pub val_mse: f64,
    pub test_mse: f64,
}

/// Everything needed to resume or evaluate a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    pub optimizers: Optimizers,
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
    pub best_val_mse: f64,
    pub test_mse_at_best: f64,
    /// batch counter at the time of the snapshot
    pub batch: usize,
}

/// Keeps the first evaluation with the lowest validation MSE.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BestSelector {
    best: Option<(f64, f64, usize)>,
}

impl BestSelector {
    /// Returns true when `val` is a strict improvement.
    pub fn offer(&mut self, val: f64, test: f64, batch: usize) -> bool {
        let better = self.best.is_none_or(|(b, _, _)| val < b);
        if better {
            self.best = Some((val, test, batch));
        }
        better
    }

    /// (validation MSE, test MSE, batch) of the best evaluation.
    pub fn best(&self) -> Option<(f64, f64, usize)> {
        self.best
    }
}

/// Callbacks from the training loop. All methods default to no-ops.
pub trait TrainObserver {
    fn on_batch(&mut self, _batch: usize, _losses: &BatchLosses) {}
    fn on_eval(&mut self, _point: &EvalPoint) {}
    fn on_epoch_end(&mut self, _epoch: usize, _batch: usize) {}
}

impl TrainObserver for () {}

/// Result of [`train_loop`].
#[derive(Debug, Clone)]
pub struct TrainRun {
    /// Snapshot at the lowest validation MSE.
    pub best: Checkpoint,
    pub log: Vec<EvalPoint>,
    /// Model after the last batch.
    pub last: Model,
    pub batches: usize,
}

#[derive(Default)]
struct Running {
    t: f64,
    trans: f64,
    s: f64,
    n: usize,
}

impl Running {
    fn add(&mut self, l: &BatchLosses) {
        self.t += l.loss_t.unwrap_or(0.0);
        self.trans += l.loss_trans.unwrap_or(0.0);
        self.s += l.loss_s;
        self.n += 1;
    }

    fn take(&mut self, transnet: bool) -> (Option<f64>, Option<f64>, f64) {
        let n = self.n.max(1) as f64;
        let out = (
            transnet.then_some(self.t / n),
            transnet.then_some(self.trans / n),
            self.s / n,
        );
        *self = Self::default();
        out
    }
}

impl TrainConfig {
    /// Profile assembly rules implied by this configuration.
    pub fn profile_rules(&self) -> ProfileRules {
        ProfileRules {
            seq_len: self.dims.seq_len,
            exclude_joint: self.model.excludes_joint_review(),
            include_heldout_review: self.test_reviews,
            shuffle: self.profile_shuffle,
            seed: rng::derive_str(self.seed, "profiles"),
        }
    }
}

/// Held-out examples of one partition.
pub fn heldout_examples(builder: &ExampleBuilder<'_>, split: &DatasetSplit, partition: Partition) -> Vec<TrainExample> {
    let records = match partition {
        Partition::Train => &split.train,
        Partition::Validation => &split.validation,
        Partition::Test => &split.test,
    };
    records
        .iter()
        .enumerate()
        .map(|(i, r)| builder.heldout_example(partition, i, r))
        .collect()
}

/// Trains the configured model on `split.train`, evaluating on the
/// validation and test partitions every `eval_every` batches.
pub fn train_loop(
    config: &TrainConfig,
    split: &DatasetSplit,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    observer: &mut dyn TrainObserver,
) -> Result<TrainRun> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::Empty("training partition"));
    }
    if split.validation.is_empty() {
        return Err(Error::Empty("validation partition"));
    }
    if split.test.is_empty() {
        return Err(Error::Empty("test partition"));
    }
    let model = Model::new(config.model, config.dims, &split.train, config.seed)?;
    train_model(config, model, split, vocab, table, observer)
}

/// [`train_loop`] starting from an existing model.
pub fn train_model(
    config: &TrainConfig,
    mut model: Model,
    split: &DatasetSplit,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    observer: &mut dyn TrainObserver,
) -> Result<TrainRun> {
    let index = ProfileIndex::new(&split.train, &split.train_ids, vocab);
    let builder = ExampleBuilder::new(&index, vocab, config.profile_rules());
    let validation = heldout_examples(&builder, split, Partition::Validation);
    let test = heldout_examples(&builder, split, Partition::Test);
    let build_train =
        |epoch: usize| -> Vec<TrainExample> { (0..index.len()).map(|i| builder.train_example(i, epoch)).collect() };

    let mut optimizers = Optimizers::new(&model, config.adam);
    let mut dropout_rng = rng::stream(config.seed, "dropout");
    let mut examples = build_train(0);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut running = Running::default();
    let mut tracker = Tracker {
        config,
        vocab,
        table,
        validation: &validation,
        test: &test,
        selector: BestSelector::default(),
        best: None,
        log: Vec::new(),
    };
    let mut batch = 0usize;

    for epoch in 0..config.max_epochs {
        if epoch > 0 && config.profile_shuffle == ProfileShuffle::PerEpoch {
            examples = build_train(epoch);
        }
        order.sort_unstable();
        order.shuffle(&mut rng::stream_keyed(config.seed, &[fnv1a(b"shuffle"), epoch as u64]));
        for chunk in order.chunks(config.batch_size) {
            let items: Vec<TrainExample> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let losses = train_batch(&mut model, &mut optimizers, table, &items, config, &mut dropout_rng)?;
            batch += 1;
            running.add(&losses);
            observer.on_batch(batch, &losses);
            if batch.is_multiple_of(config.eval_every) {
                let point = tracker.evaluate(&model, &optimizers, batch, &mut running)?;
                observer.on_eval(&point);
            }
        }
        observer.on_epoch_end(epoch, batch);
    }
    if tracker.log.is_empty() {
        let point = tracker.evaluate(&model, &optimizers, batch, &mut running)?;
        observer.on_eval(&point);
    }
    let best = tracker.best.ok_or(Error::Empty("evaluation log"))?;
    Ok(TrainRun {
        best,
        log: tracker.log,
        last: model,
        batches: batch,
    })
}

struct Tracker<'a> {
    config: &'a TrainConfig,
    vocab: &'a Vocabulary,
    table: &'a EmbeddingTable,
    validation: &'a [TrainExample],
    test: &'a [TrainExample],
    selector: BestSelector,
    best: Option<Checkpoint>,
    log: Vec<EvalPoint>,
}

impl Tracker<'_> {
    fn evaluate(
        &mut self,
        model: &Model,
        optimizers: &Optimizers,
        batch: usize,
        running: &mut Running,
    ) -> Result<EvalPoint> {
        let val = evaluate(model, self.table, self.validation)?.mse;
        let tst = evaluate(model, self.table, self.test)?.mse;
        let (loss_t, loss_trans, loss_s) = running.take(self.config.model.is_transnet());
        let point = EvalPoint {
            batch,
            loss_t,
            loss_trans,
            loss_s,
            val_mse: val,
            test_mse: tst,
        };
        self.log.push(point);
        if self.selector.offer(val, tst, batch) {
            self.best = Some(Checkpoint {
                config: self.config.clone(),
                model: model.clone(),
                optimizers: optimizers.clone(),
                vocab: self.vocab.clone(),
                table: self.table.clone(),
                best_val_mse: val,
                test_mse_at_best: tst,
                batch,
            });
        }
        Ok(point)
    }
}

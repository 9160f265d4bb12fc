use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    clip_grad_norm, make_batches, multitask_loss, run_schedule, Batch, EpochRunner, LossAccumulator, LossBreakdown,
    RmsProp, TrainConfig, TrainError,
};
use crate::conllu::Document;
use crate::embeddings::EmbeddingTable;
use crate::model::{ModelConfig, Mode, Tagger};
use crate::schema::{build_schema, encode_document, EncodedSentence};
use crate::tensor::{finite_diff_check, GradCheckOptions, GradCheckReport, Gradients, Graph, ParamSet, Real, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train: LossBreakdown,
    pub dev: LossBreakdown,
}

pub struct TrainOutput {
    /// Weights of the epoch with the lowest dev loss.
    pub tagger: Tagger<f32>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn forward_loss<'p, T: Real>(
    tagger: &Tagger<T>,
    g: &mut Graph<'p, T>,
    batch: &Batch<'_>,
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
    mode: &mut Mode<'_>,
) -> Result<(crate::tensor::Var, LossBreakdown), TrainError> {
    let out = tagger
        .forward(g, &batch.sentences, batch.padded_len, embeddings, mode)?
        .ok_or(TrainError::NoTargets)?;
    multitask_loss(g, &out, tagger.schema(), config)
}

/// Loss of one batch without computing gradients.
pub fn batch_loss<T: Real>(
    tagger: &Tagger<T>,
    batch: &Batch<'_>,
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
    mode: &mut Mode<'_>,
) -> Result<LossBreakdown, TrainError> {
    let mut g = Graph::new(tagger.params());
    Ok(forward_loss(tagger, &mut g, batch, embeddings, config, mode)?.1)
}

fn batch_gradients<T: Real>(
    tagger: &Tagger<T>,
    batch: &Batch<'_>,
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
    mode: &mut Mode<'_>,
) -> Result<(LossBreakdown, Gradients<T>), TrainError> {
    let mut g = Graph::new(tagger.params());
    let (loss, breakdown) = forward_loss(tagger, &mut g, batch, embeddings, config, mode)?;
    Ok((breakdown, g.backward(loss)?))
}

/// Word-weighted mean loss over `sentences` in evaluation mode. Batches
/// without any target are skipped.
pub fn evaluate_loss<T: Real>(
    tagger: &Tagger<T>,
    sentences: &[EncodedSentence],
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<LossBreakdown, TrainError> {
    let mut acc = LossAccumulator::default();
    for chunk in sentences.chunks(config.batch_size.max(1)) {
        let batch = Batch::new(chunk.iter().collect());
        match batch_loss(tagger, &batch, embeddings, config, &mut Mode::Eval) {
            Ok(loss) => acc.add(&loss, batch.word_count() as f64),
            Err(TrainError::NoTargets) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish(config))
}

struct Runner<'a, 'c> {
    tagger: Tagger<f32>,
    optimizer: RmsProp<f32>,
    rng: ChaCha8Rng,
    train: &'a [EncodedSentence],
    dev: &'a [EncodedSentence],
    embeddings: &'a EmbeddingTable,
    config: &'a TrainConfig,
    history: Vec<EpochRecord>,
    on_epoch: &'a mut (dyn FnMut(&EpochRecord) + 'c),
}

impl EpochRunner for Runner<'_, '_> {
    type Snapshot = Vec<Tensor<f32>>;

    fn run_epoch(&mut self, epoch: usize, lr: f64) -> Result<f64, TrainError> {
        let mut acc = LossAccumulator::default();
        for batch in make_batches(self.train, self.config.batch_size, self.config.seed, epoch) {
            let mut mode = Mode::Train(&mut self.rng);
            let (loss, grads) = match batch_gradients(&self.tagger, &batch, self.embeddings, self.config, &mut mode) {
                Ok(step) => step,
                Err(TrainError::NoTargets) => continue,
                Err(e) => return Err(e),
            };
            acc.add(&loss, batch.word_count() as f64);
            let params = self.tagger.params_mut();
            params.set_grads(grads);
            clip_grad_norm(params, self.config.clip_norm);
            self.optimizer.step(params, lr);
        }
        let dev = evaluate_loss(&self.tagger, self.dev, self.embeddings, self.config)?;
        let record = EpochRecord {
            epoch,
            lr,
            train: acc.finish(self.config),
            dev,
        };
        log::info!(
            "epoch {epoch}: lr {lr} train {:.4} dev {:.4}",
            record.train.total,
            record.dev.total
        );
        (self.on_epoch)(&record);
        let total = record.dev.total;
        self.history.push(record);
        Ok(total)
    }

    fn snapshot(&self) -> Vec<Tensor<f32>> {
        self.tagger.params().snapshot()
    }
}

/// Build the label schema from `train_doc`, train a fresh model and return
/// it with the weights of the best dev epoch restored. `on_epoch` is called
/// after every epoch.
pub fn train(
    train_doc: &Document,
    dev_doc: &Document,
    embeddings: &EmbeddingTable,
    model_config: &ModelConfig,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    model_config.validate()?;
    let (schema, chars) = build_schema(train_doc)?;
    let train_set = encode_document(train_doc, &schema, &chars);
    let dev_set = encode_document(dev_doc, &schema, &chars);
    if train_set.iter().all(|s| s.is_empty()) {
        return Err(TrainError::EmptyData("training"));
    }
    if dev_set.iter().all(|s| s.is_empty()) {
        return Err(TrainError::EmptyData("development"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tagger = Tagger::<f32>::new(model_config.clone(), schema, chars, &mut rng)?;
    tagger.check_embeddings(embeddings)?;
    log::info!(
        "model has {} parameters; {} training and {} dev sentences",
        tagger.params().element_count(),
        train_set.len(),
        dev_set.len()
    );

    let optimizer = RmsProp::new(tagger.params(), config.rmsprop_rho, config.rmsprop_epsilon);
    let mut runner = Runner {
        tagger,
        optimizer,
        rng,
        train: &train_set,
        dev: &dev_set,
        embeddings,
        config,
        history: Vec::new(),
        on_epoch,
    };
    let outcome = run_schedule(config, &mut runner)?;
    let mut tagger = runner.tagger;
    tagger.params_mut().restore(&outcome.best);
    log::info!("best epoch {} with dev loss {:.4}", outcome.best_epoch, outcome.best_loss);
    Ok(TrainOutput {
        tagger,
        history: runner.history,
        best_epoch: outcome.best_epoch,
    })
}

/// Compare the analytic gradient of the training loss on `sentences` with
/// central differences. Dropout masks are drawn from a generator re-seeded
/// with `seed` for every evaluation so the loss is a deterministic function
/// of the weights.
pub fn gradient_check(
    tagger: &Tagger<f64>,
    sentences: &[EncodedSentence],
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
    seed: u64,
    options: GradCheckOptions,
) -> Result<GradCheckReport, TrainError> {
    let batch = Batch::new(sentences.iter().collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, grads) = batch_gradients(tagger, &batch, embeddings, config, &mut Mode::Train(&mut rng))?;

    let mut params = tagger.params().clone();
    finite_diff_check(
        &mut params,
        &grads,
        |p: &ParamSet<f64>| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = Graph::new(p);
            let (loss, _) = forward_loss(tagger, &mut g, &batch, embeddings, config, &mut Mode::Train(&mut rng))?;
            Ok::<f64, TrainError>(g.scalar(loss))
        },
        options,
    )
}

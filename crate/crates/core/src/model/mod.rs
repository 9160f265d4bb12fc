//! The joint tagger: word embeddings, a stacked LSTM feature extractor,
//! softmax heads for POS and each feature key, and a character-level GRU
//! lemma decoder shared by all words.

mod forward;
mod layers;
mod predict;
#[cfg(test)]
mod reference_tests;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::schema::{Casing, CharVocab, LabelSchema};
use crate::tensor::{ParamId, ParamSet, Real, Tensor, TensorError};

pub use forward::{ForwardOutput, LemmaForward};
pub use layers::{gru_step, lstm_step, Mode};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("missing parameter {0}")]
    MissingParam(String),

    #[error("unexpected parameter {0}")]
    UnexpectedParam(String),

    #[error("word vectors have dimension {found}, model expects {expected}")]
    EmbeddingDim { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub casing_dim: usize,
    pub char_emb_dim: usize,
    /// Per direction.
    pub char_lstm_dim: usize,
    pub extractor_dim: usize,
    pub extractor_layers: usize,
    pub decoder_dim: usize,
    pub pos_emb_dim: usize,
    pub max_word_len: usize,
    pub max_decode_overrun: usize,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 300,
            casing_dim: Casing::COUNT,
            char_emb_dim: 30,
            char_lstm_dim: 25,
            extractor_dim: 150,
            extractor_layers: 3,
            decoder_dim: 150,
            pos_emb_dim: 5,
            max_word_len: 64,
            max_decode_overrun: 10,
            dropout_rate: 0.5,
        }
    }
}

impl ModelConfig {
    /// Width of the per-word input to the feature extractor.
    pub fn embedding_dim(&self) -> usize {
        self.word_dim + self.casing_dim + 2 * self.char_lstm_dim
    }

    /// Width of the decoder input for an inventory of `symbols` characters.
    pub fn decoder_input_dim(&self, symbols: usize) -> usize {
        self.extractor_dim + self.char_emb_dim + self.pos_emb_dim + symbols
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("char_lstm_dim", self.char_lstm_dim),
            ("extractor_dim", self.extractor_dim),
            ("extractor_layers", self.extractor_layers),
            ("decoder_dim", self.decoder_dim),
            ("pos_emb_dim", self.pos_emb_dim),
            ("max_word_len", self.max_word_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be at least 1")));
        }
        if self.casing_dim != Casing::COUNT {
            return Err(ModelError::Config(format!("casing_dim must be {}", Casing::COUNT)));
        }
        if self.decoder_dim != self.extractor_dim {
            return Err(ModelError::Config(
                "decoder_dim must equal extractor_dim (the decoder starts from the extractor state)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Config("dropout_rate must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LstmIds {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct GruIds {
    pub w_input: ParamId,
    /// Update and reset gates.
    pub w_gates_hidden: ParamId,
    pub w_candidate_hidden: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct DenseIds {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct ModelIds {
    pub char_embedding: ParamId,
    pub char_forward: LstmIds,
    pub char_backward: LstmIds,
    pub extractor: Vec<LstmIds>,
    pub pos_head: DenseIds,
    pub feature_heads: Vec<DenseIds>,
    pub position_embedding: ParamId,
    pub decoder: GruIds,
    pub output: DenseIds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Glorot,
    Zero,
    /// Zero except the forget-gate block `[h, 2h)` set to one.
    LstmBias(usize),
    Embedding,
}

struct Slot {
    name: String,
    shape: [usize; 2],
    init: Init,
}

fn lstm_slots(prefix: &str, input: usize, hidden: usize) -> Vec<Slot> {
    vec![
        Slot {
            name: format!("{prefix}.w_input"),
            shape: [4 * hidden, input],
            init: Init::Glorot,
        },
        Slot {
            name: format!("{prefix}.w_hidden"),
            shape: [4 * hidden, hidden],
            init: Init::Glorot,
        },
        Slot {
            name: format!("{prefix}.bias"),
            shape: [1, 4 * hidden],
            init: Init::LstmBias(hidden),
        },
    ]
}

fn dense_slots(prefix: &str, input: usize, output: usize) -> Vec<Slot> {
    vec![
        Slot {
            name: format!("{prefix}.weight"),
            shape: [output, input],
            init: Init::Glorot,
        },
        Slot {
            name: format!("{prefix}.bias"),
            shape: [1, output],
            init: Init::Zero,
        },
    ]
}

/// Every parameter of the model in registration order.
fn layout(config: &ModelConfig, schema: &LabelSchema, symbols: usize) -> Vec<Slot> {
    let mut slots = vec![Slot {
        name: "char_embedding".into(),
        shape: [symbols, config.char_emb_dim],
        init: Init::Embedding,
    }];
    slots.extend(lstm_slots("char_lstm.forward", config.char_emb_dim, config.char_lstm_dim));
    slots.extend(lstm_slots("char_lstm.backward", config.char_emb_dim, config.char_lstm_dim));
    for layer in 0..config.extractor_layers {
        let input = if layer == 0 {
            config.embedding_dim()
        } else {
            config.extractor_dim
        };
        slots.extend(lstm_slots(&format!("extractor.{layer}"), input, config.extractor_dim));
    }
    slots.extend(dense_slots("head.pos", config.extractor_dim, schema.pos_values.len()));
    for feature in &schema.features {
        slots.extend(dense_slots(
            &format!("head.feat.{}", feature.key),
            config.extractor_dim,
            feature.values.len(),
        ));
    }
    slots.push(Slot {
        name: "position_embedding".into(),
        shape: [config.max_word_len + 1, config.pos_emb_dim],
        init: Init::Embedding,
    });
    let (h, input) = (config.decoder_dim, config.decoder_input_dim(symbols));
    slots.extend([
        Slot {
            name: "decoder.w_input".into(),
            shape: [3 * h, input],
            init: Init::Glorot,
        },
        Slot {
            name: "decoder.w_gates_hidden".into(),
            shape: [2 * h, h],
            init: Init::Glorot,
        },
        Slot {
            name: "decoder.w_candidate_hidden".into(),
            shape: [h, h],
            init: Init::Glorot,
        },
        Slot {
            name: "decoder.bias".into(),
            shape: [1, 3 * h],
            init: Init::Zero,
        },
    ]);
    slots.extend(dense_slots("decoder.output", h, symbols));
    slots
}

fn initial_value<T: Real>(slot: &Slot, rng: &mut dyn RngCore) -> Tensor<T> {
    let [rows, cols] = slot.shape;
    let data = match slot.init {
        Init::Glorot => {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            (0..rows * cols).map(|_| T::of(rng.gen_range(-limit..limit))).collect()
        }
        Init::Embedding => (0..rows * cols).map(|_| T::of(rng.gen_range(-0.05..0.05))).collect(),
        Init::Zero => vec![T::zero(); rows * cols],
        Init::LstmBias(h) => (0..rows * cols)
            .map(|i| if (h..2 * h).contains(&i) { T::one() } else { T::zero() })
            .collect(),
    };
    Tensor::matrix(rows, cols, data).expect("slot shape matches data")
}

/// Model parameters together with the label inventories they were sized for.
#[derive(Clone, Debug)]
pub struct Tagger<T: Real> {
    config: ModelConfig,
    schema: LabelSchema,
    chars: CharVocab,
    params: ParamSet<T>,
    ids: ModelIds,
}

impl<T: Real> Tagger<T> {
    /// Randomly initialized model.
    pub fn new(
        config: ModelConfig,
        schema: LabelSchema,
        chars: CharVocab,
        rng: &mut dyn RngCore,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamSet::new();
        for slot in layout(&config, &schema, chars.len()) {
            let value = initial_value(&slot, rng);
            params.add(slot.name, value)?;
        }
        Self::from_params(config, schema, chars, params)
    }

    /// Wrap existing parameters, checking that names and shapes match the
    /// layout implied by the configuration and inventories.
    pub fn from_params(
        config: ModelConfig,
        schema: LabelSchema,
        chars: CharVocab,
        params: ParamSet<T>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let slots = layout(&config, &schema, chars.len());
        for slot in &slots {
            let p = params
                .by_name(&slot.name)
                .ok_or_else(|| ModelError::MissingParam(slot.name.clone()))?;
            if p.value.shape() != slot.shape {
                return Err(ModelError::ParamShape {
                    name: slot.name.clone(),
                    expected: slot.shape.to_vec(),
                    found: p.value.shape().to_vec(),
                });
            }
        }
        if params.len() != slots.len() {
            let extra = params
                .iter()
                .find(|p| !slots.iter().any(|s| s.name == p.name))
                .map(|p| p.name.clone())
                .unwrap_or_default();
            return Err(ModelError::UnexpectedParam(extra));
        }

        let id = |name: &str| params.id(name).expect("checked above");
        let lstm = |prefix: &str| LstmIds {
            w_input: id(&format!("{prefix}.w_input")),
            w_hidden: id(&format!("{prefix}.w_hidden")),
            bias: id(&format!("{prefix}.bias")),
        };
        let dense = |prefix: &str| DenseIds {
            weight: id(&format!("{prefix}.weight")),
            bias: id(&format!("{prefix}.bias")),
        };
        let ids = ModelIds {
            char_embedding: id("char_embedding"),
            char_forward: lstm("char_lstm.forward"),
            char_backward: lstm("char_lstm.backward"),
            extractor: (0..config.extractor_layers)
                .map(|l| lstm(&format!("extractor.{l}")))
                .collect(),
            pos_head: dense("head.pos"),
            feature_heads: schema
                .features
                .iter()
                .map(|f| dense(&format!("head.feat.{}", f.key)))
                .collect(),
            position_embedding: id("position_embedding"),
            decoder: GruIds {
                w_input: id("decoder.w_input"),
                w_gates_hidden: id("decoder.w_gates_hidden"),
                w_candidate_hidden: id("decoder.w_candidate_hidden"),
                bias: id("decoder.bias"),
            },
            output: dense("decoder.output"),
        };
        Ok(Tagger {
            config,
            schema,
            chars,
            params,
            ids,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn chars(&self) -> &CharVocab {
        &self.chars
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn ids(&self) -> &ModelIds {
        &self.ids
    }

    /// Same model with a different element type.
    pub fn convert<U: Real>(&self) -> Tagger<U> {
        Tagger {
            config: self.config.clone(),
            schema: self.schema.clone(),
            chars: self.chars.clone(),
            params: self.params.convert(),
            ids: self.ids.clone(),
        }
    }

    pub fn check_embeddings(&self, embeddings: &EmbeddingTable) -> Result<(), ModelError> {
        if embeddings.dim() != self.config.word_dim {
            return Err(ModelError::EmbeddingDim {
                expected: self.config.word_dim,
                found: embeddings.dim(),
            });
        }
        Ok(())
    }
}

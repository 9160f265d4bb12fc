//! Model directory layout and file formats.
//!
//! A bundle directory holds three files:
//!
//! * `schema.toml`: label inventories, character alphabet, casing order,
//!   model and training configuration, and the embeddings path.
//! * `weights.bin`: every parameter tensor in the binary layout below.
//! * `history.jsonl`: one JSON object per training epoch.
//!
//! Weights layout, all integers little-endian `u32`:
//!
//! ```text
//! "MJW1" | count | { name_len | name (UTF-8) | rank | dims... | f32 values (LE, row-major) } * count
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelConfig, ModelError, Tagger};
use crate::schema::{Casing, CharVocab, LabelSchema};
use crate::tensor::{ParamSet, Tensor};
use crate::training::{EpochRecord, TrainConfig};

pub const SCHEMA_FILE: &str = "schema.toml";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const HISTORY_FILE: &str = "history.jsonl";

const MAGIC: &[u8; 4] = b"MJW1";
const FORMAT_VERSION: u32 = 1;
const RESERVED_NAMES: [&str; CharVocab::RESERVED] = ["<pad>", "<unk>", "<eow>", "<start>"];

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("weights file does not start with MJW1")]
    BadMagic,

    #[error("weights file is truncated while reading {0}")]
    Truncated(String),

    #[error("weights file has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("tensor {name}: {detail}")]
    Tensor { name: String, detail: String },

    #[error("schema file: {0}")]
    Schema(String),

    #[error("config file: {0}")]
    Config(String),

    #[error("weights do not match the schema: {0}")]
    Mismatch(#[from] ModelError),
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn write_weights<W: Write>(params: &ParamSet<f32>, mut out: W) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params.iter() {
        out.write_all(&(p.name.len() as u32).to_le_bytes())?;
        out.write_all(p.name.as_bytes())?;
        out.write_all(&(p.value.shape().len() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in p.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], BundleError> {
        if self.bytes.len() < n {
            return Err(BundleError::Truncated(what.to_owned()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self, what: &str) -> Result<usize, BundleError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

pub fn read_weights(bytes: &[u8]) -> Result<ParamSet<f32>, BundleError> {
    let mut r = Reader { bytes };
    if r.take(4, "magic").map_err(|_| BundleError::BadMagic)? != MAGIC {
        return Err(BundleError::BadMagic);
    }
    let count = r.u32("tensor count")?;
    let mut params = ParamSet::new();
    for i in 0..count {
        let placeholder = format!("tensor #{i}");
        let len = r.u32(&placeholder)?;
        let name = std::str::from_utf8(r.take(len, &placeholder)?)
            .map_err(|_| BundleError::Tensor {
                name: placeholder.clone(),
                detail: "name is not UTF-8".into(),
            })?
            .to_owned();
        let rank = r.u32(&name)?;
        let shape = (0..rank).map(|_| r.u32(&name)).collect::<Result<Vec<_>, _>>()?;
        let elements = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.bytes.len()))
            .ok_or_else(|| BundleError::Truncated(name.clone()))?;
        let data = r
            .take(elements * 4, &name)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let value = Tensor::from_vec(&shape, data).map_err(|e| BundleError::Tensor {
            name: name.clone(),
            detail: e.to_string(),
        })?;
        params.add(name.clone(), value).map_err(|e| BundleError::Tensor {
            name,
            detail: e.to_string(),
        })?;
    }
    if !r.bytes.is_empty() {
        return Err(BundleError::TrailingBytes(r.bytes.len()));
    }
    Ok(params)
}

pub fn save_weights(path: &Path, params: &ParamSet<f32>) -> Result<(), BundleError> {
    let mut buf = Vec::new();
    write_weights(params, &mut buf).expect("writing to memory");
    fs::write(path, buf).map_err(io_error(path))
}

pub fn load_weights(path: &Path) -> Result<ParamSet<f32>, BundleError> {
    read_weights(&fs::read(path).map_err(io_error(path))?)
}

/// Contents of `schema.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub format: u32,
    /// Word vectors used in training.
    pub embeddings: Option<PathBuf>,
    /// Names of the reserved decoder symbols, in index order.
    pub reserved_symbols: Vec<String>,
    /// Alphabet in index order, starting after the reserved symbols.
    pub characters: Vec<String>,
    /// Casing categories in one-hot order.
    pub casing: Vec<Casing>,
    pub labels: LabelSchema,
    pub model: ModelConfig,
    pub training: TrainConfig,
}

impl SchemaFile {
    pub fn new(tagger: &Tagger<f32>, training: &TrainConfig, embeddings: Option<&Path>) -> Self {
        SchemaFile {
            format: FORMAT_VERSION,
            embeddings: embeddings.map(Path::to_owned),
            reserved_symbols: RESERVED_NAMES.iter().map(|s| s.to_string()).collect(),
            characters: tagger.chars().chars().iter().map(char::to_string).collect(),
            casing: Casing::ALL.to_vec(),
            labels: tagger.schema().clone(),
            model: tagger.config().clone(),
            training: training.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema file is representable in TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, BundleError> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| BundleError::Schema(e.to_string()))?;
        if file.format != FORMAT_VERSION {
            return Err(BundleError::Schema(format!("unsupported format {}", file.format)));
        }
        if file.reserved_symbols != RESERVED_NAMES {
            return Err(BundleError::Schema("unexpected reserved symbols".into()));
        }
        if file.casing != Casing::ALL {
            return Err(BundleError::Schema("unexpected casing order".into()));
        }
        Ok(file)
    }

    pub fn char_vocab(&self) -> Result<CharVocab, BundleError> {
        let chars = self
            .characters
            .iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(BundleError::Schema(format!("{s:?} is not a single character"))),
                }
            })
            .collect::<Result<Vec<char>, _>>()?;
        let vocab = CharVocab::new(chars.iter().copied());
        if vocab.chars() != chars.as_slice() {
            return Err(BundleError::Schema("characters are not sorted and distinct".into()));
        }
        Ok(vocab)
    }
}

/// A trained model as stored on disk.
pub struct ModelBundle {
    pub tagger: Tagger<f32>,
    pub training: TrainConfig,
    pub embeddings: Option<PathBuf>,
}

pub fn history_line(record: &EpochRecord) -> String {
    serde_json::to_string(record).expect("history records serialize")
}

/// Write all bundle files into `dir`, creating it if needed.
pub fn save_bundle(
    dir: &Path,
    tagger: &Tagger<f32>,
    training: &TrainConfig,
    embeddings: Option<&Path>,
    history: &[EpochRecord],
) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let schema_path = dir.join(SCHEMA_FILE);
    let schema = SchemaFile::new(tagger, training, embeddings).to_toml();
    fs::write(&schema_path, schema).map_err(io_error(&schema_path))?;
    save_weights(&dir.join(WEIGHTS_FILE), tagger.params())?;
    let history_path = dir.join(HISTORY_FILE);
    let lines: String = history.iter().map(|r| history_line(r) + "\n").collect();
    fs::write(&history_path, lines).map_err(io_error(&history_path))
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle, BundleError> {
    let schema_path = dir.join(SCHEMA_FILE);
    let text = fs::read_to_string(&schema_path).map_err(io_error(&schema_path))?;
    let schema = SchemaFile::from_toml(&text)?;
    let chars = schema.char_vocab()?;
    let params = load_weights(&dir.join(WEIGHTS_FILE))?;
    let tagger = Tagger::from_params(schema.model, schema.labels, chars, params)?;
    Ok(ModelBundle {
        tagger,
        training: schema.training,
        embeddings: schema.embeddings,
    })
}

/// Settings read from a `key = value` configuration file. Keys are the
/// field names of [`TrainConfig`] and [`ModelConfig`]; per-feature loss
/// weights are written `lambda_feat.Number = 0.5`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub training: TrainConfig,
    pub model: ModelConfig,
    /// Whether the file set `word_dim` explicitly.
    pub word_dim_set: bool,
}

fn field_names<T: Serialize>(value: &T) -> Vec<String> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, BundleError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| BundleError::Config(e.to_string()))?;
    let model_keys = field_names(&ModelConfig::default());
    let (mut model, mut training) = (toml::Table::new(), toml::Table::new());
    for (key, value) in table {
        if model_keys.contains(&key) {
            model.insert(key, value);
        } else {
            training.insert(key, value);
        }
    }
    let word_dim_set = model.contains_key("word_dim");
    let model: ModelConfig = model.try_into().map_err(|e: toml::de::Error| BundleError::Config(e.to_string()))?;
    let training: TrainConfig = training
        .try_into()
        .map_err(|e: toml::de::Error| BundleError::Config(e.to_string()))?;
    Ok(ConfigFile {
        training,
        model,
        word_dim_set,
    })
}

//! Label inventories, character alphabet and casing features built from
//! training data, plus the FEATS column codec.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{Document, Sentence, Token};

/// Reserved feature value standing for "key absent on this word".
pub const NONE_VALUE: &str = "None";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("training data contains no word with a UPOS tag")]
    EmptyTrainingData,

    #[error("malformed FEATS segment {0:?}: expected Key=Value")]
    MalformedFeature(String),
}

/// POS tag set and morphological feature catalog.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub pos_values: Vec<String>,
    pub features: Vec<FeatureSet>,
}

/// Values of one feature key. Index 0 is always [`NONE_VALUE`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub key: String,
    pub values: Vec<String>,
}

impl LabelSchema {
    pub fn feature_keys(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.key.as_str())
    }

    pub fn pos_index(&self, upos: &str) -> Option<usize> {
        self.pos_values.iter().position(|p| p == upos)
    }

    pub fn feature_value_index(&self, feature: usize, value: &str) -> Option<usize> {
        self.features[feature].values.iter().position(|v| v == value)
    }
}

/// Character alphabet with the reserved symbols in front.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    /// End of word.
    pub const EOW: usize = 2;
    /// Previous-character indicator at the first decoder step.
    pub const START: usize = 3;
    pub const RESERVED: usize = 4;

    pub fn new(chars: impl IntoIterator<Item = char>) -> Self {
        let set: BTreeSet<char> = chars.into_iter().collect();
        let chars: Vec<char> = set.into_iter().collect();
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + Self::RESERVED))
            .collect();
        CharVocab { chars, index }
    }

    /// Number of real characters, without the reserved symbols.
    pub fn alphabet_len(&self) -> usize {
        self.chars.len()
    }

    /// Size of the full symbol inventory including reserved symbols.
    pub fn len(&self) -> usize {
        self.chars.len() + Self::RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK)
    }

    /// The character for a symbol index, `None` for reserved symbols.
    pub fn char_at(&self, index: usize) -> Option<char> {
        index
            .checked_sub(Self::RESERVED)
            .and_then(|i| self.chars.get(i).copied())
    }

    pub fn encode(&self, s: &str) -> Vec<usize> {
        s.chars().map(|c| self.index(c)).collect()
    }
}

/// Word shape categories fed to the embedding layer as a one-hot vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Casing {
    Numeric,
    MainlyNumeric,
    AllLower,
    AllUpper,
    InitialUpper,
    ContainsDigit,
    Other,
    Padding,
}

impl Casing {
    pub const COUNT: usize = 8;

    pub const ALL: [Casing; Casing::COUNT] = [
        Casing::Numeric,
        Casing::MainlyNumeric,
        Casing::AllLower,
        Casing::AllUpper,
        Casing::InitialUpper,
        Casing::ContainsDigit,
        Casing::Other,
        Casing::Padding,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Casing::Numeric => "numeric",
            Casing::MainlyNumeric => "mainly_numeric",
            Casing::AllLower => "all_lower",
            Casing::AllUpper => "all_upper",
            Casing::InitialUpper => "initial_upper",
            Casing::ContainsDigit => "contains_digit",
            Casing::Other => "other",
            Casing::Padding => "padding",
        }
    }

    pub fn one_hot(self) -> [f32; Casing::COUNT] {
        let mut v = [0.0; Casing::COUNT];
        v[self.index()] = 1.0;
        v
    }
}

/// Casing category of a real word; rules are tried in order, first match wins.
pub fn casing_of(word: &str) -> Casing {
    let total = word.chars().count();
    if total == 0 {
        return Casing::Other;
    }
    let numeric = word.chars().filter(|c| c.is_numeric()).count();

    if numeric == total {
        Casing::Numeric
    } else if numeric * 2 > total {
        Casing::MainlyNumeric
    } else if word.chars().all(char::is_lowercase) {
        Casing::AllLower
    } else if word.chars().all(char::is_uppercase) {
        Casing::AllUpper
    } else if word.chars().next().is_some_and(char::is_uppercase) {
        Casing::InitialUpper
    } else if numeric > 0 {
        Casing::ContainsDigit
    } else {
        Casing::Other
    }
}

pub fn parse_feats(raw: &str) -> Result<BTreeMap<String, String>, SchemaError> {
    let mut feats = BTreeMap::new();
    if raw == "_" {
        return Ok(feats);
    }
    for segment in raw.split('|') {
        match segment.split_once('=') {
            Some((key, value)) if !key.is_empty() && !value.is_empty() => {
                feats.insert(key.to_owned(), value.to_owned());
            }
            _ => return Err(SchemaError::MalformedFeature(segment.to_owned())),
        }
    }
    Ok(feats)
}

fn case_insensitive(a: &str, b: &str) -> Ordering {
    a.to_lowercase()
        .cmp(&b.to_lowercase())
        .then_with(|| a.cmp(b))
}

/// Render a feature map as a FEATS column. `None` values are dropped.
pub fn format_feats(feats: &BTreeMap<String, String>) -> String {
    let mut pairs: Vec<(&String, &String)> =
        feats.iter().filter(|(_, v)| v.as_str() != NONE_VALUE).collect();
    if pairs.is_empty() {
        return "_".to_owned();
    }
    pairs.sort_by(|a, b| case_insensitive(a.0, b.0));
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("|")
}

/// Lemma annotation is missing when the column is `_`, unless the word
/// itself is an underscore.
pub(crate) fn lemma_annotated(token: &Token) -> bool {
    token.lemma != "_" || token.form == "_"
}

/// Feature parsing that tolerates malformed columns in training data by
/// ignoring the bad segments.
fn lenient_feats(raw: &str) -> BTreeMap<String, String> {
    parse_feats(raw).unwrap_or_else(|_| {
        raw.split('|')
            .filter_map(|s| s.split_once('='))
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect()
    })
}

pub fn build_schema(training: &Document) -> Result<(LabelSchema, CharVocab), SchemaError> {
    let mut pos = BTreeSet::new();
    let mut features: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut chars = BTreeSet::new();

    for token in training.sentences.iter().flat_map(Sentence::words) {
        if token.upos != "_" {
            pos.insert(token.upos.clone());
        }
        for (key, value) in lenient_feats(&token.feats) {
            features.entry(key).or_default().insert(value);
        }
        chars.extend(token.form.chars());
        if lemma_annotated(token) {
            chars.extend(token.lemma.chars());
        }
    }

    if pos.is_empty() {
        return Err(SchemaError::EmptyTrainingData);
    }

    let mut features: Vec<FeatureSet> = features
        .into_iter()
        .map(|(key, values)| {
            let mut all = vec![NONE_VALUE.to_owned()];
            all.extend(values.into_iter().filter(|v| v != NONE_VALUE));
            FeatureSet { key, values: all }
        })
        .collect();
    features.sort_by(|a, b| case_insensitive(&a.key, &b.key));

    let schema = LabelSchema {
        pos_values: pos.into_iter().collect(),
        features,
    };
    Ok((schema, CharVocab::new(chars)))
}

/// Model inputs and targets for one syntactic word.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedWord {
    pub form: String,
    /// Symbol indices of the form's characters.
    pub chars: Vec<usize>,
    pub casing: Casing,
    /// `None` masks the POS loss for this word.
    pub pos: Option<usize>,
    /// One entry per feature key; `None` masks that head's loss.
    pub feats: Vec<Option<usize>>,
    /// Lemma symbols followed by EOW; `None` masks the lemma loss.
    pub lemma: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncodedSentence {
    pub words: Vec<EncodedWord>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Encode the words of a sentence without targets, for prediction.
pub fn encode_inputs(sentence: &Sentence, chars: &CharVocab, feature_count: usize) -> EncodedSentence {
    let words = sentence
        .words()
        .map(|token| EncodedWord {
            form: token.form.clone(),
            chars: chars.encode(&token.form),
            casing: casing_of(&token.form),
            pos: None,
            feats: vec![None; feature_count],
            lemma: None,
        })
        .collect();
    EncodedSentence { words }
}

pub fn encode_labels(sentence: &Sentence, schema: &LabelSchema, chars: &CharVocab) -> EncodedSentence {
    let words = sentence
        .words()
        .map(|token| {
            let feats = match parse_feats(&token.feats) {
                Ok(map) => schema
                    .features
                    .iter()
                    .enumerate()
                    .map(|(k, set)| {
                        let value = map.get(&set.key).map_or(NONE_VALUE, String::as_str);
                        schema.feature_value_index(k, value)
                    })
                    .collect(),
                Err(_) => vec![None; schema.features.len()],
            };
            let lemma = lemma_annotated(token).then(|| {
                let mut target = chars.encode(&token.lemma);
                target.push(CharVocab::EOW);
                target
            });
            EncodedWord {
                form: token.form.clone(),
                chars: chars.encode(&token.form),
                casing: casing_of(&token.form),
                pos: schema.pos_index(&token.upos),
                feats,
                lemma,
            }
        })
        .collect();
    EncodedSentence { words }
}

pub fn encode_document(doc: &Document, schema: &LabelSchema, chars: &CharVocab) -> Vec<EncodedSentence> {
    doc.sentences
        .iter()
        .map(|s| encode_labels(s, schema, chars))
        .collect()
}

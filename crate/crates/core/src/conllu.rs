//! CoNLL-U reading, writing and column replacement.
//!
//! Parsing keeps every field as the raw string found in the file so that
//! serializing an untouched document reproduces it byte for byte. The only
//! structured field is the token id.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::schema::format_feats;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },

    #[error("line {line}: invalid token id {id:?}")]
    InvalidId { line: usize, id: String },

    #[error("line {line}: empty FORM field")]
    EmptyForm { line: usize },

    #[error("sentence {sentence} (line {line}): word id {found} out of order, expected {expected}")]
    NonMonotonicIds {
        sentence: usize,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("input is not valid UTF-8 (byte offset {offset})")]
    InvalidUtf8 { offset: usize },

    #[error("alignment error in sentence {sentence}: {detail}")]
    Alignment { sentence: usize, detail: String },
}

/// Value of the ID column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenId {
    /// A syntactic word, numbered from 1.
    Word(usize),
    /// A multiword token spanning words `start..=end`.
    Range(usize, usize),
    /// An empty node `major.minor`.
    Empty(usize, usize),
}

impl TokenId {
    pub fn is_word(&self) -> bool {
        matches!(self, TokenId::Word(_))
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenId::Word(id) => write!(f, "{id}"),
            TokenId::Range(start, end) => write!(f, "{start}-{end}"),
            TokenId::Empty(major, minor) => write!(f, "{major}.{minor}"),
        }
    }
}

impl FromStr for TokenId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        fn num(s: &str) -> Result<usize, ()> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(());
            }
            s.parse().map_err(|_| ())
        }

        if let Some((start, end)) = s.split_once('-') {
            let (start, end) = (num(start)?, num(end)?);
            if start >= 1 && start < end {
                return Ok(TokenId::Range(start, end));
            }
            return Err(());
        }
        if let Some((major, minor)) = s.split_once('.') {
            let (major, minor) = (num(major)?, num(minor)?);
            if minor >= 1 {
                return Ok(TokenId::Empty(major, minor));
            }
            return Err(());
        }
        match num(s)? {
            0 => Err(()),
            id => Ok(TokenId::Word(id)),
        }
    }
}

/// One token line. All columns except the id are kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: String,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A word token with every column other than the form set to `_`.
    pub fn word(id: usize, form: impl Into<String>) -> Self {
        let blank = || "_".to_owned();
        Token {
            id: TokenId::Word(id),
            form: form.into(),
            lemma: blank(),
            upos: blank(),
            xpos: blank(),
            feats: blank(),
            head: blank(),
            deprel: blank(),
            deps: blank(),
            misc: blank(),
        }
    }

    fn write_line(&self, out: &mut String) {
        use std::fmt::Write;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            self.form,
            self.lemma,
            self.upos,
            self.xpos,
            self.feats,
            self.head,
            self.deprel,
            self.deps,
            self.misc
        );
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    /// Comment lines including the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// The syntactic words of the sentence, i.e. the tokens the model annotates.
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.id.is_word())
    }

    pub fn words_mut(&mut self) -> impl Iterator<Item = &mut Token> {
        self.tokens.iter_mut().filter(|t| t.id.is_word())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::word_count).sum()
    }
}

/// Predicted annotation for one syntactic word.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordPrediction {
    pub lemma: String,
    pub upos: String,
    /// One entry per feature key; `None` values are dropped when rendered.
    pub feats: BTreeMap<String, String>,
}

/// Predictions for the words of one sentence, in order.
pub type SentencePrediction = Vec<WordPrediction>;

/// Parse raw bytes, rejecting invalid UTF-8.
pub fn parse_conllu_bytes(bytes: &[u8]) -> Result<Document, ConlluError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ConlluError::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    parse_conllu(text)
}

pub fn parse_conllu(text: &str) -> Result<Document, ConlluError> {
    let mut doc = Document::default();
    let mut current = Sentence::default();
    let mut open = false;
    let mut next_word = 1;

    for (idx, line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            if open {
                doc.sentences.push(std::mem::take(&mut current));
                open = false;
                next_word = 1;
            }
            continue;
        }
        open = true;

        if line.starts_with('#') {
            current.comments.push(line.to_owned());
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(ConlluError::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let id: TokenId = fields[0].parse().map_err(|_| ConlluError::InvalidId {
            line: line_no,
            id: fields[0].to_owned(),
        })?;
        if fields[1].is_empty() {
            return Err(ConlluError::EmptyForm { line: line_no });
        }
        if let TokenId::Word(found) = id {
            if found != next_word {
                return Err(ConlluError::NonMonotonicIds {
                    sentence: doc.sentences.len(),
                    line: line_no,
                    expected: next_word,
                    found,
                });
            }
            next_word += 1;
        }

        current.tokens.push(Token {
            id,
            form: fields[1].to_owned(),
            lemma: fields[2].to_owned(),
            upos: fields[3].to_owned(),
            xpos: fields[4].to_owned(),
            feats: fields[5].to_owned(),
            head: fields[6].to_owned(),
            deprel: fields[7].to_owned(),
            deps: fields[8].to_owned(),
            misc: fields[9].to_owned(),
        });
    }

    if open {
        doc.sentences.push(current);
    }
    Ok(doc)
}

pub fn serialize_conllu(doc: &Document) -> String {
    let mut out = String::new();
    for sentence in &doc.sentences {
        for comment in &sentence.comments {
            out.push_str(comment);
            out.push('\n');
        }
        for token in &sentence.tokens {
            token.write_line(&mut out);
        }
        out.push('\n');
    }
    out
}

/// Replace LEMMA, UPOS and FEATS of every syntactic word with the predictions.
///
/// Everything else, including multiword and empty-node lines, is left as is.
pub fn merge_predictions(
    baseline: &Document,
    predictions: &[SentencePrediction],
) -> Result<Document, ConlluError> {
    if baseline.sentences.len() != predictions.len() {
        let sentence = baseline.sentences.len().min(predictions.len());
        return Err(ConlluError::Alignment {
            sentence,
            detail: format!(
                "document has {} sentences but {} predictions were given",
                baseline.sentences.len(),
                predictions.len()
            ),
        });
    }

    let mut merged = baseline.clone();
    for (idx, (sentence, prediction)) in merged.sentences.iter_mut().zip(predictions).enumerate() {
        let words = sentence.word_count();
        if words != prediction.len() {
            return Err(ConlluError::Alignment {
                sentence: idx,
                detail: format!("{words} words but {} predictions", prediction.len()),
            });
        }
        for (token, predicted) in sentence.words_mut().zip(prediction) {
            token.lemma = predicted.lemma.clone();
            token.upos = predicted.upos.clone();
            token.feats = format_feats(&predicted.feats);
        }
    }
    Ok(merged)
}

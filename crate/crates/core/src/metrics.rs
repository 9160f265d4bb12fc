//! Token-level POS, UFeats and lemma accuracy against gold annotation with
//! identical tokenization.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::conllu::Document;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold has {gold} sentences, system has {system}")]
    SentenceCount { gold: usize, system: usize },

    #[error("sentence {sentence}: gold has {gold} words, system has {system}")]
    WordCount {
        sentence: usize,
        gold: usize,
        system: usize,
    },

    #[error("sentence {sentence}, word {word}: gold form {gold:?} differs from system form {system:?}")]
    Form {
        sentence: usize,
        word: usize,
        gold: String,
        system: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub pos_accuracy: f64,
    pub ufeats_accuracy: f64,
    pub lemma_accuracy: f64,
    pub token_count: usize,
}

fn feature_set(raw: &str) -> BTreeSet<&str> {
    if raw == "_" {
        BTreeSet::new()
    } else {
        raw.split('|').filter(|s| !s.is_empty()).collect()
    }
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// Score `system` against `gold`. Sentence and word numbers in errors are 1-based.
pub fn evaluate(gold: &Document, system: &Document) -> Result<EvalReport, MetricsError> {
    if gold.sentences.len() != system.sentences.len() {
        return Err(MetricsError::SentenceCount {
            gold: gold.sentences.len(),
            system: system.sentences.len(),
        });
    }
    let (mut total, mut pos, mut feats, mut lemma) = (0, 0, 0, 0);
    for (s, (g, p)) in gold.sentences.iter().zip(&system.sentences).enumerate() {
        if g.word_count() != p.word_count() {
            return Err(MetricsError::WordCount {
                sentence: s + 1,
                gold: g.word_count(),
                system: p.word_count(),
            });
        }
        for (w, (gw, pw)) in g.words().zip(p.words()).enumerate() {
            if gw.form != pw.form {
                return Err(MetricsError::Form {
                    sentence: s + 1,
                    word: w + 1,
                    gold: gw.form.clone(),
                    system: pw.form.clone(),
                });
            }
            total += 1;
            pos += usize::from(gw.upos == pw.upos);
            feats += usize::from(feature_set(&gw.feats) == feature_set(&pw.feats));
            lemma += usize::from(gw.lemma == pw.lemma);
        }
    }
    Ok(EvalReport {
        pos_accuracy: percent(pos, total),
        ufeats_accuracy: percent(feats, total),
        lemma_accuracy: percent(lemma, total),
        token_count: total,
    })
}

impl EvalReport {
    /// One `key=value` line per metric.
    pub fn to_records(&self) -> String {
        format!(
            "pos_accuracy={:.2}\nufeats_accuracy={:.2}\nlemma_accuracy={:.2}\ntoken_count={}\n",
            self.pos_accuracy, self.ufeats_accuracy, self.lemma_accuracy, self.token_count
        )
    }

    /// The one-line summary `POS x UFeats y Lemma z`.
    pub fn summary(&self) -> String {
        format!(
            "POS {:.2} UFeats {:.2} Lemma {:.2}",
            self.pos_accuracy, self.ufeats_accuracy, self.lemma_accuracy
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>8}", "Metric", "Accuracy")?;
        writeln!(f, "{:<8} {:>8.2}", "POS", self.pos_accuracy)?;
        writeln!(f, "{:<8} {:>8.2}", "UFeats", self.ufeats_accuracy)?;
        writeln!(f, "{:<8} {:>8.2}", "Lemma", self.lemma_accuracy)?;
        write!(f, "{:<8} {:>8}", "Words", self.token_count)
    }
}

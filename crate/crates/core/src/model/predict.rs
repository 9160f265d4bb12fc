use std::collections::BTreeMap;

use super::layers::{gru_step, Mode};
use super::{ModelError, Tagger};
use crate::conllu::{Sentence, SentencePrediction, WordPrediction};
use crate::embeddings::EmbeddingTable;
use crate::schema::{encode_inputs, CharVocab, EncodedSentence};
use crate::tensor::{Graph, Real, TensorError, Var};

fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl<T: Real> Tagger<T> {
    /// Greedy lemma decoding. Each step feeds back the one-hot of the
    /// previous argmax symbol; a word stops on EOW or after
    /// `len + max_decode_overrun` steps. Emitted UNK symbols take the input
    /// character at the same position when there is one.
    pub fn decode_greedy(
        &self,
        g: &mut Graph<'_, T>,
        h3: Var,
        words: &[&[usize]],
        originals: &[Vec<char>],
    ) -> Result<Vec<String>, TensorError> {
        let n = words.len();
        let caps: Vec<usize> = words
            .iter()
            .map(|w| w.len() + self.config.max_decode_overrun)
            .collect();
        let longest = caps.iter().copied().max().unwrap_or(0);

        let mut lemmas = vec![String::new(); n];
        let mut done = vec![false; n];
        let mut previous = vec![CharVocab::START; n];
        let mut s = h3;
        for j in 1..=longest {
            let active: Vec<bool> = (0..n).map(|i| !done[i] && j <= caps[i]).collect();
            if !active.iter().any(|&a| a) {
                break;
            }
            let x = self.decoder_input(g, h3, words, j, &previous)?;
            let s_new = gru_step(g, &self.ids.decoder, x, s)?;
            s = g.select_rows(&active, s_new, s)?;
            let probs = self.decoder_output(g, s)?;
            for i in (0..n).filter(|&i| active[i]) {
                let symbol = argmax(g.row(probs, i));
                previous[i] = symbol;
                match symbol {
                    CharVocab::EOW => done[i] = true,
                    CharVocab::UNK => {
                        if let Some(&c) = originals[i].get(j - 1) {
                            lemmas[i].push(c);
                        }
                    }
                    other => {
                        if let Some(c) = self.chars.char_at(other) {
                            lemmas[i].push(c);
                        }
                    }
                }
            }
        }
        Ok(lemmas)
    }

    /// Predict lemma, UPOS and features for the words of several sentences.
    /// Results do not depend on how sentences are grouped.
    pub fn predict_encoded(
        &self,
        sentences: &[&EncodedSentence],
        embeddings: &EmbeddingTable,
    ) -> Result<Vec<SentencePrediction>, ModelError> {
        let mut g = Graph::new(&self.params);
        let Some(h3) = self.encode_batch(&mut g, sentences, 0, embeddings, &mut Mode::Eval)? else {
            return Ok(sentences.iter().map(|_| Vec::new()).collect());
        };
        let (pos, feats) = self.classify_heads(&mut g, h3)?;
        let words: Vec<_> = sentences.iter().flat_map(|s| s.words.iter()).collect();
        let inputs: Vec<&[usize]> = words.iter().map(|w| self.input_chars(w)).collect();
        let originals: Vec<Vec<char>> = words
            .iter()
            .map(|w| w.form.chars().take(self.config.max_word_len).collect())
            .collect();
        let lemmas = self.decode_greedy(&mut g, h3, &inputs, &originals)?;

        let mut flat = Vec::with_capacity(words.len());
        for (i, lemma) in lemmas.into_iter().enumerate() {
            let upos = self.schema.pos_values[argmax(g.row(pos, i))].clone();
            let feats: BTreeMap<String, String> = self
                .schema
                .features
                .iter()
                .zip(&feats)
                .map(|(set, &probs)| (set.key.clone(), set.values[argmax(g.row(probs, i))].clone()))
                .collect();
            flat.push(WordPrediction { lemma, upos, feats });
        }

        let mut flat = flat.into_iter();
        Ok(sentences
            .iter()
            .map(|s| flat.by_ref().take(s.len()).collect())
            .collect())
    }

    pub fn predict_sentence(
        &self,
        sentence: &Sentence,
        embeddings: &EmbeddingTable,
    ) -> Result<SentencePrediction, ModelError> {
        let encoded = encode_inputs(sentence, &self.chars, self.schema.features.len());
        Ok(self
            .predict_encoded(&[&encoded], embeddings)?
            .pop()
            .unwrap_or_default())
    }

    /// Predictions for every sentence, processed `batch_size` sentences at a time.
    pub fn predict_sentences(
        &self,
        sentences: &[Sentence],
        embeddings: &EmbeddingTable,
        batch_size: usize,
    ) -> Result<Vec<SentencePrediction>, ModelError> {
        let encoded: Vec<EncodedSentence> = sentences
            .iter()
            .map(|s| encode_inputs(s, &self.chars, self.schema.features.len()))
            .collect();
        let mut out = Vec::with_capacity(sentences.len());
        for chunk in encoded.chunks(batch_size.max(1)) {
            let refs: Vec<&EncodedSentence> = chunk.iter().collect();
            out.extend(self.predict_encoded(&refs, embeddings)?);
        }
        Ok(out)
    }
}

use super::layers::{gru_step, lstm_step, Mode};
use super::{LstmIds, ModelError, Tagger};
use crate::embeddings::EmbeddingTable;
use crate::schema::{casing_of, Casing, CharVocab, EncodedSentence, EncodedWord};
use crate::tensor::{Graph, Real, TensorError, Var};

/// Graph handles produced by a forward pass over a batch of sentences.
/// Words are numbered sentence by sentence.
pub struct ForwardOutput {
    pub word_count: usize,
    /// Extractor output, one row per word.
    pub h3: Var,
    /// POS distribution, one row per word.
    pub pos: Var,
    /// One distribution matrix per feature key.
    pub feats: Vec<Var>,
    pub pos_targets: Vec<Option<usize>>,
    /// `[key][word]`
    pub feat_targets: Vec<Vec<Option<usize>>>,
    /// Present when at least one word has a lemma target.
    pub lemma: Option<LemmaForward>,
}

/// Teacher-forced decoder outputs for the words that have lemma targets.
pub struct LemmaForward {
    /// Symbol distribution per step, one row per decoded word.
    pub steps: Vec<Var>,
    /// Target symbols (ending with EOW) per decoded word.
    pub targets: Vec<Vec<usize>>,
    /// Batch word index of each decoded word.
    pub words: Vec<usize>,
}

impl<T: Real> Tagger<T> {
    /// Character symbols of a word, truncated to `max_word_len`.
    pub fn input_chars<'w>(&self, word: &'w EncodedWord) -> &'w [usize] {
        &word.chars[..word.chars.len().min(self.config.max_word_len)]
    }

    /// Bucket of the remaining-length position embedding at decoder step `j`
    /// (1-based) for a word of `n` characters.
    pub fn position_index(&self, n: usize, j: usize) -> usize {
        let remaining = n as isize - j as isize + 1;
        remaining.clamp(0, self.config.max_word_len as isize) as usize
    }

    fn lstm_over(
        &self,
        g: &mut Graph<'_, T>,
        ids: &LstmIds,
        inputs: &[(Var, Vec<bool>)],
        rows: usize,
        hidden: usize,
    ) -> Result<Var, TensorError> {
        let mut h = g.constant_matrix(rows, hidden, vec![T::zero(); rows * hidden])?;
        let mut c = h;
        for (x, mask) in inputs {
            let (h_new, c_new) = lstm_step(g, ids, *x, h, c)?;
            if mask.iter().all(|&m| m) {
                (h, c) = (h_new, c_new);
            } else {
                h = g.select_rows(mask, h_new, h)?;
                c = g.select_rows(mask, c_new, c)?;
            }
        }
        Ok(h)
    }

    /// `[e_word | e_casing | e_char]` for each word, one row per word.
    pub fn embed_words(
        &self,
        g: &mut Graph<'_, T>,
        words: &[&EncodedWord],
        embeddings: &EmbeddingTable,
    ) -> Result<Var, ModelError> {
        self.check_embeddings(embeddings)?;
        let cfg = &self.config;
        let n = words.len();

        let mut word_vectors = vec![T::zero(); n * cfg.word_dim];
        let mut casing = vec![T::zero(); n * cfg.casing_dim];
        for (i, w) in words.iter().enumerate() {
            if let Some(v) = embeddings.lookup(&w.form) {
                for (dst, &src) in word_vectors[i * cfg.word_dim..(i + 1) * cfg.word_dim].iter_mut().zip(v) {
                    *dst = T::of(src as f64);
                }
            }
            casing[i * cfg.casing_dim + w.casing.index()] = T::one();
        }
        let word_vectors = g.constant_matrix(n, cfg.word_dim, word_vectors)?;
        let casing = g.constant_matrix(n, cfg.casing_dim, casing)?;

        let lens: Vec<usize> = words.iter().map(|w| self.input_chars(w).len()).collect();
        let longest = lens.iter().copied().max().unwrap_or(0);
        let table = g.param(self.ids.char_embedding);
        let mut steps = Vec::with_capacity(longest);
        for t in 0..longest {
            let symbols: Vec<usize> = words
                .iter()
                .map(|w| self.input_chars(w).get(t).copied().unwrap_or(CharVocab::PAD))
                .collect();
            let mask: Vec<bool> = lens.iter().map(|&len| t < len).collect();
            steps.push((g.embedding_lookup(table, &symbols)?, mask));
        }
        let forward = self.lstm_over(g, &self.ids.char_forward, &steps, n, cfg.char_lstm_dim)?;
        steps.reverse();
        let backward = self.lstm_over(g, &self.ids.char_backward, &steps, n, cfg.char_lstm_dim)?;

        Ok(g.concat(&[word_vectors, casing, forward, backward])?)
    }

    /// Embedding of a single word form.
    pub fn embed_word(
        &self,
        g: &mut Graph<'_, T>,
        word: &str,
        embeddings: &EmbeddingTable,
    ) -> Result<Var, ModelError> {
        let encoded = EncodedWord {
            form: word.to_owned(),
            chars: self.chars.encode(word),
            casing: casing_of(word),
            pos: None,
            feats: Vec::new(),
            lemma: None,
        };
        self.embed_words(g, &[&encoded], embeddings)
    }

    /// Embedding row used for padding positions: zero word and character
    /// parts with the `padding` casing category.
    fn padding_embedding(&self, g: &mut Graph<'_, T>) -> Result<Var, TensorError> {
        let cfg = &self.config;
        let mut row = vec![T::zero(); cfg.embedding_dim()];
        row[cfg.word_dim + Casing::Padding.index()] = T::one();
        g.constant_matrix(1, cfg.embedding_dim(), row)
    }

    /// Run the stacked left-to-right LSTMs over per-timestep inputs
    /// (`[batch, embedding_dim]` each) and return the top layer's states.
    /// Dropout is applied to each layer's inputs in training mode.
    pub fn extract_features(
        &self,
        g: &mut Graph<'_, T>,
        inputs: &[Var],
        mode: &mut Mode<'_>,
    ) -> Result<Vec<Var>, TensorError> {
        let Some(&first) = inputs.first() else {
            return Ok(Vec::new());
        };
        let rows = g.shape(first).0;
        let hidden = self.config.extractor_dim;
        let mut layer_inputs = inputs.to_vec();
        for ids in &self.ids.extractor {
            let mut h = g.constant_matrix(rows, hidden, vec![T::zero(); rows * hidden])?;
            let mut c = h;
            let mut outputs = Vec::with_capacity(layer_inputs.len());
            for &x in &layer_inputs {
                let x = mode.dropout(g, x, self.config.dropout_rate)?;
                (h, c) = lstm_step(g, ids, x, h, c)?;
                outputs.push(h);
            }
            layer_inputs = outputs;
        }
        Ok(layer_inputs)
    }

    /// Extractor states for every word of the batch, one row per word.
    /// `padded_len` may exceed the longest sentence; extra positions are padding.
    pub fn encode_batch(
        &self,
        g: &mut Graph<'_, T>,
        sentences: &[&EncodedSentence],
        padded_len: usize,
        embeddings: &EmbeddingTable,
        mode: &mut Mode<'_>,
    ) -> Result<Option<Var>, ModelError> {
        let words: Vec<&EncodedWord> = sentences.iter().flat_map(|s| s.words.iter()).collect();
        if words.is_empty() {
            return Ok(None);
        }
        let padded_len = padded_len.max(sentences.iter().map(|s| s.len()).max().unwrap_or(0));
        let embedded = self.embed_words(g, &words, embeddings)?;
        let pad = self.padding_embedding(g)?;
        let table = g.concat_rows(&[embedded, pad])?;
        let pad_row = words.len();

        let offsets: Vec<usize> = sentences
            .iter()
            .scan(0, |acc, s| {
                let start = *acc;
                *acc += s.len();
                Some(start)
            })
            .collect();
        let mut inputs = Vec::with_capacity(padded_len);
        for t in 0..padded_len {
            let rows: Vec<usize> = sentences
                .iter()
                .zip(&offsets)
                .map(|(s, &off)| if t < s.len() { off + t } else { pad_row })
                .collect();
            inputs.push(g.gather_rows(table, &rows)?);
        }
        let states = self.extract_features(g, &inputs, mode)?;
        let stacked = g.concat_rows(&states)?;

        // row of word t of sentence b in `stacked` is t * batch + b
        let batch = sentences.len();
        let order: Vec<usize> = sentences
            .iter()
            .enumerate()
            .flat_map(|(b, s)| (0..s.len()).map(move |t| t * batch + b))
            .collect();
        Ok(Some(g.gather_rows(stacked, &order)?))
    }

    /// Softmax distributions of the POS head and every feature head.
    pub fn classify_heads(&self, g: &mut Graph<'_, T>, h3: Var) -> Result<(Var, Vec<Var>), TensorError> {
        let head = |g: &mut Graph<'_, T>, ids: &super::DenseIds| {
            let (w, b) = (g.param(ids.weight), g.param(ids.bias));
            let logits = g.linear(h3, w, b)?;
            g.softmax(logits)
        };
        let pos = head(g, &self.ids.pos_head)?;
        let feats = self
            .ids
            .feature_heads
            .iter()
            .map(|ids| head(g, ids))
            .collect::<Result<_, _>>()?;
        Ok((pos, feats))
    }

    /// Decoder input at step `j` (1-based) for each word:
    /// `[h3 | char embedding of character j (PAD past the end) | position
    /// embedding | one-hot of the previous symbol]`.
    pub fn decoder_input(
        &self,
        g: &mut Graph<'_, T>,
        h3: Var,
        words: &[&[usize]],
        j: usize,
        previous: &[usize],
    ) -> Result<Var, TensorError> {
        let symbols: Vec<usize> = words
            .iter()
            .map(|w| if j <= w.len() { w[j - 1] } else { CharVocab::PAD })
            .collect();
        let positions: Vec<usize> = words.iter().map(|w| self.position_index(w.len(), j)).collect();
        let vocab = self.chars.len();
        let mut one_hot = vec![T::zero(); words.len() * vocab];
        for (r, &p) in previous.iter().enumerate() {
            one_hot[r * vocab + p] = T::one();
        }

        let char_table = g.param(self.ids.char_embedding);
        let chars = g.embedding_lookup(char_table, &symbols)?;
        let position_table = g.param(self.ids.position_embedding);
        let positions = g.embedding_lookup(position_table, &positions)?;
        let previous = g.constant_matrix(words.len(), vocab, one_hot)?;
        g.concat(&[h3, chars, positions, previous])
    }

    /// Symbol distribution from a decoder state.
    pub(crate) fn decoder_output(&self, g: &mut Graph<'_, T>, s: Var) -> Result<Var, TensorError> {
        let (w, b) = (g.param(self.ids.output.weight), g.param(self.ids.output.bias));
        let logits = g.linear(s, w, b)?;
        g.softmax(logits)
    }

    /// Teacher-forced decoding: step `j` consumes the gold symbol `j - 1`
    /// (START at the first step) and runs for as many steps as each target
    /// has symbols. The state starts from `h3`.
    pub fn decode_teacher_forced(
        &self,
        g: &mut Graph<'_, T>,
        h3: Var,
        words: &[&[usize]],
        targets: &[Vec<usize>],
    ) -> Result<Vec<Var>, TensorError> {
        let steps = targets.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = h3;
        let mut outputs = Vec::with_capacity(steps);
        for j in 1..=steps {
            let previous: Vec<usize> = targets
                .iter()
                .map(|t| if j == 1 { CharVocab::START } else { t.get(j - 2).copied().unwrap_or(CharVocab::PAD) })
                .collect();
            let x = self.decoder_input(g, h3, words, j, &previous)?;
            let s_new = gru_step(g, &self.ids.decoder, x, s)?;
            let active: Vec<bool> = targets.iter().map(|t| j <= t.len()).collect();
            s = if active.iter().all(|&a| a) {
                s_new
            } else {
                g.select_rows(&active, s_new, s)?
            };
            outputs.push(self.decoder_output(g, s)?);
        }
        Ok(outputs)
    }

    /// Full forward pass with teacher-forced lemma decoding. Returns `None`
    /// for a batch without words.
    pub fn forward(
        &self,
        g: &mut Graph<'_, T>,
        sentences: &[&EncodedSentence],
        padded_len: usize,
        embeddings: &EmbeddingTable,
        mode: &mut Mode<'_>,
    ) -> Result<Option<ForwardOutput>, ModelError> {
        let Some(h3) = self.encode_batch(g, sentences, padded_len, embeddings, mode)? else {
            return Ok(None);
        };
        let (pos, feats) = self.classify_heads(g, h3)?;
        let words: Vec<&EncodedWord> = sentences.iter().flat_map(|s| s.words.iter()).collect();

        let pos_targets = words.iter().map(|w| w.pos).collect();
        let feat_targets = (0..self.schema.features.len())
            .map(|k| words.iter().map(|w| w.feats.get(k).copied().flatten()).collect())
            .collect();

        let decoded: Vec<usize> = (0..words.len()).filter(|&i| words[i].lemma.is_some()).collect();
        let lemma = if decoded.is_empty() {
            None
        } else {
            let h3_rows = if decoded.len() == words.len() {
                h3
            } else {
                g.gather_rows(h3, &decoded)?
            };
            let inputs: Vec<&[usize]> = decoded.iter().map(|&i| self.input_chars(words[i])).collect();
            let targets: Vec<Vec<usize>> = decoded
                .iter()
                .map(|&i| words[i].lemma.clone().expect("filtered"))
                .collect();
            let steps = self.decode_teacher_forced(g, h3_rows, &inputs, &targets)?;
            Some(LemmaForward {
                steps,
                targets,
                words: decoded,
            })
        };

        Ok(Some(ForwardOutput {
            word_count: words.len(),
            h3,
            pos,
            feats,
            pos_targets,
            feat_targets,
            lemma,
        }))
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::schema::EncodedSentence;

static PADDING_SENTENCE: EncodedSentence = EncodedSentence { words: Vec::new() };

/// A group of sentences padded to a common length.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub sentences: Vec<&'a EncodedSentence>,
    pub padded_len: usize,
}

impl<'a> Batch<'a> {
    pub fn new(sentences: Vec<&'a EncodedSentence>) -> Self {
        let padded_len = sentences.iter().map(|s| s.len()).max().unwrap_or(0);
        Batch { sentences, padded_len }
    }

    /// `[sentence][position]`: true for real words.
    pub fn position_mask(&self) -> Vec<Vec<bool>> {
        self.sentences
            .iter()
            .map(|s| (0..self.padded_len).map(|t| t < s.len()).collect())
            .collect()
    }

    /// `[sentence][position]`: true for real words with a lemma target.
    pub fn lemma_mask(&self) -> Vec<Vec<bool>> {
        self.sentences
            .iter()
            .map(|s| {
                (0..self.padded_len)
                    .map(|t| s.words.get(t).is_some_and(|w| w.lemma.is_some()))
                    .collect()
            })
            .collect()
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }

    /// The same batch with `extra_positions` more padding at the end of every
    /// sentence and `extra_sentences` all-padding rows.
    pub fn with_padding(&self, extra_positions: usize, extra_sentences: usize) -> Batch<'a> {
        let mut sentences = self.sentences.clone();
        sentences.extend(std::iter::repeat_n(&PADDING_SENTENCE, extra_sentences));
        Batch {
            sentences,
            padded_len: self.padded_len + extra_positions,
        }
    }
}

/// Shuffle deterministically for `(seed, epoch)` and group into batches.
pub fn make_batches(
    sentences: &[EncodedSentence],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Batch<'_>> {
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    order.shuffle(&mut rng);
    order
        .chunks(batch_size.max(1))
        .map(|chunk| Batch::new(chunk.iter().map(|&i| &sentences[i]).collect()))
        .collect()
}

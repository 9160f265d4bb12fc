use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tests::toy_schema;
use super::*;
use crate::conllu::{Sentence, Token, TokenId};
use crate::schema::{encode_inputs, EncodedSentence};
use crate::tensor::Graph;

fn tiny_config() -> ModelConfig {
    ModelConfig {
        word_dim: 3,
        char_emb_dim: 4,
        char_lstm_dim: 2,
        extractor_dim: 5,
        extractor_layers: 2,
        decoder_dim: 5,
        pos_emb_dim: 3,
        max_word_len: 6,
        max_decode_overrun: 10,
        dropout_rate: 0.5,
        ..ModelConfig::default()
    }
}

fn tiny_tagger(seed: u64) -> Tagger<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tagger = Tagger::new(tiny_config(), toy_schema(), CharVocab::new("abcdgos".chars()), &mut rng).unwrap();
    for p in tagger.params_mut().iter_mut() {
        for v in p.value.data_mut() {
            *v = rng.gen_range(-0.6..0.6);
        }
    }
    tagger
}

fn set_param(tagger: &mut Tagger<f64>, name: &str, f: impl Fn(usize, usize) -> f64) {
    let id = tagger.params().id(name).unwrap();
    let p = tagger.params_mut().get_mut(id);
    let cols = p.value.dims2().1;
    for (i, v) in p.value.data_mut().iter_mut().enumerate() {
        *v = f(i / cols, i % cols);
    }
}

fn zero_decoder(tagger: &mut Tagger<f64>) {
    for name in [
        "decoder.w_input",
        "decoder.w_gates_hidden",
        "decoder.w_candidate_hidden",
        "decoder.bias",
        "decoder.output.weight",
        "decoder.output.bias",
    ] {
        set_param(tagger, name, |_, _| 0.0);
    }
}

fn param<'a>(tagger: &'a Tagger<f64>, name: &str) -> (&'a [f64], usize) {
    let p = tagger.params().by_name(name).unwrap();
    (p.value.data(), p.value.dims2().1)
}

fn affine(w: (&[f64], usize), x: &[f64]) -> Vec<f64> {
    let (data, cols) = w;
    data.chunks(cols).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sentence(words: &[&str]) -> Sentence {
    Sentence {
        comments: vec![],
        tokens: words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::word(i + 1, *w))
            .collect(),
    }
}

/// Straightforward single-sequence LSTM with explicit loops.
fn reference_lstm(tagger: &Tagger<f64>, prefix: &str, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let w_in = param(tagger, &format!("{prefix}.w_input"));
    let w_h = param(tagger, &format!("{prefix}.w_hidden"));
    let (bias, _) = param(tagger, &format!("{prefix}.bias"));
    let hidden = bias.len() / 4;
    let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
    let mut out = Vec::new();
    for x in inputs {
        let a = affine(w_in, x);
        let b = affine(w_h, &h);
        let z: Vec<f64> = (0..4 * hidden).map(|k| a[k] + b[k] + bias[k]).collect();
        for k in 0..hidden {
            let (i, f, g, o) = (sig(z[k]), sig(z[hidden + k]), z[2 * hidden + k].tanh(), sig(z[3 * hidden + k]));
            c[k] = f * c[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        out.push(h.clone());
    }
    out
}

#[test]
fn extractor_matches_reference_recurrence() {
    let tagger = tiny_tagger(1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = tagger.config().embedding_dim();
    let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    let mut g = Graph::new(tagger.params());
    let vars: Vec<_> = inputs
        .iter()
        .map(|x| g.constant_matrix(1, dim, x.clone()).unwrap())
        .collect();
    let states = tagger.extract_features(&mut g, &vars, &mut Mode::Eval).unwrap();

    let layer0 = reference_lstm(&tagger, "extractor.0", &inputs);
    let expected = reference_lstm(&tagger, "extractor.1", &layer0);
    for (state, want) in states.iter().zip(&expected) {
        for (a, b) in g.value(*state).iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn zero_extractor_keeps_zero_states() {
    let mut tagger = tiny_tagger(2);
    for l in 0..2 {
        for part in ["w_input", "w_hidden", "bias"] {
            set_param(&mut tagger, &format!("extractor.{l}.{part}"), |_, _| 0.0);
        }
    }
    let mut g = Graph::new(tagger.params());
    let dim = tagger.config().embedding_dim();
    let x = g.constant_matrix(1, dim, vec![0.0; dim]).unwrap();
    let states = tagger.extract_features(&mut g, &[x, x], &mut Mode::Eval).unwrap();
    assert!(states.iter().all(|&s| g.value(s).iter().all(|&v| v == 0.0)));
}

/// Independent GRU decoder evaluation under teacher forcing, returning the
/// output distribution of each step.
fn reference_decoder(tagger: &Tagger<f64>, h3: &[f64], word: &[usize], target: &[usize]) -> Vec<Vec<f64>> {
    let cfg = tagger.config();
    let (char_table, char_cols) = param(tagger, "char_embedding");
    let (pos_table, pos_cols) = param(tagger, "position_embedding");
    let w_in = param(tagger, "decoder.w_input");
    let w_gates = param(tagger, "decoder.w_gates_hidden");
    let w_cand = param(tagger, "decoder.w_candidate_hidden");
    let (bias, _) = param(tagger, "decoder.bias");
    let w_out = param(tagger, "decoder.output.weight");
    let (b_out, _) = param(tagger, "decoder.output.bias");
    let symbols = tagger.chars().len();
    let hidden = cfg.decoder_dim;

    let mut s = h3.to_vec();
    let mut out = Vec::new();
    for j in 1..=target.len() {
        let symbol = if j <= word.len() { word[j - 1] } else { CharVocab::PAD };
        let remaining = (word.len() as isize - j as isize + 1).clamp(0, cfg.max_word_len as isize) as usize;
        let previous = if j == 1 { CharVocab::START } else { target[j - 2] };
        let mut x = h3.to_vec();
        x.extend_from_slice(&char_table[symbol * char_cols..(symbol + 1) * char_cols]);
        x.extend_from_slice(&pos_table[remaining * pos_cols..(remaining + 1) * pos_cols]);
        x.extend((0..symbols).map(|k| if k == previous { 1.0 } else { 0.0 }));

        let a: Vec<f64> = affine(w_in, &x).iter().zip(bias).map(|(v, b)| v + b).collect();
        let u = affine(w_gates, &s);
        let z: Vec<f64> = (0..hidden).map(|k| sig(a[k] + u[k])).collect();
        let r: Vec<f64> = (0..hidden).map(|k| sig(a[hidden + k] + u[hidden + k])).collect();
        let reset: Vec<f64> = r.iter().zip(&s).map(|(r, s)| r * s).collect();
        let c = affine(w_cand, &reset);
        let n: Vec<f64> = (0..hidden).map(|k| (a[2 * hidden + k] + c[k]).tanh()).collect();
        s = (0..hidden).map(|k| (1.0 - z[k]) * n[k] + z[k] * s[k]).collect();

        let logits: Vec<f64> = affine(w_out, &s).iter().zip(b_out).map(|(v, b)| v + b).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        out.push(exp.iter().map(|e| e / total).collect());
    }
    out
}

#[test]
fn decoder_matches_reference_recurrence() {
    let tagger = tiny_tagger(3);
    let chars = tagger.chars().clone();
    let words = [chars.encode("dogs"), chars.encode("a")];
    let targets = [
        [chars.encode("dog"), vec![CharVocab::EOW]].concat(),
        [chars.encode("abcd"), vec![CharVocab::EOW]].concat(),
    ];
    let h3_rows: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin() * 0.5).collect();

    let mut g = Graph::new(tagger.params());
    let h3 = g.constant_matrix(2, 5, h3_rows.clone()).unwrap();
    let refs: Vec<&[usize]> = words.iter().map(Vec::as_slice).collect();
    let steps = tagger.decode_teacher_forced(&mut g, h3, &refs, &targets).unwrap();
    assert_eq!(steps.len(), 5);

    for w in 0..2 {
        let expected = reference_decoder(&tagger, &h3_rows[w * 5..(w + 1) * 5], &words[w], &targets[w]);
        for (j, want) in expected.iter().enumerate() {
            for (a, b) in g.row(steps[j], w).iter().zip(want) {
                assert!((a - b).abs() < 1e-12, "word {w} step {j}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn zero_decoder_is_uniform() {
    let mut tagger = tiny_tagger(4);
    zero_decoder(&mut tagger);
    let chars = tagger.chars().clone();
    let target = [chars.encode("a"), vec![CharVocab::EOW]].concat();
    let mut g = Graph::new(tagger.params());
    let h3 = g.constant_matrix(1, 5, vec![0.3; 5]).unwrap();
    let steps = tagger
        .decode_teacher_forced(&mut g, h3, &[&chars.encode("ab")], std::slice::from_ref(&target))
        .unwrap();
    assert_eq!(steps.len(), 2);
    let symbols = chars.len() as f64;
    let mut loss = 0.0;
    for (j, &step) in steps.iter().enumerate() {
        assert!(g.value(step).iter().all(|&p| (p - 1.0 / symbols).abs() < 1e-15));
        loss -= g.value(step)[target[j]].ln();
    }
    assert!((loss / 2.0 - symbols.ln()).abs() < 1e-12);
}

#[test]
fn decoder_input_layout() {
    let tagger = tiny_tagger(5);
    assert_eq!(tagger.position_index(4, 1), 4);
    assert_eq!(tagger.position_index(4, 4), 1);
    assert_eq!(tagger.position_index(4, 6), 0);
    assert_eq!(tagger.position_index(20, 1), 6);

    let chars = tagger.chars().clone();
    let word = chars.encode("dogs");
    let h3_row: Vec<f64> = (0..5).map(|i| i as f64 + 1.0).collect();
    let mut g = Graph::new(tagger.params());
    let h3 = g.constant_matrix(1, 5, h3_row.clone()).unwrap();
    let width = tagger.config().decoder_input_dim(chars.len());
    let (pad_row, pad_cols) = param(&tagger, "char_embedding");
    let pad = &pad_row[CharVocab::PAD * pad_cols..(CharVocab::PAD + 1) * pad_cols];
    for j in 1..=7 {
        let x = tagger.decoder_input(&mut g, h3, &[&word], j, &[CharVocab::START]).unwrap();
        let row = g.row(x, 0);
        assert_eq!(row.len(), width);
        // the extractor state is part of every step
        assert_eq!(&row[..5], h3_row.as_slice());
        if j > 4 {
            assert_eq!(&row[5..9], pad);
        }
        assert_eq!(row[5 + 4 + 3 + CharVocab::START], 1.0);
    }
}

#[test]
fn decoder_shares_weights_across_words() {
    let tagger = tiny_tagger(6);
    let chars = tagger.chars().clone();
    let word = chars.encode("dog");
    let target = [chars.encode("dog"), vec![CharVocab::EOW]].concat();
    let other = [chars.encode("a"), vec![CharVocab::EOW]].concat();
    let mut g = Graph::new(tagger.params());
    let row: Vec<f64> = vec![0.1, -0.2, 0.3, 0.0, 0.5];
    let other_row: Vec<f64> = vec![0.9, 0.9, -0.9, 0.2, 0.0];
    let h3 = g
        .constant_matrix(3, 5, [row.clone(), other_row, row].concat())
        .unwrap();
    let words: Vec<&[usize]> = vec![&word, &word, &word];
    let steps = tagger
        .decode_teacher_forced(&mut g, h3, &words, &[target.clone(), other, target])
        .unwrap();
    for &step in &steps {
        assert_eq!(g.row(step, 0), g.row(step, 2));
    }
    assert_ne!(g.row(steps[0], 0), g.row(steps[0], 1));
}

#[test]
fn context_changes_decoder_output() {
    let tagger = tiny_tagger(7);
    let chars = tagger.chars().clone();
    let word = chars.encode("dogs");
    let target = [chars.encode("dog"), vec![CharVocab::EOW]].concat();
    let run = |h3_row: Vec<f64>| {
        let mut g = Graph::new(tagger.params());
        let h3 = g.constant_matrix(1, 5, h3_row).unwrap();
        let steps = tagger
            .decode_teacher_forced(&mut g, h3, &[&word], std::slice::from_ref(&target))
            .unwrap();
        steps.iter().map(|&s| g.value(s).to_vec()).collect::<Vec<_>>()
    };
    let (a, b) = (run(vec![0.2; 5]), run(vec![-0.2; 5]));
    for j in 0..a.len() {
        assert_ne!(a[j], b[j], "step {j}");
    }
}

fn greedy(tagger: &Tagger<f64>, form: &str) -> String {
    let encoded = tagger.chars().encode(form);
    let mut g = Graph::new(tagger.params());
    let h3 = g.constant_matrix(1, 5, vec![0.1; 5]).unwrap();
    tagger
        .decode_greedy(&mut g, h3, &[&encoded], &[form.chars().collect()])
        .unwrap()
        .remove(0)
}

#[test]
fn greedy_stops_immediately_on_eow() {
    let mut tagger = tiny_tagger(8);
    zero_decoder(&mut tagger);
    set_param(&mut tagger, "decoder.output.bias", |_, c| if c == CharVocab::EOW { 5.0 } else { 0.0 });
    assert_eq!(greedy(&tagger, "dogs"), "");
}

#[test]
fn greedy_is_capped_by_overrun() {
    let mut tagger = tiny_tagger(9);
    zero_decoder(&mut tagger);
    let a = tagger.chars().index('a');
    set_param(&mut tagger, "decoder.output.bias", |_, c| if c == a { 5.0 } else { 0.0 });
    assert_eq!(greedy(&tagger, "dogs"), "a".repeat(14));
}

#[test]
fn greedy_copies_unknown_characters() {
    let mut tagger = tiny_tagger(10);
    zero_decoder(&mut tagger);
    set_param(&mut tagger, "decoder.output.bias", |_, c| if c == CharVocab::UNK { 5.0 } else { 0.0 });
    // positions past the input have nothing to copy
    assert_eq!(greedy(&tagger, "xyz"), "xyz");
}

#[test]
fn embedding_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tagger = Tagger::<f64>::new(ModelConfig::default(), toy_schema(), CharVocab::new("0123abc".chars()), &mut rng)
        .unwrap();
    let mut emb = EmbeddingTable::new(300);
    emb.insert("abc", &[0.5; 300]);
    let mut g = Graph::new(tagger.params());
    let e = tagger.embed_word(&mut g, "1234", &emb).unwrap();
    let row = g.row(e, 0);
    assert_eq!(row.len(), 358);
    assert!(row[..300].iter().all(|&v| v == 0.0));
    let casing: Vec<f64> = row[300..308].to_vec();
    assert_eq!(casing, Casing::Numeric.one_hot().map(f64::from));

    let e = tagger.embed_word(&mut g, "ABC", &emb).unwrap();
    assert!(g.row(e, 0)[..300].iter().all(|&v| v == 0.5));

    // a one-character word: each direction runs a single step from zero state
    let e = tagger.embed_word(&mut g, "a", &emb).unwrap();
    let char_part = g.row(e, 0)[308..].to_vec();
    let (table, cols) = param(&tagger, "char_embedding");
    let a = tagger.chars().index('a');
    let x = table[a * cols..(a + 1) * cols].to_vec();
    let forward = reference_lstm(&tagger, "char_lstm.forward", std::slice::from_ref(&x));
    let backward = reference_lstm(&tagger, "char_lstm.backward", &[x]);
    let expected = [forward[0].clone(), backward[0].clone()].concat();
    for (a, b) in char_part.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn heads_are_uniform_with_zero_weights() {
    let mut tagger = tiny_tagger(12);
    for name in ["head.pos.weight", "head.pos.bias"] {
        set_param(&mut tagger, name, |_, _| 0.0);
    }
    let mut g = Graph::new(tagger.params());
    let h3 = g.constant_matrix(2, 5, vec![0.4; 10]).unwrap();
    let (pos, feats) = tagger.classify_heads(&mut g, h3).unwrap();
    assert!(g.value(pos).iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    for f in feats {
        for r in 0..2 {
            assert!((g.row(f, r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn prediction_is_deterministic_and_grouping_free() {
    let tagger = tiny_tagger(13);
    let emb = EmbeddingTable::new(3);
    let sentences = vec![sentence(&["dogs", "Bad"]), sentence(&["a"]), sentence(&["cogs", "go", "sad"])];
    let all = tagger.predict_sentences(&sentences, &emb, 8).unwrap();
    let single = tagger.predict_sentences(&sentences, &emb, 1).unwrap();
    assert_eq!(all, single);
    assert_eq!(all, tagger.predict_sentences(&sentences, &emb, 8).unwrap());
    assert_eq!(all.iter().map(Vec::len).collect::<Vec<_>>(), [2, 1, 3]);
    for word in all.iter().flatten() {
        assert_eq!(word.feats.len(), 2);
        assert!(tagger.schema().pos_values.contains(&word.upos));
    }
}

#[test]
fn empty_sentence_predicts_nothing() {
    let tagger = tiny_tagger(14);
    let mut s = sentence(&[]);
    s.tokens.push(Token {
        id: TokenId::Empty(1, 1),
        ..Token::word(1, "x")
    });
    assert!(tagger.predict_sentence(&s, &EmbeddingTable::new(3)).unwrap().is_empty());
    let none: Vec<&EncodedSentence> = Vec::new();
    assert!(tagger.predict_encoded(&none, &EmbeddingTable::new(3)).unwrap().is_empty());
}

#[test]
fn padding_does_not_change_extractor_states() {
    let tagger = tiny_tagger(15);
    let emb = EmbeddingTable::new(3);
    let (a, b) = (sentence(&["dogs", "go"]), sentence(&["a", "bad", "cog", "sad"]));
    let (a, b) = (encode_inputs(&a, tagger.chars(), 2), encode_inputs(&b, tagger.chars(), 2));
    let mut g = Graph::new(tagger.params());
    let tight = tagger.encode_batch(&mut g, &[&a, &b], 0, &emb, &mut Mode::Eval).unwrap().unwrap();
    let padded = tagger.encode_batch(&mut g, &[&a, &b], 9, &emb, &mut Mode::Eval).unwrap().unwrap();
    let alone = tagger.encode_batch(&mut g, &[&a], 0, &emb, &mut Mode::Eval).unwrap().unwrap();
    assert_eq!(g.value(tight), g.value(padded));
    for r in 0..2 {
        for (x, y) in g.row(tight, r).iter().zip(g.row(alone, r)) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

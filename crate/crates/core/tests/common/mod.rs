#![allow(dead_code)]

use std::collections::BTreeMap;

use jointtag::conllu::{parse_conllu, Document};
use jointtag::embeddings::EmbeddingTable;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One annotated word: form, lemma, UPOS, FEATS.
pub type Row = (String, String, String, String);

pub fn to_conllu(sentences: &[Vec<Row>]) -> String {
    let mut text = String::new();
    for (s, words) in sentences.iter().enumerate() {
        text += &format!("# sent_id = s{}\n", s + 1);
        for (i, (form, lemma, upos, feats)) in words.iter().enumerate() {
            let head = if i == 0 { 0 } else { 1 };
            let rel = if i == 0 { "root" } else { "dep" };
            text += &format!("{}\t{form}\t{lemma}\t{upos}\t_\t{feats}\t{head}\t{rel}\t_\t_\n", i + 1);
        }
        text += "\n";
    }
    text
}

pub fn to_document(sentences: &[Vec<Row>]) -> Document {
    parse_conllu(&to_conllu(sentences)).unwrap()
}

fn row(form: &str, lemma: &str, upos: &str, feats: &str) -> Row {
    (form.into(), lemma.into(), upos.into(), feats.into())
}

/// A small English-like corpus: `DET (ADJ) NOUN VERB (DET NOUN) .` with
/// regular plural nouns and inflected verbs. Fewer than 50 distinct forms.
pub fn toy_corpus(sentences: usize, seed: u64) -> Vec<Vec<Row>> {
    let nouns = ["cat", "dog", "bird", "tree", "house", "car", "book", "cup", "lamp", "song"];
    let verbs = ["walk", "jump", "play", "call", "look"];
    let adjectives = ["big", "red", "old", "small", "new"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let noun = |rng: &mut ChaCha8Rng| {
        let stem = *nouns.choose(rng).unwrap();
        if rng.gen_bool(0.5) {
            row(stem, stem, "NOUN", "Number=Sing")
        } else {
            row(&format!("{stem}s"), stem, "NOUN", "Number=Plur")
        }
    };
    (0..sentences)
        .map(|_| {
            let mut words = vec![row(if rng.gen_bool(0.5) { "the" } else { "a" }, "the", "DET", "_")];
            words[0].1 = words[0].0.clone();
            if rng.gen_bool(0.5) {
                let adj = *adjectives.choose(&mut rng).unwrap();
                words.push(row(adj, adj, "ADJ", "Degree=Pos"));
            }
            words.push(noun(&mut rng));
            let verb = *verbs.choose(&mut rng).unwrap();
            words.push(match rng.gen_range(0..3) {
                0 => row(verb, verb, "VERB", "Tense=Pres"),
                1 => row(&format!("{verb}ed"), verb, "VERB", "Tense=Past|VerbForm=Fin"),
                _ => row(&format!("{verb}s"), verb, "VERB", "Number=Sing|Person=3|Tense=Pres"),
            });
            if rng.gen_bool(0.5) {
                words.push(row("the", "the", "DET", "_"));
                words.push(noun(&mut rng));
            }
            words.push(row(".", ".", "PUNCT", "_"));
            words
        })
        .collect()
}

/// Random vectors for every form in `docs`.
pub fn random_embeddings(docs: &[&[Vec<Row>]], dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    let forms: std::collections::BTreeSet<&str> = docs
        .iter()
        .flat_map(|d| d.iter().flatten())
        .map(|r| r.0.as_str())
        .collect();
    for form in forms {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        table.insert(form, &v);
    }
    table
}

pub fn embeddings_text(table: &EmbeddingTable) -> String {
    let mut out = Vec::new();
    table.write_text(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

/// Stems over a small alphabet that never end in `s`; roughly half contain
/// an `s` somewhere in the middle.
pub fn plural_stems(count: usize, seed: u64) -> Vec<String> {
    let letters: Vec<char> = "abdeiklmnoprtu".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut stems = Vec::new();
    while stems.len() < count {
        let len = rng.gen_range(3..=7);
        let mut stem: Vec<char> = (0..len).map(|_| *letters.choose(&mut rng).unwrap()).collect();
        if stems.len() % 2 == 0 {
            let at = rng.gen_range(1..len - 1);
            stem[at] = 's';
        }
        let stem: String = stem.into_iter().collect();
        if seen.insert(stem.clone()) {
            stems.push(stem);
        }
    }
    stems
}

/// Sentences of nouns in singular (`stem`) and plural (`stem + "s"`) form.
pub fn noun_sentences(words: &[(String, bool)], per_sentence: usize) -> Vec<Vec<Row>> {
    words
        .chunks(per_sentence)
        .map(|chunk| {
            chunk
                .iter()
                .map(|(stem, plural)| {
                    if *plural {
                        row(&format!("{stem}s"), stem, "NOUN", "Number=Plur")
                    } else {
                        row(stem, stem, "NOUN", "Number=Sing")
                    }
                })
                .collect()
        })
        .collect()
}

/// Hand-checkable fixture with comments, a multiword range and an empty node.
pub const FIDELITY_FIXTURE: &str = "# newdoc id = fixture\n\
# sent_id = 1\n\
# text = The cats don't sleep.\n\
1\tThe\tthe\tDET\tDT\tDefinite=Def|PronType=Art\t2\tdet\t_\t_\n\
2\tcats\tcat\tNOUN\tNNS\tNumber=Plur\t4\tnsubj\t_\t_\n\
3-4\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
3\tdo\tdo\tAUX\tVBP\tMood=Ind|Tense=Pres\t5\taux\t_\t_\n\
4\tn't\tnot\tPART\tRB\t_\t5\tadvmod\t_\t_\n\
5\tsleep\tsleep\tVERB\tVB\tVerbForm=Inf\t0\troot\t_\tSpaceAfter=No\n\
5.1\tsleeps\tsleep\tVERB\t_\t_\t_\t_\t5:conj\t_\n\
6\t.\t.\tPUNCT\t.\t_\t5\tpunct\t_\t_\n\
\n\
# sent_id = 2\n\
1\tDogs\tdog\tNOUN\tNNS\tNumber=Plur\t2\tnsubj\t_\t_\n\
2\tbark\tbark\tVERB\tVBP\tTense=Pres\t0\troot\t_\t_\n\
\n";

pub fn count_map<I: IntoIterator<Item = String>>(items: I) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

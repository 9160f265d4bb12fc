//! Pretrained word vectors in the common whitespace-separated text format.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("I/O error reading embeddings: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: invalid number {value:?}")]
    Number { line: usize, value: String },

    #[error("embeddings file contains no vectors")]
    Empty,
}

/// Frozen word vectors with exact, then lowercased lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Add a vector; an existing entry for the same word is kept.
    pub fn insert(&mut self, word: impl Into<String>, vector: &[f32]) {
        assert_eq!(vector.len(), self.dim, "embedding dimension mismatch");
        let next = self.index.len();
        if let std::collections::hash_map::Entry::Vacant(e) = self.index.entry(word.into()) {
            e.insert(next);
            self.data.extend_from_slice(vector);
        }
    }

    fn row(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Exact match, else lowercased match, else `None` (the zero vector).
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        if let Some(&idx) = self.index.get(word) {
            return Some(self.row(idx));
        }
        let lower = word.to_lowercase();
        self.index.get(&lower).map(|&idx| self.row(idx))
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut table: Option<EmbeddingTable> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                let dim = fields[1].parse().unwrap_or(0);
                table = Some(EmbeddingTable::new(dim));
                continue;
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(fields.len() - 1));
            let expected = table.dim + 1;
            if fields.len() > expected {
                log::warn!("line {line_no}: skipping token containing whitespace");
                continue;
            }
            if fields.len() < expected {
                return Err(EmbeddingError::Dimension {
                    line: line_no,
                    expected: table.dim,
                    found: fields.len() - 1,
                });
            }
            let vector = fields[1..]
                .iter()
                .map(|v| {
                    v.parse::<f32>().map_err(|_| EmbeddingError::Number {
                        line: line_no,
                        value: (*v).to_owned(),
                    })
                })
                .collect::<Result<Vec<f32>, _>>()?;
            table.insert(fields[0], &vector);
        }
        table.filter(|t| t.dim > 0).ok_or(EmbeddingError::Empty)
    }

    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut words: Vec<(&String, &usize)> = self.index.iter().collect();
        words.sort_by_key(|(_, &idx)| idx);
        writeln!(out, "{} {}", words.len(), self.dim)?;
        for (word, &idx) in words {
            write!(out, "{word}")?;
            for v in self.row(idx) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

//! Dense per-word vector tables and the small amount of vector arithmetic the
//! objectives share.

use rand::Rng as _;

use crate::corpus::{Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::rng::{keyed_stream, Stream};

/// `len` vectors of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(len: usize, dim: usize) -> Self {
        EmbeddingTable {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingTable { dim, data })
    }

    /// Uniform in `[-0.5/d, 0.5/d]`, drawn from a stream keyed by the word
    /// string, so a word gets the same start vector in every table that
    /// contains it.
    pub fn init_for_vocab(vocab: &Vocabulary, dim: usize, seed: u64) -> Self {
        let half = 0.5 / dim as f64;
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for w in vocab.words() {
            let mut rng = keyed_stream(seed, Stream::WordInit, w);
            data.extend((0..dim).map(|_| rng.random_range(-half..=half)));
        }
        EmbeddingTable { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, id: WordId) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_mut(&mut self, id: WordId) -> &mut [f64] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn check(&self, id: WordId) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownWord(id))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// A vocabulary together with its vectors; the unit that goes in and out of
/// checkpoint files and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
}

impl WordVectors {
    pub fn new(vocab: Vocabulary, table: EmbeddingTable) -> Result<Self> {
        if vocab.len() != table.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                found: table.len(),
            });
        }
        Ok(WordVectors { vocab, table })
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocab.get(word).map(|id| self.table.row(id))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero vectors are rejected.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cosine_examples() {
        assert_relative_eq!(cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_relative_eq!(
            cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            0.707_106_781_186_547_5,
            epsilon = 1e-12
        );
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn init_is_keyed_by_word() {
        let a = Vocabulary::from_words(["dog", "cat"]);
        let b = Vocabulary::from_words(["mammal", "cat"]);
        let ta = EmbeddingTable::init_for_vocab(&a, 4, 3);
        let tb = EmbeddingTable::init_for_vocab(&b, 4, 3);
        assert_eq!(ta.row(a.get("cat").unwrap()), tb.row(b.get("cat").unwrap()));
        assert_ne!(ta.row(a.get("dog").unwrap()), tb.row(b.get("mammal").unwrap()));
        assert!(ta.as_slice().iter().all(|x| x.abs() <= 0.125));
    }
}

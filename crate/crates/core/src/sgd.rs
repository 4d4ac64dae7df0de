//! Sparse per-instance gradients and the shared update rule.

use crate::corpus::WordId;
use crate::embedding::EmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdOptions {
    pub lr: f64,
    /// Weight of the optional L2 term `l2 * ||x||^2` on every touched
    /// parameter.
    pub l2: f64,
}

impl SgdOptions {
    pub fn new(lr: f64) -> Self {
        SgdOptions { lr, l2: 0.0 }
    }
}

/// Gradients for the embedding rows one instance touched. A word appearing
/// several times accumulates into one entry; a touched word whose objective
/// gradient is zero still gets an entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordGrads {
    entries: Vec<(WordId, Vec<f64>)>,
}

impl WordGrads {
    fn slot(&mut self, id: WordId, dim: usize) -> &mut Vec<f64> {
        let pos = match self.entries.iter().position(|(w, _)| *w == id) {
            Some(p) => p,
            None => {
                self.entries.push((id, vec![0.0; dim]));
                self.entries.len() - 1
            }
        };
        &mut self.entries[pos].1
    }

    pub fn touch(&mut self, id: WordId, dim: usize) {
        self.slot(id, dim);
    }

    pub fn add(&mut self, id: WordId, scale: f64, g: &[f64]) {
        let slot = self.slot(id, g.len());
        for (s, x) in slot.iter_mut().zip(g) {
            *s += scale * x;
        }
    }

    pub fn get(&self, id: WordId) -> Option<&[f64]> {
        self.entries.iter().find(|(w, _)| *w == id).map(|(_, g)| g.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &[f64])> {
        self.entries.iter().map(|(w, g)| (*w, g.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `x -= lr * (weight * g + 2 l2 x)` for a dense parameter block.
pub(crate) fn apply_dense(params: &mut [f64], grad: &[f64], weight: f64, opts: &SgdOptions) {
    if opts.l2 != 0.0 {
        for (p, g) in params.iter_mut().zip(grad) {
            *p -= opts.lr * (weight * g + 2.0 * opts.l2 * *p);
        }
    } else {
        for (p, g) in params.iter_mut().zip(grad) {
            *p -= opts.lr * (weight * g);
        }
    }
}

/// Applies one instance's embedding gradients scaled by `weight`.
pub(crate) fn apply_words(emb: &mut EmbeddingTable, grads: &WordGrads, weight: f64, opts: &SgdOptions) {
    let mut total = Vec::new();
    for (id, g) in grads.iter() {
        total.clear();
        total.extend(g.iter().map(|x| weight * x));
        let row = emb.row_mut(id);
        if opts.l2 != 0.0 {
            for (t, x) in total.iter_mut().zip(row.iter()) {
                *t += 2.0 * opts.l2 * x;
            }
        }
        for (x, t) in row.iter_mut().zip(&total) {
            *x -= opts.lr * t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_words_accumulate() {
        let mut g = WordGrads::default();
        g.add(3, 1.0, &[1.0, 2.0]);
        g.add(5, 1.0, &[0.5, 0.5]);
        g.add(3, -2.0, &[1.0, 1.0]);
        g.touch(7, 2);
        assert_eq!(g.len(), 3);
        assert_eq!(g.get(3).unwrap(), &[-1.0, 0.0]);
        assert_eq!(g.get(7).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn l2_shrinks_parameters() {
        let mut p = vec![1.0, -2.0];
        apply_dense(&mut p, &[0.0, 0.0], 1.0, &SgdOptions { lr: 0.1, l2: 0.5 });
        assert_eq!(p, vec![0.9, -1.8]);
    }
}

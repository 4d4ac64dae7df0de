//! Task evaluations over trained embeddings.

pub mod analogy;
pub mod clusters;
pub mod kb;

use std::collections::HashMap;

use crate::corpus::Vocabulary;
use crate::embedding::{EmbeddingTable, WordVectors};
use crate::error::Result;

pub use analogy::{
    analogy_scores, evaluate_analogies, maxdiff_accuracy, read_category, spearman, write_analogy_csv, AnalogyCategory,
    AnalogyScores, CategoryResult, MaxDiffQuestion, MaxDiffResult,
};
pub use clusters::{kmeans, kmeans_export, write_clusters_tsv, KMeansResult};
pub use kb::{
    fit_threshold, fit_thresholds, kb_classify, write_kb_csv, KbReport, RelationResult, ThresholdTable, TupleScorer,
};

/// Elementwise mean of `w` and `v` on words both sides have; every other
/// word keeps the vector of the side it comes from. Ids follow `v`, then the
/// `w`-only words in `w` order.
pub fn average_embeddings(w: &WordVectors, v: &WordVectors) -> Result<WordVectors> {
    if w.dim() != v.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: v.dim(),
            found: w.dim(),
        });
    }
    let mut words: Vec<String> = v.vocab.words().to_vec();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(words.len());
    let w_index: HashMap<&str, usize> = w
        .vocab
        .words()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    for (id, word) in v.vocab.words().iter().enumerate() {
        let vr = v.table.row(id);
        rows.push(match w_index.get(word.as_str()) {
            Some(&wi) => w.table.row(wi).iter().zip(vr).map(|(a, b)| 0.5 * (a + b)).collect(),
            None => vr.to_vec(),
        });
    }
    for (id, word) in w.vocab.words().iter().enumerate() {
        if v.vocab.get(word).is_none() {
            words.push(word.clone());
            rows.push(w.table.row(id).to_vec());
        }
    }
    WordVectors::new(
        Vocabulary::from_words(words),
        EmbeddingTable::from_rows(v.dim(), &rows)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::norm;

    fn wv(words: &[&str], rows: &[Vec<f64>]) -> WordVectors {
        WordVectors::new(
            Vocabulary::from_words(words.iter().copied()),
            EmbeddingTable::from_rows(rows[0].len(), rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn averages_shared_and_copies_the_rest() {
        let w = wv(
            &["RARE", "cat", "runs"],
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 3.0]],
        );
        let v = wv(
            &["RARE", "cat", "mammal"],
            &[vec![0.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
        );
        let a = average_embeddings(&w, &v).unwrap();
        assert_eq!(a.get("cat").unwrap(), &[0.5, 0.5]);
        assert_eq!(a.get("mammal").unwrap(), &[2.0, 2.0]);
        assert_eq!(a.get("runs").unwrap(), &[3.0, 3.0]);
        assert_eq!(a.vocab.len(), 4);
        for (id, word) in a.vocab.words().iter().enumerate() {
            let bound = [w.get(word), v.get(word)]
                .iter()
                .flatten()
                .map(|r| norm(r))
                .fold(0.0, f64::max);
            assert!(norm(a.table.row(id)) <= bound + 1e-12);
        }
    }

    #[test]
    fn identical_sides_average_to_themselves() {
        let w = wv(&["RARE", "cat"], &[vec![0.1, 0.2], vec![1.0, -1.0]]);
        assert_eq!(average_embeddings(&w, &w).unwrap(), w);
    }
}

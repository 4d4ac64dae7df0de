//! Knowledge-base completion as per-relation threshold classification.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::embedding::WordVectors;
use crate::error::{Error, Result};
use crate::kb::KbModel;
use crate::wordnet::{RelationId, RelationTuple, SynsetId, WordNet};

/// Scores synset-level tuples. An entity's vector is the mean of the vectors
/// of its member words that the embedding covers.
pub struct TupleScorer<'a> {
    model: &'a KbModel,
    emb: &'a WordVectors,
    wordnet: &'a WordNet,
}

impl<'a> TupleScorer<'a> {
    pub fn new(model: &'a KbModel, emb: &'a WordVectors, wordnet: &'a WordNet) -> Result<Self> {
        if model.dim() != emb.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: emb.dim(),
            });
        }
        Ok(TupleScorer { model, emb, wordnet })
    }

    pub fn entity_vector(&self, s: SynsetId) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.emb.dim()];
        let mut n = 0usize;
        for &id in self.wordnet.map.members(s) {
            if let Some(row) = self.emb.get(self.wordnet.vocab.word(id)) {
                for (a, b) in sum.iter_mut().zip(row) {
                    *a += b;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        let inv = 1.0 / n as f64;
        sum.iter_mut().for_each(|x| *x *= inv);
        Some(sum)
    }

    /// `None` when either entity has no covered member word or the relation
    /// is unknown to the model.
    pub fn score(&self, t: &RelationTuple) -> Option<f64> {
        if t.relation >= self.model.n_relations() {
            return None;
        }
        let l = self.entity_vector(t.left)?;
        let r = self.entity_vector(t.right)?;
        self.model.score_vectors(&l, t.relation, &r).ok()
    }
}

/// Best threshold for one relation: `(threshold, accuracy)`. Candidates are
/// midpoints between adjacent distinct scores plus one point half a gap
/// outside each end; ties go to the lowest candidate. `None` on empty input.
pub fn fit_threshold(scored: &[(f64, bool)]) -> Option<(f64, f64)> {
    if scored.is_empty() {
        return None;
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Distinct scores with their positive/negative counts.
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for &(s, label) in &sorted {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if label {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, usize::from(label), usize::from(!label))),
        }
    }
    let total = sorted.len() as f64;
    let positives: usize = groups.iter().map(|g| g.1).sum();

    let m = groups.len();
    let edge = if m >= 2 {
        (
            0.5 * (groups[1].0 - groups[0].0),
            0.5 * (groups[m - 1].0 - groups[m - 2].0),
        )
    } else {
        (0.5, 0.5)
    };
    // Threshold below group k: groups k.. are predicted positive.
    let mut best = (groups[0].0 - edge.0, positives as f64 / total);
    let mut neg_below = 0usize;
    let mut pos_below = 0usize;
    for k in 1..=m {
        neg_below += groups[k - 1].2;
        pos_below += groups[k - 1].1;
        let correct = neg_below + (positives - pos_below);
        let acc = correct as f64 / total;
        if acc > best.1 {
            let t = if k < m {
                0.5 * (groups[k - 1].0 + groups[k].0)
            } else {
                groups[m - 1].0 + edge.1
            };
            best = (t, acc);
        }
    }
    Some(best)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdTable {
    thresholds: BTreeMap<RelationId, (f64, f64)>,
}

impl ThresholdTable {
    pub fn get(&self, r: RelationId) -> Option<f64> {
        self.thresholds.get(&r).map(|t| t.0)
    }

    /// Dev accuracy reached by the fitted threshold.
    pub fn dev_accuracy(&self, r: RelationId) -> Option<f64> {
        self.thresholds.get(&r).map(|t| t.1)
    }

    pub fn insert(&mut self, r: RelationId, threshold: f64, dev_accuracy: f64) {
        self.thresholds.insert(r, (threshold, dev_accuracy));
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Fits one threshold per relation on the dev tuples. Relations with no
/// scorable dev tuple are left out with a warning.
pub fn fit_thresholds(scorer: &TupleScorer<'_>, dev: &[RelationTuple], relations: &[String]) -> ThresholdTable {
    let mut by_rel: BTreeMap<RelationId, Vec<(f64, bool)>> = BTreeMap::new();
    let mut skipped = 0usize;
    for t in dev {
        match scorer.score(t) {
            Some(s) => by_rel.entry(t.relation).or_default().push((s, t.label)),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} dev tuples could not be scored and were skipped");
    }
    let mut table = ThresholdTable::default();
    for (r, name) in relations.iter().enumerate() {
        match by_rel.get(&r).and_then(|s| fit_threshold(s)) {
            Some((t, acc)) => table.insert(r, t, acc),
            None => log::warn!("relation `{name}` has no dev data; it gets no threshold"),
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationResult {
    pub relation: RelationId,
    pub name: String,
    pub threshold: Option<f64>,
    pub total: usize,
    pub correct: usize,
    /// Tuples counted wrong because they could not be scored or the relation
    /// has no threshold.
    pub unscored: usize,
}

impl RelationResult {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbReport {
    pub relations: Vec<RelationResult>,
}

impl KbReport {
    pub fn total(&self) -> usize {
        self.relations.iter().map(|r| r.total).sum()
    }

    /// Tuple-weighted accuracy over all relations.
    pub fn overall(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.relations.iter().map(|r| r.correct).sum::<usize>() as f64 / total as f64
    }
}

/// A tuple is correct when `score >= T_R` agrees with its label.
pub fn kb_classify(
    scorer: &TupleScorer<'_>,
    thresholds: &ThresholdTable,
    test: &[RelationTuple],
    relations: &[String],
) -> KbReport {
    let mut results: Vec<RelationResult> = relations
        .iter()
        .enumerate()
        .map(|(r, name)| RelationResult {
            relation: r,
            name: name.clone(),
            threshold: thresholds.get(r),
            total: 0,
            correct: 0,
            unscored: 0,
        })
        .collect();
    for t in test {
        let Some(res) = results.get_mut(t.relation) else {
            continue;
        };
        res.total += 1;
        match (res.threshold, scorer.score(t)) {
            (Some(th), Some(s)) => {
                if (s >= th) == t.label {
                    res.correct += 1;
                }
            }
            _ => res.unscored += 1,
        }
    }
    let unscored: usize = results.iter().map(|r| r.unscored).sum();
    if unscored > 0 {
        log::warn!("{unscored} test tuples had no score or threshold and count as incorrect");
    }
    results.retain(|r| r.total > 0);
    KbReport { relations: results }
}

pub fn write_kb_csv(path: &Path, report: &KbReport) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "relation,threshold,tuples,correct,unscored,accuracy").map_err(io)?;
    for r in &report.relations {
        let th = r.threshold.map(|t| format!("{t}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            th,
            r.total,
            r.correct,
            r.unscored,
            r.accuracy()
        )
        .map_err(io)?;
    }
    let correct: usize = report.relations.iter().map(|r| r.correct).sum();
    let unscored: usize = report.relations.iter().map(|r| r.unscored).sum();
    writeln!(
        out,
        "ALL,,{},{},{},{}",
        report.total(),
        correct,
        unscored,
        report.overall()
    )
    .map_err(io)?;
    out.flush().map_err(io)
}

//! Joint training by the alternating direction method of multipliers.
//!
//! The distributional objective owns the `w` vectors and the relational
//! objective owns the `v` vectors. For every word `i` present on both sides
//! a multiplier vector `y_i` couples the two copies through the augmented
//! Lagrangian
//!
//! ```text
//! L_P(w, v) = sum_i y_i . (w_i - v_i) + rho/2 * sum_i ||w_i - v_i||^2
//! ```
//!
//! Each iteration runs, in order and with everything else frozen:
//!
//! 1. one SGD pass of the distributional objective (plus `L_P`) on `w`;
//! 2. one SGD pass of the relational objective (plus `L_P`) on `v`;
//! 3. the dual update `y_i += rho * (w_i - v_i)`.
//!
//! Objective weights are `2 * alpha` and `2 * (1 - alpha)`, so the default
//! `alpha = 0.5` trains the unweighted sum and single-objective runs are the
//! `rho = 0, y = 0` special case bit for bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::config::{Objective, Relational, RunConfig};
use crate::corpus::{sample_ngram_block, NgramBlock, NgramCorpus, Vocabulary, WordId};
use crate::embedding::{dot, norm, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graphdist::{gd_sample_loss, gd_sgd_step, GdParams};
use crate::kb::{kb_epoch_instances, kb_instances_loss, kb_sgd_pass, KbModel, NtnParams, TransEParams};
use crate::nlm::{corrupt_block, nlm_block_loss, nlm_sgd_pass, NlmParams};
use crate::rng::{stream, Stream};
use crate::sgd::SgdOptions;
use crate::wordnet::{sample_word_pairs, RelationTupleSet, WordNet, WordPair, WordTuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Distributional copy.
    W,
    /// Relational copy.
    V,
}

/// Multipliers and hyperparameters tying the two embedding copies together.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmCoupling {
    pub rho: f64,
    pub alpha: f64,
    words: Vec<String>,
    w_ids: Vec<WordId>,
    v_ids: Vec<WordId>,
    w_slot: HashMap<WordId, usize>,
    v_slot: HashMap<WordId, usize>,
    y: EmbeddingTable,
}

impl AdmmCoupling {
    /// Shared words are those spelled identically in both vocabularies,
    /// RARE excluded, in `w`-id order. Multipliers start at zero.
    pub fn new(w_vocab: &Vocabulary, v_vocab: &Vocabulary, dim: usize, rho: f64, alpha: f64) -> Self {
        let pairs: Vec<(String, WordId, WordId)> = w_vocab
            .words()
            .iter()
            .enumerate()
            .filter(|&(id, _)| id != w_vocab.rare_id())
            .filter_map(|(wid, word)| v_vocab.get(word).map(|vid| (word.clone(), wid, vid)))
            .filter(|&(_, _, vid)| vid != v_vocab.rare_id())
            .collect();
        Self::from_pairs(pairs, dim, rho, alpha)
    }

    pub fn from_pairs(pairs: Vec<(String, WordId, WordId)>, dim: usize, rho: f64, alpha: f64) -> Self {
        let mut words = Vec::with_capacity(pairs.len());
        let mut w_ids = Vec::with_capacity(pairs.len());
        let mut v_ids = Vec::with_capacity(pairs.len());
        for (word, w, v) in pairs {
            words.push(word);
            w_ids.push(w);
            v_ids.push(v);
        }
        let w_slot = w_ids.iter().enumerate().map(|(s, &w)| (w, s)).collect();
        let v_slot = v_ids.iter().enumerate().map(|(s, &v)| (v, s)).collect();
        let y = EmbeddingTable::zeros(words.len(), dim);
        AdmmCoupling {
            rho,
            alpha,
            words,
            w_ids,
            v_ids,
            w_slot,
            v_slot,
            y,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// `(w id, v id)` for each shared word, indexed like the multipliers.
    pub fn shared(&self) -> impl Iterator<Item = (WordId, WordId)> + '_ {
        self.w_ids.iter().copied().zip(self.v_ids.iter().copied())
    }

    pub fn slot(&self, side: Side, id: WordId) -> Option<usize> {
        match side {
            Side::W => self.w_slot.get(&id).copied(),
            Side::V => self.v_slot.get(&id).copied(),
        }
    }

    pub fn y(&self) -> &EmbeddingTable {
        &self.y
    }

    pub fn set_y(&mut self, y: EmbeddingTable) -> Result<()> {
        if y.len() != self.len() || y.dim() != self.y.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.y.dim(),
                found: y.len() * y.dim(),
            });
        }
        self.y = y;
        Ok(())
    }

    fn check(&self, w: &EmbeddingTable, v: &EmbeddingTable) -> Result<()> {
        for (s, (wi, vi)) in self.shared().enumerate() {
            if wi >= w.len() || vi >= v.len() {
                return Err(Error::NotShared(self.words[s].clone()));
            }
        }
        Ok(())
    }
}

/// A coupling seen from one side during that side's SGD pass. The partner
/// table is the frozen other copy.
#[derive(Debug, Clone, Copy)]
pub struct Coupled<'a> {
    pub coupling: &'a AdmmCoupling,
    pub side: Side,
    pub partner: &'a EmbeddingTable,
}

impl Coupled<'_> {
    pub fn weight(&self) -> f64 {
        match self.side {
            Side::W => 2.0 * self.coupling.alpha,
            Side::V => 2.0 * (1.0 - self.coupling.alpha),
        }
    }

    fn partner_row(&self, slot: usize) -> &[f64] {
        let id = match self.side {
            Side::W => self.coupling.v_ids[slot],
            Side::V => self.coupling.w_ids[slot],
        };
        self.partner.row(id)
    }

    /// Adds `d L_P / d own` to `out`: `y + rho (w - v)` on the `w` side,
    /// `-y + rho (v - w)` on the `v` side. No-op for unshared words.
    pub fn add_penalty_gradient(&self, id: WordId, own: &[f64], out: &mut [f64]) {
        let Some(slot) = self.coupling.slot(self.side, id) else {
            return;
        };
        let y = self.coupling.y.row(slot);
        let other = self.partner_row(slot);
        let rho = self.coupling.rho;
        let sign = match self.side {
            Side::W => 1.0,
            Side::V => -1.0,
        };
        for k in 0..out.len() {
            out[k] += sign * y[k] + rho * (own[k] - other[k]);
        }
    }

    /// One gradient step of `L_P` on every shared row of this side, taken
    /// once per pass after the objective updates.
    pub fn penalty_step(&self, emb: &mut EmbeddingTable, lr: f64) {
        let ids = match self.side {
            Side::W => &self.coupling.w_ids,
            Side::V => &self.coupling.v_ids,
        };
        let mut g = vec![0.0; emb.dim()];
        for &id in ids {
            g.iter_mut().for_each(|x| *x = 0.0);
            self.add_penalty_gradient(id, emb.row(id), &mut g);
            for (x, d) in emb.row_mut(id).iter_mut().zip(&g) {
                *x -= lr * d;
            }
        }
    }

    /// This word's share of `L_P` with `own` in place of its current vector.
    pub fn penalty_term(&self, id: WordId, own: &[f64]) -> f64 {
        let Some(slot) = self.coupling.slot(self.side, id) else {
            return 0.0;
        };
        let y = self.coupling.y.row(slot);
        let other = self.partner_row(slot);
        let diff: Vec<f64> = match self.side {
            Side::W => own.iter().zip(other).map(|(w, v)| w - v).collect(),
            Side::V => other.iter().zip(own).map(|(w, v)| w - v).collect(),
        };
        dot(y, &diff) + 0.5 * self.coupling.rho * dot(&diff, &diff)
    }
}

/// The augmented Lagrangian penalty over all shared words.
pub fn penalty_loss(c: &AdmmCoupling, w: &EmbeddingTable, v: &EmbeddingTable) -> Result<f64> {
    c.check(w, v)?;
    let mut linear = 0.0;
    let mut quad = 0.0;
    for (s, (wi, vi)) in c.shared().enumerate() {
        let diff: Vec<f64> = w.row(wi).iter().zip(v.row(vi)).map(|(a, b)| a - b).collect();
        linear += dot(c.y.row(s), &diff);
        quad += dot(&diff, &diff);
    }
    Ok(linear + 0.5 * c.rho * quad)
}

/// Dual step: `y_i += rho * (w_i - v_i)` for every shared word.
pub fn update_multipliers(c: &mut AdmmCoupling, w: &EmbeddingTable, v: &EmbeddingTable) -> Result<()> {
    c.check(w, v)?;
    let rho = c.rho;
    for s in 0..c.len() {
        let (wi, vi) = (c.w_ids[s], c.v_ids[s]);
        let (wr, vr) = (w.row(wi), v.row(vi));
        for (k, y) in c.y.row_mut(s).iter_mut().enumerate() {
            *y += rho * (wr[k] - vr[k]);
        }
    }
    Ok(())
}

/// Mean `||y_i||_2` over the shared words.
pub fn mean_y_norm(c: &AdmmCoupling) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    c.y.rows().map(norm).sum::<f64>() / c.len() as f64
}

/// Mean over shared words of `||w_i - v_i|| / ((||w_i|| + ||v_i||) / 2)`.
pub fn mean_scaled_residual(c: &AdmmCoupling, w: &EmbeddingTable, v: &EmbeddingTable) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let total: f64 = c
        .shared()
        .map(|(wi, vi)| {
            let (wr, vr) = (w.row(wi), v.row(vi));
            let scale = 0.5 * (norm(wr) + norm(vr));
            if scale == 0.0 {
                return 0.0;
            }
            let diff: Vec<f64> = wr.iter().zip(vr).map(|(a, b)| a - b).collect();
            norm(&diff) / scale
        })
        .sum();
    total / c.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRecord {
    pub iteration: usize,
    /// Distributional plus relational loss on this iteration's samples,
    /// evaluated after the iteration, penalty excluded.
    pub joint_loss: f64,
    pub mean_y_norm: f64,
    pub mean_scaled_residual: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "iteration,joint_loss,mean_y_norm,mean_scaled_residual";

pub fn diagnostics_csv(records: &[DiagnosticRecord]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{:e},{:e},{:e}\n",
            r.iteration, r.joint_loss, r.mean_y_norm, r.mean_scaled_residual
        ));
    }
    out
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticRecord]) -> Result<()> {
    std::fs::write(path, diagnostics_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if n == 0 {
            if line.trim() != DIAGNOSTICS_HEADER {
                return Err(Error::parse(path, 1, "unexpected diagnostics header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::parse(path, n + 1, "expected four comma-separated fields");
        if f.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        out.push(DiagnosticRecord {
            iteration: f[0].trim().parse().map_err(|_| bad())?,
            joint_loss: num(f[1])?,
            mean_y_norm: num(f[2])?,
            mean_scaled_residual: num(f[3])?,
        });
    }
    Ok(out)
}

/// Corpus-side inputs.
#[derive(Debug, Clone)]
pub struct CorpusData {
    pub vocab: Vocabulary,
    pub ngrams: NgramCorpus,
}

/// Borrowed inputs for a run. Only the parts the objective needs must be
/// present.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainingData<'a> {
    pub corpus: Option<&'a CorpusData>,
    pub wordnet: Option<&'a WordNet>,
    pub tuples: Option<&'a RelationTupleSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionalState {
    pub emb: EmbeddingTable,
    pub params: NlmParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelationalModel {
    Gd(GdParams),
    Kb(KbModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationalState {
    pub kind: Relational,
    pub emb: EmbeddingTable,
    pub model: RelationalModel,
}

/// Everything a run mutates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub objective: Objective,
    pub iteration: usize,
    pub nlm: Option<DistributionalState>,
    pub rel: Option<RelationalState>,
    pub coupling: Option<AdmmCoupling>,
}

/// The samples one iteration trains on. Regenerated identically from the
/// seed and the iteration number.
struct Samples {
    nlm: Option<(NgramBlock, Vec<Vec<WordId>>)>,
    gd: Option<Vec<WordPair>>,
    kb: Option<Vec<(WordTuple, WordTuple)>>,
}

pub struct Trainer<'a> {
    config: RunConfig,
    data: TrainingData<'a>,
    entity_words: Vec<WordId>,
    state: TrainState,
    history: Vec<DiagnosticRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: RunConfig, objective: Objective, data: TrainingData<'a>) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let dim = config.dim;

        let nlm = if objective.distributional {
            let corpus = data
                .corpus
                .ok_or_else(|| Error::NoTrainingData("the NLM objective needs a corpus".into()))?;
            if corpus.ngrams.order() != config.ngram_order {
                return Err(Error::InvalidConfig(format!(
                    "corpus holds {}-grams but ngram_order is {}",
                    corpus.ngrams.order(),
                    config.ngram_order
                )));
            }
            Some(DistributionalState {
                emb: EmbeddingTable::init_for_vocab(&corpus.vocab, dim, seed),
                params: NlmParams::init(
                    config.ngram_order,
                    dim,
                    config.nlm_hidden,
                    &mut stream(seed, Stream::NlmInit, 0),
                ),
            })
        } else {
            None
        };

        let mut entity_words = Vec::new();
        let rel = match objective.relational {
            None => None,
            Some(kind) => {
                let wn = data
                    .wordnet
                    .ok_or_else(|| Error::NoTrainingData("relational objectives need WordNet data".into()))?;
                entity_words = wn.entity_words();
                let emb = EmbeddingTable::init_for_vocab(&wn.vocab, dim, seed);
                let model = match kind {
                    Relational::Gd => {
                        let first = sample_word_pairs(
                            &wn.map,
                            &wn.graph,
                            config.gd_words,
                            config.gd_neighbors,
                            &mut stream(seed, Stream::GdSample, 1),
                        )?;
                        RelationalModel::Gd(GdParams::from_batch(&first))
                    }
                    Relational::TransE | Relational::Ntn => {
                        let tuples = data
                            .tuples
                            .ok_or_else(|| Error::NoTrainingData("TransE/NTN need relation tuples".into()))?;
                        if tuples.train.is_empty() {
                            return Err(Error::NoTrainingData("relation training split is empty".into()));
                        }
                        let n_rel = tuples.relations.len();
                        let mut rng = stream(seed, Stream::KbInit, 0);
                        RelationalModel::Kb(match kind {
                            Relational::TransE => KbModel::TransE(TransEParams::init(n_rel, dim, &mut rng)),
                            _ => KbModel::Ntn(NtnParams::init(n_rel, dim, config.ntn_hidden, &mut rng)),
                        })
                    }
                };
                Some(RelationalState { kind, emb, model })
            }
        };

        let coupling = if objective.is_joint() {
            let c = AdmmCoupling::new(
                &data.corpus.expect("checked above").vocab,
                &data.wordnet.expect("checked above").vocab,
                dim,
                config.rho,
                config.alpha,
            );
            if c.is_empty() {
                return Err(Error::NoTrainingData(
                    "corpus and WordNet vocabularies share no words".into(),
                ));
            }
            Some(c)
        } else {
            None
        };

        Ok(Trainer {
            config,
            data,
            entity_words,
            state: TrainState {
                objective,
                iteration: 0,
                nlm,
                rel,
                coupling,
            },
            history: Vec::new(),
        })
    }

    /// Resumes from a saved state; the state must match the data's shapes.
    pub fn from_state(config: RunConfig, data: TrainingData<'a>, state: TrainState) -> Result<Self> {
        let mut t = Trainer::new(config, state.objective, data)?;
        let fresh = &t.state;
        let same_shape = |a: &EmbeddingTable, b: &EmbeddingTable| a.len() == b.len() && a.dim() == b.dim();
        let ok = match (&fresh.nlm, &state.nlm) {
            (Some(a), Some(b)) => same_shape(&a.emb, &b.emb),
            (None, None) => true,
            _ => false,
        } && match (&fresh.rel, &state.rel) {
            (Some(a), Some(b)) => same_shape(&a.emb, &b.emb) && a.kind == b.kind,
            (None, None) => true,
            _ => false,
        } && match (&fresh.coupling, &state.coupling) {
            (Some(a), Some(b)) => a.words == b.words,
            (None, None) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidConfig(
                "saved state does not match the training data".into(),
            ));
        }
        t.state = state;
        Ok(t)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn history(&self) -> &[DiagnosticRecord] {
        &self.history
    }

    pub fn into_parts(self) -> (TrainState, Vec<DiagnosticRecord>) {
        (self.state, self.history)
    }

    fn samples(&self, t: usize) -> Result<Samples> {
        let seed = self.config.seed;
        let t = t as u64;
        let nlm = match (&self.state.nlm, self.data.corpus) {
            (Some(_), Some(corpus)) => {
                let mut rng = stream(seed, Stream::NlmBlock, t);
                let block = sample_ngram_block(&corpus.ngrams, self.config.block_size, &mut rng)?;
                let corrupted = corrupt_block(&block, &corpus.vocab, self.config.corrupt_position, &mut rng)?;
                Some((block, corrupted))
            }
            _ => None,
        };
        let (mut gd, mut kb) = (None, None);
        if let (Some(rel), Some(wn)) = (&self.state.rel, self.data.wordnet) {
            match rel.kind {
                Relational::Gd => {
                    gd = Some(sample_word_pairs(
                        &wn.map,
                        &wn.graph,
                        self.config.gd_words,
                        self.config.gd_neighbors,
                        &mut stream(seed, Stream::GdSample, t),
                    )?);
                }
                Relational::TransE | Relational::Ntn => {
                    let tuples = self.data.tuples.expect("checked at construction");
                    kb = Some(kb_epoch_instances(
                        tuples,
                        &wn.map,
                        &self.entity_words,
                        &mut stream(seed, Stream::KbEpoch, t),
                    )?);
                }
            }
        }
        Ok(Samples { nlm, gd, kb })
    }

    fn record(&self, samples: &Samples) -> Result<DiagnosticRecord> {
        let s = &self.state;
        let mut joint = 0.0;
        if let (Some(side), Some((block, corrupted))) = (&s.nlm, &samples.nlm) {
            joint += nlm_block_loss(&side.params, &side.emb, block, corrupted)?;
        }
        if let Some(rel) = &s.rel {
            joint += match (&rel.model, &samples.gd, &samples.kb) {
                (RelationalModel::Gd(p), Some(pairs), _) => gd_sample_loss(p, &rel.emb, pairs)?,
                (RelationalModel::Kb(m), _, Some(inst)) => kb_instances_loss(m, &rel.emb, inst)?,
                _ => 0.0,
            };
        }
        let (y_norm, residual) = match (&s.coupling, &s.nlm, &s.rel) {
            (Some(c), Some(w), Some(v)) => (mean_y_norm(c), mean_scaled_residual(c, &w.emb, &v.emb)),
            _ => (0.0, 0.0),
        };
        Ok(DiagnosticRecord {
            iteration: s.iteration,
            joint_loss: joint,
            mean_y_norm: y_norm,
            mean_scaled_residual: residual,
        })
    }

    /// Recomputes the diagnostic record for the current state by replaying
    /// the samples of its iteration.
    pub fn diagnose(&self) -> Result<DiagnosticRecord> {
        if self.state.iteration == 0 {
            let samples = self.samples(1)?;
            return self.record(&samples);
        }
        let samples = self.samples(self.state.iteration)?;
        self.record(&samples)
    }

    fn try_step(&mut self, t: usize, samples: &Samples) -> Result<()> {
        let cfg = &self.config;
        let TrainState { nlm, rel, coupling, .. } = &mut self.state;

        // Step 1: w and theta.
        if let (Some(side), Some((block, corrupted))) = (nlm.as_mut(), &samples.nlm) {
            let coupled = match (coupling.as_ref(), rel.as_ref()) {
                (Some(c), Some(r)) => Some(Coupled {
                    coupling: c,
                    side: Side::W,
                    partner: &r.emb,
                }),
                _ => None,
            };
            let opts = SgdOptions {
                lr: cfg.lr_nlm,
                l2: cfg.l2,
            };
            nlm_sgd_pass(
                &mut side.params,
                &mut side.emb,
                block,
                corrupted,
                &opts,
                coupled.as_ref(),
            )?;
        }

        // Step 2: v and phi.
        if let Some(side) = rel.as_mut() {
            let coupled = match (coupling.as_ref(), nlm.as_ref()) {
                (Some(c), Some(n)) => Some(Coupled {
                    coupling: c,
                    side: Side::V,
                    partner: &n.emb,
                }),
                _ => None,
            };
            match (&mut side.model, &samples.gd, &samples.kb) {
                (RelationalModel::Gd(p), Some(pairs), _) => {
                    let opts = SgdOptions {
                        lr: cfg.lr_gd,
                        l2: cfg.l2,
                    };
                    gd_sgd_step(p, &mut side.emb, pairs, &opts, coupled.as_ref())?;
                }
                (RelationalModel::Kb(m), _, Some(inst)) => {
                    let opts = SgdOptions {
                        lr: cfg.lr_kb,
                        l2: cfg.l2,
                    };
                    kb_sgd_pass(m, &mut side.emb, inst, &opts, coupled.as_ref())?;
                }
                _ => unreachable!("samples match the relational model"),
            }
        }

        // Step 3: multipliers.
        if let (Some(c), Some(w), Some(v)) = (coupling.as_mut(), nlm.as_ref(), rel.as_ref()) {
            update_multipliers(c, &w.emb, &v.emb)?;
        }
        self.state.iteration = t;
        Ok(())
    }

    /// One full iteration. On a non-finite loss the state is rolled back to
    /// the end of the previous iteration and `Error::Diverged` is returned.
    pub fn step(&mut self) -> Result<DiagnosticRecord> {
        let t = self.state.iteration + 1;
        let samples = self.samples(t)?;
        let snapshot = self.state.clone();
        let outcome = self.try_step(t, &samples).and_then(|()| {
            let rec = self.record(&samples)?;
            let finite =
                rec.joint_loss.is_finite() && rec.mean_y_norm.is_finite() && rec.mean_scaled_residual.is_finite();
            if finite {
                Ok(rec)
            } else {
                Err(Error::NonFiniteLoss("joint"))
            }
        });
        match outcome {
            Ok(rec) => {
                self.history.push(rec);
                Ok(rec)
            }
            Err(Error::NonFiniteLoss(what)) => {
                self.state = snapshot;
                Err(Error::Diverged { iteration: t, what })
            }
            Err(e) => {
                self.state = snapshot;
                Err(e)
            }
        }
    }

    pub fn run(&mut self, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            self.step()?;
        }
        Ok(())
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub history: Vec<DiagnosticRecord>,
}

/// Joint training of the NLM with one relational objective.
pub fn admm_train(
    config: &RunConfig,
    data: TrainingData<'_>,
    relational: Relational,
    iterations: usize,
) -> Result<TrainOutcome> {
    let mut t = Trainer::new(config.clone(), Objective::joint(relational), data)?;
    t.run(iterations)?;
    let (state, history) = t.into_parts();
    Ok(TrainOutcome { state, history })
}

/// The same loop with a single objective and no coupling.
pub fn single_objective_train(
    config: &RunConfig,
    data: TrainingData<'_>,
    objective: Objective,
    iterations: usize,
) -> Result<TrainOutcome> {
    if objective.is_joint() {
        return Err(Error::InvalidConfig(format!("`{objective}` is a joint objective")));
    }
    let mut t = Trainer::new(config.clone(), objective, data)?;
    t.run(iterations)?;
    let (state, history) = t.into_parts();
    Ok(TrainOutcome { state, history })
}

mod common;

use std::collections::BTreeMap;

use jointvec::admm::{RelationalModel, Trainer, TrainingData};
use jointvec::checkpoint::{load_checkpoint, save_checkpoint, StateVocabs};
use jointvec::config::{Objective, Relational, RunConfig};
use jointvec::embedding::EmbeddingTable;
use jointvec::graphdist::{gd_sample_loss, gd_sgd_step, GdParams};
use jointvec::sgd::SgdOptions;
use jointvec::synthetic::{planted_transe, toy_world, PlantedSpec, ToySpec, ToyWorld};
use jointvec::wordnet::{word_similarity, WordNet, WordPair};
use jointvec::Error;

fn small_toy() -> ToyWorld {
    toy_world(&ToySpec {
        sentences: 300,
        ..ToySpec::default()
    })
    .unwrap()
}

fn small_config() -> RunConfig {
    RunConfig {
        dim: 6,
        ngram_order: 3,
        nlm_hidden: 4,
        block_size: 400,
        gd_words: 100,
        gd_neighbors: 3,
        ..RunConfig::default()
    }
}

fn toy_data(toy: &ToyWorld) -> TrainingData<'_> {
    TrainingData {
        corpus: Some(&toy.corpus),
        wordnet: Some(&toy.wordnet),
        tuples: None,
    }
}

#[test]
fn zero_iterations_keep_the_initial_state() {
    let toy = small_toy();
    let objective = Objective::joint(Relational::Gd);
    let mut a = Trainer::new(small_config(), objective, toy_data(&toy)).unwrap();
    let init = a.state().clone();
    a.run(0).unwrap();
    assert_eq!(a.state(), &init);
    assert!(a.history().is_empty());
    assert_eq!(init.iteration, 0);
    // Multipliers start at zero.
    assert!(init.coupling.unwrap().y().as_slice().iter().all(|&y| y == 0.0));
}

#[test]
fn resuming_from_a_checkpoint_matches_an_uninterrupted_run() {
    let toy = small_toy();
    let config = small_config();
    let objective = Objective::joint(Relational::Gd);

    let mut straight = Trainer::new(config.clone(), objective, toy_data(&toy)).unwrap();
    straight.run(12).unwrap();

    let mut first = Trainer::new(config.clone(), objective, toy_data(&toy)).unwrap();
    first.run(5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let vocabs = StateVocabs {
        w: Some(&toy.corpus.vocab),
        v: Some(&toy.wordnet.vocab),
    };
    save_checkpoint(dir.path(), &config, first.state(), vocabs, &[], &BTreeMap::new()).unwrap();
    let ck = load_checkpoint(dir.path()).unwrap();
    let state = ck.to_state().unwrap();
    assert_eq!(&state, first.state(), "checkpoint text round trip is lossy");

    let mut resumed = Trainer::from_state(config, toy_data(&toy), state).unwrap();
    resumed.run(7).unwrap();
    assert_eq!(resumed.state(), straight.state());
    assert_eq!(resumed.history(), &straight.history()[5..]);
}

#[test]
fn diagnose_replays_each_recorded_iteration() {
    let toy = small_toy();
    let config = small_config();
    let mut t = Trainer::new(config.clone(), Objective::joint(Relational::Gd), toy_data(&toy)).unwrap();
    for _ in 0..6 {
        let rec = t.step().unwrap();
        let replay = Trainer::from_state(config.clone(), toy_data(&toy), t.state().clone()).unwrap();
        assert_eq!(replay.diagnose().unwrap(), rec);
    }
}

#[test]
fn mismatched_state_is_rejected() {
    let toy = small_toy();
    let mut t = Trainer::new(small_config(), Objective::joint(Relational::Gd), toy_data(&toy)).unwrap();
    t.run(1).unwrap();
    let other = RunConfig {
        dim: 7,
        ..small_config()
    };
    let err = Trainer::from_state(other, toy_data(&toy), t.state().clone())
        .err()
        .unwrap();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
}

#[test]
fn graph_distance_descends_on_two_words() {
    // Two words at 90 degrees whose target similarity is 0.8: repeated passes
    // over the same pair must lower the loss every time at a small rate.
    let mut emb = EmbeddingTable::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let mut params = GdParams { a: 1.0, b: 0.0 };
    let pairs = [WordPair { i: 0, j: 1, sim: 0.8 }];
    let opts = SgdOptions { lr: 0.01, l2: 0.0 };
    let mut prev = gd_sample_loss(&params, &emb, &pairs).unwrap();
    assert!((prev - 0.64).abs() < 1e-15);
    for _ in 0..300 {
        gd_sgd_step(&mut params, &mut emb, &pairs, &opts, None).unwrap();
        let loss = gd_sample_loss(&params, &emb, &pairs).unwrap();
        assert!(loss < prev, "loss rose from {prev} to {loss}");
        prev = loss;
    }
    assert!(prev < 0.1 * 0.64, "{prev}");
}

#[test]
fn graph_distance_trainer_descends_on_two_synonyms() {
    // Two words sharing one synset. Every possible pair is scored after each
    // iteration, so the loss is not at the mercy of which pairs were drawn.
    let edges: Vec<(String, String)> = vec![];
    let members = vec![("s".to_string(), "a".to_string()), ("s".to_string(), "b".to_string())];
    let wn = WordNet::from_parts(&edges, &members, 10).unwrap();
    let all: Vec<WordPair> = wn
        .entity_words()
        .iter()
        .flat_map(|&i| wn.entity_words().into_iter().map(move |j| (i, j)))
        .map(|(i, j)| WordPair {
            i,
            j,
            sim: word_similarity(&wn.graph, &wn.map, i, j).unwrap().unwrap(),
        })
        .collect();
    assert_eq!(all.len(), 4);
    let data = TrainingData {
        wordnet: Some(&wn),
        ..TrainingData::default()
    };
    let config = RunConfig {
        dim: 4,
        lr_gd: 0.01,
        gd_words: 4,
        gd_neighbors: 2,
        ..RunConfig::default()
    };
    let mut t = Trainer::new(config, Objective::relational(Relational::Gd), data).unwrap();
    let loss = |t: &Trainer| {
        let rel = t.state().rel.as_ref().unwrap();
        let RelationalModel::Gd(p) = &rel.model else {
            unreachable!()
        };
        gd_sample_loss(p, &rel.emb, &all).unwrap()
    };
    let mut prev = loss(&t);
    for it in 1..=10 {
        t.step().unwrap();
        let now = loss(&t);
        assert!(now < prev, "iteration {it}: {prev} -> {now}");
        prev = now;
    }
}

#[test]
fn divergence_rolls_back_to_the_last_good_state() {
    let toy = small_toy();
    let config = RunConfig {
        lr_gd: 1e3,
        ..small_config()
    };
    let mut t = Trainer::new(config, Objective::joint(Relational::Gd), toy_data(&toy)).unwrap();
    let mut last_good = t.state().clone();
    let err = loop {
        match t.step() {
            Ok(_) => last_good = t.state().clone(),
            Err(e) => break e,
        }
        assert!(t.state().iteration < 500, "never diverged");
    };
    let Error::Diverged { iteration, .. } = err else {
        panic!("unexpected error {err}");
    };
    assert_eq!(iteration, last_good.iteration + 1);
    assert_eq!(t.state(), &last_good);
}

#[test]
fn kb_objectives_train_without_a_corpus() {
    let kb = planted_transe(&PlantedSpec::default()).unwrap();
    for kind in [Relational::TransE, Relational::Ntn] {
        let data = TrainingData {
            corpus: None,
            wordnet: Some(&kb.wordnet),
            tuples: Some(&kb.tuples),
        };
        let config = RunConfig {
            dim: 8,
            ntn_hidden: 2,
            lr_kb: 0.02,
            ..RunConfig::default()
        };
        let mut t = Trainer::new(config, Objective::relational(kind), data).unwrap();
        t.run(60).unwrap();
        let loss: Vec<f64> = t.history().iter().map(|r| r.joint_loss).collect();
        assert!(loss[59] < loss[0], "{kind:?}: {} -> {}", loss[0], loss[59]);
    }
}

#[test]
fn joint_objective_needs_both_sides() {
    let toy = small_toy();
    let data = TrainingData {
        corpus: None,
        ..toy_data(&toy)
    };
    assert!(Trainer::new(small_config(), Objective::joint(Relational::Gd), data).is_err());
    let entity_corpus = common::entity_corpus(&["a".to_string(), "b".to_string()], 20, 5, 3, 1);
    assert_eq!(entity_corpus.vocab.len(), 3);
}

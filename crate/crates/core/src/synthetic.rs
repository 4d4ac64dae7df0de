//! Small generated datasets with known structure, for smoke runs, tests and
//! demos.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::admm::CorpusData;
use crate::corpus::{build_vocabulary, NgramCorpus};
use crate::embedding::{EmbeddingTable, WordVectors};
use crate::error::{Error, Result};
use crate::eval::{AnalogyCategory, MaxDiffQuestion};
use crate::rng::{from_seed, Rng};
use crate::wordnet::{RelationTuple, RelationTupleSet, WordNet};

/// A `(left, right)` line of a two-column data file.
pub type NamePair = (String, String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpec {
    pub words: usize,
    pub classes: usize,
    pub sentences: usize,
    pub sentence_len: usize,
    pub order: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            words: 500,
            classes: 10,
            sentences: 2000,
            sentence_len: 12,
            order: 3,
            seed: 7,
        }
    }
}

fn word(i: usize) -> String {
    format!("w{i}")
}

/// Sentences from a class-level Markov chain: word `w{i}` belongs to class
/// `i % classes`, the next class is usually the successor of the current
/// one, and words within a class are drawn with a mild frequency skew.
pub fn toy_sentences(spec: &ToySpec) -> Vec<String> {
    let mut rng = from_seed(spec.seed);
    let per_class = spec.words / spec.classes;
    let mut out = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let mut class = rng.random_range(0..spec.classes);
        let mut toks = Vec::with_capacity(spec.sentence_len);
        for _ in 0..spec.sentence_len {
            // Squaring a uniform favours low ranks within the class.
            let r = rng.random::<f64>();
            let rank = ((r * r) * per_class as f64) as usize;
            toks.push(word(class + spec.classes * rank.min(per_class - 1)));
            class = if rng.random::<f64>() < 0.7 {
                (class + 1) % spec.classes
            } else {
                rng.random_range(0..spec.classes)
            };
        }
        out.push(toks.join(" "));
    }
    out
}

/// A three-level hierarchy: one synset per class, five subclasses under each,
/// words in the subclass `(i / classes) % 5`. Every seventh word also joins
/// the subclass after its own.
pub fn toy_wordnet_parts(spec: &ToySpec) -> (Vec<NamePair>, Vec<NamePair>) {
    let mut edges = Vec::new();
    for c in 0..spec.classes {
        for m in 0..5 {
            edges.push((format!("c{c}.s{m}"), format!("c{c}")));
        }
    }
    let mut members = Vec::new();
    for i in 0..spec.words {
        let c = i % spec.classes;
        let m = (i / spec.classes) % 5;
        members.push((format!("c{c}.s{m}"), word(i)));
        if i % 7 == 0 {
            members.push((format!("c{c}.s{}", (m + 1) % 5), word(i)));
        }
    }
    (edges, members)
}

#[derive(Debug, Clone)]
pub struct ToyWorld {
    pub sentences: Vec<String>,
    pub corpus: CorpusData,
    pub edges: Vec<(String, String)>,
    pub members: Vec<(String, String)>,
    pub wordnet: WordNet,
}

pub fn toy_world(spec: &ToySpec) -> Result<ToyWorld> {
    let sentences = toy_sentences(spec);
    let vocab = build_vocabulary(sentences.iter().flat_map(|s| s.split_whitespace()), spec.words);
    let ngrams = NgramCorpus::from_sentences(spec.order, &sentences, &vocab)?;
    let (edges, members) = toy_wordnet_parts(spec);
    let wordnet = WordNet::from_parts(&edges, &members, spec.words)?;
    Ok(ToyWorld {
        sentences,
        corpus: CorpusData { vocab, ngrams },
        edges,
        members,
        wordnet,
    })
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_pairs(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    write_lines(path, pairs.iter().map(|(a, b)| format!("{a}\t{b}")))
}

/// Writes `corpus.txt`, `hypernyms.tsv` and `members.tsv` into `dir`.
pub fn write_toy_files(dir: &Path, world: &ToyWorld) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_lines(&dir.join("corpus.txt"), world.sentences.iter().cloned())?;
    write_pairs(&dir.join("hypernyms.tsv"), &world.edges)?;
    write_pairs(&dir.join("members.tsv"), &world.members)
}

/// Relation tuples planted on a `side x side` grid. Entity `g{x}_{y}` sits at
/// `spacing * (x, y)` in the first two coordinates and each relation
/// translates by a fixed grid step, so positives have a zero TransE residual
/// and corrupted tuples one of at least `spacing`.
#[derive(Debug, Clone)]
pub struct PlantedKb {
    pub edges: Vec<(String, String)>,
    pub members: Vec<(String, String)>,
    pub wordnet: WordNet,
    pub tuples: RelationTupleSet,
    /// Ground-truth entity vectors, one per WordNet word.
    pub entities: WordVectors,
    /// Ground-truth relation vectors, indexed like `tuples.relations`.
    pub relations: EmbeddingTable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub side: usize,
    pub positives: usize,
    pub dim: usize,
    pub spacing: f64,
    /// Fractions of positives held out for dev and test; each held-out
    /// positive is paired with one negative.
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            side: 7,
            positives: 200,
            dim: 10,
            spacing: 1.5,
            dev_fraction: 0.15,
            test_fraction: 0.15,
            seed: 11,
        }
    }
}

const PLANTED_STEPS: [(&str, (i64, i64)); 6] = [
    ("right", (1, 0)),
    ("up", (0, 1)),
    ("diag", (1, 1)),
    ("antidiag", (1, -1)),
    ("right2", (2, 0)),
    ("up2", (0, 2)),
];

fn entity(x: i64, y: i64) -> String {
    format!("g{x}_{y}")
}

/// A tuple is only held out when both its entities keep at least two
/// training tuples, so every dev and test entity has been trained.
pub fn planted_transe(spec: &PlantedSpec) -> Result<PlantedKb> {
    if spec.dim < 2 || spec.side < 3 {
        return Err(Error::InvalidConfig("planted grid needs dim >= 2 and side >= 3".into()));
    }
    let side = spec.side as i64;
    let mut rng = from_seed(spec.seed);

    let mut members = Vec::new();
    for x in 0..side {
        for y in 0..side {
            members.push((entity(x, y), entity(x, y)));
        }
    }
    let edges: Vec<(String, String)> = Vec::new();
    let wordnet = WordNet::from_parts(&edges, &members, members.len())?;
    let syn = |x: i64, y: i64| wordnet.graph.id(&entity(x, y)).expect("entity synset exists");
    let inside = |x: i64, y: i64| (0..side).contains(&x) && (0..side).contains(&y);

    // (x, y, relation); the right entity follows from the step.
    let mut all = Vec::new();
    for (r, &(_, (dx, dy))) in PLANTED_STEPS.iter().enumerate() {
        for x in 0..side {
            for y in 0..side {
                if inside(x + dx, y + dy) {
                    all.push((x, y, r));
                }
            }
        }
    }
    if all.len() < spec.positives {
        return Err(Error::InvalidConfig(format!(
            "a {side}x{side} grid has only {} planted tuples",
            all.len()
        )));
    }
    for i in (1..all.len()).rev() {
        all.swap(i, rng.random_range(0..=i));
    }
    all.truncate(spec.positives);

    let n_dev = (spec.positives as f64 * spec.dev_fraction).round() as usize;
    let n_test = (spec.positives as f64 * spec.test_fraction).round() as usize;
    let target = |&(x, y, r): &(i64, i64, usize)| {
        let (dx, dy) = PLANTED_STEPS[r].1;
        (x + dx, y + dy)
    };
    let mut degree = std::collections::HashMap::new();
    for t in &all {
        *degree.entry((t.0, t.1)).or_insert(0usize) += 1;
        *degree.entry(target(t)).or_insert(0usize) += 1;
    }
    let mut held = Vec::new();
    let mut train = Vec::new();
    for t in &all {
        let ends = [(t.0, t.1), target(t)];
        if held.len() < n_dev + n_test && ends.iter().all(|e| degree[e] > 2) {
            for e in ends {
                *degree.get_mut(&e).expect("counted above") -= 1;
            }
            held.push(*t);
        } else {
            train.push(*t);
        }
    }
    if held.len() < n_dev + n_test {
        return Err(Error::InvalidConfig("too few tuples can be held out".into()));
    }

    let mut tuples = RelationTupleSet::default();
    for (name, _) in PLANTED_STEPS {
        tuples.intern_relation(name);
    }
    let negative = |rng: &mut Rng, t: &(i64, i64, usize)| loop {
        let (nx, ny) = (rng.random_range(0..side), rng.random_range(0..side));
        let (tx, ty) = target(t);
        let (ex, ey) = ((tx - nx) as f64, (ty - ny) as f64);
        if spec.spacing * (ex * ex + ey * ey).sqrt() > 1.0 {
            break RelationTuple {
                left: syn(t.0, t.1),
                relation: t.2,
                right: syn(nx, ny),
                label: false,
            };
        }
    };
    let positive = |t: &(i64, i64, usize)| {
        let (tx, ty) = target(t);
        RelationTuple {
            left: syn(t.0, t.1),
            relation: t.2,
            right: syn(tx, ty),
            label: true,
        }
    };
    for (k, t) in held.iter().enumerate() {
        let split = if k < n_dev { &mut tuples.dev } else { &mut tuples.test };
        split.push(positive(t));
        split.push(negative(&mut rng, t));
    }
    tuples.train = train.iter().map(positive).collect();

    let mut ent = EmbeddingTable::zeros(wordnet.vocab.len(), spec.dim);
    for x in 0..side {
        for y in 0..side {
            let id = wordnet.vocab.get(&entity(x, y)).expect("entity word exists");
            let row = ent.row_mut(id);
            row[0] = spec.spacing * x as f64;
            row[1] = spec.spacing * y as f64;
        }
    }
    let mut rel = EmbeddingTable::zeros(PLANTED_STEPS.len(), spec.dim);
    for (r, &(_, (dx, dy))) in PLANTED_STEPS.iter().enumerate() {
        rel.row_mut(r)[0] = spec.spacing * dx as f64;
        rel.row_mut(r)[1] = spec.spacing * dy as f64;
    }
    let entities = WordVectors::new(wordnet.vocab.clone(), ent)?;
    Ok(PlantedKb {
        edges,
        members,
        wordnet,
        tuples,
        entities,
        relations: rel,
    })
}

/// Writes `members.tsv`, `hypernyms.tsv` (empty) and the three tuple splits.
pub fn write_planted_files(dir: &Path, kb: &PlantedKb) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_pairs(&dir.join("members.tsv"), &kb.members)?;
    write_pairs(&dir.join("hypernyms.tsv"), &kb.edges)?;
    let g = &kb.wordnet.graph;
    let fmt = |t: &RelationTuple, labelled: bool| {
        let base = format!(
            "{}\t{}\t{}",
            g.name(t.left),
            kb.tuples.relations[t.relation],
            g.name(t.right)
        );
        if labelled {
            format!("{base}\t{}", if t.label { "1" } else { "-1" })
        } else {
            base
        }
    };
    write_lines(&dir.join("train.tsv"), kb.tuples.train.iter().map(|t| fmt(t, false)))?;
    write_lines(&dir.join("dev.tsv"), kb.tuples.dev.iter().map(|t| fmt(t, true)))?;
    write_lines(&dir.join("test.tsv"), kb.tuples.test.iter().map(|t| fmt(t, true)))
}

/// Analogy categories over constructed vectors. Category `c` has the
/// direction `2 * e_c`; its examples follow that direction up to noise below
/// `noise`, and test pair `k` has offset `2 (cos t_k e_c + sin t_k e_{c+1})`
/// with gold score `cos t_k`. MaxDiff questions take four test pairs and
/// mark the best and worst aligned.
pub fn planted_analogies(
    categories: usize,
    tests_per_category: usize,
    noise: f64,
    seed: u64,
) -> Result<(WordVectors, Vec<AnalogyCategory>)> {
    let dim = categories + 1;
    let mut rng = from_seed(seed);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let mut words = vec![crate::corpus::RARE.to_string()];
    let mut rows = vec![vec![0.0; dim]];
    let mut add = |name: String, v: Vec<f64>| {
        words.push(name);
        rows.push(v);
    };
    let small = |rng: &mut Rng| -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| jitter.sample(rng)).collect();
        let n = crate::embedding::norm(&v).max(f64::MIN_POSITIVE);
        // Strictly inside the noise radius.
        v.into_iter().map(|x| 0.5 * noise * x / n).collect()
    };

    let mut cats = Vec::with_capacity(categories);
    for c in 0..categories {
        let mut cat = AnalogyCategory {
            name: format!("cat{c}"),
            examples: Vec::new(),
            tests: Vec::new(),
            maxdiff: Vec::new(),
        };
        for k in 0..3 {
            let base: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut tip = base.clone();
            tip[c] += 2.0;
            for (t, n) in tip.iter_mut().zip(small(&mut rng)) {
                *t += n;
            }
            let (a, b) = (format!("c{c}x{k}a"), format!("c{c}x{k}b"));
            add(a.clone(), base);
            add(b.clone(), tip);
            cat.examples.push((a, b));
        }
        for k in 0..tests_per_category {
            let theta = std::f64::consts::PI * k as f64 / tests_per_category as f64;
            let base: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut tip = base.clone();
            tip[c] += 2.0 * theta.cos();
            tip[c + 1] += 2.0 * theta.sin();
            let (a, b) = (format!("c{c}t{k}a"), format!("c{c}t{k}b"));
            add(a.clone(), base);
            add(b.clone(), tip);
            cat.tests.push((a, b, theta.cos()));
        }
        let n = cat.tests.len();
        for q in 0..n / 4 {
            let picks: Vec<usize> = (0..4).map(|j| (q + j * (n / 4)) % n).collect();
            let gold: Vec<f64> = picks.iter().map(|&i| cat.tests[i].2).collect();
            let argmax = (0..4).fold(0, |b, i| if gold[i] > gold[b] { i } else { b });
            let argmin = (0..4).fold(0, |b, i| if gold[i] < gold[b] { i } else { b });
            cat.maxdiff.push(MaxDiffQuestion {
                pairs: picks
                    .iter()
                    .map(|&i| (cat.tests[i].0.clone(), cat.tests[i].1.clone()))
                    .collect(),
                most: argmax,
                least: argmin,
            });
        }
        cats.push(cat);
    }
    let table = EmbeddingTable::from_rows(dim, &rows)?;
    let vectors = WordVectors::new(crate::corpus::Vocabulary::from_words(words), table)?;
    Ok((vectors, cats))
}

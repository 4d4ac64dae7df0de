//! Synset hypernym graph, word <-> synset membership and relation tuples.
//!
//! Hypernym edges are stored undirected. Every synset without a parent is
//! attached to an artificial root so that the graph is connected; depths are
//! BFS distances from that root.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng as _;

use crate::corpus::{draw_other, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub type SynsetId = usize;
pub type RelationId = usize;

pub const ROOT_SYNSET: &str = "__root__";

#[derive(Debug, Clone)]
pub struct SynsetGraph {
    names: Vec<String>,
    index: HashMap<String, SynsetId>,
    adjacency: Vec<Vec<SynsetId>>,
    root: SynsetId,
    depth: Vec<u32>,
    max_depth: u32,
    /// Row-major all-pairs edge distances, present only when enabled.
    distances: Option<Vec<u32>>,
}

impl SynsetGraph {
    /// `edges` are `(child, parent)` pairs; `extra` names synsets that may
    /// have no edges at all (e.g. ones only seen in the membership file).
    pub fn new<'a, E, X>(edges: E, extra: X) -> Self
    where
        E: IntoIterator<Item = (&'a str, &'a str)>,
        X: IntoIterator<Item = &'a str>,
    {
        let mut names = vec![ROOT_SYNSET.to_string()];
        let mut index: HashMap<String, SynsetId> = HashMap::new();
        index.insert(ROOT_SYNSET.to_string(), 0);
        let mut intern = |name: &str, names: &mut Vec<String>| -> SynsetId {
            if let Some(&id) = index.get(name) {
                return id;
            }
            let id = names.len();
            names.push(name.to_string());
            index.insert(name.to_string(), id);
            id
        };

        let mut pairs = Vec::new();
        for (child, parent) in edges {
            let c = intern(child, &mut names);
            let p = intern(parent, &mut names);
            pairs.push((c, p));
        }
        for name in extra {
            intern(name, &mut names);
        }

        let n = names.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut has_parent = vec![false; n];
        for (c, p) in pairs {
            if c == p {
                continue;
            }
            has_parent[c] = true;
            adjacency[c].push(p);
            adjacency[p].push(c);
        }
        let root = 0;
        for s in 1..n {
            if !has_parent[s] {
                adjacency[root].push(s);
                adjacency[s].push(root);
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }

        // Hypernym cycles can leave a component with no parentless node.
        let mut depth = bfs_all(&adjacency, root);
        for s in 0..n {
            if depth[s] == u32::MAX {
                adjacency[root].push(s);
                adjacency[s].push(root);
                depth = bfs_all(&adjacency, root);
            }
        }
        let max_depth = depth.iter().copied().max().unwrap_or(0);

        SynsetGraph {
            names,
            index,
            adjacency,
            root,
            depth,
            max_depth,
            distances: None,
        }
    }

    /// Reads `child<TAB>parent` lines.
    pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>> {
        read_pairs(path, "child<TAB>parent")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn root(&self) -> SynsetId {
        self.root
    }

    pub fn name(&self, s: SynsetId) -> &str {
        &self.names[s]
    }

    pub fn id(&self, name: &str) -> Option<SynsetId> {
        self.index.get(name).copied()
    }

    pub fn depth(&self, s: SynsetId) -> u32 {
        self.depth[s]
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn neighbors(&self, s: SynsetId) -> &[SynsetId] {
        &self.adjacency[s]
    }

    /// Precomputes all-pairs distances (one BFS per synset). Must be called
    /// before the graph is shared across threads.
    pub fn enable_distance_cache(&mut self) {
        let n = self.len();
        let mut d = Vec::with_capacity(n * n);
        for s in 0..n {
            d.extend(bfs_all(&self.adjacency, s));
        }
        self.distances = Some(d);
    }

    fn check(&self, s: SynsetId) -> Result<()> {
        if s < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownSynset(format!("#{s}")))
        }
    }

    /// Fewest edges between any source and any target.
    fn min_edges(&self, sources: &[SynsetId], targets: &[SynsetId]) -> u32 {
        if let Some(d) = &self.distances {
            let n = self.len();
            return sources
                .iter()
                .flat_map(|&s| targets.iter().map(move |&t| d[s * n + t]))
                .min()
                .unwrap_or(u32::MAX);
        }
        let n = self.len();
        let mut is_target = vec![false; n];
        for &t in targets {
            is_target[t] = true;
        }
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if is_target[s] {
                return 0;
            }
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    if is_target[v] {
                        return dist[v];
                    }
                    queue.push_back(v);
                }
            }
        }
        u32::MAX
    }

    /// Number of nodes on the shortest undirected path, so a synset is at
    /// length 1 from itself.
    pub fn shortest_path_len(&self, a: SynsetId, b: SynsetId) -> Result<u32> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.min_edges(&[a], &[b]) + 1)
    }

    fn lch(&self, len: u32) -> Result<f64> {
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig(
                "synset graph has no synsets below the root".into(),
            ));
        }
        Ok(-(f64::from(len) / (2.0 * f64::from(self.max_depth))).ln())
    }

    /// Leacock-Chodorow similarity, natural log.
    pub fn synset_similarity(&self, a: SynsetId, b: SynsetId) -> Result<f64> {
        let len = self.shortest_path_len(a, b)?;
        self.lch(len)
    }
}

fn bfs_all(adjacency: &[Vec<SynsetId>], source: SynsetId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adjacency.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn read_pairs(path: &Path, shape: &str) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n + 1, format!("expected `{shape}`")))?;
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(out)
}

/// Word <-> synset membership, restricted to one vocabulary.
#[derive(Debug, Clone)]
pub struct WordSynsetMap {
    syn: Vec<Vec<SynsetId>>,
    members: Vec<Vec<WordId>>,
}

impl WordSynsetMap {
    /// `pairs` are `(synset, word)`; words are lowercased and words missing
    /// from `vocab` are dropped.
    pub fn new<'a, I>(graph: &SynsetGraph, vocab: &Vocabulary, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut syn = vec![Vec::new(); vocab.len()];
        let mut members = vec![Vec::new(); graph.len()];
        for (synset, word) in pairs {
            let s = graph
                .id(synset)
                .ok_or_else(|| Error::UnknownSynset(synset.to_string()))?;
            let Some(w) = vocab.get(&word.to_lowercase()) else {
                continue;
            };
            if w == vocab.rare_id() {
                continue;
            }
            syn[w].push(s);
            members[s].push(w);
        }
        for v in syn.iter_mut().chain(members.iter_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        Ok(WordSynsetMap { syn, members })
    }

    pub fn synsets(&self, w: WordId) -> &[SynsetId] {
        self.syn.get(w).map_or(&[], Vec::as_slice)
    }

    pub fn members(&self, s: SynsetId) -> &[WordId] {
        self.members.get(s).map_or(&[], Vec::as_slice)
    }

    /// Words with at least one synset, in id order.
    pub fn words_with_synsets(&self) -> Vec<WordId> {
        (0..self.syn.len()).filter(|&w| !self.syn[w].is_empty()).collect()
    }
}

/// Max synset similarity over both words' synsets; `None` when either word
/// has no synset.
pub fn word_similarity(g: &SynsetGraph, map: &WordSynsetMap, i: WordId, j: WordId) -> Result<Option<f64>> {
    let (si, sj) = (map.synsets(i), map.synsets(j));
    if si.is_empty() || sj.is_empty() {
        return Ok(None);
    }
    // SynSim decreases with path length, so the max over pairs is attained at
    // the shortest path between the two synset sets.
    let len = g.min_edges(si, sj) + 1;
    g.lch(len).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordPair {
    pub i: WordId,
    pub j: WordId,
    pub sim: f64,
}

/// Samples `n_words` words with replacement among those with synsets, then
/// `max_neighbors` partners for each (also with replacement, self allowed).
pub fn sample_word_pairs(
    map: &WordSynsetMap,
    g: &SynsetGraph,
    n_words: usize,
    max_neighbors: usize,
    rng: &mut Rng,
) -> Result<Vec<WordPair>> {
    if n_words == 0 || max_neighbors == 0 {
        return Ok(Vec::new());
    }
    let candidates = map.words_with_synsets();
    if candidates.is_empty() {
        return Err(Error::NoTrainingData("no vocabulary word belongs to a synset".into()));
    }
    let mut pairs = Vec::with_capacity(n_words * max_neighbors);
    for _ in 0..n_words {
        let i = candidates[rng.random_range(0..candidates.len())];
        for _ in 0..max_neighbors {
            let j = candidates[rng.random_range(0..candidates.len())];
            let sim = word_similarity(g, map, i, j)?.expect("both words were drawn from words with synsets");
            pairs.push(WordPair { i, j, sim });
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationTuple {
    pub left: SynsetId,
    pub relation: RelationId,
    pub right: SynsetId,
    /// Always true for training tuples.
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WordTuple {
    pub left: WordId,
    pub relation: RelationId,
    pub right: WordId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Default)]
pub struct RelationTupleSet {
    pub relations: Vec<String>,
    pub train: Vec<RelationTuple>,
    pub dev: Vec<RelationTuple>,
    pub test: Vec<RelationTuple>,
}

impl RelationTupleSet {
    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.iter().position(|r| r == name)
    }

    /// Registers the relation if unseen.
    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        self.relation_id(name).unwrap_or_else(|| {
            self.relations.push(name.to_string());
            self.relations.len() - 1
        })
    }

    pub fn split(&self, split: Split) -> &[RelationTuple] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Reads `left<TAB>relation<TAB>right[<TAB>label]`. Labels (1 / -1) are
    /// required on dev and test.
    pub fn read_split(&mut self, path: &Path, split: Split, graph: &SynsetGraph) -> Result<()> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() < 3 || fields.len() > 4 {
                return Err(Error::parse(
                    path,
                    n + 1,
                    "expected `left<TAB>relation<TAB>right[<TAB>label]`",
                ));
            }
            let syn = |name: &str| {
                graph
                    .id(name)
                    .ok_or_else(|| Error::parse(path, n + 1, format!("unknown synset `{name}`")))
            };
            let left = syn(fields[0])?;
            let right = syn(fields[2])?;
            let label = match fields.get(3) {
                Some(&"1") | Some(&"+1") => true,
                Some(&"-1") => false,
                Some(other) => {
                    return Err(Error::parse(
                        path,
                        n + 1,
                        format!("label must be 1 or -1, got `{other}`"),
                    ))
                }
                None if split == Split::Train => true,
                None => return Err(Error::parse(path, n + 1, "dev/test tuples need a label")),
            };
            let relation = self.intern_relation(fields[1]);
            out.push(RelationTuple {
                left,
                relation,
                right,
                label,
            });
        }
        match split {
            Split::Train => self.train.extend(out),
            Split::Dev => self.dev.extend(out),
            Split::Test => self.test.extend(out),
        }
        Ok(())
    }
}

/// Picks one in-vocabulary member word for each synset of the tuple, or
/// `None` when either synset has none.
pub fn word_tuple(t: &RelationTuple, map: &WordSynsetMap, rng: &mut Rng) -> Option<WordTuple> {
    let l = map.members(t.left);
    let r = map.members(t.right);
    if l.is_empty() || r.is_empty() {
        return None;
    }
    Some(WordTuple {
        left: l[rng.random_range(0..l.len())],
        relation: t.relation,
        right: r[rng.random_range(0..r.len())],
    })
}

/// Re-draws exactly one slot. Slots whose domain holds a single value are
/// never chosen.
pub fn corrupt_word_tuple(
    t: &WordTuple,
    n_relations: usize,
    entity_words: &[WordId],
    rng: &mut Rng,
) -> Result<WordTuple> {
    let words_ok = entity_words.len() >= 2;
    let rel_ok = n_relations >= 2;
    let slots: &[u8] = match (words_ok, rel_ok) {
        (true, true) => &[0, 1, 2],
        (true, false) => &[0, 2],
        (false, true) => &[1],
        (false, false) => return Err(Error::CannotCorrupt("need two entity words or two relations".into())),
    };
    let redraw_word = |w: WordId, rng: &mut Rng| match entity_words.binary_search(&w) {
        Ok(pos) => entity_words[draw_other(entity_words.len(), pos, rng)],
        Err(_) => entity_words[rng.random_range(0..entity_words.len())],
    };
    let mut out = *t;
    match slots[rng.random_range(0..slots.len())] {
        0 => out.left = redraw_word(t.left, rng),
        1 => out.relation = draw_other(n_relations, t.relation, rng),
        _ => out.right = redraw_word(t.right, rng),
    }
    Ok(out)
}

/// One training instance: a word-level tuple and its corruption, drawn from
/// a random usable training tuple.
pub fn sample_relation_tuple(
    tuples: &RelationTupleSet,
    map: &WordSynsetMap,
    rng: &mut Rng,
) -> Result<(WordTuple, WordTuple)> {
    let usable: Vec<&RelationTuple> = tuples
        .train
        .iter()
        .filter(|t| !map.members(t.left).is_empty() && !map.members(t.right).is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::NoTrainingData(
            "no training tuple has in-vocabulary words on both sides".into(),
        ));
    }
    let t = usable[rng.random_range(0..usable.len())];
    let wt = word_tuple(t, map, rng).expect("filtered to usable tuples");
    let entities = map.words_with_synsets();
    let corrupted = corrupt_word_tuple(&wt, tuples.relations.len(), &entities, rng)?;
    Ok((wt, corrupted))
}

/// Everything loaded from the WordNet-side files.
#[derive(Debug, Clone)]
pub struct WordNet {
    pub vocab: Vocabulary,
    pub graph: SynsetGraph,
    pub map: WordSynsetMap,
}

impl WordNet {
    /// The relational vocabulary is every member word, ranked by the number
    /// of synsets it belongs to and capped at `max_vocab`.
    pub fn from_parts(edges: &[(String, String)], membership: &[(String, String)], max_vocab: usize) -> Result<Self> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (_, w) in membership {
            *counts.entry(w.to_lowercase()).or_default() += 1;
        }
        let vocab = Vocabulary::from_counts(counts, max_vocab);
        let graph = SynsetGraph::new(
            edges.iter().map(|(c, p)| (c.as_str(), p.as_str())),
            membership.iter().map(|(s, _)| s.as_str()),
        );
        let map = WordSynsetMap::new(&graph, &vocab, membership.iter().map(|(s, w)| (s.as_str(), w.as_str())))?;
        Ok(WordNet { vocab, graph, map })
    }

    pub fn load(hypernyms: &Path, members: &Path, max_vocab: usize) -> Result<Self> {
        let edges = SynsetGraph::read_edges(hypernyms)?;
        let membership = read_pairs(members, "synset<TAB>word")?;
        Self::from_parts(&edges, &membership, max_vocab)
    }

    pub fn entity_words(&self) -> Vec<WordId> {
        self.map.words_with_synsets()
    }
}

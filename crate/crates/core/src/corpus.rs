//! Vocabulary construction and the n-gram source for the distributional
//! objective.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub type WordId = usize;

/// Token standing in for every word outside the vocabulary. Corpus words are
/// lowercased, so this spelling can never collide with a real word.
pub const RARE: &str = "RARE";

/// Word <-> id mapping. The RARE token always has id 0; the remaining ids
/// follow descending frequency with lexicographic tie breaking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent words. Words that do not make the
    /// cut contribute their counts to RARE.
    pub fn from_counts(counts: HashMap<String, u64>, max_size: usize) -> Self {
        let mut ranked: Vec<(String, u64)> = counts.into_iter().filter(|(w, _)| w != RARE).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let excluded: u64 = ranked.iter().skip(max_size).map(|(_, c)| c).sum();
        ranked.truncate(max_size);

        let mut words = Vec::with_capacity(ranked.len() + 1);
        let mut freq = Vec::with_capacity(ranked.len() + 1);
        words.push(RARE.to_string());
        freq.push(excluded);
        for (w, c) in ranked {
            words.push(w);
            freq.push(c);
        }
        Self::from_parts(words, freq)
    }

    /// Rebuilds a vocabulary from an id-ordered word list (e.g. a checkpoint).
    /// RARE is inserted at id 0 when the list lacks it.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<String> = words.into_iter().map(Into::into).collect();
        if !list.iter().any(|w| w == RARE) {
            list.insert(0, RARE.to_string());
        }
        let counts = vec![0; list.len()];
        Self::from_parts(list, counts)
    }

    fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index, counts }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn rare_id(&self) -> WordId {
        self.index[RARE]
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id]
    }

    /// Exact lookup, no case folding.
    pub fn get(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    /// Lowercases `word` and falls back to RARE.
    pub fn lookup(&self, word: &str) -> WordId {
        let lower = word.to_lowercase();
        self.get(&lower).unwrap_or_else(|| self.rare_id())
    }

    /// `word<TAB>count` lines ordered by id.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, n + 1, "expected `word<TAB>count`"))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("bad count `{c}`")))?;
            words.push(w.to_string());
            counts.push(c);
        }
        if !words.iter().any(|w| w == RARE) {
            words.insert(0, RARE.to_string());
            counts.insert(0, 0);
        }
        Ok(Self::from_parts(words, counts))
    }
}

/// Counts lowercased tokens and keeps the top `max_size`.
pub fn build_vocabulary<I, S>(tokens: I, max_size: usize) -> Vocabulary
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for tok in tokens {
        *counts.entry(tok.as_ref().to_lowercase()).or_default() += 1;
    }
    Vocabulary::from_counts(counts, max_size)
}

/// Distinct n-grams (already mapped to vocabulary ids) with their token
/// counts. Sampling is weighted by count.
#[derive(Debug, Clone)]
pub struct NgramCorpus {
    order: usize,
    ids: Vec<WordId>,
    counts: Vec<u64>,
    cumulative: Vec<u64>,
}

impl NgramCorpus {
    /// Builds the source from counted n-grams. Tuples that collapse onto the
    /// same ids after RARE mapping are merged.
    pub fn from_counted<I>(order: usize, ngrams: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<WordId>, u64)>,
    {
        if order == 0 {
            return Err(Error::InvalidConfig("n-gram order must be at least 1".into()));
        }
        let mut merged: BTreeMap<Vec<WordId>, u64> = BTreeMap::new();
        for (gram, count) in ngrams {
            if gram.len() != order {
                return Err(Error::DimensionMismatch {
                    expected: order,
                    found: gram.len(),
                });
            }
            if count > 0 {
                *merged.entry(gram).or_default() += count;
            }
        }
        let mut ids = Vec::with_capacity(merged.len() * order);
        let mut counts = Vec::with_capacity(merged.len());
        let mut cumulative = Vec::with_capacity(merged.len());
        let mut total = 0u64;
        for (gram, count) in merged {
            ids.extend(gram);
            counts.push(count);
            total += count;
            cumulative.push(total);
        }
        Ok(NgramCorpus {
            order,
            ids,
            counts,
            cumulative,
        })
    }

    /// Sliding-window n-grams over whitespace-tokenized sentences. Sentences
    /// shorter than `order` contribute nothing.
    pub fn from_sentences<I, S>(order: usize, sentences: I, vocab: &Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut grams: Vec<(Vec<WordId>, u64)> = Vec::new();
        for sentence in sentences {
            let ids: Vec<WordId> = sentence.as_ref().split_whitespace().map(|w| vocab.lookup(w)).collect();
            for window in ids.windows(order) {
                grams.push((window.to_vec(), 1));
            }
        }
        Self::from_counted(order, grams)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of distinct n-grams.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn ngram(&self, i: usize) -> &[WordId] {
        &self.ids[i * self.order..(i + 1) * self.order]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    fn draw(&self, rng: &mut Rng) -> usize {
        let target = rng.random_range(0..self.total_count());
        self.cumulative.partition_point(|&c| c <= target)
    }
}

/// A sampled batch of n-grams, stored flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramBlock {
    order: usize,
    ids: Vec<WordId>,
}

impl NgramBlock {
    pub fn new(order: usize, ngrams: &[Vec<WordId>]) -> Result<Self> {
        let mut ids = Vec::with_capacity(order * ngrams.len());
        for g in ngrams {
            if g.len() != order {
                return Err(Error::DimensionMismatch {
                    expected: order,
                    found: g.len(),
                });
            }
            ids.extend_from_slice(g);
        }
        Ok(NgramBlock { order, ids })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.ids.len().checked_div(self.order).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[WordId]> {
        self.ids.chunks_exact(self.order.max(1))
    }
}

/// Draws `block_size` n-grams with replacement, weighted by token count.
pub fn sample_ngram_block(corpus: &NgramCorpus, block_size: usize, rng: &mut Rng) -> Result<NgramBlock> {
    if corpus.is_empty() {
        return Err(Error::NoTrainingData("n-gram corpus is empty".into()));
    }
    if block_size == 0 {
        return Err(Error::InvalidConfig("block size must be at least 1".into()));
    }
    let mut ids = Vec::with_capacity(block_size * corpus.order);
    for _ in 0..block_size {
        ids.extend_from_slice(corpus.ngram(corpus.draw(rng)));
    }
    Ok(NgramBlock {
        order: corpus.order,
        ids,
    })
}

/// Which slot of an n-gram receives the noise word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorruptPosition {
    #[default]
    Middle,
    Random,
}

impl FromStr for CorruptPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "middle" => Ok(CorruptPosition::Middle),
            "random" => Ok(CorruptPosition::Random),
            other => Err(Error::InvalidConfig(format!(
                "corrupt position must be `middle` or `random`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for CorruptPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorruptPosition::Middle => "middle",
            CorruptPosition::Random => "random",
        })
    }
}

/// Draws uniformly from `0..n` excluding `skip`. Equivalent in distribution
/// to redrawing until the value differs, without the unbounded loop.
pub(crate) fn draw_other(n: usize, skip: usize, rng: &mut Rng) -> usize {
    debug_assert!(n >= 2 && skip < n);
    let x = rng.random_range(0..n - 1);
    if x >= skip {
        x + 1
    } else {
        x
    }
}

/// Replaces one word of `ngram` by a different, uniformly drawn vocabulary
/// word.
pub fn corrupt_ngram(
    ngram: &[WordId],
    vocab: &Vocabulary,
    position: CorruptPosition,
    rng: &mut Rng,
) -> Result<Vec<WordId>> {
    if ngram.is_empty() {
        return Err(Error::CannotCorrupt("empty n-gram".into()));
    }
    if vocab.len() < 2 {
        return Err(Error::CannotCorrupt("vocabulary holds a single word".into()));
    }
    let pos = match position {
        CorruptPosition::Middle => ngram.len() / 2,
        CorruptPosition::Random => rng.random_range(0..ngram.len()),
    };
    let mut out = ngram.to_vec();
    out[pos] = draw_other(vocab.len(), ngram[pos], rng);
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Raw text, one sentence per line.
pub fn load_text(path: &Path, order: usize, max_vocab: usize) -> Result<(Vocabulary, NgramCorpus)> {
    let lines = read_lines(path)?;
    let vocab = build_vocabulary(lines.iter().flat_map(|l| l.split_whitespace()), max_vocab);
    let corpus = NgramCorpus::from_sentences(order, &lines, &vocab)?;
    Ok((vocab, corpus))
}

/// Web-1T style counts: `count<TAB>w1 w2 ... wn`. The order is taken from
/// the first line; every later line must match it. Vocabulary counts are
/// word occurrences weighted by n-gram count.
pub fn load_counted(path: &Path, max_vocab: usize) -> Result<(Vocabulary, NgramCorpus)> {
    let lines = read_lines(path)?;
    let mut parsed: Vec<(Vec<String>, u64)> = Vec::with_capacity(lines.len());
    let mut order = None;
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (count, gram) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n + 1, "expected `count<TAB>ngram`"))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("bad count `{count}`")))?;
        let words: Vec<String> = gram.split_whitespace().map(str::to_lowercase).collect();
        match order {
            None => order = Some(words.len()),
            Some(o) if o != words.len() => {
                return Err(Error::parse(
                    path,
                    n + 1,
                    format!("n-gram of length {} in a file of {o}-grams", words.len()),
                ))
            }
            _ => {}
        }
        parsed.push((words, count));
    }
    let order = order.ok_or_else(|| Error::NoTrainingData(format!("{} holds no n-grams", path.display())))?;

    let mut counts: HashMap<String, u64> = HashMap::new();
    for (words, c) in &parsed {
        for w in words {
            *counts.entry(w.clone()).or_default() += c;
        }
    }
    let vocab = Vocabulary::from_counts(counts, max_vocab);
    let corpus = NgramCorpus::from_counted(
        order,
        parsed
            .into_iter()
            .map(|(words, c)| (words.iter().map(|w| vocab.lookup(w)).collect(), c)),
    )?;
    Ok((vocab, corpus))
}

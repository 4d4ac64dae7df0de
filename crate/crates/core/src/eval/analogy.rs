//! Relational similarity: word pairs are compared through the cosine of
//! their offset vectors `w2 - w1`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::Aggregate;
use crate::embedding::{cosine, WordVectors};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaxDiffQuestion {
    pub pairs: Vec<(String, String)>,
    pub most: usize,
    pub least: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyCategory {
    pub name: String,
    pub examples: Vec<(String, String)>,
    pub tests: Vec<(String, String, f64)>,
    pub maxdiff: Vec<MaxDiffQuestion>,
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Examples,
    Tests,
    MaxDiff,
}

/// Parses a category file:
///
/// ```text
/// #examples
/// word1<TAB>word2
/// #tests
/// word1<TAB>word2<TAB>gold
/// #maxdiff
/// word1<TAB>word2<TAB>most|least|-
/// ...             (questions separated by blank lines)
/// ```
///
/// The category name is the file stem.
pub fn read_category(path: &Path) -> Result<AnalogyCategory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_category(&name, &text, path)
}

fn parse_category(name: &str, text: &str, path: &Path) -> Result<AnalogyCategory> {
    let mut cat = AnalogyCategory {
        name: name.to_string(),
        examples: Vec::new(),
        tests: Vec::new(),
        maxdiff: Vec::new(),
    };
    let mut section = Section::None;
    let mut block: Vec<(String, String, Option<bool>)> = Vec::new();
    let mut block_start = 0;

    let finish = |block: &mut Vec<(String, String, Option<bool>)>, line: usize, cat: &mut AnalogyCategory| {
        if block.is_empty() {
            return Ok(());
        }
        let most: Vec<usize> = (0..block.len()).filter(|&i| block[i].2 == Some(true)).collect();
        let least: Vec<usize> = (0..block.len()).filter(|&i| block[i].2 == Some(false)).collect();
        if block.len() < 2 || most.len() != 1 || least.len() != 1 {
            return Err(Error::parse(
                path,
                line,
                "a MaxDiff question needs two or more pairs with exactly one `most` and one `least`",
            ));
        }
        cat.maxdiff.push(MaxDiffQuestion {
            pairs: block.drain(..).map(|(a, b, _)| (a, b)).collect(),
            most: most[0],
            least: least[0],
        });
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            if section == Section::MaxDiff {
                finish(&mut block, block_start, &mut cat)?;
            }
            continue;
        }
        if let Some(tag) = line.strip_prefix('#') {
            if section == Section::MaxDiff {
                finish(&mut block, block_start, &mut cat)?;
            }
            section = match tag.trim() {
                "examples" => Section::Examples,
                "tests" => Section::Tests,
                "maxdiff" => Section::MaxDiff,
                other => return Err(Error::parse(path, n, format!("unknown section `#{other}`"))),
            };
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        match section {
            Section::None => return Err(Error::parse(path, n, "pair outside of a section")),
            Section::Examples => {
                if f.len() != 2 {
                    return Err(Error::parse(path, n, "example lines are `word1<TAB>word2`"));
                }
                cat.examples.push((f[0].to_string(), f[1].to_string()));
            }
            Section::Tests => {
                if f.len() != 3 {
                    return Err(Error::parse(path, n, "test lines are `word1<TAB>word2<TAB>gold`"));
                }
                let gold: f64 = f[2]
                    .parse()
                    .map_err(|_| Error::parse(path, n, format!("bad gold score `{}`", f[2])))?;
                cat.tests.push((f[0].to_string(), f[1].to_string(), gold));
            }
            Section::MaxDiff => {
                if f.len() != 3 {
                    return Err(Error::parse(
                        path,
                        n,
                        "MaxDiff lines are `word1<TAB>word2<TAB>most|least|-`",
                    ));
                }
                let mark = match f[2] {
                    "most" => Some(true),
                    "least" => Some(false),
                    "-" => None,
                    other => return Err(Error::parse(path, n, format!("bad MaxDiff mark `{other}`"))),
                };
                if block.is_empty() {
                    block_start = n;
                }
                block.push((f[0].to_string(), f[1].to_string(), mark));
            }
        }
    }
    if section == Section::MaxDiff {
        finish(&mut block, block_start, &mut cat)?;
    }
    if cat.examples.is_empty() {
        return Err(Error::parse(path, 1, "category has no example pairs"));
    }
    Ok(cat)
}

fn resolve<'a>(emb: &'a WordVectors, word: &str) -> Option<&'a [f64]> {
    emb.get(word).or_else(|| emb.get(&word.to_lowercase()))
}

/// `w2 - w1`, or `None` when either word is out of vocabulary.
fn offset(emb: &WordVectors, a: &str, b: &str) -> Option<Vec<f64>> {
    let (x, y) = (resolve(emb, a)?, resolve(emb, b)?);
    Some(y.iter().zip(x).map(|(p, q)| p - q).collect())
}

#[derive(Debug, Clone, PartialEq)]
enum PairScore {
    Oov,
    Undefined,
    Score(f64),
}

struct Scorer {
    examples: Vec<Vec<f64>>,
    aggregate: Aggregate,
}

impl Scorer {
    fn new(emb: &WordVectors, cat: &AnalogyCategory, aggregate: Aggregate) -> Self {
        let examples = cat
            .examples
            .iter()
            .filter_map(|(a, b)| offset(emb, a, b))
            .filter(|o| o.iter().any(|x| *x != 0.0))
            .collect();
        Scorer { examples, aggregate }
    }

    fn score(&self, emb: &WordVectors, a: &str, b: &str) -> PairScore {
        let Some(o) = offset(emb, a, b) else {
            return PairScore::Oov;
        };
        if self.examples.is_empty() {
            return PairScore::Undefined;
        }
        let mut sims = Vec::with_capacity(self.examples.len());
        for e in &self.examples {
            match cosine(&o, e) {
                Ok(c) => sims.push(c),
                Err(_) => return PairScore::Undefined,
            }
        }
        PairScore::Score(match self.aggregate {
            Aggregate::Mean => sims.iter().sum::<f64>() / sims.len() as f64,
            Aggregate::Max => sims.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyScores {
    /// One entry per test pair; `None` for OOV or undefined pairs.
    pub scores: Vec<Option<f64>>,
    pub oov: usize,
    pub undefined: usize,
}

/// Scores every test pair against the category's example offsets.
pub fn analogy_scores(emb: &WordVectors, cat: &AnalogyCategory, aggregate: Aggregate) -> AnalogyScores {
    let scorer = Scorer::new(emb, cat, aggregate);
    let mut out = AnalogyScores {
        scores: Vec::with_capacity(cat.tests.len()),
        oov: 0,
        undefined: 0,
    };
    for (a, b, _) in &cat.tests {
        out.scores.push(match scorer.score(emb, a, b) {
            PairScore::Score(s) => Some(s),
            PairScore::Oov => {
                out.oov += 1;
                None
            }
            PairScore::Undefined => {
                out.undefined += 1;
                None
            }
        });
    }
    out
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` for fewer
/// than two points, unequal lengths, or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaxDiffResult {
    pub questions: usize,
    /// Questions with an OOV or undefined candidate.
    pub skipped: usize,
    pub correct_most: usize,
    pub correct_least: usize,
    pub both_correct: usize,
    /// Questions where the model's top or bottom score was tied.
    pub ties: usize,
}

impl MaxDiffResult {
    fn answered(&self) -> usize {
        self.questions - self.skipped
    }

    /// Correct picks over all picks; most and least count separately.
    pub fn accuracy(&self) -> Option<f64> {
        let a = self.answered();
        (a > 0).then(|| (self.correct_most + self.correct_least) as f64 / (2 * a) as f64)
    }

    /// Fraction of questions with both picks right.
    pub fn question_accuracy(&self) -> Option<f64> {
        let a = self.answered();
        (a > 0).then(|| self.both_correct as f64 / a as f64)
    }

    pub fn merge(&mut self, other: &MaxDiffResult) {
        self.questions += other.questions;
        self.skipped += other.skipped;
        self.correct_most += other.correct_most;
        self.correct_least += other.correct_least;
        self.both_correct += other.both_correct;
        self.ties += other.ties;
    }
}

/// Picks the highest and lowest scored candidate of each question; ties go
/// to the earlier candidate.
pub fn maxdiff_accuracy(emb: &WordVectors, categories: &[AnalogyCategory], aggregate: Aggregate) -> MaxDiffResult {
    let mut res = MaxDiffResult::default();
    for cat in categories {
        let scorer = Scorer::new(emb, cat, aggregate);
        for q in &cat.maxdiff {
            res.questions += 1;
            let scores: Option<Vec<f64>> = q
                .pairs
                .iter()
                .map(|(a, b)| match scorer.score(emb, a, b) {
                    PairScore::Score(s) => Some(s),
                    _ => None,
                })
                .collect();
            let Some(scores) = scores else {
                res.skipped += 1;
                continue;
            };
            let (mut hi, mut lo) = (0, 0);
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[hi] {
                    hi = i;
                }
                if s < scores[lo] {
                    lo = i;
                }
            }
            let tied = |k: usize| scores.iter().enumerate().any(|(i, &s)| i != k && s == scores[k]);
            if tied(hi) || tied(lo) {
                res.ties += 1;
            }
            let (m, l) = (hi == q.most, lo == q.least);
            res.correct_most += usize::from(m);
            res.correct_least += usize::from(l);
            res.both_correct += usize::from(m && l);
        }
    }
    res
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryResult {
    pub name: String,
    pub tests: usize,
    pub scored: usize,
    pub oov: usize,
    pub spearman: Option<f64>,
    pub maxdiff: MaxDiffResult,
}

impl CategoryResult {
    pub fn oov_rate(&self) -> f64 {
        if self.tests == 0 {
            0.0
        } else {
            self.oov as f64 / self.tests as f64
        }
    }
}

/// Per-category Spearman correlation (over scored pairs only) and MaxDiff.
pub fn evaluate_analogies(
    emb: &WordVectors,
    categories: &[AnalogyCategory],
    aggregate: Aggregate,
) -> Vec<CategoryResult> {
    categories
        .iter()
        .map(|cat| {
            let s = analogy_scores(emb, cat, aggregate);
            let (model, gold): (Vec<f64>, Vec<f64>) = s
                .scores
                .iter()
                .zip(&cat.tests)
                .filter_map(|(m, t)| m.map(|m| (m, t.2)))
                .unzip();
            CategoryResult {
                name: cat.name.clone(),
                tests: cat.tests.len(),
                scored: model.len(),
                oov: s.oov,
                spearman: spearman(&model, &gold),
                maxdiff: maxdiff_accuracy(emb, std::slice::from_ref(cat), aggregate),
            }
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per category plus an `ALL` row: mean of the defined
/// correlations and pooled MaxDiff counts.
pub fn write_analogy_csv(path: &Path, results: &[CategoryResult]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        out,
        "category,tests,scored,oov_rate,spearman,maxdiff_questions,maxdiff_skipped,maxdiff_ties,maxdiff_accuracy,maxdiff_question_accuracy"
    )
    .map_err(io)?;
    let row = |out: &mut BufWriter<File>, name: &str, tests, scored, oov_rate: f64, rho, m: &MaxDiffResult| {
        writeln!(
            out,
            "{name},{tests},{scored},{oov_rate},{},{},{},{},{},{}",
            opt(rho),
            m.questions,
            m.skipped,
            m.ties,
            opt(m.accuracy()),
            opt(m.question_accuracy())
        )
    };
    let mut pooled = MaxDiffResult::default();
    for r in results {
        row(
            &mut out,
            &r.name,
            r.tests,
            r.scored,
            r.oov_rate(),
            r.spearman,
            &r.maxdiff,
        )
        .map_err(io)?;
        pooled.merge(&r.maxdiff);
    }
    let defined: Vec<f64> = results.iter().filter_map(|r| r.spearman).collect();
    let mean_rho = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let tests: usize = results.iter().map(|r| r.tests).sum();
    let scored: usize = results.iter().map(|r| r.scored).sum();
    let oov: usize = results.iter().map(|r| r.oov).sum();
    let oov_rate = if tests == 0 { 0.0 } else { oov as f64 / tests as f64 };
    row(&mut out, "ALL", tests, scored, oov_rate, mean_rho, &pooled).map_err(io)?;
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::embedding::EmbeddingTable;

    fn emb(words: &[&str], rows: &[Vec<f64>]) -> WordVectors {
        WordVectors::new(
            Vocabulary::from_words(words.iter().copied()),
            EmbeddingTable::from_rows(rows[0].len(), rows).unwrap(),
        )
        .unwrap()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(spearman(&[1.0], &[1.0]), None);
    }

    #[test]
    fn spearman_ties_use_average_ranks() {
        // ranks x: 1.5 1.5 3, y: 1 2 3
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn offsets_and_orthogonality() {
        let e = emb(
            &["RARE", "a", "b", "c", "d"],
            &[
                vec![0.0, 0.0],
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 0.0],
                vec![0.0, 1.0],
            ],
        );
        let cat = AnalogyCategory {
            name: "x".into(),
            examples: vec![pair("c", "d")],
            tests: vec![
                ("a".into(), "b".into(), 1.0),
                ("c".into(), "d".into(), 2.0),
                ("a".into(), "zz".into(), 0.0),
            ],
            maxdiff: vec![],
        };
        let s = analogy_scores(&e, &cat, Aggregate::Mean);
        assert_eq!(s.scores[0], Some(0.0));
        assert_eq!(s.scores[1], Some(1.0));
        assert_eq!(s.scores[2], None);
        assert_eq!(s.oov, 1);
    }

    #[test]
    fn zero_offset_is_undefined() {
        let e = emb(&["RARE", "a", "b"], &[vec![0.0], vec![1.0], vec![2.0]]);
        let cat = AnalogyCategory {
            name: "x".into(),
            examples: vec![pair("a", "b")],
            tests: vec![("a".into(), "a".into(), 1.0)],
            maxdiff: vec![],
        };
        let s = analogy_scores(&e, &cat, Aggregate::Max);
        assert_eq!(s.scores, vec![None]);
        assert_eq!(s.undefined, 1);
    }

    #[test]
    fn parse_and_maxdiff() {
        let text = "#examples\na\tb\n#tests\na\tb\t3.5\n#maxdiff\na\tb\tmost\nc\td\t-\nb\ta\tleast\n\nc\td\tleast\na\tb\tmost\n";
        let cat = parse_category("cat1", text, Path::new("cat1.txt")).unwrap();
        assert_eq!(cat.examples, vec![pair("a", "b")]);
        assert_eq!(cat.tests.len(), 1);
        assert_eq!(cat.maxdiff.len(), 2);
        assert_eq!((cat.maxdiff[0].most, cat.maxdiff[0].least), (0, 2));

        let e = emb(
            &["RARE", "a", "b", "c", "d"],
            &[
                vec![0.0, 0.0],
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 0.0],
                vec![0.0, 1.0],
            ],
        );
        let m = maxdiff_accuracy(&e, &[cat], Aggregate::Mean);
        assert_eq!(m.questions, 2);
        assert_eq!(m.accuracy(), Some(1.0));
        assert_eq!(m.question_accuracy(), Some(1.0));
    }

    #[test]
    fn bad_maxdiff_block_is_rejected() {
        let text = "#examples\na\tb\n#maxdiff\na\tb\tmost\nc\td\tmost\n";
        assert!(matches!(
            parse_category("x", text, Path::new("x")),
            Err(Error::Parse { line: 4, .. })
        ));
    }
}

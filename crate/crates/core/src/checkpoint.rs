//! On-disk formats: word2vec-style text vector files, a sectioned text format
//! for objective parameters, and checkpoint directories that combine them.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::admm::{AdmmCoupling, DistributionalState, RelationalModel, RelationalState, TrainState};
use crate::config::{Objective, Relational, RunConfig};
use crate::corpus::{Vocabulary, RARE};
use crate::embedding::{EmbeddingTable, WordVectors};
use crate::error::{Error, Result};
use crate::graphdist::GdParams;
use crate::kb::{KbModel, NtnParams, NtnRelation, TransEParams};
use crate::nlm::NlmParams;

/// Writes `N d` followed by `word v1 ... vd` lines.
pub fn write_vectors<S: AsRef<str>>(path: &Path, words: &[S], table: &EmbeddingTable) -> Result<()> {
    if words.len() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            found: words.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{} {}", table.len(), table.dim()).map_err(io)?;
    for (w, row) in words.iter().zip(table.rows()) {
        let w = w.as_ref();
        if w.is_empty() || w.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "word `{w}` cannot be stored in a vector file"
            )));
        }
        write!(out, "{w}").map_err(io)?;
        for x in row {
            write!(out, " {x:e}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_vectors(path: &Path) -> Result<(Vec<String>, EmbeddingTable)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (n, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(path, 1, "missing `N d` header"));
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(path, i + 1, "header must be `N d`");
        if f.len() != 2 {
            return Err(bad());
        }
        let n: usize = f[0].parse().map_err(|_| bad())?;
        let d: usize = f[1].parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::parse(path, i + 1, "dimension must be positive"));
        }
        break (n, d);
    };

    let mut words = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    let mut last = 1;
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        last = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == n {
            return Err(Error::parse(path, i + 1, format!("more than {n} vectors")));
        }
        let mut f = line.split_whitespace();
        let word = f.next().expect("line is not blank");
        let values: Vec<&str> = f.collect();
        if values.len() != dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {dim} values for `{word}`, found {}", values.len()),
            ));
        }
        for v in values {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad number `{v}`")))?;
            data.push(x);
        }
        if !seen.insert(word.to_string()) {
            return Err(Error::parse(path, i + 1, format!("duplicate word `{word}`")));
        }
        words.push(word.to_string());
    }
    if words.len() != n {
        return Err(Error::parse(
            path,
            last,
            format!("header promises {n} vectors, found {}", words.len()),
        ));
    }
    let rows: Vec<Vec<f64>> = data.chunks(dim).map(<[f64]>::to_vec).collect();
    Ok((words, EmbeddingTable::from_rows(dim, &rows)?))
}

pub fn write_embedding_checkpoint(path: &Path, vectors: &WordVectors) -> Result<()> {
    write_vectors(path, vectors.vocab.words(), &vectors.table)
}

/// Reads a vector file as a vocabulary plus table. Files without a RARE
/// entry get a zero vector for it at id 0.
pub fn read_embedding_checkpoint(path: &Path) -> Result<WordVectors> {
    let (mut words, table) = read_vectors(path)?;
    let table = if words.iter().any(|w| w == RARE) {
        table
    } else {
        words.insert(0, RARE.to_string());
        let mut rows = vec![vec![0.0; table.dim()]];
        rows.extend(table.rows().map(<[f64]>::to_vec));
        EmbeddingTable::from_rows(table.dim(), &rows)?
    };
    WordVectors::new(Vocabulary::from_words(words), table)
}

/// Named numeric arrays. Written as `@name d1 d2 ...` headers each followed
/// by the values, one row of the last dimension per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamFile {
    sections: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl ParamFile {
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], values: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.sections.push((name.into(), shape.to_vec(), values.to_vec()));
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f64])> {
        self.sections
            .iter()
            .find(|s| s.0 == name)
            .map(|s| (s.1.as_slice(), s.2.as_slice()))
    }

    fn require(&self, name: &str, len: usize) -> Result<&[f64]> {
        let (_, values) = self
            .get(name)
            .ok_or_else(|| Error::InvalidConfig(format!("parameter section `{name}` is missing")))?;
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: values.len(),
            });
        }
        Ok(values)
    }

    fn require_usize(&self, name: &str, len: usize) -> Result<Vec<usize>> {
        self.require(name, len)?
            .iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(Error::InvalidConfig(format!("`{name}` must hold whole numbers")))
                }
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for (name, shape, values) in &self.sections {
            write!(out, "@{name}").map_err(io)?;
            for d in shape {
                write!(out, " {d}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
            let width = shape.last().copied().unwrap_or(1).max(1);
            for row in values.chunks(width) {
                let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
                writeln!(out, "{}", line.join(" ")).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pf = ParamFile::default();
        let mut header_line = 0;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('@') {
                pf.close_section(path, header_line)?;
                let mut f = rest.split_whitespace();
                let name = f
                    .next()
                    .ok_or_else(|| Error::parse(path, i + 1, "section needs a name"))?;
                let shape = f
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| Error::parse(path, i + 1, "bad section shape"))?;
                pf.sections.push((name.to_string(), shape, Vec::new()));
                header_line = i + 1;
                continue;
            }
            let Some(section) = pf.sections.last_mut() else {
                return Err(Error::parse(path, i + 1, "values before the first section"));
            };
            for v in line.split_whitespace() {
                section.2.push(
                    v.parse()
                        .map_err(|_| Error::parse(path, i + 1, format!("bad number `{v}`")))?,
                );
            }
        }
        pf.close_section(path, header_line)?;
        Ok(pf)
    }

    fn close_section(&self, path: &Path, header_line: usize) -> Result<()> {
        if let Some((name, shape, values)) = self.sections.last() {
            let want: usize = shape.iter().product();
            if values.len() != want {
                return Err(Error::parse(
                    path,
                    header_line,
                    format!("section `{name}` expects {want} values, found {}", values.len()),
                ));
            }
        }
        Ok(())
    }
}

pub fn nlm_to_params(p: &NlmParams, out: &mut ParamFile) {
    out.push("nlm.shape", &[3], &[p.order as f64, p.dim as f64, p.hidden as f64]);
    out.push("nlm.a", &[p.hidden, p.input_len()], &p.a);
    out.push("nlm.b", &[p.hidden], &p.b);
    out.push("nlm.u", &[p.hidden], &p.u);
}

pub fn nlm_from_params(pf: &ParamFile) -> Result<NlmParams> {
    let s = pf.require_usize("nlm.shape", 3)?;
    let mut p = NlmParams::zeros(s[0], s[1], s[2]);
    let n = p.a.len();
    p.a.copy_from_slice(pf.require("nlm.a", n)?);
    p.b.copy_from_slice(pf.require("nlm.b", p.hidden)?);
    p.u.copy_from_slice(pf.require("nlm.u", p.hidden)?);
    Ok(p)
}

pub fn relational_to_params(m: &RelationalModel, out: &mut ParamFile) {
    match m {
        RelationalModel::Gd(p) => out.push("gd", &[2], &[p.a, p.b]),
        RelationalModel::Kb(KbModel::TransE(p)) => {
            let r = &p.relations;
            out.push("transe.relations", &[r.len(), r.dim()], r.as_slice());
        }
        RelationalModel::Kb(KbModel::Ntn(p)) => {
            let (d, h) = (p.dim, p.hidden);
            out.push("ntn.shape", &[3], &[p.relations.len() as f64, d as f64, h as f64]);
            for (i, r) in p.relations.iter().enumerate() {
                out.push(format!("ntn.{i}.w"), &[h, d, d], &r.w);
                out.push(format!("ntn.{i}.v"), &[h, 2 * d], &r.v);
                out.push(format!("ntn.{i}.b"), &[h], &r.b);
            }
            out.push("ntn.u", &[h], &p.u);
        }
    }
}

pub fn relational_from_params(kind: Relational, pf: &ParamFile) -> Result<RelationalModel> {
    Ok(match kind {
        Relational::Gd => {
            let v = pf.require("gd", 2)?;
            RelationalModel::Gd(GdParams { a: v[0], b: v[1] })
        }
        Relational::TransE => {
            let (shape, values) = pf
                .get("transe.relations")
                .ok_or_else(|| Error::InvalidConfig("parameter section `transe.relations` is missing".into()))?;
            if shape.len() != 2 || shape[1] == 0 {
                return Err(Error::InvalidConfig("`transe.relations` must be n x d".into()));
            }
            let rows: Vec<Vec<f64>> = values.chunks(shape[1]).map(<[f64]>::to_vec).collect();
            RelationalModel::Kb(KbModel::TransE(TransEParams {
                relations: EmbeddingTable::from_rows(shape[1], &rows)?,
            }))
        }
        Relational::Ntn => {
            let s = pf.require_usize("ntn.shape", 3)?;
            let (n, d, h) = (s[0], s[1], s[2]);
            let mut p = NtnParams::zeros(n, d, h);
            for (i, r) in p.relations.iter_mut().enumerate() {
                *r = NtnRelation {
                    w: pf.require(&format!("ntn.{i}.w"), h * d * d)?.to_vec(),
                    v: pf.require(&format!("ntn.{i}.v"), h * 2 * d)?.to_vec(),
                    b: pf.require(&format!("ntn.{i}.b"), h)?.to_vec(),
                };
            }
            p.u.copy_from_slice(pf.require("ntn.u", h)?);
            RelationalModel::Kb(KbModel::Ntn(p))
        }
    })
}

fn write_kv(path: &Path, kv: &BTreeMap<String, String>) -> Result<()> {
    let mut text = String::new();
    for (k, v) in kv {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `key=value`"))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

/// A loaded checkpoint directory.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub objective: Objective,
    pub iteration: usize,
    /// Free-form `key=value` pairs recorded at save time, e.g. data paths.
    pub data: BTreeMap<String, String>,
    pub relations: Vec<String>,
    pub w: Option<WordVectors>,
    pub v: Option<WordVectors>,
    pub y: Option<(Vec<String>, EmbeddingTable)>,
    pub nlm: Option<NlmParams>,
    pub rel: Option<RelationalModel>,
}

/// Vocabularies needed to name the rows of a training state.
#[derive(Debug, Clone, Copy)]
pub struct StateVocabs<'a> {
    pub w: Option<&'a Vocabulary>,
    pub v: Option<&'a Vocabulary>,
}

/// Writes `config.txt`, `meta.txt` and the per-side files into `dir`,
/// creating it if needed.
pub fn save_checkpoint(
    dir: &Path,
    config: &RunConfig,
    state: &TrainState,
    vocabs: StateVocabs<'_>,
    relations: &[String],
    data: &BTreeMap<String, String>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, config.to_kv()).map_err(|e| Error::io(&cfg_path, e))?;

    let mut meta = BTreeMap::new();
    for (k, v) in data {
        meta.insert(format!("data.{k}"), v.clone());
    }
    meta.insert("objective".to_string(), state.objective.to_string());
    meta.insert("iteration".to_string(), state.iteration.to_string());
    write_kv(&dir.join("meta.txt"), &meta)?;

    let missing = |side: &str| Error::InvalidConfig(format!("no vocabulary for the {side} side"));
    if let Some(side) = &state.nlm {
        let vocab = vocabs.w.ok_or_else(|| missing("w"))?;
        write_vectors(&dir.join("w.vec"), vocab.words(), &side.emb)?;
        let mut pf = ParamFile::default();
        nlm_to_params(&side.params, &mut pf);
        pf.write(&dir.join("nlm.params"))?;
    }
    if let Some(side) = &state.rel {
        let vocab = vocabs.v.ok_or_else(|| missing("v"))?;
        write_vectors(&dir.join("v.vec"), vocab.words(), &side.emb)?;
        let mut pf = ParamFile::default();
        relational_to_params(&side.model, &mut pf);
        pf.write(&dir.join("rel.params"))?;
        if side.kind != Relational::Gd {
            let path = dir.join("relations.txt");
            let mut text = relations.join("\n");
            text.push('\n');
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    if let Some(c) = &state.coupling {
        write_vectors(&dir.join("y.vec"), c.words(), c.y())?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let config = RunConfig::from_file(&dir.join("config.txt"))?;
    let meta_path = dir.join("meta.txt");
    let meta = read_kv(&meta_path)?;
    let field = |k: &str| {
        meta.get(k)
            .ok_or_else(|| Error::parse(&meta_path, 0, format!("missing `{k}`")))
    };
    let objective: Objective = field("objective")?.parse()?;
    let iteration: usize = field("iteration")?
        .parse()
        .map_err(|_| Error::parse(&meta_path, 0, "bad iteration"))?;
    let data = meta
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("data.").map(|k| (k.to_string(), v.clone())))
        .collect();

    let (mut w, mut nlm) = (None, None);
    if objective.distributional {
        w = Some(read_embedding_checkpoint(&dir.join("w.vec"))?);
        nlm = Some(nlm_from_params(&ParamFile::read(&dir.join("nlm.params"))?)?);
    }
    let (mut v, mut rel, mut relations) = (None, None, Vec::new());
    if let Some(kind) = objective.relational {
        v = Some(read_embedding_checkpoint(&dir.join("v.vec"))?);
        rel = Some(relational_from_params(
            kind,
            &ParamFile::read(&dir.join("rel.params"))?,
        )?);
        if kind != Relational::Gd {
            let path = dir.join("relations.txt");
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            relations = text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect();
        }
    }
    let y = if objective.is_joint() {
        Some(read_vectors(&dir.join("y.vec"))?)
    } else {
        None
    };
    Ok(Checkpoint {
        config,
        objective,
        iteration,
        data,
        relations,
        w,
        v,
        y,
        nlm,
        rel,
    })
}

impl Checkpoint {
    /// Rebuilds the trainer state. The stored vocabularies must match the
    /// ones the data was loaded with.
    pub fn to_state(&self) -> Result<TrainState> {
        let nlm = match (&self.w, &self.nlm) {
            (Some(w), Some(p)) => Some(DistributionalState {
                emb: w.table.clone(),
                params: p.clone(),
            }),
            _ => None,
        };
        let rel = match (&self.v, &self.rel, self.objective.relational) {
            (Some(v), Some(m), Some(kind)) => Some(RelationalState {
                kind,
                emb: v.table.clone(),
                model: m.clone(),
            }),
            _ => None,
        };
        let coupling = match (&self.w, &self.v, &self.y) {
            (Some(w), Some(v), Some((words, y))) => {
                let mut c = AdmmCoupling::new(&w.vocab, &v.vocab, y.dim(), self.config.rho, self.config.alpha);
                if c.words() != words.as_slice() {
                    return Err(Error::InvalidConfig(
                        "multiplier words do not match the shared vocabulary".into(),
                    ));
                }
                c.set_y(y.clone())?;
                Some(c)
            }
            _ => None,
        };
        Ok(TrainState {
            objective: self.objective,
            iteration: self.iteration,
            nlm,
            rel,
            coupling,
        })
    }

    /// Averages `w` and `v` on shared words; other words keep the side that
    /// has them. The result uses the `v` vocabulary followed by `w`-only
    /// words.
    pub fn averaged(&self) -> Result<WordVectors> {
        match (&self.w, &self.v) {
            (Some(w), Some(v)) => crate::eval::average_embeddings(w, v),
            (Some(only), None) | (None, Some(only)) => Ok(only.clone()),
            (None, None) => Err(Error::NoTrainingData("checkpoint holds no embeddings".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vec");
        let t = EmbeddingTable::from_rows(2, &[vec![0.1, -2.5e-300], vec![1.0 / 3.0, 7.0]]).unwrap();
        write_vectors(&path, &["RARE", "cat"], &t).unwrap();
        let (words, back) = read_vectors(&path).unwrap();
        assert_eq!(words, ["RARE", "cat"]);
        assert_eq!(back, t);
    }

    #[test]
    fn header_and_rows_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vec");
        fs::write(&path, "2 3\ncat 1 2 3\ndog 4 5 6\n").unwrap();
        let (words, t) = read_vectors(&path).unwrap();
        assert_eq!(words, ["cat", "dog"]);
        assert_eq!(t.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn short_row_is_rejected_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vec");
        fs::write(&path, "1 2\ncat 0.5\n").unwrap();
        match read_vectors(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vec");
        fs::write(&path, "3 1\na 1\nb 2\n").unwrap();
        assert!(matches!(read_vectors(&path), Err(Error::Parse { .. })));
        fs::write(&path, "2 1\na 1\na 2\n").unwrap();
        assert!(matches!(read_vectors(&path), Err(Error::Parse { line: 3, .. })));
        fs::write(&path, "1 1\na 1\nb 2\n").unwrap();
        assert!(matches!(read_vectors(&path), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn missing_rare_gets_a_zero_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vec");
        fs::write(&path, "1 2\ncat 1 2\n").unwrap();
        let wv = read_embedding_checkpoint(&path).unwrap();
        assert_eq!(wv.vocab.rare_id(), 0);
        assert_eq!(wv.table.row(0), &[0.0, 0.0]);
        assert_eq!(wv.get("cat").unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn param_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.params");
        let mut rng = crate::rng::from_seed(3);
        let mut pf = ParamFile::default();
        let nlm = NlmParams::init(3, 2, 4, &mut rng);
        nlm_to_params(&nlm, &mut pf);
        let ntn = RelationalModel::Kb(KbModel::Ntn(NtnParams::init(2, 3, 2, &mut rng)));
        relational_to_params(&ntn, &mut pf);
        pf.write(&path).unwrap();
        let back = ParamFile::read(&path).unwrap();
        assert_eq!(back, pf);
        assert_eq!(nlm_from_params(&back).unwrap(), nlm);
        assert_eq!(relational_from_params(Relational::Ntn, &back).unwrap(), ntn);
    }

    #[test]
    fn truncated_section_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.params");
        fs::write(&path, "@gd 2\n1.0\n@x 1\n3\n").unwrap();
        assert!(matches!(ParamFile::read(&path), Err(Error::Parse { line: 1, .. })));
    }
}

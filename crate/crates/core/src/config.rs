//! Run configuration: defaults, flat `key=value` files and the objective
//! selector.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::CorruptPosition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relational {
    Gd,
    TransE,
    Ntn,
}

impl Relational {
    pub fn name(self) -> &'static str {
        match self {
            Relational::Gd => "gd",
            Relational::TransE => "transe",
            Relational::Ntn => "ntn",
        }
    }
}

/// Which objectives a run trains. `nlm+gd` and friends are joint ADMM runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Objective {
    pub distributional: bool,
    pub relational: Option<Relational>,
}

impl Objective {
    pub const NLM: Objective = Objective {
        distributional: true,
        relational: None,
    };

    pub fn relational(r: Relational) -> Self {
        Objective {
            distributional: false,
            relational: Some(r),
        }
    }

    pub fn joint(r: Relational) -> Self {
        Objective {
            distributional: true,
            relational: Some(r),
        }
    }

    pub fn is_joint(&self) -> bool {
        self.distributional && self.relational.is_some()
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rel = |name: &str| match name {
            "gd" => Ok(Relational::Gd),
            "transe" => Ok(Relational::TransE),
            "ntn" => Ok(Relational::Ntn),
            other => Err(Error::InvalidConfig(format!("unknown objective `{other}`"))),
        };
        match s.split_once('+') {
            None if s == "nlm" => Ok(Objective::NLM),
            None => rel(s).map(Objective::relational),
            Some(("nlm", r)) => rel(r).map(Objective::joint),
            Some(_) => Err(Error::InvalidConfig(format!(
                "objective must be nlm, gd, transe, ntn or nlm+<relational>, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.distributional, self.relational) {
            (true, None) => f.write_str("nlm"),
            (false, Some(r)) => f.write_str(r.name()),
            (true, Some(r)) => write!(f, "nlm+{}", r.name()),
            (false, None) => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    #[default]
    Mean,
    Max,
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "max" => Ok(Aggregate::Max),
            other => Err(Error::InvalidConfig(format!(
                "aggregate must be mean or max, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Mean => "mean",
            Aggregate::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub rho: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub ngram_order: usize,
    pub block_size: usize,
    pub gd_words: usize,
    pub gd_neighbors: usize,
    pub lr_nlm: f64,
    pub lr_gd: f64,
    pub lr_kb: f64,
    pub vocab_size: usize,
    pub wordnet_vocab_size: usize,
    pub nlm_hidden: usize,
    pub ntn_hidden: usize,
    pub kmeans_k: usize,
    pub l2: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub corrupt_position: CorruptPosition,
    pub distance_cache: bool,
    pub analogy_aggregate: Aggregate,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 50,
            rho: 0.05,
            alpha: 0.5,
            iterations: 1000,
            ngram_order: 5,
            block_size: 100_000,
            gd_words: 100_000,
            gd_neighbors: 5,
            lr_nlm: 0.01,
            lr_gd: 0.01,
            lr_kb: 0.01,
            vocab_size: 50_000,
            wordnet_vocab_size: 150_000,
            nlm_hidden: 100,
            ntn_hidden: 4,
            kmeans_k: 64,
            l2: 0.0,
            seed: 1,
            checkpoint_every: 50,
            corrupt_position: CorruptPosition::Middle,
            distance_cache: false,
            analogy_aggregate: Aggregate::Mean,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "dim",
        "rho",
        "alpha",
        "iterations",
        "ngram_order",
        "block_size",
        "gd_words",
        "gd_neighbors",
        "lr_nlm",
        "lr_gd",
        "lr_kb",
        "vocab_size",
        "wordnet_vocab_size",
        "nlm_hidden",
        "ntn_hidden",
        "kmeans_k",
        "l2",
        "seed",
        "checkpoint_every",
        "corrupt_position",
        "distance_cache",
        "analogy_aggregate",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dim" => self.dim = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "ngram_order" => self.ngram_order = parse(key, value)?,
            "block_size" => self.block_size = parse(key, value)?,
            "gd_words" => self.gd_words = parse(key, value)?,
            "gd_neighbors" => self.gd_neighbors = parse(key, value)?,
            "lr_nlm" => self.lr_nlm = parse(key, value)?,
            "lr_gd" => self.lr_gd = parse(key, value)?,
            "lr_kb" => self.lr_kb = parse(key, value)?,
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "wordnet_vocab_size" => self.wordnet_vocab_size = parse(key, value)?,
            "nlm_hidden" => self.nlm_hidden = parse(key, value)?,
            "ntn_hidden" => self.ntn_hidden = parse(key, value)?,
            "kmeans_k" => self.kmeans_k = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "corrupt_position" => self.corrupt_position = value.trim().parse()?,
            "distance_cache" => self.distance_cache = parse(key, value)?,
            "analogy_aggregate" => self.analogy_aggregate = value.trim().parse()?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dim" => self.dim.to_string(),
            "rho" => self.rho.to_string(),
            "alpha" => self.alpha.to_string(),
            "iterations" => self.iterations.to_string(),
            "ngram_order" => self.ngram_order.to_string(),
            "block_size" => self.block_size.to_string(),
            "gd_words" => self.gd_words.to_string(),
            "gd_neighbors" => self.gd_neighbors.to_string(),
            "lr_nlm" => self.lr_nlm.to_string(),
            "lr_gd" => self.lr_gd.to_string(),
            "lr_kb" => self.lr_kb.to_string(),
            "vocab_size" => self.vocab_size.to_string(),
            "wordnet_vocab_size" => self.wordnet_vocab_size.to_string(),
            "nlm_hidden" => self.nlm_hidden.to_string(),
            "ntn_hidden" => self.ntn_hidden.to_string(),
            "kmeans_k" => self.kmeans_k.to_string(),
            "l2" => self.l2.to_string(),
            "seed" => self.seed.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "corrupt_position" => self.corrupt_position.to_string(),
            "distance_cache" => self.distance_cache.to_string(),
            "analogy_aggregate" => self.analogy_aggregate.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` lines; `#` starts a comment. Unknown keys are
    /// reported with their line number.
    pub fn apply_kv(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, n + 1, "expected `key=value`"))?;
            let k = k.trim();
            if Self::KEYS.contains(&k) {
                self.set(k, v).map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
            } else {
                return Err(Error::parse(origin, n + 1, format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = RunConfig::default();
        c.apply_kv(&text, path)?;
        Ok(c)
    }

    pub fn to_kv(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("every key has a value")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("ngram_order", self.ngram_order),
            ("block_size", self.block_size),
            ("vocab_size", self.vocab_size),
            ("wordnet_vocab_size", self.wordnet_vocab_size),
            ("nlm_hidden", self.nlm_hidden),
            ("ntn_hidden", self.ntn_hidden),
            ("kmeans_k", self.kmeans_k),
            ("checkpoint_every", self.checkpoint_every),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("`{k}` must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("`alpha` must lie in [0, 1]".into()));
        }
        for (k, v) in [
            ("rho", self.rho),
            ("lr_nlm", self.lr_nlm),
            ("lr_gd", self.lr_gd),
            ("lr_kb", self.lr_kb),
            ("l2", self.l2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("`{k}` must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.dim, 50);
        assert_eq!(c.rho, 0.05);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.iterations, 1000);
        assert_eq!(c.block_size, 100_000);
        assert_eq!(c.gd_words, 100_000);
        assert_eq!(c.gd_neighbors, 5);
        assert_eq!(c.vocab_size, 50_000);
        assert_eq!(c.kmeans_k, 64);
        assert_eq!(c.l2, 0.0);
        c.validate().unwrap();
    }

    #[test]
    fn kv_round_trip() {
        let c = RunConfig {
            rho: 0.1,
            corrupt_position: CorruptPosition::Random,
            ..RunConfig::default()
        };
        let text = c.to_kv();
        let mut d = RunConfig::default();
        d.apply_kv(&text, Path::new("mem")).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn bad_lines_report_position() {
        let mut c = RunConfig::default();
        let err = c
            .apply_kv("dim=10\n# note\nbogus=1\n", Path::new("run.cfg"))
            .unwrap_err();
        assert!(err.to_string().contains("run.cfg:3"), "{err}");
        assert_eq!(c.dim, 10);
        assert!(c.apply_kv("alpha=2", Path::new("x")).is_ok());
        assert!(c.validate().is_err());
    }

    #[test]
    fn objective_names() {
        for s in ["nlm", "gd", "transe", "ntn", "nlm+gd", "nlm+transe", "nlm+ntn"] {
            let o: Objective = s.parse().unwrap();
            assert_eq!(o.to_string(), s);
        }
        assert!("gd+nlm".parse::<Objective>().is_err());
        assert!("nlm+nlm".parse::<Objective>().is_err());
        assert!("nlm+gd".parse::<Objective>().unwrap().is_joint());
    }
}

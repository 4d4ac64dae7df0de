//! k-means over embedding rows, for exporting cluster ids as features.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng as _;

use crate::corpus::RARE;
use crate::embedding::WordVectors;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// SSE after each Lloyd iteration.
    pub sse_history: Vec<f64>,
}

impl KMeansResult {
    pub fn sse(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = dist2(p, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(points: &[&[f64]], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding. A cluster left empty takes the
/// point farthest from its centroid among clusters with more than one
/// member. Stops when assignments settle or after `max_iter` iterations.
pub fn kmeans(points: &[&[f64]], k: usize, max_iter: usize, rng: &mut Rng) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} needs 1..={} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    let mut centroids = seed_plus_plus(points, k, rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        let mut sizes = vec![0usize; k];
        for &c in &assignment {
            sizes[c] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= points leaves a cluster with two members");
            sizes[assignment[far]] -= 1;
            sizes[empty] = 1;
            assignment[far] = empty;
            dists[far] = 0.0;
            centroids[empty] = points[far].to_vec();
            changed = true;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &c) in points.iter().zip(&assignment) {
            for (s, x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            let inv = 1.0 / sizes[c] as f64;
            centroids[c] = sum.into_iter().map(|s| s * inv).collect();
        }
        let sse: f64 = points
            .iter()
            .zip(&assignment)
            .map(|(p, &c)| dist2(p, &centroids[c]))
            .sum();
        history.push(sse);
        if !changed {
            break;
        }
    }
    Ok(KMeansResult {
        assignment,
        centroids,
        sse_history: history,
    })
}

/// Clusters every word except RARE. Returns `(word, cluster)` pairs in
/// vocabulary order with the clustering itself.
pub fn kmeans_export(emb: &WordVectors, k: usize, rng: &mut Rng) -> Result<(Vec<(String, usize)>, KMeansResult)> {
    let ids: Vec<usize> = (0..emb.vocab.len()).filter(|&i| emb.vocab.word(i) != RARE).collect();
    let points: Vec<&[f64]> = ids.iter().map(|&i| emb.table.row(i)).collect();
    let res = kmeans(&points, k, 100, rng)?;
    let words = ids
        .iter()
        .zip(&res.assignment)
        .map(|(&i, &c)| (emb.vocab.word(i).to_string(), c))
        .collect();
    Ok((words, res))
}

/// `word<TAB>cluster_id` lines preceded by a `# sse=<value>` comment.
pub fn write_clusters_tsv(path: &Path, words: &[(String, usize)], sse: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "# sse={sse}").map_err(io)?;
    writeln!(out, "word\tcluster_id").map_err(io)?;
    for (w, c) in words {
        writeln!(out, "{w}\t{c}").map_err(io)?;
    }
    out.flush().map_err(io)
}

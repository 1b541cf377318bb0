//! Partition-agreement scores and per-variable cluster summaries.

use crate::data::{MaskedDataset, Partition};
use crate::error::{Error, Result};
use crate::model::{CondDist, MixtureParams, ResponsibilityMatrix};
use serde::Serialize;

/// Adjusted Rand index between two complete partitions.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let wrap = |p: &Partition| p.labels().iter().map(|&z| Some(z)).collect::<Vec<_>>();
    ari_optional(&wrap(a), &wrap(b))
}

/// Adjusted Rand index where either labeling may have missing entries;
/// subjects lacking a label on either side are excluded.
///
/// Pair counts are exact integers, so the score is symmetric exactly. When
/// the adjustment degenerates (both labelings trivial) the partitions are
/// identical and the score is 1.
pub fn ari_optional(a: &[Option<usize>], b: &[Option<usize>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "label sequences have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| x.zip(*y))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InvalidConfig(
            "no subject carries a label in both partitions".into(),
        ));
    }
    let ka = pairs.iter().map(|&(x, _)| x + 1).max().unwrap();
    let kb = pairs.iter().map(|&(_, y)| y + 1).max().unwrap();
    let mut counts = vec![0i128; ka * kb];
    for &(x, y) in &pairs {
        counts[x * kb + y] += 1;
    }
    let comb2 = |x: i128| x * (x - 1) / 2;
    let idx: i128 = counts.iter().map(|&c| comb2(c)).sum();
    let sa: i128 = (0..ka)
        .map(|x| comb2((0..kb).map(|y| counts[x * kb + y]).sum()))
        .sum();
    let sb: i128 = (0..kb)
        .map(|y| comb2((0..ka).map(|x| counts[x * kb + y]).sum()))
        .sum();
    let total = comb2(pairs.len() as i128);
    let num = 2 * (idx * total - sa * sb);
    let den = total * (sa + sb) - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Best-permutation disagreement between a partition and reference labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Misclassification {
    pub rate: f64,
    /// True when the label matching was greedy rather than exhaustive.
    pub approximate: bool,
}

/// Fraction of subjects whose label disagrees with the truth under the best
/// relabeling of `a`. Exhaustive over permutations up to 8 labels, greedy
/// above that (flagged).
pub fn misclassification(a: &Partition, truth: &Partition) -> Result<Misclassification> {
    if a.labels().len() != truth.labels().len() {
        return Err(Error::ShapeMismatch(format!(
            "partitions have lengths {} and {}",
            a.labels().len(),
            truth.labels().len()
        )));
    }
    let n = a.labels().len();
    let k = a.k().max(truth.k());
    let mut counts = vec![0u64; k * k];
    for (&x, &z) in a.labels().iter().zip(truth.labels()) {
        counts[x * k + z] += 1;
    }
    let (matched, approximate) = if k <= 8 {
        (best_permutation_score(&counts, k), false)
    } else {
        (greedy_score(&counts, k), true)
    };
    Ok(Misclassification {
        rate: 1.0 - matched as f64 / n as f64,
        approximate,
    })
}

/// Max over permutations sigma of sum_i counts[i][sigma(i)], by Heap's
/// algorithm over at most 8! arrangements.
fn best_permutation_score(counts: &[u64], k: usize) -> u64 {
    fn go(perm: &mut Vec<usize>, depth: usize, counts: &[u64], k: usize, best: &mut u64) {
        if depth == k {
            let score: u64 = (0..k).map(|i| counts[i * k + perm[i]]).sum();
            *best = (*best).max(score);
            return;
        }
        for i in depth..k {
            perm.swap(depth, i);
            go(perm, depth + 1, counts, k, best);
            perm.swap(depth, i);
        }
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    go(&mut perm, 0, counts, k, &mut best);
    best
}

/// Repeatedly claims the largest unclaimed cell; each pick is at least the
/// mean of what remains, so the total still beats chance.
fn greedy_score(counts: &[u64], k: usize) -> u64 {
    let mut used_row = vec![false; k];
    let mut used_col = vec![false; k];
    let mut total = 0;
    for _ in 0..k {
        let mut best = 0;
        let mut arg = (0, 0);
        for i in 0..k {
            for j in 0..k {
                if !used_row[i] && !used_col[j] && counts[i * k + j] >= best {
                    best = counts[i * k + j];
                    arg = (i, j);
                }
            }
        }
        used_row[arg.0] = true;
        used_col[arg.1] = true;
        total += best;
    }
    total
}

/// Cross-tabulation of clusters against external labels; the last row
/// collects subjects whose external label is missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionTable {
    /// counts[e][c]: external label e (last row = missing) in cluster c.
    pub counts: Vec<Vec<u64>>,
    pub k_clusters: usize,
    pub k_external: usize,
}

impl ConfusionTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn cluster_sizes(&self) -> Vec<u64> {
        (0..self.k_clusters)
            .map(|c| self.counts.iter().map(|row| row[c]).sum())
            .collect()
    }
}

pub fn confusion(clusters: &Partition, external: &[Option<usize>]) -> Result<ConfusionTable> {
    if clusters.labels().len() != external.len() {
        return Err(Error::ShapeMismatch(format!(
            "partition has {} subjects, external labels {}",
            clusters.labels().len(),
            external.len()
        )));
    }
    let k_clusters = clusters.k();
    let k_external = external.iter().flatten().map(|&e| e + 1).max().unwrap_or(0);
    let mut counts = vec![vec![0u64; k_clusters]; k_external + 1];
    for (&c, e) in clusters.labels().iter().zip(external) {
        let row = e.unwrap_or(k_external);
        counts[row][c] += 1;
    }
    Ok(ConfusionTable {
        counts,
        k_clusters,
        k_external,
    })
}

/// How strongly one variable separates the fitted components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableReport {
    pub var: usize,
    /// max - min of the observation probabilities across components.
    pub tau_spread: f64,
    /// Mean pairwise L1 distance between the components' conditional
    /// distributions of this variable.
    pub density_l1: f64,
    /// Responsibility-weighted missingness rate of this variable per class.
    pub class_miss_rates: Vec<f64>,
}

pub fn discriminative_report(
    params: &MixtureParams,
    t: &ResponsibilityMatrix,
    data: &MaskedDataset,
) -> Result<Vec<VariableReport>> {
    if t.n() != data.n() || t.k() != params.k() || params.d() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "model ({}x{}), responsibilities ({}x{}), data ({}x{}) disagree",
            params.k(),
            params.d(),
            t.n(),
            t.k(),
            data.n(),
            data.d()
        )));
    }
    let k = params.k();
    let col_sums = t.column_sums();
    let mut report = Vec::with_capacity(data.d());
    for j in 0..data.d() {
        let taus: Vec<f64> = (0..k).map(|c| params.tau(c, j)).collect();
        let spread = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - taus.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut l1 = 0.0;
        let mut n_pairs = 0;
        for a in 0..k {
            for b in a + 1..k {
                l1 += dist_l1(params.dens(a, j), params.dens(b, j));
                n_pairs += 1;
            }
        }
        if n_pairs > 0 {
            l1 /= n_pairs as f64;
        }
        let mut miss = vec![0.0; k];
        for i in 0..data.n() {
            if !data.is_observed(i, j) {
                for (c, m) in miss.iter_mut().enumerate() {
                    *m += t.get(i, c);
                }
            }
        }
        for (m, s) in miss.iter_mut().zip(&col_sums) {
            *m /= s;
        }
        report.push(VariableReport {
            var: j,
            tau_spread: spread,
            density_l1: l1,
            class_miss_rates: miss,
        });
    }
    Ok(report)
}

fn dist_l1(a: &CondDist, b: &CondDist) -> f64 {
    match (a, b) {
        (CondDist::Continuous(p), CondDist::Continuous(q)) => {
            let grid = p.grid();
            p.values()
                .iter()
                .zip(q.values())
                .enumerate()
                .map(|(g, (x, y))| grid.trapezoid_weight(g) * (x - y).abs())
                .sum()
        }
        (CondDist::Categorical(p), CondDist::Categorical(q)) => {
            p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum()
        }
        // parameter validation guarantees per-column type agreement
        _ => unreachable!("mixed conditional distribution kinds in one column"),
    }
}

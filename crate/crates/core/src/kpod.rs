//! K-means baseline for incomplete data: alternate between completing
//! missing cells with the assigned centroid's coordinates and running Lloyd
//! iterations on the completed matrix, until the assignments stop moving.
//!
//! Categorical columns are one-hot encoded (the baseline is defined for
//! numeric arrays only); a missing categorical cell blanks all its
//! indicator columns.

use crate::data::{MaskedDataset, Partition, VarKind};
use crate::error::{Error, Result};
use crate::estimator::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpodConfig {
    pub k: usize,
    pub max_outer: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl KpodConfig {
    pub fn new(k: usize) -> Self {
        KpodConfig {
            k,
            max_outer: 100,
            n_starts: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_outer == 0 || self.n_starts == 0 {
            return Err(Error::InvalidConfig(format!(
                "k, max_outer and n_starts must be >= 1, got {}, {}, {}",
                self.k, self.max_outer, self.n_starts
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KpodFit {
    pub partition: Partition,
    /// Within-cluster sum of squares over observed cells only.
    pub objective: f64,
    /// Observed-cell objective after each outer iteration of the winning
    /// start; nonincreasing.
    pub trace: Vec<f64>,
    /// False when the winning start hit max_outer before stabilizing.
    pub converged: bool,
}

/// One full K-means run on a complete matrix: k-means++ seeding followed by
/// Lloyd iterations until the assignment is stable.
pub fn kmeans(
    values: &[f64],
    n: usize,
    p: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    if values.len() != n * p || n == 0 || p == 0 {
        return Err(Error::ShapeMismatch(format!(
            "expected {n}x{p} matrix, got {} values",
            values.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let centroids = plus_plus_seed(values, n, p, k, rng);
    lloyd(values, n, p, k, centroids)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seed(values: &[f64], n: usize, p: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = |i: usize| &values[i * p..(i + 1) * p];
    let mut centroids = Vec::with_capacity(k * p);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // all remaining points coincide with a centroid
            rng.gen_range(0..n)
        };
        let c0 = centroids.len();
        centroids.extend_from_slice(row(pick));
        for i in 0..n {
            let dd = dist2(row(i), &centroids[c0..c0 + p]);
            if dd < d2[i] {
                d2[i] = dd;
            }
        }
    }
    centroids
}

/// Lloyd iterations from given centroids; empty clusters keep their old
/// coordinates. Returns (labels, centroids, full-matrix WCSS).
fn lloyd(
    values: &[f64],
    n: usize,
    p: usize,
    k: usize,
    mut centroids: Vec<f64>,
) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    let row = |i: usize| &values[i * p..(i + 1) * p];
    let mut labels = vec![usize::MAX; n];
    for _ in 0..500 {
        let mut moved = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = dist2(row(i), &centroids[c * p..(c + 1) * p]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        let mut sums = vec![0.0; k * p];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i] * p..(labels[i] + 1) * p]
                .iter_mut()
                .zip(row(i))
            {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            for j in 0..p {
                centroids[c * p + j] = sums[c * p + j] / counts[c] as f64;
            }
        }
    }
    let wcss: f64 = (0..n)
        .map(|i| dist2(row(i), &centroids[labels[i] * p..(labels[i] + 1) * p]))
        .sum();
    Ok((labels, centroids, wcss))
}

/// One-hot encode categorical columns; returns (values, mask, width).
fn to_numeric(data: &MaskedDataset) -> (Vec<f64>, Vec<bool>, usize) {
    let widths: Vec<usize> = data
        .var_specs()
        .iter()
        .map(|s| match s.kind {
            VarKind::Continuous => 1,
            VarKind::Categorical { n_levels } => n_levels,
        })
        .collect();
    let p: usize = widths.iter().sum();
    let mut values = vec![0.0; data.n() * p];
    let mut mask = vec![false; data.n() * p];
    for i in 0..data.n() {
        let mut col = 0;
        for (j, &w) in widths.iter().enumerate() {
            match data.value(i, j) {
                Some(x) if w == 1 => {
                    values[i * p + col] = x;
                    mask[i * p + col] = true;
                }
                Some(x) => {
                    for l in 0..w {
                        values[i * p + col + l] = if l == x as usize { 1.0 } else { 0.0 };
                        mask[i * p + col + l] = true;
                    }
                }
                None => {}
            }
            col += w;
        }
    }
    (values, mask, p)
}

fn observed_wcss(
    values: &[f64],
    mask: &[bool],
    p: usize,
    labels: &[usize],
    centroids: &[f64],
) -> f64 {
    let mut acc = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..p {
            if mask[i * p + j] {
                let d = values[i * p + j] - centroids[c * p + j];
                acc += d * d;
            }
        }
    }
    acc
}

pub fn kpod_fit(data: &MaskedDataset, config: &KpodConfig) -> Result<KpodFit> {
    config.validate()?;
    let (values, mask, p) = to_numeric(data);
    let n = data.n();
    if n < config.k {
        return Err(Error::InvalidConfig(format!(
            "need n >= k, got n={n}, k={}",
            config.k
        )));
    }
    // column means over observed cells for the initial completion
    let mut col_mean = vec![0.0; p];
    for j in 0..p {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for i in 0..n {
            if mask[i * p + j] {
                sum += values[i * p + j];
                cnt += 1;
            }
        }
        if cnt == 0 {
            return Err(Error::EmptyColumn { col: j });
        }
        col_mean[j] = sum / cnt as f64;
    }

    let mut best: Option<KpodFit> = None;
    for s in 0..config.n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, s as u64));
        let mut completed = values.clone();
        for i in 0..n {
            for j in 0..p {
                if !mask[i * p + j] {
                    completed[i * p + j] = col_mean[j];
                }
            }
        }
        let mut centroids = plus_plus_seed(&completed, n, p, config.k, &mut rng);
        let mut labels: Vec<usize> = Vec::new();
        let mut trace = Vec::new();
        let mut converged = false;
        for _ in 0..config.max_outer {
            let (new_labels, new_centroids, _) = lloyd(&completed, n, p, config.k, centroids)?;
            trace.push(observed_wcss(&values, &mask, p, &new_labels, &new_centroids));
            centroids = new_centroids;
            let stable = new_labels == labels;
            labels = new_labels;
            if stable {
                converged = true;
                break;
            }
            for (i, &c) in labels.iter().enumerate() {
                for j in 0..p {
                    if !mask[i * p + j] {
                        completed[i * p + j] = centroids[c * p + j];
                    }
                }
            }
        }
        let objective = *trace.last().expect("max_outer >= 1 guarantees one pass");
        if best.as_ref().map_or(true, |b| objective < b.objective) {
            best = Some(KpodFit {
                partition: Partition::new(labels, config.k)?,
                objective,
                trace,
                converged,
            });
        }
    }
    Ok(best.expect("n_starts >= 1"))
}

//! Datasets with an explicit observation mask.
//!
//! The mask is authoritative: a masked cell holds a NaN sentinel and is never
//! read. Constructors overwrite masked cells with the sentinel so two
//! datasets differing only in masked-cell garbage are indistinguishable.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Kind of a variable, with categorical cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Categorical { n_levels: usize },
}

/// Per-variable metadata carried alongside the data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub kind: VarKind,
    /// (mean, sd) applied by `standardize`, if any.
    pub standardization: Option<(f64, f64)>,
}

impl VariableSpec {
    pub fn continuous() -> Self {
        VariableSpec {
            kind: VarKind::Continuous,
            standardization: None,
        }
    }

    pub fn categorical(n_levels: usize) -> Self {
        VariableSpec {
            kind: VarKind::Categorical { n_levels },
            standardization: None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, VarKind::Continuous)
    }
}

/// n×d data matrix plus observation mask (true = observed).
#[derive(Debug, Clone)]
pub struct MaskedDataset {
    values: Vec<f64>,
    mask: Vec<bool>,
    var_specs: Vec<VariableSpec>,
    n: usize,
    d: usize,
}

/// Bitwise on cell values: masked cells are canonical NaN, so two datasets
/// with identical masks and observed values compare equal.
impl PartialEq for MaskedDataset {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.d == other.d
            && self.var_specs == other.var_specs
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl MaskedDataset {
    /// Builds a dataset, validating shapes and categorical levels. Masked
    /// cells are overwritten with NaN regardless of their incoming content.
    pub fn new(
        mut values: Vec<f64>,
        mask: Vec<bool>,
        var_specs: Vec<VariableSpec>,
        n: usize,
        d: usize,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::ShapeMismatch(format!(
                "dataset must be non-empty, got n={n}, d={d}"
            )));
        }
        if values.len() != n * d || mask.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{}={} cells, got {} values and {} mask entries",
                n,
                d,
                n * d,
                values.len(),
                mask.len()
            )));
        }
        if var_specs.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "expected {} variable specs, got {}",
                d,
                var_specs.len()
            )));
        }
        for (idx, (v, m)) in values.iter_mut().zip(mask.iter()).enumerate() {
            if !*m {
                *v = f64::NAN;
                continue;
            }
            let (row, col) = (idx / d, idx % d);
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: row + 1,
                    col: col + 1,
                    message: format!("observed cell holds non-finite value {v}"),
                });
            }
            if let VarKind::Categorical { n_levels } = var_specs[col].kind {
                if v.fract() != 0.0 || *v < 0.0 || *v >= n_levels as f64 {
                    return Err(Error::InvalidCategory {
                        row,
                        col,
                        value: *v,
                        levels: n_levels,
                    });
                }
            }
        }
        Ok(MaskedDataset {
            values,
            mask,
            var_specs,
            n,
            d,
        })
    }

    /// Fully observed dataset.
    pub fn complete(values: Vec<f64>, var_specs: Vec<VariableSpec>, n: usize, d: usize) -> Result<Self> {
        let mask = vec![true; n * d];
        Self::new(values, mask, var_specs, n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn var_specs(&self) -> &[VariableSpec] {
        &self.var_specs
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.d + j]
    }

    /// Observed value or None. Never exposes the sentinel.
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        if self.is_observed(i, j) {
            Some(self.values[i * self.d + j])
        } else {
            None
        }
    }

    /// Observed (row, value) pairs of column j, in row order.
    pub fn observed_column(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.n)
            .filter_map(|i| self.value(i, j).map(|v| (i, v)))
            .collect()
    }

    /// Raw mask row-major; true = observed.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// True when every cell of column j is observed.
    pub fn column_fully_observed(&self, j: usize) -> bool {
        (0..self.n).all(|i| self.is_observed(i, j))
    }
}

/// Hard cluster assignment; every label lies in 0..k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("partition needs k >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for k={k}"
            )));
        }
        Ok(Partition { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Subjects per cluster.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Missing-data rates: one per column plus the overall cell rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSummary {
    pub per_column: Vec<f64>,
    pub overall: f64,
}

/// Fraction of masked cells per column and overall.
pub fn missingness_summary(data: &MaskedDataset) -> MissingnessSummary {
    let (n, d) = (data.n(), data.d());
    let mut per_column = vec![0.0; d];
    let mut total = 0usize;
    for j in 0..d {
        let miss = (0..n).filter(|&i| !data.is_observed(i, j)).count();
        per_column[j] = miss as f64 / n as f64;
        total += miss;
    }
    MissingnessSummary {
        per_column,
        overall: total as f64 / (n * d) as f64,
    }
}

/// Centers and scales each continuous column by its observed mean and sd
/// (denominator n_obs - 1), recording (mean, sd) in the variable specs.
/// Categorical columns pass through untouched.
pub fn standardize(data: &MaskedDataset) -> Result<MaskedDataset> {
    let (n, d) = (data.n(), data.d());
    let mut values = vec![f64::NAN; n * d];
    let mut mask = vec![false; n * d];
    let mut var_specs = data.var_specs().to_vec();

    for j in 0..d {
        if !var_specs[j].is_continuous() {
            for i in 0..n {
                if let Some(v) = data.value(i, j) {
                    values[i * d + j] = v;
                    mask[i * d + j] = true;
                }
            }
            continue;
        }
        let obs = data.observed_column(j);
        if obs.is_empty() {
            return Err(Error::EmptyColumn { col: j });
        }
        if obs.len() < 2 {
            return Err(Error::ConstantOrEmptyColumn { col: j });
        }
        let m = obs.iter().map(|&(_, v)| v).sum::<f64>() / obs.len() as f64;
        let ss = obs.iter().map(|&(_, v)| (v - m) * (v - m)).sum::<f64>();
        let sd = (ss / (obs.len() - 1) as f64).sqrt();
        if sd == 0.0 {
            return Err(Error::ConstantOrEmptyColumn { col: j });
        }
        for (i, v) in obs {
            values[i * d + j] = (v - m) / sd;
            mask[i * d + j] = true;
        }
        var_specs[j].standardization = Some((m, sd));
    }

    MaskedDataset::new(values, mask, var_specs, n, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn continuous_specs(d: usize) -> Vec<VariableSpec> {
        (0..d).map(|_| VariableSpec::continuous()).collect()
    }

    #[test]
    fn constant_column_cannot_standardize() {
        let data =
            MaskedDataset::complete(vec![2.0, 2.0, 2.0], continuous_specs(1), 3, 1).unwrap();
        match standardize(&data) {
            Err(Error::ConstantOrEmptyColumn { col: 0 }) => {}
            other => panic!("expected ConstantOrEmptyColumn, got {other:?}"),
        }
    }

    #[test]
    fn two_point_column_standardizes_to_unit_sd() {
        let data = MaskedDataset::complete(vec![0.0, 2.0], continuous_specs(1), 2, 1).unwrap();
        let std = standardize(&data).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(std.value(0, 0).unwrap(), -1.0 / s, epsilon = 1e-15);
        assert_abs_diff_eq!(std.value(1, 0).unwrap(), 1.0 / s, epsilon = 1e-15);
        assert_eq!(std.var_specs()[0].standardization, Some((1.0, s)));
    }

    #[test]
    fn standardize_skips_masked_cells() {
        let values = vec![1.0, f64::NAN, 3.0, 5.0];
        let mask = vec![true, false, true, true];
        let data = MaskedDataset::new(values, mask, continuous_specs(1), 4, 1).unwrap();
        let std = standardize(&data).unwrap();
        // observed {1,3,5}: mean 3, sd 2
        assert_abs_diff_eq!(std.value(0, 0).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(std.value(1, 0), None);
        assert_abs_diff_eq!(std.value(2, 0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(std.value(3, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(std.var_specs()[0].standardization, Some((3.0, 2.0)));
    }

    #[test]
    fn standardize_is_idempotent_up_to_roundoff() {
        let values = vec![0.3, -1.2, 2.5, 0.9, -0.4, 1.7];
        let data = MaskedDataset::complete(values, continuous_specs(1), 6, 1).unwrap();
        let once = standardize(&data).unwrap();
        let twice = standardize(&once).unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(
                once.value(i, 0).unwrap(),
                twice.value(i, 0).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn categorical_columns_pass_through() {
        let specs = vec![VariableSpec::continuous(), VariableSpec::categorical(2)];
        let values = vec![0.0, 1.0, 2.0, 0.0, 4.0, 1.0];
        let data = MaskedDataset::complete(values, specs, 3, 2).unwrap();
        let std = standardize(&data).unwrap();
        assert_eq!(std.value(0, 1), Some(1.0));
        assert_eq!(std.value(1, 1), Some(0.0));
        assert_eq!(std.var_specs()[1].standardization, None);
    }

    #[test]
    fn masked_garbage_is_normalized_away() {
        let mask = vec![true, false, true, true];
        let specs = continuous_specs(1);
        let a = MaskedDataset::new(vec![1.0, 777.0, 3.0, 5.0], mask.clone(), specs.clone(), 4, 1)
            .unwrap();
        let b = MaskedDataset::new(vec![1.0, -42.5, 3.0, 5.0], mask, specs, 4, 1).unwrap();
        let sa = standardize(&a).unwrap();
        let sb = standardize(&b).unwrap();
        for i in 0..4 {
            assert_eq!(
                sa.value(i, 0).map(f64::to_bits),
                sb.value(i, 0).map(f64::to_bits)
            );
        }
        assert_eq!(
            missingness_summary(&a).per_column,
            missingness_summary(&b).per_column
        );
    }

    #[test]
    fn categorical_values_validated() {
        let specs = vec![VariableSpec::categorical(2)];
        let err = MaskedDataset::complete(vec![0.0, 2.0], specs.clone(), 2, 1);
        assert!(matches!(err, Err(Error::InvalidCategory { .. })));
        let err = MaskedDataset::complete(vec![0.5], specs, 1, 1);
        assert!(matches!(err, Err(Error::InvalidCategory { .. })));
    }

    #[test]
    fn summary_counts_masked_cells() {
        let mask = vec![true, true, false, true, true, false];
        let values = vec![1.0, 0.0, 9.0, 2.0, 1.0, 9.0];
        let specs = continuous_specs(2);
        let data = MaskedDataset::new(values, mask, specs, 3, 2).unwrap();
        let s = missingness_summary(&data);
        assert_abs_diff_eq!(s.per_column[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.per_column[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.overall, 2.0 / 6.0, epsilon = 1e-15);
        let complete =
            MaskedDataset::complete(vec![1.0, 2.0], continuous_specs(1), 2, 1).unwrap();
        assert_eq!(missingness_summary(&complete).overall, 0.0);
    }

    #[test]
    fn partition_validates_labels() {
        assert!(Partition::new(vec![0, 1, 2], 3).is_ok());
        assert!(Partition::new(vec![0, 3], 3).is_err());
        assert!(Partition::new(vec![], 0).is_err());
        let p = Partition::new(vec![0, 1, 1, 0, 1], 2).unwrap();
        assert_eq!(p.sizes(), vec![2, 3]);
    }
}

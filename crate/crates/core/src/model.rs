//! Mixture parameters and the smoothed-likelihood machinery.
//!
//! A component k is described by its weight pi_k, per-variable observation
//! probabilities tau_kj, and per-variable conditional distributions for the
//! observed values. For continuous variables the component log-density enters
//! the likelihood through the smoothing operator S; categorical variables
//! contribute their log-probabilities unsmoothed. The missingness pattern
//! contributes r_ij ln tau_kj + (1-r_ij) ln(1-tau_kj).
//!
//! Smoothed log-densities are evaluated at observed points by exact trapezoid
//! quadrature of the kernel against ln p over the grid. The same kernel rows
//! drive the weighted-KDE parameter update, which makes each density update
//! the exact maximizer of the surrogate induced by this evaluation, and the
//! iteration's ascent property holds to floating-point roundoff.

use crate::data::{MaskedDataset, Partition, VarKind};
use crate::error::{Error, Result};
use crate::estimator::{pi_floor, tau_floor};
use crate::kernel::{Grid, GridDensity, GridTable, Kernel, DENSITY_FLOOR_REL};
use serde::{Deserialize, Serialize};

/// Floor applied inside logs of category probabilities.
pub const CATEGORY_PROB_FLOOR: f64 = 1e-12;

/// Conditional distribution of one variable within one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CondDist {
    Continuous(GridDensity),
    Categorical(Vec<f64>),
}

/// Full parameter set of a K-component mixture over d variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    k: usize,
    d: usize,
    pi: Vec<f64>,
    tau: Vec<f64>,
    dens: Vec<CondDist>,
    kernel: Kernel,
    grids: Vec<Option<Grid>>,
}

impl MixtureParams {
    pub fn new(
        pi: Vec<f64>,
        tau: Vec<f64>,
        dens: Vec<CondDist>,
        kernel: Kernel,
        grids: Vec<Option<Grid>>,
    ) -> Result<Self> {
        let k = pi.len();
        let d = grids.len();
        if k == 0 || d == 0 {
            return Err(Error::InvalidConfig("mixture needs k >= 1 and d >= 1".into()));
        }
        if tau.len() != k * d || dens.len() != k * d {
            return Err(Error::ShapeMismatch(format!(
                "expected {k}x{d} tau and densities, got {} and {}",
                tau.len(),
                dens.len()
            )));
        }
        if pi.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidConfig("pi entries must be positive".into()));
        }
        if tau.iter().any(|t| !t.is_finite() || *t <= 0.0 || *t > 1.0) {
            return Err(Error::InvalidConfig("tau entries must lie in (0, 1]".into()));
        }
        for j in 0..d {
            for kk in 0..k {
                match (&dens[kk * d + j], &grids[j]) {
                    (CondDist::Continuous(p), Some(g)) => {
                        if p.grid() != g {
                            return Err(Error::ShapeMismatch(format!(
                                "component {kk}, variable {j}: density grid differs from variable grid"
                            )));
                        }
                    }
                    (CondDist::Categorical(q), None) => {
                        if q.is_empty() {
                            return Err(Error::InvalidConfig(format!(
                                "variable {j}: empty category probabilities"
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::ShapeMismatch(format!(
                            "variable {j}: distribution kind disagrees with grid presence"
                        )));
                    }
                }
            }
        }
        Ok(MixtureParams {
            k,
            d,
            pi,
            tau,
            dens,
            kernel,
            grids,
        })
    }

    /// Re-runs every construction check on a value that may have bypassed
    /// `new` (deserialization); also verifies the stored shape fields,
    /// bandwidth, and density invariants.
    pub fn revalidated(self) -> Result<Self> {
        if self.pi.len() != self.k || self.grids.len() != self.d {
            return Err(Error::ShapeMismatch(format!(
                "stored shape ({}, {}) disagrees with {} proportions and {} grids",
                self.k,
                self.d,
                self.pi.len(),
                self.grids.len()
            )));
        }
        if !(self.kernel.h.is_finite() && self.kernel.h > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be > 0, got {}",
                self.kernel.h
            )));
        }
        let sum: f64 = self.pi.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "proportions sum to {sum}, not 1"
            )));
        }
        let rebuilt = Self::new(self.pi, self.tau, self.dens, self.kernel, self.grids)?;
        for j in 0..rebuilt.d {
            for k in 0..rebuilt.k {
                match &rebuilt.dens[k * rebuilt.d + j] {
                    CondDist::Continuous(p) => p.validate()?,
                    CondDist::Categorical(q) => {
                        let total: f64 = q.iter().sum();
                        if q.iter().any(|&x| !(x.is_finite() && x > 0.0))
                            || (total - 1.0).abs() > 1e-6
                        {
                            return Err(Error::InvalidConfig(format!(
                                "component {k}, variable {j}: category probabilities invalid"
                            )));
                        }
                    }
                }
            }
        }
        Ok(rebuilt)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn tau(&self, k: usize, j: usize) -> f64 {
        self.tau[k * self.d + j]
    }

    pub fn tau_matrix(&self) -> &[f64] {
        &self.tau
    }

    pub fn dens(&self, k: usize, j: usize) -> &CondDist {
        &self.dens[k * self.d + j]
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self, j: usize) -> Option<&Grid> {
        self.grids[j].as_ref()
    }

    pub fn grids(&self) -> &[Option<Grid>] {
        &self.grids
    }

    /// Same mixture with components relabeled by `perm` (new index k holds
    /// what was at perm[k]).
    pub fn permute_components(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(Error::ShapeMismatch("permutation length != k".into()));
        }
        let mut pi = Vec::with_capacity(self.k);
        let mut tau = Vec::with_capacity(self.k * self.d);
        let mut dens = Vec::with_capacity(self.k * self.d);
        for &src in perm {
            pi.push(self.pi[src]);
            for j in 0..self.d {
                tau.push(self.tau[src * self.d + j]);
                dens.push(self.dens[src * self.d + j].clone());
            }
        }
        MixtureParams::new(pi, tau, dens, self.kernel, self.grids.clone())
    }

    /// Structural and numeric invariants expected after any update step:
    /// pi on the simplex, tau inside its clamps (exactly 1 only on fully
    /// observed columns), densities normalized and floored.
    pub fn validate(&self, data: &MaskedDataset) -> Result<()> {
        if data.d() != self.d {
            return Err(Error::ShapeMismatch(format!(
                "params have d={}, data has d={}",
                self.d,
                data.d()
            )));
        }
        let n = data.n();
        let sum: f64 = self.pi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("pi sums to {sum}")));
        }
        let (pf, tf) = (pi_floor(n), tau_floor(n));
        if self.pi.iter().any(|&p| p <= 0.0 || p < pf * (1.0 - 1e-6)) {
            return Err(Error::InvalidModel("pi entry below floor".into()));
        }
        for j in 0..self.d {
            let fully = data.column_fully_observed(j);
            for k in 0..self.k {
                let t = self.tau(k, j);
                if fully {
                    if t != 1.0 {
                        return Err(Error::InvalidModel(format!(
                            "tau[{k},{j}] = {t} but column {j} is fully observed"
                        )));
                    }
                } else if !(tf..=1.0 - tf).contains(&t) {
                    return Err(Error::InvalidModel(format!(
                        "tau[{k},{j}] = {t} outside [{tf}, {}]",
                        1.0 - tf
                    )));
                }
            }
        }
        for (idx, dist) in self.dens.iter().enumerate() {
            match dist {
                CondDist::Continuous(p) => p.validate()?,
                CondDist::Categorical(q) => {
                    let s: f64 = q.iter().sum();
                    if (s - 1.0).abs() > 1e-9 || q.iter().any(|&v| v < 0.0) {
                        return Err(Error::InvalidModel(format!(
                            "category probabilities at slot {idx} sum to {s}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Posterior component probabilities, one row per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix {
    t: Vec<f64>,
    n: usize,
    k: usize,
}

impl ResponsibilityMatrix {
    pub fn new(t: Vec<f64>, n: usize, k: usize) -> Result<Self> {
        if t.len() != n * k || k == 0 || n == 0 {
            return Err(Error::ShapeMismatch(format!(
                "expected {n}x{k} responsibilities, got {} values",
                t.len()
            )));
        }
        for i in 0..n {
            let row = &t[i * k..(i + 1) * k];
            if row.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
                return Err(Error::InvalidConfig(format!("row {i} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!("row {i} sums to {s}")));
            }
        }
        Ok(ResponsibilityMatrix { t, n, k })
    }

    pub(crate) fn new_unchecked(t: Vec<f64>, n: usize, k: usize) -> Self {
        ResponsibilityMatrix { t, n, k }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.t[i * self.k + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.k..(i + 1) * self.k]
    }

    /// Sum of each component's responsibilities over subjects.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        for i in 0..self.n {
            for k in 0..self.k {
                sums[k] += self.get(i, k);
            }
        }
        sums
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }
}

/// ln tau with tau = 1 mapping to exactly 0.
#[inline]
fn ln_tau(t: f64) -> f64 {
    if t == 1.0 {
        0.0
    } else {
        t.ln()
    }
}

/// ln(1 - tau), accurate near tau = 0.
#[inline]
fn ln_1m_tau(t: f64) -> f64 {
    (-t).ln_1p()
}

/// One component's smoothed log-density at row i, including missingness
/// terms: sum of r_ij ln tau + (1-r_ij) ln(1-tau) plus smoothed continuous
/// log-densities and raw categorical log-probabilities for observed cells.
pub fn log_component_smoothed(
    params: &MixtureParams,
    data: &MaskedDataset,
    i: usize,
    k: usize,
) -> Result<f64> {
    check_compat(params, data)?;
    if i >= data.n() || k >= params.k() {
        return Err(Error::ShapeMismatch(format!("row {i} or component {k} out of range")));
    }
    let mut acc = 0.0;
    for j in 0..data.d() {
        let tau = params.tau(k, j);
        match data.value(i, j) {
            None => acc += ln_1m_tau(tau),
            Some(x) => {
                acc += ln_tau(tau);
                match params.dens(k, j) {
                    CondDist::Continuous(p) => {
                        acc += smoothed_log_density_at(p, params.kernel(), x);
                    }
                    CondDist::Categorical(q) => {
                        let level = x as usize;
                        if level >= q.len() {
                            return Err(Error::InvalidCategory {
                                row: i,
                                col: j,
                                value: x,
                                levels: q.len(),
                            });
                        }
                        acc += q[level].max(CATEGORY_PROB_FLOOR).ln();
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// (S ln p)(x) by trapezoid quadrature of the kernel against ln p.
pub fn smoothed_log_density_at(p: &GridDensity, kernel: &Kernel, x: f64) -> f64 {
    let grid = p.grid();
    let mut acc = 0.0;
    for (u, v) in p.values().iter().enumerate() {
        acc += kernel.scaled(x - grid.node(u)) * (grid.trapezoid_weight(u) * v.ln());
    }
    acc
}

/// Node-wise S ln p table for reporting; data points are evaluated by the
/// quadrature above, not by interpolating this table.
pub fn smoothed_log_density_table(p: &GridDensity, kernel: &Kernel) -> GridTable {
    crate::kernel::smooth_log_density(p, kernel)
}

fn check_compat(params: &MixtureParams, data: &MaskedDataset) -> Result<()> {
    if params.d() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "params have d={}, data has d={}",
            params.d(),
            data.d()
        )));
    }
    for (j, spec) in data.var_specs().iter().enumerate() {
        let is_cont = matches!(spec.kind, VarKind::Continuous);
        if is_cont != params.grid(j).is_some() {
            return Err(Error::ShapeMismatch(format!(
                "variable {j}: kind disagrees between params and data"
            )));
        }
    }
    Ok(())
}

/// Kernel rows cached per continuous variable: row o holds K_h(x_o - u_g)
/// over grid nodes for the o-th observed point of that column. The same rows
/// serve smoothed-log-density evaluation and the weighted-KDE update.
pub(crate) struct Evaluator<'a> {
    pub(crate) data: &'a MaskedDataset,
    pub(crate) cont: Vec<ContColumn>,
}

pub(crate) struct ContColumn {
    pub(crate) j: usize,
    pub(crate) grid: Grid,
    pub(crate) obs_rows: Vec<usize>,
    pub(crate) kermat: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(
        data: &'a MaskedDataset,
        kernel: &Kernel,
        grids: &[Option<Grid>],
    ) -> Result<Self> {
        if grids.len() != data.d() {
            return Err(Error::ShapeMismatch(format!(
                "{} grids for {} variables",
                grids.len(),
                data.d()
            )));
        }
        let mut cont = Vec::new();
        for (j, maybe_grid) in grids.iter().enumerate() {
            let grid = match maybe_grid {
                Some(g) => *g,
                None => continue,
            };
            // a column with no observed values contributes only tau terms;
            // its kernel row block is empty
            let obs = data.observed_column(j);
            let m = grid.m;
            let mut kermat = vec![0.0; obs.len() * m];
            let kernel = *kernel;
            for (o, &(_, x)) in obs.iter().enumerate() {
                for g in 0..m {
                    kermat[o * m + g] = kernel.scaled(x - grid.node(g));
                }
            }
            cont.push(ContColumn {
                j,
                grid,
                obs_rows: obs.iter().map(|&(i, _)| i).collect(),
                kermat,
            });
        }
        Ok(Evaluator { data, cont })
    }

    /// Log numerators ln pi_k + ln (N g_k)(x_i, r_i) for every (i, k).
    pub(crate) fn log_numerators(&self, params: &MixtureParams) -> Result<Vec<f64>> {
        check_compat(params, self.data)?;
        let (n, d, kk) = (self.data.n(), self.data.d(), params.k());
        let ln_pi: Vec<f64> = params.pi().iter().map(|p| p.ln()).collect();
        let mut lognum = vec![0.0; n * kk];

        // missingness terms plus categorical contributions
        for i in 0..n {
            for k in 0..kk {
                let mut acc = ln_pi[k];
                for j in 0..d {
                    let tau = params.tau(k, j);
                    match self.data.value(i, j) {
                        None => acc += ln_1m_tau(tau),
                        Some(x) => {
                            acc += ln_tau(tau);
                            if let CondDist::Categorical(q) = params.dens(k, j) {
                                let level = x as usize;
                                if level >= q.len() {
                                    return Err(Error::InvalidCategory {
                                        row: i,
                                        col: j,
                                        value: x,
                                        levels: q.len(),
                                    });
                                }
                                acc += q[level].max(CATEGORY_PROB_FLOOR).ln();
                            }
                        }
                    }
                }
                lognum[i * kk + k] = acc;
            }
        }

        // smoothed continuous contributions via the cached kernel rows
        for col in &self.cont {
            let m = col.grid.m;
            for k in 0..kk {
                let p = match params.dens(k, col.j) {
                    CondDist::Continuous(p) => p,
                    CondDist::Categorical(_) => {
                        return Err(Error::ShapeMismatch(format!(
                            "variable {} expected continuous density",
                            col.j
                        )))
                    }
                };
                let wlnp: Vec<f64> = p
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(u, v)| col.grid.trapezoid_weight(u) * v.ln())
                    .collect();
                for (o, &i) in col.obs_rows.iter().enumerate() {
                    let row = &col.kermat[o * m..(o + 1) * m];
                    let mut dot = 0.0;
                    for (kv, wv) in row.iter().zip(&wlnp) {
                        dot += kv * wv;
                    }
                    lognum[i * kk + k] += dot;
                }
            }
        }
        Ok(lognum)
    }

    /// Responsibilities and the smoothed log-likelihood in one pass.
    pub(crate) fn e_step(&self, params: &MixtureParams) -> Result<(ResponsibilityMatrix, f64)> {
        let lognum = self.log_numerators(params)?;
        let (n, kk) = (self.data.n(), params.k());
        let mut t = lognum;
        let mut loglik = 0.0;
        for i in 0..n {
            let row = &mut t[i * kk..(i + 1) * kk];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
            loglik += max + sum.ln();
        }
        Ok((ResponsibilityMatrix::new_unchecked(t, n, kk), loglik))
    }
}

/// Posterior component probabilities for every subject.
pub fn responsibilities(
    params: &MixtureParams,
    data: &MaskedDataset,
) -> Result<ResponsibilityMatrix> {
    let ev = Evaluator::new(data, params.kernel(), params.grids())?;
    Ok(ev.e_step(params)?.0)
}

/// Smoothed log-likelihood sum_i ln sum_k pi_k (N g_k)(x_i, r_i).
pub fn smoothed_loglik(params: &MixtureParams, data: &MaskedDataset) -> Result<f64> {
    let ev = Evaluator::new(data, params.kernel(), params.grids())?;
    Ok(ev.e_step(params)?.1)
}

/// Maximum-responsibility assignment; ties go to the lowest index.
pub fn classify(t: &ResponsibilityMatrix) -> Partition {
    let mut labels = Vec::with_capacity(t.n());
    for i in 0..t.n() {
        let row = t.row(i);
        let mut best = 0;
        for k in 1..t.k() {
            if row[k] > row[best] {
                best = k;
            }
        }
        labels.push(best);
    }
    Partition::new(labels, t.k()).expect("argmax labels are always in range")
}

/// Runtime identifiability checks; returns human-readable warnings rather
/// than failing, since they flag risk, not certain error.
pub fn validate_identifiability(params: &MixtureParams, data: &MaskedDataset) -> Vec<String> {
    let mut warnings = Vec::new();
    if params.d() < 3 {
        warnings.push(format!(
            "only {} variable(s); identifiability of nonparametric components needs at least 3",
            params.d()
        ));
    }
    let n = data.n();
    for (k, &p) in params.pi().iter().enumerate() {
        if p <= pi_floor(n) * (1.0 + 1e-9) {
            warnings.push(format!("component {k} proportion {p:.3e} sits at its floor"));
        }
    }
    for j in 0..params.d() {
        if data.column_fully_observed(j) {
            continue;
        }
        for k in 0..params.k() {
            let t = params.tau(k, j);
            if t <= tau_floor(n) * (1.0 + 1e-9) {
                warnings.push(format!(
                    "observation probability for component {k}, variable {j} is at its floor"
                ));
            }
        }
    }
    for a in 0..params.k() {
        for b in (a + 1)..params.k() {
            let mut all_close = true;
            for j in 0..params.d() {
                let dist = match (params.dens(a, j), params.dens(b, j)) {
                    (CondDist::Continuous(pa), CondDist::Continuous(pb)) => pa
                        .values()
                        .iter()
                        .zip(pb.values())
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max),
                    (CondDist::Categorical(qa), CondDist::Categorical(qb)) => qa
                        .iter()
                        .zip(qb)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max),
                    _ => f64::INFINITY,
                };
                if dist >= 1e-3 {
                    all_close = false;
                    break;
                }
            }
            if all_close {
                warnings.push(format!(
                    "components {a} and {b} have nearly identical densities on every variable"
                ));
            }
        }
    }
    warnings
}

/// Relative floor used when validating stored densities.
pub fn density_floor_rel() -> f64 {
    DENSITY_FLOOR_REL
}

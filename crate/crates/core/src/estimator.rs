//! MM estimation of the mixture: closed-form updates for proportions,
//! observation probabilities, and conditional distributions, iterated from
//! random starts until the smoothed log-likelihood stalls.
//!
//! Each iteration computes responsibilities at the current parameters and
//! then maximizes the resulting surrogate exactly: proportions by column
//! means, observation probabilities by weighted observed fractions, and
//! densities by weighted kernel estimates. Because the surrogate is built
//! from the same kernel-by-grid quadrature used to evaluate the likelihood,
//! the likelihood never decreases beyond roundoff.

use crate::data::{MaskedDataset, VarKind};
use crate::error::{Error, Result};
use crate::kernel::{build_grid, default_bandwidth, weighted_kde, Grid, GridDensity, Kernel};
use crate::model::{
    classify, validate_identifiability, CondDist, Evaluator, MixtureParams,
    ResponsibilityMatrix, CATEGORY_PROB_FLOOR,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Lower clamp on component proportions.
pub fn pi_floor(n: usize) -> f64 {
    1.0 / (100.0 * n as f64)
}

/// Lower clamp on observation probabilities; the upper clamp is its mirror.
pub fn tau_floor(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// A component whose responsibility mass falls below this is reseeded.
const DEGENERATE_COLSUM: f64 = 1e-3;

/// Knobs for a fit. Counts must be at least 1 and rel_tol positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub n_starts: usize,
    pub short_iters: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub grid_m: usize,
    /// Overrides the n^(-1/5) default when set.
    pub bandwidth: Option<f64>,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        FitConfig {
            k,
            n_starts: 20,
            short_iters: 50,
            max_iters: 500,
            rel_tol: 1e-6,
            grid_m: 512,
            bandwidth: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.n_starts < 1 || self.short_iters < 1 || self.max_iters < 1 {
            return Err(Error::InvalidConfig(
                "k, n_starts, short_iters, and max_iters must be >= 1".into(),
            ));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.grid_m < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid_m must be >= 2, got {}",
                self.grid_m
            )));
        }
        if let Some(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "bandwidth override must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a fit: final parameters, responsibilities at those parameters,
/// the induced partition, and the log-likelihood trace of the winning start.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: MixtureParams,
    pub t: ResponsibilityMatrix,
    pub partition: crate::data::Partition,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub best_start: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Smoothed log-likelihood at the returned parameters.
    pub fn loglik(&self) -> f64 {
        *self
            .loglik_trace
            .last()
            .expect("a fit always evaluates the likelihood at least once")
    }
}

/// Proportion update: column means of the responsibilities, clamped at the
/// floor with the excess redistributed so the result stays on the simplex.
pub fn update_pi(t: &ResponsibilityMatrix) -> Vec<f64> {
    let (n, k) = (t.n(), t.k());
    let floor = pi_floor(n);
    let mut pi: Vec<f64> = t
        .column_sums()
        .iter()
        .map(|s| s / n as f64)
        .collect();
    loop {
        let low: Vec<bool> = pi.iter().map(|&p| p <= floor).collect();
        let mut fixed = 0.0;
        let mut free = 0.0;
        for (is_low, &p) in low.iter().zip(&pi) {
            if *is_low {
                fixed += floor;
            } else {
                free += p;
            }
        }
        if free <= 0.0 {
            // not reachable for valid responsibilities; keep a sane fallback
            return vec![1.0 / k as f64; k];
        }
        let scale = (1.0 - fixed) / free;
        let mut clipped = false;
        for (p, is_low) in pi.iter_mut().zip(&low) {
            if *is_low {
                *p = floor;
            } else {
                *p *= scale;
                if *p <= floor {
                    clipped = true;
                }
            }
        }
        if !clipped {
            return pi;
        }
    }
}

/// Observation-probability update: tau_kj = sum_i r_ij t_ik / sum_i t_ik,
/// clamped away from 0 and 1 except on fully observed columns, which get
/// exactly 1.
pub fn update_tau(t: &ResponsibilityMatrix, data: &MaskedDataset) -> Result<Vec<f64>> {
    if t.n() != data.n() {
        return Err(Error::ShapeMismatch(format!(
            "responsibilities for {} rows, data has {}",
            t.n(),
            data.n()
        )));
    }
    let (n, kk, d) = (data.n(), t.k(), data.d());
    let tf = tau_floor(n);
    let colsums = t.column_sums();
    for (k, &s) in colsums.iter().enumerate() {
        if s <= 0.0 {
            return Err(Error::DegenerateWeights { col: k });
        }
    }
    let mut tau = vec![0.0; kk * d];
    for j in 0..d {
        let fully = data.column_fully_observed(j);
        for k in 0..kk {
            tau[k * d + j] = if fully {
                1.0
            } else {
                let mut num = 0.0;
                for i in 0..n {
                    if data.is_observed(i, j) {
                        num += t.get(i, k);
                    }
                }
                (num / colsums[k]).clamp(tf, 1.0 - tf)
            };
        }
    }
    Ok(tau)
}

/// Conditional-distribution update for one (component, variable) pair with
/// weights r_ij t_ik: a weighted KDE for continuous variables, weighted level
/// frequencies (floored, renormalized) for categorical ones.
pub fn update_density(
    t: &ResponsibilityMatrix,
    data: &MaskedDataset,
    k: usize,
    j: usize,
    kernel: &Kernel,
    grid: Option<&Grid>,
) -> Result<CondDist> {
    if t.n() != data.n() || k >= t.k() || j >= data.d() {
        return Err(Error::ShapeMismatch(format!(
            "density update for component {k}, variable {j} out of range"
        )));
    }
    let obs = data.observed_column(j);
    match data.var_specs()[j].kind {
        VarKind::Continuous => {
            let grid = grid.ok_or_else(|| {
                Error::ShapeMismatch(format!("variable {j} is continuous but no grid was given"))
            })?;
            let points: Vec<f64> = obs.iter().map(|&(_, x)| x).collect();
            let weights: Vec<f64> = obs.iter().map(|&(i, _)| t.get(i, k)).collect();
            let dens = weighted_kde(&points, &weights, kernel, grid).map_err(|e| match e {
                Error::DegenerateWeights { .. } => Error::DegenerateWeights { col: j },
                other => other,
            })?;
            Ok(CondDist::Continuous(dens))
        }
        VarKind::Categorical { n_levels } => {
            let mut counts = vec![0.0; n_levels];
            for &(i, x) in &obs {
                counts[x as usize] += t.get(i, k);
            }
            let total: f64 = counts.iter().sum();
            if total <= 0.0 {
                return Err(Error::DegenerateWeights { col: j });
            }
            for c in counts.iter_mut() {
                *c = (*c / total).max(CATEGORY_PROB_FLOOR);
            }
            let total: f64 = counts.iter().sum();
            for c in counts.iter_mut() {
                *c /= total;
            }
            Ok(CondDist::Categorical(counts))
        }
    }
}

/// One full iteration: responsibilities at `params`, then all three updates
/// computed from them. Returns the updated parameters and the
/// responsibilities they were derived from.
pub fn mm_step(
    params: &MixtureParams,
    data: &MaskedDataset,
) -> Result<(MixtureParams, ResponsibilityMatrix)> {
    let ev = Evaluator::new(data, params.kernel(), params.grids())?;
    let (t, _) = ev.e_step(params)?;
    let pi = update_pi(&t);
    let tau = update_tau(&t, data)?;
    let mut dens = Vec::with_capacity(params.k() * data.d());
    for k in 0..params.k() {
        for j in 0..data.d() {
            dens.push(update_density(&t, data, k, j, params.kernel(), params.grid(j))?);
        }
    }
    let next = MixtureParams::new(pi, tau, dens, *params.kernel(), params.grids().to_vec())?;
    Ok((next, t))
}

/// Cached variant of the full M-step used inside `fit`: reuses the kernel
/// rows held by the evaluator instead of recomputing them. Produces values
/// bit-identical to the public updates. Err lists components that lost all
/// weight and need reseeding.
fn m_step_cached(
    ev: &Evaluator,
    t: &ResponsibilityMatrix,
    kernel: &Kernel,
    grids: &[Option<Grid>],
) -> std::result::Result<MixtureParams, Vec<usize>> {
    let data = ev.data;
    let (kk, d) = (t.k(), data.d());
    let colsums = t.column_sums();
    let starved: Vec<usize> = (0..kk).filter(|&k| colsums[k] < DEGENERATE_COLSUM).collect();
    if !starved.is_empty() {
        return Err(starved);
    }
    let pi = update_pi(t);
    let tau = update_tau(t, data).expect("positive column sums were just checked");

    let mut cont_index = vec![None; d];
    for (c, col) in ev.cont.iter().enumerate() {
        cont_index[col.j] = Some(c);
    }
    let mut dens = Vec::with_capacity(kk * d);
    for k in 0..kk {
        for j in 0..d {
            match cont_index[j] {
                Some(c) => {
                    let col = &ev.cont[c];
                    let m = col.grid.m;
                    let mut raw = vec![0.0; m];
                    let mut total = 0.0;
                    for (o, &i) in col.obs_rows.iter().enumerate() {
                        let w = t.get(i, k);
                        total += w;
                        if w == 0.0 {
                            continue;
                        }
                        let row = &col.kermat[o * m..(o + 1) * m];
                        for (acc, &kv) in raw.iter_mut().zip(row) {
                            *acc += w * kv;
                        }
                    }
                    if total <= 0.0 {
                        return Err(vec![k]);
                    }
                    for v in raw.iter_mut() {
                        *v /= total;
                    }
                    match GridDensity::from_raw(col.grid, raw) {
                        Ok(p) => dens.push(CondDist::Continuous(p)),
                        Err(_) => return Err(vec![k]),
                    }
                }
                None => {
                    match update_density(t, data, k, j, kernel, None) {
                        Ok(cd) => dens.push(cd),
                        Err(_) => return Err(vec![k]),
                    }
                }
            }
        }
    }
    Ok(MixtureParams::new(pi, tau, dens, *kernel, grids.to_vec())
        .expect("updates produce structurally valid parameters"))
}

struct RunState {
    params: MixtureParams,
    t: ResponsibilityMatrix,
    trace: Vec<f64>,
    iters: usize,
    converged: bool,
    reseeds: usize,
    rng: ChaCha8Rng,
}

/// Redraws the listed components' responsibilities uniformly at random and
/// renormalizes each row.
fn reseed_components(t: &mut ResponsibilityMatrix, ks: &[usize], rng: &mut ChaCha8Rng) {
    let (n, kk) = (t.n(), t.k());
    let vals = t.values_mut();
    for i in 0..n {
        for &k in ks {
            vals[i * kk + k] = rng.gen::<f64>();
        }
        let row = &mut vals[i * kk..(i + 1) * kk];
        let s: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= s;
        }
    }
}

/// M-step with the degenerate-component policy: reseed once per run, abandon
/// on the second occurrence. Returns None when the run should be abandoned.
/// Sets `reseeded` when the responsibilities were redrawn.
fn m_step_or_reseed(
    ev: &Evaluator,
    t: &mut ResponsibilityMatrix,
    kernel: &Kernel,
    grids: &[Option<Grid>],
    reseeds: &mut usize,
    rng: &mut ChaCha8Rng,
    reseeded: &mut bool,
) -> Option<MixtureParams> {
    match m_step_cached(ev, t, kernel, grids) {
        Ok(p) => Some(p),
        Err(ks) => {
            if *reseeds >= 1 {
                return None;
            }
            *reseeds += 1;
            *reseeded = true;
            reseed_components(t, &ks, rng);
            m_step_cached(ev, t, kernel, grids).ok()
        }
    }
}

/// Runs MM iterations until convergence or the iteration budget; the budget
/// counts likelihood evaluations since the start began. Returns false when
/// the run was abandoned as degenerate.
fn advance<F>(
    state: &mut RunState,
    ev: &Evaluator,
    kernel: &Kernel,
    grids: &[Option<Grid>],
    rel_tol: f64,
    budget: usize,
    inspect: &mut F,
) -> Result<bool>
where
    F: FnMut(&MixtureParams, &ResponsibilityMatrix, f64),
{
    if state.trace.is_empty() {
        let (t, ll) = ev.e_step(&state.params)?;
        inspect(&state.params, &t, ll);
        state.t = t;
        state.trace.push(ll);
        state.iters += 1;
    }
    while !state.converged && state.iters < budget {
        let mut reseeded = false;
        match m_step_or_reseed(
            ev,
            &mut state.t,
            kernel,
            grids,
            &mut state.reseeds,
            &mut state.rng,
            &mut reseeded,
        ) {
            Some(p) => state.params = p,
            None => return Ok(false),
        }
        if reseeded {
            // the monotone segment restarts at the reseeded parameters
            state.trace.clear();
        }
        let (t, ll) = ev.e_step(&state.params)?;
        inspect(&state.params, &t, ll);
        let prev = state.trace.last().copied();
        state.t = t;
        state.trace.push(ll);
        state.iters += 1;
        if let Some(p) = prev {
            if (ll - p).abs() <= rel_tol * p.abs().max(1.0) {
                state.converged = true;
            }
        }
    }
    Ok(true)
}

fn start_run(
    ev: &Evaluator,
    kernel: &Kernel,
    grids: &[Option<Grid>],
    k: usize,
    seed: u64,
) -> Option<RunState> {
    let data = ev.data;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n();
    let mut rows = Vec::with_capacity(n * k);
    for _ in 0..n {
        let base = rows.len();
        let mut sum = 0.0;
        for _ in 0..k {
            let e: f64 = rng.sample(Exp1);
            rows.push(e);
            sum += e;
        }
        for v in &mut rows[base..] {
            *v /= sum;
        }
    }
    let mut t = ResponsibilityMatrix::new_unchecked(rows, n, k);
    let mut reseeds = 0;
    let mut reseeded = false;
    let params = m_step_or_reseed(ev, &mut t, kernel, grids, &mut reseeds, &mut rng, &mut reseeded)?;
    Some(RunState {
        params,
        t,
        trace: Vec::new(),
        iters: 0,
        converged: false,
        reseeds,
        rng,
    })
}

/// Multi-start MM fit: every start runs `short_iters` iterations, the best
/// by smoothed log-likelihood continues until convergence or `max_iters`
/// total iterations. Deterministic given the seed.
pub fn fit(data: &MaskedDataset, config: &FitConfig) -> Result<FitResult> {
    fit_with_inspect(data, config, |_, _, _| {})
}

/// `fit` with a callback invoked at every likelihood evaluation of every
/// start, receiving the parameters being evaluated, the responsibilities at
/// them, and the smoothed log-likelihood.
pub fn fit_with_inspect<F>(
    data: &MaskedDataset,
    config: &FitConfig,
    mut inspect: F,
) -> Result<FitResult>
where
    F: FnMut(&MixtureParams, &ResponsibilityMatrix, f64),
{
    config.validate()?;
    let n = data.n();
    if n < config.k {
        return Err(Error::InvalidConfig(format!(
            "cannot fit {} components to {n} subjects",
            config.k
        )));
    }
    let kernel = Kernel::gaussian(config.bandwidth.unwrap_or_else(|| default_bandwidth(n)))?;
    let mut grids: Vec<Option<Grid>> = Vec::with_capacity(data.d());
    for j in 0..data.d() {
        match data.var_specs()[j].kind {
            VarKind::Continuous => {
                let values: Vec<f64> = data.observed_column(j).iter().map(|&(_, x)| x).collect();
                let grid = build_grid(&values, &kernel, config.grid_m).map_err(|e| match e {
                    Error::EmptyColumn { .. } => Error::EmptyColumn { col: j },
                    other => other,
                })?;
                grids.push(Some(grid));
            }
            VarKind::Categorical { .. } => {
                if data.observed_column(j).is_empty() {
                    return Err(Error::EmptyColumn { col: j });
                }
                grids.push(None);
            }
        }
    }
    let ev = Evaluator::new(data, &kernel, &grids)?;

    let mut best: Option<(usize, RunState)> = None;
    let mut warnings = Vec::new();
    let short_budget = config.short_iters.min(config.max_iters);
    for s in 0..config.n_starts {
        let seed = derive_seed(config.seed, s as u64);
        let mut state = match start_run(&ev, &kernel, &grids, config.k, seed) {
            Some(st) => st,
            None => {
                warnings.push(format!("start {s} abandoned: degenerate component at init"));
                continue;
            }
        };
        let alive = advance(
            &mut state,
            &ev,
            &kernel,
            &grids,
            config.rel_tol,
            short_budget,
            &mut inspect,
        )?;
        if !alive {
            warnings.push(format!("start {s} abandoned: repeated degenerate component"));
            continue;
        }
        let ll = *state.trace.last().expect("advance always evaluates once");
        let better = match &best {
            None => true,
            Some((_, b)) => ll > *b.trace.last().expect("nonempty trace"),
        };
        if better {
            best = Some((s, state));
        }
    }
    let (best_start, mut state) = best.ok_or_else(|| Error::FitFailed {
        starts: config.n_starts,
        diagnostics: warnings.join("; "),
    })?;
    let alive = advance(
        &mut state,
        &ev,
        &kernel,
        &grids,
        config.rel_tol,
        config.max_iters,
        &mut inspect,
    )?;
    if !alive {
        return Err(Error::FitFailed {
            starts: config.n_starts,
            diagnostics: format!(
                "winning start {best_start} degenerated during continuation; {}",
                warnings.join("; ")
            ),
        });
    }
    if state.reseeds > 0 {
        warnings.push(format!(
            "start {best_start} reseeded a degenerate component; trace restarts there"
        ));
    }
    warnings.extend(validate_identifiability(&state.params, data));
    let partition = classify(&state.t);
    Ok(FitResult {
        params: state.params,
        t: state.t,
        partition,
        loglik_trace: state.trace,
        converged: state.converged,
        best_start,
        warnings,
    })
}

/// One row of the model-selection table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KCandidate {
    pub k: usize,
    pub loglik: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectKResult {
    pub selected: usize,
    pub table: Vec<KCandidate>,
}

/// Fits every K in [k_min, k_max] and picks the elbow: the smallest K whose
/// gain to K+1 falls below 10% of the largest single-step gain. Falls back
/// to the smallest fitted K when no step gains anything, and to the largest
/// when every step keeps gaining.
pub fn select_k(
    data: &MaskedDataset,
    k_min: usize,
    k_max: usize,
    config: &FitConfig,
) -> Result<SelectKResult> {
    if k_min < 1 || k_min > k_max || k_max > data.n() {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= k_min <= k_max <= n, got [{k_min}, {k_max}] with n = {}",
            data.n()
        )));
    }
    let mut table = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let mut cfg = config.clone();
        cfg.k = k;
        match fit(data, &cfg) {
            Ok(r) => table.push(KCandidate {
                k,
                loglik: Some(r.loglik()),
                message: None,
            }),
            Err(e) => table.push(KCandidate {
                k,
                loglik: None,
                message: Some(e.to_string()),
            }),
        }
    }
    let fitted: Vec<(usize, f64)> = table
        .iter()
        .filter_map(|c| c.loglik.map(|l| (c.k, l)))
        .collect();
    if fitted.is_empty() {
        return Err(Error::FitFailed {
            starts: config.n_starts,
            diagnostics: "no K in the requested range could be fitted".into(),
        });
    }
    Ok(SelectKResult {
        selected: elbow(&fitted),
        table,
    })
}

/// Elbow rule over (K, loglik) rows sorted by K. Gains are taken between
/// consecutive K only. When every gain is nonpositive the smallest K wins;
/// when every step keeps gaining materially the largest does. Note that on
/// structure-free data the gain curve tends to stay flat and positive (each
/// extra component soaks up sampling noise), which lands in the second
/// fallback; the full table is returned so callers can override.
fn elbow(fitted: &[(usize, f64)]) -> usize {
    let mut gains = Vec::new();
    for w in fitted.windows(2) {
        if w[1].0 == w[0].0 + 1 {
            gains.push((w[0].0, w[1].1 - w[0].1));
        }
    }
    if gains.is_empty() {
        return fitted[0].0;
    }
    let max_gain = gains.iter().map(|&(_, g)| g).fold(f64::NEG_INFINITY, f64::max);
    if max_gain <= 0.0 {
        return fitted[0].0;
    }
    gains
        .iter()
        .find(|&&(_, g)| g < 0.1 * max_gain)
        .map(|&(k, _)| k)
        .unwrap_or_else(|| fitted.last().expect("nonempty").0)
}

/// Deterministic per-stream seed derivation (splitmix64 round over the
/// master seed xor a golden-ratio multiple of the stream index).
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Kernels, evaluation grids, weighted kernel density estimates, and the
//! log-density smoothing operator (S ln p)(x) = ∫ K_h(x-u) ln p(u) du.
//!
//! All densities live on uniform grids and integrate to one under trapezoid
//! quadrature. Values are floored at a small fraction of the peak so logs
//! stay finite; the floor-then-renormalize step runs exactly once.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative floor applied to grid densities and category probabilities.
pub const DENSITY_FLOOR_REL: f64 = 1e-12;

/// Tolerance on the trapezoid integral of a stored density.
pub const DENSITY_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Gaussian,
}

/// Smoothing kernel plus bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub h: f64,
}

impl Kernel {
    pub fn gaussian(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidConfig(format!("bandwidth must be > 0, got {h}")));
        }
        Ok(Kernel {
            kind: KernelKind::Gaussian,
            h,
        })
    }

    /// Base kernel K(t); standard normal density for the Gaussian kind.
    #[inline]
    pub fn base(&self, t: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => {
                const INV_SQRT_TAU: f64 = 0.398_942_280_401_432_7;
                INV_SQRT_TAU * (-0.5 * t * t).exp()
            }
        }
    }

    /// Scaled kernel K_h(t) = K(t/h)/h.
    #[inline]
    pub fn scaled(&self, t: f64) -> f64 {
        self.base(t / self.h) / self.h
    }
}

/// Rule-of-thumb bandwidth n^(-1/5).
pub fn default_bandwidth(n: usize) -> f64 {
    assert!(n >= 1, "bandwidth needs n >= 1");
    (n as f64).powf(-0.2)
}

/// Uniform evaluation grid with m nodes on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if m < 2 {
            return Err(Error::InvalidConfig(format!("grid needs m >= 2, got {m}")));
        }
        Ok(Grid { lo, hi, m })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.m - 1) as f64
    }

    #[inline]
    pub fn node(&self, g: usize) -> f64 {
        self.lo + g as f64 * self.spacing()
    }

    /// Trapezoid weight of node g: Δ/2 at the ends, Δ inside.
    #[inline]
    pub fn trapezoid_weight(&self, g: usize) -> f64 {
        let d = self.spacing();
        if g == 0 || g + 1 == self.m {
            0.5 * d
        } else {
            d
        }
    }

    /// Trapezoid quadrature of tabulated values.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.m);
        let mut acc = 0.0;
        for (g, v) in values.iter().enumerate() {
            acc += self.trapezoid_weight(g) * v;
        }
        acc
    }
}

/// Covers the observed values with padding max(4h, 10% of the range) per
/// side, then raises m until the spacing is at most h/2.
pub fn build_grid(observed_values: &[f64], kernel: &Kernel, m: usize) -> Result<Grid> {
    if observed_values.is_empty() {
        return Err(Error::EmptyColumn { col: 0 });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in observed_values {
        if !v.is_finite() {
            return Err(Error::InvalidConfig(format!("non-finite observed value {v}")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = (4.0 * kernel.h).max(0.1 * (hi - lo));
    let (lo, hi) = (lo - pad, hi + pad);
    let min_m_for_spacing = (2.0 * (hi - lo) / kernel.h).ceil() as usize + 1;
    let m = m.max(2).max(min_m_for_spacing);
    Grid::new(lo, hi, m)
}

/// Arbitrary values tabulated on a grid (no density constraints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Probability density tabulated on a grid: nonnegative, floored, and
/// integrating to one under trapezoid quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
}

impl GridDensity {
    /// Normalizes raw nonnegative values into a valid grid density:
    /// divide by the trapezoid integral, floor at 1e-12 of the peak, then
    /// renormalize once.
    pub fn from_raw(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} nodes but {} values supplied",
                grid.m,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let total = grid.trapezoid(&values);
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::DegenerateWeights { col: 0 });
        }
        for v in values.iter_mut() {
            *v /= total;
        }
        let floor = DENSITY_FLOOR_REL * values.iter().cloned().fold(0.0, f64::max);
        for v in values.iter_mut() {
            if *v < floor {
                *v = floor;
            }
        }
        let total = grid.trapezoid(&values);
        for v in values.iter_mut() {
            *v /= total;
        }
        Ok(GridDensity { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid mass; equals one up to roundoff by construction.
    pub fn mass(&self) -> f64 {
        self.grid.trapezoid(&self.values)
    }

    /// Checks the stored-density invariants.
    pub fn validate(&self) -> Result<()> {
        let peak = self.values.iter().cloned().fold(0.0, f64::max);
        let floor = DENSITY_FLOOR_REL * peak;
        if self
            .values
            .iter()
            .any(|v| !v.is_finite() || *v < floor * (1.0 - 1e-9))
        {
            return Err(Error::InvalidModel(
                "density values below floor or non-finite".into(),
            ));
        }
        if (self.mass() - 1.0).abs() > DENSITY_MASS_TOL {
            return Err(Error::InvalidModel(format!(
                "density mass {} departs from 1",
                self.mass()
            )));
        }
        Ok(())
    }
}

/// Unnormalized weighted KDE values at the grid nodes:
/// raw[g] = Σ_i w_i K_h(x_i - u_g) / Σ_i w_i.
pub(crate) fn weighted_kde_raw(
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    grid: &Grid,
) -> Result<Vec<f64>> {
    if points.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points vs {} weights",
            points.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidConfig("weights must be finite and >= 0".into()));
    }
    let total: f64 = weights.iter().sum();
    if points.is_empty() || total <= 0.0 {
        return Err(Error::DegenerateWeights { col: 0 });
    }
    let mut raw = vec![0.0; grid.m];
    for (&x, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (g, acc) in raw.iter_mut().enumerate() {
            *acc += w * kernel.scaled(x - grid.node(g));
        }
    }
    for v in raw.iter_mut() {
        *v /= total;
    }
    Ok(raw)
}

/// Weighted kernel density estimate on a grid, normalized and floored.
pub fn weighted_kde(
    points: &[f64],
    weights: &[f64],
    kernel: &Kernel,
    grid: &Grid,
) -> Result<GridDensity> {
    let raw = weighted_kde_raw(points, weights, kernel, grid)?;
    GridDensity::from_raw(*grid, raw)
}

/// Applies the smoothing operator to the log of a tabulated density:
/// out[g] = Σ_u tw_u K_h(u_g - u_u) ln p[u], the trapezoid quadrature of
/// ∫ K_h(u_g - u) ln p(u) du over the grid support.
pub fn smooth_log_density(p: &GridDensity, kernel: &Kernel) -> GridTable {
    let grid = *p.grid();
    let m = grid.m;
    let delta = grid.spacing();
    // Translation-invariant kernel: one value per node offset.
    let kv: Vec<f64> = (0..m).map(|t| kernel.scaled(t as f64 * delta)).collect();
    let wlnp: Vec<f64> = p
        .values()
        .iter()
        .enumerate()
        .map(|(u, v)| grid.trapezoid_weight(u) * v.ln())
        .collect();
    let mut values = vec![0.0; m];
    for (g, out) in values.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (u, w) in wlnp.iter().enumerate() {
            let t = if u >= g { u - g } else { g - u };
            acc += kv[t] * w;
        }
        *out = acc;
    }
    GridTable { grid, values }
}

/// Linear interpolation of tabulated values, clamped to the end values
/// outside the grid.
pub fn interp_eval(grid: &Grid, values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(values.len(), grid.m);
    if x <= grid.lo {
        return values[0];
    }
    if x >= grid.hi {
        return values[grid.m - 1];
    }
    let pos = (x - grid.lo) / grid.spacing();
    let g = (pos.floor() as usize).min(grid.m - 2);
    let a = pos - g as f64;
    (1.0 - a) * values[g] + a * values[g + 1]
}

//! Seeded replicate benchmarks: simulate a scenario, fit each requested
//! method, score against the generating labels.

use crate::data::{standardize, MaskedDataset, Partition};
use crate::error::{Error, Result};
use crate::estimator::{derive_seed, fit, FitConfig};
use crate::kpod::{kpod_fit, KpodConfig};
use crate::metrics::{ari, misclassification};
use crate::simulate::{simulate, Mechanism, NoiseLaw, ScenarioSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Kpod,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Proposed => f.write_str("proposed"),
            Method::Kpod => f.write_str("kpod"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" => Ok(Method::Proposed),
            "kpod" | "k-pod" => Ok(Method::Kpod),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// One synthetic setting to benchmark; `id` names it in result rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    pub id: String,
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub gamma: f64,
    pub noise: NoiseLaw,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenarios: Vec<BenchScenario>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    /// Components to fit; the generator always produces two classes.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Restarts per fit for the mixture method (defaults to FitConfig's).
    #[serde(default)]
    pub fit_starts: Option<usize>,
    #[serde(default)]
    pub fit_max_iters: Option<usize>,
    #[serde(default)]
    pub fit_grid_m: Option<usize>,
}

fn default_k() -> usize {
    2
}

impl BenchConfig {
    pub fn new(scenarios: Vec<BenchScenario>, methods: Vec<Method>, replicates: usize, seed: u64) -> Self {
        BenchConfig {
            scenarios,
            methods,
            replicates,
            seed,
            k: 2,
            fit_starts: None,
            fit_max_iters: None,
            fit_grid_m: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.methods.is_empty() || self.replicates == 0 {
            return Err(Error::InvalidConfig(
                "benchmark needs at least one scenario, one method, one replicate".into(),
            ));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("benchmark needs k >= 1".into()));
        }
        for s in &self.scenarios {
            ScenarioSpec {
                n: s.n,
                d: s.d,
                delta: s.delta,
                gamma: s.gamma,
                noise: s.noise,
                mechanism: s.mechanism,
                seed: 0,
            }
            .validate()?;
        }
        Ok(())
    }
}

/// One scored fit. `seconds` is wall time and is the only field that varies
/// across reruns with the same seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub method: Method,
    pub replicate: usize,
    pub ari: Option<f64>,
    pub misclassification: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    /// Scores of one method on one scenario, skipping failed replicates.
    pub fn aris(&self, scenario: &str, method: Method) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method)
            .filter_map(|r| r.ari)
            .collect()
    }
}

/// Median of an unordered sample; NaN-free inputs expected.
pub fn median(sample: &[f64]) -> f64 {
    assert!(!sample.is_empty(), "median of an empty sample");
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in median input"));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn replicate_seed(master: u64, scenario_idx: usize, replicate: usize) -> u64 {
    derive_seed(derive_seed(master, scenario_idx as u64), replicate as u64)
}

fn run_method(
    method: Method,
    data: &MaskedDataset,
    truth: &Partition,
    k: usize,
    seed: u64,
    config: &BenchConfig,
) -> Result<(f64, f64)> {
    let part = match method {
        Method::Proposed => {
            let std = standardize(data)?;
            let mut fc = FitConfig::new(k);
            fc.seed = seed;
            if let Some(s) = config.fit_starts {
                fc.n_starts = s;
            }
            if let Some(m) = config.fit_max_iters {
                fc.max_iters = m;
            }
            if let Some(g) = config.fit_grid_m {
                fc.grid_m = g;
            }
            fit(&std, &fc)?.partition
        }
        Method::Kpod => {
            let std = standardize(data)?;
            let mut kc = KpodConfig::new(k);
            kc.seed = seed;
            kpod_fit(&std, &kc)?.partition
        }
    };
    let a = ari(&part, truth)?;
    let m = misclassification(&part, truth)?.rate;
    Ok((a, m))
}

/// Runs every (scenario, replicate, method) cell; failures land in the row's
/// `error` field instead of aborting the sweep.
pub fn run_bench(config: &BenchConfig) -> Result<BenchResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for (si, scenario) in config.scenarios.iter().enumerate() {
        for rep in 0..config.replicates {
            let seed = replicate_seed(config.seed, si, rep);
            let spec = ScenarioSpec {
                n: scenario.n,
                d: scenario.d,
                delta: scenario.delta,
                gamma: scenario.gamma,
                noise: scenario.noise,
                mechanism: scenario.mechanism,
                seed,
            };
            let (data, truth) = simulate(&spec)?;
            for &method in &config.methods {
                let start = Instant::now();
                let outcome = run_method(method, &data, &truth, config.k, seed, config);
                let seconds = start.elapsed().as_secs_f64();
                let row = match outcome {
                    Ok((a, m)) => BenchRow {
                        scenario: scenario.id.clone(),
                        method,
                        replicate: rep,
                        ari: Some(a),
                        misclassification: Some(m),
                        seconds,
                        error: None,
                    },
                    Err(e) => BenchRow {
                        scenario: scenario.id.clone(),
                        method,
                        replicate: rep,
                        ari: None,
                        misclassification: None,
                        seconds,
                        error: Some(e.to_string()),
                    },
                };
                rows.push(row);
            }
        }
    }
    Ok(BenchResult { rows })
}

//! Release gate: end-to-end checks of the estimator's invariants, its
//! closed-form updates against independent numeric oracles, simulation
//! fidelity, benchmark accuracy bands, and the complete-data reductions.
//! Each check prints a single PASS/FAIL line.

use missmix::bench::{median, run_bench, BenchConfig, BenchScenario, Method};
use missmix::data::{standardize, MaskedDataset, Partition, VariableSpec};
use missmix::estimator::{
    fit, fit_with_inspect, tau_floor, update_density, update_pi, update_tau, FitConfig,
};
use missmix::io::{read_csv_path, read_labels_csv, CsvOptions};
use missmix::kernel::{build_grid, default_bandwidth, Grid, GridDensity, Kernel};
use missmix::kpod::{kmeans, kpod_fit, KpodConfig};
use missmix::metrics::{ari, ari_optional, misclassification};
use missmix::model::{
    responsibilities, smoothed_log_density_at, smoothed_loglik, CondDist, MixtureParams,
    ResponsibilityMatrix,
};
use missmix::simulate::{
    bayes_partition, calibrated_by_dimension, calibrated_by_rate, class_observation_prob,
    simulate, Mechanism, NoiseLaw, ScenarioSpec,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

fn gate(name: &str, check: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(check)) {
        Ok(()) => println!("PASS {name}"),
        Err(cause) => {
            println!("FAIL {name}");
            resume_unwind(cause);
        }
    }
}

const ALL_NOISE: [NoiseLaw; 3] = [NoiseLaw::Gaussian, NoiseLaw::Student3, NoiseLaw::Laplace];
const ALL_MECH: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::Mnar1, Mechanism::Mnar2];

fn scenario(n: usize, d: usize, rate: f64, noise: NoiseLaw, mech: Mechanism, seed: u64) -> ScenarioSpec {
    let (delta, gamma) = calibrated_by_rate(rate, noise, mech).expect("tabulated rate");
    ScenarioSpec { n, d, delta, gamma, noise, mechanism: mech, seed }
}

fn simulate_standardized(spec: &ScenarioSpec) -> (MaskedDataset, Partition) {
    let (raw, truth) = simulate(spec).expect("simulation");
    (standardize(&raw).expect("standardization"), truth)
}

/// Every iteration of a run may only increase the objective, up to roundoff
/// relative to its magnitude.
fn assert_ascent(trace: &[f64], context: &str) {
    assert!(trace.len() >= 2, "{context}: trace too short");
    for (r, w) in trace.windows(2).enumerate() {
        let slack = 1e-8 * w[0].abs().max(1.0);
        assert!(
            w[1] >= w[0] - slack,
            "{context}: objective fell from {} to {} at iteration {r}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn objective_never_decreases_across_fifty_varied_fits() {
    gate("monotone ascent over 50 fits", || {
        let start = std::time::Instant::now();
        let mut fits = 0;
        let mut pairs = 0;
        // 45 single-start runs cover 45 distinct random initializations;
        // every one of their iterations lands in the returned trace.
        for (run, (&noise, &mech)) in ALL_NOISE
            .iter()
            .flat_map(|nl| ALL_MECH.iter().map(move |mc| (nl, mc)))
            .cycle()
            .take(45)
            .enumerate()
        {
            let spec = scenario(100, 4, 0.3, noise, mech, 9_000 + run as u64);
            let (data, _) = simulate_standardized(&spec);
            let mut config = FitConfig::new(if run % 2 == 0 { 2 } else { 3 });
            config.n_starts = 1;
            config.seed = 77 + run as u64;
            let result = fit(&data, &config).expect("fit");
            assert_ascent(&result.loglik_trace, &format!("single-start run {run}"));
            fits += 1;
            pairs += result.loglik_trace.len() - 1;
        }
        // 5 full multi-start fits check the winning run end to end.
        for run in 0..5 {
            let spec = scenario(100, 4, 0.3, ALL_NOISE[run % 3], ALL_MECH[run % 3], 500 + run as u64);
            let (data, _) = simulate_standardized(&spec);
            let mut config = FitConfig::new(2 + run % 2);
            config.seed = run as u64;
            let result = fit(&data, &config).expect("fit");
            assert_ascent(&result.loglik_trace, &format!("multi-start run {run}"));
            fits += 1;
            pairs += result.loglik_trace.len() - 1;
        }
        assert_eq!(fits, 50);
        assert!(pairs > 500, "only {pairs} iteration pairs were exercised");
        assert!(
            start.elapsed().as_secs() < 300,
            "suite took {:?}, budget is five minutes",
            start.elapsed()
        );
    });
}

/// Derivative-free maximizer over the probability simplex: repeatedly shift
/// mass between coordinate pairs with a shrinking step.
fn maximize_on_simplex(obj: impl Fn(&[f64]) -> f64, k: usize) -> Vec<f64> {
    let mut x = vec![1.0 / k as f64; k];
    let mut best = obj(&x);
    let mut step = 0.25;
    while step > 1e-11 {
        let mut improved = false;
        for from in 0..k {
            for to in 0..k {
                if from == to || x[from] - step <= 1e-12 {
                    continue;
                }
                let mut cand = x.clone();
                cand[from] -= step;
                cand[to] += step;
                let val = obj(&cand);
                if val > best {
                    best = val;
                    x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    x
}

/// Golden-section maximizer for a unimodal function on [a, b].
fn maximize_on_interval(obj: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = obj(c);
    let mut fd = obj(d);
    while b - a > 1e-10 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = obj(d);
        }
    }
    0.5 * (a + b)
}

/// A random continuous dataset with interior missingness plus strictly
/// positive responsibilities, so none of the update clamps bind.
fn random_update_instance(
    seed: u64,
    k: usize,
) -> (MaskedDataset, ResponsibilityMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(30..=60);
    let d = 2;
    let mut values = Vec::with_capacity(n * d);
    let mut mask = Vec::with_capacity(n * d);
    loop {
        values.clear();
        mask.clear();
        for _ in 0..n * d {
            let centered: f64 = rng.gen_range(-1.5..1.5);
            values.push(centered + if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
            mask.push(rng.gen_bool(0.75));
        }
        let ok = (0..d).all(|j| {
            let obs = (0..n).filter(|i| mask[i * d + j]).count();
            obs >= 5 && obs < n
        });
        if ok {
            break;
        }
    }
    let data = MaskedDataset::new(
        values,
        mask,
        vec![VariableSpec::continuous(); d],
        n,
        d,
    )
    .expect("valid instance");
    let mut t = Vec::with_capacity(n * k);
    for _ in 0..n {
        let row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = row.iter().sum();
        t.extend(row.iter().map(|w| w / total));
    }
    let t = ResponsibilityMatrix::new(t, n, k).expect("valid responsibilities");
    (data, t)
}

#[test]
fn closed_form_updates_match_independent_numeric_maximizers() {
    gate("update rules agree with numeric oracles", || {
        for instance in 0..10u64 {
            let k = if instance % 2 == 0 { 2 } else { 3 };
            let (data, t) = random_update_instance(3_000 + instance, k);
            let (n, d) = (data.n(), data.d());

            // proportions: maximize sum_ik t_ik ln pi_k over the simplex
            let pi_hat = update_pi(&t);
            let pi_oracle = maximize_on_simplex(
                |pi: &[f64]| {
                    let mut total = 0.0;
                    for i in 0..n {
                        for (kk, p) in pi.iter().enumerate() {
                            total += t.get(i, kk) * p.max(1e-300).ln();
                        }
                    }
                    total
                },
                k,
            );
            for (a, b) in pi_hat.iter().zip(&pi_oracle) {
                assert!(
                    (a - b).abs() < 1e-6,
                    "instance {instance}: proportion update {a} vs oracle {b}"
                );
            }

            // observation probabilities: separable weighted Bernoulli terms
            let tau_hat = update_tau(&t, &data).expect("tau update");
            let tf = tau_floor(n);
            for kk in 0..k {
                for j in 0..d {
                    let obj = |tau: f64| {
                        let mut total = 0.0;
                        for i in 0..n {
                            let term = if data.is_observed(i, j) {
                                tau.ln()
                            } else {
                                (1.0 - tau).ln()
                            };
                            total += t.get(i, kk) * term;
                        }
                        total
                    };
                    let oracle = maximize_on_interval(obj, 1e-7, 1.0 - 1e-7);
                    assert!(
                        oracle > tf && oracle < 1.0 - tf,
                        "instance {instance}: oracle landed on a clamp, redesign the instance"
                    );
                    let got = tau_hat[kk * d + j];
                    assert!(
                        (got - oracle).abs() < 1e-6,
                        "instance {instance}: tau update {got} vs oracle {oracle} at ({kk},{j})"
                    );
                }
            }

            // densities: the weighted KDE must beat perturbed competitors on
            // the smoothed weighted log-density criterion it maximizes
            let kernel = Kernel::gaussian(default_bandwidth(n)).expect("kernel");
            let mut rng = ChaCha8Rng::seed_from_u64(8_800 + instance);
            let j = 0;
            let obs: Vec<f64> = data.observed_column(j).iter().map(|&(_, x)| x).collect();
            let grid = build_grid(&obs, &kernel, 200).expect("grid");
            let smoothed_score = |p: &GridDensity, kk: usize| {
                let mut total = 0.0;
                for &(i, x) in &data.observed_column(j) {
                    total += t.get(i, kk) * smoothed_log_density_at(p, &kernel, x);
                }
                total
            };
            for kk in 0..k {
                let updated = match update_density(&t, &data, kk, j, &kernel, Some(&grid)) {
                    Ok(CondDist::Continuous(p)) => p,
                    other => panic!("expected a continuous density, got {other:?}"),
                };
                let best = smoothed_score(&updated, kk);
                for trial in 0..20 {
                    let sigma = if trial % 2 == 0 { 0.1 } else { 0.4 };
                    let noisy: Vec<f64> = updated
                        .values()
                        .iter()
                        .map(|v| v * (sigma * rng.gen_range(-1.0f64..1.0)).exp())
                        .collect();
                    let rival = GridDensity::from_raw(grid, noisy).expect("rival density");
                    let score = smoothed_score(&rival, kk);
                    assert!(
                        score < best,
                        "instance {instance}: perturbation {trial} scored {score} >= {best}"
                    );
                }
            }
        }
    });
}

#[test]
fn smoothing_a_tabulated_standard_gaussian_matches_the_closed_form() {
    gate("kernel smoothing closed-form oracle", || {
        let grid = Grid::new(-8.0, 8.0, 801).expect("grid");
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let phi: Vec<f64> = (0..grid.m)
            .map(|g| {
                let u = grid.node(g);
                norm * (-0.5 * u * u).exp()
            })
            .collect();
        let p = GridDensity::from_raw(grid, phi).expect("tabulated density");
        for h in [0.2, 0.4] {
            let kernel = Kernel::gaussian(h).expect("kernel");
            let mut checked = 0;
            for g in 0..grid.m {
                let x = grid.node(g);
                if x.abs() > 2.5 {
                    continue;
                }
                let got = smoothed_log_density_at(&p, &kernel, x);
                let want = -(x * x + h * h) / 2.0 - norm.recip().ln();
                assert!(
                    (got - want).abs() < 2e-3,
                    "h={h}, x={x}: smoothed log-density {got} vs closed form {want}"
                );
                checked += 1;
            }
            assert!(checked > 200);
        }
    });
}

#[test]
fn every_iteration_keeps_parameters_normalized_and_clamped() {
    gate("densities, proportions, and observation rates stay valid each iteration", || {
        let mut inspected = 0usize;
        for (run, (&noise, &mech)) in ALL_NOISE
            .iter()
            .flat_map(|nl| ALL_MECH.iter().map(move |mc| (nl, mc)))
            .take(6)
            .enumerate()
        {
            let spec = scenario(90, 3, 0.3, noise, mech, 400 + run as u64);
            let (data, _) = simulate_standardized(&spec);
            let n = data.n();
            let tf = tau_floor(n);
            let mut config = FitConfig::new(2);
            config.n_starts = 4;
            config.seed = run as u64;
            fit_with_inspect(&data, &config, |params: &MixtureParams, _, _| {
                inspected += 1;
                let sum: f64 = params.pi().iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "proportions sum to {sum}");
                assert!(params.pi().iter().all(|&p| p > 0.0));
                for k in 0..params.k() {
                    for j in 0..params.d() {
                        let tau = params.tau(k, j);
                        assert!(
                            tau == 1.0 || (tf..=1.0 - tf).contains(&tau),
                            "tau {tau} escaped its clamp"
                        );
                        if let CondDist::Continuous(p) = params.dens(k, j) {
                            let mass = p.mass();
                            assert!(
                                (mass - 1.0).abs() <= 1e-6,
                                "density mass {mass} at ({k},{j})"
                            );
                        }
                    }
                }
            })
            .expect("fit");
        }
        assert!(inspected > 100, "only {inspected} iterations were inspected");
    });
}

#[test]
fn simulated_missingness_rate_and_optimal_error_match_their_design() {
    gate("simulation fidelity at the 30 percent benchmark setting", || {
        let (delta, gamma) =
            calibrated_by_rate(0.3, NoiseLaw::Gaussian, Mechanism::Mcar).expect("tabulated");
        assert!((delta - 1.016).abs() < 1e-12 && (gamma - 0.843).abs() < 1e-12);
        let spec = ScenarioSpec {
            n: 100_000,
            d: 4,
            delta,
            gamma,
            noise: NoiseLaw::Gaussian,
            mechanism: Mechanism::Mcar,
            seed: 20_260_814,
        };
        let (data, truth) = simulate(&spec).expect("simulation");
        let cells = spec.n * spec.d;
        let missing = (0..spec.n)
            .flat_map(|i| (0..spec.d).map(move |j| (i, j)))
            .filter(|&(i, j)| !data.is_observed(i, j))
            .count();
        let rate = missing as f64 / cells as f64;
        assert!(
            (rate - 0.30).abs() <= 0.01,
            "empirical missing rate {rate} over {cells} cells"
        );
        let optimal = bayes_partition(&spec, &data).expect("optimal rule");
        let err = misclassification(&optimal, &truth).expect("scoring").rate;
        assert!(
            (err - 0.05).abs() <= 0.01,
            "optimal misclassification {err} on {} subjects",
            spec.n
        );
    });
}

fn band_scenario(id: &str, d: usize, rate: f64, noise: NoiseLaw, mech: Mechanism) -> BenchScenario {
    let (delta, gamma) = calibrated_by_rate(rate, noise, mech).expect("tabulated rate");
    BenchScenario {
        id: id.into(),
        n: 100,
        d,
        delta,
        gamma,
        noise,
        mechanism: mech,
    }
}

#[test]
fn benchmark_accuracy_bands_hold_at_thirty_percent_missingness() {
    gate("accuracy bands: baseline level, noise robustness, informative-missingness gap", || {
        let start = std::time::Instant::now();
        let config = BenchConfig {
            scenarios: vec![
                band_scenario("gaussian-mcar-30", 4, 0.3, NoiseLaw::Gaussian, Mechanism::Mcar),
                band_scenario("laplace-mnar2-30", 4, 0.3, NoiseLaw::Laplace, Mechanism::Mnar2),
                band_scenario("gaussian-mnar1-40", 4, 0.4, NoiseLaw::Gaussian, Mechanism::Mnar1),
            ],
            methods: vec![Method::Proposed, Method::Kpod],
            replicates: 20,
            seed: 60,
            k: 2,
            fit_starts: None,
            fit_max_iters: None,
            fit_grid_m: None,
        };
        let result = run_bench(&config).expect("benchmark");
        for row in &result.rows {
            assert!(row.error.is_none(), "replicate failed: {:?}", row.error);
        }
        let med = |scenario: &str, method: Method| {
            let scores = result.aris(scenario, method);
            assert_eq!(scores.len(), 20);
            median(&scores)
        };
        let base = med("gaussian-mcar-30", Method::Proposed);
        assert!(base >= 0.55, "median agreement {base} under the easiest setting");
        let heavy_tail = med("laplace-mnar2-30", Method::Proposed);
        assert!(
            (heavy_tail - base).abs() <= 0.15,
            "heavy-tailed informative missingness median {heavy_tail} vs {base}"
        );
        let informative = med("gaussian-mnar1-40", Method::Proposed);
        let baseline = med("gaussian-mnar1-40", Method::Kpod);
        assert!(
            baseline < informative,
            "imputation-free baseline {baseline} should trail the model {informative} \
             when missingness is informative"
        );
        assert!(
            start.elapsed().as_secs() < 1200,
            "bands took {:?}, budget is twenty minutes",
            start.elapsed()
        );
    });
}

#[test]
fn accuracy_is_stable_across_dimension() {
    gate("accuracy comparable at 3 and 9 variables", || {
        let mut scenarios = Vec::new();
        for d in [3usize, 9] {
            let (delta, gamma) =
                calibrated_by_dimension(d, NoiseLaw::Gaussian, Mechanism::Mnar1).expect("tabulated");
            scenarios.push(BenchScenario {
                id: format!("gaussian-mnar1-d{d}"),
                n: 100,
                d,
                delta,
                gamma,
                noise: NoiseLaw::Gaussian,
                mechanism: Mechanism::Mnar1,
            });
        }
        let config = BenchConfig {
            scenarios,
            methods: vec![Method::Proposed],
            replicates: 20,
            seed: 61,
            k: 2,
            fit_starts: None,
            fit_max_iters: None,
            fit_grid_m: None,
        };
        let result = run_bench(&config).expect("benchmark");
        let low = median(&result.aris("gaussian-mnar1-d3", Method::Proposed));
        let high = median(&result.aris("gaussian-mnar1-d9", Method::Proposed));
        assert!(
            (high - low).abs() <= 0.15,
            "median agreement {high} at d=9 vs {low} at d=3"
        );
    });
}

/// Aligned absolute error of the fitted proportions and observation
/// probabilities against the generative values, minimized over component
/// relabelings.
fn aligned_parameter_error(params: &MixtureParams, spec: &ScenarioSpec) -> f64 {
    let d = spec.d;
    let pi_true = [1.0 / 3.0, 2.0 / 3.0];
    let tau_true: Vec<f64> = (0..2)
        .map(|label| {
            class_observation_prob(spec.delta, spec.gamma, spec.noise, spec.mechanism, label)
        })
        .collect();
    let mut best = f64::INFINITY;
    for perm in [[0usize, 1], [1, 0]] {
        let mut err = 0.0;
        for (label, &source) in perm.iter().enumerate() {
            err += (params.pi()[source] - pi_true[label]).abs();
            for j in 0..d {
                err += (params.tau(source, j) - tau_true[label]).abs() / d as f64;
            }
        }
        best = best.min(err);
    }
    best
}

#[test]
fn parameter_error_shrinks_as_samples_grow() {
    gate("proportion and observation-rate error decreases with n", || {
        let (delta, gamma) =
            calibrated_by_rate(0.3, NoiseLaw::Gaussian, Mechanism::Mnar2).expect("tabulated");
        let mut medians = Vec::new();
        for (step, n) in [100usize, 400, 1600].into_iter().enumerate() {
            let mut errors = Vec::new();
            for rep in 0..10u64 {
                let spec = ScenarioSpec {
                    n,
                    d: 4,
                    delta,
                    gamma,
                    noise: NoiseLaw::Gaussian,
                    mechanism: Mechanism::Mnar2,
                    seed: 7_000 + 100 * step as u64 + rep,
                };
                let (data, _) = simulate_standardized(&spec);
                let mut config = FitConfig::new(2);
                config.seed = rep;
                let result = fit(&data, &config).expect("fit");
                errors.push(aligned_parameter_error(&result.params, &spec));
            }
            medians.push(median(&errors));
        }
        assert!(
            medians[1] <= medians[0] && medians[2] <= medians[1],
            "medians {medians:?} are not decreasing across n = 100, 400, 1600"
        );
    });
}

#[test]
fn heart_dataset_fit_lands_in_the_published_agreement_band() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let features = dir.join("echocardiogram.csv");
    let survival = dir.join("echocardiogram_labels.csv");
    if !features.exists() || !survival.exists() {
        println!(
            "SKIP heart dataset agreement: {} not present, run scripts/fetch_echocardiogram.sh",
            features.display()
        );
        return;
    }
    gate("heart dataset four-cluster agreement with survival", || {
        let options = CsvOptions {
            has_header: true,
            force_categorical: vec![1],
            ..CsvOptions::default()
        };
        let (raw, _) = read_csv_path(&features, &options).expect("read features");
        assert_eq!(raw.n(), 132, "the prepared table should hold 132 subjects");
        let data = standardize(&raw).expect("standardize");
        let labels = read_labels_csv(
            std::fs::File::open(&survival).expect("open labels"),
            &CsvOptions::default().missing_tokens,
        )
        .expect("read labels");
        assert_eq!(labels.len(), 132);
        let mut config = FitConfig::new(4);
        config.seed = 14;
        let result = fit(&data, &config).expect("fit");
        let sizes = {
            let mut counts = vec![0usize; 4];
            for &z in result.partition.labels() {
                counts[z] += 1;
            }
            counts
        };
        assert_eq!(sizes.iter().sum::<usize>(), 132);
        let predicted: Vec<Option<usize>> =
            result.partition.labels().iter().map(|&z| Some(z)).collect();
        let score = ari_optional(&predicted, &labels).expect("agreement");
        assert!(
            (0.05..=0.30).contains(&score),
            "agreement {score} with survival labels, sizes {sizes:?}"
        );
    });
}

#[test]
fn complete_data_reduces_to_the_missingness_free_special_cases() {
    gate("no missingness: observation rates pin at one, baseline equals k-means", || {
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let (n, d) = (80usize, 2usize);
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            let center = if i % 3 == 0 { -3.0 } else { 3.0 };
            for _ in 0..d {
                values.push(center + rng.gen_range(-0.8..0.8));
            }
        }
        let data = MaskedDataset::new(
            values.clone(),
            vec![true; n * d],
            vec![VariableSpec::continuous(); d],
            n,
            d,
        )
        .expect("complete dataset");

        // mixture: the missingness factor must vanish identically
        let mut config = FitConfig::new(2);
        config.n_starts = 4;
        config.seed = 5;
        let result = fit(&data, &config).expect("fit");
        assert!(
            result.params.tau_matrix().iter().all(|&tau| tau == 1.0),
            "observation probabilities should be exactly one"
        );
        let mut plain = 0.0;
        for i in 0..n {
            let mut per_component = Vec::with_capacity(2);
            for k in 0..2 {
                let mut lp = result.params.pi()[k].ln();
                for j in 0..d {
                    let p = match result.params.dens(k, j) {
                        CondDist::Continuous(p) => p,
                        other => panic!("unexpected distribution {other:?}"),
                    };
                    lp += smoothed_log_density_at(p, result.params.kernel(), values[i * d + j]);
                }
                per_component.push(lp);
            }
            let top = per_component.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            plain += top + per_component.iter().map(|lp| (lp - top).exp()).sum::<f64>().ln();
        }
        let full = smoothed_loglik(&result.params, &data).expect("objective");
        assert!(
            (full - plain).abs() <= 1e-8 * plain.abs().max(1.0),
            "objective with missingness terms {full} vs without {plain}"
        );
        let t = responsibilities(&result.params, &data).expect("responsibilities");
        assert_eq!(t.n(), n);

        // baseline: with nothing to complete, the alternating scheme is k-means
        let mut kconfig = KpodConfig::new(2);
        kconfig.n_starts = 5;
        kconfig.seed = 3;
        let alternating = kpod_fit(&data, &kconfig).expect("baseline fit");
        let mut best: Option<(Vec<usize>, f64)> = None;
        for s in 0..5u64 {
            let mut seeder = ChaCha8Rng::seed_from_u64(1_000 + s);
            let (labels, _, wcss) = kmeans(&values, n, d, 2, &mut seeder).expect("k-means");
            if best.as_ref().map_or(true, |(_, b)| wcss < *b) {
                best = Some((labels, wcss));
            }
        }
        let (kmeans_labels, kmeans_wcss) = best.expect("at least one run");
        let kmeans_partition = Partition::new(kmeans_labels, 2).expect("partition");
        assert_eq!(
            ari(&alternating.partition, &kmeans_partition).expect("agreement"),
            1.0,
            "partitions differ on complete data"
        );
        assert!(
            (alternating.objective - kmeans_wcss).abs() <= 1e-9 * kmeans_wcss.max(1.0),
            "objective {} vs k-means {kmeans_wcss}",
            alternating.objective
        );
    });
}

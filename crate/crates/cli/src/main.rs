//! Command-line surface: simulate scenarios, fit and select models, run
//! benchmarks, score partitions, and summarize fitted models.

use clap::{Args, Parser, Subcommand};
use missmix::bench::{run_bench, BenchConfig};
use missmix::data::{standardize, MaskedDataset};
use missmix::error::Error;
use missmix::estimator::{fit, select_k, FitConfig};
use missmix::io::{
    format_real, read_csv_path, read_labels_csv, read_model, write_bench_csv, write_data_csv,
    write_labels_csv, write_model, write_select_k_csv, CsvOptions, ModelFile,
};
use missmix::metrics::{ari_optional, discriminative_report};
use missmix::model::responsibilities;
use missmix::simulate::{
    calibrated_by_dimension, calibrated_by_rate, simulate, Mechanism, NoiseLaw, ScenarioSpec,
};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "missmix",
    about = "Clustering for incomplete data where missingness itself is informative",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic two-cluster dataset and its true labels.
    Simulate(SimulateArgs),
    /// Fit the mixture to a CSV dataset.
    Fit(FitArgs),
    /// Fit a range of component counts and pick one by the elbow rule.
    SelectK(SelectKArgs),
    /// Run the replicate benchmark described by a TOML config file.
    Benchmark(BenchmarkArgs),
    /// Adjusted Rand index between two label files.
    Ari(AriArgs),
    /// Print the proportion, observation-probability, and separation tables
    /// of a fitted model.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Subjects to draw.
    #[arg(short, long)]
    n: usize,
    /// Variables per subject.
    #[arg(short, long)]
    d: usize,
    /// Cluster separation; means sit at +delta and -delta.
    #[arg(long, allow_hyphen_values = true, required_unless_present_any = ["preset_rate", "preset_dim"], conflicts_with_all = ["preset_rate", "preset_dim"])]
    delta: Option<f64>,
    /// Missingness intercept.
    #[arg(long, allow_hyphen_values = true, required_unless_present_any = ["preset_rate", "preset_dim"], conflicts_with_all = ["preset_rate", "preset_dim"])]
    gamma: Option<f64>,
    /// Use the tabulated (delta, gamma) for this missingness rate.
    #[arg(long, value_name = "RATE")]
    preset_rate: Option<f64>,
    /// Use the tabulated (delta, gamma) for this dimension.
    #[arg(long, value_name = "DIM", conflicts_with = "preset_rate")]
    preset_dim: Option<usize>,
    /// gaussian | student3 | laplace.
    #[arg(long)]
    noise: NoiseLaw,
    /// mcar | mnar1 | mnar2.
    #[arg(long)]
    mechanism: Mechanism,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the data CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Where to write the true labels.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct CsvArgs {
    /// Treat the first row as column names.
    #[arg(long)]
    header: bool,
    /// Column index (0-based) to force categorical; repeatable.
    #[arg(long = "categorical", value_name = "COL")]
    categorical: Vec<usize>,
    /// Column index (0-based) that must parse as numbers; repeatable.
    #[arg(long = "continuous", value_name = "COL")]
    continuous: Vec<usize>,
    /// Token meaning "missing"; repeatable, default: empty, NA, ?.
    #[arg(long = "missing-token", value_name = "TOK")]
    missing_tokens: Vec<String>,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        let mut o = CsvOptions {
            has_header: self.header,
            ..CsvOptions::default()
        };
        if !self.missing_tokens.is_empty() {
            o.missing_tokens = self.missing_tokens.clone();
        }
        o.force_categorical = self.categorical.clone();
        o.force_continuous = self.continuous.clone();
        o
    }
}

#[derive(Args)]
struct FitTuning {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random restarts.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Density grid resolution.
    #[arg(long)]
    grid_m: Option<usize>,
    /// Override the n^(-1/5) bandwidth.
    #[arg(long)]
    bandwidth: Option<f64>,
}

impl FitTuning {
    fn config(&self, k: usize) -> FitConfig {
        let mut c = FitConfig::new(k);
        c.seed = self.seed;
        if let Some(s) = self.starts {
            c.n_starts = s;
        }
        if let Some(m) = self.max_iters {
            c.max_iters = m;
        }
        if let Some(g) = self.grid_m {
            c.grid_m = g;
        }
        c.bandwidth = self.bandwidth;
        c
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV.
    data: PathBuf,
    /// Number of components.
    #[arg(short)]
    k: usize,
    #[command(flatten)]
    csv: CsvArgs,
    #[command(flatten)]
    tuning: FitTuning,
    /// Where to write the fitted model (JSON).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Where to write the hard partition (one label per line).
    #[arg(long, value_name = "FILE")]
    partition: Option<PathBuf>,
    /// Where to write the per-iteration log-likelihood trace.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SelectKArgs {
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long)]
    k_max: usize,
    #[command(flatten)]
    csv: CsvArgs,
    #[command(flatten)]
    tuning: FitTuning,
    /// Where to write the per-K log-likelihood table.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// TOML file declaring scenarios, methods, replicates, seed.
    config: PathBuf,
    /// Where to write the results CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct AriArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Fitted model JSON.
    model: PathBuf,
    /// Training data CSV; enables the per-class missingness columns.
    data: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> missmix::Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::SelectK(args) => cmd_select_k(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Ari(args) => cmd_ari(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> missmix::Result<()> {
    let (delta, gamma) = if let Some(rate) = args.preset_rate {
        calibrated_by_rate(rate, args.noise, args.mechanism)?
    } else if let Some(dim) = args.preset_dim {
        calibrated_by_dimension(dim, args.noise, args.mechanism)?
    } else {
        (args.delta.unwrap(), args.gamma.unwrap())
    };
    let spec = ScenarioSpec {
        n: args.n,
        d: args.d,
        delta,
        gamma,
        noise: args.noise,
        mechanism: args.mechanism,
        seed: args.seed,
    };
    let (data, truth) = simulate(&spec)?;
    write_data_csv(fs::File::create(&args.out)?, &data)?;
    if let Some(path) = args.truth {
        let labels: Vec<Option<usize>> = truth.labels().iter().map(|&z| Some(z)).collect();
        write_labels_csv(fs::File::create(path)?, &labels)?;
    }
    println!(
        "wrote {} subjects x {} variables (delta={delta}, gamma={gamma}) to {}",
        args.n,
        args.d,
        args.out.display()
    );
    Ok(())
}

fn load_standardized(path: &PathBuf, csv: &CsvArgs) -> missmix::Result<MaskedDataset> {
    let (data, _) = read_csv_path(path, &csv.options())?;
    standardize(&data)
}

fn cmd_fit(args: FitArgs) -> missmix::Result<()> {
    let data = load_standardized(&args.data, &args.csv)?;
    let config = args.tuning.config(args.k);
    let result = fit(&data, &config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.model {
        let model = ModelFile::from_fit(&result, &config, data.var_specs());
        write_model(path, &model)?;
    }
    if let Some(path) = &args.partition {
        let labels: Vec<Option<usize>> =
            result.partition.labels().iter().map(|&z| Some(z)).collect();
        write_labels_csv(fs::File::create(path)?, &labels)?;
    }
    if let Some(path) = &args.trace {
        let mut text = String::from("iteration,loglik\n");
        for (i, ll) in result.loglik_trace.iter().enumerate() {
            text.push_str(&format!("{i},{}\n", format_real(*ll)));
        }
        fs::write(path, text)?;
    }
    println!(
        "loglik {} after {} evaluations ({})",
        format_real(result.loglik()),
        result.loglik_trace.len(),
        if result.converged { "converged" } else { "hit the iteration cap" }
    );
    Ok(())
}

fn cmd_select_k(args: SelectKArgs) -> missmix::Result<()> {
    let data = load_standardized(&args.data, &args.csv)?;
    let config = args.tuning.config(args.k_min);
    let result = select_k(&data, args.k_min, args.k_max, &config)?;
    if let Some(path) = &args.out {
        write_select_k_csv(fs::File::create(path)?, &result)?;
    }
    for c in &result.table {
        match (&c.loglik, &c.message) {
            (Some(ll), _) => println!("k={}\tloglik={}", c.k, format_real(*ll)),
            (None, Some(m)) => println!("k={}\tfailed: {m}", c.k),
            (None, None) => println!("k={}\tfailed", c.k),
        }
    }
    println!("selected {}", result.selected);
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> missmix::Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let config: BenchConfig = toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("benchmark config: {e}")))?;
    let result = run_bench(&config)?;
    write_bench_csv(fs::File::create(&args.out)?, &result)?;
    let failures = result.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "wrote {} rows to {} ({failures} failed)",
        result.rows.len(),
        args.out.display()
    );
    for row in result.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: {} / {} / replicate {}: {}",
            row.scenario,
            row.method,
            row.replicate,
            row.error.as_deref().unwrap_or("unknown")
        );
    }
    Ok(())
}

fn cmd_ari(args: AriArgs) -> missmix::Result<()> {
    let tokens = CsvOptions::default().missing_tokens;
    let a = read_labels_csv(fs::File::open(&args.a)?, &tokens)?;
    let b = read_labels_csv(fs::File::open(&args.b)?, &tokens)?;
    let score = ari_optional(&a, &b)?;
    println!("{score:?}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> missmix::Result<()> {
    let model = read_model(&args.model)?;
    let params = &model.params;
    println!("components: {}  variables: {}", params.k(), params.d());
    println!("bandwidth: {}", params.kernel().h);
    println!();
    println!("proportions:");
    for (k, p) in params.pi().iter().enumerate() {
        println!("  component {k}: {p:.6}");
    }
    println!();
    println!("observation probabilities (rows components, columns variables):");
    for k in 0..params.k() {
        let row: Vec<String> = (0..params.d())
            .map(|j| format!("{:.4}", params.tau(k, j)))
            .collect();
        println!("  component {k}: {}", row.join("  "));
    }
    if !model.fit.warnings.is_empty() {
        println!();
        println!("fit warnings:");
        for w in &model.fit.warnings {
            println!("  - {w}");
        }
    }
    if let Some(path) = &args.data {
        let (raw, _) = read_csv_path(path, &args.csv.options())?;
        let data = standardize(&raw)?;
        let t = responsibilities(params, &data)?;
        let report = discriminative_report(params, &t, &data)?;
        println!();
        println!("variable separation (observation-probability spread, density L1, per-class missingness):");
        for row in &report {
            let rates: Vec<String> = row
                .class_miss_rates
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect();
            println!(
                "  variable {}: spread={:.4} l1={:.4} miss=[{}]",
                row.var,
                row.tau_spread,
                row.density_l1,
                rates.join(", ")
            );
        }
    }
    Ok(())
}

// label parsing for clap happens through FromStr on the core enums
#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn simulate_requires_delta_gamma_or_a_preset() {
        let r = Cli::try_parse_from([
            "missmix", "simulate", "-n", "10", "-d", "2", "--noise", "gaussian",
            "--mechanism", "mcar", "--out", "x.csv",
        ]);
        assert!(r.is_err());
        let r = Cli::try_parse_from([
            "missmix", "simulate", "-n", "10", "-d", "2", "--noise", "gaussian",
            "--mechanism", "mcar", "--out", "x.csv", "--preset-rate", "0.3",
        ]);
        assert!(r.is_ok());
        let r = Cli::try_parse_from([
            "missmix", "simulate", "-n", "10", "-d", "2", "--noise", "gaussian",
            "--mechanism", "mcar", "--out", "x.csv", "--delta", "1.0", "--gamma", "-0.5",
        ]);
        assert!(r.is_ok());
    }
}

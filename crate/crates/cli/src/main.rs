//! Command-line pipelines: ingest prices, fit models, sample configurations,
//! run information diagnostics, windowed analytics, and spanning-tree
//! exports.
//!
//! Exit codes: 0 success, 2 input or validation failure, 3 numeric
//! non-convergence (outputs are still written).

mod config;

use clap::{Parser, Subcommand};
use config::{FileConfig, Meta};
use maxent_market::analytics::{
    aggregate_preference_series, mf_entropy_series, net_orientation_series, normalize_series,
    smooth_series, trace_deviation_series, SeriesKind,
};
use maxent_market::exact::{
    entropy, enumerate, fit_exact, fit_independent, kl_divergence, multi_information,
    KlDivergence,
};
use maxent_market::graph::{
    coupling_to_distance, degree_distribution, fit_power_law, minimum_spanning_tree,
    mst_length_series, tree_to_dot, Tree,
};
use maxent_market::inverse::{invert, InversionMethod, InversionOptions};
use maxent_market::io::{
    read_model_json, read_price_csv, read_spin_csv, write_model_json,
    write_series_csv, write_spin_csv, DegreesJson, ModelJson, PowerLawJson, SeriesMeta, TreeJson,
};
use maxent_market::moments::empirical_moments;
use maxent_market::sampler::{make_synthetic_model, sample_configurations, ChainConfig};
use maxent_market::spin::{binarize, SpinMatrix, WindowSpec};
use maxent_market::{CoreError, CouplingModel, FitOptions};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "maxent-market",
    version,
    about = "Pairwise maximum-entropy models for binarized market data"
)]
struct Cli {
    /// Optional TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (falls back to MAXENT_MARKET_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binarize a wide price CSV (date,<label>_open,<label>_close,...) into
    /// a spin CSV; rows with missing quotes are dropped and reported.
    Ingest {
        /// Wide price CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Spin CSV to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Ingest report path (default: <output>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit a coupling model to a spin CSV.
    Fit {
        /// Spin CSV with the observations.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Model JSON to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Fit report path (default: <output>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// exact | nmf | tap | tanaka | rplm
        #[arg(long)]
        method: Option<String>,
        /// Covariance ridge scale for the mean-field methods.
        #[arg(long)]
        ridge: Option<f64>,
        /// L2 penalty for the pseudo-likelihood method.
        #[arg(long)]
        lambda: Option<f64>,
        /// Moment tolerance (exact) or gradient tolerance (rplm).
        #[arg(long)]
        tolerance: Option<f64>,
        /// Iteration cap for the iterative fits.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Sample configurations from a model JSON by Glauber dynamics.
    Sample {
        /// Fitted model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Spin CSV to write (a .meta.json sidecar records the chain).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Number of configurations to draw.
        #[arg(long)]
        rows: Option<usize>,
        /// Chain seed; generated and recorded when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Equilibration sweeps before the first sample.
        #[arg(long)]
        equilibration: Option<usize>,
        /// Sweeps between retained samples.
        #[arg(long)]
        thinning: Option<usize>,
    },
    /// Entropy, divergence, and multi-information diagnostics of a model
    /// against data.
    Diagnose {
        /// Fitted model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Spin CSV the model is checked against.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Diagnostics JSON to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Windowed analytics series (CSV with a JSON metadata header).
    Window {
        /// Spin CSV with the observations.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Series CSV to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// netOrientation | mfEntropy | aggregatePreference | traceDeviation
        /// | mstLengthDeviation
        #[arg(long)]
        kind: Option<String>,
        /// Window length in trading days (default depends on the kind).
        #[arg(long)]
        width: Option<usize>,
        /// Days between window starts (default depends on the kind).
        #[arg(long)]
        shift: Option<usize>,
        /// Inversion method for fit-based kinds (nmf|tap|tanaka|rplm; default rplm).
        #[arg(long)]
        method: Option<String>,
        /// Covariance ridge scale for the mean-field methods.
        #[arg(long)]
        ridge: Option<f64>,
        /// L2 penalty for the pseudo-likelihood method.
        #[arg(long)]
        lambda: Option<f64>,
        /// Half-width of the centered moving average applied before
        /// normalization.
        #[arg(long)]
        smooth: Option<usize>,
        /// Normalize to zero mean and unit standard deviation (applied after
        /// smoothing).
        #[arg(long, action = clap::ArgAction::SetTrue)]
        normalize: bool,
    },
    /// Minimum spanning tree of the interaction graph (DOT + JSON).
    Mst {
        /// Fitted model JSON (alternative to --input + --method).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Spin CSV to fit first.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Inversion method when fitting from --input (nmf|tap|tanaka|rplm).
        #[arg(long)]
        method: Option<String>,
        /// Covariance ridge scale for the mean-field methods.
        #[arg(long)]
        ridge: Option<f64>,
        /// L2 penalty for the pseudo-likelihood method.
        #[arg(long)]
        lambda: Option<f64>,
        /// DOT rendering of the tree.
        #[arg(long)]
        output_dot: Option<PathBuf>,
        /// JSON adjacency form of the tree.
        #[arg(long)]
        output_json: Option<PathBuf>,
    },
    /// Degree frequencies of the spanning tree and a power-law fit.
    Degrees {
        /// Fitted model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Spin CSV to fit first (with --method).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Inversion method when fitting from --input (nmf|tap|tanaka|rplm).
        #[arg(long)]
        method: Option<String>,
        /// Covariance ridge scale for the mean-field methods.
        #[arg(long)]
        ridge: Option<f64>,
        /// L2 penalty for the pseudo-likelihood method.
        #[arg(long)]
        lambda: Option<f64>,
        /// Pre-computed degree frequencies JSON ({"frequencies": [[d, n],..]}).
        #[arg(long)]
        freqs: Option<PathBuf>,
        /// Degrees + power-law JSON to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic ground-truth model (and optionally sample data
    /// from it).
    Synth {
        /// Number of assets.
        #[arg(long)]
        n: Option<usize>,
        /// Couplings are uniform on [0, coupling_scale] (default 0.3).
        #[arg(long)]
        coupling_scale: Option<f64>,
        /// Fields are uniform on +-field_scale (default 0.1).
        #[arg(long)]
        field_scale: Option<f64>,
        /// Model seed; generated and recorded when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Model JSON to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also sample this many configurations into --data.
        #[arg(long)]
        rows: Option<usize>,
        /// Spin CSV for the sampled configurations.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Equilibration sweeps before the first sample.
        #[arg(long)]
        equilibration: Option<usize>,
        /// Sweeps between retained samples.
        #[arg(long)]
        thinning: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let threads = cli
        .threads
        .or(file.threads)
        .or_else(|| {
            std::env::var("MAXENT_MARKET_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        });
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    match cli.command {
        Command::Ingest { input, output, report } => cmd_ingest(&file, input, output, report),
        Command::Fit {
            input,
            output,
            report,
            method,
            ridge,
            lambda,
            tolerance,
            max_iterations,
        } => cmd_fit(&file, input, output, report, method, ridge, lambda, tolerance, max_iterations),
        Command::Sample {
            model,
            output,
            rows,
            seed,
            equilibration,
            thinning,
        } => cmd_sample(&file, model, output, rows, seed, equilibration, thinning),
        Command::Diagnose { model, input, output } => cmd_diagnose(&file, model, input, output),
        Command::Window {
            input,
            output,
            kind,
            width,
            shift,
            method,
            ridge,
            lambda,
            smooth,
            normalize,
        } => cmd_window(
            &file, input, output, kind, width, shift, method, ridge, lambda, smooth, normalize,
        ),
        Command::Mst {
            model,
            input,
            method,
            ridge,
            lambda,
            output_dot,
            output_json,
        } => cmd_mst(&file, model, input, method, ridge, lambda, output_dot, output_json),
        Command::Degrees {
            model,
            input,
            method,
            ridge,
            lambda,
            freqs,
            output,
        } => cmd_degrees(&file, model, input, method, ridge, lambda, freqs, output),
        Command::Synth {
            n,
            coupling_scale,
            field_scale,
            seed,
            output,
            rows,
            data,
            equilibration,
            thinning,
        } => cmd_synth(
            &file, n, coupling_scale, field_scale, seed, output, rows, data, equilibration,
            thinning,
        ),
    }
}

fn core_err(e: CoreError) -> String {
    e.to_string()
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, String> {
    value.ok_or_else(|| format!("missing required option --{flag}"))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn open_reader(path: &Path) -> Result<BufReader<File>, String> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("cannot open {}: {e}", path.display()))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut w = create_writer(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| e.to_string())?;
    w.write_all(b"\n").map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())
}

fn load_spins(path: &Path) -> Result<SpinMatrix, String> {
    read_spin_csv(open_reader(path)?).map_err(core_err)
}

fn load_model(path: &Path) -> Result<(CouplingModel, ModelJson), String> {
    let json = read_model_json(open_reader(path)?).map_err(core_err)?;
    let model = json.clone().into_model().map_err(core_err)?;
    Ok((model, json))
}

fn inversion_options(
    method: InversionMethod,
    ridge: Option<f64>,
    lambda: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
) -> InversionOptions {
    let mut opts = InversionOptions::new(method);
    if let Some(r) = ridge {
        opts.ridge = r;
    }
    if let Some(l) = lambda {
        opts.rplm_lambda = l;
    }
    if let Some(t) = tolerance {
        opts.rplm_tolerance = t;
    }
    if let Some(m) = max_iterations {
        opts.rplm_max_iterations = m;
    }
    opts
}

fn cmd_ingest(
    file: &FileConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    report: Option<PathBuf>,
) -> Result<u8, String> {
    let input = require(input.or(file.input.clone().map(Into::into)), "input")?;
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;
    let report_path = report
        .or(file.report.clone().map(Into::into))
        .unwrap_or_else(|| PathBuf::from(format!("{}.report.json", output.display())));

    #[derive(Serialize)]
    struct Resolved {
        input: String,
        output: String,
    }
    let meta = Meta::new(
        "ingest",
        &Resolved {
            input: path_str(&input),
            output: path_str(&output),
        },
        None,
    );

    let (prices, ingest) = read_price_csv(open_reader(&input)?).map_err(core_err)?;
    let spins = binarize(&prices).map_err(core_err)?;
    write_spin_csv(create_writer(&output)?, &spins).map_err(core_err)?;

    #[derive(Serialize)]
    struct ReportJson {
        meta: serde_json::Value,
        rows_read: usize,
        rows_kept: usize,
        dropped_dates: Vec<String>,
        first_date: String,
        last_date: String,
        labels: Vec<String>,
    }
    write_json_file(
        &report_path,
        &ReportJson {
            meta: meta.json(),
            rows_read: ingest.rows_read,
            rows_kept: ingest.rows_kept,
            dropped_dates: ingest.dropped_dates,
            first_date: ingest.first_date,
            last_date: ingest.last_date,
            labels: ingest.labels,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct FitReportJson {
    meta: serde_json::Value,
    method: String,
    converged: bool,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_moment_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradient_norm: Option<f64>,
    warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    file: &FileConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    report: Option<PathBuf>,
    method: Option<String>,
    ridge: Option<f64>,
    lambda: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
) -> Result<u8, String> {
    let input = require(input.or(file.input.clone().map(Into::into)), "input")?;
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;
    let method = require(method.or(file.method.clone()), "method")?;
    let ridge = ridge.or(file.ridge);
    let lambda = lambda.or(file.lambda);
    let tolerance = tolerance.or(file.tolerance);
    let max_iterations = max_iterations.or(file.max_iterations);
    let report_path = report
        .or(file.report.clone().map(Into::into))
        .unwrap_or_else(|| PathBuf::from(format!("{}.report.json", output.display())));

    #[derive(Serialize)]
    struct Resolved {
        input: String,
        output: String,
        method: String,
        ridge: Option<f64>,
        lambda: Option<f64>,
        tolerance: Option<f64>,
        max_iterations: Option<usize>,
    }
    let meta = Meta::new(
        "fit",
        &Resolved {
            input: path_str(&input),
            output: path_str(&output),
            method: method.clone(),
            ridge,
            lambda,
            tolerance,
            max_iterations,
        },
        None,
    );

    let spins = load_spins(&input)?;
    let mut warnings: Vec<String> = Vec::new();

    let (model_json, report_json, converged) = if method == "exact" {
        if spins.num_assets() > maxent_market::exact::ENUMERATION_MAX_SPINS {
            return Err(format!(
                "exact fitting supports at most {} assets, got {}; \
                 use an approximate method (--method nmf|tap|tanaka|rplm)",
                maxent_market::exact::ENUMERATION_MAX_SPINS,
                spins.num_assets()
            ));
        }
        let raw = empirical_moments(&spins);
        let targets = raw.smoothed().map_err(core_err)?;
        if raw.is_saturated() {
            warnings.push("saturated moments; pseudocount smoothing applied".into());
        }
        let mut options = FitOptions::default();
        if let Some(t) = tolerance {
            options.tolerance = t;
        }
        if let Some(m) = max_iterations {
            options.max_iterations = m;
        }
        let fit = fit_exact(&targets, spins.labels(), &options).map_err(core_err)?;
        let mut mj = ModelJson::from_model(&fit.model, &warnings);
        mj.meta = Some(meta.json());
        let rj = FitReportJson {
            meta: meta.json(),
            method,
            converged: fit.converged,
            iterations: fit.iterations,
            max_moment_error: Some(fit.max_moment_error),
            gradient_norm: None,
            warnings: warnings.clone(),
        };
        (mj, rj, fit.converged)
    } else {
        let m = InversionMethod::parse(&method).ok_or_else(|| {
            format!("unknown method '{method}' (expected exact|nmf|tap|tanaka|rplm)")
        })?;
        let opts = inversion_options(m, ridge, lambda, tolerance, max_iterations);
        let inv = invert(&spins, &opts).map_err(core_err)?;
        warnings.extend(inv.warnings.clone());
        let mut mj = ModelJson::from_model(&inv.model, &warnings);
        mj.meta = Some(meta.json());
        let rj = FitReportJson {
            meta: meta.json(),
            method,
            converged: inv.converged,
            iterations: inv.iterations,
            max_moment_error: None,
            gradient_norm: inv.gradient_norm,
            warnings,
        };
        (mj, rj, inv.converged)
    };

    write_model_json(create_writer(&output)?, &model_json).map_err(core_err)?;
    write_json_file(&report_path, &report_json)?;
    Ok(if converged { 0 } else { EXIT_NON_CONVERGENCE })
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    file: &FileConfig,
    model: Option<PathBuf>,
    output: Option<PathBuf>,
    rows: Option<usize>,
    seed: Option<u64>,
    equilibration: Option<usize>,
    thinning: Option<usize>,
) -> Result<u8, String> {
    let model_path = require(model.or(file.model.clone().map(Into::into)), "model")?;
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;
    let rows = require(rows.or(file.rows), "rows")?;
    // Randomized commands need a seed; generate and record one if absent.
    let (seed, seed_generated) = match seed.or(file.seed) {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    let (model, _) = load_model(&model_path)?;
    let n = model.len();
    let equilibration = equilibration
        .or(file.equilibration)
        .unwrap_or(10_000);
    let thinning = thinning.or(file.thinning).unwrap_or(n.max(1)).max(1);

    #[derive(Serialize)]
    struct Resolved {
        model: String,
        output: String,
        rows: usize,
        seed: u64,
        equilibration: usize,
        thinning: usize,
    }
    let meta = Meta::new(
        "sample",
        &Resolved {
            model: path_str(&model_path),
            output: path_str(&output),
            rows,
            seed,
            equilibration,
            thinning,
        },
        Some(seed),
    );

    let chain = ChainConfig {
        seed,
        equilibration_sweeps: equilibration,
        measure_sweeps: 0,
        thinning,
    };
    let spins = sample_configurations(&model, &chain, rows).map_err(core_err)?;
    write_spin_csv(create_writer(&output)?, &spins).map_err(core_err)?;

    #[derive(Serialize)]
    struct Sidecar {
        meta: serde_json::Value,
        seed: u64,
        seed_generated: bool,
        generator: &'static str,
        equilibration_sweeps: usize,
        thinning_sweeps: usize,
        rows: usize,
        attempts_per_sweep: usize,
        total_attempts: usize,
    }
    let sidecar_path = PathBuf::from(format!("{}.meta.json", output.display()));
    write_json_file(
        &sidecar_path,
        &Sidecar {
            meta: meta.json(),
            seed,
            seed_generated,
            generator: maxent_market::sampler::GENERATOR_NAME,
            equilibration_sweeps: equilibration,
            thinning_sweeps: thinning,
            rows,
            attempts_per_sweep: n,
            total_attempts: (equilibration + rows * thinning) * n,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
#[serde(untagged)]
enum KlJson {
    Finite { nats: f64 },
    OutOfSupport { out_of_support: bool },
}

impl From<KlDivergence> for KlJson {
    fn from(kl: KlDivergence) -> Self {
        match kl {
            KlDivergence::Finite(nats) => KlJson::Finite { nats },
            KlDivergence::OutOfSupport => KlJson::OutOfSupport {
                out_of_support: true,
            },
        }
    }
}

fn cmd_diagnose(
    file: &FileConfig,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<u8, String> {
    let model_path = require(model.or(file.model.clone().map(Into::into)), "model")?;
    let input = require(input.or(file.input.clone().map(Into::into)), "input")?;
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;

    #[derive(Serialize)]
    struct Resolved {
        model: String,
        input: String,
        output: String,
    }
    let meta = Meta::new(
        "diagnose",
        &Resolved {
            model: path_str(&model_path),
            input: path_str(&input),
            output: path_str(&output),
        },
        None,
    );

    let (model, _) = load_model(&model_path)?;
    let spins = load_spins(&input)?;
    let info = multi_information(&spins, &model).map_err(core_err)?;

    let pairwise_dist = enumerate(&model).map_err(core_err)?;
    let data_dist =
        maxent_market::moments::empirical_distribution(&spins).map_err(core_err)?;
    let independent = fit_independent(
        &empirical_moments(&spins).smoothed().map_err(core_err)?,
        spins.labels(),
    )
    .map_err(core_err)?;
    let independent_dist = enumerate(&independent).map_err(core_err)?;

    let kl_pairwise_to_data = kl_divergence(&pairwise_dist, &data_dist).map_err(core_err)?;
    let kl_data_to_pairwise = kl_divergence(&data_dist, &pairwise_dist).map_err(core_err)?;
    let kl_independent_to_data =
        kl_divergence(&independent_dist, &data_dist).map_err(core_err)?;

    #[derive(Serialize)]
    struct Entropies {
        independent: f64,
        pairwise: f64,
        data: f64,
    }
    #[derive(Serialize)]
    struct Kls {
        pairwise_to_data: KlJson,
        data_to_pairwise: KlJson,
        independent_to_data: KlJson,
    }
    #[derive(Serialize)]
    struct Mi {
        total: f64,
        pairwise: f64,
        ratio: Option<f64>,
    }
    #[derive(Serialize)]
    struct Diagnostics {
        meta: serde_json::Value,
        entropy: Entropies,
        kl: Kls,
        multi_information: Mi,
    }
    write_json_file(
        &output,
        &Diagnostics {
            meta: meta.json(),
            entropy: Entropies {
                independent: info.entropy_independent,
                pairwise: info.entropy_pairwise,
                data: entropy(&data_dist),
            },
            kl: Kls {
                pairwise_to_data: kl_pairwise_to_data.into(),
                data_to_pairwise: kl_data_to_pairwise.into(),
                independent_to_data: kl_independent_to_data.into(),
            },
            multi_information: Mi {
                total: info.total,
                pairwise: info.pairwise,
                ratio: info.ratio,
            },
        },
    )?;
    Ok(0)
}

fn default_window(kind: SeriesKind) -> (usize, usize) {
    match kind {
        SeriesKind::NetOrientation => (25, 25),
        SeriesKind::MfEntropy => (300, 1),
        SeriesKind::AggregatePreference => (200, 2),
        SeriesKind::TraceDeviation => (200, 5),
        SeriesKind::MstLengthDeviation => (100, 10),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_window(
    file: &FileConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    kind: Option<String>,
    width: Option<usize>,
    shift: Option<usize>,
    method: Option<String>,
    ridge: Option<f64>,
    lambda: Option<f64>,
    smooth: Option<usize>,
    normalize: bool,
) -> Result<u8, String> {
    let input = require(input.or(file.input.clone().map(Into::into)), "input")?;
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;
    let kind_name = require(kind.or(file.kind.clone()), "kind")?;
    let kind = SeriesKind::parse(&kind_name).ok_or_else(|| {
        format!(
            "unknown kind '{kind_name}' (expected netOrientation|mfEntropy|\
             aggregatePreference|traceDeviation|mstLengthDeviation)"
        )
    })?;
    let defaults = default_window(kind);
    let width = width.or(file.width).unwrap_or(defaults.0);
    let shift = shift.or(file.shift).unwrap_or(defaults.1);
    let smooth = smooth.or(file.smooth);
    let normalize = normalize || file.normalize.unwrap_or(false);
    let method_name = method.or(file.method.clone());
    let ridge = ridge.or(file.ridge);
    let lambda = lambda.or(file.lambda);

    let needs_method = matches!(
        kind,
        SeriesKind::AggregatePreference | SeriesKind::MstLengthDeviation
    );
    let inversion = if needs_method {
        let name = method_name.clone().unwrap_or_else(|| "rplm".to_string());
        if name == "exact" {
            return Err(
                "windowed analytics use the approximate methods: nmf|tap|tanaka|rplm".into(),
            );
        }
        let m = InversionMethod::parse(&name)
            .ok_or_else(|| format!("unknown method '{name}' (expected nmf|tap|tanaka|rplm)"))?;
        Some(inversion_options(m, ridge, lambda, None, None))
    } else {
        None
    };

    #[derive(Serialize)]
    struct Resolved {
        input: String,
        output: String,
        kind: String,
        width: usize,
        shift: usize,
        method: Option<String>,
        ridge: Option<f64>,
        lambda: Option<f64>,
        smooth: Option<usize>,
        normalize: bool,
    }
    let resolved_method = inversion.as_ref().map(|o| o.method.name().to_string());
    let meta = Meta::new(
        "window",
        &Resolved {
            input: path_str(&input),
            output: path_str(&output),
            kind: kind.name().to_string(),
            width,
            shift,
            method: resolved_method.clone(),
            ridge,
            lambda,
            smooth,
            normalize,
        },
        None,
    );

    let spins = load_spins(&input)?;
    let spec = WindowSpec::new(width, shift).map_err(core_err)?;
    let mut report = match kind {
        SeriesKind::NetOrientation => net_orientation_series(&spins, &spec).map_err(core_err)?,
        SeriesKind::MfEntropy => mf_entropy_series(&spins, &spec).map_err(core_err)?,
        SeriesKind::AggregatePreference => {
            aggregate_preference_series(&spins, &spec, &inversion.unwrap()).map_err(core_err)?
        }
        SeriesKind::TraceDeviation => trace_deviation_series(&spins, &spec).map_err(core_err)?,
        SeriesKind::MstLengthDeviation => {
            mst_length_series(&spins, &spec, &inversion.unwrap()).map_err(core_err)?
        }
    };
    // Documented order: smooth first, then normalize.
    if let Some(h) = smooth {
        report = smooth_series(&report, h);
    }
    if normalize {
        report = normalize_series(&report).map_err(core_err)?;
    }

    let series_meta = SeriesMeta {
        kind: kind.name().to_string(),
        width,
        shift,
        method: resolved_method,
        smoothed_half_width: smooth,
        normalized: normalize,
        degenerate_normalization: report.degenerate_normalization,
        meta: Some(meta.json()),
    };
    write_series_csv(create_writer(&output)?, &report, &series_meta).map_err(core_err)?;
    Ok(0)
}

/// Obtains a tree either from a fitted model JSON or by fitting spin data.
fn tree_from_sources(
    file: &FileConfig,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    method: Option<String>,
    ridge: Option<f64>,
    lambda: Option<f64>,
) -> Result<(Tree, String), String> {
    let model = model.or(file.model.clone().map(Into::into));
    let input = input.or(file.input.clone().map(Into::into));
    let coupling_model = match (model, input) {
        (Some(path), _) => load_model(&path)?.0,
        (None, Some(data_path)) => {
            let method = require(method.or(file.method.clone()), "method")?;
            let m = InversionMethod::parse(&method).ok_or_else(|| {
                format!("unknown method '{method}' (expected nmf|tap|tanaka|rplm)")
            })?;
            let spins = load_spins(&data_path)?;
            invert(
                &spins,
                &inversion_options(m, ridge.or(file.ridge), lambda.or(file.lambda), None, None),
            )
            .map_err(core_err)?
            .model
        }
        (None, None) => return Err("provide --model or --input with --method".into()),
    };
    let source = format!("{} assets", coupling_model.len());
    let graph = coupling_to_distance(&coupling_model).map_err(core_err)?;
    Ok((minimum_spanning_tree(&graph), source))
}

#[allow(clippy::too_many_arguments)]
fn cmd_mst(
    file: &FileConfig,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    method: Option<String>,
    ridge: Option<f64>,
    lambda: Option<f64>,
    output_dot: Option<PathBuf>,
    output_json: Option<PathBuf>,
) -> Result<u8, String> {
    #[derive(Serialize)]
    struct Resolved {
        model: Option<String>,
        input: Option<String>,
        method: Option<String>,
        ridge: Option<f64>,
        lambda: Option<f64>,
    }
    let meta = Meta::new(
        "mst",
        &Resolved {
            model: model.as_deref().map(path_str),
            input: input.as_deref().map(path_str),
            method: method.clone(),
            ridge,
            lambda,
        },
        None,
    );
    let (tree, _) = tree_from_sources(file, model, input, method, ridge, lambda)?;

    if let Some(dot_path) = output_dot {
        let mut w = create_writer(&dot_path)?;
        writeln!(
            w,
            "// maxent-market {} config {}",
            env!("CARGO_PKG_VERSION"),
            meta.config_hash
        )
        .map_err(|e| e.to_string())?;
        w.write_all(tree_to_dot(&tree).as_bytes())
            .map_err(|e| e.to_string())?;
        w.flush().map_err(|e| e.to_string())?;
    }
    if let Some(json_path) = output_json {
        let mut tj = TreeJson::from_tree(&tree);
        tj.meta = Some(meta.json());
        write_json_file(&json_path, &tj)?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_degrees(
    file: &FileConfig,
    model: Option<PathBuf>,
    input: Option<PathBuf>,
    method: Option<String>,
    ridge: Option<f64>,
    lambda: Option<f64>,
    freqs: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<u8, String> {
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;

    #[derive(Serialize)]
    struct Resolved {
        model: Option<String>,
        input: Option<String>,
        freqs: Option<String>,
        method: Option<String>,
        output: String,
    }
    let meta = Meta::new(
        "degrees",
        &Resolved {
            model: model.as_deref().map(path_str),
            input: input.as_deref().map(path_str),
            freqs: freqs.as_deref().map(path_str),
            method: method.clone(),
            output: path_str(&output),
        },
        None,
    );

    let frequency_map = if let Some(freqs_path) = freqs {
        let parsed: DegreesJson = serde_json::from_reader(open_reader(&freqs_path)?)
            .map_err(|e| format!("invalid degrees JSON: {e}"))?;
        parsed.frequency_map()
    } else {
        let (tree, _) = tree_from_sources(file, model, input, method, ridge, lambda)?;
        degree_distribution(&tree)
    };

    let fit = fit_power_law(&frequency_map).map_err(core_err)?;
    let mut degrees = DegreesJson::from_map(&frequency_map);
    degrees.power_law = Some(PowerLawJson::from(&fit));
    degrees.meta = Some(meta.json());
    write_json_file(&output, &degrees)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    file: &FileConfig,
    n: Option<usize>,
    coupling_scale: Option<f64>,
    field_scale: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    rows: Option<usize>,
    data: Option<PathBuf>,
    equilibration: Option<usize>,
    thinning: Option<usize>,
) -> Result<u8, String> {
    let n = require(n.or(file.n), "n")?;
    let coupling_scale = coupling_scale.or(file.coupling_scale).unwrap_or(0.3);
    let field_scale = field_scale.or(file.field_scale).unwrap_or(0.1);
    let output = require(output.or(file.output.clone().map(Into::into)), "output")?;
    let (seed, seed_generated) = match seed.or(file.seed) {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    let rows = rows.or(file.rows);
    let equilibration = equilibration.or(file.equilibration).unwrap_or(10_000);
    let thinning = thinning.or(file.thinning).unwrap_or(n.max(1)).max(1);

    #[derive(Serialize)]
    struct Resolved {
        n: usize,
        coupling_scale: f64,
        field_scale: f64,
        seed: u64,
        output: String,
        rows: Option<usize>,
        equilibration: usize,
        thinning: usize,
    }
    let meta = Meta::new(
        "synth",
        &Resolved {
            n,
            coupling_scale,
            field_scale,
            seed,
            output: path_str(&output),
            rows,
            equilibration,
            thinning,
        },
        Some(seed),
    );

    let model =
        make_synthetic_model(n, coupling_scale, field_scale, seed).map_err(core_err)?;
    let mut mj = ModelJson::from_model(&model, &[]);
    let mut meta_json = meta.json();
    if seed_generated {
        meta_json["seed_generated"] = serde_json::Value::Bool(true);
    }
    mj.meta = Some(meta_json);
    write_model_json(create_writer(&output)?, &mj).map_err(core_err)?;

    if let Some(rows) = rows {
        let data_path = require(data.or(file.data.clone().map(Into::into)), "data")?;
        // The chain gets its own stream, one past the model seed.
        let chain = ChainConfig {
            seed: seed.wrapping_add(1),
            equilibration_sweeps: equilibration,
            measure_sweeps: 0,
            thinning,
        };
        let spins = sample_configurations(&model, &chain, rows).map_err(core_err)?;
        write_spin_csv(create_writer(&data_path)?, &spins).map_err(core_err)?;

        #[derive(Serialize)]
        struct Sidecar {
            meta: serde_json::Value,
            chain_seed: u64,
            generator: &'static str,
            equilibration_sweeps: usize,
            thinning_sweeps: usize,
            rows: usize,
            attempts_per_sweep: usize,
            total_attempts: usize,
        }
        let sidecar_path = PathBuf::from(format!("{}.meta.json", data_path.display()));
        write_json_file(
            &sidecar_path,
            &Sidecar {
                meta: meta.json(),
                chain_seed: seed.wrapping_add(1),
                generator: maxent_market::sampler::GENERATOR_NAME,
                equilibration_sweeps: equilibration,
                thinning_sweeps: thinning,
                rows,
                attempts_per_sweep: n,
                total_attempts: (equilibration + rows * thinning) * n,
            },
        )?;
    }
    Ok(0)
}

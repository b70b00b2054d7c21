//! `specsense` — scenario generation, grid experiments, filter-estimation
//! demos, and common-component extraction from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 scenario generation
//! infeasibility, 1 anything else.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use specsense::channel::{apply_channel, draw_filters, ChannelRealization};
use specsense::common::{
    common_innovation_l1_closed, common_joint_l1_closed, common_via_solver, CommonEstimate,
    CommonObjective,
};
use specsense::harness::{emit_csv, run_experiment, GridConfig};
use specsense::recon::ReconMethod;
use specsense::sensing::{draw_sensing_matrix, Ensemble};
use specsense::solver::EqualityConfig;
use specsense::{build_operators, generate_group, GroupParams, GroupScenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "specsense", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a group scenario and write it as JSON.
    Generate(GenerateArgs),
    /// Run a grid experiment from a TOML config and write a CSV.
    Run(RunArgs),
    /// Demonstrate pilot-based link-filter estimation.
    Filters(FiltersArgs),
    /// Extract the optimal common component of a scenario as JSON.
    Common(CommonArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Frequency bins (even, at least 8).
    #[arg(long, default_value_t = 64)]
    bins: usize,
    /// Sensors in the group.
    #[arg(long, default_value_t = 4)]
    sensors: usize,
    #[arg(long, default_value_t = 4)]
    k_common: usize,
    #[arg(long, default_value_t = 2)]
    k_inn: usize,
    /// Smallest edge magnitude.
    #[arg(long, default_value_t = 0.5)]
    amp_min: f64,
    /// Largest edge magnitude.
    #[arg(long, default_value_t = 1.5)]
    amp_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Odd circulant moving-average length for the smoother.
    #[arg(long, default_value_t = 3)]
    smoothing_len: usize,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the method list (comma-separated names).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodName>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Individual,
    Jsm,
    Innovation,
    InnovationChannelAware,
}

impl From<MethodName> for ReconMethod {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Individual => ReconMethod::Individual,
            MethodName::Jsm => ReconMethod::Jsm,
            MethodName::Innovation => ReconMethod::Innovation,
            MethodName::InnovationChannelAware => ReconMethod::InnovationChannelAware,
        }
    }
}

#[derive(Args)]
struct FiltersArgs {
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long, default_value_t = 4)]
    sensors: usize,
    /// Sensing rate ρ = w/N.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    /// Link severity (tail standard deviation scale).
    #[arg(long, default_value_t = 0.3)]
    sigma_beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    smoothing_len: usize,
    /// Emit a JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON produced by `generate`.
    #[arg(long)]
    scenario: PathBuf,
    /// Execution path for the two programs.
    #[arg(long, value_enum, default_value_t = Route::Closed)]
    route: Route,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    Closed,
    Solver,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<specsense::Error>() {
        return match e {
            specsense::Error::GenerationInfeasible { .. }
            | specsense::Error::GenerationInfeasibleAt { .. } => 3,
            specsense::Error::InvalidParameter(_)
            | specsense::Error::DimensionMismatch(_)
            | specsense::Error::SingularSmoother { .. } => 2,
            _ => 1,
        };
    }
    if err.downcast_ref::<toml::de::Error>().is_some() {
        return 2;
    }
    1
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run(args),
        Command::Filters(args) => filters(args),
        Command::Common(args) => common(args),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let ops = build_operators(args.bins, args.smoothing_len)?;
    let params = GroupParams {
        k_common: args.k_common,
        k_inn: args.k_inn,
        amplitude_range: (args.amp_min, args.amp_max),
        ..Default::default()
    };
    let scenario = generate_group(&ops, args.sensors, &params, args.seed)?;
    let text = scenario.to_json()?;
    match args.out {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {path:?}"))?;
            eprintln!("wrote {path:?}");
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {:?}", args.config))?;
    let mut cfg: GridConfig = toml::from_str(&text)
        .with_context(|| format!("parsing {:?}", args.config))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(methods) = args.methods {
        cfg.methods = methods.into_iter().map(ReconMethod::from).collect();
    }
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    emit_csv(&result, &args.out)?;
    eprintln!(
        "wrote {} rows ({} aggregates) to {:?}",
        result.rows.len(),
        result.aggregates.len(),
        args.out
    );
    Ok(())
}

fn filters(args: FiltersArgs) -> Result<()> {
    let ops = build_operators(args.bins, args.smoothing_len)?;
    let w = ((args.rate * args.bins as f64).round() as usize).clamp(1, args.bins);
    let scenario = generate_group(
        &ops,
        args.sensors,
        &GroupParams::default(),
        args.seed,
    )?;
    let phis: Vec<_> = (0..args.sensors)
        .map(|j| draw_sensing_matrix(w, args.bins, Ensemble::Gaussian, args.seed ^ (j as u64 + 1)))
        .collect::<specsense::Result<_>>()?;
    let truth = draw_filters(args.sensors, w, args.sigma_beta, args.seed ^ 0xF1)?;
    let channel = ChannelRealization { filters: truth.clone(), noise_sigma: args.noise_sigma };

    // Pilot pass: the fusion center knows the common component, so the
    // sent pilots are reconstructible on its side.
    let z_common = common_innovation_l1_closed(scenario.psds(), &ops).z_common;
    let pilots_sent: Vec<_> = phis
        .iter()
        .map(|phi| phi.matrix().dot(ops.dict_matrix()).dot(z_common.values()))
        .collect();
    let received = apply_channel(
        &specsense::sensing::MeasurementSet::new(pilots_sent.clone()),
        &channel,
        args.seed ^ 0xBEEF,
    )?;
    let pilots_received: Vec<ndarray::Array1<f64>> = (0..args.sensors)
        .map(|j| received.iter().skip(j * w).take(w).copied().collect())
        .collect();
    let estimated = specsense::channel::estimate_filters(&pilots_sent, &pilots_received)?;

    let mut rows = Vec::new();
    for j in 0..args.sensors {
        let err: f64 = estimated[j]
            .taps()
            .iter()
            .zip(truth[j].taps())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        rows.push((j, truth[j].energy(), err / truth[j].energy()));
    }

    if args.json {
        let report = serde_json::json!({
            "bins": args.bins,
            "sensors": args.sensors,
            "rate": args.rate,
            "sigma_beta": args.sigma_beta,
            "noise_sigma": args.noise_sigma,
            "per_sensor": rows
                .iter()
                .map(|(j, energy, rel)| {
                    serde_json::json!({
                        "sensor": j,
                        "filter_energy": energy,
                        "relative_error": rel,
                    })
                })
                .collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("sensor  filter_energy  relative_error");
        for (j, energy, rel) in rows {
            println!("{j:>6}  {energy:>13.6}  {rel:>14.3e}");
        }
    }
    Ok(())
}

fn common(args: CommonArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {:?}", args.scenario))?;
    let header: serde_json::Value = serde_json::from_str(&text)?;
    let n = header
        .get("n")
        .and_then(|v| v.as_u64())
        .context("scenario file lacks the bin count")? as usize;
    // Only the difference/cumulative-sum pair matters here; the smoother is
    // irrelevant to common-component extraction.
    let ops = build_operators(n, 1)?;
    let scenario = GroupScenario::from_json(&text, &ops)?;

    let estimates: Vec<CommonEstimate> = match args.route {
        Route::Closed => vec![
            common_joint_l1_closed(scenario.psds(), &ops),
            common_innovation_l1_closed(scenario.psds(), &ops),
        ],
        Route::Solver => vec![
            common_via_solver(
                scenario.psds(),
                &ops,
                CommonObjective::JointL1,
                &EqualityConfig::default(),
            )?,
            common_via_solver(
                scenario.psds(),
                &ops,
                CommonObjective::InnovationL1,
                &EqualityConfig::default(),
            )?,
        ],
    };

    let payload = serde_json::json!({
        "n": n,
        "sensors": scenario.sensor_count(),
        "route": match args.route { Route::Closed => "closed", Route::Solver => "solver" },
        "estimates": estimates
            .iter()
            .map(|est| {
                serde_json::json!({
                    "objective_kind": est.which.name(),
                    "objective": est.objective,
                    "z_common": est.z_common.values().to_vec(),
                })
            })
            .collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&payload)?;
    match args.out {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {path:?}"))?;
            eprintln!("wrote {path:?}");
        }
        None => println!("{text}"),
    }
    Ok(())
}

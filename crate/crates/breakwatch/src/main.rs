//! Thin command-line front end over the library.

use breakwatch::asymptotics::{
    am_bm, cm_dm, delta_measure, explosive_threshold, fa1_fb1, simulate_rw_limit, ExplosiveParams,
    LongRunEstimation,
};
use breakwatch::critical::{closed_end_critical_value, critical_value, CriticalSource, Provenance};
use breakwatch::dgp::RegressorProcess;
use breakwatch::error::Error;
use breakwatch::experiments::{run_power_study, run_size_study, tau_density, ExperimentPlan, TauDensitySpec};
use breakwatch::io::{ingest_csv, monitor_command, remonitor_command, MonitorRunConfig};
use breakwatch::stationarity::{kpss_level, Bandwidth};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "breakwatch",
    version,
    about = "Sequential structural-break monitoring and its Monte Carlo laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the critical constant c(gamma, alpha).
    Critvals(CritvalsArgs),
    /// Monitor a CSV dataset for a structural break.
    Monitor(MonitorArgs),
    /// Restart monitoring from a later training window.
    Remonitor(RemonitorArgs),
    /// KPSS level-stationarity test on one CSV column.
    Kpss(KpssArgs),
    /// False-detection rates for the stable designs.
    SimulateSize(PlanArgs),
    /// Empirical power for the change designs.
    SimulatePower(PlanArgs),
    /// Stopping-time histogram and density for one cell.
    TauDensity(TauDensityArgs),
    /// Stopping-time approximation constants and limit laws.
    #[command(subcommand)]
    Asymptotics(AsymptoticsCommand),
}

#[derive(Args)]
struct CritvalsArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    alpha: f64,
    /// Simulate instead of reading the built-in table.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 50_000)]
    reps: usize,
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Closed-end factor c* (N = c* M); implies simulation.
    #[arg(long)]
    closed_end: Option<f64>,
}

#[derive(Args)]
struct MonitorArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV file; overrides the `data` entry of the config.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct RemonitorArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// New first training row (1-based, in the aligned dataset).
    #[arg(long)]
    training_start: usize,
    /// Aligned row of the previous detection; overlap triggers a warning.
    #[arg(long)]
    previous_detection: Option<usize>,
}

#[derive(Args)]
struct KpssArgs {
    /// Column to test.
    #[arg(long)]
    column: String,
    /// Bartlett bandwidth; default is the floor(4 (n/100)^(1/4)) rule.
    #[arg(long)]
    bandwidth: Option<usize>,
    file: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// TOML experiment plan.
    #[arg(long)]
    plan: PathBuf,
    /// Results directory (CSV per cell + JSON summary + manifest).
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct TauDensityArgs {
    /// TOML cell spec.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AsymptoticsCommand {
    /// Change magnitude for a stationary alternative.
    Delta(DeltaArgs),
    /// Stopping-time center/scale (a_m, b_m), stationary alternative.
    AmBm(AmBmArgs),
    /// Drift and long-run variance (fa1, fb1^2), unit-root alternative.
    Fa1Fb1(Fa1Fb1Args),
    /// Stopping-time center/scale (c_m, d_m), unit-root alternative.
    CmDm(CmDmArgs),
    /// Monte Carlo limit CDF of the unit-root stopping time.
    RwLimit(RwLimitArgs),
    /// Threshold location and limit-CDF argument, explosive alternative.
    Explosive(ExplosiveArgs),
}

#[derive(Args)]
struct DeltaArgs {
    /// Initial coefficients, comma-separated (intercept, exog..., lag).
    #[arg(long, value_delimiter = ',')]
    beta0: Vec<f64>,
    /// Post-change coefficients, same layout.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Means of the exogenous regressors (default zeros).
    #[arg(long, value_delimiter = ',')]
    exog_means: Option<Vec<f64>>,
}

#[derive(Args)]
struct AmBmArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
}

#[derive(Args)]
struct Fa1Fb1Args {
    #[arg(long, value_delimiter = ',')]
    delta_bar: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    beta0_bar: Vec<f64>,
    /// AR(1) coefficients of the regressor columns.
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    #[arg(long)]
    shared_innovations: bool,
    #[arg(long, default_value_t = 1.0)]
    sigma_sq: f64,
    /// Estimate by long simulation of this many steps instead of the
    /// closed form.
    #[arg(long)]
    simulate_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CmDmArgs {
    #[arg(long)]
    fa1: f64,
    #[arg(long)]
    fb1: f64,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long)]
    beta0_d: f64,
}

#[derive(Args)]
struct RwLimitArgs {
    #[arg(long)]
    x: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long)]
    beta0_d: f64,
    #[arg(long)]
    fb1: f64,
    #[arg(long, default_value_t = 0.0)]
    fa1_bar: f64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 20_000)]
    reps: usize,
    #[arg(long, default_value_t = 10_000)]
    grid_per_unit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExplosiveArgs {
    #[arg(long)]
    delta_d: f64,
    #[arg(long)]
    beta0_d: f64,
    #[arg(long, default_value_t = 1)]
    s_star: u64,
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    x: f64,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> breakwatch::Result<()> {
    match cli.command {
        Command::Critvals(args) => critvals(args),
        Command::Monitor(args) => monitor(args),
        Command::Remonitor(args) => remonitor(args),
        Command::Kpss(args) => kpss(args),
        Command::SimulateSize(args) => simulate_size(args),
        Command::SimulatePower(args) => simulate_power(args),
        Command::TauDensity(args) => tau_density_cmd(args),
        Command::Asymptotics(cmd) => asymptotics(cmd),
    }
}

fn critvals(args: CritvalsArgs) -> breakwatch::Result<()> {
    let cv = if let Some(c_star) = args.closed_end {
        closed_end_critical_value(
            args.gamma,
            args.alpha,
            c_star,
            args.grid,
            args.reps,
            args.seed,
        )?
    } else if args.simulate {
        critical_value(
            args.gamma,
            args.alpha,
            CriticalSource::Simulation {
                grid_size: args.grid,
                reps: args.reps,
                seed: args.seed,
            },
        )?
    } else {
        critical_value(args.gamma, args.alpha, CriticalSource::BuiltinTable)?
    };
    match &cv.provenance {
        Provenance::Table => {
            println!(
                "c({}, {}) = {:.4}  [built-in table]",
                cv.gamma, cv.alpha, cv.value
            );
        }
        Provenance::Simulated {
            grid_size,
            reps,
            seed,
            mc_se,
            bias_warning,
        } => {
            println!(
                "c({}, {}) = {:.4}  [simulated: reps = {reps}, grid = {grid_size}, \
                 seed = {seed}, MC se = {mc_se:.4}]",
                cv.gamma, cv.alpha, cv.value
            );
            if *bias_warning {
                eprintln!(
                    "warning: gamma >= {} has noticeable grid bias; \
                     prefer the built-in table",
                    breakwatch::critical::BIAS_WARNING_GAMMA
                );
            }
        }
        Provenance::Fixed => println!("c = {:.4}  [fixed]", cv.value),
    }
    println!("{}", serde_json::to_string_pretty(&cv).unwrap());
    Ok(())
}

fn load_config(path: &PathBuf, data_override: Option<PathBuf>) -> breakwatch::Result<MonitorRunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = MonitorRunConfig::from_toml_str(&text)?;
    if let Some(data) = data_override {
        config.data = Some(data);
    }
    if config.data.is_none() {
        return Err(Error::Config(
            "no data file: set `data` in the config or pass --data".into(),
        ));
    }
    Ok(config)
}

fn print_report(mut report: breakwatch::io::MonitorReport) {
    report.manifest.timestamp_unix = Some(
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    );
    match (report.tau, &report.date) {
        (Some(tau), Some(date)) => {
            println!("break detected at step {tau} ({date})");
        }
        (Some(tau), None) => println!("break detected at step {tau}"),
        _ => println!(
            "no break detected (censored at {})",
            report.censored.unwrap_or(0)
        ),
    }
    if let Some(w) = &report.manifest.warning {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}

fn monitor(args: MonitorArgs) -> breakwatch::Result<()> {
    let config = load_config(&args.config, args.data)?;
    let data_path = config.data.clone().unwrap();
    let dataset = ingest_csv(
        &data_path,
        &config.date_column,
        &config.response,
        &config.exog,
    )?;
    let report = monitor_command(&config, &dataset)?;
    print_report(report);
    Ok(())
}

fn remonitor(args: RemonitorArgs) -> breakwatch::Result<()> {
    let config = load_config(&args.config, args.data)?;
    let data_path = config.data.clone().unwrap();
    let dataset = ingest_csv(
        &data_path,
        &config.date_column,
        &config.response,
        &config.exog,
    )?;
    let report = remonitor_command(
        &config,
        &dataset,
        args.training_start,
        args.previous_detection,
    )?;
    print_report(report);
    Ok(())
}

fn kpss(args: KpssArgs) -> breakwatch::Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&args.file)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let idx = headers
        .iter()
        .position(|h| h == &args.column)
        .ok_or_else(|| Error::Data(format!("column '{}' not found in {headers:?}", args.column)))?;
    let mut series = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let field = record
            .get(idx)
            .ok_or_else(|| Error::Data(format!("row {} is ragged", row_no + 1)))?;
        series.push(field.parse::<f64>().map_err(|_| {
            Error::Data(format!(
                "row {}, column '{}': cannot parse '{field}'",
                row_no + 1,
                args.column
            ))
        })?);
    }
    let bandwidth = args.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed);
    let result = kpss_level(&series, bandwidth)?;
    println!(
        "KPSS statistic = {:.4} (bandwidth {}), reject stationarity: \
         10% {}  5% {}  1% {}",
        result.statistic,
        result.bandwidth,
        result.reject_at_10pct,
        result.reject_at_5pct,
        result.reject_at_1pct
    );
    println!("{}", serde_json::to_string_pretty(&result).unwrap());
    Ok(())
}

fn read_plan(path: &PathBuf) -> breakwatch::Result<ExperimentPlan> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentPlan::from_toml_str(&text)
}

fn ensure_out(dir: &PathBuf) -> breakwatch::Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_manifest<T: serde::Serialize>(dir: &PathBuf, meta: &T) -> breakwatch::Result<()> {
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(meta).unwrap(),
    )?;
    Ok(())
}

fn simulate_size(args: PlanArgs) -> breakwatch::Result<()> {
    let plan = read_plan(&args.plan)?;
    let report = run_size_study(&plan)?;
    ensure_out(&args.out)?;
    let mut w = csv::Writer::from_path(args.out.join("size.csv"))?;
    w.write_record(["dgp", "m", "gamma", "alpha", "c", "horizon_multiple", "rate_pct", "se_pct"])?;
    for cell in &report.cells {
        for (i, (&rate, &se)) in cell.rates_pct.iter().zip(&cell.se_pct).enumerate() {
            w.write_record([
                cell.dgp.clone(),
                cell.m.to_string(),
                cell.gamma.to_string(),
                cell.alpha.to_string(),
                cell.c.to_string(),
                (i + 1).to_string(),
                format!("{rate:.4}"),
                format!("{se:.4}"),
            ])?;
        }
    }
    w.flush()?;
    fs::write(
        args.out.join("size.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )?;
    write_manifest(&args.out, &report.meta)?;
    println!(
        "size study: {} cells -> {}",
        report.cells.len(),
        args.out.display()
    );
    Ok(())
}

fn simulate_power(args: PlanArgs) -> breakwatch::Result<()> {
    let plan = read_plan(&args.plan)?;
    let report = run_power_study(&plan)?;
    ensure_out(&args.out)?;
    let mut w = csv::Writer::from_path(args.out.join("power.csv"))?;
    w.write_record([
        "dgp",
        "m",
        "gamma",
        "alpha",
        "s_star",
        "delta_d",
        "c",
        "power_pct",
        "se_pct",
        "mean_tau",
        "median_tau",
        "censored_pct",
    ])?;
    for cell in &report.cells {
        w.write_record([
            cell.dgp.clone(),
            cell.m.to_string(),
            cell.gamma.to_string(),
            cell.alpha.to_string(),
            cell.s_star.to_string(),
            cell.delta_d.map_or(String::new(), |d| d.to_string()),
            cell.c.to_string(),
            format!("{:.4}", cell.power_pct),
            format!("{:.4}", cell.se_pct),
            cell.mean_tau.map_or(String::new(), |t| format!("{t:.3}")),
            cell.median_tau.map_or(String::new(), |t| format!("{t:.1}")),
            format!("{:.4}", cell.censored_pct),
        ])?;
    }
    w.flush()?;
    fs::write(
        args.out.join("power.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )?;
    write_manifest(&args.out, &report.meta)?;
    println!(
        "power study: {} cells -> {}",
        report.cells.len(),
        args.out.display()
    );
    Ok(())
}

fn tau_density_cmd(args: TauDensityArgs) -> breakwatch::Result<()> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.spec.display())))?;
    let spec = TauDensitySpec::from_toml_str(&text)?;
    let report = tau_density(&spec)?;
    ensure_out(&args.out)?;
    let mut w = csv::Writer::from_path(args.out.join("tau_density.csv"))?;
    w.write_record(["tau", "density"])?;
    for (tau, dens) in &report.density {
        w.write_record([format!("{tau:.4}"), format!("{dens:.8e}")])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(args.out.join("tau_histogram.csv"))?;
    w.write_record(["lo", "hi", "count"])?;
    for bin in &report.histogram {
        w.write_record([
            format!("{:.2}", bin.lo),
            format!("{:.2}", bin.hi),
            bin.count.to_string(),
        ])?;
    }
    w.flush()?;
    fs::write(
        args.out.join("tau_density.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )?;
    write_manifest(&args.out, &report.meta)?;
    println!(
        "stopping-time density: {} uncensored draws, {:.2}% censored -> {}",
        report.taus.len(),
        report.censored_pct,
        args.out.display()
    );
    Ok(())
}

fn asymptotics(cmd: AsymptoticsCommand) -> breakwatch::Result<()> {
    let json = match cmd {
        AsymptoticsCommand::Delta(args) => {
            let d = args.beta0.len();
            if d < 2 {
                return Err(Error::Parameter(
                    "beta0 needs at least (intercept, lag)".into(),
                ));
            }
            let means = args.exog_means.unwrap_or_else(|| vec![0.0; d - 2]);
            let mag = delta_measure(&args.beta0, &args.delta, &means)?;
            serde_json::to_value(&mag).unwrap()
        }
        AsymptoticsCommand::AmBm(args) => {
            let (a, b) = am_bm(args.delta, args.m, args.c, args.sigma, args.gamma)?;
            serde_json::json!({ "a_m": a, "b_m": b })
        }
        AsymptoticsCommand::Fa1Fb1(args) => {
            let proc = RegressorProcess {
                kind: breakwatch::dgp::RegressorKind::Ar1 { rho: args.rho },
                shared_innovations: args.shared_innovations,
            };
            let estimation = match args.simulate_n {
                Some(n) => LongRunEstimation::LongSimulation { n, seed: args.seed },
                None => LongRunEstimation::Analytic,
            };
            let p = fa1_fb1(
                &args.delta_bar,
                &args.beta0_bar,
                &proc,
                args.sigma_sq,
                estimation,
            )?;
            serde_json::to_value(p).unwrap()
        }
        AsymptoticsCommand::CmDm(args) => {
            let (c_m, d_m) = cm_dm(
                args.fa1,
                args.fb1,
                args.m,
                args.c,
                args.sigma,
                args.gamma,
                args.beta0_d,
            )?;
            serde_json::json!({ "c_m": c_m, "d_m": d_m })
        }
        AsymptoticsCommand::RwLimit(args) => {
            let p = simulate_rw_limit(
                args.x,
                args.gamma,
                args.beta0_d,
                args.fb1,
                args.fa1_bar,
                args.c,
                args.sigma,
                args.reps,
                args.grid_per_unit,
                args.seed,
            )?;
            serde_json::json!({
                "x": args.x,
                "probability": p,
                "reps": args.reps,
                "grid_per_unit": args.grid_per_unit,
                "seed": args.seed,
            })
        }
        AsymptoticsCommand::Explosive(args) => {
            let params = ExplosiveParams {
                delta_d_bar: args.delta_d,
                beta0_d: args.beta0_d,
                s_star: args.s_star,
            };
            let t = explosive_threshold(&params, args.m, args.gamma, args.c, args.sigma, args.x)?;
            serde_json::to_value(&t).unwrap()
        }
    };
    println!("{}", serde_json::to_string_pretty(&json).unwrap());
    Ok(())
}

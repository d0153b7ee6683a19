use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use var_anomaly::cli_io::{
    atomic_write, calibrate_from_config, run_online_pipeline, run_pipeline, write_panel, IntervalScheme, RunConfig,
    SigmaChoice,
};
use var_anomaly::evaluation::{boundary_points, hausdorff_distance};
use var_anomaly::experiments::{preset, run_study, PRESETS};
use var_anomaly::var_model::{bump_smallest_positive, generate_dense_stationary, AnomalyScenario, DEFAULT_BURN_IN};
use var_anomaly::{simulate, simulate_with_anomaly, Error, Interval, Method, Result};

#[derive(Parser)]
#[command(
    name = "var-anomaly",
    version,
    about = "Collective anomaly detection in VAR coefficient matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a VAR(1) panel, optionally with an anomalous window.
    Simulate(SimulateArgs),
    /// Calibrate a detection threshold on the calibration slice of a data file.
    Calibrate(RunArgs),
    /// Offline detection on the test slice of a data file.
    Detect(RunArgs),
    /// Replay the test slice through the online detector.
    DetectOnline(RunArgs),
    /// Score a detection CSV against true windows.
    Evaluate(EvaluateArgs),
    /// Run the simulation studies and write their tables.
    ReproduceTables(TablesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Study preset supplying the scenario (see `reproduce-tables --help`).
    #[arg(long, conflicts_with_all = ["dim", "window"])]
    preset: Option<String>,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    /// Anomalous window as START:END (1-based, inclusive).
    #[arg(long, value_parser = parse_interval)]
    window: Option<Interval>,
    /// Number of coefficients shifted inside the window.
    #[arg(long, default_value_t = 10)]
    entries: usize,
    #[arg(long, default_value_t = 0.35)]
    size: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Numeric CSV panel, rows = time.
    #[arg(long, short)]
    data: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Random intervals with this count.
    #[arg(long, conflicts_with = "seeded")]
    random: Option<usize>,
    /// Seeded intervals with this decay in [1/2, 1).
    #[arg(long)]
    seeded: Option<f64>,
    #[arg(long)]
    min_length: Option<usize>,
    #[arg(long)]
    lambda_constant: Option<f64>,
    #[arg(long, value_enum)]
    sigma: Option<SigmaArg>,
    #[arg(long)]
    quantile: Option<f64>,
    /// Calibration runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Train, calibration and test fractions, e.g. 0.25,0.25,0.5.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    split: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use this threshold instead of calibrating.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    difference: bool,
    #[arg(long)]
    multiple: bool,
    /// The data file has a header row.
    #[arg(long)]
    header: bool,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long)]
    time_column: Option<usize>,
    #[arg(long)]
    t0: Option<usize>,
    #[arg(long)]
    incremental: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lasso,
    Ols,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaArg {
    Identity,
    Estimated,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Detection CSV written by `detect`.
    #[arg(long)]
    detection: PathBuf,
    /// True window as START:END; repeat for several.
    #[arg(long, required = true, value_parser = parse_interval)]
    truth: Vec<Interval>,
    /// Horizon scored for an empty detection.
    #[arg(long)]
    horizon: usize,
}

#[derive(Args)]
struct TablesArgs {
    /// Preset names, or `all`.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    preset: Vec<String>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 100)]
    calibration_runs: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, short, default_value = "tables")]
    out: PathBuf,
}

fn parse_interval(s: &str) -> std::result::Result<Interval, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("'{s}' is not START:END"))?;
    let a = a.trim().parse().map_err(|_| format!("bad start in '{s}'"))?;
    let b = b.trim().parse().map_err(|_| format!("bad end in '{s}'"))?;
    Interval::new(a, b).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => {
            let cfg = load_config(&a)?;
            let (art, _) = calibrate_from_config(&cfg, &a.data, &a.out)?;
            println!(
                "threshold {} ({} runs, quantile {})",
                art.threshold, art.runs, art.quantile
            );
            Ok(())
        }
        Command::Detect(a) => {
            let cfg = load_config(&a)?;
            let out = run_pipeline(&cfg, &a.data, &a.out)?;
            let m = &out.manifest;
            println!("threshold {} over {} intervals", m.threshold, m.interval_count);
            if m.detected_rows.is_empty() {
                println!("no anomaly detected");
            }
            for (j, s) in m.detected_rows.iter().zip(&m.detected) {
                let stat = out
                    .detection
                    .statistics
                    .iter()
                    .find(|x| x.interval == *s)
                    .map(|x| x.value);
                println!("anomaly at rows {j} (statistic {})", stat.unwrap_or(f64::NAN));
            }
            Ok(())
        }
        Command::DetectOnline(a) => {
            let cfg = load_config(&a)?;
            let r = run_online_pipeline(&cfg, &a.data, &a.out)?;
            println!("threshold {}", r.threshold);
            match (r.alarm, r.alarm_row) {
                (Some(al), Some(row)) => {
                    println!("alarm at row {row} (window {}, statistic {})", al.window, al.statistic)
                }
                _ => println!("no alarm over {} observations", r.horizon),
            }
            Ok(())
        }
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::ReproduceTables(a) => cmd_tables(a),
    }
}

fn load_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.in_stage("config"))?,
        None => RunConfig::default(),
    };
    let o = &a.overrides;
    if let Some(v) = o.order {
        cfg.order = v;
    }
    if let Some(m) = o.method {
        cfg.method = match m {
            MethodArg::Lasso => Method::Lasso,
            MethodArg::Ols => Method::Ols,
        };
    }
    if let Some(count) = o.random {
        cfg.intervals = IntervalScheme::Random { count, seed: None };
    }
    if let Some(decay) = o.seeded {
        cfg.intervals = IntervalScheme::Seeded { decay };
    }
    if o.min_length.is_some() {
        cfg.min_length = o.min_length;
    }
    if let Some(c) = o.lambda_constant {
        cfg.lambda_constant = c;
    }
    if let Some(s) = o.sigma {
        cfg.sigma = match s {
            SigmaArg::Identity => SigmaChoice::Identity,
            SigmaArg::Estimated => SigmaChoice::Estimated,
        };
    }
    if let Some(q) = o.quantile {
        cfg.quantile = q;
    }
    if let Some(r) = o.runs {
        cfg.calibration_runs = r;
    }
    if let Some(s) = &o.split {
        cfg.split = [s[0], s[1], s[2]];
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if o.threshold.is_some() {
        cfg.threshold = o.threshold;
    }
    cfg.difference |= o.difference;
    cfg.multiple |= o.multiple;
    cfg.has_header |= o.header;
    cfg.incremental |= o.incremental;
    if let Some(d) = o.delimiter {
        cfg.delimiter = d;
    }
    if o.time_column.is_some() {
        cfg.time_column = o.time_column;
    }
    if let Some(t) = o.t0 {
        cfg.t0 = t;
    }
    Ok(cfg)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let panel = match &a.preset {
        Some(name) => {
            let plan = preset(name, a.seed)?;
            for w in plan.scenario.windows() {
                eprintln!("anomalous window {w}");
            }
            simulate_with_anomaly(&plan.scenario, a.seed)?
        }
        None => {
            let base = generate_dense_stationary(a.dim, a.seed)?;
            match a.window {
                None => simulate(&base, a.horizon, DEFAULT_BURN_IN, a.seed)?,
                Some(w) => {
                    let delta = bump_smallest_positive(&base.stacked(), a.entries, a.size);
                    let scenario = AnomalyScenario::new(base, delta, w, a.horizon, DEFAULT_BURN_IN)?;
                    simulate_with_anomaly(&scenario, a.seed)?
                }
            }
        }
    };
    let mut buf = Vec::new();
    write_panel(&panel, &mut buf)?;
    atomic_write(&a.output, &buf)?;
    eprintln!(
        "wrote {} rows x {} series to {}",
        panel.len(),
        panel.dim(),
        a.output.display()
    );
    Ok(())
}

fn read_detected(path: &Path) -> Result<Vec<Interval>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("{other:?}")),
    })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::Parse {
                row: i + 2,
                column: k + 1,
                message: "missing field".into(),
            })
        };
        let num = |k: usize| -> Result<usize> {
            field(k)?.parse().map_err(|_| Error::Parse {
                row: i + 2,
                column: k + 1,
                message: "not an integer".into(),
            })
        };
        if field(3)? == "true" {
            out.push(Interval::new(num(0)?, num(1)?)?);
        }
    }
    Ok(out)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let estimate = read_detected(&a.detection)?;
    let h = hausdorff_distance(
        &boundary_points(&a.truth),
        &boundary_points(&estimate),
        a.horizon as f64,
    )?;
    let overlap = estimate.iter().any(|e| a.truth.iter().any(|t| t.intersects(e)));
    let report = serde_json::json!({
        "detected": estimate.len(),
        "overlaps_truth": overlap,
        "hausdorff": h,
        "hausdorff_percent": h / a.horizon as f64 * 100.0,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_tables(a: TablesArgs) -> Result<()> {
    let names: Vec<String> = if a.preset.iter().any(|p| p == "all") {
        PRESETS.iter().map(|s| s.to_string()).collect()
    } else {
        a.preset.clone()
    };
    fs::create_dir_all(&a.out)?;
    for name in names {
        let plan = preset(&name, a.seed)?.with_runs(a.runs, a.calibration_runs);
        eprintln!("running {name} ({} runs)", a.runs);
        let report = run_study(&plan)?;
        for (suffix, table) in [
            ("power", &report.power),
            ("hausdorff", &report.hausdorff),
            ("hausdorff_percent", &report.hausdorff_percent),
            ("counts", &report.counts),
        ] {
            println!("{table}");
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            atomic_write(&a.out.join(format!("{name}_{suffix}.csv")), &buf)?;
        }
    }
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use cascade_core::config::{parse_config, ExperimentConfig};
use cascade_core::experiment::{execute, prepare};
use cascade_core::grid::Grid2D;
use cascade_core::littlewood_paley::SpectralField;
use cascade_core::output::write_trajectory;
use cascade_core::par::{with_thread_limit, Execution};
use cascade_core::presets::{preset_vorticity, Preset, PresetParams};
use cascade_core::spectral::upsample;
use cascade_core::validate::run_suites;
use cascade_core::Error;

/// Dyadic SL(2) cascade model for 2D Euler gradient growth.
#[derive(Parser)]
#[command(name = "cascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trajectory.csv, report.json and bands.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides out_dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print per-band sup norms of ∇u and N_estimate for a field or preset.
    Decompose {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        field: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Grid size: refines a field spectrally, or sets the preset grid.
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        bands: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the (possibly refined) field in grid2d format.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Run the Cartesian product of the listed parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=v1,v2,... ; values may be written as base^exponent.
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in oracle suites.
    Validate {
        #[arg(long)]
        quick: bool,
    },
}

/// Exit code 2: the request could not be set up.
struct ConfigFailure(String);
/// Exit code 1: the request was valid but did not succeed.
struct RunFailure(String);

enum Failure {
    Config(ConfigFailure),
    Run(RunFailure),
}

impl From<ConfigFailure> for Failure {
    fn from(e: ConfigFailure) -> Self {
        Failure::Config(e)
    }
}

impl From<RunFailure> for Failure {
    fn from(e: RunFailure) -> Self {
        Failure::Run(e)
    }
}

fn setup<T>(r: Result<T, Error>) -> Result<T, ConfigFailure> {
    r.map_err(|e| ConfigFailure(e.to_string()))
}

fn running<T>(r: Result<T, Error>) -> Result<T, RunFailure> {
    r.map_err(|e| RunFailure(e.to_string()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigFailure> {
    let text = fs::read_to_string(path).map_err(|e| ConfigFailure(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text).map_err(|e| ConfigFailure(format!("{}: {e}", path.display())))?;
    if let Some(field) = &config.field_path {
        if field.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.field_path = Some(base.join(field));
        }
    }
    Ok(config)
}

fn run_one(config: &ExperimentConfig, out: &Path) -> Result<String, Failure> {
    let prepared = setup(prepare(config, Execution::default()))?;
    let outcome = running(execute(config, prepared))?;
    running(write_trajectory(&outcome.trajectory, &outcome.report, out))?;
    let r = &outcome.report;
    let max_sigma = r.final_sigma_max.iter().cloned().fold(1.0, f64::max);
    Ok(format!(
        "{}: N={} T={:.6e} steps={} renormalizations={} max sigma_max={:.6}",
        out.display(),
        r.n_used,
        r.t_final,
        r.steps,
        r.renormalizations,
        max_sigma
    ))
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(config)?;
    let out = out
        .or_else(|| config.out_dir.clone())
        .ok_or_else(|| ConfigFailure("no output directory: pass --out or set out_dir".into()))?;
    println!("{}", run_one(&config, &out)?);
    Ok(())
}

fn cmd_decompose(
    field: Option<PathBuf>,
    preset: Option<String>,
    grid_n: Option<usize>,
    bands: Option<usize>,
    seed: u64,
    save: Option<PathBuf>,
) -> Result<(), Failure> {
    let omega = match (field, preset) {
        (Some(path), _) => {
            let g = setup(Grid2D::read(&path))?;
            match grid_n {
                Some(m) => setup(upsample(&g, m, Execution::default()))?,
                None => g,
            }
        }
        (None, Some(name)) => {
            let preset: Preset = setup(name.parse())?;
            let params = PresetParams {
                bands,
                ..PresetParams::default()
            };
            let n = grid_n.unwrap_or(cascade_core::config::DEFAULT_GRID_N);
            setup(preset_vorticity(preset, &params, n, bands.unwrap_or(usize::MAX), seed))?
        }
        (None, None) => return Err(ConfigFailure("pass --field or --preset".into()).into()),
    };
    if let Some(path) = save {
        running(omega.write(&path))?;
    }
    let spectrum = setup(SpectralField::new(&omega, Execution::default()).gradient_bands())?;
    let mut out = String::from("j,grad_u_sup\n");
    for (j, v) in spectrum.norms.iter().enumerate() {
        let _ = writeln!(out, "{j},{v:.16e}");
    }
    let _ = writeln!(out, "N_estimate,{:.16e}", spectrum.n_estimate);
    let _ = writeln!(out, "sup,{:.16e}", spectrum.sup());
    print!("{out}");
    Ok(())
}

fn parse_value(text: &str) -> Result<Value, ConfigFailure> {
    let bad = || ConfigFailure(format!("cannot parse sweep value '{text}'"));
    let v = match text.split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let e: i32 = e.trim().parse().map_err(|_| bad())?;
            b.powi(e)
        }
        None => text.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if !v.is_finite() {
        return Err(bad());
    }
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Ok(if v >= 0.0 {
            Value::from(v as u64)
        } else {
            Value::from(v as i64)
        })
    } else {
        Ok(Value::from(v))
    }
}

fn parse_vary(spec: &str) -> Result<(String, Vec<Value>), ConfigFailure> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| ConfigFailure(format!("--vary expects KEY=v1,v2,... (got '{spec}')")))?;
    let values = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(parse_value)
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(ConfigFailure(format!("--vary {key} lists no values")));
    }
    Ok((key.trim().to_string(), values))
}

fn cmd_sweep(config_path: &Path, vary: &[String], out: &Path) -> Result<(), Failure> {
    let base = load_config(config_path)?;
    let axes = vary.iter().map(|v| parse_vary(v)).collect::<Result<Vec<_>, _>>()?;
    let mut points: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (key, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut p = p.clone();
                    p.push((key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    let base_json = serde_json::to_value(&base).expect("config serializes");
    let mut configs = Vec::with_capacity(points.len());
    for point in &points {
        let mut json = base_json.clone();
        for (k, v) in point {
            json[k.as_str()] = v.clone();
        }
        json.as_object_mut().expect("object").remove("out_dir");
        let text = json.to_string();
        let config = parse_config(&text).map_err(|e| {
            let label = point_label(point);
            ConfigFailure(format!("sweep point {label}: {e}"))
        })?;
        configs.push((point_label(point), config));
    }
    let results = Execution::default().map(configs.len(), |i| {
        let (label, config) = &configs[i];
        run_one(config, &out.join(label))
    });
    let mut failures = 0;
    let mut config_failures = 0;
    for ((label, _), r) in configs.iter().zip(results) {
        match r {
            Ok(line) => println!("{line}"),
            Err(Failure::Config(ConfigFailure(m))) => {
                config_failures += 1;
                eprintln!("{label}: {m}");
            }
            Err(Failure::Run(RunFailure(m))) => {
                failures += 1;
                eprintln!("{label}: {m}");
            }
        }
    }
    if config_failures > 0 {
        return Err(ConfigFailure(format!("{config_failures} sweep point(s) could not be set up")).into());
    }
    if failures > 0 {
        return Err(RunFailure(format!("{failures} sweep point(s) failed")).into());
    }
    Ok(())
}

fn point_label(point: &[(String, Value)]) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("_")
}

fn cmd_validate(quick: bool) -> Result<(), Failure> {
    let report = running(run_suites(quick))?;
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} [{}] {}", c.suite, c.name);
        } else {
            println!("{status} [{}] {} ({})", c.suite, c.name, c.detail);
        }
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", report.checks.len());
    if failed > 0 {
        return Err(RunFailure("validation failed".into()).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = with_thread_limit(move || match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Decompose {
            field,
            preset,
            grid_n,
            bands,
            seed,
            save,
        } => cmd_decompose(field, preset, grid_n, bands, seed, save),
        Command::Sweep { config, vary, out } => cmd_sweep(&config, &vary, &out),
        Command::Validate { quick } => cmd_validate(quick),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(ConfigFailure(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(RunFailure(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

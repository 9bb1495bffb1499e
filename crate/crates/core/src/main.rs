use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use rayleigh_watch::logmean::{limit_study, WeightedSamples};
use rayleigh_watch::scenario::{check_manifest, read_report, run_scenario, verify_dictionary_scenario, ScenarioConfig};
use rayleigh_watch::{Error, Result};

const THREADS_ENV: &str = "RAYLEIGH_WATCH_THREADS";

#[derive(Parser)]
#[command(name = "rayleigh-watch", version, about = "Blow-up diagnostics for hydrostatic Euler flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and certify every sample.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long)]
        na: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study of the label-coordinate identities.
    VerifyDictionary {
        #[arg(long)]
        config: PathBuf,
    },
    /// Geometric mean and p-norm limit of samples read from a CSV file
    /// (`value` or `value,weight` per line).
    LogMean {
        #[arg(long)]
        values: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.1,0.01,0.001")]
        p_list: Vec<f64>,
    },
    /// Summarize a finished run and check its manifest.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) | Error::UnknownPreset(_) | Error::Expression { .. } | Error::Json(_) => "config",
        Error::Io(_) => "io",
        _ => "runtime",
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&std::fs::read_to_string(path)?)
}

fn read_samples(path: &Path) -> Result<WeightedSamples> {
    let text = std::fs::read_to_string(path)?;
    let (mut values, mut weights) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(p) if p.len() == 1 || p.len() == 2 => {
                values.push(p[0]);
                weights.push(p.get(1).copied().unwrap_or(1.0));
            }
            // a header line
            Err(_) if values.is_empty() && i == 0 => continue,
            _ => return Err(Error::Config(format!("line {}: expected `value` or `value,weight`", i + 1))),
        }
    }
    WeightedSamples::normalized(values, weights)
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            config,
            preset,
            nx,
            ny,
            na,
            dt,
            t_end,
            out,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => load_config(&path)?,
                (None, Some(name)) => ScenarioConfig::from_preset(&name)?,
                (None, None) => unreachable!("clap requires one"),
            };
            cfg.grid.nx = nx.or(cfg.grid.nx);
            cfg.grid.ny = ny.or(cfg.grid.ny);
            cfg.grid.na = na.or(cfg.grid.na);
            cfg.dt = dt.or(cfg.dt);
            cfg.t_end = t_end.or(cfg.t_end);
            cfg.out = out.or(cfg.out);
            let scenario = cfg.resolve()?;
            let report = run_scenario(&scenario)?;
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| c.status.as_str() == "fail")
                .map(|c| c.name)
                .collect();
            println!(
                "{}: {} at t = {} after {} samples; failing checks: {}; output in {}",
                report.scenario,
                report.stop_reason,
                report.t_stop,
                report.samples,
                if failed.is_empty() { "none".to_string() } else { failed.join(" ") },
                scenario.out.display()
            );
            Ok(report.exit_code() as u8)
        }
        Command::VerifyDictionary { config } => {
            let scenario = load_config(&config)?.resolve()?;
            let out = verify_dictionary_scenario(&scenario)?;
            for (name, orders) in &out.study.orders {
                let shown: Vec<String> = orders
                    .iter()
                    .map(|o| o.map_or("exact".into(), |o| format!("{o:.3}")))
                    .collect();
                println!("{name:>8}: {}", shown.join(" "));
            }
            println!(
                "min observed order {}; written to {}",
                out.min_order.map_or("n/a".into(), |o| format!("{o:.3}")),
                scenario.out.join("dictionary.json").display()
            );
            Ok(0)
        }
        Command::LogMean { values, p_list } => {
            let samples = read_samples(&values)?;
            let study = limit_study(&samples, &p_list)?;
            println!("{}", serde_json::to_string_pretty(&study)?);
            Ok(if study.monotone && study.jensen { 0 } else { 2 })
        }
        Command::Report { dir } => {
            let report = read_report(&dir)?;
            let manifest: Vec<String> = serde_json::from_value(report["manifest"].clone())?;
            check_manifest(&dir, &manifest)?;
            println!(
                "{} ({}): {} at t = {}, {} samples, {} manifest entries verified",
                report["scenario"].as_str().unwrap_or("?"),
                report["system"].as_str().unwrap_or("?"),
                report["stop_reason"].as_str().unwrap_or("?"),
                report["t_stop"],
                report["samples"],
                manifest.len()
            );
            if let Some(p) = report["pole_estimate"].as_f64() {
                println!("pole estimate {p:.6}");
            }
            for c in report["checks"].as_array().into_iter().flatten() {
                println!(
                    "  {:<18} {:<13} {:<4} {}/{}",
                    c["name"].as_str().unwrap_or("?"),
                    c["kind"].as_str().unwrap_or("?"),
                    c["status"].as_str().unwrap_or("?"),
                    c["violations"],
                    c["evaluated"]
                );
            }
            Ok(if report["certification_passed"].as_bool() == Some(true) { 0 } else { 2 })
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": first}));
            return ExitCode::from(1);
        }
    };
    match configure_threads().and_then(|_| execute(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", json!({"error": error_kind(&e), "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}

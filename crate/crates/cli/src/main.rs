use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rotorsim::harness::{self, presets, RunRecord, RunStatus, ScenarioConfig};
use rotorsim::Error;

#[derive(Parser)]
#[command(
    name = "rotorsim",
    version,
    about = "Quadrotor damage and fault-tolerance experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(clap::Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Enable or disable the L1 augmentation.
    #[arg(long, value_enum)]
    l1: Option<Toggle>,
    /// Replace L1 with the integral baseline.
    #[arg(long)]
    baseline_integral: bool,
    /// Simulated duration [s].
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (TOML file or preset name).
    Run {
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run many scenarios: a directory of TOML files, a list file with one
    /// path per line, or a preset name.
    Sweep {
        source: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute the summary of a run log (run.csv or its directory).
    Report {
        log: PathBuf,
        /// RMSE window start; defaults to the warmup in summary.json, or 2 s.
        #[arg(long)]
        warmup: Option<f64>,
    },
    /// Write every preset as TOML files into a directory.
    Presets { dir: PathBuf },
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::Configuration(_) | Error::ConfigParse(_)) => 2,
            _ => 1,
        };
        Self { code, err }
    }
}

fn config_error(msg: String) -> Failure {
    Failure {
        code: 2,
        err: anyhow::anyhow!(msg),
    }
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.l1 {
            cfg.l1_enabled = matches!(t, Toggle::On);
        }
        if self.baseline_integral {
            cfg.baseline_integral = true;
            cfg.l1_enabled = false;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
    }
}

fn load_one(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn load_many(source: &str) -> Result<Vec<ScenarioConfig>, Failure> {
    let path = Path::new(source);
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .with_context(|| format!("reading {source}"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        return files.iter().map(|p| load_one(p)).collect();
    }
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {source}"))?;
        let base = path.parent().unwrap_or(Path::new("."));
        return text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| load_one(&base.join(l)))
            .collect();
    }
    presets::by_name(source).ok_or_else(|| {
        config_error(format!(
            "{source}: no such file, directory or preset (presets: {})",
            presets::NAMES.join(", ")
        ))
    })
}

fn cmd_run(config: &str, out: &Path, ov: &Overrides) -> Result<(), Failure> {
    let mut cfg = if Path::new(config).exists() {
        load_one(Path::new(config))?
    } else {
        match presets::by_name(config).as_deref() {
            Some([one]) => one.clone(),
            Some(_) => {
                return Err(config_error(format!(
                    "preset {config} has several scenarios; use sweep"
                )))
            }
            None => return Err(config_error(format!("{config}: no such file or preset"))),
        }
    };
    ov.apply(&mut cfg);
    cfg.validate().map_err(anyhow::Error::from)?;
    let result = harness::run(&cfg).map_err(anyhow::Error::from)?;
    result.save(out).map_err(anyhow::Error::from)?;
    let s = &result.summary;
    println!("{}", one_line(s));
    log::info!("wrote {}", out.display());
    if s.status != RunStatus::Completed {
        return Err(Failure {
            code: 1,
            err: anyhow::anyhow!("{}: run ended with status {:?}", cfg.name, s.status),
        });
    }
    Ok(())
}

fn one_line(s: &harness::SummaryReport) -> String {
    let rmse = s
        .rmse
        .map_or("n/a".into(), |r| format!("[{:.4}, {:.4}, {:.4}]", r[0], r[1], r[2]));
    let transition = s
        .transition
        .as_ref()
        .map_or("none".into(), |t| format!("rotor {} at {:.3} s", t.rotor, t.time));
    format!("{}: {:?}, rmse {rmse}, transition {transition}", s.name, s.status)
}

fn cmd_sweep(source: &str, out: &Path, ov: &Overrides) -> Result<(), Failure> {
    let mut configs = load_many(source)?;
    for c in &mut configs {
        ov.apply(c);
    }
    let table = harness::sweep(&configs).map_err(anyhow::Error::from)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let file = out.join("sweep.csv");
    table
        .write_csv(std::fs::File::create(&file).with_context(|| format!("creating {}", file.display()))?)
        .map_err(anyhow::Error::from)?;
    for r in &table.rows {
        match (&r.error, r.rmse_mean) {
            (Some(e), _) => println!("{}: error: {e}", r.name),
            (None, Some(m)) => println!(
                "{}: {:?}, mean rmse {m:.4}",
                r.name,
                r.status.unwrap_or(RunStatus::Completed)
            ),
            (None, None) => println!("{}: {:?}", r.name, r.status.unwrap_or(RunStatus::Completed)),
        }
    }
    if table.failures().next().is_some() {
        return Err(config_error(format!(
            "{} scenario(s) failed to start",
            table.failures().count()
        )));
    }
    let diverged = table
        .rows
        .iter()
        .filter(|r| r.status != Some(RunStatus::Completed))
        .count();
    if diverged > 0 {
        return Err(Failure {
            code: 1,
            err: anyhow::anyhow!("{diverged} run(s) diverged"),
        });
    }
    Ok(())
}

fn cmd_report(log: &Path, warmup: Option<f64>) -> Result<(), Failure> {
    let (csv, dir) = if log.is_dir() {
        (log.join("run.csv"), log.to_path_buf())
    } else {
        (log.to_path_buf(), log.parent().unwrap_or(Path::new(".")).to_path_buf())
    };
    let file = std::fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
    let rows = RunRecord::read_rows(file).map_err(anyhow::Error::from)?;
    let warmup = warmup
        .or_else(|| {
            harness::SummaryReport::load(&dir.join("summary.json"))
                .ok()
                .map(|s| s.warmup)
        })
        .unwrap_or(2.0);
    let rmse = harness::rmse_report(&rows, warmup).map_err(anyhow::Error::from)?;
    let transition = rows.windows(2).find(|w| w[0].mode != w[1].mode).map(|w| w[1].t);
    let report = serde_json::json!({
        "rows": rows.len(),
        "flown": rows.last().map_or(0.0, |r| r.t),
        "warmup": warmup,
        "rmse": rmse,
        "rmse_mean": rmse.iter().sum::<f64>() / 3.0,
        "mode_change": transition,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).context("formatting report")?
    );
    Ok(())
}

fn cmd_presets(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut n = 0;
    for name in presets::NAMES {
        for cfg in presets::by_name(name).unwrap_or_default() {
            let path = dir.join(format!("{}.toml", cfg.name));
            let text = cfg.to_toml_string().map_err(anyhow::Error::from)?;
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            n += 1;
        }
    }
    println!("wrote {n} scenarios to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run { config, out, overrides } => cmd_run(config, out, overrides),
        Command::Sweep { source, out, overrides } => cmd_sweep(source, out, overrides),
        Command::Report { log, warmup } => cmd_report(log, *warmup),
        Command::Presets { dir } => cmd_presets(dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

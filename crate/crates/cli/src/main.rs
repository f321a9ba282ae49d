use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qpattern::experiment::{self, csv_header, ExperimentConfig, Seeds};
use qpattern::spectral::exact_distribution;

#[derive(Parser)]
#[command(
    name = "qpattern",
    version,
    about = "Line-pattern recognition by simulated quantum Fourier sampling"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Write the generated cell array in grid text format.
    Generate(ConfigArgs),
    /// Full experiment: both runs, detection, estimation, artifacts.
    Run(ConfigArgs),
    /// Gate, query and transform counts over array sizes.
    Sweep {
        /// Qubit counts `s` to tabulate.
        #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12,14,16")]
        sizes: Vec<u32>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Experiment with localisation by subdivision enabled.
    Localise(ConfigArgs),
    /// Exact measurement distribution of the array as CSV.
    Spectrum {
        /// Use the transposed array.
        #[arg(long)]
        transposed: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Every flag maps onto one config key; `--set` reaches the rest.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `section.key=value` override, applied after the other flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory for artifacts (`output.dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,

    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Read the array from a grid text file (`grid.input`).
    #[arg(long)]
    input: Option<PathBuf>,

    /// Line spacing `D` (`pattern.spacing`).
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// `x0,y0,width,height`.
    #[arg(long, value_delimiter = ',')]
    region: Option<Vec<usize>>,
    #[arg(long)]
    delta_rho: Option<f64>,
    #[arg(long)]
    z0: Option<usize>,
    #[arg(long)]
    line_width: Option<f64>,

    /// `oracle` or `sample`.
    #[arg(long)]
    mode: Option<String>,
    /// `amplitude` or `phase`.
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long)]
    shots: Option<usize>,
    /// Skip the transposed run.
    #[arg(long)]
    no_transposed: bool,
    #[arg(long)]
    chi_hint: Option<f64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    max_qubits: Option<u32>,

    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    chi_target: Option<f64>,
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("string serialises")
}

impl ConfigArgs {
    fn assignments(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push(format!("{key}={v}"));
            }
        };
        put("grid.width", self.width.map(|v| v.to_string()));
        put("grid.height", self.height.map(|v| v.to_string()));
        put("grid.rho", self.rho.map(|v| format!("{v:?}")));
        put("grid.seed", self.seed.map(|v| v.to_string()));
        put(
            "grid.input",
            self.input.as_ref().map(|p| quoted(&p.to_string_lossy())),
        );
        put("pattern.spacing", self.spacing.map(|v| format!("{v:?}")));
        put("pattern.theta", self.theta.map(|v| format!("{v:?}")));
        put(
            "pattern.region",
            self.region.as_ref().map(|r| format!("{r:?}")),
        );
        put(
            "pattern.delta_rho",
            self.delta_rho.map(|v| format!("{v:?}")),
        );
        put("pattern.z0", self.z0.map(|v| v.to_string()));
        put(
            "pattern.line_width",
            self.line_width.map(|v| format!("{v:?}")),
        );
        put("run.mode", self.mode.as_deref().map(quoted));
        put("run.encoding", self.encoding.as_deref().map(quoted));
        put("run.shots", self.shots.map(|v| v.to_string()));
        put("run.transposed", self.no_transposed.then(|| "false".into()));
        put("run.chi_hint", self.chi_hint.map(|v| format!("{v:?}")));
        put("run.budget", self.budget.map(|v| v.to_string()));
        put("run.max_qubits", self.max_qubits.map(|v| v.to_string()));
        put("thresholds.tau", self.tau.map(|v| format!("{v:?}")));
        put(
            "thresholds.chi_target",
            self.chi_target.map(|v| format!("{v:?}")),
        );
        put(
            "output.dir",
            self.out.as_ref().map(|p| quoted(&p.to_string_lossy())),
        );
        out.extend(self.sets.iter().cloned());
        out
    }

    fn load(&self) -> Result<ExperimentConfig> {
        if self.region.as_ref().is_some_and(|r| r.len() != 4) {
            bail!("--region takes four values: x0,y0,width,height");
        }
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&self.assignments())?;
        Ok(cfg)
    }
}

/// Stdout that treats a closed pipe as a normal end.
fn stdout(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e).context("writing stdout"),
        _ => Ok(()),
    }
}

/// Writes `text` to `dir/name` when a directory is configured, else stdout.
fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => stdout(text)?,
    }
    Ok(())
}

fn summary(report: &experiment::RunReport) {
    eprintln!(
        "config {} | {}x{} array, {} points | pattern present: {}",
        report.config_hash,
        report.dims.width(),
        report.dims.height(),
        report.points,
        report.presence.present
    );
    match &report.estimate {
        Some(e) => eprintln!(
            "D = {:.3} +- {:.3}, theta = {:.4} +- {:.4} rad",
            e.d_hat, e.uncertainty.d, e.theta_hat, e.uncertainty.theta
        ),
        None => eprintln!(
            "no estimate: {}",
            report.estimate_note.as_deref().unwrap_or("none")
        ),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.verb {
        Verb::Generate(args) => {
            let cfg = args.load()?;
            let grid = cfg.build_grid()?;
            let seeds = Seeds::from_base(cfg.grid.seed);
            let text = grid.to_text(&[format!("config_hash={} seed={}", cfg.hash(), seeds.grid)]);
            emit(cfg.output.dir.as_deref(), "grid.txt", &text)?;
            Ok(true)
        }
        Verb::Run(args) => {
            let cfg = args.load()?;
            let report = experiment::run(&cfg)?;
            summary(&report);
            if cfg.output.dir.is_none() {
                stdout(&experiment::report_json(&report))?;
            }
            Ok(report.localisation.as_ref().is_none_or(|l| l.complete))
        }
        Verb::Localise(args) => {
            let mut cfg = args.load()?;
            cfg.run.localise = true;
            let report = experiment::run(&cfg)?;
            let outcome = report
                .localisation
                .as_ref()
                .context("localisation did not run")?;
            for r in &outcome.regions {
                eprintln!(
                    "region x0={} y0={} width={} height={}",
                    r.x0, r.y0, r.width, r.height
                );
            }
            eprintln!(
                "{} evaluations, {} queries",
                outcome.evaluations, outcome.queries_used
            );
            if !outcome.complete {
                eprintln!("query budget exhausted before the search finished");
            }
            stdout(&format!("{}\n", serde_json::to_string_pretty(outcome)?))?;
            Ok(outcome.complete)
        }
        Verb::Sweep { sizes, config } => {
            let cfg = config.load()?;
            if sizes.is_empty() {
                bail!("--sizes is empty");
            }
            let rows = experiment::complexity_sweep(&sizes, &cfg)?;
            let header = csv_header(&cfg.hash(), &Seeds::from_base(cfg.grid.seed));
            emit(
                cfg.output.dir.as_deref(),
                "sweep.csv",
                &experiment::sweep_csv(&rows, &header),
            )?;
            Ok(true)
        }
        Verb::Spectrum { transposed, config } => {
            let cfg = config.load()?;
            let mut grid = cfg.build_grid()?;
            if transposed {
                grid = grid.transpose();
            }
            let spec = exact_distribution(&grid, cfg.run.encoding)?;
            let header = csv_header(&cfg.hash(), &Seeds::from_base(cfg.grid.seed));
            let name = if transposed {
                "spectrum_transposed.csv"
            } else {
                "spectrum.csv"
            };
            emit(
                cfg.output.dir.as_deref(),
                name,
                &experiment::spectrum_csv(&spec, &header),
            )?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

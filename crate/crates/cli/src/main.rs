use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aclab::pipeline::{self, AnalysisConfig, ProfileConfig, RunConfig, RunOptions, StageError};
use aclab::{io, spectral, Error, Potential, Stage};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

/// Planar Allen-Cahn solutions: solve, analyse and report.
#[derive(Debug, Parser)]
#[command(name = "aclab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Profile, solve and every enabled analysis.
    Run(RunArgs),
    /// Build the heteroclinic profile and print its summary.
    Profile(ProfileArgs),
    /// Stop after the PDE solve.
    Solve(RunArgs),
    /// Re-run analyses on a dumped field CSV.
    Analyze(AnalyzeArgs),
    /// Constrained spectral gap of the profile for one or more interval lengths.
    Gap(GapArgs),
    /// Pretty-print (and optionally merge) report.json files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `grid.h`.
    #[arg(long)]
    h: Option<f64>,
    /// Overrides `solver.tol`.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct PotentialArg {
    /// `quartic` or a `u,W` CSV table.
    #[arg(long, default_value = "quartic")]
    potential: String,
}

impl PotentialArg {
    fn load(&self) -> Result<Potential, Error> {
        match self.potential.as_str() {
            "quartic" => Ok(Potential::quartic()),
            path => Potential::from_csv_path(Path::new(path)),
        }
    }
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[command(flatten)]
    potential: PotentialArg,
    #[arg(long, default_value_t = 30.0)]
    half_width: f64,
    /// Write `profile.csv` into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    field: PathBuf,
    /// Potential and analysis settings; analysis flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    potential: PotentialArg,
    #[arg(long)]
    blowdown: bool,
    #[arg(long)]
    stress: bool,
    #[arg(long)]
    fit: bool,
    #[arg(long)]
    spectral: bool,
    /// Write plot data and `analysis.json` into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GapArgs {
    #[command(flatten)]
    potential: PotentialArg,
    /// Symmetric half-length; repeat for a sweep.
    #[arg(long = "L", default_values_t = [20.0])]
    lengths: Vec<f64>,
    /// Left length, replacing `--L` on that side.
    #[arg(long = "L-minus")]
    l_minus: Option<f64>,
    /// Right length, replacing `--L` on that side.
    #[arg(long = "L-plus")]
    l_plus: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    h: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    report: PathBuf,
    /// Merge with a report of the same configuration.
    #[arg(long)]
    merge: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<StageError>() {
                Some(s) => s.exit_code(),
                None => 1,
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Run(a) => run(a, RunOptions::default()),
        Command::Solve(a) => run(a, RunOptions { solve_only: true }),
        Command::Profile(a) => profile(a),
        Command::Analyze(a) => analyze(a),
        Command::Gap(a) => gap(a),
        Command::Report(a) => report(a),
    }
}

fn config_error(e: Error) -> StageError {
    StageError::new(Stage::Config, e)
}

fn run(a: RunArgs, opts: RunOptions) -> anyhow::Result<()> {
    let mut config = RunConfig::from_path(&a.config).map_err(config_error)?;
    if let Some(out) = a.out {
        config.output_dir = out;
    }
    if let Some(h) = a.h {
        config.grid.h = h;
    }
    if let Some(tol) = a.tol {
        config.solver.tol = tol;
    }
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let report = pipeline::run(&config, &base, opts)?;
    let out = base.join(&config.output_dir);
    println!("{}", report.to_json()?.trim_end());
    log::info!("wrote {}", out.join("report.json").display());
    Ok(())
}

fn profile(a: ProfileArgs) -> anyhow::Result<()> {
    let p = a.potential.load().map_err(|e| StageError::new(Stage::Potential, e))?;
    let cfg = ProfileConfig { half_width: a.half_width, ..ProfileConfig::default() };
    let prof = pipeline::build_profile(&p, &cfg)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        io::write_file(&dir.join("profile.csv"), |w| prof.write_csv(w)).map_err(|e| StageError::new(Stage::Io, e))?;
    }
    let summary = serde_json::json!({ "potential": p.name(), "profile": prof.summary() });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> anyhow::Result<()> {
    let (p, prof_cfg, mut analysis) = match &a.config {
        Some(path) => {
            let c = RunConfig::from_path(path).map_err(config_error)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            c.analysis.validate().map_err(config_error)?;
            let p = c.potential.load(&base).map_err(|e| StageError::new(Stage::Potential, e))?;
            (p, c.profile, c.analysis)
        }
        None => {
            let p = a.potential.load().map_err(|e| StageError::new(Stage::Potential, e))?;
            (p, ProfileConfig::default(), AnalysisConfig::default())
        }
    };
    let picked: Vec<&str> = [("blowdown", a.blowdown), ("stress", a.stress), ("fit", a.fit), ("spectral", a.spectral)]
        .into_iter()
        .filter_map(|(n, on)| on.then_some(n))
        .collect();
    if !picked.is_empty() {
        let defaults = AnalysisConfig::only(&picked);
        analysis.blowdown.enabled = defaults.blowdown.enabled;
        analysis.stress.enabled = defaults.stress.enabled;
        analysis.fit.enabled = defaults.fit.enabled;
        analysis.spectral.enabled = defaults.spectral.enabled;
    }
    let field = io::read_field_path(&a.field)
        .map_err(|e| StageError::new(Stage::Io, e))
        .with_context(|| format!("reading {}", a.field.display()))?;
    let prof = pipeline::build_profile(&p, &prof_cfg)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
    }
    let mut timings = BTreeMap::new();
    let report = pipeline::analyze(&field, &prof, &analysis, a.out.as_deref(), &mut timings)?;
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = &a.out {
        std::fs::write(dir.join("analysis.json"), format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn gap(a: GapArgs) -> anyhow::Result<()> {
    let p = a.potential.load().map_err(|e| StageError::new(Stage::Potential, e))?;
    let prof = pipeline::build_profile(&p, &ProfileConfig::default())?;
    let mut results = Vec::new();
    for &l in &a.lengths {
        let (lm, lp) = (a.l_minus.unwrap_or(l), a.l_plus.unwrap_or(l));
        let r = spectral::constrained_gap(&prof, &p, lm, lp, a.h).map_err(|e| match e {
            Error::Argument(m) => StageError::new(Stage::Config, Error::Config(m)),
            e => StageError::new(Stage::Spectral, e),
        })?;
        for w in &r.warnings {
            log::warn!("{w}");
        }
        results.push(r);
    }
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "gap": results }))?);
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let io_err = |e| StageError::new(Stage::Io, e);
    let mut value = pipeline::read_report(&a.report).map_err(io_err)?;
    if let Some(other) = &a.merge {
        let b = pipeline::read_report(other).map_err(io_err)?;
        value = pipeline::merge_reports(&value, &b).map_err(config_error)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

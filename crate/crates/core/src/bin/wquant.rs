use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use wquant::harness::verify::verify;
use wquant::harness::{
    self, plot_svg, report_csv, report_series, write_report, SiteGenerator, SweepConfig, SweepReport, SweepRow,
};
use wquant::measure::MeasureSpec;
use wquant::quantize::{evaluate, quantize, VoronoiScheme};
use wquant::tail::{tail_report, TailDecaySpec};
use wquant::Result;

#[derive(Parser)]
#[command(name = "wquant", version, about = "Voronoi quantization of probability measures in Wasserstein space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory; defaults to the config's `out` or the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TailArgs {
    #[command(flatten)]
    common: Common,
    /// Measure spec (JSON) to check against the decay conditions.
    #[arg(long, conflicts_with = "config")]
    measure: Option<PathBuf>,
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize one measure and write `approximant.json`.
    Quantize(Common),
    /// Sweep the lattice scale h.
    SweepH(Common),
    /// Sweep the term budget N on the integer lattice.
    SweepN(Common),
    /// Seeded trials on nonuniform site sets.
    Nonuniform(Common),
    /// Truncation experiment, or a decay check with `--measure`.
    Tail(TailArgs),
    /// Lattice, Lloyd and empirical approximants.
    Baselines(Common),
    /// Full acceptance suite.
    Verify(Common),
}

fn load(common: &Common) -> Result<SweepConfig> {
    let path = common.config.as_ref().ok_or_else(|| wquant::error::invalid("--config is required"))?;
    SweepConfig::from_json(&fs::read_to_string(path)?)
}

fn out_dir(common: &Common, cfg: Option<&SweepConfig>) -> PathBuf {
    common.out.clone().or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from("."))
}

fn finish(report: &SweepReport, dir: &Path) -> Result<bool> {
    write_report(report, dir)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("failed: {}: {}", c.name, c.detail);
    }
    let bad = report.rows.iter().filter(|r| !r.passed).count();
    println!("{}: {} rows, {bad} failing, report in {}", report.kind, report.rows.len(), dir.display());
    Ok(report.passed())
}

fn sweep(common: &Common, run: fn(&SweepConfig, usize) -> Result<SweepReport>) -> Result<bool> {
    let cfg = load(common)?;
    let report = run(&cfg, common.jobs)?;
    finish(&report, &out_dir(common, Some(&cfg)))
}

fn run_quantize(common: &Common) -> Result<bool> {
    let cfg = load(common)?;
    let measure = cfg.build_measure()?;
    let scheme = match (&cfg.sites, cfg.h_values.first()) {
        (Some(SiteGenerator::Explicit { sites }), _) => VoronoiScheme::sites(sites.clone())?,
        (Some(_), _) => return Err(wquant::error::invalid("quantize takes explicit sites only")),
        (None, Some(&h)) => VoronoiScheme::lattice(cfg.build_lattice()?, h)?,
        (None, None) => return Err(wquant::error::invalid("quantize needs h_values or explicit sites")),
    };
    let approx = quantize(&measure, &scheme, cfg.mode)?;
    let ev = evaluate(&measure, &approx, cfg.p)?;
    let dir = out_dir(common, Some(&cfg));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("approximant.json"), approx.to_json()?)?;
    let param = match &scheme {
        VoronoiScheme::Lattice { h, .. } => *h,
        VoronoiScheme::Sites { sites } => sites.len() as f64,
    };
    let row = match &scheme {
        VoronoiScheme::Lattice { lattice, h } => SweepRow::asserted(
            "lattice",
            param,
            ev.measured,
            ev.coupling,
            lattice.voronoi_geometry()?.diameter * h,
            approx.len(),
            cfg.seed,
        ),
        VoronoiScheme::Sites { .. } => {
            SweepRow::informational("sites", param, ev.measured, ev.coupling, approx.len(), cfg.seed)
        }
    };
    let mut report = SweepReport::new("quantize", cfg.p);
    report.rows.push(row);
    finish(&report, &dir)
}

fn run_tail(args: &TailArgs) -> Result<bool> {
    let Some(path) = &args.measure else {
        return sweep(&args.common, harness::run_tail_experiment);
    };
    let missing = || wquant::error::invalid("--measure needs --R, --p and --epsilon");
    let spec = TailDecaySpec::new(
        args.epsilon.ok_or_else(missing)?,
        args.p.ok_or_else(missing)?,
        args.radius.ok_or_else(missing)?,
        args.q,
    )?;
    let mspec: MeasureSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
    let report = tail_report(&mspec.build()?, &spec)?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = &args.common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("truncation_report.json"), &json)?;
    }
    println!("{json}");
    Ok(report.all_pass())
}

fn run_verify(common: &Common) -> Result<bool> {
    let report = verify(common.jobs);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let dir = out_dir(common, None);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("report.csv"), report_csv(&report.rows))?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let mut plot = SweepReport::new("verify", 2.0);
    plot.rows = report.rows.iter().filter(|r| r.label == "lattice").cloned().collect();
    fs::write(dir.join("plot.svg"), plot_svg("N-term sweeps", "N", &report_series(&plot)))?;
    info!("verify outputs written to {}", dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Quantize(c) => run_quantize(c),
        Command::SweepH(c) => sweep(c, harness::run_h_sweep),
        Command::SweepN(c) => sweep(c, harness::run_nterm_sweep),
        Command::Nonuniform(c) => sweep(c, harness::run_nonuniform_trial),
        Command::Tail(t) => run_tail(t),
        Command::Baselines(c) => sweep(c, harness::run_baselines),
        Command::Verify(c) => run_verify(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

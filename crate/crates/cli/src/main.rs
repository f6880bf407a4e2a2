use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use onephase::config::{ConfigFile, Suite};
use onephase::error::HResult;
use onephase::report::Report;
use onephase::{suites, tools, HarnessError};
use onephase_core::analysis::hausdorff_distance;
use onephase_core::PotentialSpec;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "onephase", version, about = "Numerical checks for the regularized one-phase problem")]
struct Cli {
    /// Experiment config (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Potential name; overrides the config's `potential`.
    #[arg(long, global = true)]
    potential: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the structural inequalities of the potential.
    Certify,
    /// 1D profiles against the shooting oracle, and their bounds.
    Profile,
    /// Truncated barriers, shifted comparisons and the radial super-solution.
    Barriers,
    /// Exponential decay below the transition band.
    Decay,
    /// Solver consistency and a curved-boundary solve.
    Solve,
    /// Weiss functional; with `--field`, measure a field file.
    Weiss(WeissArgs),
    /// Flatness and its improvement; with `--field`, measure a field file.
    Flatness(FlatnessArgs),
    /// Blow-down limit of a solved field.
    Blowdown,
    /// Hausdorff distance between two node-set files.
    Hausdorff {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Every suite, in order.
    All,
}

#[derive(Args)]
struct WeissArgs {
    #[arg(long)]
    field: Option<PathBuf>,
    /// `x,y`.
    #[arg(long, default_value = "0,0", requires = "field")]
    center: String,
    /// `a:b:n`.
    #[arg(long, requires = "field")]
    radii: Option<String>,
}

#[derive(Args)]
struct FlatnessArgs {
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, requires = "field")]
    eps: Option<f64>,
    #[arg(long = "R", requires = "field")]
    r: Option<f64>,
    /// `rho0,levels`.
    #[arg(long, requires = "field")]
    ladder: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn pot_for(cli: &Cli, cfg_name: &str) -> HResult<PotentialSpec> {
    Ok(PotentialSpec::by_name(cli.potential.as_deref().unwrap_or(cfg_name))?)
}

fn print_json<T: serde::Serialize>(v: &T) -> HResult<bool> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(true)
}

fn run(cli: Cli) -> HResult<bool> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;
    }
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let suites: Vec<Suite> = match &cli.command {
        Command::Certify => vec![Suite::Certify],
        Command::Profile => vec![Suite::Profile],
        Command::Barriers => vec![Suite::Barriers],
        Command::Decay => vec![Suite::Decay],
        Command::Solve => vec![Suite::Solve],
        Command::Blowdown => vec![Suite::Blowdown],
        Command::Weiss(WeissArgs { field: Some(f), center, radii }) => {
            let pot = pot_for(&cli, &file.resolve(Suite::Weiss)?.potential)?;
            let u = tools::load_field(f)?;
            let radii = tools::parse_radii(radii.as_deref().unwrap_or("0.1:0.4:7"))?;
            let center = tools::parse_center(center)?;
            return print_json(&tools::weiss_tool(&u, &pot, center, &radii)?);
        }
        Command::Weiss(_) => vec![Suite::Weiss],
        Command::Flatness(FlatnessArgs { field: Some(f), eps, r, ladder }) => {
            let pot = pot_for(&cli, &file.resolve(Suite::Flatness)?.potential)?;
            let u = tools::load_field(f)?;
            let eps = eps.unwrap_or(u.eps);
            let r = r.ok_or_else(|| HarnessError::Invalid("flatness --field needs --R".into()))?;
            let ladder = match ladder {
                Some(s) => {
                    let v = tools::parse_center(s)?;
                    Some((v[0], v[1] as usize))
                }
                None => None,
            };
            return print_json(&tools::flatness_tool(&u, &pot, eps, r, ladder)?);
        }
        Command::Flatness(_) => vec![Suite::Flatness],
        Command::Hausdorff { a, b } => {
            let d = hausdorff_distance(&tools::load_points(a)?, &tools::load_points(b)?)?;
            println!("{d:?}");
            return Ok(true);
        }
        Command::All => match file.experiment()? {
            Some(s) => vec![s],
            None => Suite::ALL.to_vec(),
        },
    };
    let mut cfgs = Vec::new();
    for &s in &suites {
        let mut c = file.resolve(s)?;
        if let Some(p) = &cli.potential {
            c.potential = p.clone();
        }
        cfgs.push(c);
    }
    let pot = PotentialSpec::by_name(&cfgs[0].potential)?;
    if cfgs.iter().any(|c| c.potential != cfgs[0].potential) {
        return Err(HarnessError::Invalid("all suites of one run must share the potential".into()));
    }
    let reports: Vec<_> = cfgs
        .par_iter()
        .map(suites::run)
        .collect::<HResult<_>>()?;
    let report = Report::new(&pot, reports);
    let out = cli.out.clone().unwrap_or_else(|| cfgs[0].out.clone());
    report.write(&out)?;
    for s in &report.suites {
        let failed = s.failures().count();
        eprintln!(
            "{:<9} {:>3} rows, {failed} failed",
            s.suite,
            s.rows.len()
        );
    }
    let failures = report.failures();
    for r in &failures {
        eprintln!("FAILED [{}] {} (margin {:e})", r.paper_anchor, r.check, r.margin);
    }
    eprintln!("report written to {}", out.join("report.json").display());
    Ok(failures.is_empty())
}

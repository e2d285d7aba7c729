use std::path::PathBuf;
use std::process::ExitCode;

use aggregation_core::iolab::{self, compare, presets, ContractionParams, RunConfig, RunHandle};
use aggregation_core::PotentialSpec;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aggregation", version, about = "Aggregation-equation solvers and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON config and write diagnostics, snapshots and report.json.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wasserstein distance between two runs at matching snapshot times.
    Compare {
        /// Run directory or report.json of the first run.
        a: PathBuf,
        /// Run directory or report.json of the second run.
        b: PathBuf,
        /// Comparison times; defaults to every snapshot of the first run.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        times: Vec<f64>,
        /// Write the distance series to this CSV instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Wasserstein contraction bound on two random particle systems.
    ContractionTest {
        /// `morse:<a>` or `abs`.
        #[arg(long, default_value = "morse:5")]
        potential: String,
        #[arg(long = "T", default_value_t = 0.2)]
        t_end: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        /// Write the JSON report here as well as printing a summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in experiments.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Run {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_report(out: &iolab::RunOutput) {
    let r = &out.report;
    println!("{} run {} ({} steps, t = {})", r.scheme_name(), r.status, r.steps, r.t_final);
    if let Some(e) = &r.error {
        println!("error: {e}");
    }
    for c in &r.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:<26} {:>14.6e} {} {:e}", c.name, c.measured, c.relation, c.threshold);
    }
    println!("output: {}", out.dir.display());
}

trait SchemeName {
    fn scheme_name(&self) -> &'static str;
}

impl SchemeName for iolab::RunReport {
    fn scheme_name(&self) -> &'static str {
        match self.scheme {
            iolab::Scheme::Particles => "particles",
            iolab::Scheme::Fv2d => "fv2d",
        }
    }
}

fn exit(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let result = match out {
                Some(dir) => iolab::run_in(&cfg, &dir)?,
                None => iolab::run(&cfg)?,
            };
            print_report(&result);
            Ok(exit(result.report.passed))
        }
        Command::Compare { a, b, times, out } => {
            let (ra, rb) = (RunHandle::open(&a)?, RunHandle::open(&b)?);
            let rows = compare(&ra, &rb, &times)?;
            match out {
                Some(path) => compare::write_distances(&path, &rows)?,
                None => {
                    println!("t,distance");
                    for r in &rows {
                        println!("{:?},{:?}", r.t, r.distance);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ContractionTest {
            potential,
            t_end,
            n,
            seed,
            dt,
            out,
        } => {
            let p = PotentialSpec::parse_short(&potential)?.build::<f64>()?;
            let prm = ContractionParams {
                t_end,
                n_atoms: n,
                seed,
                dt,
                ..Default::default()
            };
            let report = iolab::contraction_test(&p, &prm)?;
            println!("lambda = {}", report.lambda);
            for (label, rows) in [("e^{-2 lambda t}", &report.general), ("e^{-lambda t}", &report.recentered)] {
                let worst = rows.iter().map(|s| s.distance / s.bound).fold(0.0, f64::max);
                let ok = rows.iter().all(|s| s.passed);
                println!(
                    "{} {label}: {} samples, max d/bound = {worst:.6}",
                    if ok { "PASS" } else { "FAIL" },
                    rows.len()
                );
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(exit(report.passed))
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    println!("{:<20} {}", p.name, p.description);
                }
                Ok(ExitCode::SUCCESS)
            }
            PresetAction::Run { name, out } => {
                let result = iolab::run_preset(&name, out.as_deref())?;
                print_report(&result);
                Ok(exit(result.report.passed))
            }
        },
    }
}

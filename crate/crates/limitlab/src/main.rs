use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use limitlab::config::SweepConfig;
use limitlab::report::{self, metrics_svg, Check, Tables};
use limitlab::sweep::{decay_sweep, geometry_report, thread_pool};
use limitlab::{emit_report, reevaluate, run_sweep, Formats, Verdict};
use limitlab_core::Result;

#[derive(Parser)]
#[command(name = "limitlab", version, about = "Low-Mach limit sweeps on rough-obstacle domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sweep and write the report directory.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_svg: bool,
    },
    /// Geometry checks of every domain in the sweep, as JSON on stdout.
    CheckGeometry { config: PathBuf },
    /// Acoustic decay sweep only.
    Decay { config: PathBuf },
    /// Re-evaluate the acceptance thresholds of an existing report directory.
    Report { dir: PathBuf },
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn print_verdict(v: &Verdict) {
    print_checks(&v.checks);
    if !v.has_data {
        println!("no data");
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run { config, out, no_svg } => {
            let cfg = SweepConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let report = run_sweep(&cfg)?;
            for o in &report.outcomes {
                if let Err(e) = &o.result {
                    eprintln!("eps = {}: {e}", o.eps);
                }
            }
            let verdict = emit_report(&report, &cfg, &dir, Formats { svg: !no_svg })?;
            print_verdict(&verdict);
            Ok(verdict.exit_code() as u8)
        }
        Command::CheckGeometry { config } => {
            let cfg = SweepConfig::load(&config)?;
            let geo = thread_pool()?.install(|| geometry_report(&cfg))?;
            println!("{}", report::to_json(&geo)?);
            Ok(if geo.passes() { 0 } else { 1 })
        }
        Command::Decay { config } => {
            let cfg = SweepConfig::load(&config)?;
            let Some(d) = &cfg.decay else {
                eprintln!("config has no [decay] table");
                return Ok(2);
            };
            let sweep = thread_pool()?.install(|| decay_sweep(&cfg, d))?;
            let tables = Tables {
                decay: sweep
                    .results
                    .iter()
                    .map(|r| report::DecayRow {
                        eps: r.eps,
                        t_end: r.t_end,
                        integral: r.integral,
                        t_cross: r.t_cross,
                        contaminated: r.contaminated,
                    })
                    .collect(),
                ..Tables::default()
            };
            print!("{}", tables.decay_csv());
            println!("slope {:.6} (residual {:.2e})", sweep.fit.slope, sweep.fit.residual);
            let v = tables.verdict(&cfg.acceptance);
            let decay_checks: Vec<Check> = v.checks.into_iter().filter(|c| c.name.starts_with("decay")).collect();
            print_checks(&decay_checks);
            Ok(if decay_checks.iter().all(|c| c.passed) { 0 } else { 1 })
        }
        Command::Report { dir } => {
            let (tables, verdict) = reevaluate(&dir)?;
            std::fs::write(dir.join("metrics.svg"), metrics_svg(&tables.metrics))?;
            print_verdict(&verdict);
            Ok(verdict.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use cuk_pllf::output::{parse_window, Window};
use cuk_pllf::scenario::{preset_config, preset_description};
use cuk_pllf::{
    certify_command, resolve, run_command, CliError, RunOptions, Scenario, PRESET_NAMES,
};

#[derive(Parser)]
#[command(
    name = "cuk-pllf",
    version,
    about = "Ćuk converter under piecewise linear Lyapunov switching control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more scenarios and write trace, events, metrics and certificates.
    Run {
        /// Preset names (fig2..fig5) or config file paths.
        #[arg(required = true)]
        targets: Vec<String>,
        /// Output directory; one subdirectory per scenario when several are given.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Restrict CSV rows to T0:T1 (seconds).
        #[arg(long, value_parser = parse_window)]
        window: Option<Window>,
        /// Override the simulated duration (seconds).
        #[arg(long)]
        duration: Option<f64>,
        /// Number of scenarios simulated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check the facet certificates of a scenario's polytope.
    Certify { target: String },
    /// Built-in scenario presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names.
    List,
    /// Print a preset as a JSON config.
    Show { name: String },
}

fn load(target: &str, duration: Option<f64>) -> Result<Scenario, CliError> {
    let mut scenario = resolve(target)?;
    if let Some(d) = duration {
        scenario.sim.duration = d;
        scenario
            .sim
            .validate()
            .map_err(|e| CliError::config("--duration", e))?;
    }
    Ok(scenario)
}

fn run_one(target: &str, out: PathBuf, window: Option<Window>, duration: Option<f64>) -> u8 {
    let result = load(target, duration).and_then(|s| {
        run_command(
            &s,
            &RunOptions {
                out_dir: out.clone(),
                window,
            },
        )
    });
    match result {
        Ok(summary) => {
            let m = &summary.metrics;
            println!(
                "{target}: {} samples, {} events, period {:.4e} s, duty {:.4}, max V (steady) {:.6} -> {}",
                summary.samples,
                summary.events,
                m.period_measured,
                m.duty_measured,
                m.max_v_steady,
                out.display()
            );
            0
        }
        Err(e) => {
            eprintln!("{target}: {e}");
            e.exit_code()
        }
    }
}

fn run_many(
    targets: &[String],
    out: PathBuf,
    window: Option<Window>,
    duration: Option<f64>,
    jobs: usize,
) -> u8 {
    if targets.len() == 1 {
        return run_one(&targets[0], out, window, duration);
    }
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(0u8);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, targets.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(target) = targets.get(i) else { break };
                let name = resolve(target)
                    .map(|s| s.name)
                    .unwrap_or_else(|_| format!("scenario{i}"));
                let code = run_one(target, out.join(name), window, duration);
                let mut w = worst.lock().expect("exit code lock");
                *w = (*w).max(code);
            });
        }
    });
    worst.into_inner().expect("exit code lock")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            targets,
            out,
            window,
            duration,
            jobs,
        } => run_many(&targets, out, window, duration, jobs),
        Command::Certify { target } => match resolve(&target) {
            Ok(s) => match certify_command(&s, std::io::stdout().lock()) {
                Ok(true) => 0,
                Ok(false) => 1,
                Err(e) => {
                    eprintln!("{e}");
                    e.exit_code()
                }
            },
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::Presets {
            action: PresetAction::List,
        } => {
            for name in PRESET_NAMES {
                println!("{name}\t{}", preset_description(name).unwrap_or_default());
            }
            0
        }
        Command::Presets {
            action: PresetAction::Show { name },
        } => match preset_config(&name) {
            Some(file) => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&file).expect("preset serializes")
                );
                0
            }
            None => {
                eprintln!("unknown preset `{name}`");
                2
            }
        },
    };
    ExitCode::from(code)
}

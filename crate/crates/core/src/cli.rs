//! Command-line front end. `run_cli` returns the process exit code.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::control::{stability_report, ControllerKind, RegionForm, StabilityReport};
use crate::error::{Error, Result};
use crate::planning::Phase;
use crate::sim::{
    compute_metrics, emit_comparison, emit_outputs, load_scenario_file, run_simulation, Metrics,
    Scenario, SimTrace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NON_COMPLIANT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dhtsmc", version, about = "Sliding-mode manipulator control workbench")]
struct Cli {
    /// Replaces the uncertainty and noise seeds of the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one controller and write its trace and metrics.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "dhtsmc")]
        controller: ControllerKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both controllers and write a side-by-side table.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the gain check and convergence region; exit 2 when not compliant.
    CheckStability {
        scenario: PathBuf,
        /// Use the region formula without the `r + 2` factor on the gain sum.
        #[arg(long)]
        stated_form: bool,
    },
    /// Write the reference trajectory only (stdout without `--out`).
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> std::result::Result<Scenario, Failure> {
    load_scenario_file(path, seed).map_err(Failure::Usage)
}

fn report_for(scenario: &Scenario, form: RegionForm) -> StabilityReport {
    stability_report(
        &scenario.controller,
        scenario.run.ddq_range,
        &scenario.run.e_bound,
        form,
    )
}

fn simulate(scenario: &Scenario, kind: ControllerKind) -> Result<(SimTrace, Metrics)> {
    let trace = run_simulation(scenario, kind)?;
    let metrics = compute_metrics(&trace, &scenario.nominal)?;
    Ok((trace, metrics))
}

fn write_run(
    scenario: &Scenario,
    kind: ControllerKind,
    trace: &SimTrace,
    metrics: &Metrics,
    out: &Path,
) -> Result<()> {
    let report = report_for(scenario, RegionForm::ProofConsistent);
    let title = format!("{} / {}", scenario.name, kind.name());
    let report = (kind == ControllerKind::Dhtsmc).then_some(&report);
    emit_outputs(trace, metrics, &scenario.nominal, &title, report, out)?;
    Ok(())
}

fn dispatch(cli: Cli) -> std::result::Result<i32, Failure> {
    match cli.command {
        Command::Simulate {
            scenario,
            controller,
            out,
        } => {
            let sc = load(&scenario, cli.seed)?;
            let (trace, metrics) = simulate(&sc, controller).map_err(Failure::Runtime)?;
            write_run(&sc, controller, &trace, &metrics, &out).map_err(Failure::Runtime)?;
            println!("{} ticks written to {}", trace.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Compare { scenario, out } => {
            let sc = load(&scenario, cli.seed)?;
            let kinds = [ControllerKind::Dhtsmc, ControllerKind::FfTsmc];
            let runs: Vec<Result<(SimTrace, Metrics)>> = std::thread::scope(|s| {
                let handles: Vec<_> = kinds
                    .iter()
                    .map(|&k| {
                        let sc = &sc;
                        s.spawn(move || simulate(sc, k))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("simulation thread panicked"))
                    .collect()
            });
            let mut done = Vec::new();
            for (kind, run) in kinds.iter().zip(runs) {
                let (trace, metrics) = run.map_err(Failure::Runtime)?;
                write_run(&sc, *kind, &trace, &metrics, &out.join(kind.name()))
                    .map_err(Failure::Runtime)?;
                done.push(metrics);
            }
            let table = emit_comparison(
                [kinds[0].name(), kinds[1].name()],
                [&done[0], &done[1]],
                &out,
            )
            .map_err(Failure::Runtime)?;
            println!("joint  peak {}/{}", kinds[0].name(), kinds[1].name());
            for (i, (a, b)) in done[0].joints.iter().zip(&done[1].joints).enumerate() {
                println!("{:>5}  {:.3}", i + 1, a.max_abs / b.max_abs);
            }
            println!("written to {}", table.display());
            Ok(EXIT_OK)
        }
        Command::CheckStability {
            scenario,
            stated_form,
        } => {
            let sc = load(&scenario, cli.seed)?;
            let form = if stated_form {
                RegionForm::Stated
            } else {
                RegionForm::ProofConsistent
            };
            let report = report_for(&sc, form);
            print!("{report}");
            Ok(if report.compliant {
                EXIT_OK
            } else {
                EXIT_NON_COMPLIANT
            })
        }
        Command::Plan { scenario, out } => {
            let sc = load(&scenario, cli.seed)?;
            let text = reference_csv(&sc);
            match out {
                None => {
                    match std::io::stdout().lock().write_all(text.as_bytes()) {
                        // a closed pipe (`| head`) is not a failure
                        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                            return Err(Failure::Runtime(Error::io("<stdout>", e)));
                        }
                        _ => {}
                    }
                }
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(Error::io(&dir, e)))?;
                    let path = dir.join("reference.csv");
                    std::fs::write(&path, text).map_err(|e| Failure::Runtime(Error::io(&path, e)))?;
                    println!("{} samples written to {}", sc.trajectory.len(), path.display());
                }
            }
            Ok(EXIT_OK)
        }
    }
}

/// `t, phase, r_i, dr_i, x, y, z` of the planned reference.
pub fn reference_csv(scenario: &Scenario) -> String {
    let n = scenario.nominal.n();
    let mut s = String::from("t,phase");
    for g in ["r", "dr"] {
        for i in 1..=n {
            write!(s, ",{g}_{i}").unwrap();
        }
    }
    s.push_str(",x,y,z\n");
    for sample in &scenario.trajectory {
        let phase = match sample.phase {
            Phase::Dwell { waypoint } => format!("dwell{waypoint}"),
            Phase::Move { segment } => format!("move{segment}"),
        };
        write!(s, "{},{phase}", sample.t).unwrap();
        for v in sample.q_ref.iter().chain(sample.dq_ref.iter()) {
            write!(s, ",{v}").unwrap();
        }
        let p = sample.pose.position;
        writeln!(s, ",{},{},{}", p.x, p.y, p.z).unwrap();
    }
    s
}

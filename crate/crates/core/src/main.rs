use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use resdyn::analysis::{
    equilibrium_temperature, optimal_frequency_ratio, pairwise_teq_matrix, staged_equalization_plan,
};
use resdyn::dynamics::integrate;
use resdyn::io::{
    default_u_grid, emit_teq_curve, load_scenario, resolve_output_dir, run_sweep, write_json, write_run,
    write_sweep_table, write_teq_curve, LoadedScenario, Preset, RunManifest, SweepAxis, OUTPUT_DIR_ENV,
};
use resdyn::reservoir::{validity_check, ValidityReport};
use resdyn::{Error, Scenario};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VALIDITY: u8 = 3;

#[derive(Parser)]
#[command(name = "resdyn", version, about = "Temperature equalization of reservoirs coupled through an oscillator")]
struct Cli {
    /// Fail with exit code 3 when the model-validity check does not pass.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write trajectory, events and summary.
    Simulate {
        file: PathBuf,
        /// Output directory (overrides the file's output.path and $RESDYN_OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the common final temperature.
    Equilibrium { file: PathBuf },
    /// Pairwise equalization times, optimal frequency ratio and merge plan.
    Estimate {
        file: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the scenario once per value of one parameter.
    Sweep {
        file: PathBuf,
        /// Key to vary, e.g. reservoir[1].gamma, reservoir[*].T0, system.omega.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and report model validity.
    Validate { file: PathBuf },
    /// Print a reference scenario, or run it with --out.
    Preset {
        name: Preset,
        /// Run the preset and write results here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the equalization-time curve against omega/2T (to --out, else stdout).
        #[arg(long)]
        curve: bool,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Validity(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Validity(m)) => {
            eprintln!("validity check failed: {m}");
            ExitCode::from(EXIT_VALIDITY)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let strict = cli.strict;
    match cli.command {
        Command::Simulate { file, out } => {
            let loaded = load_scenario(&file)?;
            check_validity(&loaded.scenario, strict)?;
            simulate(&loaded, out.as_deref())
        }
        Command::Equilibrium { file } => {
            let loaded = load_scenario(&file)?;
            check_validity(&loaded.scenario, strict)?;
            let t = equilibrium_temperature(&loaded.scenario.reservoirs)?;
            println!("{t:.16e}");
            Ok(())
        }
        Command::Estimate { file, json } => {
            let loaded = load_scenario(&file)?;
            check_validity(&loaded.scenario, strict)?;
            estimate(&loaded.scenario, json)
        }
        Command::Sweep {
            file,
            axis,
            values,
            out,
        } => {
            let loaded = load_scenario(&file)?;
            check_validity(&loaded.scenario, strict)?;
            let axis: SweepAxis = axis.parse().map_err(Failure::Config)?;
            sweep(&loaded, axis, &values, out.as_deref())
        }
        Command::Validate { file } => {
            let loaded = load_scenario(&file)?;
            let report = validity_check(&loaded.scenario);
            print_validity(&report);
            if strict && !report.ok {
                return Err(Failure::Validity(validity_message(&report)));
            }
            println!("scenario is well-formed ({} reservoirs)", loaded.scenario.len());
            Ok(())
        }
        Command::Preset { name, out, curve } => preset(name, out.as_deref(), curve, strict),
    }
}

fn check_validity(scenario: &Scenario, strict: bool) -> Outcome {
    let report = validity_check(scenario);
    if report.ok {
        return Ok(());
    }
    if strict {
        return Err(Failure::Validity(validity_message(&report)));
    }
    eprintln!("warning: {}", validity_message(&report));
    Ok(())
}

fn validity_message(r: &ValidityReport) -> String {
    let mut parts = Vec::new();
    if !r.capacity_ok {
        parts.push(format!("smallest heat capacity {:.4e} is below the threshold", r.c_min));
    }
    if r.timescale_ok == Some(false) {
        parts.push(format!(
            "t_eq/tau_S = {:.4e} is below the threshold",
            r.teq_over_taus.unwrap_or(f64::NAN)
        ));
    }
    if parts.is_empty() {
        "model assumptions not satisfied".into()
    } else {
        parts.join("; ")
    }
}

fn print_validity(r: &ValidityReport) {
    println!("C_min          {:.6e}  {}", r.c_min, if r.capacity_ok { "ok" } else { "LOW" });
    match (r.tau_s, r.teq_over_taus, r.timescale_ok) {
        (Some(tau), Some(ratio), Some(ok)) => {
            println!("tau_S          {tau:.6e}");
            println!("t_eq/tau_S     {ratio:.6e}  {}", if ok { "ok" } else { "LOW" });
        }
        _ => println!("t_eq/tau_S     not applicable"),
    }
    println!("valid          {}", r.ok);
}

fn output_dir(explicit: Option<&Path>, scenario: &Scenario) -> PathBuf {
    let env = std::env::var(OUTPUT_DIR_ENV).ok();
    resolve_output_dir(explicit, scenario, env.as_deref())
}

fn simulate(loaded: &LoadedScenario, out: Option<&Path>) -> Outcome {
    let scenario = &loaded.scenario;
    let dir = output_dir(out, scenario);
    let start = Instant::now();
    let run = integrate(scenario)?;
    let manifest = RunManifest::new(scenario, &loaded.derived, run.stats.clone(), start.elapsed().as_secs_f64());
    let files = write_run(&dir, &run, manifest)?;

    let last = run.final_point();
    println!("termination    {:?}", run.termination);
    println!("t_final        {:.6e}", last.t);
    for (j, t) in last.temps.iter().enumerate() {
        println!("T_{:<12} {t:.9}", j + 1);
    }
    println!("T_eq           {:.9}", run.equilibrium);
    println!("events         {}", run.events.len());
    println!("wrote          {}", files.trajectory.display());
    println!("               {}", files.events.display());
    println!("               {}", files.summary.display());
    Ok(())
}

fn estimate(scenario: &Scenario, json: bool) -> Outcome {
    let matrix = pairwise_teq_matrix(scenario);
    let plan = staged_equalization_plan(scenario);
    let alpha_min = scenario
        .reservoirs
        .iter()
        .map(|r| r.alpha)
        .fold(f64::INFINITY, f64::min);
    let ratio = optimal_frequency_ratio(alpha_min);
    let t_eq = equilibrium_temperature(&scenario.reservoirs)?;

    if json {
        let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
        let pairs: Vec<_> = matrix
            .estimates()
            .map(|e| {
                serde_json::json!({
                    "pair": [e.pair.0 + 1, e.pair.1 + 1],
                    "temperature": e.temperature,
                    "kappa": e.kappa,
                    "c_min": e.c_min,
                    "t_eq": e.t_eq,
                })
            })
            .collect();
        let steps: Vec<_> = plan
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "subset": one_based(&s.subset),
                    "parts": [one_based(&s.parts[0]), one_based(&s.parts[1])],
                    "predicted_time_scale": s.predicted_time_scale,
                    "plateau_temp": s.plateau_temp,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "equilibrium_temperature": t_eq,
            "optimal_frequency_ratio": { "alpha_min": alpha_min, "omega_over_T": ratio },
            "pairwise_teq_estimates": pairs,
            "merge_plan": steps,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("plain data"));
        return Ok(());
    }

    println!("T_eq = {t_eq:.9}");
    println!("optimal omega/T for alpha_min = {alpha_min}: {ratio:.6}");
    println!();
    println!("pairwise equalization times (estimates at each pair's mean temperature):");
    println!("{:>4} {:>4} {:>14} {:>14} {:>14}", "i", "j", "T_mean", "kappa", "t_eq");
    for e in matrix.estimates() {
        println!(
            "{:>4} {:>4} {:>14.6e} {:>14.6e} {:>14.6e}",
            e.pair.0 + 1,
            e.pair.1 + 1,
            e.temperature,
            e.kappa,
            e.t_eq
        );
    }
    println!();
    println!("merge plan:");
    for step in &plan.steps {
        let members: Vec<String> = step.subset.iter().map(|i| (i + 1).to_string()).collect();
        println!(
            "  {{{}}}  time scale {:.3e}  plateau {:.6}",
            members.join(","),
            step.predicted_time_scale,
            step.plateau_temp
        );
    }
    Ok(())
}

fn sweep(loaded: &LoadedScenario, axis: SweepAxis, values: &[f64], out: Option<&Path>) -> Outcome {
    let template = &loaded.scenario;
    let dir = output_dir(out, template);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    let start = Instant::now();
    let rows = run_sweep(template, axis, values);

    // one directory per run, so parallel writers never share a file
    let written: Vec<Result<(), Error>> = rows
        .par_iter()
        .enumerate()
        .map(|(k, row)| match (&row.result, &row.scenario) {
            (Ok(run), Some(scenario)) => {
                let manifest = RunManifest::new(scenario, &loaded.derived, run.stats.clone(), 0.0);
                write_run(&dir.join(format!("run_{:03}", k + 1)), run, manifest).map(|_| ())
            }
            _ => Ok(()),
        })
        .collect();
    for w in written {
        w?;
    }

    let table = dir.join("sweep.csv");
    let mut buf = Vec::new();
    write_sweep_table(&mut buf, axis, template.len(), &rows)
        .map_err(|e| Failure::Config(format!("{}: {e}", table.display())))?;
    std::fs::write(&table, buf).map_err(|e| Failure::Config(format!("{}: {e}", table.display())))?;
    let manifest = RunManifest::new(template, &loaded.derived, Default::default(), start.elapsed().as_secs_f64());
    write_json(&dir.join("manifest.json"), &manifest)?;

    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    for row in rows.iter().filter(|r| r.result.is_err()) {
        if let Err(e) = &row.result {
            eprintln!("warning: {axis} = {}: {e}", row.value);
        }
    }
    println!(
        "{} runs ({} failed), table written to {}",
        rows.len(),
        failed,
        table.display()
    );
    Ok(())
}

fn preset(name: Preset, out: Option<&Path>, curve: bool, strict: bool) -> Outcome {
    let loaded = name.load();
    let scenario = &loaded.scenario;
    if curve {
        let omega = scenario.omega();
        let alpha = scenario.reservoirs[0].alpha;
        let points = emit_teq_curve(omega, alpha, &default_u_grid())?;
        match out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
                let path = dir.join("teq_curve.csv");
                let mut buf = Vec::new();
                write_teq_curve(&mut buf, omega, alpha, &points).expect("writing to memory");
                std::fs::write(&path, buf).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
            None => {
                let stdout = std::io::stdout();
                write_teq_curve(stdout.lock(), omega, alpha, &points)
                    .map_err(|e| Failure::Config(format!("stdout: {e}")))?;
            }
        }
    }
    match out {
        Some(dir) => {
            check_validity(scenario, strict)?;
            std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{name}.toml"));
            std::fs::write(&path, name.source()).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            simulate(&loaded, Some(dir))
        }
        None if !curve => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(name.source().as_bytes())
                .map_err(|e| Failure::Config(format!("stdout: {e}")))?;
            Ok(())
        }
        None => Ok(()),
    }
}

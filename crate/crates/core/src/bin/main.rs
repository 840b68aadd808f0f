use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use periodic_inclusions::scenario::{self, RunStatus, Scenario};

/// Default output root when neither `--out` nor an `[output]` table is given.
const OUT_ENV: &str = "PERIODIC_INCLUSIONS_OUT";

#[derive(Parser)]
#[command(name = "periodic-inclusions", version, about = "Periodic evolution inclusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios. `builtin:NAME` selects a catalog scenario.
    Solve {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Output root; each scenario writes into `<out>/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for batches of scenarios.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        verbose: bool,
    },
    /// Parse a scenario, print the filled-in defaults and the hypothesis checks.
    Validate { config: String },
    /// Print closed-form reference values; lists the names when none is given.
    Oracle { name: Option<String> },
}

fn load(arg: &str) -> periodic_inclusions::Result<Scenario> {
    match arg.strip_prefix("builtin:") {
        Some(name) => scenario::builtin(name),
        None => scenario::load_scenario(arg),
    }
}

fn output_dir(scn: &Scenario, out: Option<&Path>) -> PathBuf {
    if let Some(root) = out {
        return root.join(&scn.name);
    }
    if let Some(dir) = &scn.output_dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(&scn.name)
}

fn solve(configs: &[String], out: Option<&Path>, jobs: usize) -> ExitCode {
    let mut jobs_list = Vec::new();
    let mut dirs = BTreeSet::new();
    for c in configs {
        match load(c) {
            Ok(scn) => {
                let dir = output_dir(&scn, out);
                if !dirs.insert(dir.clone()) {
                    eprintln!("error: {c}: output directory {} is used twice in this batch", dir.display());
                    return ExitCode::from(2);
                }
                jobs_list.push((c.clone(), scn, dir));
            }
            Err(e) => {
                eprintln!("error: {c}: {e}");
                return ExitCode::from(2);
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results = Mutex::new(vec![None; jobs_list.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, jobs_list.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((label, scn, dir)) = jobs_list.get(i) else { break };
                log::info!("{label}: running {} into {}", scn.workflow.name(), dir.display());
                let res = scenario::run(scn, dir).map_err(|e| e.to_string());
                results.lock().unwrap()[i] = Some(res);
            });
        }
    });

    let mut failed = false;
    for ((label, scn, dir), res) in jobs_list.iter().zip(results.into_inner().unwrap()) {
        match res.expect("every job ran") {
            Ok(art) => {
                match &art.status {
                    RunStatus::Success => println!("ok      {label} -> {}", dir.display()),
                    RunStatus::Failed { kind, message } => {
                        failed = true;
                        println!("failed  {label} [{kind}] {message}");
                    }
                }
                if art.diagnostics.status != "verified" {
                    println!("        {} is {}", scn.name, art.diagnostics.status);
                }
            }
            Err(e) => {
                failed = true;
                println!("error   {label}: {e}");
            }
        }
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn validate(config: &str) -> ExitCode {
    let scn = match load(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {config}: {e}");
            return ExitCode::from(2);
        }
    };
    println!("{}: valid {} scenario", scn.name, scn.workflow.name());
    for d in &scn.defaults {
        println!("  default {d}");
    }
    match scenario::diagnose(&scn) {
        Ok(diag) => {
            for c in &diag.checks {
                println!("  {:<26} {:?} {}", c.hypothesis, c.status, c.detail);
            }
            println!("  status: {}", diag.status);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: diagnostics failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn oracle(name: Option<&str>) -> ExitCode {
    let Some(name) = name else {
        for n in scenario::oracle_names() {
            println!("{n}");
        }
        return ExitCode::SUCCESS;
    };
    match scenario::oracle(name) {
        Ok(values) => {
            for (k, v) in values {
                println!("{k} = {v:.16e}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = matches!(cli.command, Command::Solve { verbose: true, .. });
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "debug" } else { "warn" }))
        .init();
    match cli.command {
        Command::Solve { configs, out, jobs, .. } => solve(&configs, out.as_deref(), jobs),
        Command::Validate { config } => validate(&config),
        Command::Oracle { name } => oracle(name.as_deref()),
    }
}

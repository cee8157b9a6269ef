//! Command-line driver for the builtin scenarios.
//!
//! Exit status: 0 on success, 1 when a verification case misses its
//! threshold, 2 for configuration or I/O errors, 3 when a solve fails
//! (rows computed before the failure are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tissue_fem::scenario::{parse_divisions, run_scenario, verify, ScenarioConfig, ScenarioKind};
use tissue_fem::Error;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tissue-fem",
    version,
    about = "Active fibered tissue finite-element scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write results.csv and manifest.json.
    Simulate {
        #[command(flatten)]
        select: Select,
        /// Output directory (default: the config's output_dir, else out/<scenario>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finite-element solutions with the semi-analytic reference.
    Verify {
        #[command(flatten)]
        select: Select,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// List the builtin scenarios.
    ListScenarios,
}

#[derive(Args)]
struct Select {
    /// Builtin scenario name; ignored when --config is given.
    #[arg(long, default_value = "free-contraction")]
    scenario: String,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drop the fiber/cross-fiber coupling constraint.
    #[arg(long)]
    no_coupling: bool,
    /// Element divisions as nx,ny,nz.
    #[arg(long)]
    mesh: Option<String>,
}

impl Select {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                ScenarioConfig::from_json(&text)?
            }
            None => ScenarioConfig::builtin(self.scenario.parse::<ScenarioKind>()?),
        };
        if self.no_coupling {
            config.coupling = false;
        }
        if let Some(mesh) = &self.mesh {
            config.mesh_divisions = parse_divisions(mesh)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn fail(code: u8, e: &dyn std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn simulate(select: &Select, out: Option<&Path>) -> ExitCode {
    let config = match select.load() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(config.scenario.name()));
    let run = match run_scenario(&config) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    let (csv, manifest) = match run.write(&dir) {
        Ok(paths) => paths,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    println!("{} rows -> {}", run.table.rows.len(), csv.display());
    println!("manifest -> {}", manifest.display());
    match &run.failure {
        Some(e) => fail(EXIT_SOLVE, e),
        None if !run.converged() => fail(EXIT_SOLVE, &"a solve stage did not converge"),
        None => ExitCode::SUCCESS,
    }
}

fn verify_cmd(select: &Select, json: bool) -> ExitCode {
    let config = match select.load() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    let report = match verify(&config) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return fail(EXIT_CONFIG, &e),
        Err(e) => return fail(EXIT_SOLVE, &e),
    };
    if json {
        match report.to_json() {
            Ok(text) => println!("{text}"),
            Err(e) => return fail(EXIT_CONFIG, &e),
        }
    } else {
        for c in &report.cases {
            println!(
                "{} {}: L2 {:.3e} max {:.3e} (threshold {:.0e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.label,
                c.l2,
                c.linf,
                c.threshold
            );
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { select, out } => simulate(select, out.as_deref()),
        Command::Verify { select, json } => verify_cmd(select, *json),
        Command::ListScenarios => {
            for kind in ScenarioKind::ALL {
                println!("{:<24} {}", kind.name(), kind.summary());
            }
            ExitCode::SUCCESS
        }
    }
}

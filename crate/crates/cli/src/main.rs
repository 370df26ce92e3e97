use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};

use vtolref::sim::{self, min_barrier_slack, BenchmarkCell, Method, SimOutput};
use vtolref::{verify, Error, ScenarioKind, Settings};

const SCENARIOS: [&str; 3] = ["hover-to-cruise", "cruise-to-hover", "static-hover"];
const METHODS: [&str; 2] = ["olopt", "cltvopt"];

#[derive(Parser, Debug)]
#[command(name = "vtolref", version)]
#[command(
    about = "Reference command generation and closed-loop simulation for a planar Lift+Cruise VTOL"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one method on one scenario and write the log and metrics
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Mean per-point compute time of each method on each transition
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Timed repetitions per cell, after one warm-up run
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Also write benchmark.csv into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the solvers and controllers against independent references
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Settings file of `key = value` lines
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Reference generator; `run` defaults to cltvopt, `benchmark` to both
    #[arg(long, value_parser = PossibleValuesParser::new(METHODS))]
    method: Option<String>,
    /// Scenario; overrides the settings file
    #[arg(long, value_parser = PossibleValuesParser::new(SCENARIOS))]
    scenario: Option<String>,
    /// Override one setting, e.g. `--set mass=2`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings, Error> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = &self.scenario {
            overrides.push(format!("scenario={s}"));
        }
        Settings::load(self.config.as_deref(), &overrides)
    }

    fn method(&self) -> Option<Method> {
        self.method
            .as_deref()
            .map(|m| m.parse().expect("clap restricts the values"))
    }
}

/// Exit status 2 for bad input, 1 for a failed run or check.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.into()),
            other => Failure::Run(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, out } => run(&common, &out),
        Command::Benchmark { common, reps, out } => benchmark(&common, reps, out.as_deref()),
        Command::Verify { common } => check(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run(common: &Common, out: &Path) -> Result<(), Failure> {
    let settings = common.settings()?;
    let method = common.method().unwrap_or(Method::ClTvOpt);
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))
        .map_err(Failure::Usage)?;
    let stem = format!("{}_{}", settings.scenario.kind, method);
    fs::write(
        out.join(format!("{stem}_settings.conf")),
        settings.to_text(),
    )
    .context("writing settings")?;

    let output = match sim::run(&settings, method) {
        Ok(o) => o,
        Err(failure) => {
            if let Error::Config(_) = failure.error {
                return Err(failure.error.into());
            }
            let path = out.join(format!("{stem}_partial.csv"));
            failure
                .log
                .write_csv(create(&path)?)
                .context("writing partial log")?;
            eprintln!("partial log: {}", path.display());
            return Err(Failure::Run(anyhow::anyhow!(
                "{method} on {}: {}",
                settings.scenario.kind,
                failure.error
            )));
        }
    };
    write_run(&settings, &output, out, &stem)?;
    Ok(())
}

fn write_run(settings: &Settings, output: &SimOutput, out: &Path, stem: &str) -> Result<()> {
    let log_path = out.join(format!("{stem}.csv"));
    output.log.write_csv(create(&log_path)?)?;
    if let Some(table) = &output.table {
        table.write_csv(create(&out.join(format!("{stem}_table.csv")))?)?;
    }
    let metrics = output.metrics(settings.params.weight())?;
    fs::write(out.join(format!("{stem}_metrics.txt")), metrics.to_text())?;
    fs::write(out.join(format!("{stem}_metrics.csv")), metrics.to_csv())?;

    println!("{} rows -> {}", output.log.len(), log_path.display());
    print!("{}", metrics.to_text());
    if output.method == Method::ClTvOpt {
        println!(
            "min_barrier_slack = {:e}",
            min_barrier_slack(settings, &output.log)?
        );
        println!("regularized_steps = {}", output.regularized_steps);
    }
    Ok(())
}

fn benchmark(common: &Common, reps: usize, out: Option<&Path>) -> Result<(), Failure> {
    let settings = common.settings()?;
    if reps < 3 {
        return Err(Failure::Usage(anyhow::anyhow!("--reps must be at least 3")));
    }
    let methods = match common.method() {
        Some(m) => vec![m],
        None => Method::ALL.to_vec(),
    };
    let scenarios = match common.scenario {
        Some(_) => vec![settings.scenario.kind],
        None => vec![ScenarioKind::HoverToCruise, ScenarioKind::CruiseToHover],
    };

    let mut cells: Vec<BenchmarkCell> = Vec::new();
    for &kind in &scenarios {
        for &method in &methods {
            let s = settings.clone().with_scenario(kind);
            let cell = sim::benchmark(&s, method, reps).map_err(|f| Failure::from(f.error))?;
            cells.push(cell);
        }
    }

    println!(
        "{:<16} {:<8} {:>5} {:>12} {:>7} {:>14} {:>14}",
        "scenario", "method", "reps", "mean_total_s", "N", "per_point_N_s", "per_point_N-1_s"
    );
    for c in &cells {
        println!(
            "{:<16} {:<8} {:>5} {:>12.6} {:>7} {:>14.4e} {:>14.4e}",
            c.scenario.name(),
            c.method.name(),
            c.repetitions,
            c.mean_total_s,
            c.points_inclusive,
            c.per_point_inclusive_s,
            c.per_point_exclusive_s
        );
    }
    for &kind in &scenarios {
        let per = |m: Method| {
            cells
                .iter()
                .find(|c| c.method == m && c.scenario == kind)
                .map(|c| c.per_point_inclusive_s)
        };
        if let (Some(ol), Some(cl)) = (per(Method::OlOpt), per(Method::ClTvOpt)) {
            println!(
                "{}: olopt/cltvopt per-point ratio = {:.2}",
                kind.name(),
                ol / cl
            );
        }
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))
            .map_err(Failure::Usage)?;
        let mut w = csv::Writer::from_writer(create(&dir.join("benchmark.csv"))?);
        let io = |e: csv::Error| Failure::Run(e.into());
        w.write_record([
            "scenario",
            "method",
            "repetitions",
            "mean_total_s",
            "points",
            "per_point_s",
            "per_point_excl_endpoint_s",
        ])
        .map_err(io)?;
        for c in &cells {
            w.write_record([
                c.scenario.name().to_string(),
                c.method.name().to_string(),
                c.repetitions.to_string(),
                c.mean_total_s.to_string(),
                c.points_inclusive.to_string(),
                c.per_point_inclusive_s.to_string(),
                c.per_point_exclusive_s.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().context("writing benchmark.csv")?;
    }
    Ok(())
}

fn check(common: &Common) -> Result<(), Failure> {
    let settings = common.settings()?;
    let results = verify::run_all(&settings)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        println!("{r}");
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed > 0 {
        Err(Failure::Run(anyhow::anyhow!(
            "{failed} verification checks failed"
        )))
    } else {
        Ok(())
    }
}

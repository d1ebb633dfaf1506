use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qrfnet::frc::builtin_transforms;
use qrfnet::scenario::{
    builtin_scenario, builtin_scenarios, parse, query_csv, run_text, run_with, sample_outcomes, unitaries, QueryOutput,
    RunOptions, RunResult, Scenario,
};
use qrfnet::validate_momentum_conserving;

/// Exact simulator for networks of quantum reference frames on a circle.
#[derive(Parser)]
#[command(name = "qrfnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its outcome tree and query results.
    Run(RunArgs),
    /// Individual-case conservation check over a set of particles.
    Check(CheckArgs),
    /// Print the states of a scenario before and after a coordinate change.
    #[command(alias = "transform-coords")]
    Transform(TransformArgs),
    /// Check that every unitary in a scenario conserves total momentum.
    ValidateUnitary {
        file: PathBuf,
    },
    /// List or print the bundled scenarios.
    Examples {
        #[arg(long, conflicts_with = "emit")]
        list: bool,
        #[arg(long, value_name = "NAME")]
        emit: Option<String>,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Write to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the name of a bundled scenario.
    file: PathBuf,
    #[command(flatten)]
    output: Output,
    /// Query whose CSV to print (default: the first query).
    #[arg(long, value_name = "K")]
    query: Option<usize>,
    /// Draw N Monte Carlo shots instead of enumerating every branch.
    #[arg(long, value_name = "N", requires = "seed")]
    sample: Option<usize>,
    #[arg(long, value_name = "K")]
    seed: Option<u64>,
    #[arg(long, value_name = "X")]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Pass,
    Fail,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    /// Conserving set, e.g. G,F,F2,S,S2.
    #[arg(long, value_name = "P1,P2,...")]
    set: String,
    /// Reference point (events applied); default: after the last preparation.
    #[arg(long, value_name = "K")]
    from: Option<usize>,
    /// Exit with status 1 unless the verdict matches.
    #[arg(long)]
    expect: Option<Expect>,
    #[command(flatten)]
    output: Output,
    #[arg(long, value_name = "X")]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct TransformArgs {
    file: PathBuf,
    #[arg(long, value_parser = ["pair", "chain", "network"])]
    coords: String,
    /// Point in the pipeline (default: the end).
    #[arg(long, value_name = "K")]
    at: Option<usize>,
    /// Particles filling the transform's roles, in order.
    #[arg(long, value_name = "P1,P2,...")]
    order: Option<String>,
    #[arg(long)]
    json: bool,
}

enum Failure {
    /// Parse or usage problem.
    Usage(anyhow::Error),
    /// The scenario ran but failed, or an expectation was not met.
    Scenario(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn source(file: &Path) -> anyhow::Result<String> {
    match fs::read_to_string(file) {
        Ok(s) => Ok(s),
        Err(e) => match file.to_str().and_then(builtin_scenario) {
            Some(s) if !file.exists() => Ok(s.to_string()),
            _ => Err(e).with_context(|| format!("cannot read {}", file.display())),
        },
    }
}

fn load(file: &Path, extra: Option<&str>) -> Result<Scenario, Failure> {
    let mut text = source(file)?;
    if let Some(line) = extra {
        if !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(line);
        text.push('\n');
    }
    parse(&text).map_err(|e| Failure::Usage(anyhow::anyhow!("{}:\n{e}", file.display())))
}

fn execute(sc: &Scenario, tolerance: Option<f64>) -> Result<RunResult, Failure> {
    let mut options = RunOptions::default();
    if let Some(t) = tolerance {
        if t.is_nan() || t <= 0.0 {
            return Err(Failure::Usage(anyhow::anyhow!("--tolerance must be positive")));
        }
        options.tolerance = t;
    }
    run_with(sc, &options).map_err(|e| Failure::Scenario(e.into()))
}

fn emit(output: &Output, text: &str) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let sc = load(&args.file, None)?;
    if let Some(shots) = args.sample {
        let counts = sample_outcomes(&sc, shots, args.seed.unwrap_or_default()).map_err(|e| Failure::Scenario(e.into()))?;
        let text = if args.output.json {
            json(&counts)?
        } else {
            let mut s = String::from("outcome,count\n");
            for c in &counts {
                let key: Vec<String> = c.outcomes.iter().map(|o| format!("{}={}", o.particle, o.value)).collect();
                s.push_str(&format!("{},{}\n", key.join(";"), c.count));
            }
            s
        };
        return Ok(emit(&args.output, &text)?);
    }
    let result = execute(&sc, args.tolerance)?;
    let text = if args.output.json {
        json(&result)?
    } else if args.output.csv {
        let index = match args.query {
            Some(k) if k >= result.queries.len() => {
                return Err(Failure::Usage(anyhow::anyhow!(
                    "--query {k}: the scenario has {} queries",
                    result.queries.len()
                )))
            }
            Some(k) => Some(k),
            None if result.queries.is_empty() => None,
            None => Some(0),
        };
        query_csv(&result, index).map_err(anyhow::Error::from)?
    } else {
        run_text(&result)
    };
    Ok(emit(&args.output, &text)?)
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let mut line = format!("check {}", args.set);
    if let Some(k) = args.from {
        line.push_str(&format!(" from {k}"));
    }
    let mut sc = load(&args.file, Some(&line))?;
    sc.queries = sc.queries.split_off(sc.queries.len() - 1);
    let result = execute(&sc, args.tolerance)?;
    let QueryOutput::Check(report) = &result.queries[0] else {
        unreachable!("the only query is a check")
    };
    let text = if args.output.json {
        json(report)?
    } else if args.output.csv {
        query_csv(&result, Some(0)).map_err(anyhow::Error::from)?
    } else {
        report.table.clone()
    };
    emit(&args.output, &text)?;
    match args.expect {
        Some(Expect::Pass) if !report.pass => Err(Failure::Scenario(anyhow::anyhow!("expected PASS, got FAIL"))),
        Some(Expect::Fail) if report.pass => Err(Failure::Scenario(anyhow::anyhow!("expected FAIL, got PASS"))),
        _ => Ok(()),
    }
}

/// Particles for the catalog roles: by name (`F'` also matches `F2`), or all
/// particles in declaration order when their number fits.
fn default_order(sc: &Scenario, coords: &str) -> anyhow::Result<String> {
    let catalog = builtin_transforms();
    let entry = &catalog[coords];
    let by_role: Option<Vec<&str>> = entry
        .roles
        .iter()
        .map(|role| {
            let alt = role.replace('\'', "2");
            sc.particles
                .iter()
                .find(|p| p.name == *role || p.name == alt)
                .map(|p| p.name.as_str())
        })
        .collect();
    if let Some(names) = by_role {
        return Ok(names.join(","));
    }
    if sc.particles.len() == entry.transform.dimension() {
        return Ok(sc.particles.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(","));
    }
    bail!(
        "cannot match particles to the roles {} of '{coords}'; pass --order",
        entry.roles.join(",")
    )
}

fn cmd_transform(args: TransformArgs) -> Result<(), Failure> {
    let order = match args.order {
        Some(o) => o,
        None => default_order(&load(&args.file, None)?, &args.coords)?,
    };
    let mut line = format!("transform {} {order}", args.coords);
    if let Some(k) = args.at {
        line.push_str(&format!(" at {k}"));
    }
    let mut sc = load(&args.file, Some(&line))?;
    sc.queries = sc.queries.split_off(sc.queries.len() - 1);
    let result = execute(&sc, None)?;
    let text = if args.json {
        json(&result.queries[0])?
    } else {
        let full = run_text(&result);
        let start = full.find("[0] transform").unwrap_or(0);
        full[start..].to_string()
    };
    print!("{text}");
    Ok(())
}

fn cmd_validate(file: &Path) -> Result<(), Failure> {
    let sc = load(file, None)?;
    let mut invalid = 0;
    let all = unitaries(&sc);
    if all.is_empty() {
        println!("no unitaries");
    }
    for (name, spec) in all {
        let report = validate_momentum_conserving(&spec);
        if report.valid {
            println!("{name}: ok (totals {:?})", spec.totals());
        } else {
            invalid += 1;
            println!("{name}: INVALID");
            for d in &report.diagnostics {
                println!("  {d}");
            }
        }
    }
    if invalid > 0 {
        return Err(Failure::Scenario(anyhow::anyhow!("{invalid} unitary(ies) fail validation")));
    }
    Ok(())
}

fn cmd_examples(emit_name: Option<String>) -> Result<(), Failure> {
    match emit_name {
        Some(name) => match builtin_scenario(&name) {
            Some(src) => print!("{src}"),
            None => {
                let names: Vec<&str> = builtin_scenarios().map(|(n, _)| n).collect();
                return Err(Failure::Usage(anyhow::anyhow!("no bundled scenario '{name}' (known: {})", names.join(", "))));
            }
        },
        None => {
            for (name, _) in builtin_scenarios() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Check(args) => cmd_check(args),
        Command::Transform(args) => cmd_transform(args),
        Command::ValidateUnitary { file } => cmd_validate(&file),
        Command::Examples { emit, .. } => cmd_examples(emit),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Scenario(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

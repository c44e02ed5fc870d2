use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wq_sysid::experiment::{
    run_experiment, run_scenarios, ExperimentConfig, ExperimentReport, InputSpec, NetworkSource, OrderChoice, Preset,
    ScenarioCell,
};
use wq_sysid::{Method, NetworkSpec};

#[derive(Parser)]
#[command(
    name = "wq-sysid",
    version,
    about = "System identification experiments on chlorine-transport plants"
)]
struct Cli {
    /// Worker threads for the scenario grid (default: all cores).
    #[arg(long, global = true, env = "WQ_SYSID_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identify one model and validate it against the plant.
    Identify(IdentifyArgs),
    /// Run the 5 methods × 3 scenarios grid.
    Scenarios(ScenarioArgs),
}

#[derive(Args)]
#[group(id = "net", required = true, multiple = false)]
struct NetworkArgs {
    /// Bundled network: three-node or net1.
    #[arg(long)]
    preset: Option<Preset>,
    /// Network description in JSON.
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// n4sid, moesp, cva, era or okid-era.
    #[arg(long)]
    method: Method,
    /// Model order n_r.
    #[arg(long, conflicts_with = "energy_goal", required_unless_present = "energy_goal")]
    order: Option<usize>,
    /// Pick the smallest order whose singular-value energy exceeds this.
    #[arg(long)]
    energy_goal: Option<f64>,
    /// impulse[:amp], rect:start:width:amp or random:lo:hi.
    #[arg(long, default_value = "rect:0:40:2")]
    test_input: InputSpec,
    #[arg(long, default_value = "random:0:2")]
    val_input: InputSpec,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subspace block rows k.
    #[arg(long)]
    block_rows: Option<usize>,
    /// OKID Markov horizon.
    #[arg(long)]
    markov_horizon: Option<usize>,
    /// Report path; traces go next to it with a .csv extension.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "scenarios")]
    out: PathBuf,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn network_source(net: &NetworkArgs) -> AnyResult<NetworkSource> {
    match (&net.preset, &net.network) {
        (Some(p), _) => Ok(NetworkSource::Preset(*p)),
        (None, Some(path)) => Ok(NetworkSource::Spec(NetworkSpec::load(path)?)),
        (None, None) => Err("one of --preset or --network is required".into()),
    }
}

fn write_report(report: &ExperimentReport, path: &Path) -> AnyResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, report.to_json()?)?;
    report.write_traces_csv(fs::File::create(path.with_extension("csv"))?)?;
    Ok(())
}

fn summary(r: &ExperimentReport) -> String {
    format!(
        "{:<9} n_r={:<4} rmse={:.4e} rel={:.3e} stable={} time={:.3}s{}",
        r.method.name(),
        r.n_r,
        r.rmse,
        r.relative_rmse(),
        r.stable,
        r.wall_time_s,
        match r.diverged_at {
            Some(k) => format!(" diverged@{k}"),
            None => String::new(),
        }
    )
}

fn identify(args: IdentifyArgs) -> AnyResult<()> {
    let order = match (args.order, args.energy_goal) {
        (Some(n), None) => OrderChoice::Fixed(n),
        (None, Some(g)) => OrderChoice::EnergyGoal(g),
        _ => return Err("give exactly one of --order or --energy-goal".into()),
    };
    let cfg = ExperimentConfig {
        network: network_source(&args.net)?,
        method: args.method,
        order,
        test_input: args.test_input,
        validation_input: args.val_input,
        steps: args.steps,
        seed: args.seed,
        block_rows: args.block_rows,
        markov_horizon: args.markov_horizon,
    };
    let report = run_experiment(&cfg)?;
    write_report(&report, &args.out)?;
    println!("{}", summary(&report));
    Ok(())
}

fn scenarios(args: ScenarioArgs) -> AnyResult<()> {
    let cells = run_scenarios(args.preset, args.seed);
    fs::create_dir_all(&args.out)?;
    for cell in &cells {
        let stem = format!("s{}_{}", cell.scenario, cell.method.name());
        match (&cell.report, &cell.error) {
            (Some(r), _) => {
                write_report(r, &args.out.join(format!("{stem}.json")))?;
                println!("S{} {}", cell.scenario, summary(r));
            }
            (None, Some(e)) => println!("S{} {:<9} failed: {e}", cell.scenario, cell.method.name()),
            (None, None) => {}
        }
    }
    fs::write(args.out.join("grid.json"), serde_json::to_string_pretty(&grid(&cells))?)?;
    println!("{}", table(&cells));
    Ok(())
}

/// RMSE grid without traces: one row per method, one column per scenario.
fn grid(cells: &[ScenarioCell]) -> serde_json::Value {
    let rows: Vec<_> = Method::ALL
        .iter()
        .map(|m| {
            let per: Vec<_> = (1..=3)
                .map(|s| {
                    let cell = cells.iter().find(|c| c.scenario == s && c.method == *m);
                    match cell.and_then(|c| c.report.as_ref()) {
                        Some(r) => serde_json::json!({
                            "scenario": s,
                            "n_r": r.n_r,
                            "rmse": r.rmse,
                            "relative_rmse": r.relative_rmse(),
                            "stable": r.stable,
                            "diverged_at": r.diverged_at,
                            "wall_time_s": r.wall_time_s,
                        }),
                        None => serde_json::json!({
                            "scenario": s,
                            "error": cell.and_then(|c| c.error.clone()),
                        }),
                    }
                })
                .collect();
            serde_json::json!({ "method": m.name(), "scenarios": per })
        })
        .collect();
    serde_json::Value::Array(rows)
}

fn table(cells: &[ScenarioCell]) -> String {
    let mut out = format!("{:<10}{:>14}{:>14}{:>14}", "method", "S1", "S2", "S3");
    for m in Method::ALL {
        out.push_str(&format!("\n{:<10}", m.name()));
        for s in 1..=3 {
            let cell = cells.iter().find(|c| c.scenario == s && c.method == m);
            let text = match cell.and_then(|c| c.report.as_ref()) {
                Some(r) if r.stable && r.diverged_at.is_none() => format!("{:.4e}", r.rmse),
                Some(_) => "---".to_string(),
                None => "failed".to_string(),
            };
            out.push_str(&format!("{text:>14}"));
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Identify(a) => identify(a),
        Command::Scenarios(a) => scenarios(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

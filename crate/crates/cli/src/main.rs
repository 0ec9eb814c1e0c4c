use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridplan::chronics::PerturbationKind;
use gridplan::grid::load_grid;
use gridplan::planner::{compare_alphas, plan_day, sensitivity_run, OperationalPlan, PlannerOptions};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::{Chronic, EngineConfig, Grid};
use gridplan_assistant::{AppState, Registry};

#[derive(Parser)]
#[command(name = "gridplan", version, about = "Day-ahead congestion planning on a DC grid model")]
struct Cli {
    /// Engine settings (TOML, or JSON by extension); defaults otherwise.
    #[arg(long, global = true, value_name = "FILE")]
    engine_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one chronic with the agent and write the plan JSON plus a profile CSV.
    Plan(PlanArgs),
    /// Plan a directory of chronics for several α values and write the comparison table.
    Compare(CompareArgs),
    /// Replay saved plans on perturbed wind and write per-episode deltas.
    Sensitivity(SensitivityArgs),
    /// Generate a synthetic chronic.
    Generate(GenerateArgs),
    /// Run the operator-assistant HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Bundled grid name or path to a grid JSON file.
    #[arg(long)]
    grid: String,
    #[arg(long, value_name = "CSV")]
    chronics: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    grid: String,
    /// Every `*.csv` in the directory, split into days.
    #[arg(long, value_name = "DIR")]
    chronics_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    alphas: Vec<f64>,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Also write every plan, and the day chronic it was made for, here.
    #[arg(long, value_name = "DIR")]
    plans_out: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    grid: String,
    /// Plan JSON files; each must name the chronic it was made for.
    #[arg(long, value_name = "DIR")]
    plans_dir: PathBuf,
    /// `all` for the four wind scenarios, or a comma-separated list of names.
    #[arg(long, default_value = "all")]
    scenarios: String,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "congested")]
    profile: String,
    #[arg(long, default_value_t = 1)]
    days: usize,
    /// Defaults to standard output.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Extra grids (`*.json`) and chronics (`*.csv`) to offer next to the bundled ones.
    #[arg(long, value_name = "DIR")]
    fixtures: Option<PathBuf>,
    /// Session snapshots are written here on shutdown.
    #[arg(long, value_name = "DIR")]
    snapshots: Option<PathBuf>,
}

enum Failure {
    /// Bad input: exit code 2.
    Invalid(String),
    /// Anything else: exit code 1.
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<gridplan::Error> for Failure {
    fn from(e: gridplan::Error) -> Self {
        match e {
            gridplan::Error::Io { .. } | gridplan::Error::Diverged(_) => Failure::Runtime(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

/// What a successful command wants the process to report.
enum Done {
    Ok,
    Truncated,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Done::Ok) => ExitCode::SUCCESS,
        Ok(Done::Truncated) => ExitCode::from(3),
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<Done, Failure> {
    let config = match &cli.engine_config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    match cli.command {
        Command::Plan(a) => plan(a, &config),
        Command::Compare(a) => compare(a, &config),
        Command::Sensitivity(a) => sensitivity(a, &config),
        Command::Generate(a) => generate(a),
        Command::Serve(a) => serve(a, config),
    }
}

/// A path if one exists, else a bundled or `synthetic-118-<seed>` name.
fn resolve_grid(arg: &str) -> Result<Grid, Failure> {
    if Path::new(arg).exists() {
        return Ok(load_grid(arg)?);
    }
    Registry::builtin()
        .grid(arg)
        .map(|g| (*g).clone())
        .map_err(|_| Failure::Invalid(format!("`{arg}` is neither a grid file nor a bundled grid (t3, t3g3, radial4, grid14, synthetic-118-<seed>)")))
}

fn load_chronic(path: &Path, grid: &Grid) -> Result<Chronic, Failure> {
    Ok(Chronic::load(path)?.align(grid)?)
}

fn plan(a: PlanArgs, config: &EngineConfig) -> Result<Done, Failure> {
    let grid = resolve_grid(&a.grid)?;
    let chronic = load_chronic(&a.chronics, &grid)?;
    let mut plan = plan_day(&grid, &chronic, a.alpha, config, PlannerOptions::default())?;
    plan.chronic_file = Some(std::path::absolute(&a.chronics).map_err(|e| Failure::Runtime(e.to_string()))?);
    plan.save(&a.out)?;
    let profile = profile_path(&a.out);
    plan.save_profile_csv(&profile)?;
    let m = &plan.metrics;
    println!(
        "{}: {} steps, congestion {:.2} MWh, switching {}, redispatch {:.2} MWh, curtailment {:.2} MWh",
        plan.scenario_id,
        plan.steps.len(),
        m.remaining_congestion_mwh,
        m.switching_operations,
        m.redispatch_mwh,
        m.curtailment_mwh
    );
    println!("wrote {} and {}", a.out.display(), profile.display());
    match plan.truncated_at {
        Some(t) => {
            eprintln!("blackout at step {t}; plan truncated");
            Ok(Done::Truncated)
        }
        None => Ok(Done::Ok),
    }
}

/// `plan.json` → `plan_profile.csv`
fn profile_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("plan");
    out.with_file_name(format!("{stem}_profile.csv"))
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Invalid(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn compare(a: CompareArgs, config: &EngineConfig) -> Result<Done, Failure> {
    let grid = resolve_grid(&a.grid)?;
    let mut days = Vec::new();
    for path in csv_files(&a.chronics_dir)? {
        days.extend(load_chronic(&path, &grid)?.days());
    }
    if days.is_empty() {
        return Err(Failure::Invalid(format!("no chronics in {}", a.chronics_dir.display())));
    }
    let comparison = compare_alphas(&grid, &days, &a.alphas, config, PlannerOptions::default())?;
    let table = &comparison.table;
    table.save_csv(&a.out)?;
    println!(
        "{} congested days, {} congestion-free days dropped",
        table.congested_days.len(),
        table.filtered_days.len()
    );
    println!("{:>6} {:>12} {:>10} {:>11}", "alpha", "congestion%", "switching%", "redispatch%");
    for r in &table.rows {
        println!(
            "{:>6} {:>12.2} {:>10.2} {:>11.2}",
            r.label(),
            r.remaining_congestion_pct,
            r.switching_pct,
            r.redispatch_pct
        );
    }
    if let Some(dir) = &a.plans_out {
        let chronic_dir = dir.join("chronics");
        std::fs::create_dir_all(&chronic_dir).map_err(|e| Failure::Runtime(format!("{}: {e}", chronic_dir.display())))?;
        let chronic_dir = std::path::absolute(&chronic_dir).map_err(|e| Failure::Runtime(e.to_string()))?;
        for day in days.iter().filter(|d| table.congested_days.contains(&d.scenario_id)) {
            day.save(chronic_dir.join(format!("{}.csv", day.scenario_id)))?;
        }
        let labelled = comparison
            .noop
            .iter()
            .map(|p| ("noop".to_string(), p))
            .chain(comparison.by_alpha.iter().flat_map(|(alpha, plans)| plans.iter().map(move |p| (format!("a{alpha}"), p))));
        for (label, p) in labelled {
            let mut p = p.clone();
            p.chronic_file = Some(chronic_dir.join(format!("{}.csv", p.scenario_id)));
            p.save(dir.join(format!("{}_{label}.json", p.scenario_id)))?;
        }
    }
    println!("wrote {}", a.out.display());
    Ok(Done::Ok)
}

fn parse_scenarios(arg: &str) -> Result<Vec<PerturbationKind>, Failure> {
    if arg == "all" {
        return Ok(PerturbationKind::WIND.to_vec());
    }
    arg.split(',')
        .map(|name| {
            PerturbationKind::from_name(name.trim())
                .ok_or_else(|| Failure::Invalid(format!("unknown scenario `{name}`")))
        })
        .collect()
}

fn sensitivity(a: SensitivityArgs, config: &EngineConfig) -> Result<Done, Failure> {
    let grid = resolve_grid(&a.grid)?;
    let kinds = parse_scenarios(&a.scenarios)?;
    let mut days = Vec::new();
    let plan_files = std::fs::read_dir(&a.plans_dir)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", a.plans_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"));
    let mut plan_files: Vec<PathBuf> = plan_files.collect();
    plan_files.sort();
    for path in plan_files {
        let plan = OperationalPlan::load(&path)?;
        if plan.policy != gridplan::planner::Policy::Agent {
            continue;
        }
        if plan.grid != grid.name {
            return Err(Failure::Invalid(format!("{}: made for grid `{}`, not `{}`", path.display(), plan.grid, grid.name)));
        }
        if plan.alpha != 1.0 {
            eprintln!("warning: {} uses α = {}; sensitivity expects topology-only plans (α = 1)", path.display(), plan.alpha);
        }
        let chronic_file = plan
            .chronic_file
            .clone()
            .ok_or_else(|| Failure::Invalid(format!("{}: plan does not record its chronic file", path.display())))?;
        let chronic = load_chronic(&chronic_file, &grid)?;
        days.push((chronic, plan));
    }
    if days.is_empty() {
        return Err(Failure::Invalid(format!("no agent plans in {}", a.plans_dir.display())));
    }
    let report = sensitivity_run(&grid, &days, &kinds, config)?;
    let summary = report.save(&a.out)?;
    println!("{} plans, {} episode records", days.len(), report.records.len());
    println!("{:<30} {:>8} {:>9} {:>9}", "scenario", "episodes", "median", "improved");
    for s in &report.summary {
        println!(
            "{:<30} {:>8} {:>9.3} {:>8.0}%",
            s.perturbation.name(),
            s.episodes,
            s.median,
            100.0 * s.fraction_improved
        );
    }
    println!("wrote {} and {}", a.out.display(), summary.display());
    Ok(Done::Ok)
}

fn generate(a: GenerateArgs) -> Result<Done, Failure> {
    let grid = resolve_grid(&a.grid)?;
    let profile: Profile = a.profile.parse()?;
    let chronic = generate_scenario(&grid, a.seed, profile, a.days)?;
    match &a.out {
        Some(path) => {
            chronic.save(path)?;
            eprintln!("wrote {} ({} steps)", path.display(), chronic.step_count());
        }
        None => chronic.write_csv(std::io::stdout().lock())?,
    }
    Ok(Done::Ok)
}

fn serve(a: ServeArgs, config: EngineConfig) -> Result<Done, Failure> {
    let registry = match &a.fixtures {
        Some(dir) => Registry::load_dir(dir)?,
        None => Registry::builtin(),
    };
    let state = AppState::new(registry, config);
    let addr = SocketAddr::new(a.host, a.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(gridplan_assistant::serve(state, addr, a.snapshots))
        .map_err(|e| Failure::Runtime(format!("{addr}: {e}")))?;
    Ok(Done::Ok)
}

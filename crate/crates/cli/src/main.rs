use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use e2map_core::harness::{ConfigError, MapArchive, RunConfig};
use e2map_core::sim::{build_map, render_topdown, run_episode, run_suite, RenderOptions, ScenarioSpec, SimError, SuiteSpec};
use e2map_core::grounding::LexiconEmbedder;
use e2map_core::Cell;

#[derive(Parser)]
#[command(name = "e2map", version, about = "Emotion-aware grid navigation: map building, episodes, benchmark suite and heatmaps")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Build the emotion and feature layers from a scenario layout.
    BuildMap {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one episode of a scenario on a stored map.
    Run {
        /// Scenario file; optional with --print-config.
        scenario: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        /// 1-based index into the scenario's instruction list.
        #[arg(long, default_value_t = 1)]
        episode: usize,
        /// Instruction text; overrides --episode.
        #[arg(long)]
        instruction: Option<String>,
        /// Disable reflection and map updates.
        #[arg(long)]
        no_update: bool,
        /// Write the updated map back to --map.
        #[arg(long)]
        persist: bool,
        /// Print the effective configuration as JSON and exit.
        #[arg(long)]
        print_config: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the agent trajectory as CSV (step,row,col).
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
        /// Print the full result as JSON instead of the summary line.
        #[arg(long)]
        json: bool,
    },
    /// Run every scenario of a suite and write the results table.
    Suite {
        suite: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Skip the no-update baseline.
        #[arg(long)]
        no_ablation: bool,
    },
    /// Export the emotion field as a PGM heatmap.
    Render {
        #[arg(long)]
        map: PathBuf,
        /// Trajectory CSV with row and col columns.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Pixels per cell.
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Heat map only, without occupancy and trajectory overlays.
        #[arg(long)]
        no_overlay: bool,
    },
}

#[derive(Debug)]
enum CliError {
    /// Bad input: missing or malformed files, invalid configuration.
    Config(String),
    /// Failure while running.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn sim_runtime(e: SimError) -> CliError {
    match e {
        SimError::Scenario(m) => CliError::Config(m),
        other => CliError::Runtime(other.to_string()),
    }
}

fn io_runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec, CliError> {
    let mut spec = ScenarioSpec::load(path).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn load_map(path: &Path) -> Result<MapArchive, CliError> {
    MapArchive::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn build_map_cmd(scenario: &Path, output: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(config)?;
    let spec = load_scenario(scenario, None)?;
    // layout problems, including an empty occupancy, are input errors
    let (emotion, features) =
        build_map(&spec, &LexiconEmbedder::bundled(), &config.map_settings()).map_err(|e| CliError::Config(e.to_string()))?;
    let archive = MapArchive::new(emotion, Some(features)).map_err(|e| CliError::Runtime(e.to_string()))?;
    archive.save(output).map_err(|e| io_runtime(output, e))?;
    let header = archive.header();
    println!("wrote {} ({} occupied cells, sha256 {})", output.display(), header.cells, header.sha256);
    Ok(())
}

fn write_trajectory(path: &Path, cells: &[Cell]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_runtime(path, e))?;
    w.write_record(["step", "row", "col"]).map_err(|e| io_runtime(path, e))?;
    for (i, c) in cells.iter().enumerate() {
        w.write_record([i.to_string(), c.row.to_string(), c.col.to_string()]).map_err(|e| io_runtime(path, e))?;
    }
    w.flush().map_err(|e| io_runtime(path, e))
}

fn read_trajectory(path: &Path) -> Result<Vec<Cell>, CliError> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col_of = |name: &str| headers.iter().position(|h| h.trim() == name).ok_or_else(|| bad(format!("missing {name:?} column")));
    let (ri, ci) = (col_of("row")?, col_of("col")?);
    let mut cells = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| record.get(i).and_then(|v| v.trim().parse::<i32>().ok()).ok_or_else(|| bad(format!("bad record {record:?}")));
        cells.push(Cell::new(parse(ri)?, parse(ci)?));
    }
    Ok(cells)
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    scenario: Option<&Path>,
    map: Option<&Path>,
    episode: usize,
    instruction: Option<String>,
    no_update: bool,
    persist: bool,
    print_config: bool,
    seed: Option<u64>,
    config: Option<&Path>,
    trajectory_out: Option<&Path>,
    json: bool,
) -> Result<(), CliError> {
    let mut config = load_config(config)?;
    if seed.is_some() {
        config.seed = seed;
    }
    if print_config {
        println!("{}", config.to_json_pretty());
        return Ok(());
    }
    let scenario = scenario.ok_or_else(|| CliError::Config("a scenario file is required".into()))?;
    let map = map.ok_or_else(|| CliError::Config("--map is required".into()))?;
    let spec = load_scenario(scenario, config.seed)?;
    let archive = load_map(map)?;
    let features = archive.features.clone().ok_or_else(|| CliError::Config(format!("{} has no feature layer", map.display())))?;
    let text = match instruction {
        Some(t) => t,
        None => {
            let list = spec.instruction_list();
            list.get(episode.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| CliError::Config(format!("episode {episode} is outside 1..={}", list.len())))?
        }
    };
    let mut stack = config.build_stack(archive.emotion, features.clone())?;
    let result = run_episode(&spec, &text, episode, &mut stack, &config.episode_config(!no_update), persist).map_err(sim_runtime)?;
    if persist && !no_update {
        MapArchive::new(stack.emotion, Some(features))
            .and_then(|a| a.save(map))
            .map_err(|e| io_runtime(map, e))?;
    }
    if let Some(path) = trajectory_out {
        write_trajectory(path, &result.trajectory)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))?);
    } else {
        println!("{}", result.summary());
    }
    Ok(())
}

fn suite_cmd(suite: &Path, output: &Path, seed: Option<u64>, config: Option<&Path>, no_ablation: bool) -> Result<(), CliError> {
    let config = load_config(config)?;
    let (spec, mut scenarios) = SuiteSpec::load(suite).map_err(|e| CliError::Config(e.to_string()))?;
    let ablation = spec.ablation && !no_ablation;
    if let Some(s) = seed.or(config.seed) {
        for spec in &mut scenarios {
            spec.seed = s;
        }
    }
    let report = run_suite(&scenarios, &config.episode_config(true), &config.map_settings(), ablation).map_err(sim_runtime)?;
    let file = File::create(output).map_err(|e| io_runtime(output, e))?;
    report.write_csv(file).map_err(|e| io_runtime(output, e))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for name in report.scenarios() {
        let (ok, n) = report.tally(&name);
        writeln!(out, "{name}: {ok}/{n}").map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn render_cmd(map: &Path, trajectory: Option<&Path>, output: &Path, scale: usize, no_overlay: bool) -> Result<(), CliError> {
    if scale == 0 {
        return Err(CliError::Config("--scale must be at least 1".into()));
    }
    let archive = load_map(map)?;
    let cells = match trajectory {
        Some(p) => read_trajectory(p)?,
        None => Vec::new(),
    };
    let options = if no_overlay { RenderOptions { scale, ..RenderOptions::field_only() } } else { RenderOptions { scale, ..RenderOptions::default() } };
    let occupancy = archive.emotion.occupancy();
    let image = render_topdown(&archive.emotion.field(), Some(&occupancy), &[], &cells, &[], &options);
    std::fs::write(output, image.to_pgm()).map_err(|e| io_runtime(output, e))?;
    println!("wrote {} ({}x{})", output.display(), image.width, image.height);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::BuildMap { scenario, output, config } => build_map_cmd(&scenario, &output, config.as_deref()),
        Commands::Run { scenario, map, episode, instruction, no_update, persist, print_config, seed, config, trajectory_out, json } => run_cmd(
            scenario.as_deref(),
            map.as_deref(),
            episode,
            instruction,
            no_update,
            persist,
            print_config,
            seed,
            config.as_deref(),
            trajectory_out.as_deref(),
            json,
        ),
        Commands::Suite { suite, output, seed, config, no_ablation } => suite_cmd(&suite, &output, seed, config.as_deref(), no_ablation),
        Commands::Render { map, trajectory, output, scale, no_overlay } => render_cmd(&map, trajectory.as_deref(), &output, scale, no_overlay),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("e2map: {e}");
            e.exit_code()
        }
    }
}

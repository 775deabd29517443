//! Command-line front end: evolve gaits, replay genomes, probe morphological
//! communication, calibrate the physics, and plot fitness curves.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use evoxel_core::error::Error as CoreError;
use evoxel_core::evolution::{
    evaluate, probe_morphological_communication, run_parallel, FallPenaltyMode, SimConfig,
};
use evoxel_core::io;
use evoxel_core::morphology::{MorphologyModel, RobotGrid};
use evoxel_core::snn::{Genome, OutputMode};
use evoxel_core::softbody::{settling_profile, PhysicsParams};

const EXIT_USAGE: i32 = 1;
const EXIT_INPUT: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

/// Settling band accepted by `calibrate`: 12 +/- 4 physics steps.
const SETTLE_TARGET: u64 = 12;
const SETTLE_SLACK: u64 = 4;

#[derive(Parser)]
#[command(
    name = "evoxel",
    version,
    about = "Soft-robot neuroevolution workbench: voxel physics, spiking controllers, CMA-ES"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve controller genomes for a robot and write per-population run CSVs
    Evolve(EvolveArgs),
    /// Evaluate one genome and write its action/telemetry trace
    Replay(ReplayArgs),
    /// Freeze one actuator and measure trace divergence in the others
    Probe(ProbeArgs),
    /// Measure single-voxel settling against the 12-step target
    Calibrate(CalibrateArgs),
    /// Render fitness-over-generations SVG from run CSVs
    Plot(PlotArgs),
}

#[derive(Args, Serialize)]
struct SimArgs {
    /// Physics steps per evaluation
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Physics steps per control tick
    #[arg(long, default_value_t = 12)]
    sample_interval: u64,
    /// Platform length; also the no-progress fitness value
    #[arg(long, default_value_t = 100.0)]
    platform_length: f64,
    /// Feed raw corner distances instead of rest-pose-normalized ones
    #[arg(long)]
    raw_inputs: bool,
    /// How output-node activity maps to length targets
    #[arg(long, value_enum, default_value_t = OutputModeArg::Binary)]
    output_mode: OutputModeArg,
    /// Scoring treatment of fallen robots
    #[arg(long, value_enum, default_value_t = FallModeArg::Clamp)]
    fall_mode: FallModeArg,
    /// Physics parameters JSON file (shipped defaults when omitted)
    #[arg(long)]
    physics: Option<PathBuf>,
    /// Base RNG seed; population i uses seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum OutputModeArg {
    Binary,
    DutyCycle,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FallModeArg {
    Clamp,
    Disqualify,
}

#[derive(Args, Serialize)]
struct EvolveArgs {
    /// Robot definition JSON
    #[arg(long)]
    robot: PathBuf,
    /// Generations per population
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    generations: u64,
    /// Genomes sampled per generation
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u16).range(2..))]
    population: u16,
    /// Independent populations (seeds seed..seed+n-1)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    populations: u16,
    /// Directory for run CSVs and summary
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Serialize)]
struct ReplayArgs {
    /// Genome CSV row
    #[arg(long)]
    genome: PathBuf,
    /// Robot definition JSON
    #[arg(long)]
    robot: PathBuf,
    /// Directory for trace output
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Also write an action staircase chart (actions.svg)
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Serialize)]
struct ProbeArgs {
    /// Genome CSV row
    #[arg(long)]
    genome: PathBuf,
    /// Robot definition JSON
    #[arg(long)]
    robot: PathBuf,
    /// Actuator index to freeze at the contracted target
    #[arg(long)]
    actuator: usize,
    /// Directory for probe.csv
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    /// Physics parameters JSON file (shipped defaults when omitted)
    #[arg(long)]
    physics: Option<PathBuf>,
    /// Steps per square-wave half period
    #[arg(long, default_value_t = 60)]
    half_period: u64,
    /// Full 1.6/0.6 cycles to drive
    #[arg(long, default_value_t = 3)]
    cycles: u32,
    /// Directory for settle.csv
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    /// Run CSVs produced by evolve
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Directory for fitness.svg
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::SimulationDiverged { .. }
            | CoreError::NumericalDegeneracy(_)
            | CoreError::SigmaOutOfRange(_)
            | CoreError::NonFiniteFitness { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    init_thread_pool();

    let outcome = match cli.command {
        Command::Evolve(args) => cmd_evolve(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}

/// EVOXEL_THREADS caps evaluation parallelism; unset or invalid keeps the
/// rayon default.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("EVOXEL_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn load_robot(path: &Path) -> Result<MorphologyModel, Failure> {
    let text = read_file(path)?;
    Ok(MorphologyModel::new(RobotGrid::parse(&text)?))
}

fn load_physics(path: &Option<PathBuf>) -> Result<PhysicsParams, Failure> {
    match path {
        Some(p) => Ok(PhysicsParams::from_json(&read_file(p)?)?),
        None => Ok(PhysicsParams::default()),
    }
}

fn sim_config(args: &SimArgs) -> Result<SimConfig, Failure> {
    let config = SimConfig {
        total_steps: args.steps,
        sample_interval: args.sample_interval,
        platform_length: args.platform_length,
        normalize_inputs: !args.raw_inputs,
        fall_penalty_mode: match args.fall_mode {
            FallModeArg::Clamp => FallPenaltyMode::Clamp,
            FallModeArg::Disqualify => FallPenaltyMode::Disqualify,
        },
        output_mode: match args.output_mode {
            OutputModeArg::Binary => OutputMode::Binary,
            OutputModeArg::DutyCycle => OutputMode::DutyCycle,
        },
        physics: load_physics(&args.physics)?,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Prints the effective configuration as one JSON line; together with the
/// seed it fully determines the command's outputs.
fn echo_config(command: &str, args: &impl Serialize, config: Option<&SimConfig>) {
    let mut value = serde_json::json!({ "command": command, "args": args });
    if let Some(config) = config {
        value["sim_config"] = serde_json::to_value(config).expect("config serializes");
    }
    println!("config: {value}");
}

fn load_genome(path: &Path, model: &MorphologyModel) -> Result<Genome, Failure> {
    let genome = io::parse_genome_file(&read_file(path)?)?;
    if genome.actuator_count() != model.actuator_count() {
        return Err(Failure::from(CoreError::GenomeLength {
            expected: 9 * model.actuator_count(),
            actual: genome.len(),
        }));
    }
    Ok(genome)
}

#[derive(Serialize)]
struct SummaryBest {
    population_id: usize,
    generation: u64,
    fitness: f64,
    genome: Vec<f64>,
}

fn cmd_evolve(args: EvolveArgs) -> Result<i32, Failure> {
    let model = load_robot(&args.robot)?;
    let config = sim_config(&args.sim)?;
    echo_config("evolve", &args, Some(&config));

    let runs = run_parallel(
        &model,
        &config,
        args.populations as usize,
        args.generations,
        args.population as usize,
    );

    let genome_width = 9 * model.actuator_count();
    for run in &runs {
        let csv = io::write_run_csv(&run.records, genome_width);
        let name = format!("run_{}.csv", run.population_id);
        write_file(&args.output_dir, &name, &csv)?;
        if let Some(failure) = &run.failure {
            eprintln!(
                "population {} stopped after {} generations: {failure}",
                run.population_id,
                run.records.len()
            );
        }
    }

    // Lowest fitness wins; the lowest population id wins ties.
    let best = runs
        .iter()
        .filter_map(|run| run.best_record())
        .fold(None::<&evoxel_core::evolution::RunRecord>, |best, record| {
            match best {
                Some(b) if b.best_fitness <= record.best_fitness => Some(b),
                _ => Some(record),
            }
        });
    let Some(best) = best else {
        return Err(Failure::numerical(
            "all populations failed before producing a generation",
        ));
    };

    let summary = serde_json::json!({
        "command": "evolve",
        "args": &args,
        "sim_config": &config,
        "best": SummaryBest {
            population_id: best.population_id,
            generation: best.generation,
            fitness: best.best_fitness,
            genome: best.best_genome.values().to_vec(),
        },
    });
    write_file(
        &args.output_dir,
        "summary.json",
        &format!("{:#}\n", summary),
    )?;
    write_file(
        &args.output_dir,
        "best_genome.csv",
        &format!("{}\n", best.best_genome.to_csv_row()),
    )?;

    println!(
        "best fitness {} (population {}, generation {})",
        best.best_fitness, best.population_id, best.generation
    );
    Ok(0)
}

fn cmd_replay(args: ReplayArgs) -> Result<i32, Failure> {
    let model = load_robot(&args.robot)?;
    let config = sim_config(&args.sim)?;
    echo_config("replay", &args, Some(&config));
    let genome = load_genome(&args.genome, &model)?;

    let report = evaluate(&genome, &model, &config)?;
    write_file(&args.output_dir, "trace.csv", &io::write_trace_csv(&report))?;
    if args.svg {
        write_file(&args.output_dir, "actions.svg", &plot::actions_svg(&report))?;
    }
    println!("fitness {}", report.fitness);
    println!(
        "displacement {} (mean x {} -> {}), fell={}, diverged={}",
        report.final_mean_x - report.initial_mean_x,
        report.initial_mean_x,
        report.final_mean_x,
        report.fell,
        report.diverged
    );
    Ok(0)
}

fn cmd_probe(args: ProbeArgs) -> Result<i32, Failure> {
    let model = load_robot(&args.robot)?;
    let config = sim_config(&args.sim)?;
    echo_config("probe", &args, Some(&config));
    let genome = load_genome(&args.genome, &model)?;

    let report = probe_morphological_communication(&genome, &model, &config, args.actuator)?;
    write_file(&args.output_dir, "probe.csv", &io::write_probe_csv(&report))?;

    println!("baseline fitness {}", report.baseline.fitness);
    println!("frozen fitness   {}", report.frozen.fitness);
    println!("actuator  divergence  first_tick  note");
    for d in &report.per_actuator {
        println!(
            "{:>8}  {:>10.4}  {:>10}  {}",
            d.actuator,
            d.divergence,
            d.first_divergence_tick
                .map(|t| t.to_string())
                .unwrap_or_else(|| "-".to_string()),
            if d.overridden { "overridden" } else { "" }
        );
    }
    Ok(0)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<i32, Failure> {
    let params = load_physics(&args.physics)?;
    echo_config("calibrate", &args, None);
    println!(
        "physics: {}",
        serde_json::to_string(&params).expect("params serialize")
    );

    let report = settling_profile(&params, args.half_period, args.cycles)?;
    write_file(
        &args.output_dir,
        "settle.csv",
        &io::write_settle_csv(&report),
    )?;

    println!("transition settle steps: {:?}", report.transition_steps);
    println!("worst settling: {} steps", report.worst);
    let low = SETTLE_TARGET - SETTLE_SLACK;
    let high = SETTLE_TARGET + SETTLE_SLACK;
    if report.worst < low || report.worst > high {
        eprintln!(
            "settling {} outside target {SETTLE_TARGET} +/- {SETTLE_SLACK}",
            report.worst
        );
        return Ok(EXIT_NUMERICAL);
    }
    println!("within target {SETTLE_TARGET} +/- {SETTLE_SLACK}");
    Ok(0)
}

fn cmd_plot(args: PlotArgs) -> Result<i32, Failure> {
    echo_config("plot", &args, None);
    let mut runs = Vec::new();
    for path in &args.runs {
        let rows = io::parse_run_csv(&read_file(path)?)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        runs.push((label, rows));
    }
    let svg = plot::fitness_svg(&runs);
    let path = write_file(&args.output_dir, "fitness.svg", &svg)?;
    println!("wrote {}", path.display());
    Ok(0)
}

//! Closed-loop evaluation and the generation loop.
//!
//! One evaluation builds a fresh world and controller, then alternates physics
//! steps with control ticks: every `sample_interval` steps the controller
//! receives corner-distance telemetry and commands new length targets.
//! Fitness is the platform length minus the robot's mean-x displacement, so 0
//! is a full traversal and 100 is no progress. The generation loop wires a
//! CMA-ES instance to parallel evaluations; independent populations run with
//! offset seeds and never exchange genomes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::morphology::MorphologyModel;
use crate::optimizer::{Candidate, Cmaes};
use crate::snn::{Genome, OutputMode, SnnController, PARAMS_PER_NET};
use crate::softbody::{mean_x, ActionArray, PhysicsParams, World};

/// What happens to the score when the robot falls over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallPenaltyMode {
    /// Score floored at the no-progress value; falling can never help.
    Clamp,
    /// Fixed score strictly worse than any non-falling robot.
    Disqualify,
}

/// Everything one evaluation needs besides the genome and the morphology.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub total_steps: u64,
    pub sample_interval: u64,
    pub platform_length: f64,
    pub normalize_inputs: bool,
    pub fall_penalty_mode: FallPenaltyMode,
    pub output_mode: OutputMode,
    pub physics: PhysicsParams,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            total_steps: 1000,
            sample_interval: 12,
            platform_length: 100.0,
            normalize_inputs: true,
            fall_penalty_mode: FallPenaltyMode::Clamp,
            output_mode: OutputMode::Binary,
            physics: PhysicsParams::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_interval < 1 {
            return Err(Error::InvalidConfig("sample_interval must be >= 1".into()));
        }
        if self.total_steps < self.sample_interval {
            return Err(Error::InvalidConfig(
                "total_steps must be >= sample_interval".into(),
            ));
        }
        if self.platform_length <= 0.0 || !self.platform_length.is_finite() {
            return Err(Error::InvalidConfig(
                "platform_length must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Control ticks per episode; 83 with the default 1000 steps sampled every
    /// 12.
    pub fn control_ticks(&self) -> u64 {
        self.total_steps / self.sample_interval
    }
}

/// Outcome of a single evaluation.
#[derive(Debug, Clone)]
pub struct FitnessReport {
    pub fitness: f64,
    pub initial_mean_x: f64,
    pub final_mean_x: f64,
    pub fell: bool,
    pub diverged: bool,
    /// Length targets actually applied to the world, one array per control
    /// tick (post-override when probing).
    pub action_trace: Vec<ActionArray>,
    /// Telemetry handed to the controller, one pair list per control tick.
    pub telemetry_trace: Vec<Vec<(f64, f64)>>,
}

/// The locomotion score. Without a fall or divergence this is
/// `platform_length - (final - initial)`; a diverged simulation scores the
/// no-progress value, a fallen robot is clamped or disqualified per mode.
pub fn compute_fitness(
    initial_mean_x: f64,
    final_mean_x: f64,
    fell: bool,
    diverged: bool,
    mode: FallPenaltyMode,
    platform_length: f64,
) -> f64 {
    if diverged {
        return platform_length;
    }
    let raw = platform_length - (final_mean_x - initial_mean_x);
    if fell {
        match mode {
            FallPenaltyMode::Clamp => raw.max(platform_length),
            FallPenaltyMode::Disqualify => platform_length + 100.0,
        }
    } else {
        raw
    }
}

/// Fall detection against rest-pose reference heights, measured relative to
/// the ground plane: fallen when the center of mass drops below 60% of its
/// rest height, or when the tracked top corner sinks below half the robot's
/// rest height.
#[derive(Debug, Clone)]
pub struct FallDetector {
    ground_height: f64,
    initial_com_height: f64,
    half_height: f64,
    top_mass: usize,
}

const FALL_COM_RATIO: f64 = 0.6;

impl FallDetector {
    pub fn new(model: &MorphologyModel, ground_height: f64) -> Self {
        let rest = model.rest_positions();
        let initial_com_height = rest.iter().map(|p| p.y).sum::<f64>() / rest.len() as f64;
        FallDetector {
            ground_height,
            initial_com_height,
            half_height: model.grid().height() as f64 / 2.0,
            top_mass: model.corner_tl(),
        }
    }

    pub fn is_fallen(&self, positions: &[Vec2]) -> bool {
        let com_height = positions
            .iter()
            .map(|p| p.y - self.ground_height)
            .sum::<f64>()
            / positions.len() as f64;
        if com_height < FALL_COM_RATIO * self.initial_com_height {
            return true;
        }
        positions[self.top_mass].y - self.ground_height < self.half_height
    }
}

/// Convenience wrapper over [`FallDetector`] for a snapshot in a world whose
/// ground plane sits at `ground_height`.
pub fn detect_fall(positions: &[Vec2], model: &MorphologyModel, ground_height: f64) -> bool {
    FallDetector::new(model, ground_height).is_fallen(positions)
}

/// Runs one full episode for `genome` and reports fitness and traces.
///
/// Deterministic: the physics is seed-free, so repeated calls with the same
/// inputs are bit-identical.
pub fn evaluate(
    genome: &Genome,
    model: &MorphologyModel,
    config: &SimConfig,
) -> Result<FitnessReport> {
    evaluate_with_override(genome, model, config, None)
}

/// Like [`evaluate`] but optionally forces one actuator's applied action to a
/// fixed value every control tick. The controller still runs and advances its
/// state; only the value handed to the world changes.
pub fn evaluate_with_override(
    genome: &Genome,
    model: &MorphologyModel,
    config: &SimConfig,
    action_override: Option<(usize, f64)>,
) -> Result<FitnessReport> {
    config.validate()?;
    if let Some((index, _)) = action_override {
        if index >= model.actuator_count() {
            return Err(Error::ActuatorIndex {
                index,
                count: model.actuator_count(),
            });
        }
    }

    let mut controller =
        SnnController::from_genome(genome, model.actuator_count(), config.output_mode)?;
    controller.reset();
    let mut world = World::build(model, &config.physics);
    let detector = FallDetector::new(model, config.physics.ground_height);

    let initial_mean_x = mean_x(&world.positions())?;
    let ticks = config.control_ticks() as usize;
    let mut action_trace = Vec::with_capacity(ticks);
    let mut telemetry_trace = Vec::with_capacity(ticks);
    let mut fell = false;
    let mut diverged = false;

    // The controller fires on the last step of each complete sampling
    // interval, giving exactly total_steps / sample_interval ticks.
    'episode: for t in 0..config.total_steps {
        if (t + 1) % config.sample_interval == 0 {
            let positions = world.positions();
            let telemetry = model.corner_distances(&positions, config.normalize_inputs)?;
            let mut action = controller.step(&telemetry)?;
            if let Some((index, value)) = action_override {
                action.set(index, value)?;
            }
            world.set_action(&action)?;
            if !fell && detector.is_fallen(&positions) {
                fell = true;
            }
            telemetry_trace.push(telemetry);
            action_trace.push(action);
        }
        if world.step().is_err() {
            diverged = true;
            break 'episode;
        }
    }

    let final_mean_x = mean_x(&world.positions())?;
    let fitness = compute_fitness(
        initial_mean_x,
        final_mean_x,
        fell,
        diverged,
        config.fall_penalty_mode,
        config.platform_length,
    );
    Ok(FitnessReport {
        fitness,
        initial_mean_x,
        final_mean_x,
        fell,
        diverged,
        action_trace,
        telemetry_trace,
    })
}

/// Best score and genome of one generation in one population.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub generation: u64,
    pub best_fitness: f64,
    pub best_genome: Genome,
    pub population_id: usize,
    pub wall_time: f64,
}

/// All records a population produced, plus the failure that stopped it early,
/// if any.
#[derive(Debug)]
pub struct EvolutionRun {
    pub population_id: usize,
    pub records: Vec<RunRecord>,
    pub failure: Option<Error>,
}

impl EvolutionRun {
    /// The record holding the population's best fitness; the earliest
    /// generation wins ties.
    pub fn best_record(&self) -> Option<&RunRecord> {
        self.records
            .iter()
            .fold(None::<&RunRecord>, |best, record| match best {
                Some(b) if b.best_fitness <= record.best_fitness => Some(b),
                _ => Some(record),
            })
    }
}

/// Runs one CMA-ES population for `generations` generations. The optimizer
/// starts from the all-zero genome with sigma 1; evaluations within a
/// generation run in parallel and are joined in sample order.
pub fn run_evolution(
    model: &MorphologyModel,
    config: &SimConfig,
    generations: u64,
    population: usize,
) -> EvolutionRun {
    run_population(model, config, generations, population, 0, config.seed)
}

/// Runs `n_populations` fully independent populations with seeds
/// `config.seed + population_id`. No genomes are exchanged.
pub fn run_parallel(
    model: &MorphologyModel,
    config: &SimConfig,
    n_populations: usize,
    generations: u64,
    population: usize,
) -> Vec<EvolutionRun> {
    (0..n_populations)
        .into_par_iter()
        .map(|id| {
            run_population(
                model,
                config,
                generations,
                population,
                id,
                config.seed + id as u64,
            )
        })
        .collect()
}

fn run_population(
    model: &MorphologyModel,
    config: &SimConfig,
    generations: u64,
    population: usize,
    population_id: usize,
    seed: u64,
) -> EvolutionRun {
    let dimension = PARAMS_PER_NET * model.actuator_count();
    let mut records = Vec::new();
    let mut state = match Cmaes::new(vec![0.0; dimension], 1.0, population, seed) {
        Ok(state) => state,
        Err(e) => {
            return EvolutionRun {
                population_id,
                records,
                failure: Some(e),
            }
        }
    };

    for _ in 0..generations {
        let started = Instant::now();
        let genomes = match state.ask() {
            Ok(g) => g,
            Err(e) => {
                return EvolutionRun {
                    population_id,
                    records,
                    failure: Some(e),
                }
            }
        };
        let evaluated: Vec<Result<f64>> = genomes
            .par_iter()
            .map(|values| {
                let genome = Genome::new(values.clone())?;
                Ok(evaluate(&genome, model, config)?.fitness)
            })
            .collect();
        let mut candidates = Vec::with_capacity(genomes.len());
        for (values, outcome) in genomes.into_iter().zip(evaluated) {
            match outcome {
                Ok(fitness) => candidates.push(Candidate {
                    genome: values,
                    fitness,
                }),
                Err(e) => {
                    return EvolutionRun {
                        population_id,
                        records,
                        failure: Some(e),
                    }
                }
            }
        }

        let (best_index, best_fitness) = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.fitness.partial_cmp(&b.fitness).expect("finite"))
            .map(|(i, c)| (i, c.fitness))
            .expect("population is non-empty");
        let best_genome = Genome::new(candidates[best_index].genome.clone())
            .expect("sampled genome has controller dimension");

        if let Err(e) = state.tell(candidates) {
            return EvolutionRun {
                population_id,
                records,
                failure: Some(e),
            };
        }

        records.push(RunRecord {
            generation: state.generation(),
            best_fitness,
            best_genome,
            population_id,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }

    EvolutionRun {
        population_id,
        records,
        failure: None,
    }
}

/// Divergence of one actuator's applied-action trace from the baseline run.
#[derive(Debug, Clone)]
pub struct ActuatorDivergence {
    pub actuator: usize,
    /// True for the frozen actuator itself.
    pub overridden: bool,
    /// Fraction of control ticks where the applied action differs.
    pub divergence: f64,
    pub first_divergence_tick: Option<usize>,
}

/// Result of the morphological-communication probe.
#[derive(Debug)]
pub struct DivergenceReport {
    pub frozen_actuator: usize,
    pub per_actuator: Vec<ActuatorDivergence>,
    pub baseline: FitnessReport,
    pub frozen: FitnessReport,
}

/// Freezes one actuator at the contracted target (0.6) and measures how every
/// actuator's action trace diverges from an identical baseline run. Any
/// divergence in an unfrozen actuator is signal that traveled through the
/// body: the controllers share no other channel.
pub fn probe_morphological_communication(
    genome: &Genome,
    model: &MorphologyModel,
    config: &SimConfig,
    frozen_actuator: usize,
) -> Result<DivergenceReport> {
    if frozen_actuator >= model.actuator_count() {
        return Err(Error::ActuatorIndex {
            index: frozen_actuator,
            count: model.actuator_count(),
        });
    }
    let baseline = evaluate(genome, model, config)?;
    let frozen = evaluate_with_override(
        genome,
        model,
        config,
        Some((frozen_actuator, crate::softbody::MIN_TARGET)),
    )?;

    let ticks = baseline.action_trace.len().min(frozen.action_trace.len());
    let per_actuator = (0..model.actuator_count())
        .map(|a| {
            let mut differing = 0usize;
            let mut first = None;
            for tick in 0..ticks {
                let b = baseline.action_trace[tick].values()[a];
                let f = frozen.action_trace[tick].values()[a];
                if b != f {
                    differing += 1;
                    if first.is_none() {
                        first = Some(tick);
                    }
                }
            }
            ActuatorDivergence {
                actuator: a,
                overridden: a == frozen_actuator,
                divergence: if ticks == 0 {
                    0.0
                } else {
                    differing as f64 / ticks as f64
                },
                first_divergence_tick: first,
            }
        })
        .collect();

    Ok(DivergenceReport {
        frozen_actuator,
        per_actuator,
        baseline,
        frozen,
    })
}

use thiserror::Error;

/// Errors shared across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed robot json: {0}")]
    MalformedJson(String),
    #[error("robot grid rows are not all the same width")]
    NonRectangularGrid,
    #[error("invalid voxel code {0}")]
    InvalidVoxelCode(i64),
    #[error("robot grid has no cells")]
    EmptyGrid,
    #[error("robot has no actuator voxels")]
    NoActuators,
    #[error("robot body is not a single edge-connected component")]
    DisconnectedBody,
    #[error("expected {expected} point-mass positions, got {actual}")]
    PositionCount { expected: usize, actual: usize },
    #[error("expected {expected} action values, got {actual}")]
    ActionLength { expected: usize, actual: usize },
    #[error("expected {expected} inputs, got {actual}")]
    InputLength { expected: usize, actual: usize },
    #[error("genome length {actual} does not match {expected} (9 per actuator)")]
    GenomeLength { expected: usize, actual: usize },
    #[error("malformed genome row: {0}")]
    MalformedGenome(String),
    #[error("expected telemetry for {expected} actuators, got {actual}")]
    TelemetryCount { expected: usize, actual: usize },
    #[error("simulation diverged at step {step}: non-finite state")]
    SimulationDiverged { step: u64 },
    #[error("mean of an empty position set")]
    EmptyPositions,
    #[error("invalid optimizer hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("covariance matrix numerically degenerate: {0}")]
    NumericalDegeneracy(String),
    #[error("step size {0} outside guard range [1e-12, 1e7]")]
    SigmaOutOfRange(f64),
    #[error("expected {expected} candidates, got {actual}")]
    CandidateCount { expected: usize, actual: usize },
    #[error("candidate {index} has non-finite fitness")]
    NonFiniteFitness { index: usize },
    #[error("no generation has completed yet")]
    NoGenerations,
    #[error("actuator index {index} out of range ({count} actuators)")]
    ActuatorIndex { index: usize, count: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("malformed run csv: {0}")]
    MalformedRunCsv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

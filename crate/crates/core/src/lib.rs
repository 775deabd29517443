//! Soft-robot neuroevolution workbench.
//!
//! A 2D voxel robot is a lattice of typed cells (rigid, soft, horizontal or
//! vertical actuator) simulated as point masses connected by springs. Each
//! actuator is driven by its own small spiking neural network whose inputs are
//! distances from the actuator's center of mass to two reference corners of
//! the robot. All network weights and biases live in one flat genome that a
//! CMA-ES optimizer evolves against a locomotion fitness function.
//!
//! Modules:
//! - [`morphology`]: robot grids, point-mass indexing, corner telemetry
//! - [`softbody`]: mass-spring physics with actuation targets and ground contact
//! - [`snn`]: leaky integrate-and-fire nodes, per-actuator networks, genome codec
//! - [`optimizer`]: covariance matrix adaptation evolution strategy
//! - [`evolution`]: fitness evaluation, generation loop, parallel populations,
//!   and the morphological-communication probe

pub mod error;
pub mod evolution;
pub mod geom;
pub mod io;
pub mod morphology;
pub mod optimizer;
pub mod snn;
pub mod softbody;

pub use error::{Error, Result};

//! 2D mass-spring voxel physics.
//!
//! Every occupied voxel contributes four edge springs and two diagonals;
//! shared edges collapse to a single spring. Actuator voxels change the
//! current rest length of their springs toward a commanded target in
//! [0.6, 1.6] times the base length. Integration is semi-implicit Euler
//! (velocities first), with gravity, an analytic ground plane, and simple
//! tangential friction at contact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::morphology::{ActuatorKind, MorphologyModel, VoxelType};

/// Lowest commanded length target (fully contracted).
pub const MIN_TARGET: f64 = 0.6;
/// Highest commanded length target (fully expanded).
pub const MAX_TARGET: f64 = 1.6;

/// Physics constants. The shipped defaults come from the settling calibration:
/// a single actuated voxel driven through a 0.6 <-> 1.6 square wave reaches the
/// +/-5% band of each new target in roughly 12 steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    pub dt: f64,
    pub gravity: f64,
    pub stiffness_rigid: f64,
    pub stiffness_soft: f64,
    pub stiffness_actuator: f64,
    pub damping: f64,
    pub friction_coefficient: f64,
    pub ground_height: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            dt: 0.01,
            gravity: 9.81,
            stiffness_rigid: 2400.0,
            stiffness_soft: 120.0,
            stiffness_actuator: 600.0,
            damping: 12.0,
            friction_coefficient: 0.8,
            ground_height: 0.0,
        }
    }
}

impl PhysicsParams {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedJson(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// One point mass. `inverse_mass` is zero for immobile (fixed) masses.
#[derive(Debug, Clone, Copy)]
pub struct PointMassState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub inverse_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisClass {
    Horizontal,
    Vertical,
    Diagonal,
}

#[derive(Debug, Clone)]
pub struct Spring {
    pub endpoints: (usize, usize),
    pub base_rest_length: f64,
    pub current_rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub axis_class: AxisClass,
    pub owner_actuator: Option<usize>,
}

/// A vector of per-actuator length targets, clamped to [0.6, 1.6].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionArray {
    values: Vec<f64>,
}

impl ActionArray {
    pub fn new(values: Vec<f64>) -> Self {
        ActionArray {
            values: values
                .into_iter()
                .map(|v| v.clamp(MIN_TARGET, MAX_TARGET))
                .collect(),
        }
    }

    pub fn uniform(value: f64, count: usize) -> Self {
        ActionArray::new(vec![value; count])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Overrides one entry (clamped). Used by the communication probe.
    pub fn set(&mut self, index: usize, value: f64) -> Result<()> {
        if index >= self.values.len() {
            return Err(Error::ActuatorIndex {
                index,
                count: self.values.len(),
            });
        }
        self.values[index] = value.clamp(MIN_TARGET, MAX_TARGET);
        Ok(())
    }
}

/// Spring indices grouped by role for one actuator cell.
#[derive(Debug, Clone, Default)]
struct ActuatorSprings {
    kind: Option<ActuatorKind>,
    horizontal: Vec<usize>,
    vertical: Vec<usize>,
    diagonal: Vec<usize>,
}

/// Mutable physics state for one robot on the platform.
#[derive(Debug, Clone)]
pub struct World {
    masses: Vec<PointMassState>,
    springs: Vec<Spring>,
    gravity: f64,
    ground_height: f64,
    friction_coefficient: f64,
    dt: f64,
    time_step: u64,
    actuator_springs: Vec<ActuatorSprings>,
}

impl World {
    /// Builds the rest-pose world: the morphology's unit lattice translated so
    /// the feet sit on the ground plane. Shared edges are deduplicated keeping
    /// the stiffest contributor; corners of fixed voxels become immobile.
    pub fn build(model: &MorphologyModel, params: &PhysicsParams) -> World {
        let grid = model.grid();
        let index = model.masses();
        let mut masses: Vec<PointMassState> = model
            .rest_positions()
            .iter()
            .map(|&p| PointMassState {
                position: Vec2::new(p.x, p.y + params.ground_height),
                velocity: Vec2::ZERO,
                inverse_mass: 1.0,
            })
            .collect();

        let mut springs: Vec<Spring> = Vec::new();
        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut actuator_springs: Vec<ActuatorSprings> = model
            .actuators()
            .iter()
            .map(|a| ActuatorSprings {
                kind: Some(a.kind),
                ..ActuatorSprings::default()
            })
            .collect();
        let mut next_actuator = 0usize;

        for (c, r) in grid.occupied_cells() {
            let voxel = grid.cell(c, r);
            let stiffness = match voxel {
                VoxelType::Soft => params.stiffness_soft,
                VoxelType::HorizontalActuator | VoxelType::VerticalActuator => {
                    params.stiffness_actuator
                }
                _ => params.stiffness_rigid,
            };
            let actuator = if voxel.is_actuator() {
                let idx = next_actuator;
                next_actuator += 1;
                Some(idx)
            } else {
                None
            };

            let tl = index.index_of((c, r)).unwrap();
            let tr = index.index_of((c + 1, r)).unwrap();
            let bl = index.index_of((c, r + 1)).unwrap();
            let br = index.index_of((c + 1, r + 1)).unwrap();

            if voxel == VoxelType::Fixed {
                for &i in &[tl, tr, bl, br] {
                    masses[i].inverse_mass = 0.0;
                }
            }

            // A horizontal actuator drives its horizontal edges, a vertical one
            // its vertical edges; both drive the diagonals.
            let owns_horizontal = voxel == VoxelType::HorizontalActuator;
            let owns_vertical = voxel == VoxelType::VerticalActuator;

            let edges = [
                (tl, tr, AxisClass::Horizontal, owns_horizontal),
                (bl, br, AxisClass::Horizontal, owns_horizontal),
                (tl, bl, AxisClass::Vertical, owns_vertical),
                (tr, br, AxisClass::Vertical, owns_vertical),
            ];
            for (a, b, axis, owned) in edges {
                let key = (a.min(b), a.max(b));
                let owner = if owned { actuator } else { None };
                let spring_idx = match edge_lookup.get(&key) {
                    Some(&existing) => {
                        let s = &mut springs[existing];
                        s.stiffness = s.stiffness.max(stiffness);
                        if owner.is_some() {
                            s.owner_actuator = owner;
                        }
                        existing
                    }
                    None => {
                        springs.push(Spring {
                            endpoints: key,
                            base_rest_length: 1.0,
                            current_rest_length: 1.0,
                            stiffness,
                            damping: params.damping,
                            axis_class: axis,
                            owner_actuator: owner,
                        });
                        edge_lookup.insert(key, springs.len() - 1);
                        springs.len() - 1
                    }
                };
                if let Some(act) = actuator {
                    match axis {
                        AxisClass::Horizontal => actuator_springs[act].horizontal.push(spring_idx),
                        AxisClass::Vertical => actuator_springs[act].vertical.push(spring_idx),
                        AxisClass::Diagonal => unreachable!(),
                    }
                }
            }

            // Diagonals are never shared between cells.
            for (a, b) in [(tl, br), (tr, bl)] {
                springs.push(Spring {
                    endpoints: (a, b),
                    base_rest_length: std::f64::consts::SQRT_2,
                    current_rest_length: std::f64::consts::SQRT_2,
                    stiffness,
                    damping: params.damping,
                    axis_class: AxisClass::Diagonal,
                    owner_actuator: actuator,
                });
                if let Some(act) = actuator {
                    actuator_springs[act].diagonal.push(springs.len() - 1);
                }
            }
        }

        World {
            masses,
            springs,
            gravity: params.gravity,
            ground_height: params.ground_height,
            friction_coefficient: params.friction_coefficient,
            dt: params.dt,
            time_step: 0,
            actuator_springs,
        }
    }

    /// Applies one length target per actuator. Horizontal actuators scale
    /// their horizontal edges, vertical ones their vertical edges; the cell
    /// diagonals follow `base * sqrt((sx^2 + sy^2) / 2)` where `sx`, `sy` are
    /// the cell's axis scale factors.
    pub fn set_action(&mut self, action: &ActionArray) -> Result<()> {
        if action.len() != self.actuator_springs.len() {
            return Err(Error::ActionLength {
                expected: self.actuator_springs.len(),
                actual: action.len(),
            });
        }
        for (group, &raw) in self.actuator_springs.iter().zip(action.values()) {
            let v = raw.clamp(MIN_TARGET, MAX_TARGET);
            let (sx, sy, axis_springs) = match group.kind {
                Some(ActuatorKind::Horizontal) => (v, 1.0, &group.horizontal),
                Some(ActuatorKind::Vertical) => (1.0, v, &group.vertical),
                None => continue,
            };
            for &i in axis_springs {
                let s = &mut self.springs[i];
                s.current_rest_length = v * s.base_rest_length;
            }
            let diag_scale = ((sx * sx + sy * sy) / 2.0).sqrt();
            for &i in &group.diagonal {
                let s = &mut self.springs[i];
                s.current_rest_length = diag_scale * s.base_rest_length;
            }
        }
        Ok(())
    }

    /// Advances one semi-implicit Euler step: accumulate spring and gravity
    /// forces, update velocities, update positions, then resolve ground
    /// contact by projecting penetrating masses up, zeroing downward normal
    /// velocity, and scaling tangential velocity by one minus the friction
    /// coefficient.
    pub fn step(&mut self) -> Result<()> {
        let mut forces = vec![Vec2::ZERO; self.masses.len()];
        for spring in &self.springs {
            let (i, j) = spring.endpoints;
            let delta = self.masses[j].position - self.masses[i].position;
            let len = delta.norm();
            if len <= f64::EPSILON {
                continue;
            }
            let dir = delta / len;
            let stretch = len - spring.current_rest_length;
            let closing = (self.masses[j].velocity - self.masses[i].velocity).dot(dir);
            let magnitude = spring.stiffness * stretch + spring.damping * closing;
            forces[i] += dir * magnitude;
            forces[j] += -(dir * magnitude);
        }

        for (mass, force) in self.masses.iter_mut().zip(&forces) {
            if mass.inverse_mass == 0.0 {
                continue;
            }
            let mut acceleration = *force * mass.inverse_mass;
            acceleration.y -= self.gravity;
            mass.velocity += acceleration * self.dt;
            mass.position += mass.velocity * self.dt;
            if mass.position.y < self.ground_height {
                mass.position.y = self.ground_height;
                if mass.velocity.y < 0.0 {
                    mass.velocity.y = 0.0;
                }
                mass.velocity.x *= 1.0 - self.friction_coefficient;
            }
        }
        self.time_step += 1;

        for mass in &self.masses {
            if !mass.position.is_finite() || !mass.velocity.is_finite() {
                return Err(Error::SimulationDiverged {
                    step: self.time_step,
                });
            }
        }
        Ok(())
    }

    /// Snapshot of all point-mass positions in index order.
    pub fn positions(&self) -> Vec<Vec2> {
        self.masses.iter().map(|m| m.position).collect()
    }

    pub fn masses(&self) -> &[PointMassState] {
        &self.masses
    }

    pub fn springs(&self) -> &[Spring] {
        &self.springs
    }

    pub fn time_step(&self) -> u64 {
        self.time_step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Displaces one mass from its current position (test and calibration use).
    pub fn nudge_mass(&mut self, index: usize, offset: Vec2) {
        self.masses[index].position += offset;
    }

    /// Total kinetic energy (unit mass per mobile point).
    pub fn kinetic_energy(&self) -> f64 {
        self.masses
            .iter()
            .filter(|m| m.inverse_mass > 0.0)
            .map(|m| 0.5 * m.velocity.dot(m.velocity) / m.inverse_mass)
            .sum()
    }

    /// Total elastic energy stored in the springs at their current rest lengths.
    pub fn spring_energy(&self) -> f64 {
        self.springs
            .iter()
            .map(|s| {
                let len = self.masses[s.endpoints.1]
                    .position
                    .distance(self.masses[s.endpoints.0].position);
                let stretch = len - s.current_rest_length;
                0.5 * s.stiffness * stretch * stretch
            })
            .sum()
    }
}

/// Arithmetic mean of the x components.
pub fn mean_x(positions: &[Vec2]) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::EmptyPositions);
    }
    Ok(positions.iter().map(|p| p.x).sum::<f64>() / positions.len() as f64)
}

/// Step-response measurement of a single actuated voxel.
#[derive(Debug, Clone)]
pub struct SettleReport {
    /// `(physics step, corner separation)`, one row per step after warmup.
    pub rows: Vec<(u64, f64)>,
    /// Steps each square-wave transition took to stay inside the +/-5% band.
    pub transition_steps: Vec<u64>,
    /// Worst transition.
    pub worst: u64,
}

/// Drives a lone horizontal-actuator voxel through a 0.6 <-> 1.6 square wave
/// and measures, per transition, how many steps the horizontal corner
/// separation needs to enter and stay within 5% of the step amplitude around
/// its settled value.
pub fn settling_profile(
    params: &PhysicsParams,
    half_period: u64,
    cycles: u32,
) -> Result<SettleReport> {
    let grid =
        crate::morphology::RobotGrid::from_rows("calib", &[vec![3]]).expect("single actuator grid");
    let model = MorphologyModel::new(grid);
    let mut world = World::build(&model, params);

    // Let the voxel find its static pose under gravity before the wave starts.
    world.set_action(&ActionArray::uniform(1.0, 1))?;
    for _ in 0..(4 * half_period) {
        world.step()?;
    }

    let separation = |world: &World| {
        let p = world.positions();
        (p[1].distance(p[0]) + p[3].distance(p[2])) / 2.0
    };

    let mut rows = Vec::new();
    let mut segments: Vec<Vec<f64>> = Vec::new();
    let mut tick = 0u64;
    for cycle in 0..(2 * cycles) {
        let target = if cycle % 2 == 0 {
            MAX_TARGET
        } else {
            MIN_TARGET
        };
        world.set_action(&ActionArray::uniform(target, 1))?;
        let mut segment = Vec::with_capacity(half_period as usize);
        for _ in 0..half_period {
            world.step()?;
            let sep = separation(&world);
            rows.push((tick, sep));
            segment.push(sep);
            tick += 1;
        }
        segments.push(segment);
    }

    let mut transition_steps = Vec::new();
    let mut previous_end = None;
    for segment in &segments {
        let settled = *segment.last().unwrap();
        if let Some(start) = previous_end {
            let amplitude: f64 = settled - start;
            if amplitude.abs() > 1e-9 {
                let band = 0.05 * amplitude.abs();
                let mut entered = segment.len() as u64;
                for (i, &sep) in segment.iter().enumerate().rev() {
                    if (sep - settled).abs() > band {
                        break;
                    }
                    entered = i as u64;
                }
                // Count steps including the one that first lands in the band.
                transition_steps.push(entered + 1);
            }
        }
        previous_end = Some(settled);
    }
    let worst = transition_steps.iter().copied().max().unwrap_or(0);
    Ok(SettleReport {
        rows,
        transition_steps,
        worst,
    })
}

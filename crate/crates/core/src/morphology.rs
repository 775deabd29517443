//! Robot definitions: voxel grids, point-mass indexing, actuator enumeration,
//! and per-actuator corner-distance telemetry.
//!
//! A robot is a rectangular lattice of typed voxels. Every occupied voxel owns
//! four corner point masses shared with its neighbors. Scanning voxels left to
//! right and then top to bottom, and visiting each voxel's corners in the order
//! top-left, top-right, bottom-left, bottom-right, assigns every distinct corner
//! a stable index. Actuator indices follow the same scan order.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// One cell type of the robot lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoxelType {
    Empty,
    Rigid,
    Soft,
    HorizontalActuator,
    VerticalActuator,
    Fixed,
}

impl VoxelType {
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            0 => Ok(VoxelType::Empty),
            1 => Ok(VoxelType::Rigid),
            2 => Ok(VoxelType::Soft),
            3 => Ok(VoxelType::HorizontalActuator),
            4 => Ok(VoxelType::VerticalActuator),
            5 => Ok(VoxelType::Fixed),
            other => Err(Error::InvalidVoxelCode(other)),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            VoxelType::Empty => 0,
            VoxelType::Rigid => 1,
            VoxelType::Soft => 2,
            VoxelType::HorizontalActuator => 3,
            VoxelType::VerticalActuator => 4,
            VoxelType::Fixed => 5,
        }
    }

    pub fn is_actuator(self) -> bool {
        matches!(
            self,
            VoxelType::HorizontalActuator | VoxelType::VerticalActuator
        )
    }

    pub fn occupies_space(self) -> bool {
        self != VoxelType::Empty
    }
}

/// Raw file form of a robot definition: `{"name": ..., "grid": [[code, ...], ...]}`,
/// row-major with the first row on top.
#[derive(Serialize, Deserialize)]
struct RobotFile {
    #[serde(default)]
    name: String,
    grid: Vec<Vec<i64>>,
}

/// A validated rectangular lattice of voxel types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotGrid {
    width: usize,
    height: usize,
    cells: Vec<VoxelType>,
    name: String,
}

impl RobotGrid {
    /// Builds a grid from rows of voxel codes, top row first.
    pub fn from_rows(name: &str, rows: &[Vec<i64>]) -> Result<Self> {
        let height = rows.len();
        if height == 0 || rows[0].is_empty() {
            return Err(Error::EmptyGrid);
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::NonRectangularGrid);
        }
        let mut cells = Vec::with_capacity(width * height);
        for row in rows {
            for &code in row {
                cells.push(VoxelType::from_code(code)?);
            }
        }
        let grid = RobotGrid {
            width,
            height,
            cells,
            name: name.to_string(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Parses a robot definition from JSON text.
    pub fn parse(json_text: &str) -> Result<Self> {
        let file: RobotFile =
            serde_json::from_str(json_text).map_err(|e| Error::MalformedJson(e.to_string()))?;
        Self::from_rows(&file.name, &file.grid)
    }

    /// Serializes back to the JSON file form. Parsing the result yields an
    /// identical grid.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<i64>> = (0..self.height)
            .map(|r| {
                (0..self.width)
                    .map(|c| self.cell(c, r).code() as i64)
                    .collect()
            })
            .collect();
        let file = RobotFile {
            name: self.name.clone(),
            grid: rows,
        };
        serde_json::to_string_pretty(&file).expect("robot grid serializes")
    }

    /// The default two-legged walker: a 7x4 grid with six horizontal actuators
    /// across the torso and one vertical actuator in each leg, giving 8
    /// actuators and 32 point masses.
    pub fn ubot() -> Self {
        RobotGrid::from_rows(
            "ubot",
            &[
                vec![2, 3, 3, 3, 3, 3, 2],
                vec![1, 3, 1, 1, 1, 1, 1],
                vec![4, 0, 0, 0, 0, 0, 4],
                vec![1, 0, 0, 0, 0, 0, 1],
            ],
        )
        .expect("default grid is valid")
    }

    fn validate(&self) -> Result<()> {
        if !self.cells.iter().any(|c| c.is_actuator()) {
            return Err(Error::NoActuators);
        }
        let occupied: Vec<(usize, usize)> = self.occupied_cells().collect();
        // BFS over edge-adjacent occupied cells from the first one.
        let mut seen = vec![false; self.width * self.height];
        let mut queue = VecDeque::new();
        let start = occupied[0];
        seen[start.1 * self.width + start.0] = true;
        queue.push_back(start);
        let mut reached = 0usize;
        while let Some((c, r)) = queue.pop_front() {
            reached += 1;
            let mut neighbors = Vec::with_capacity(4);
            if c > 0 {
                neighbors.push((c - 1, r));
            }
            if c + 1 < self.width {
                neighbors.push((c + 1, r));
            }
            if r > 0 {
                neighbors.push((c, r - 1));
            }
            if r + 1 < self.height {
                neighbors.push((c, r + 1));
            }
            for (nc, nr) in neighbors {
                let idx = nr * self.width + nc;
                if !seen[idx] && self.cells[idx].occupies_space() {
                    seen[idx] = true;
                    queue.push_back((nc, nr));
                }
            }
        }
        if reached != occupied.len() {
            return Err(Error::DisconnectedBody);
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cell(&self, col: usize, row: usize) -> VoxelType {
        self.cells[row * self.width + col]
    }

    /// Occupied cells in scan order: left to right, then top to bottom.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |r| {
            (0..self.width).filter_map(move |c| self.cell(c, r).occupies_space().then_some((c, r)))
        })
    }

    pub fn actuator_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_actuator()).count()
    }
}

/// Lattice corner coordinate `(col, row)`; row 0 is the top node row, so a cell
/// at `(c, r)` has corners `(c, r)`, `(c+1, r)`, `(c, r+1)`, `(c+1, r+1)`.
pub type Node = (usize, usize);

/// Assignment of point-mass indices to lattice corner nodes.
#[derive(Debug, Clone)]
pub struct PointMassIndexMap {
    node_index: HashMap<Node, usize>,
    count: usize,
}

impl PointMassIndexMap {
    /// Scans occupied voxels in grid order and their corners in the order
    /// top-left, top-right, bottom-left, bottom-right, giving the next unused
    /// index to any corner not yet numbered.
    pub fn build(grid: &RobotGrid) -> Self {
        let mut node_index = HashMap::new();
        let mut count = 0usize;
        for (c, r) in grid.occupied_cells() {
            for node in cell_corners(c, r) {
                node_index.entry(node).or_insert_with(|| {
                    let idx = count;
                    count += 1;
                    idx
                });
            }
        }
        PointMassIndexMap { node_index, count }
    }

    pub fn index_of(&self, node: Node) -> Option<usize> {
        self.node_index.get(&node).copied()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// All numbered nodes, sorted by index.
    pub fn nodes_by_index(&self) -> Vec<Node> {
        let mut nodes: Vec<(Node, usize)> = self.node_index.iter().map(|(n, i)| (*n, *i)).collect();
        nodes.sort_by_key(|&(_, i)| i);
        nodes.into_iter().map(|(n, _)| n).collect()
    }
}

/// Corners of cell `(c, r)` in numbering order: TL, TR, BL, BR.
fn cell_corners(c: usize, r: usize) -> [Node; 4] {
    [(c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActuatorKind {
    Horizontal,
    Vertical,
}

/// One actuator voxel with its position in the action array and the indices of
/// its four corner masses (TL, TR, BL, BR).
#[derive(Debug, Clone)]
pub struct ActuatorInfo {
    pub actuator_index: usize,
    pub kind: ActuatorKind,
    pub cell: (usize, usize),
    pub corner_mass_indices: [usize; 4],
}

/// Lists actuators in scan order with their corner mass indices.
pub fn enumerate_actuators(grid: &RobotGrid, masses: &PointMassIndexMap) -> Vec<ActuatorInfo> {
    let mut actuators = Vec::new();
    for (c, r) in grid.occupied_cells() {
        let kind = match grid.cell(c, r) {
            VoxelType::HorizontalActuator => ActuatorKind::Horizontal,
            VoxelType::VerticalActuator => ActuatorKind::Vertical,
            _ => continue,
        };
        let corners = cell_corners(c, r).map(|n| {
            masses
                .index_of(n)
                .expect("occupied cell corners are indexed")
        });
        actuators.push(ActuatorInfo {
            actuator_index: actuators.len(),
            kind,
            cell: (c, r),
            corner_mass_indices: corners,
        });
    }
    actuators
}

/// Immutable description of one robot: grid, mass indexing, actuators, the two
/// tracked corner masses, and rest-pose telemetry baselines. Safe to share
/// across concurrent evaluations.
#[derive(Debug, Clone)]
pub struct MorphologyModel {
    grid: RobotGrid,
    masses: PointMassIndexMap,
    actuators: Vec<ActuatorInfo>,
    corner_tl: usize,
    corner_br: usize,
    initial_distances: Vec<(f64, f64)>,
    rest_positions: Vec<Vec2>,
}

impl MorphologyModel {
    /// Builds the full model from a validated grid. The rest pose embeds each
    /// voxel as a unit square with the robot's feet at height zero.
    pub fn new(grid: RobotGrid) -> Self {
        let masses = PointMassIndexMap::build(&grid);
        let actuators = enumerate_actuators(&grid, &masses);
        let nodes = masses.nodes_by_index();
        let height = grid.height() as f64;
        let rest_positions: Vec<Vec2> = nodes
            .iter()
            .map(|&(c, r)| Vec2::new(c as f64, height - r as f64))
            .collect();

        // Tracked corners are fixed mass indices chosen from the rest pose:
        // the topmost occupied node (leftmost on ties) and the rightmost
        // occupied node (lowest on ties).
        let corner_tl = nodes
            .iter()
            .enumerate()
            .min_by_key(|&(_, &(c, r))| (r, c))
            .map(|(i, _)| i)
            .expect("grid has nodes");
        let corner_br = nodes
            .iter()
            .enumerate()
            .max_by_key(|&(_, &(c, r))| (c, r))
            .map(|(i, _)| i)
            .expect("grid has nodes");

        let initial_distances = actuators
            .iter()
            .map(|a| {
                actuator_corner_pair(
                    a,
                    &rest_positions,
                    rest_positions[corner_tl],
                    rest_positions[corner_br],
                )
            })
            .collect();

        MorphologyModel {
            grid,
            masses,
            actuators,
            corner_tl,
            corner_br,
            initial_distances,
            rest_positions,
        }
    }

    pub fn grid(&self) -> &RobotGrid {
        &self.grid
    }

    pub fn masses(&self) -> &PointMassIndexMap {
        &self.masses
    }

    pub fn actuators(&self) -> &[ActuatorInfo] {
        &self.actuators
    }

    pub fn actuator_count(&self) -> usize {
        self.actuators.len()
    }

    /// Point-mass index of the robot's tracked top-left corner.
    pub fn corner_tl(&self) -> usize {
        self.corner_tl
    }

    /// Point-mass index of the robot's tracked bottom-right corner.
    pub fn corner_br(&self) -> usize {
        self.corner_br
    }

    /// Per-actuator rest-pose distances `(d_tl0, d_br0)`.
    pub fn initial_distances(&self) -> &[(f64, f64)] {
        &self.initial_distances
    }

    /// Rest-pose positions of all point masses, in index order, with the feet
    /// on y = 0.
    pub fn rest_positions(&self) -> &[Vec2] {
        &self.rest_positions
    }

    /// Per-actuator telemetry: distance from the actuator's center of mass
    /// (mean of its four corners) to the tracked top-left and bottom-right
    /// corner masses. With `normalize` each distance is divided by its
    /// rest-pose value, so the rest pose reads exactly (1, 1).
    pub fn corner_distances(&self, positions: &[Vec2], normalize: bool) -> Result<Vec<(f64, f64)>> {
        if positions.len() != self.masses.count() {
            return Err(Error::PositionCount {
                expected: self.masses.count(),
                actual: positions.len(),
            });
        }
        let tl = positions[self.corner_tl];
        let br = positions[self.corner_br];
        Ok(self
            .actuators
            .iter()
            .zip(&self.initial_distances)
            .map(|(a, &(d_tl0, d_br0))| {
                let (d_tl, d_br) = actuator_corner_pair(a, positions, tl, br);
                if normalize {
                    (d_tl / d_tl0, d_br / d_br0)
                } else {
                    (d_tl, d_br)
                }
            })
            .collect())
    }
}

fn actuator_corner_pair(
    actuator: &ActuatorInfo,
    positions: &[Vec2],
    tl: Vec2,
    br: Vec2,
) -> (f64, f64) {
    let com = actuator
        .corner_mass_indices
        .iter()
        .fold(Vec2::ZERO, |acc, &i| acc + positions[i])
        / 4.0;
    (com.distance(tl), com.distance(br))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent node-count oracle: the set of distinct corner coordinates
    /// over all occupied cells.
    pub(crate) fn node_count_oracle(grid: &RobotGrid) -> usize {
        let mut set = std::collections::HashSet::new();
        for (c, r) in grid.occupied_cells() {
            for node in cell_corners(c, r) {
                set.insert(node);
            }
        }
        set.len()
    }

    #[test]
    fn parse_smallest_legal_robot() {
        let grid = RobotGrid::parse(r#"{"name":"one","grid":[[3]]}"#).unwrap();
        assert_eq!(grid.width(), 1);
        assert_eq!(grid.height(), 1);
        assert_eq!(grid.cell(0, 0), VoxelType::HorizontalActuator);
        assert_eq!(grid.name(), "one");
    }

    #[test]
    fn parse_rejects_bad_inputs() {
        assert!(matches!(
            RobotGrid::parse(r#"{"grid":[[7]]}"#),
            Err(Error::InvalidVoxelCode(7))
        ));
        assert!(matches!(
            RobotGrid::parse("not json"),
            Err(Error::MalformedJson(_))
        ));
        assert!(matches!(
            RobotGrid::parse(r#"{"grid":[[3,3],[3]]}"#),
            Err(Error::NonRectangularGrid)
        ));
        assert!(matches!(
            RobotGrid::parse(r#"{"grid":[[1,2]]}"#),
            Err(Error::NoActuators)
        ));
        assert!(matches!(
            RobotGrid::parse(r#"{"grid":[[3,0,3]]}"#),
            Err(Error::DisconnectedBody)
        ));
        assert!(matches!(
            RobotGrid::parse(r#"{"grid":[]}"#),
            Err(Error::EmptyGrid)
        ));
        // A body without actuators is rejected before any model is built.
        assert!(matches!(
            RobotGrid::from_rows("rigid", &[vec![1, 1], vec![1, 1]]),
            Err(Error::NoActuators)
        ));
    }

    #[test]
    fn ubot_grid_counts() {
        let grid = RobotGrid::ubot();
        assert_eq!(grid.width(), 7);
        assert_eq!(grid.height(), 4);
        assert_eq!(grid.occupied_cells().count(), 18);
        assert_eq!(grid.actuator_count(), 8);
    }

    #[test]
    fn json_round_trip() {
        let grid = RobotGrid::ubot();
        let reparsed = RobotGrid::parse(&grid.to_json()).unwrap();
        assert_eq!(grid, reparsed);
    }

    #[test]
    fn single_voxel_corner_indices() {
        let grid = RobotGrid::from_rows("v", &[vec![3]]).unwrap();
        let masses = PointMassIndexMap::build(&grid);
        assert_eq!(masses.count(), 4);
        assert_eq!(masses.index_of((0, 0)), Some(0)); // TL
        assert_eq!(masses.index_of((1, 0)), Some(1)); // TR
        assert_eq!(masses.index_of((0, 1)), Some(2)); // BL
        assert_eq!(masses.index_of((1, 1)), Some(3)); // BR
    }

    #[test]
    fn adjacent_voxels_share_corner_indices() {
        let grid = RobotGrid::from_rows("pair", &[vec![3, 3]]).unwrap();
        let masses = PointMassIndexMap::build(&grid);
        assert_eq!(masses.count(), 6);
        // Right voxel's TL and BL are the left voxel's TR and BR.
        assert_eq!(masses.index_of((1, 0)), Some(1));
        assert_eq!(masses.index_of((1, 1)), Some(3));
        assert_eq!(masses.index_of((2, 0)), Some(4));
        assert_eq!(masses.index_of((2, 1)), Some(5));
    }

    #[test]
    fn ubot_has_32_point_masses() {
        let grid = RobotGrid::ubot();
        let masses = PointMassIndexMap::build(&grid);
        assert_eq!(masses.count(), 32);
        assert_eq!(masses.count(), node_count_oracle(&grid));
    }

    #[test]
    fn ubot_actuator_layout() {
        let model = MorphologyModel::new(RobotGrid::ubot());
        let kinds: Vec<ActuatorKind> = model.actuators().iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ActuatorKind::Horizontal,
                ActuatorKind::Horizontal,
                ActuatorKind::Horizontal,
                ActuatorKind::Horizontal,
                ActuatorKind::Horizontal,
                ActuatorKind::Horizontal,
                ActuatorKind::Vertical,
                ActuatorKind::Vertical,
            ]
        );
        // Index 6 is the left leg's vertical actuator.
        assert_eq!(model.actuators()[6].cell, (0, 2));
        assert_eq!(model.actuators()[7].cell, (6, 2));
    }

    #[test]
    fn actuator_scan_order() {
        let grid = RobotGrid::from_rows("hv", &[vec![3, 4]]).unwrap();
        let masses = PointMassIndexMap::build(&grid);
        let acts = enumerate_actuators(&grid, &masses);
        assert_eq!(acts.len(), 2);
        assert_eq!(acts[0].kind, ActuatorKind::Horizontal);
        assert_eq!(acts[0].cell, (0, 0));
        assert_eq!(acts[1].kind, ActuatorKind::Vertical);
        assert_eq!(acts[1].cell, (1, 0));

        let grid = RobotGrid::from_rows("vh", &[vec![4], vec![3]]).unwrap();
        let masses = PointMassIndexMap::build(&grid);
        let acts = enumerate_actuators(&grid, &masses);
        assert_eq!(acts[0].kind, ActuatorKind::Vertical);
        assert_eq!(acts[0].cell, (0, 0));
        assert_eq!(acts[1].kind, ActuatorKind::Horizontal);
        assert_eq!(acts[1].cell, (0, 1));
    }

    #[test]
    fn actuator_order_strictly_increasing_in_row_col() {
        let model = MorphologyModel::new(RobotGrid::ubot());
        let cells: Vec<(usize, usize)> = model.actuators().iter().map(|a| a.cell).collect();
        for pair in cells.windows(2) {
            let (c0, r0) = pair[0];
            let (c1, r1) = pair[1];
            assert!((r0, c0) < (r1, c1), "scan order violated: {pair:?}");
        }
    }

    #[test]
    fn single_voxel_corner_distances() {
        let model = MorphologyModel::new(RobotGrid::from_rows("v", &[vec![3]]).unwrap());
        assert_eq!(model.corner_tl(), 0);
        assert_eq!(model.corner_br(), 3);
        let d = model
            .corner_distances(model.rest_positions(), false)
            .unwrap();
        assert_eq!(d.len(), 1);
        let expected = (2.0_f64).sqrt() / 2.0;
        assert_relative_eq!(d[0].0, expected, epsilon = 1e-12);
        assert_relative_eq!(d[0].1, expected, epsilon = 1e-12);
    }

    #[test]
    fn normalized_distances_are_unity_at_rest() {
        let model = MorphologyModel::new(RobotGrid::ubot());
        let d = model
            .corner_distances(model.rest_positions(), true)
            .unwrap();
        for &(a, b) in &d {
            assert_relative_eq!(a, 1.0, epsilon = 1e-12);
            assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ubot_leg_actuator_rest_distances() {
        // Actuator 6 sits at cell (0, 2); its center of mass rests at
        // (0.5, 1.5). The tracked corners rest at (0, 4) and (7, 0), so the
        // distances are sqrt(0.25 + 6.25) and sqrt(42.25 + 2.25).
        let model = MorphologyModel::new(RobotGrid::ubot());
        let (d_tl, d_br) = model.initial_distances()[6];
        assert_relative_eq!(d_tl, 6.5_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(d_br, 44.5_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn corner_distance_position_count_checked() {
        let model = MorphologyModel::new(RobotGrid::ubot());
        let short = vec![Vec2::ZERO; 3];
        assert!(matches!(
            model.corner_distances(&short, false),
            Err(Error::PositionCount {
                expected: 32,
                actual: 3
            })
        ));
    }

    #[test]
    fn initial_distances_strictly_positive() {
        let model = MorphologyModel::new(RobotGrid::ubot());
        for &(a, b) in model.initial_distances() {
            assert!(a > 0.0 && b > 0.0);
        }
    }

    #[test]
    fn ubot_rest_pose_mean_x_is_centered() {
        let model = MorphologyModel::new(RobotGrid::ubot());
        let mean =
            model.rest_positions().iter().map(|p| p.x).sum::<f64>() / model.masses().count() as f64;
        assert_relative_eq!(mean, 3.5, epsilon = 1e-12);
    }
}

//! Integer-grid state representation, the action tuple and its flat-index
//! codec, and grid connectivity queries.
//!
//! Cell values follow a fixed code table:
//!
//! | value | meaning                          |
//! |-------|----------------------------------|
//! | -1    | external load marker             |
//! | 0     | unoccupied                       |
//! | 1     | support frame                    |
//! | 2     | free frame (light)               |
//! | 3     | free frame (medium)              |
//! | 4     | inventory slot, light (optional) |
//! | 5     | inventory slot, medium (optional)|

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Cell value marking an external load location.
pub const CELL_LOAD: i32 = -1;
/// Cell value for an unoccupied cell.
pub const CELL_EMPTY: i32 = 0;
/// Cell value for the support frame.
pub const CELL_SUPPORT: i32 = 1;
/// First free-frame code (light).
pub const CODE_LIGHT: u8 = 2;
/// Second free-frame code (medium).
pub const CODE_MEDIUM: u8 = 3;

/// Offset between a frame code and the cell value of its inventory slot
/// (light 2 -> 4, medium 3 -> 5).
const INVENTORY_CODE_OFFSET: i32 = 2;

/// A frame module variety: its grid code, hollow-tube section geometry and
/// the lumped self-load it adds at each of its four corner nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameType {
    /// Grid cell value for this type (>= 2).
    pub code: u8,
    pub name: String,
    /// Outer tube radius in meters.
    pub outer_radius_m: f64,
    /// Wall-thickness ratio alpha in (0, 1); inner radius = (1 - alpha) * R.
    pub thickness_ratio: f64,
    /// Self-load applied per corner node, kN (acts downward).
    pub self_load_per_node_kn: f64,
}

impl FrameType {
    pub fn new(
        code: u8,
        name: &str,
        outer_radius_m: f64,
        thickness_ratio: f64,
        self_load_per_node_kn: f64,
    ) -> Result<Self> {
        if code < CODE_LIGHT {
            return Err(Error::Scenario(format!(
                "frame code must be >= {CODE_LIGHT}, got {code}"
            )));
        }
        if outer_radius_m <= 0.0 {
            return Err(Error::Scenario("outer radius must be positive".into()));
        }
        if !(0.0 < thickness_ratio && thickness_ratio < 1.0) {
            return Err(Error::Scenario(
                "thickness ratio must lie in (0, 1)".into(),
            ));
        }
        if self_load_per_node_kn < 0.0 {
            return Err(Error::Scenario("self-load must be non-negative".into()));
        }
        Ok(Self {
            code,
            name: name.to_string(),
            outer_radius_m,
            thickness_ratio,
            self_load_per_node_kn,
        })
    }

    /// The light frame of the study: R = 0.10 m, alpha = 0.10, 4 kN/node.
    pub fn light() -> Self {
        Self::new(CODE_LIGHT, "light", 0.10, 0.10, 4.0).unwrap()
    }

    /// The medium frame of the study: R = 0.20 m, alpha = 0.10, 6 kN/node.
    pub fn medium() -> Self {
        Self::new(CODE_MEDIUM, "medium", 0.20, 0.10, 6.0).unwrap()
    }
}

/// Ordered registry of the frame types available to a task. Extensible to
/// any number of varieties; the study uses light + medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCatalog {
    types: Vec<FrameType>,
}

impl FrameCatalog {
    pub fn new(mut types: Vec<FrameType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Scenario("frame catalog cannot be empty".into()));
        }
        types.sort_by_key(|t| t.code);
        if types.windows(2).any(|w| w[0].code == w[1].code) {
            return Err(Error::Scenario("duplicate frame codes in catalog".into()));
        }
        Ok(Self { types })
    }

    /// Light + medium, per the study defaults.
    pub fn standard() -> Self {
        Self::new(vec![FrameType::light(), FrameType::medium()]).unwrap()
    }

    pub fn types(&self) -> &[FrameType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// 0-based ordinal of a code within the catalog.
    pub fn ordinal(&self, code: u8) -> Option<usize> {
        self.types.iter().position(|t| t.code == code)
    }

    pub fn by_code(&self, code: u8) -> Option<&FrameType> {
        self.types.iter().find(|t| t.code == code)
    }

    pub fn codes(&self) -> impl Iterator<Item = u8> + '_ {
        self.types.iter().map(|t| t.code)
    }
}

impl Default for FrameCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

/// Grid coordinates as (row, col), row 0 at the top.
pub type Cell = (usize, usize);

/// An agent action: terminate, or place a frame of a given type at a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Terminate,
    Place { code: u8, row: usize, col: usize },
}

/// Flat-index codec over the action tuple, used for policy logits.
///
/// Index 0 is terminate; index `1 + t*H*W + i*W + j` is placement of the
/// t-th catalog type at cell (i, j). Total size `1 + T*H*W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    height: usize,
    width: usize,
    codes: Vec<u8>,
}

impl ActionSpace {
    pub fn new(height: usize, width: usize, catalog: &FrameCatalog) -> Self {
        Self {
            height,
            width,
            codes: catalog.codes().collect(),
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.grid_height, scenario.grid_width, &scenario.catalog)
    }

    pub fn size(&self) -> usize {
        1 + self.codes.len() * self.height * self.width
    }

    pub fn to_index(&self, action: Action) -> Result<usize> {
        match action {
            Action::Terminate => Ok(0),
            Action::Place { code, row, col } => {
                let t = self
                    .codes
                    .iter()
                    .position(|&c| c == code)
                    .ok_or_else(|| Error::Scenario(format!("unknown frame code {code}")))?;
                if row >= self.height || col >= self.width {
                    return Err(Error::Scenario(format!(
                        "cell ({row}, {col}) outside {}x{} design region",
                        self.height, self.width
                    )));
                }
                Ok(1 + t * self.height * self.width + row * self.width + col)
            }
        }
    }

    pub fn from_index(&self, index: usize) -> Result<Action> {
        let size = self.size();
        if index >= size {
            return Err(Error::ActionDecode { index, size });
        }
        if index == 0 {
            return Ok(Action::Terminate);
        }
        let rest = index - 1;
        let per_type = self.height * self.width;
        let t = rest / per_type;
        let cell = rest % per_type;
        Ok(Action::Place {
            code: self.codes[t],
            row: cell / self.width,
            col: cell % self.width,
        })
    }
}

/// The MDP state: design-region occupancy grid (load markers included),
/// remaining inventory per frame type, step counter and episode flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    height: usize,
    width: usize,
    /// Row-major H*W cell values per the code table.
    design: Vec<i32>,
    /// Remaining stock, aligned with the catalog order of the scenario.
    remaining: Vec<u32>,
    pub step_count: u32,
    pub terminated: bool,
    pub truncated: bool,
}

impl GridState {
    /// Initial state for a scenario: support placed, load markers set,
    /// full inventory, no free frames.
    pub fn initial(scenario: &Scenario) -> Self {
        let (h, w) = (scenario.grid_height, scenario.grid_width);
        let mut design = vec![CELL_EMPTY; h * w];
        for target in &scenario.targets {
            let (r, c) = target.cell;
            design[r * w + c] = CELL_LOAD;
        }
        let (sr, sc) = scenario.support_cell;
        design[sr * w + sc] = CELL_SUPPORT;
        Self {
            height: h,
            width: w,
            design,
            remaining: scenario.inventory.iter().map(|&(_, n)| n).collect(),
            step_count: 0,
            terminated: false,
            truncated: false,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cell(&self, row: usize, col: usize) -> i32 {
        self.design[row * self.width + col]
    }

    pub fn cells(&self) -> &[i32] {
        &self.design
    }

    /// Remaining stock for a frame code, given the scenario's catalog order.
    pub fn remaining(&self, scenario: &Scenario, code: u8) -> u32 {
        scenario
            .catalog
            .ordinal(code)
            .map_or(0, |i| self.remaining[i])
    }

    pub fn remaining_counts(&self) -> &[u32] {
        &self.remaining
    }

    pub fn total_remaining(&self) -> u32 {
        self.remaining.iter().sum()
    }

    /// True for support and free-frame cells.
    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.cell(row, col) >= CELL_SUPPORT
    }

    /// Number of free frames placed (support excluded).
    pub fn frames_used(&self) -> u32 {
        self.design
            .iter()
            .filter(|&&v| v >= CODE_LIGHT as i32)
            .count() as u32
    }

    /// Places a frame without feasibility checks; the environment enforces
    /// the mask before calling this. Errors only on structural misuse
    /// (occupied/marker cell, exhausted stock) to catch contract violations.
    pub(crate) fn place(&mut self, scenario: &Scenario, code: u8, row: usize, col: usize) -> Result<()> {
        let idx = row * self.width + col;
        if self.design[idx] != CELL_EMPTY {
            return Err(Error::InfeasibleAction(format!(
                "cell ({row}, {col}) holds value {}",
                self.design[idx]
            )));
        }
        let ord = scenario
            .catalog
            .ordinal(code)
            .ok_or_else(|| Error::InfeasibleAction(format!("unknown frame code {code}")))?;
        if self.remaining[ord] == 0 {
            return Err(Error::InfeasibleAction(format!(
                "no {} frames remaining",
                scenario.catalog.types()[ord].name
            )));
        }
        self.design[idx] = code as i32;
        self.remaining[ord] -= 1;
        Ok(())
    }

    pub fn in_grid(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// 4-neighbors of a cell that lie inside the grid, in (up, left, right,
    /// down) order. The fixed order keeps every consumer deterministic.
    pub fn neighbors4(&self, row: usize, col: usize) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        OFFSETS.iter().filter_map(move |&(dr, dc)| {
            let (r, c) = (row as isize + dr, col as isize + dc);
            self.in_grid(r, c).then(|| (r as usize, c as usize))
        })
    }

    /// Cells 4-connected to the support through occupied cells (support
    /// included), as a row-major boolean grid.
    pub fn support_component(&self, scenario: &Scenario) -> Vec<bool> {
        let mut reach = vec![false; self.design.len()];
        let (sr, sc) = scenario.support_cell;
        if !self.is_occupied(sr, sc) {
            return reach;
        }
        let mut queue = VecDeque::new();
        reach[sr * self.width + sc] = true;
        queue.push_back((sr, sc));
        while let Some((r, c)) = queue.pop_front() {
            for (nr, nc) in self.neighbors4(r, c) {
                let idx = nr * self.width + nc;
                if !reach[idx] && self.is_occupied(nr, nc) {
                    reach[idx] = true;
                    queue.push_back((nr, nc));
                }
            }
        }
        reach
    }

    /// Checks the structural invariants the environment guarantees for
    /// reachable states. Intended for tests and debugging.
    pub fn check_invariants(&self, scenario: &Scenario) -> Result<()> {
        let supports = self.design.iter().filter(|&&v| v == CELL_SUPPORT).count();
        if supports != 1 {
            return Err(Error::Scenario(format!("{supports} support cells")));
        }
        for target in &scenario.targets {
            let (r, c) = target.cell;
            if self.cell(r, c) != CELL_LOAD {
                return Err(Error::Scenario(format!(
                    "load marker at ({r}, {c}) overwritten with {}",
                    self.cell(r, c)
                )));
            }
        }
        for (i, &(code, total)) in scenario.inventory.iter().enumerate() {
            let placed = self
                .design
                .iter()
                .filter(|&&v| v == code as i32)
                .count() as u32;
            if placed + self.remaining[i] != total {
                return Err(Error::Scenario(format!(
                    "inventory mismatch for code {code}: {placed} placed + {} remaining != {total}",
                    self.remaining[i]
                )));
            }
        }
        let reach = self.support_component(scenario);
        for r in 0..self.height {
            for c in 0..self.width {
                if self.is_occupied(r, c) && !reach[r * self.width + c] {
                    return Err(Error::Scenario(format!(
                        "occupied cell ({r}, {c}) disconnected from support"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fraction of targets with an occupied 4-neighbor that is connected to the
/// support through occupied cells. Load markers are never occupied, so
/// adjacency of the connected component is the connection test.
pub fn connected_fraction(state: &GridState, scenario: &Scenario) -> f64 {
    let reach = state.support_component(scenario);
    let connected = scenario
        .targets
        .iter()
        .filter(|t| {
            let (r, c) = t.cell;
            state
                .neighbors4(r, c)
                .any(|(nr, nc)| reach[nr * state.width + nc])
        })
        .count();
    connected as f64 / scenario.targets.len() as f64
}

/// Number of rows needed to encode the full inventory of a scenario,
/// ceil(total / W). Zero when the scenario disables inventory rows.
pub fn inventory_rows(scenario: &Scenario) -> usize {
    if !scenario.include_inventory_rows {
        return 0;
    }
    let total: u32 = scenario.inventory.iter().map(|&(_, n)| n).sum();
    (total as usize).div_ceil(scenario.grid_width)
}

/// Encodes a state into the (H_inv + H) x W integer tensor consumed by the
/// policy: optional inventory rows (remaining stock written row-major as
/// inventory-slot codes, catalog order), then the design grid with its load
/// markers.
pub fn encode_state(state: &GridState, scenario: &Scenario) -> Result<Vec<i32>> {
    let w = scenario.grid_width;
    let inv_rows = inventory_rows(scenario);
    let mut out = Vec::with_capacity((inv_rows + state.height) * w);
    if inv_rows > 0 {
        let capacity = inv_rows * w;
        let remaining_total: u32 = state.remaining_counts().iter().sum();
        if remaining_total as usize > capacity {
            return Err(Error::Encoding(format!(
                "remaining inventory {remaining_total} exceeds {inv_rows} row capacity {capacity}"
            )));
        }
        for (&(code, _), &count) in scenario.inventory.iter().zip(state.remaining_counts()) {
            let slot = code as i32 + INVENTORY_CODE_OFFSET;
            out.extend(std::iter::repeat(slot).take(count as usize));
        }
        out.resize(capacity, CELL_EMPTY);
    }
    out.extend_from_slice(state.cells());
    Ok(out)
}

/// Tensor rows produced by [`encode_state`] for this scenario.
pub fn encoded_rows(scenario: &Scenario) -> usize {
    inventory_rows(scenario) + scenario.grid_height
}

//! Design scenarios: grid dimensions, support, load targets and inventory,
//! plus the JSON file format used by the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, FrameCatalog, CODE_LIGHT, CODE_MEDIUM};

/// A target cell: a position the design must reach, optionally carrying an
/// external load (kN, acting downward). Zero-load targets are reach-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub cell: Cell,
    pub load_kn: f64,
}

impl Target {
    pub fn new(cell: Cell, load_kn: f64) -> Self {
        Self { cell, load_kn }
    }
}

/// A design task: where the support sits, what must be reached and loaded,
/// and what stock of frames is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid_height: usize,
    pub grid_width: usize,
    pub support_cell: Cell,
    pub targets: Vec<Target>,
    /// (frame code, count) in catalog order.
    pub inventory: Vec<(u8, u32)>,
    /// Physical side length of one module, meters.
    pub module_size_m: f64,
    /// Whether the state tensor is prefixed with inventory rows.
    pub include_inventory_rows: bool,
    pub catalog: FrameCatalog,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid_height: usize,
        grid_width: usize,
        support_cell: Cell,
        targets: Vec<Target>,
        inventory: Vec<(u8, u32)>,
        module_size_m: f64,
        include_inventory_rows: bool,
        catalog: FrameCatalog,
    ) -> Result<Self> {
        let scenario = Self {
            grid_height,
            grid_width,
            support_cell,
            targets,
            inventory: Self::normalize_inventory(inventory, &catalog)?,
            module_size_m,
            include_inventory_rows,
            catalog,
        };
        scenario.validate_geometry()?;
        Ok(scenario)
    }

    fn normalize_inventory(
        inventory: Vec<(u8, u32)>,
        catalog: &FrameCatalog,
    ) -> Result<Vec<(u8, u32)>> {
        let mut out: Vec<(u8, u32)> = Vec::with_capacity(catalog.len());
        for t in catalog.types() {
            let count = inventory
                .iter()
                .filter(|&&(code, _)| code == t.code)
                .map(|&(_, n)| n)
                .sum();
            out.push((t.code, count));
        }
        for &(code, _) in &inventory {
            if catalog.ordinal(code).is_none() {
                return Err(Error::Scenario(format!(
                    "inventory lists frame code {code} not present in the catalog"
                )));
            }
        }
        Ok(out)
    }

    fn validate_geometry(&self) -> Result<()> {
        if self.grid_height == 0 || self.grid_width == 0 {
            return Err(Error::Scenario("grid dimensions must be positive".into()));
        }
        if self.module_size_m <= 0.0 {
            return Err(Error::Scenario("module size must be positive".into()));
        }
        let in_grid = |(r, c): Cell| r < self.grid_height && c < self.grid_width;
        if !in_grid(self.support_cell) {
            return Err(Error::Scenario(format!(
                "support cell {:?} outside {}x{} grid",
                self.support_cell, self.grid_height, self.grid_width
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::Scenario("scenario needs at least one target".into()));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !in_grid(t.cell) {
                return Err(Error::Scenario(format!(
                    "target {i} at {:?} outside the grid",
                    t.cell
                )));
            }
            if t.cell == self.support_cell {
                return Err(Error::Scenario(format!(
                    "target {i} coincides with the support cell"
                )));
            }
            if !t.load_kn.is_finite() || t.load_kn < 0.0 {
                return Err(Error::Scenario(format!(
                    "target {i} load must be finite and non-negative"
                )));
            }
        }
        for pair in self.targets.windows(2) {
            if pair[0].cell == pair[1].cell {
                return Err(Error::Scenario("duplicate target cells".into()));
            }
        }
        if self
            .targets
            .iter()
            .enumerate()
            .any(|(i, a)| self.targets[..i].iter().any(|b| b.cell == a.cell))
        {
            return Err(Error::Scenario("duplicate target cells".into()));
        }
        Ok(())
    }

    /// Extra validation applied to scenario *files*: evaluation scenarios
    /// carry at least one external load.
    pub fn validate_for_evaluation(&self) -> Result<()> {
        if !self.targets.iter().any(|t| t.load_kn > 0.0) {
            return Err(Error::Scenario(
                "evaluation scenarios need at least one target with load_kN > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn total_inventory(&self) -> u32 {
        self.inventory.iter().map(|&(_, n)| n).sum()
    }

    pub fn is_load_marker(&self, cell: Cell) -> bool {
        self.targets.iter().any(|t| t.cell == cell)
    }

    /// Horizontal span, in meters, from the support to the farthest loaded
    /// target. Falls back to all targets when none carries a load (phase-1
    /// self-load scenarios), so the deflection limit stays defined.
    pub fn cantilever_length_m(&self) -> f64 {
        let span = |t: &Target| {
            (t.cell.1 as isize - self.support_cell.1 as isize).unsigned_abs()
        };
        let loaded_max = self
            .targets
            .iter()
            .filter(|t| t.load_kn > 0.0)
            .map(span)
            .max();
        let cells = loaded_max.unwrap_or_else(|| {
            self.targets.iter().map(span).max().unwrap_or(0)
        });
        cells as f64 * self.module_size_m
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ScenarioFile = serde_json::from_str(&text)?;
        let scenario = file.into_scenario()?;
        scenario.validate_for_evaluation()?;
        Ok(scenario)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = ScenarioFile::from_scenario(self);
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// On-disk scenario schema. Row 0 is the top of the grid; loads act
/// downward (-y).
#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    grid: GridDims,
    support: [usize; 2],
    targets: Vec<TargetEntry>,
    inventory: InventoryEntry,
    module_size_m: f64,
    #[serde(default = "default_true")]
    include_inventory_rows: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct GridDims {
    height: usize,
    width: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetEntry {
    cell: [usize; 2],
    #[serde(rename = "load_kN")]
    load_kn: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InventoryEntry {
    light: u32,
    medium: u32,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        Scenario::new(
            self.grid.height,
            self.grid.width,
            (self.support[0], self.support[1]),
            self.targets
                .into_iter()
                .map(|t| Target::new((t.cell[0], t.cell[1]), t.load_kn))
                .collect(),
            vec![
                (CODE_LIGHT, self.inventory.light),
                (CODE_MEDIUM, self.inventory.medium),
            ],
            self.module_size_m,
            self.include_inventory_rows,
            FrameCatalog::standard(),
        )
    }

    fn from_scenario(s: &Scenario) -> Self {
        let stock = |code: u8| {
            s.inventory
                .iter()
                .find(|&&(c, _)| c == code)
                .map_or(0, |&(_, n)| n)
        };
        Self {
            grid: GridDims {
                height: s.grid_height,
                width: s.grid_width,
            },
            support: [s.support_cell.0, s.support_cell.1],
            targets: s
                .targets
                .iter()
                .map(|t| TargetEntry {
                    cell: [t.cell.0, t.cell.1],
                    load_kn: t.load_kn,
                })
                .collect(),
            inventory: InventoryEntry {
                light: stock(CODE_LIGHT),
                medium: stock(CODE_MEDIUM),
            },
            module_size_m: s.module_size_m,
            include_inventory_rows: s.include_inventory_rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_target_on_support() {
        let err = Scenario::new(
            4,
            4,
            (1, 1),
            vec![Target::new((1, 1), 10.0)],
            vec![(CODE_LIGHT, 5)],
            1.0,
            true,
            FrameCatalog::standard(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_out_of_grid_target() {
        let err = Scenario::new(
            4,
            4,
            (1, 1),
            vec![Target::new((4, 0), 10.0)],
            vec![(CODE_LIGHT, 5)],
            1.0,
            true,
            FrameCatalog::standard(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn cantilever_length_uses_farthest_loaded_target() {
        let s = Scenario::new(
            6,
            14,
            (5, 6),
            vec![
                Target::new((2, 1), 100.0),
                Target::new((3, 13), 0.0),
            ],
            vec![(CODE_LIGHT, 20), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap();
        // Loaded target is 5 columns away; the reach target at 7 is ignored.
        assert_eq!(s.cantilever_length_m(), 5.0);
    }

    #[test]
    fn cantilever_length_falls_back_to_reach_targets() {
        let s = Scenario::new(
            6,
            14,
            (5, 6),
            vec![Target::new((3, 13), 0.0)],
            vec![(CODE_LIGHT, 20), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap();
        assert_eq!(s.cantilever_length_m(), 7.0);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let s = Scenario::new(
            6,
            14,
            (5, 6),
            vec![
                Target::new((2, 1), 100.0),
                Target::new((3, 12), 150.0),
            ],
            vec![(CODE_LIGHT, 20), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap();
        s.save_json(&path).unwrap();
        let back = Scenario::load_json(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn file_validation_requires_a_loaded_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let s = Scenario::new(
            6,
            14,
            (5, 6),
            vec![Target::new((2, 1), 0.0)],
            vec![(CODE_LIGHT, 20), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap();
        s.save_json(&path).unwrap();
        assert!(Scenario::load_json(&path).is_err());
    }
}

//! Conversion of a grid design into a deduplicated 2D frame model: shared
//! corner nodes, merged chord elements, lumped self-loads, support fixities
//! and external load attachment.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, FrameType, GridState};
use crate::scenario::Scenario;

/// Hollow circular tube section, derived from a frame type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    /// Sectional area, m^2.
    pub area_m2: f64,
    /// Moment of inertia, m^4.
    pub moment_of_inertia_m4: f64,
    pub outer_radius_m: f64,
    pub inner_radius_m: f64,
}

/// A = pi (R^2 - R_inner^2), I = (pi/4)(R^4 - R_inner^4),
/// R_inner = (1 - alpha) R.
pub fn section_properties(frame: &FrameType) -> SectionProperties {
    let r = frame.outer_radius_m;
    let r_inner = (1.0 - frame.thickness_ratio) * r;
    SectionProperties {
        area_m2: std::f64::consts::PI * (r * r - r_inner * r_inner),
        moment_of_inertia_m4: std::f64::consts::FRAC_PI_4
            * (r.powi(4) - r_inner.powi(4)),
        outer_radius_m: r,
        inner_radius_m: r_inner,
    }
}

/// Steel tube material. Defaults to the study values; G is stored for a
/// future shear-deformable element but unused by the Euler-Bernoulli solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus, Pa.
    pub youngs_modulus_pa: f64,
    /// Shear modulus, Pa.
    pub shear_modulus_pa: f64,
    /// Yield strength, Pa.
    pub yield_strength_pa: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus_pa: 200e9,
            shear_modulus_pa: 80e9,
            yield_strength_pa: 350e6,
        }
    }
}

/// Bracing pattern inside each module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BraceKind {
    /// One diagonal, bottom-left to top-right.
    #[default]
    SingleDiagonal,
    /// Both diagonals.
    XBrace,
}

/// Options for grid-to-model conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub brace: BraceKind,
    /// Frame type used for the support module's elements and self-load.
    pub support_frame: FrameType,
    pub material: Material,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            brace: BraceKind::SingleDiagonal,
            support_frame: FrameType::medium(),
            material: Material::default(),
        }
    }
}

/// One frame element between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub node_a: usize,
    pub node_b: usize,
    pub section: SectionProperties,
    pub material: Material,
    /// Grid codes of the frames this element belongs to (two for merged
    /// chords shared between neighboring cells).
    pub owner_codes: Vec<u8>,
}

/// Deduplicated node/element model with supports and nodal loads (kN).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FEModel {
    /// Node coordinates in meters.
    pub nodes: Vec<(f64, f64)>,
    pub elements: Vec<Element>,
    /// Node ids with all three DOF clamped.
    pub fixed_nodes: Vec<usize>,
    /// Node id -> (Fx, Fy) in kN.
    pub nodal_loads: BTreeMap<usize, (f64, f64)>,
}

impl FEModel {
    pub fn add_load(&mut self, node: usize, fx_kn: f64, fy_kn: f64) {
        let entry = self.nodal_loads.entry(node).or_insert((0.0, 0.0));
        entry.0 += fx_kn;
        entry.1 += fy_kn;
    }

    pub fn total_applied_load_kn(&self) -> (f64, f64) {
        self.nodal_loads
            .values()
            .fold((0.0, 0.0), |acc, &(fx, fy)| (acc.0 + fx, acc.1 + fy))
    }

    /// Plain-text listing (one record per line) for debugging and external
    /// solver cross-checks.
    pub fn write_listing<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, &(x, y)) in self.nodes.iter().enumerate() {
            writeln!(out, "node {i} {x} {y}")?;
        }
        for (i, e) in self.elements.iter().enumerate() {
            let codes: Vec<String> = e.owner_codes.iter().map(|c| c.to_string()).collect();
            writeln!(
                out,
                "element {i} {} {} A={} I={} R={} owners={}",
                e.node_a,
                e.node_b,
                e.section.area_m2,
                e.section.moment_of_inertia_m4,
                e.section.outer_radius_m,
                codes.join(",")
            )?;
        }
        for &n in &self.fixed_nodes {
            writeln!(out, "fix {n}")?;
        }
        for (&n, &(fx, fy)) in &self.nodal_loads {
            writeln!(out, "load {n} {fx} {fy}")?;
        }
        Ok(())
    }
}

/// Module corner keys on the integer lattice: (xi, yi) with y measured up
/// from the grid bottom, so cell (r, c) spans xi in {c, c+1} and yi in
/// {H-1-r, H-r}. Deduplication on integers sidesteps float tolerance.
fn corner_keys(cell: Cell, grid_height: usize) -> [(usize, usize); 4] {
    let (r, c) = cell;
    let y0 = grid_height - 1 - r;
    let y1 = grid_height - r;
    // bottom-left, bottom-right, top-left, top-right
    [(c, y0), (c + 1, y0), (c, y1), (c + 1, y1)]
}

struct ModelBuilder<'a> {
    scenario: &'a Scenario,
    config: &'a ModelConfig,
    node_ids: BTreeMap<(usize, usize), usize>,
    model: FEModel,
    /// Unordered node pair -> element slot.
    edge_slots: BTreeMap<(usize, usize), usize>,
}

impl<'a> ModelBuilder<'a> {
    fn new(scenario: &'a Scenario, config: &'a ModelConfig) -> Self {
        Self {
            scenario,
            config,
            node_ids: BTreeMap::new(),
            model: FEModel::default(),
            edge_slots: BTreeMap::new(),
        }
    }

    fn node(&mut self, key: (usize, usize)) -> usize {
        if let Some(&id) = self.node_ids.get(&key) {
            return id;
        }
        let id = self.model.nodes.len();
        let s = self.scenario.module_size_m;
        self.model.nodes.push((key.0 as f64 * s, key.1 as f64 * s));
        self.node_ids.insert(key, id);
        id
    }

    fn add_element(&mut self, a: usize, b: usize, frame: &FrameType, owner_code: u8) {
        let pair = (a.min(b), a.max(b));
        let section = section_properties(frame);
        match self.edge_slots.get(&pair) {
            Some(&slot) => {
                let existing = &mut self.model.elements[slot];
                // Stronger section governs a shared chord.
                if section.outer_radius_m > existing.section.outer_radius_m {
                    existing.section = section;
                }
                if !existing.owner_codes.contains(&owner_code) {
                    existing.owner_codes.push(owner_code);
                }
            }
            None => {
                let slot = self.model.elements.len();
                self.model.elements.push(Element {
                    node_a: pair.0,
                    node_b: pair.1,
                    section,
                    material: self.config.material,
                    owner_codes: vec![owner_code],
                });
                self.edge_slots.insert(pair, slot);
            }
        }
    }

    fn add_cell(&mut self, cell: Cell, frame: &FrameType, owner_code: u8, is_support: bool) {
        let keys = corner_keys(cell, self.scenario.grid_height);
        let [bl, br, tl, tr] = keys.map(|k| self.node(k));
        self.add_element(bl, br, frame, owner_code);
        self.add_element(tl, tr, frame, owner_code);
        self.add_element(bl, tl, frame, owner_code);
        self.add_element(br, tr, frame, owner_code);
        self.add_element(bl, tr, frame, owner_code);
        if self.config.brace == BraceKind::XBrace {
            self.add_element(br, tl, frame, owner_code);
        }
        for id in [bl, br, tl, tr] {
            self.model.add_load(id, 0.0, -frame.self_load_per_node_kn);
            if is_support && !self.model.fixed_nodes.contains(&id) {
                self.model.fixed_nodes.push(id);
            }
        }
    }

    /// Attaches a target's external load to the facing edge of the first
    /// occupied neighbor (up, left, right, down order), split between the
    /// edge's two nodes.
    fn attach_load(&mut self, state: &GridState, target_cell: Cell, load_kn: f64) -> Result<()> {
        let (tr, tc) = target_cell;
        let h = self.scenario.grid_height;
        let neighbor = state
            .neighbors4(tr, tc)
            .find(|&(r, c)| state.is_occupied(r, c))
            .ok_or_else(|| {
                Error::Model(format!(
                    "loaded target at ({tr}, {tc}) has no adjacent occupied cell to attach to"
                ))
            })?;
        let ncorners = corner_keys(neighbor, h);
        let tcorners = corner_keys(target_cell, h);
        // The shared edge's endpoints are the two corner keys the cells
        // have in common.
        let shared: Vec<(usize, usize)> = ncorners
            .iter()
            .filter(|k| tcorners.contains(k))
            .copied()
            .collect();
        debug_assert_eq!(shared.len(), 2);
        for key in shared {
            let id = self.node(key);
            self.model.add_load(id, 0.0, -load_kn / 2.0);
        }
        Ok(())
    }

    fn frame_for(&self, value: i32) -> Result<FrameType> {
        if value == crate::grid::CELL_SUPPORT {
            return Ok(self.config.support_frame.clone());
        }
        self.scenario
            .catalog
            .by_code(value as u8)
            .cloned()
            .ok_or_else(|| Error::Model(format!("cell value {value} has no frame type")))
    }
}

/// Builds the frame model for a (possibly partial) design. Each occupied
/// cell contributes four corner nodes, four chords and bracing; coincident
/// chords merge with the stronger section governing; the support module's
/// corners are clamped; self-loads lump at corners; each loaded target
/// hangs from the facing edge of an adjacent occupied cell.
pub fn build_fe_model(
    state: &GridState,
    scenario: &Scenario,
    config: &ModelConfig,
) -> Result<FEModel> {
    let cells: Vec<Cell> = (0..state.height())
        .flat_map(|r| (0..state.width()).map(move |c| (r, c)))
        .collect();
    build_fe_model_ordered(state, scenario, config, &cells)
}

/// Same as [`build_fe_model`] but visiting cells in the given order; node
/// and element counts are order-invariant, which tests exercise directly.
pub(crate) fn build_fe_model_ordered(
    state: &GridState,
    scenario: &Scenario,
    config: &ModelConfig,
    cell_order: &[Cell],
) -> Result<FEModel> {
    let mut builder = ModelBuilder::new(scenario, config);
    for &(r, c) in cell_order {
        let value = state.cell(r, c);
        if value < crate::grid::CELL_SUPPORT {
            continue;
        }
        let frame = builder.frame_for(value)?;
        builder.add_cell((r, c), &frame, value as u8, value == crate::grid::CELL_SUPPORT);
    }
    if builder.model.nodes.is_empty() {
        return Err(Error::Model("no occupied cells in the design".into()));
    }
    for target in &scenario.targets {
        if target.load_kn > 0.0 {
            builder.attach_load(state, target.cell, target.load_kn)?;
        }
    }
    Ok(builder.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FrameCatalog, GridState, CODE_LIGHT, CODE_MEDIUM};
    use crate::scenario::{Scenario, Target};

    fn scenario(width: usize) -> Scenario {
        Scenario::new(
            3,
            width,
            (2, 0),
            vec![Target::new((0, width - 1), 0.0)],
            vec![(CODE_LIGHT, 10), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap()
    }

    #[test]
    fn light_section_closed_form() {
        let s = section_properties(&FrameType::light());
        // Independent algebraic route: A = pi (R - Ri)(R + Ri).
        let (r, ri) = (0.10, 0.09);
        let a = std::f64::consts::PI * (r - ri) * (r + ri);
        assert!((s.area_m2 - a).abs() / a < 1e-12);
        assert!((s.area_m2 - 5.9690e-3).abs() / 5.9690e-3 < 1e-4);
        assert!((s.moment_of_inertia_m4 - 2.7010e-5).abs() / 2.7010e-5 < 1e-4);
        assert!((s.inner_radius_m - 0.09).abs() < 1e-15);
    }

    #[test]
    fn medium_section_closed_form() {
        let s = section_properties(&FrameType::medium());
        assert!((s.area_m2 - 2.3876e-2).abs() / 2.3876e-2 < 1e-4);
        assert!((s.moment_of_inertia_m4 - 4.3213e-4).abs() / 4.3213e-4 < 1e-4);
        assert!((s.inner_radius_m - 0.18).abs() < 1e-15);
    }

    #[test]
    fn thick_wall_limit_approaches_solid_section() {
        let frame = FrameType::new(2, "solid-ish", 0.1, 1.0 - 1e-9, 1.0).unwrap();
        let s = section_properties(&frame);
        let solid = std::f64::consts::PI * 0.01;
        assert!((s.area_m2 - solid).abs() / solid < 1e-6);
    }

    #[test]
    fn support_only_counts() {
        let sc = scenario(6);
        let state = GridState::initial(&sc);
        let model = build_fe_model(&state, &sc, &ModelConfig::default()).unwrap();
        assert_eq!(model.nodes.len(), 4);
        assert_eq!(model.elements.len(), 5);
        assert_eq!(model.fixed_nodes.len(), 4);
    }

    #[test]
    fn two_adjacent_cells_share_a_chord() {
        let sc = scenario(6);
        let mut state = GridState::initial(&sc);
        state.place(&sc, CODE_LIGHT, 2, 1).unwrap();
        let model = build_fe_model(&state, &sc, &ModelConfig::default()).unwrap();
        assert_eq!(model.nodes.len(), 6);
        assert_eq!(model.elements.len(), 9);
    }

    #[test]
    fn shared_chord_takes_the_stronger_section() {
        let sc = scenario(6);
        for (first, second) in [(CODE_LIGHT, CODE_MEDIUM), (CODE_MEDIUM, CODE_LIGHT)] {
            let mut state = GridState::initial(&sc);
            state.place(&sc, first, 2, 1).unwrap();
            state.place(&sc, second, 2, 2).unwrap();
            let model = build_fe_model(&state, &sc, &ModelConfig::default()).unwrap();
            let shared: Vec<&Element> = model
                .elements
                .iter()
                .filter(|e| {
                    e.owner_codes.contains(&CODE_LIGHT) && e.owner_codes.contains(&CODE_MEDIUM)
                })
                .collect();
            assert_eq!(shared.len(), 1, "exactly one light|medium shared chord");
            assert_eq!(shared[0].section.outer_radius_m, 0.20);
        }
    }

    #[test]
    fn mirror_pair_has_identical_counts() {
        let sc = scenario(6);
        let mut a = GridState::initial(&sc);
        a.place(&sc, CODE_LIGHT, 2, 1).unwrap();
        a.place(&sc, CODE_MEDIUM, 2, 2).unwrap();
        let mut b = GridState::initial(&sc);
        b.place(&sc, CODE_MEDIUM, 2, 1).unwrap();
        b.place(&sc, CODE_LIGHT, 2, 2).unwrap();
        let ma = build_fe_model(&a, &sc, &ModelConfig::default()).unwrap();
        let mb = build_fe_model(&b, &sc, &ModelConfig::default()).unwrap();
        assert_eq!(ma.nodes.len(), mb.nodes.len());
        assert_eq!(ma.elements.len(), mb.elements.len());
        assert_eq!(ma.total_applied_load_kn(), mb.total_applied_load_kn());
    }

    #[test]
    fn counts_invariant_under_traversal_order() {
        let sc = scenario(6);
        let mut state = GridState::initial(&sc);
        state.place(&sc, CODE_LIGHT, 2, 1).unwrap();
        state.place(&sc, CODE_MEDIUM, 1, 1).unwrap();
        state.place(&sc, CODE_LIGHT, 1, 2).unwrap();
        let cfg = ModelConfig::default();
        let forward = build_fe_model(&state, &sc, &cfg).unwrap();
        let mut cells: Vec<Cell> = (0..3).flat_map(|r| (0..6).map(move |c| (r, c))).collect();
        cells.reverse();
        let backward = build_fe_model_ordered(&state, &sc, &cfg, &cells).unwrap();
        assert_eq!(forward.nodes.len(), backward.nodes.len());
        assert_eq!(forward.elements.len(), backward.elements.len());
        assert_eq!(forward.total_applied_load_kn(), backward.total_applied_load_kn());
        let mut na = forward.nodes.clone();
        let mut nb = backward.nodes.clone();
        na.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nb.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(na, nb);
    }

    #[test]
    fn gravity_totals_accumulate_without_loss() {
        let sc = Scenario::new(
            3,
            6,
            (2, 0),
            vec![Target::new((1, 2), 80.0)],
            vec![(CODE_LIGHT, 10), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap();
        let mut state = GridState::initial(&sc);
        state.place(&sc, CODE_LIGHT, 2, 1).unwrap();
        state.place(&sc, CODE_LIGHT, 2, 2).unwrap();
        let cfg = ModelConfig::default();
        let model = build_fe_model(&state, &sc, &cfg).unwrap();
        let (fx, fy) = model.total_applied_load_kn();
        // Support (medium, 4x6) + two light frames (4x4 each) + 80 external.
        let expected = -(4.0 * 6.0 + 2.0 * 4.0 * 4.0 + 80.0);
        assert!(fx.abs() < 1e-12);
        assert!((fy - expected).abs() < 1e-9);
    }

    #[test]
    fn loaded_target_without_neighbor_is_an_error() {
        let sc = Scenario::new(
            3,
            6,
            (2, 0),
            vec![Target::new((0, 5), 80.0)],
            vec![(CODE_LIGHT, 10), (CODE_MEDIUM, 10)],
            1.0,
            true,
            FrameCatalog::standard(),
        )
        .unwrap();
        let state = GridState::initial(&sc);
        assert!(matches!(
            build_fe_model(&state, &sc, &ModelConfig::default()),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn listing_has_one_record_per_entity() {
        let sc = scenario(6);
        let state = GridState::initial(&sc);
        let model = build_fe_model(&state, &sc, &ModelConfig::default()).unwrap();
        let mut buf = Vec::new();
        model.write_listing(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let count = |p: &str| lines.iter().filter(|l| l.starts_with(p)).count();
        assert_eq!(count("node "), model.nodes.len());
        assert_eq!(count("element "), model.elements.len());
        assert_eq!(count("fix "), model.fixed_nodes.len());
        assert_eq!(count("load "), model.nodal_loads.len());
    }
}

//! Linear-static direct-stiffness analysis of a frame model with 2D
//! Euler-Bernoulli elements (3 DOF per node), dense symmetric factorization
//! of the reduced system, and the derived stress / utilization outputs.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::structure::{Element, FEModel};

const DOF_PER_NODE: usize = 3;
const KN_TO_N: f64 = 1e3;
const PA_TO_MPA: f64 = 1e-6;

/// Analysis outputs for one model.
#[derive(Debug, Clone)]
pub struct FEAResult {
    /// Per-node (ux, uy, theta) in meters / radians.
    pub displacements: Vec<(f64, f64, f64)>,
    /// Max over free nodes of sqrt(ux^2 + uy^2), meters.
    pub max_deflection_m: f64,
    /// Per-element axial stress in MPa, tension positive.
    pub axial_stress_mpa: Vec<f64>,
    /// Per-element |stress| / yield.
    pub utilization: Vec<f64>,
    /// Elements whose |stress| strictly exceeds yield.
    pub failed_elements: Vec<usize>,
    /// Fixed node id -> reaction (Fx, Fy, M) in kN / kNm.
    pub reactions: BTreeMap<usize, (f64, f64, f64)>,
}

impl FEAResult {
    pub fn failed_count(&self) -> usize {
        self.failed_elements.len()
    }

    /// Per-node displacement CSV.
    pub fn write_displacements_csv<W: Write>(&self, model: &FEModel, mut out: W) -> Result<()> {
        writeln!(out, "node,x_m,y_m,ux_m,uy_m,theta_rad,fixed")?;
        for (i, (&(x, y), &(ux, uy, th))) in
            model.nodes.iter().zip(&self.displacements).enumerate()
        {
            let fixed = model.fixed_nodes.contains(&i) as u8;
            writeln!(out, "{i},{x},{y},{ux},{uy},{th},{fixed}")?;
        }
        Ok(())
    }

    /// Per-element stress and utilization CSV.
    pub fn write_elements_csv<W: Write>(&self, model: &FEModel, mut out: W) -> Result<()> {
        writeln!(out, "element,node_a,node_b,stress_mpa,utilization,failed")?;
        for (i, e) in model.elements.iter().enumerate() {
            let failed = self.failed_elements.contains(&i) as u8;
            writeln!(
                out,
                "{i},{},{},{},{},{failed}",
                e.node_a, e.node_b, self.axial_stress_mpa[i], self.utilization[i]
            )?;
        }
        Ok(())
    }
}

fn element_geometry(model: &FEModel, element: &Element) -> Result<(f64, f64, f64)> {
    let (xa, ya) = model.nodes[element.node_a];
    let (xb, yb) = model.nodes[element.node_b];
    let (dx, dy) = (xb - xa, yb - ya);
    let length = dx.hypot(dy);
    if length <= 0.0 {
        return Err(Error::Model(format!(
            "zero-length element between nodes {} and {}",
            element.node_a, element.node_b
        )));
    }
    Ok((length, dx / length, dy / length))
}

/// 6x6 element stiffness in global coordinates for a 2D Euler-Bernoulli
/// frame element: axial EA/L plus cubic-Hermite bending terms, rotated by
/// the member direction cosines.
pub fn element_stiffness(model: &FEModel, element: &Element) -> Result<[[f64; 6]; 6]> {
    let (length, c, s) = element_geometry(model, element)?;
    let e = element.material.youngs_modulus_pa;
    let a = element.section.area_m2;
    let i = element.section.moment_of_inertia_m4;
    let ea_l = e * a / length;
    let ei_l = e * i / length;
    let ei_l2 = e * i / (length * length);
    let ei_l3 = e * i / (length * length * length);

    let local: [[f64; 6]; 6] = [
        [ea_l, 0.0, 0.0, -ea_l, 0.0, 0.0],
        [0.0, 12.0 * ei_l3, 6.0 * ei_l2, 0.0, -12.0 * ei_l3, 6.0 * ei_l2],
        [0.0, 6.0 * ei_l2, 4.0 * ei_l, 0.0, -6.0 * ei_l2, 2.0 * ei_l],
        [-ea_l, 0.0, 0.0, ea_l, 0.0, 0.0],
        [0.0, -12.0 * ei_l3, -6.0 * ei_l2, 0.0, 12.0 * ei_l3, -6.0 * ei_l2],
        [0.0, 6.0 * ei_l2, 2.0 * ei_l, 0.0, -6.0 * ei_l2, 4.0 * ei_l],
    ];

    // Global -> local rotation, block diagonal over the two nodes.
    let mut t = [[0.0; 6]; 6];
    for base in [0, 3] {
        t[base][base] = c;
        t[base][base + 1] = s;
        t[base + 1][base] = -s;
        t[base + 1][base + 1] = c;
        t[base + 2][base + 2] = 1.0;
    }

    // K_global = T^T * K_local * T
    let mut kt = [[0.0; 6]; 6];
    for r in 0..6 {
        for col in 0..6 {
            let mut acc = 0.0;
            for k in 0..6 {
                acc += local[r][k] * t[k][col];
            }
            kt[r][col] = acc;
        }
    }
    let mut global = [[0.0; 6]; 6];
    for r in 0..6 {
        for col in 0..6 {
            let mut acc = 0.0;
            for k in 0..6 {
                acc += t[k][r] * kt[k][col];
            }
            global[r][col] = acc;
        }
    }
    Ok(global)
}

fn element_dofs(element: &Element) -> [usize; 6] {
    let a = element.node_a * DOF_PER_NODE;
    let b = element.node_b * DOF_PER_NODE;
    [a, a + 1, a + 2, b, b + 1, b + 2]
}

/// Assembles and solves the reduced system K_ff u_f = f_f by Cholesky
/// factorization, then recovers displacements, reactions, axial stresses,
/// utilizations and the failed-element set.
pub fn solve_static(model: &FEModel) -> Result<FEAResult> {
    if model.fixed_nodes.is_empty() {
        return Err(Error::SingularSystem);
    }
    for (&node, &(fx, fy)) in &model.nodal_loads {
        if node >= model.nodes.len() {
            return Err(Error::AnalysisInput(format!("load on unknown node {node}")));
        }
        if !fx.is_finite() || !fy.is_finite() {
            return Err(Error::AnalysisInput(format!(
                "non-finite load on node {node}"
            )));
        }
    }
    for &node in &model.fixed_nodes {
        if node >= model.nodes.len() {
            return Err(Error::AnalysisInput(format!("fixity on unknown node {node}")));
        }
    }

    let n_dof = model.nodes.len() * DOF_PER_NODE;
    let mut fixed = vec![false; n_dof];
    for &node in &model.fixed_nodes {
        for d in 0..DOF_PER_NODE {
            fixed[node * DOF_PER_NODE + d] = true;
        }
    }
    let free: Vec<usize> = (0..n_dof).filter(|&d| !fixed[d]).collect();
    let free_index: BTreeMap<usize, usize> =
        free.iter().enumerate().map(|(i, &d)| (d, i)).collect();

    let mut k_full = DMatrix::<f64>::zeros(n_dof, n_dof);
    for element in &model.elements {
        let ke = element_stiffness(model, element)?;
        let dofs = element_dofs(element);
        for (r, &dr) in dofs.iter().enumerate() {
            for (c, &dc) in dofs.iter().enumerate() {
                k_full[(dr, dc)] += ke[r][c];
            }
        }
    }

    let mut f_full = DVector::<f64>::zeros(n_dof);
    for (&node, &(fx, fy)) in &model.nodal_loads {
        f_full[node * DOF_PER_NODE] += fx * KN_TO_N;
        f_full[node * DOF_PER_NODE + 1] += fy * KN_TO_N;
    }

    let n_free = free.len();
    let mut u_full = DVector::<f64>::zeros(n_dof);
    if n_free > 0 {
        let mut k_ff = DMatrix::<f64>::zeros(n_free, n_free);
        for (i, &di) in free.iter().enumerate() {
            for (j, &dj) in free.iter().enumerate() {
                k_ff[(i, j)] = k_full[(di, dj)];
            }
        }
        let mut f_f = DVector::<f64>::zeros(n_free);
        for (i, &d) in free.iter().enumerate() {
            f_f[i] = f_full[d];
        }
        let chol = k_ff.cholesky().ok_or(Error::SingularSystem)?;
        let u_f = chol.solve(&f_f);
        if u_f.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        for (i, &d) in free.iter().enumerate() {
            u_full[d] = u_f[i];
        }
    }
    let _ = free_index;

    let displacements: Vec<(f64, f64, f64)> = (0..model.nodes.len())
        .map(|n| {
            (
                u_full[n * DOF_PER_NODE],
                u_full[n * DOF_PER_NODE + 1],
                u_full[n * DOF_PER_NODE + 2],
            )
        })
        .collect();

    let max_deflection_m = (0..model.nodes.len())
        .filter(|n| !model.fixed_nodes.contains(n))
        .map(|n| {
            let (ux, uy, _) = displacements[n];
            ux.hypot(uy)
        })
        .fold(0.0, f64::max);

    // Reactions: rows of K at fixed DOF, minus any load applied there.
    let k_u = &k_full * &u_full;
    let mut reactions = BTreeMap::new();
    for &node in &model.fixed_nodes {
        let base = node * DOF_PER_NODE;
        reactions.insert(
            node,
            (
                (k_u[base] - f_full[base]) / KN_TO_N,
                (k_u[base + 1] - f_full[base + 1]) / KN_TO_N,
                (k_u[base + 2] - f_full[base + 2]) / KN_TO_N,
            ),
        );
    }

    let mut axial_stress_mpa = Vec::with_capacity(model.elements.len());
    let mut utilization = Vec::with_capacity(model.elements.len());
    let mut failed_elements = Vec::new();
    for (idx, element) in model.elements.iter().enumerate() {
        let (length, c, s) = element_geometry(model, element)?;
        let dofs = element_dofs(element);
        // Axial elongation from end displacements projected on the axis.
        let ua = c * u_full[dofs[0]] + s * u_full[dofs[1]];
        let ub = c * u_full[dofs[3]] + s * u_full[dofs[4]];
        let stress_pa = element.material.youngs_modulus_pa * (ub - ua) / length;
        axial_stress_mpa.push(stress_pa * PA_TO_MPA);
        let util = stress_pa.abs() / element.material.yield_strength_pa;
        utilization.push(util);
        if util > 1.0 {
            failed_elements.push(idx);
        }
    }

    Ok(FEAResult {
        displacements,
        max_deflection_m,
        axial_stress_mpa,
        utilization,
        failed_elements,
        reactions,
    })
}

/// Nearest-rank 90th percentile: ascending sort, value at 1-based index
/// ceil(0.9 n).
pub fn utilization_p90(result: &FEAResult) -> Result<f64> {
    percentile_nearest_rank(&result.utilization, 0.9)
}

pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::AnalysisInput("percentile of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// Residual of global equilibrium: |sum(reactions) + sum(loads)| relative
/// to the applied load magnitude. Used by tests on every solved model.
pub fn equilibrium_residual(model: &FEModel, result: &FEAResult) -> f64 {
    let (fx_applied, fy_applied) = model.total_applied_load_kn();
    let (rx, ry) = result
        .reactions
        .values()
        .fold((0.0, 0.0), |acc, &(fx, fy, _)| (acc.0 + fx, acc.1 + fy));
    let scale = (fx_applied.hypot(fy_applied)).max(1.0);
    ((rx + fx_applied).hypot(ry + fy_applied)) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrameType;
    use crate::structure::{section_properties, Material};

    fn bar_model(nodes: Vec<(f64, f64)>, elements: Vec<(usize, usize)>) -> FEModel {
        let section = section_properties(&FrameType::light());
        FEModel {
            nodes,
            elements: elements
                .into_iter()
                .map(|(a, b)| Element {
                    node_a: a,
                    node_b: b,
                    section,
                    material: Material::default(),
                    owner_codes: vec![2],
                })
                .collect(),
            fixed_nodes: vec![0],
            nodal_loads: BTreeMap::new(),
        }
    }

    #[test]
    fn cantilever_tip_deflection_matches_closed_form() {
        let mut model = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        model.add_load(1, 0.0, -1.0); // 1 kN down at the tip
        let result = solve_static(&model).unwrap();
        let section = section_properties(&FrameType::light());
        let expected = 1.0e3 / (3.0 * 200e9 * section.moment_of_inertia_m4);
        let tip = result.displacements[1].1.abs();
        assert!(
            (tip - expected).abs() / expected < 1e-10,
            "tip {tip} vs {expected}"
        );
        assert!((result.max_deflection_m - tip).abs() < 1e-15);
    }

    #[test]
    fn axial_bar_stress_is_p_over_a() {
        let mut model = bar_model(vec![(0.0, 0.0), (2.0, 0.0)], vec![(0, 1)]);
        model.add_load(1, 10.0, 0.0); // 10 kN tension
        let result = solve_static(&model).unwrap();
        let section = section_properties(&FrameType::light());
        let expected_mpa = 10.0e3 / section.area_m2 * 1e-6;
        assert!((result.axial_stress_mpa[0] - expected_mpa).abs() / expected_mpa < 1e-10);
        assert!(result.axial_stress_mpa[0] > 0.0, "tension is positive");
    }

    #[test]
    fn no_fixed_nodes_is_singular() {
        let mut model = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        model.fixed_nodes.clear();
        model.add_load(1, 0.0, -1.0);
        assert!(matches!(solve_static(&model), Err(Error::SingularSystem)));
    }

    #[test]
    fn floating_element_is_singular() {
        let mut model = bar_model(
            vec![(0.0, 0.0), (1.0, 0.0), (5.0, 5.0), (6.0, 5.0)],
            vec![(0, 1), (2, 3)],
        );
        model.add_load(3, 0.0, -1.0);
        assert!(matches!(solve_static(&model), Err(Error::SingularSystem)));
    }

    #[test]
    fn non_finite_load_is_an_input_error() {
        let mut model = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        model.add_load(1, 0.0, f64::NAN);
        assert!(matches!(solve_static(&model), Err(Error::AnalysisInput(_))));
    }

    #[test]
    fn zero_length_element_is_an_error() {
        let model = bar_model(vec![(0.0, 0.0), (0.0, 0.0)], vec![(0, 1)]);
        assert!(element_stiffness(&model, &model.elements[0]).is_err());
    }

    #[test]
    fn stiffness_is_symmetric_with_rigid_body_nullspace() {
        let model = bar_model(vec![(0.3, 0.4), (1.7, 2.2)], vec![(0, 1)]);
        let k = element_stiffness(&model, &model.elements[0]).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                assert!((k[r][c] - k[c][r]).abs() <= 1e-6 * k[r][r].abs().max(k[c][c].abs()).max(1.0));
            }
        }
        // Rigid translations produce zero force.
        for mode in [[1.0, 0.0], [0.0, 1.0]] {
            let u = [mode[0], mode[1], 0.0, mode[0], mode[1], 0.0];
            for r in 0..6 {
                let f: f64 = (0..6).map(|c| k[r][c] * u[c]).sum();
                assert!(f.abs() < 1e-3, "rigid mode leaks force {f}");
            }
        }
    }

    #[test]
    fn rotated_element_matches_permuted_horizontal() {
        // A vertical member's stiffness equals the horizontal one with
        // (u, v) axes swapped and sign conventions adjusted.
        let horizontal = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        let vertical = bar_model(vec![(0.0, 0.0), (0.0, 1.0)], vec![(0, 1)]);
        let kh = element_stiffness(&horizontal, &horizontal.elements[0]).unwrap();
        let kv = element_stiffness(&vertical, &vertical.elements[0]).unwrap();
        // Map horizontal DOF (u,v,th) -> vertical DOF (v,-u,th).
        let perm: [(usize, f64); 6] = [(1, 1.0), (0, -1.0), (2, 1.0), (4, 1.0), (3, -1.0), (5, 1.0)];
        for r in 0..6 {
            for c in 0..6 {
                let (pr, sr) = perm[r];
                let (pc, sc) = perm[c];
                let expected = sr * sc * kh[r][c];
                assert!(
                    (kv[pr][pc] - expected).abs() < 1e-3,
                    "mismatch at ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn mid_node_split_preserves_tip_deflection() {
        let mut whole = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        whole.add_load(1, 0.0, -1.0);
        let mut split = bar_model(
            vec![(0.0, 0.0), (1.0, 0.0), (0.5, 0.0)],
            vec![(0, 2), (2, 1)],
        );
        split.add_load(1, 0.0, -1.0);
        let a = solve_static(&whole).unwrap();
        let b = solve_static(&split).unwrap();
        let (ta, tb) = (a.displacements[1].1, b.displacements[1].1);
        assert!((ta - tb).abs() < 1e-9 * ta.abs().max(1e-30));
    }

    #[test]
    fn superposition_and_scaling_hold() {
        let mut m1 = bar_model(vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], vec![(0, 1), (1, 2)]);
        let mut m2 = m1.clone();
        let mut m12 = m1.clone();
        m1.add_load(1, 0.0, -3.0);
        m2.add_load(2, 1.0, -1.0);
        m12.add_load(1, 0.0, -3.0);
        m12.add_load(2, 1.0, -1.0);
        let r1 = solve_static(&m1).unwrap();
        let r2 = solve_static(&m2).unwrap();
        let r12 = solve_static(&m12).unwrap();
        for n in 0..3 {
            let sum = (
                r1.displacements[n].0 + r2.displacements[n].0,
                r1.displacements[n].1 + r2.displacements[n].1,
            );
            assert!((sum.0 - r12.displacements[n].0).abs() < 1e-10 * sum.0.abs().max(1e-12));
            assert!((sum.1 - r12.displacements[n].1).abs() < 1e-10 * sum.1.abs().max(1e-12));
        }
        // Doubling all loads doubles deflection and stress exactly.
        let mut doubled = m12.clone();
        doubled.nodal_loads.clear();
        doubled.add_load(1, 0.0, -6.0);
        doubled.add_load(2, 2.0, -2.0);
        let rd = solve_static(&doubled).unwrap();
        assert!((rd.max_deflection_m - 2.0 * r12.max_deflection_m).abs() < 1e-12);
        for e in 0..2 {
            assert!(
                (rd.axial_stress_mpa[e] - 2.0 * r12.axial_stress_mpa[e]).abs()
                    < 1e-9 * rd.axial_stress_mpa[e].abs().max(1e-12)
            );
        }
    }

    #[test]
    fn equilibrium_residual_is_tiny() {
        let mut model = bar_model(
            vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 1.0)],
            vec![(0, 1), (1, 2), (2, 3), (0, 2)],
        );
        model.add_load(3, 2.0, -7.0);
        model.add_load(1, 0.0, -4.0);
        let result = solve_static(&model).unwrap();
        assert!(equilibrium_residual(&model, &result) < 1e-8);
    }

    #[test]
    fn fixed_nodes_do_not_displace() {
        let mut model = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        model.add_load(1, 5.0, -5.0);
        let result = solve_static(&model).unwrap();
        assert_eq!(result.displacements[0], (0.0, 0.0, 0.0));
    }

    #[test]
    fn p90_nearest_rank_examples() {
        let deciles: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(percentile_nearest_rank(&deciles, 0.9).unwrap(), 0.9);
        assert_eq!(percentile_nearest_rank(&[0.5], 0.9).unwrap(), 0.5);
        assert_eq!(percentile_nearest_rank(&[0.3, 0.3, 0.3], 0.9).unwrap(), 0.3);
        assert!(percentile_nearest_rank(&[], 0.9).is_err());
    }

    #[test]
    fn p90_is_order_invariant() {
        let a = vec![0.9, 0.1, 0.5, 0.7, 0.3];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(
            percentile_nearest_rank(&a, 0.9).unwrap(),
            percentile_nearest_rank(&b, 0.9).unwrap()
        );
    }

    #[test]
    fn csv_exports_have_expected_shape() {
        let mut model = bar_model(vec![(0.0, 0.0), (1.0, 0.0)], vec![(0, 1)]);
        model.add_load(1, 0.0, -1.0);
        let result = solve_static(&model).unwrap();
        let mut nodes = Vec::new();
        result.write_displacements_csv(&model, &mut nodes).unwrap();
        let nodes = String::from_utf8(nodes).unwrap();
        assert_eq!(nodes.lines().count(), 1 + model.nodes.len());
        let mut elems = Vec::new();
        result.write_elements_csv(&model, &mut elems).unwrap();
        let elems = String::from_utf8(elems).unwrap();
        assert_eq!(elems.lines().count(), 1 + model.elements.len());
    }
}

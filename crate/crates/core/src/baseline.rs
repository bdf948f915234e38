//! Randomized baseline designer: one randomized Manhattan path per target,
//! a stochastic expansion pass, then a random frame-type permutation. The
//! naive comparator the trained policy is measured against.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::env::{replay_actions, Environment, TraceStep};
use crate::error::{Error, Result};
use crate::grid::{Action, Cell, GridState};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Probability of adding each frontier cell during the expansion pass.
    pub p_expand: f64,
    pub max_retries: u32,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            p_expand: 0.3,
            max_retries: 50,
        }
    }
}

/// A monotone lattice path from `from` toward `to`, with the row/col move
/// interleaving drawn uniformly over all monotone interleavings. The final
/// cell (`to` itself) is dropped so the path ends 4-adjacent to it.
pub fn manhattan_path<R: Rng>(from: Cell, to: Cell, rng: &mut R) -> Vec<Cell> {
    let mut path = vec![from];
    let (mut r, mut c) = (from.0 as isize, from.1 as isize);
    let (tr, tc) = (to.0 as isize, to.1 as isize);
    while (r, c) != (tr, tc) {
        let rows_left = (tr - r).unsigned_abs();
        let cols_left = (tc - c).unsigned_abs();
        // Choosing a row move with probability rows/(rows+cols) at every
        // step makes all interleavings equally likely.
        let move_row = if cols_left == 0 {
            true
        } else if rows_left == 0 {
            false
        } else {
            rng.random_range(0..rows_left + cols_left) < rows_left
        };
        if move_row {
            r += (tr - r).signum();
        } else {
            c += (tc - c).signum();
        }
        path.push((r as usize, c as usize));
    }
    path.pop();
    path
}

/// A generated design together with the feasible action sequence that
/// builds it.
#[derive(Debug, Clone)]
pub struct BaselineDesign {
    pub state: GridState,
    pub actions: Vec<Action>,
}

/// Generates one complete baseline design: path union, one expansion pass,
/// type permutation; retries on inventory overflow or marker collisions.
/// The returned action sequence replays through the environment mask.
pub fn generate_baseline<R: Rng>(
    env: &Environment,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineDesign> {
    let scenario = &env.scenario;
    let mut last_reason = String::from("no attempt made");
    for _ in 0..cfg.max_retries.max(1) {
        match attempt(scenario, cfg, rng) {
            Ok(cells) => {
                match finish(env, cells, rng) {
                    Ok(design) => return Ok(design),
                    Err(reason) => last_reason = reason,
                }
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::BaselineExhausted {
        retries: cfg.max_retries,
        reason: last_reason,
    })
}

/// One attempt at choosing the occupied cell set. Returns the free cells
/// in placement order (paths first, then expansion additions).
fn attempt<R: Rng>(
    scenario: &Scenario,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> std::result::Result<Vec<Cell>, String> {
    let support = scenario.support_cell;
    let mut order: Vec<Cell> = Vec::new();
    let mut occupied = vec![false; scenario.grid_height * scenario.grid_width];
    let w = scenario.grid_width;
    occupied[support.0 * w + support.1] = true;

    for target in &scenario.targets {
        let path = manhattan_path(support, target.cell, rng);
        for &cell in &path {
            if scenario.is_load_marker(cell) {
                return Err(format!(
                    "path for target {:?} crosses a load marker at {:?}",
                    target.cell, cell
                ));
            }
            if !occupied[cell.0 * w + cell.1] {
                occupied[cell.0 * w + cell.1] = true;
                order.push(cell);
            }
        }
    }

    // One expansion pass over the frontier of the path union, row-major.
    let snapshot = occupied.clone();
    for r in 0..scenario.grid_height {
        for c in 0..scenario.grid_width {
            if snapshot[r * w + c] || scenario.is_load_marker((r, c)) {
                continue;
            }
            let adjacent = neighbors(scenario, (r, c)).any(|(nr, nc)| snapshot[nr * w + nc]);
            if adjacent && rng.random::<f64>() < cfg.p_expand {
                occupied[r * w + c] = true;
                order.push((r, c));
            }
        }
    }

    let total = scenario.total_inventory() as usize;
    if order.len() > total {
        return Err(format!(
            "{} frames needed but only {total} in inventory",
            order.len()
        ));
    }
    Ok(order)
}

fn neighbors(scenario: &Scenario, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
    const OFFSETS: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
    OFFSETS.iter().filter_map(move |&(dr, dc)| {
        let r = cell.0 as isize + dr;
        let c = cell.1 as isize + dc;
        (r >= 0
            && c >= 0
            && (r as usize) < scenario.grid_height
            && (c as usize) < scenario.grid_width)
            .then(|| (r as usize, c as usize))
    })
}

/// Assigns a frame type to every chosen cell (uniform over types with
/// stock, falling back to whatever remains) and replays the construction
/// through the environment.
fn finish<R: Rng>(
    env: &Environment,
    cells: Vec<Cell>,
    rng: &mut R,
) -> std::result::Result<BaselineDesign, String> {
    let scenario = &env.scenario;
    let mut remaining: Vec<u32> = scenario.inventory.iter().map(|&(_, n)| n).collect();
    let codes: Vec<u8> = scenario.inventory.iter().map(|&(c, _)| c).collect();
    let mut actions = Vec::with_capacity(cells.len() + 1);
    for (r, c) in cells {
        let stocked: Vec<usize> = (0..codes.len()).filter(|&i| remaining[i] > 0).collect();
        if stocked.is_empty() {
            return Err("inventory exhausted during permutation".into());
        }
        let pick = stocked[rng.random_range(0..stocked.len())];
        remaining[pick] -= 1;
        actions.push(Action::Place {
            code: codes[pick],
            row: r,
            col: c,
        });
    }
    actions.push(Action::Terminate);
    let (state, _) = replay_actions(env, &actions, 0).map_err(|e| e.to_string())?;
    if !state.terminated {
        return Err("replay did not reach termination".into());
    }
    Ok(BaselineDesign { state, actions })
}

/// A design plus the trace of its replay (used by the CLI batch mode).
pub struct BaselineBatchItem {
    pub design: BaselineDesign,
    pub trace: Vec<TraceStep>,
    pub terminal_reward: f64,
}

/// Generates `count` designs from per-design seeds derived from `seed`.
/// Independent across designs, so generation parallelizes when the
/// `parallel` feature is on; the seed derivation keeps results identical
/// either way.
pub fn generate_batch(
    env: &Environment,
    cfg: &BaselineConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<BaselineBatchItem>> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..count).map(|_| seeder.random()).collect();
    let build = |(i, design_seed): (usize, u64)| -> Result<BaselineBatchItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(design_seed);
        let design = generate_baseline(env, cfg, &mut rng)?;
        let (_, trace) = replay_actions(env, &design.actions, i)?;
        let terminal_reward = trace.last().map_or(0.0, |s| s.reward);
        Ok(BaselineBatchItem {
            design,
            trace,
            terminal_reward,
        })
    };
    crate::par::map_indexed(seeds, build)
}

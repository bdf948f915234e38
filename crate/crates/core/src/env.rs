//! The design MDP: episode lifecycle, feasibility masking, transitions,
//! interim and terminal rewards, truncation, and episode-trace export.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fea::solve_static;
use crate::grid::{
    connected_fraction, encode_state, Action, ActionSpace, GridState, CELL_EMPTY,
};
use crate::scenario::Scenario;
use crate::structure::{build_fe_model, ModelConfig};

/// Reward shaping constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Interim reward coefficient on the connected fraction.
    pub interim_coefficient: f64,
    /// Allowable deflection as a fraction of the cantilever length.
    pub deflection_ratio: f64,
    /// Cap on the inventory-usage penalty.
    pub inventory_penalty_cap: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            interim_coefficient: 0.0025,
            deflection_ratio: 1.0 / 120.0,
            inventory_penalty_cap: 1.0,
        }
    }
}

/// Result of one transition.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next_state: GridState,
    pub reward: f64,
    /// Agent chose terminate and it was feasible (and analyzable).
    pub terminated: bool,
    /// Episode ended without a complete design (dead end or analysis
    /// singularity).
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Terminal-reward arithmetic, separated from FEA so the formula is exactly
/// testable: N_target - min(used/inventory, cap) - 1{deflection exceeded}
/// - failed_count.
pub fn terminal_reward_from_parts(
    n_targets: usize,
    frames_used: u32,
    total_inventory: u32,
    deflection_exceeded: bool,
    failed_elements: usize,
    cfg: &RewardConfig,
) -> f64 {
    let usage = if total_inventory == 0 {
        0.0
    } else {
        frames_used as f64 / total_inventory as f64
    };
    n_targets as f64
        - usage.min(cfg.inventory_penalty_cap)
        - if deflection_exceeded { 1.0 } else { 0.0 }
        - failed_elements as f64
}

/// The environment: a scenario plus model and reward configuration.
/// Instances are cheap to clone and safe to use from independent workers;
/// all randomness is injected.
#[derive(Debug, Clone)]
pub struct Environment {
    pub scenario: Scenario,
    pub model_config: ModelConfig,
    pub reward_config: RewardConfig,
}

impl Environment {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            model_config: ModelConfig::default(),
            reward_config: RewardConfig::default(),
        }
    }

    pub fn with_configs(
        scenario: Scenario,
        model_config: ModelConfig,
        reward_config: RewardConfig,
    ) -> Self {
        Self {
            scenario,
            model_config,
            reward_config,
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::for_scenario(&self.scenario)
    }

    /// Initial state (support + full inventory) followed by `n_rand`
    /// uniformly random feasible placements; stops early if the frontier
    /// exhausts. Deterministic given the rng.
    pub fn reset<R: Rng>(&self, rng: &mut R, n_rand: u32) -> GridState {
        let mut state = GridState::initial(&self.scenario);
        for _ in 0..n_rand {
            let space = self.action_space();
            let mask = self.feasible_actions(&state);
            let placements: Vec<usize> = mask
                .iter()
                .enumerate()
                .skip(1)
                .filter_map(|(i, &ok)| ok.then_some(i))
                .collect();
            if placements.is_empty() {
                break;
            }
            let pick = placements[rng.random_range(0..placements.len())];
            let action = space.from_index(pick).expect("mask index in range");
            let outcome = self.step(&state, action).expect("masked action feasible");
            let done = outcome.done();
            state = outcome.next_state;
            if done {
                break;
            }
        }
        state
    }

    /// Boolean mask over the flat action space. Placement entries are true
    /// iff the cell is empty (not a load marker), 4-adjacent to the design,
    /// and stock of that type remains; terminate is true iff every target
    /// is connected.
    pub fn feasible_actions(&self, state: &GridState) -> Vec<bool> {
        let space = self.action_space();
        let mut mask = vec![false; space.size()];
        if state.terminated || state.truncated {
            return mask;
        }
        let (h, w) = (state.height(), state.width());
        // Cells adjacent to the occupied set.
        let mut frontier = vec![false; h * w];
        for r in 0..h {
            for c in 0..w {
                if state.is_occupied(r, c) {
                    for (nr, nc) in state.neighbors4(r, c) {
                        frontier[nr * w + nc] = true;
                    }
                }
            }
        }
        for (t, frame) in self.scenario.catalog.types().iter().enumerate() {
            if state.remaining(&self.scenario, frame.code) == 0 {
                continue;
            }
            let base = 1 + t * h * w;
            for r in 0..h {
                for c in 0..w {
                    if state.cell(r, c) == CELL_EMPTY && frontier[r * w + c] {
                        mask[base + r * w + c] = true;
                    }
                }
            }
        }
        mask[0] = connected_fraction(state, &self.scenario) >= 1.0;
        mask
    }

    /// Applies an action. Infeasible actions are a contract violation and
    /// error loudly; the sampler must respect the mask.
    pub fn step(&self, state: &GridState, action: Action) -> Result<StepOutcome> {
        if state.terminated || state.truncated {
            return Err(Error::InfeasibleAction("episode already finished".into()));
        }
        match action {
            Action::Terminate => {
                if connected_fraction(state, &self.scenario) < 1.0 {
                    return Err(Error::InfeasibleAction(
                        "terminate before all targets are connected".into(),
                    ));
                }
                let mut next = state.clone();
                next.step_count += 1;
                match self.terminal_reward(state) {
                    Ok(reward) => {
                        next.terminated = true;
                        Ok(StepOutcome {
                            next_state: next,
                            reward,
                            terminated: true,
                            truncated: false,
                        })
                    }
                    // A singular analysis is the one zero-reward path the
                    // reward scheme defines; the episode truncates.
                    Err(Error::SingularSystem) => {
                        next.truncated = true;
                        Ok(StepOutcome {
                            next_state: next,
                            reward: 0.0,
                            terminated: false,
                            truncated: true,
                        })
                    }
                    Err(e) => Err(e),
                }
            }
            Action::Place { code, row, col } => {
                let feasible = self.placement_feasible(state, code, row, col);
                if !feasible {
                    return Err(Error::InfeasibleAction(format!(
                        "placement of code {code} at ({row}, {col})"
                    )));
                }
                let mut next = state.clone();
                next.place(&self.scenario, code, row, col)?;
                next.step_count += 1;
                let dead_end = !self.feasible_actions(&next).iter().any(|&m| m);
                let reward = if dead_end {
                    0.0
                } else {
                    self.reward_config.interim_coefficient
                        * connected_fraction(&next, &self.scenario)
                };
                next.truncated = dead_end;
                Ok(StepOutcome {
                    next_state: next,
                    reward,
                    terminated: false,
                    truncated: dead_end,
                })
            }
        }
    }

    fn placement_feasible(&self, state: &GridState, code: u8, row: usize, col: usize) -> bool {
        if row >= state.height() || col >= state.width() {
            return false;
        }
        if state.cell(row, col) != CELL_EMPTY {
            return false;
        }
        if state.remaining(&self.scenario, code) == 0 {
            return false;
        }
        state
            .neighbors4(row, col)
            .any(|(r, c)| state.is_occupied(r, c))
    }

    /// Runs FEA on the design and composes the terminal reward. Requires
    /// all targets connected.
    pub fn terminal_reward(&self, state: &GridState) -> Result<f64> {
        let model = build_fe_model(state, &self.scenario, &self.model_config)?;
        let result = solve_static(&model)?;
        let allowable = self.allowable_deflection_m();
        Ok(terminal_reward_from_parts(
            self.scenario.targets.len(),
            state.frames_used(),
            self.scenario.total_inventory(),
            result.max_deflection_m >= allowable,
            result.failed_count(),
            &self.reward_config,
        ))
    }

    pub fn allowable_deflection_m(&self) -> f64 {
        self.reward_config.deflection_ratio * self.scenario.cantilever_length_m()
    }
}

/// One step of an episode trace: the encoded state the action was chosen
/// in, the flat action index, and the reward received.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub episode: usize,
    pub step: u32,
    pub state: Vec<i32>,
    pub action: usize,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Writes episode traces as line-delimited JSON, one step per line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write_step(&mut self, step: &TraceStep) -> Result<()> {
        serde_json::to_writer(&mut self.out, step)?;
        writeln!(self.out)?;
        Ok(())
    }
}

/// Replays an action sequence from the initial state, recording each step.
/// Every action must be mask-feasible; used both for trace export and as a
/// feasibility proof for externally generated designs.
pub fn replay_actions(
    env: &Environment,
    actions: &[Action],
    episode: usize,
) -> Result<(GridState, Vec<TraceStep>)> {
    let space = env.action_space();
    let mut state = GridState::initial(&env.scenario);
    let mut steps = Vec::with_capacity(actions.len());
    for &action in actions {
        let index = space.to_index(action)?;
        let mask = env.feasible_actions(&state);
        if !mask[index] {
            return Err(Error::InfeasibleAction(format!(
                "replayed action {action:?} rejected by the mask at step {}",
                state.step_count
            )));
        }
        let encoded = encode_state(&state, &env.scenario)?;
        let outcome = env.step(&state, action)?;
        steps.push(TraceStep {
            episode,
            step: state.step_count,
            state: encoded,
            action: index,
            reward: outcome.reward,
            terminated: outcome.terminated,
            truncated: outcome.truncated,
        });
        let done = outcome.done();
        state = outcome.next_state;
        if done {
            break;
        }
    }
    Ok((state, steps))
}

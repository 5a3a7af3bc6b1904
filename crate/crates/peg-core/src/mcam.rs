//! Locally consistent discretization of the stochastic pursuit-evasion
//! dynamics into a finite competitive MDP.
//!
//! Each interior joint state gets a holding time `dt(s) = h^2 / Q(s)` and,
//! per joint action, a sparse transition distribution supported on the
//! state itself and its eight single-coordinate neighbours:
//!
//! ```text
//! P(s +- h e_j | s, a) = (sigma^2/2 + h b_j^{+-}) / Q(s),   j = 1..4
//! P(s | s, a)          = 1 - sum of the eight move entries
//! Q(s) = h * max_a sum_j |b_j(s, a)| + 4 sigma^2
//! ```
//!
//! where `b` stacks both agents' drift (speed along heading plus mean wind
//! at the agent's own cell). The scaled one-step mean of the chain equals
//! `b` exactly and the scaled covariance tends to `sigma^2 I` as `h -> 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{
    classify_state, terminal_reward, Agent, AgentSpec, Cell, GridSpec, JointState, TerminalClass,
    WindField,
};

#[derive(Debug, Error)]
pub enum McamError {
    #[error("degenerate model: Q(s) = 0 at state ({0}, {1})/({2}, {3}) (zero speeds, wind and noise)")]
    DegenerateModel(u16, u16, u16, u16),
    #[error("state ({0}, {1})/({2}, {3}) is not an interior state")]
    NotInterior(u16, u16, u16, u16),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

/// A pair of indices into the pursuer's and evader's action sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    pub pursuer: usize,
    pub evader: usize,
}

impl JointAction {
    pub fn new(pursuer: usize, evader: usize) -> Self {
        JointAction { pursuer, evader }
    }
}

/// Everything the discretization needs: board, wind and both agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameModel {
    pub grid: GridSpec,
    pub wind: WindField,
    pub pursuer: AgentSpec,
    pub evader: AgentSpec,
}

impl GameModel {
    pub fn new(
        grid: GridSpec,
        wind: WindField,
        pursuer: AgentSpec,
        evader: AgentSpec,
    ) -> Result<Self, McamError> {
        if wind.mean_x.len() != grid.n_cells() || wind.mean_y.len() != grid.n_cells() {
            return Err(McamError::Grid(crate::grid::GridError::WindSizeMismatch {
                got: wind.mean_x.len().min(wind.mean_y.len()),
                want: grid.n_cells(),
            }));
        }
        Ok(GameModel { grid, wind, pursuer, evader })
    }

    pub fn agent_spec(&self, agent: Agent) -> &AgentSpec {
        match agent {
            Agent::Pursuer => &self.pursuer,
            Agent::Evader => &self.evader,
        }
    }

    pub fn n_joint_actions(&self) -> usize {
        self.pursuer.n_actions() * self.evader.n_actions()
    }

    pub fn joint_state_index(&self, s: JointState) -> usize {
        self.grid.cell_index(s.pursuer) * self.grid.n_cells() + self.grid.cell_index(s.evader)
    }

    pub fn joint_state_at(&self, index: usize) -> JointState {
        let n = self.grid.n_cells();
        JointState {
            pursuer: self.grid.cell_at(index / n),
            evader: self.grid.cell_at(index % n),
        }
    }

    /// Drift of one agent at a cell under one of its headings.
    pub fn agent_drift(&self, agent: Agent, cell: Cell, action: usize) -> (f64, f64) {
        let spec = self.agent_spec(agent);
        let theta = spec.headings[action];
        let (wx, wy) = self.wind.at(&self.grid, cell);
        (spec.speed * theta.cos() + wx, spec.speed * theta.sin() + wy)
    }
}

/// Stacked drift `[b1, b2, b3, b4]`: pursuer x/y then evader x/y, wind
/// sampled at each agent's own cell.
pub fn drift(model: &GameModel, s: JointState, a: JointAction) -> [f64; 4] {
    let (p1, p2) = model.agent_drift(Agent::Pursuer, s.pursuer, a.pursuer);
    let (e1, e2) = model.agent_drift(Agent::Evader, s.evader, a.evader);
    [p1, p2, e1, e2]
}

/// The largest absolute drift sum over one agent's action set at a cell.
fn max_abs_drift_sum(model: &GameModel, agent: Agent, cell: Cell) -> f64 {
    let n = model.agent_spec(agent).n_actions();
    let mut best = f64::NEG_INFINITY;
    for a in 0..n {
        let (bx, by) = model.agent_drift(agent, cell, a);
        let sum = bx.abs() + by.abs();
        if sum > best {
            best = sum;
        }
    }
    best
}

/// Normalizer `Q(s) = h max_a sum_j |b_j| + 4 sigma^2`.
///
/// The maximum over joint actions separates into per-agent maxima because
/// each agent's drift depends only on its own action.
pub fn q_factor(model: &GameModel, s: JointState) -> Result<f64, McamError> {
    let h = model.grid.cell_size();
    let p_max = max_abs_drift_sum(model, Agent::Pursuer, s.pursuer);
    let e_max = max_abs_drift_sum(model, Agent::Evader, s.evader);
    let sigma = model.wind.sigma;
    let q = h * (p_max + e_max) + 4.0 * sigma * sigma;
    if q > 0.0 {
        Ok(q)
    } else {
        Err(McamError::DegenerateModel(
            s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y,
        ))
    }
}

/// Holding time `dt(s) = h^2 / Q(s)`.
pub fn holding_time(model: &GameModel, s: JointState) -> Result<f64, McamError> {
    let h = model.grid.cell_size();
    Ok(h * h / q_factor(model, s)?)
}

/// Slot layout of a kernel row: the state itself, then +-x/+-y of the
/// pursuer, then +-x/+-y of the evader.
pub const N_SLOTS: usize = 9;

/// (dx_pursuer, dy_pursuer, dx_evader, dy_evader) per slot.
pub const SLOT_DELTAS: [(i32, i32, i32, i32); N_SLOTS] = [
    (0, 0, 0, 0),
    (1, 0, 0, 0),
    (-1, 0, 0, 0),
    (0, 1, 0, 0),
    (0, -1, 0, 0),
    (0, 0, 1, 0),
    (0, 0, -1, 0),
    (0, 0, 0, 1),
    (0, 0, 0, -1),
];

fn row_from_drift(q: f64, h: f64, sigma: f64, b: [f64; 4]) -> [f64; N_SLOTS] {
    let half_var = 0.5 * sigma * sigma;
    let mut row = [0.0; N_SLOTS];
    let mut mass = 0.0;
    for j in 0..4 {
        let plus = (half_var + h * b[j].max(0.0)) / q;
        let minus = (half_var + h * (-b[j]).max(0.0)) / q;
        row[1 + 2 * j] = plus;
        row[2 + 2 * j] = minus;
        mass += plus + minus;
    }
    // Q dominates the move mass by construction; guard against rounding.
    let stay = 1.0 - mass;
    debug_assert!(stay >= -1e-12, "self-transition mass {stay} below zero");
    row[0] = stay.max(0.0);
    row
}

fn apply_delta(s: JointState, delta: (i32, i32, i32, i32)) -> JointState {
    JointState {
        pursuer: Cell {
            x: (s.pursuer.x as i32 + delta.0) as u16,
            y: (s.pursuer.y as i32 + delta.1) as u16,
        },
        evader: Cell {
            x: (s.evader.x as i32 + delta.2) as u16,
            y: (s.evader.y as i32 + delta.3) as u16,
        },
    }
}

/// One-step transition distribution at an interior state under a joint
/// action. Entries with zero probability are omitted.
pub fn transition_probs(
    model: &GameModel,
    s: JointState,
    a: JointAction,
) -> Result<Vec<(JointState, f64)>, McamError> {
    let cls = classify_state(&model.grid, s)?;
    if cls.is_terminal() {
        return Err(McamError::NotInterior(
            s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y,
        ));
    }
    let q = q_factor(model, s)?;
    let row = row_from_drift(q, model.grid.cell_size(), model.wind.sigma, drift(model, s, a));
    Ok(SLOT_DELTAS
        .iter()
        .zip(row.iter())
        .filter(|(_, &p)| p > 0.0)
        .map(|(&d, &p)| (apply_delta(s, d), p))
        .collect())
}

const NO_RANK: u32 = u32::MAX;

/// The discretized game: terminal classes for every joint state and, for
/// every interior state, the holding time plus one sparse transition row
/// per joint action. Terminal states are absorbing and store no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    model: GameModel,
    classes: Vec<TerminalClass>,
    interior: Vec<u32>,
    rank_of: Vec<u32>,
    successors: Vec<[u32; N_SLOTS]>,
    holding: Vec<f64>,
    probs: Vec<f64>,
}

impl TransitionKernel {
    pub fn model(&self) -> &GameModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.model.grid
    }

    pub fn n_joint_states(&self) -> usize {
        self.classes.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_joint_actions(&self) -> usize {
        self.model.n_joint_actions()
    }

    pub fn n_actions(&self, agent: Agent) -> usize {
        self.model.agent_spec(agent).n_actions()
    }

    /// Joint action index with the evader index varying fastest.
    pub fn joint_action_index(&self, a: JointAction) -> usize {
        a.pursuer * self.n_actions(Agent::Evader) + a.evader
    }

    pub fn class_of_index(&self, joint_index: usize) -> TerminalClass {
        self.classes[joint_index]
    }

    pub fn classes(&self) -> &[TerminalClass] {
        &self.classes
    }

    pub fn terminal_reward_of(&self, joint_index: usize) -> f64 {
        terminal_reward(self.classes[joint_index])
    }

    pub fn state_index(&self, s: JointState) -> usize {
        self.model.joint_state_index(s)
    }

    pub fn state_at(&self, joint_index: usize) -> JointState {
        self.model.joint_state_at(joint_index)
    }

    /// Interior rank of a joint state index, if interior.
    pub fn rank_of_index(&self, joint_index: usize) -> Option<usize> {
        match self.rank_of[joint_index] {
            NO_RANK => None,
            r => Some(r as usize),
        }
    }

    pub fn rank_of_state(&self, s: JointState) -> Option<usize> {
        self.rank_of_index(self.state_index(s))
    }

    /// Joint state index of an interior rank.
    pub fn index_of_rank(&self, rank: usize) -> usize {
        self.interior[rank] as usize
    }

    pub fn state_of_rank(&self, rank: usize) -> JointState {
        self.state_at(self.index_of_rank(rank))
    }

    pub fn interior_indices(&self) -> &[u32] {
        &self.interior
    }

    pub fn holding_time_of_rank(&self, rank: usize) -> f64 {
        self.holding[rank]
    }

    pub fn successors_of_rank(&self, rank: usize) -> &[u32; N_SLOTS] {
        &self.successors[rank]
    }

    /// The nine slot probabilities for (interior rank, joint action index).
    pub fn row(&self, rank: usize, action_index: usize) -> &[f64] {
        let base = (rank * self.n_joint_actions() + action_index) * N_SLOTS;
        &self.probs[base..base + N_SLOTS]
    }

    /// Sparse view of one transition distribution.
    pub fn distribution(
        &self,
        s: JointState,
        a: JointAction,
    ) -> Result<Vec<(JointState, f64)>, McamError> {
        let rank = self.rank_of_state(s).ok_or(McamError::NotInterior(
            s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y,
        ))?;
        let row = self.row(rank, self.joint_action_index(a));
        let succ = &self.successors[rank];
        Ok((0..N_SLOTS)
            .filter(|&k| row[k] > 0.0)
            .map(|k| (self.state_at(succ[k] as usize), row[k]))
            .collect())
    }

    pub(crate) fn raw_parts(&self) -> (&[TerminalClass], &[u32], &[f64], &[f64]) {
        (&self.classes, &self.interior, &self.holding, &self.probs)
    }

    pub(crate) fn from_raw_parts(
        model: GameModel,
        classes: Vec<TerminalClass>,
        interior: Vec<u32>,
        holding: Vec<f64>,
        probs: Vec<f64>,
    ) -> TransitionKernel {
        let (rank_of, successors) = index_interior(&model, &classes, &interior);
        TransitionKernel {
            model,
            classes,
            interior,
            rank_of,
            successors,
            holding,
            probs,
        }
    }
}

fn index_interior(
    model: &GameModel,
    classes: &[TerminalClass],
    interior: &[u32],
) -> (Vec<u32>, Vec<[u32; N_SLOTS]>) {
    let mut rank_of = vec![NO_RANK; classes.len()];
    for (rank, &joint) in interior.iter().enumerate() {
        rank_of[joint as usize] = rank as u32;
    }
    let successors = interior
        .iter()
        .map(|&joint| {
            let s = model.joint_state_at(joint as usize);
            let mut succ = [0u32; N_SLOTS];
            for (k, &d) in SLOT_DELTAS.iter().enumerate() {
                succ[k] = model.joint_state_index(apply_delta(s, d)) as u32;
            }
            succ
        })
        .collect();
    (rank_of, successors)
}

/// Builds the full kernel: classifies every joint state, then fills one
/// row per interior state and joint action. Output is a pure function of
/// the model.
pub fn build_kernel(model: GameModel) -> Result<TransitionKernel, McamError> {
    let n_cells = model.grid.n_cells();
    let n_joint = n_cells * n_cells;

    let classes: Vec<TerminalClass> = (0..n_joint)
        .into_par_iter()
        .map(|i| {
            classify_state(&model.grid, model.joint_state_at(i))
                .expect("enumerated states are in bounds")
        })
        .collect();

    let interior: Vec<u32> = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_terminal())
        .map(|(i, _)| i as u32)
        .collect();

    let n_interior = interior.len();
    let n_actions = model.n_joint_actions();
    let h = model.grid.cell_size();
    let sigma = model.wind.sigma;
    let n_e = model.evader.n_actions();

    let mut holding = vec![0.0; n_interior];
    let mut probs = vec![0.0; n_interior * n_actions * N_SLOTS];

    let per_state = n_actions * N_SLOTS;
    let result: Result<Vec<()>, McamError> = holding
        .par_iter_mut()
        .zip(probs.par_chunks_mut(per_state))
        .enumerate()
        .map(|(rank, (dt, rows))| {
            let s = model.joint_state_at(interior[rank] as usize);
            let q = q_factor(&model, s)?;
            *dt = h * h / q;
            for ap in 0..model.pursuer.n_actions() {
                let (b1, b2) = model.agent_drift(Agent::Pursuer, s.pursuer, ap);
                for ae in 0..n_e {
                    let (b3, b4) = model.agent_drift(Agent::Evader, s.evader, ae);
                    let row = row_from_drift(q, h, sigma, [b1, b2, b3, b4]);
                    let base = (ap * n_e + ae) * N_SLOTS;
                    rows[base..base + N_SLOTS].copy_from_slice(&row);
                }
            }
            Ok(())
        })
        .collect();
    result?;

    let (rank_of, successors) = index_interior(&model, &classes, &interior);
    Ok(TransitionKernel {
        model,
        classes,
        interior,
        rank_of,
        successors,
        holding,
        probs,
    })
}

//! Level-k policy construction by undiscounted value iteration.
//!
//! The level ladder starts from a mixed level-0 policy (uniform, or
//! uniform over headings that do not point the agent at a crash cell) and
//! each level above is the best response to the opponent one level below,
//! solved as a one-sided MDP:
//!
//! ```text
//! V_{m+1}(s) = max_a  sum_{s'} P(s' | s, a, opp policy) V_m(s')   s interior
//! V_m(s)     = terminal reward (own sign)                         s terminal
//! ```
//!
//! There is always a pure optimal policy, so greedy extraction with a
//! fixed tie-break (lowest action index) makes every level reproducible.
//! Values are stored in the owning agent's sign convention, so the
//! evader's best response is also a plain maximization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{reward_for, Agent, TerminalClass};
use crate::mcam::{TransitionKernel, N_SLOTS};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("value iteration did not converge within {iterations} sweeps (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("policy belongs to {got}, expected {want}")]
    WrongAgent { got: Agent, want: Agent },
    #[error("policy covers {got} interior states, kernel has {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("policy has {got} actions per state, agent has {want}")]
    ActionMismatch { got: usize, want: usize },
    #[error("expected a pure policy")]
    NotPure,
    #[error("level {level} not available for {agent} (hierarchy depth {depth})")]
    LevelUnavailable { agent: Agent, level: usize, depth: usize },
    #[error("maximum rationality level must be at least 1")]
    ZeroKMax,
}

/// How level-0 agents behave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level0Variant {
    /// Uniform over the full action set.
    Uniform,
    /// Uniform over actions whose most likely own-position move does not
    /// land on a crash cell; falls back to uniform when nothing is safe.
    SafeUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyTable {
    /// Row-major probabilities, one row of `n_actions` per interior rank.
    Mixed(Vec<f64>),
    /// One action index per interior rank.
    Pure(Vec<u16>),
}

/// Per-state action distribution for one agent over the kernel's interior
/// states.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub agent: Agent,
    pub n_actions: usize,
    pub table: PolicyTable,
}

impl Policy {
    pub fn is_pure(&self) -> bool {
        matches!(self.table, PolicyTable::Pure(_))
    }

    pub fn n_states(&self) -> usize {
        match &self.table {
            PolicyTable::Mixed(rows) => rows.len() / self.n_actions,
            PolicyTable::Pure(actions) => actions.len(),
        }
    }

    /// Probability of taking `action` at interior rank `rank`.
    pub fn prob(&self, rank: usize, action: usize) -> f64 {
        match &self.table {
            PolicyTable::Mixed(rows) => rows[rank * self.n_actions + action],
            PolicyTable::Pure(actions) => {
                if actions[rank] as usize == action {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Copies the action distribution at `rank` into `buf`.
    pub fn probs_into(&self, rank: usize, buf: &mut [f64]) {
        match &self.table {
            PolicyTable::Mixed(rows) => {
                buf.copy_from_slice(&rows[rank * self.n_actions..(rank + 1) * self.n_actions])
            }
            PolicyTable::Pure(actions) => {
                buf.fill(0.0);
                buf[actions[rank] as usize] = 1.0;
            }
        }
    }

    pub fn pure_actions(&self) -> Option<&[u16]> {
        match &self.table {
            PolicyTable::Pure(actions) => Some(actions),
            PolicyTable::Mixed(_) => None,
        }
    }

    fn check_against(&self, kernel: &TransitionKernel, want_agent: Agent) -> Result<(), SolveError> {
        if self.agent != want_agent {
            return Err(SolveError::WrongAgent { got: self.agent, want: want_agent });
        }
        if self.n_states() != kernel.n_interior() {
            return Err(SolveError::SizeMismatch { got: self.n_states(), want: kernel.n_interior() });
        }
        if self.n_actions != kernel.n_actions(self.agent) {
            return Err(SolveError::ActionMismatch {
                got: self.n_actions,
                want: kernel.n_actions(self.agent),
            });
        }
        Ok(())
    }
}

/// A value function over all joint states, in `agent`'s sign convention:
/// terminal entries equal that agent's terminal reward.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub agent: Agent,
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_index(&self, joint_index: usize) -> f64 {
        self.values[joint_index]
    }

    pub fn at(&self, kernel: &TransitionKernel, s: crate::grid::JointState) -> f64 {
        self.values[kernel.state_index(s)]
    }

    pub(crate) fn from_values(agent: Agent, values: Vec<f64>) -> Self {
        ValueFunction { agent, values }
    }
}

/// Stopping rule for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Sup-norm change threshold.
    pub tolerance: f64,
    /// Sweep limit; 0 means ten times the number of joint states.
    pub max_iterations: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { tolerance: 1e-9, max_iterations: 0 }
    }
}

impl SolveParams {
    fn sweep_limit(&self, kernel: &TransitionKernel) -> usize {
        if self.max_iterations == 0 {
            10 * kernel.n_joint_states()
        } else {
            self.max_iterations
        }
    }
}

/// Mixed level-0 policy.
///
/// The safe variant inspects, per heading, the direction in which the
/// agent's own position is most likely to move (the largest directional
/// drift rate); a heading is unsafe when some most-likely move lands on a
/// crash cell.
pub fn level0_policy(kernel: &TransitionKernel, agent: Agent, variant: Level0Variant) -> Policy {
    let model = kernel.model();
    let n_actions = kernel.n_actions(agent);
    let n_interior = kernel.n_interior();
    let grid = kernel.grid();

    // safety depends only on the agent's own cell; compute per cell once
    let mut safe_by_cell: Vec<Vec<bool>> = Vec::new();
    if variant == Level0Variant::SafeUniform {
        safe_by_cell = (0..grid.n_cells())
            .map(|ci| {
                let cell = grid.cell_at(ci);
                (0..n_actions)
                    .map(|a| {
                        let (bx, by) = model.agent_drift(agent, cell, a);
                        let rates = [bx.max(0.0), (-bx).max(0.0), by.max(0.0), (-by).max(0.0)];
                        let top = rates.iter().cloned().fold(0.0_f64, f64::max);
                        if top <= 0.0 {
                            return true; // no drift: staying put dominates
                        }
                        let deltas = [(1i32, 0i32), (-1, 0), (0, 1), (0, -1)];
                        (0..4).all(|k| {
                            if rates[k] < top {
                                return true;
                            }
                            let nx = cell.x as i32 + deltas[k].0;
                            let ny = cell.y as i32 + deltas[k].1;
                            let c = crate::grid::Cell::new(nx as u16, ny as u16);
                            !grid.is_crash_cell(c)
                        })
                    })
                    .collect()
            })
            .collect();
    }

    let mut rows = vec![0.0; n_interior * n_actions];
    for rank in 0..n_interior {
        let row = &mut rows[rank * n_actions..(rank + 1) * n_actions];
        match variant {
            Level0Variant::Uniform => row.fill(1.0 / n_actions as f64),
            Level0Variant::SafeUniform => {
                let s = kernel.state_of_rank(rank);
                let safe = &safe_by_cell[grid.cell_index(s.cell_of(agent))];
                let n_safe = safe.iter().filter(|&&ok| ok).count();
                if n_safe == 0 {
                    row.fill(1.0 / n_actions as f64);
                } else {
                    let p = 1.0 / n_safe as f64;
                    for (a, &ok) in safe.iter().enumerate() {
                        row[a] = if ok { p } else { 0.0 };
                    }
                }
            }
        }
    }
    Policy { agent, n_actions, table: PolicyTable::Mixed(rows) }
}

/// Terminal value vector in `agent`'s sign convention; interior entries
/// are the initial guess (zero).
fn terminal_values(kernel: &TransitionKernel, agent: Agent) -> Vec<f64> {
    kernel
        .classes()
        .iter()
        .map(|&cls| reward_for(agent, cls))
        .collect()
}

/// Folds the opponent's policy into the kernel: per (rank, own action),
/// nine slot probabilities.
fn marginalize_opponent(kernel: &TransitionKernel, own: Agent, opp: &Policy) -> Vec<f64> {
    let n_own = kernel.n_actions(own);
    let n_opp = kernel.n_actions(own.opponent());
    let n_e = kernel.n_actions(Agent::Evader);
    let mut out = vec![0.0; kernel.n_interior() * n_own * N_SLOTS];
    out.par_chunks_mut(n_own * N_SLOTS)
        .enumerate()
        .for_each(|(rank, chunk)| {
            for a_own in 0..n_own {
                let dst = &mut chunk[a_own * N_SLOTS..(a_own + 1) * N_SLOTS];
                for a_opp in 0..n_opp {
                    let w = opp.prob(rank, a_opp);
                    if w == 0.0 {
                        continue;
                    }
                    let joint = match own {
                        Agent::Pursuer => a_own * n_e + a_opp,
                        Agent::Evader => a_opp * n_e + a_own,
                    };
                    let row = kernel.row(rank, joint);
                    for k in 0..N_SLOTS {
                        dst[k] += w * row[k];
                    }
                }
            }
        });
    out
}

/// Folds both policies into the kernel: nine slot probabilities per rank.
fn marginalize_pair(kernel: &TransitionKernel, p_policy: &Policy, e_policy: &Policy) -> Vec<f64> {
    let n_p = kernel.n_actions(Agent::Pursuer);
    let n_e = kernel.n_actions(Agent::Evader);
    let mut out = vec![0.0; kernel.n_interior() * N_SLOTS];
    out.par_chunks_mut(N_SLOTS).enumerate().for_each(|(rank, dst)| {
        for ap in 0..n_p {
            let wp = p_policy.prob(rank, ap);
            if wp == 0.0 {
                continue;
            }
            for ae in 0..n_e {
                let w = wp * e_policy.prob(rank, ae);
                if w == 0.0 {
                    continue;
                }
                let row = kernel.row(rank, ap * n_e + ae);
                for k in 0..N_SLOTS {
                    dst[k] += w * row[k];
                }
            }
        }
    });
    out
}

/// Jacobi sweeps of `V <- expectation` under a pair-marginalized kernel
/// until the sup-norm change drops below tolerance.
fn evaluate_fixed_point(
    kernel: &TransitionKernel,
    pair_probs: &[f64],
    mut values: Vec<f64>,
    params: &SolveParams,
) -> Result<Vec<f64>, SolveError> {
    let n_interior = kernel.n_interior();
    let limit = params.sweep_limit(kernel);
    let mut fresh = vec![0.0; n_interior];
    let mut residual = f64::INFINITY;
    for _ in 0..limit {
        fresh.par_iter_mut().enumerate().for_each(|(rank, out)| {
            let succ = kernel.successors_of_rank(rank);
            let row = &pair_probs[rank * N_SLOTS..(rank + 1) * N_SLOTS];
            let mut acc = 0.0;
            for k in 0..N_SLOTS {
                acc += row[k] * values[succ[k] as usize];
            }
            *out = acc;
        });
        residual = 0.0;
        for (rank, &v) in fresh.iter().enumerate() {
            let joint = kernel.index_of_rank(rank);
            let delta = (v - values[joint]).abs();
            if delta > residual {
                residual = delta;
            }
            values[joint] = v;
        }
        if residual < params.tolerance {
            return Ok(values);
        }
    }
    Err(SolveError::NonConvergence { iterations: limit, residual })
}

/// Expected terminal reward of the fixed policy pair, from `perspective`'s
/// side. Terminal states are pinned to that agent's reward; interior
/// values solve the one-step expectation fixed point.
pub fn policy_evaluation(
    kernel: &TransitionKernel,
    p_policy: &Policy,
    e_policy: &Policy,
    perspective: Agent,
    params: &SolveParams,
) -> Result<ValueFunction, SolveError> {
    p_policy.check_against(kernel, Agent::Pursuer)?;
    e_policy.check_against(kernel, Agent::Evader)?;
    let pair = marginalize_pair(kernel, p_policy, e_policy);
    let values = evaluate_fixed_point(kernel, &pair, terminal_values(kernel, perspective), params)?;
    Ok(ValueFunction::from_values(perspective, values))
}

/// Probability, per joint state, that the game started there and played
/// under the fixed pair is absorbed in one of `targets`.
pub fn outcome_probabilities(
    kernel: &TransitionKernel,
    p_policy: &Policy,
    e_policy: &Policy,
    targets: &[TerminalClass],
    params: &SolveParams,
) -> Result<Vec<f64>, SolveError> {
    p_policy.check_against(kernel, Agent::Pursuer)?;
    e_policy.check_against(kernel, Agent::Evader)?;
    let pair = marginalize_pair(kernel, p_policy, e_policy);
    let init: Vec<f64> = kernel
        .classes()
        .iter()
        .map(|cls| if targets.contains(cls) { 1.0 } else { 0.0 })
        .collect();
    evaluate_fixed_point(kernel, &pair, init, params)
}

/// Best response of `agent` against a fixed opponent policy.
///
/// Undiscounted value iteration from zero interior values, maximizing the
/// agent's own-sign expected terminal reward; ties in the greedy argmax
/// break toward the lowest action index.
pub fn best_response(
    kernel: &TransitionKernel,
    opp_policy: &Policy,
    agent: Agent,
    params: &SolveParams,
) -> Result<(Policy, ValueFunction), SolveError> {
    opp_policy.check_against(kernel, agent.opponent())?;
    let n_own = kernel.n_actions(agent);
    let marg = marginalize_opponent(kernel, agent, opp_policy);
    let mut values = terminal_values(kernel, agent);
    let n_interior = kernel.n_interior();
    let limit = params.sweep_limit(kernel);
    let mut fresh = vec![0.0; n_interior];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..limit {
        fresh.par_iter_mut().enumerate().for_each(|(rank, out)| {
            let succ = kernel.successors_of_rank(rank);
            let base = rank * n_own * N_SLOTS;
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_own {
                let row = &marg[base + a * N_SLOTS..base + (a + 1) * N_SLOTS];
                let mut acc = 0.0;
                for k in 0..N_SLOTS {
                    acc += row[k] * values[succ[k] as usize];
                }
                if acc > best {
                    best = acc;
                }
            }
            *out = best;
        });
        residual = 0.0;
        for (rank, &v) in fresh.iter().enumerate() {
            let joint = kernel.index_of_rank(rank);
            let delta = (v - values[joint]).abs();
            if delta > residual {
                residual = delta;
            }
            values[joint] = v;
        }
        if residual < params.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolveError::NonConvergence { iterations: limit, residual });
    }

    let actions: Vec<u16> = (0..n_interior)
        .into_par_iter()
        .map(|rank| {
            let succ = kernel.successors_of_rank(rank);
            let base = rank * n_own * N_SLOTS;
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0u16;
            for a in 0..n_own {
                let row = &marg[base + a * N_SLOTS..base + (a + 1) * N_SLOTS];
                let mut acc = 0.0;
                for k in 0..N_SLOTS {
                    acc += row[k] * values[succ[k] as usize];
                }
                if acc > best {
                    best = acc;
                    arg = a as u16;
                }
            }
            arg
        })
        .collect();

    Ok((
        Policy { agent, n_actions: n_own, table: PolicyTable::Pure(actions) },
        ValueFunction::from_values(agent, values),
    ))
}

/// One rung of the ladder.
#[derive(Debug, Clone)]
pub struct LevelEntry {
    pub policy: Policy,
    /// Own-sign value of the level's best response; absent at level 0.
    pub value: Option<ValueFunction>,
}

/// First level K at which `agent`'s ladder satisfies
/// policy(K + 2) == policy(K).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub agent: Agent,
    pub level: usize,
}

/// The full ladder for both agents, levels 0..=depth.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub k_max_pursuer: usize,
    pub k_max_evader: usize,
    pub depth: usize,
    pub pursuer_levels: Vec<LevelEntry>,
    pub evader_levels: Vec<LevelEntry>,
    pub fixed_point: Option<FixedPoint>,
}

impl Hierarchy {
    pub fn k_max(&self, agent: Agent) -> usize {
        match agent {
            Agent::Pursuer => self.k_max_pursuer,
            Agent::Evader => self.k_max_evader,
        }
    }

    pub fn levels(&self, agent: Agent) -> &[LevelEntry] {
        match agent {
            Agent::Pursuer => &self.pursuer_levels,
            Agent::Evader => &self.evader_levels,
        }
    }

    pub fn policy(&self, agent: Agent, level: usize) -> Result<&Policy, SolveError> {
        self.levels(agent)
            .get(level)
            .map(|e| &e.policy)
            .ok_or(SolveError::LevelUnavailable { agent, level, depth: self.depth })
    }

    pub fn value(&self, agent: Agent, level: usize) -> Option<&ValueFunction> {
        self.levels(agent).get(level).and_then(|e| e.value.as_ref())
    }
}

fn same_pure(a: &Policy, b: &Policy) -> bool {
    match (a.pure_actions(), b.pure_actions()) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

/// Builds both agents' ladders.
///
/// Level k of each agent best-responds to the opponent's level k-1, so
/// both ladders are computed to the common depth
/// `max(k_max_pursuer, k_max_evader)`; this also provides the opponent
/// policies an agent needs below its own maximum level. Reports the first
/// level K (for either agent) whose level-(K+2) policy repeats level K.
pub fn build_hierarchy(
    kernel: &TransitionKernel,
    k_max_pursuer: usize,
    k_max_evader: usize,
    level0: Level0Variant,
    params: &SolveParams,
) -> Result<Hierarchy, SolveError> {
    if k_max_pursuer == 0 || k_max_evader == 0 {
        return Err(SolveError::ZeroKMax);
    }
    let depth = k_max_pursuer.max(k_max_evader);
    let mut pursuer_levels = vec![LevelEntry {
        policy: level0_policy(kernel, Agent::Pursuer, level0),
        value: None,
    }];
    let mut evader_levels = vec![LevelEntry {
        policy: level0_policy(kernel, Agent::Evader, level0),
        value: None,
    }];
    for k in 1..=depth {
        let (p_pol, p_val) =
            best_response(kernel, &evader_levels[k - 1].policy, Agent::Pursuer, params)?;
        let (e_pol, e_val) =
            best_response(kernel, &pursuer_levels[k - 1].policy, Agent::Evader, params)?;
        pursuer_levels.push(LevelEntry { policy: p_pol, value: Some(p_val) });
        evader_levels.push(LevelEntry { policy: e_pol, value: Some(e_val) });
    }

    let mut fixed_point = None;
    'scan: for k in 0..depth.saturating_sub(1) {
        for (agent, ladder) in [
            (Agent::Pursuer, &pursuer_levels),
            (Agent::Evader, &evader_levels),
        ] {
            if same_pure(&ladder[k].policy, &ladder[k + 2].policy) {
                fixed_point = Some(FixedPoint { agent, level: k });
                break 'scan;
            }
        }
    }

    Ok(Hierarchy {
        k_max_pursuer,
        k_max_evader,
        depth,
        pursuer_levels,
        evader_levels,
        fixed_point,
    })
}

/// Result of checking a pure policy pair for equilibrium.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NashReport {
    pub is_nash: bool,
    /// Largest one-sided improvement over the pair value, across agents
    /// and interior states (own-sign for each agent).
    pub max_gain: f64,
    pub pursuer_gain: f64,
    pub evader_gain: f64,
    pub tolerance: f64,
}

/// Checks whether a pure pair is a Nash equilibrium within `deviation_tol`
/// by comparing each agent's best-response value to the pair's evaluated
/// value at every interior state.
pub fn nash_check(
    kernel: &TransitionKernel,
    p_policy: &Policy,
    e_policy: &Policy,
    deviation_tol: f64,
    params: &SolveParams,
) -> Result<NashReport, SolveError> {
    if !p_policy.is_pure() || !e_policy.is_pure() {
        return Err(SolveError::NotPure);
    }
    let mut gains = [0.0f64; 2];
    for (slot, agent) in [Agent::Pursuer, Agent::Evader].into_iter().enumerate() {
        let pair_value = policy_evaluation(kernel, p_policy, e_policy, agent, params)?;
        let opp = match agent {
            Agent::Pursuer => e_policy,
            Agent::Evader => p_policy,
        };
        let (_, br_value) = best_response(kernel, opp, agent, params)?;
        let gain = kernel
            .interior_indices()
            .iter()
            .map(|&j| br_value.at_index(j as usize) - pair_value.at_index(j as usize))
            .fold(0.0_f64, f64::max);
        gains[slot] = gain;
    }
    let max_gain = gains[0].max(gains[1]);
    Ok(NashReport {
        is_nash: max_gain <= deviation_tol,
        max_gain,
        pursuer_gain: gains[0],
        evader_gain: gains[1],
        tolerance: deviation_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AgentSpec, Cell, GridSpec, JointState, WindField};
    use crate::mcam::{build_kernel, GameModel};

    fn model(width: u16, height: u16, sigma: f64, obstacles: Vec<Cell>, rho: f64) -> GameModel {
        let grid = GridSpec::new(width, height, 1.0, obstacles, [], rho).unwrap();
        let wind = WindField::calm(&grid, sigma).unwrap();
        GameModel::new(grid, wind, AgentSpec::compass(1.0), AgentSpec::compass(1.0)).unwrap()
    }

    #[test]
    fn level0_uniform_rows() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![], 0.5)).unwrap();
        let pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        for rank in 0..kernel.n_interior() {
            for a in 0..4 {
                assert_eq!(pol.prob(rank, a), 0.25);
            }
        }
    }

    #[test]
    fn safe_uniform_matches_uniform_in_open_space() {
        // 8x8, no obstacles: states with both agents at least 2 cells from
        // the ring have no unsafe heading
        let kernel = build_kernel(model(8, 8, 0.4, vec![], 0.5)).unwrap();
        let uni = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let safe = level0_policy(&kernel, Agent::Evader, Level0Variant::SafeUniform);
        let s = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let rank = kernel.rank_of_state(s).unwrap();
        for a in 0..4 {
            assert_eq!(uni.prob(rank, a), safe.prob(rank, a));
        }
    }

    #[test]
    fn safe_uniform_corner_pocket_spreads_over_safe_pair() {
        // 4x4 board: interior cells are (1,1),(1,2),(2,1),(2,2). At (1,1)
        // the headings pi (toward x=0) and 3pi/2 (toward y=0) point at the
        // ring, leaving 1/2 each on headings 0 and pi/2.
        let kernel = build_kernel(model(4, 4, 0.4, vec![], 0.5)).unwrap();
        let pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::SafeUniform);
        let s = JointState::new(Cell::new(1, 1), Cell::new(2, 2));
        let rank = kernel.rank_of_state(s).unwrap();
        assert_eq!(pol.prob(rank, 0), 0.5);
        assert_eq!(pol.prob(rank, 1), 0.5);
        assert_eq!(pol.prob(rank, 2), 0.0);
        assert_eq!(pol.prob(rank, 3), 0.0);
    }

    #[test]
    fn policy_rows_sum_to_one() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![Cell::new(3, 3)], 0.5)).unwrap();
        for variant in [Level0Variant::Uniform, Level0Variant::SafeUniform] {
            for agent in [Agent::Pursuer, Agent::Evader] {
                let pol = level0_policy(&kernel, agent, variant);
                for rank in 0..kernel.n_interior() {
                    let sum: f64 = (0..4).map(|a| pol.prob(rank, a)).sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    /// All-action-0 pure policy (heading 0).
    fn constant_policy(kernel: &TransitionKernel, agent: Agent, action: u16) -> Policy {
        Policy {
            agent,
            n_actions: kernel.n_actions(agent),
            table: PolicyTable::Pure(vec![action; kernel.n_interior()]),
        }
    }

    #[test]
    fn one_step_absorption_value_is_plus_one() {
        // Noise-free kernel: a step moves exactly one agent by one cell.
        // The evader at (6,3) is boxed by obstacles except toward the
        // pursuer; with rho = 1.5 every positive-probability slot out of
        // s0 is Capture or CrashEvaderOnly, so V(s0) = +1 exactly.
        let m = model(9, 9, 0.0, vec![Cell::new(7, 3), Cell::new(6, 2), Cell::new(6, 4)], 1.5);
        let kernel = build_kernel(m).unwrap();
        let s0 = JointState::new(Cell::new(4, 3), Cell::new(6, 3));
        let rank = kernel.rank_of_state(s0);
        assert!(rank.is_some(), "s0 must be interior");
        // every successor slot with mass, under any evader action, is a +1
        // terminal (the self-loop with trig-roundoff mass returns to s0)
        for ae in 0..4 {
            for (t, p) in kernel
                .distribution(s0, crate::mcam::JointAction::new(0, ae))
                .unwrap()
            {
                if t == s0 {
                    assert!(p < 1e-12);
                    continue;
                }
                let cls = crate::grid::classify_state(kernel.grid(), t).unwrap();
                assert!(crate::grid::terminal_reward(cls) == 1.0, "{t:?} -> {cls:?}");
            }
        }
        let p_pol = constant_policy(&kernel, Agent::Pursuer, 0);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let params = SolveParams::default();
        let v = policy_evaluation(&kernel, &p_pol, &e_pol, Agent::Pursuer, &params).unwrap();
        assert!((v.at(&kernel, s0) - 1.0).abs() < 1e-9, "got {}", v.at(&kernel, s0));
    }

    #[test]
    fn values_are_bounded_and_pinned_at_terminals() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![], 0.5)).unwrap();
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let params = SolveParams::default();
        let v = policy_evaluation(&kernel, &p_pol, &e_pol, Agent::Pursuer, &params).unwrap();
        for j in 0..kernel.n_joint_states() {
            assert!(v.at_index(j) >= -1.0 - 1e-9 && v.at_index(j) <= 1.0 + 1e-9);
            let cls = kernel.class_of_index(j);
            if cls.is_terminal() {
                assert_eq!(v.at_index(j), crate::grid::terminal_reward(cls));
            }
        }
    }

    #[test]
    fn zero_sum_consistency_between_perspectives() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![Cell::new(2, 3)], 0.5)).unwrap();
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::SafeUniform);
        let params = SolveParams::default();
        let vp = policy_evaluation(&kernel, &p_pol, &e_pol, Agent::Pursuer, &params).unwrap();
        let ve = policy_evaluation(&kernel, &p_pol, &e_pol, Agent::Evader, &params).unwrap();
        for j in 0..kernel.n_joint_states() {
            assert!((vp.at_index(j) + ve.at_index(j)).abs() < 2e-9);
        }
    }

    #[test]
    fn symmetric_arena_swap_identity() {
        // Obstacle-free arena with no evasion cells, zero wind, equal
        // agents, uniform play: swapping the two positions flips the
        // crash-only component of the value, so V(a,b) + V(b,a) equals
        // twice the capture probability from (a,b).
        let kernel = build_kernel(model(6, 6, 0.4, vec![], 0.5)).unwrap();
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let params = SolveParams { tolerance: 1e-11, max_iterations: 0 };
        let v = policy_evaluation(&kernel, &p_pol, &e_pol, Agent::Pursuer, &params).unwrap();
        let cap = outcome_probabilities(&kernel, &p_pol, &e_pol, &[TerminalClass::Capture], &params)
            .unwrap();
        for (a, b) in [
            (Cell::new(1, 2), Cell::new(4, 3)),
            (Cell::new(2, 2), Cell::new(3, 4)),
            (Cell::new(1, 1), Cell::new(4, 4)),
        ] {
            let fwd = JointState::new(a, b);
            let rev = JointState::new(b, a);
            let lhs = v.at(&kernel, fwd) + v.at(&kernel, rev);
            let rhs = 2.0 * cap[kernel.state_index(fwd)];
            assert!((lhs - rhs).abs() < 1e-7, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn best_response_is_deterministic_and_pins_terminals() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![Cell::new(3, 2)], 0.5)).unwrap();
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let params = SolveParams::default();
        let (pol_a, val_a) = best_response(&kernel, &e_pol, Agent::Pursuer, &params).unwrap();
        let (pol_b, val_b) = best_response(&kernel, &e_pol, Agent::Pursuer, &params).unwrap();
        assert_eq!(pol_a.pure_actions().unwrap(), pol_b.pure_actions().unwrap());
        assert_eq!(val_a.values(), val_b.values());
        for j in 0..kernel.n_joint_states() {
            let cls = kernel.class_of_index(j);
            if cls.is_terminal() {
                assert_eq!(val_a.at_index(j), crate::grid::terminal_reward(cls));
            }
        }
    }

    #[test]
    fn best_response_dominates_random_alternatives() {
        use rand::{Rng, SeedableRng};
        let kernel = build_kernel(model(5, 5, 0.4, vec![], 0.5)).unwrap();
        let params = SolveParams::default();
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let (br, br_val) = best_response(&kernel, &e_pol, Agent::Pursuer, &params).unwrap();
        let br_eval = policy_evaluation(&kernel, &br, &e_pol, Agent::Pursuer, &params).unwrap();
        // greedy policy's own evaluation matches its value-iteration value
        for &j in kernel.interior_indices() {
            assert!((br_eval.at_index(j as usize) - br_val.at_index(j as usize)).abs() < 1e-7);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let actions: Vec<u16> =
                (0..kernel.n_interior()).map(|_| rng.gen_range(0..4) as u16).collect();
            let alt = Policy {
                agent: Agent::Pursuer,
                n_actions: 4,
                table: PolicyTable::Pure(actions),
            };
            let alt_val = policy_evaluation(&kernel, &alt, &e_pol, Agent::Pursuer, &params).unwrap();
            for &j in kernel.interior_indices() {
                assert!(br_val.at_index(j as usize) >= alt_val.at_index(j as usize) - 1e-9);
            }
        }
    }

    #[test]
    fn hierarchy_level1_is_best_response_to_level0() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![Cell::new(3, 3)], 0.5)).unwrap();
        let params = SolveParams::default();
        let h = build_hierarchy(&kernel, 2, 2, Level0Variant::Uniform, &params).unwrap();
        let e0 = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let (p1, _) = best_response(&kernel, &e0, Agent::Pursuer, &params).unwrap();
        assert_eq!(
            h.policy(Agent::Pursuer, 1).unwrap().pure_actions().unwrap(),
            p1.pure_actions().unwrap()
        );
        assert_eq!(h.levels(Agent::Pursuer).len(), 3);
        assert_eq!(h.levels(Agent::Evader).len(), 3);
        assert!(h.policy(Agent::Pursuer, 3).is_err());
    }

    #[test]
    fn hierarchy_rejects_zero_k_max() {
        let kernel = build_kernel(model(5, 5, 0.4, vec![], 0.5)).unwrap();
        let params = SolveParams::default();
        assert!(matches!(
            build_hierarchy(&kernel, 0, 2, Level0Variant::Uniform, &params),
            Err(SolveError::ZeroKMax)
        ));
    }

    #[test]
    fn fixed_point_pair_passes_nash_check() {
        // small arena where the ladder settles quickly
        let kernel = build_kernel(model(6, 6, 0.4, vec![], 0.5)).unwrap();
        let params = SolveParams::default();
        let h = build_hierarchy(&kernel, 8, 8, Level0Variant::Uniform, &params).unwrap();
        if let Some(fp) = h.fixed_point {
            let (p_pol, e_pol) = match fp.agent {
                Agent::Pursuer => (
                    h.policy(Agent::Pursuer, fp.level).unwrap(),
                    h.policy(Agent::Evader, fp.level + 1).unwrap(),
                ),
                Agent::Evader => (
                    h.policy(Agent::Pursuer, fp.level + 1).unwrap(),
                    h.policy(Agent::Evader, fp.level).unwrap(),
                ),
            };
            let report = nash_check(&kernel, p_pol, e_pol, 1e-6, &params).unwrap();
            assert!(report.is_nash, "gain {}", report.max_gain);
        }
    }

    #[test]
    fn non_equilibrium_pair_fails_nash_check() {
        let kernel = build_kernel(model(6, 6, 0.4, vec![Cell::new(3, 3)], 0.5)).unwrap();
        let params = SolveParams::default();
        let h = build_hierarchy(&kernel, 2, 2, Level0Variant::Uniform, &params).unwrap();
        let p1 = h.policy(Agent::Pursuer, 1).unwrap();
        let e1 = h.policy(Agent::Evader, 1).unwrap();
        let a = nash_check(&kernel, p1, e1, 1e-6, &params).unwrap();
        let b = nash_check(&kernel, p1, e1, 1e-6, &params).unwrap();
        assert_eq!(a.is_nash, b.is_nash);
        assert_eq!(a.max_gain, b.max_gain);
        // level-1 against level-1 is generically not an equilibrium here
        assert!(!a.is_nash, "unexpected equilibrium, gain {}", a.max_gain);
    }

    #[test]
    fn nash_check_requires_pure_policies() {
        let kernel = build_kernel(model(5, 5, 0.4, vec![], 0.5)).unwrap();
        let params = SolveParams::default();
        let mixed = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        assert!(matches!(
            nash_check(&kernel, &mixed, &e, 1e-6, &params),
            Err(SolveError::NotPure)
        ));
    }
}

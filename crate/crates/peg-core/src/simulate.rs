//! Monte Carlo rollouts of the discrete game under fixed policy pairs.
//!
//! Every game is driven by its own ChaCha8 generator; `run_match` derives
//! game g's seed as `splitmix64(master_seed + g)`, so any single game can
//! be replayed in isolation from its reported seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Agent, JointState, TerminalClass};
use crate::mcam::{JointAction, TransitionKernel};
use crate::solver::{Hierarchy, Policy, SolveError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("start state ({0}, {1})/({2}, {3}) is not interior")]
    StartNotInterior(u16, u16, u16, u16),
    #[error("at least one game is required")]
    ZeroGames,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// How a rollout ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Terminal(TerminalClass),
    /// Hit the step bound before absorption.
    Truncated,
}

/// One recorded game: the visited states, the joint actions between them,
/// and the cumulative holding time at each visited state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<JointState>,
    pub actions: Vec<JointAction>,
    pub times: Vec<f64>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn terminal_class(&self) -> Option<TerminalClass> {
        match self.outcome {
            Outcome::Terminal(cls) => Some(cls),
            Outcome::Truncated => None,
        }
    }
}

/// Standard 64-bit mix used to derive per-game seeds from a master seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn sample_index(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_policy(policy: &Policy, rank: usize, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    sample_index((0..policy.n_actions).map(|a| policy.prob(rank, a)), u)
}

/// Plays one game from `s0` under the given pair, stopping at the first
/// terminal state or after `max_steps` transitions.
pub fn rollout(
    kernel: &TransitionKernel,
    p_policy: &Policy,
    e_policy: &Policy,
    s0: JointState,
    seed: u64,
    max_steps: usize,
) -> Result<Trajectory, SimError> {
    let mut rank = kernel
        .rank_of_state(s0)
        .ok_or(SimError::StartNotInterior(s0.pursuer.x, s0.pursuer.y, s0.evader.x, s0.evader.y))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut states = vec![s0];
    let mut actions = Vec::new();
    let mut times = vec![0.0];
    let mut clock = 0.0;

    loop {
        if actions.len() >= max_steps {
            return Ok(Trajectory { states, actions, times, outcome: Outcome::Truncated });
        }
        let ap = sample_policy(p_policy, rank, &mut rng);
        let ae = sample_policy(e_policy, rank, &mut rng);
        let row = kernel.row(rank, ap * kernel.n_actions(Agent::Evader) + ae);
        let u: f64 = rng.gen();
        let slot = sample_index(row.iter().copied(), u);
        let next_index = kernel.successors_of_rank(rank)[slot] as usize;

        clock += kernel.holding_time_of_rank(rank);
        actions.push(JointAction::new(ap, ae));
        states.push(kernel.state_at(next_index));
        times.push(clock);

        match kernel.rank_of_index(next_index) {
            Some(r) => rank = r,
            None => {
                let cls = kernel.class_of_index(next_index);
                return Ok(Trajectory { states, actions, times, outcome: Outcome::Terminal(cls) });
            }
        }
    }
}

/// Tallies over a batch of completed games. Truncated games are counted
/// separately and excluded from the win accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    /// Completed (absorbed) games.
    pub games: usize,
    pub pursuer_wins: usize,
    pub wins_by_capture: usize,
    pub wins_by_evader_crash: usize,
    pub evader_wins: usize,
    pub wins_by_evasion: usize,
    pub wins_by_pursuer_crash: usize,
    pub draws: usize,
    pub truncated: usize,
    pub mean_steps: f64,
}

impl MatchStats {
    fn empty() -> Self {
        MatchStats {
            games: 0,
            pursuer_wins: 0,
            wins_by_capture: 0,
            wins_by_evader_crash: 0,
            evader_wins: 0,
            wins_by_evasion: 0,
            wins_by_pursuer_crash: 0,
            draws: 0,
            truncated: 0,
            mean_steps: 0.0,
        }
    }

    fn absorb(&mut self, cls: TerminalClass) {
        self.games += 1;
        match cls {
            TerminalClass::Capture => {
                self.pursuer_wins += 1;
                self.wins_by_capture += 1;
            }
            TerminalClass::CrashEvaderOnly => {
                self.pursuer_wins += 1;
                self.wins_by_evader_crash += 1;
            }
            TerminalClass::Evasion => {
                self.evader_wins += 1;
                self.wins_by_evasion += 1;
            }
            TerminalClass::CrashPursuerOnly => {
                self.evader_wins += 1;
                self.wins_by_pursuer_crash += 1;
            }
            TerminalClass::CrashBoth => self.draws += 1,
            TerminalClass::Interior => unreachable!("absorbing states are terminal"),
        }
    }

    fn merge(mut self, other: MatchStats) -> MatchStats {
        self.games += other.games;
        self.pursuer_wins += other.pursuer_wins;
        self.wins_by_capture += other.wins_by_capture;
        self.wins_by_evader_crash += other.wins_by_evader_crash;
        self.evader_wins += other.evader_wins;
        self.wins_by_evasion += other.wins_by_evasion;
        self.wins_by_pursuer_crash += other.wins_by_pursuer_crash;
        self.draws += other.draws;
        self.truncated += other.truncated;
        self.mean_steps += other.mean_steps; // running sum until finalized
        self
    }

    pub fn pursuer_win_rate(&self) -> f64 {
        self.pursuer_wins as f64 / self.games as f64
    }

    pub fn evader_win_rate(&self) -> f64 {
        self.evader_wins as f64 / self.games as f64
    }

    pub fn capture_rate(&self) -> f64 {
        self.wins_by_capture as f64 / self.games as f64
    }

    pub fn evasion_rate(&self) -> f64 {
        self.wins_by_evasion as f64 / self.games as f64
    }

    /// Sample mean of the pursuer's terminal reward over completed games.
    pub fn mean_terminal_reward(&self) -> f64 {
        (self.pursuer_wins as f64 - self.evader_wins as f64) / self.games as f64
    }
}

/// Runs `n_games` independent rollouts with per-game derived seeds.
pub fn run_match(
    kernel: &TransitionKernel,
    p_policy: &Policy,
    e_policy: &Policy,
    s0: JointState,
    n_games: usize,
    seed: u64,
    max_steps: usize,
) -> Result<MatchStats, SimError> {
    if n_games == 0 {
        return Err(SimError::ZeroGames);
    }
    kernel
        .rank_of_state(s0)
        .ok_or(SimError::StartNotInterior(s0.pursuer.x, s0.pursuer.y, s0.evader.x, s0.evader.y))?;

    let mut stats = (0..n_games as u64)
        .into_par_iter()
        .map(|g| {
            let traj = rollout(kernel, p_policy, e_policy, s0, splitmix64(seed.wrapping_add(g)), max_steps)
                .expect("start state validated");
            let mut local = MatchStats::empty();
            match traj.outcome {
                Outcome::Terminal(cls) => {
                    local.absorb(cls);
                    local.mean_steps = traj.steps() as f64;
                }
                Outcome::Truncated => local.truncated = 1,
            }
            local
        })
        .reduce(MatchStats::empty, MatchStats::merge);

    if stats.games > 0 {
        stats.mean_steps /= stats.games as f64;
    }
    Ok(stats)
}

/// One column of a level-sweep experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelColumn {
    pub varying_level: usize,
    pub stats: MatchStats,
}

/// Win statistics while one agent's level is fixed and the other's sweeps
/// a range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelMatrix {
    pub fixed_agent: Agent,
    pub fixed_level: usize,
    pub n_games: usize,
    pub columns: Vec<LevelColumn>,
}

/// Runs `run_match` once per varying level against the fixed opponent.
/// Column for level l derives its match seed as `splitmix64(seed + l)`.
pub fn level_matrix_experiment(
    kernel: &TransitionKernel,
    hierarchy: &Hierarchy,
    s0: JointState,
    fixed_agent: Agent,
    fixed_level: usize,
    varying_levels: &[usize],
    n_games: usize,
    seed: u64,
    max_steps: usize,
) -> Result<LevelMatrix, SimError> {
    if n_games == 0 {
        return Err(SimError::ZeroGames);
    }
    let fixed_policy = hierarchy.policy(fixed_agent, fixed_level)?;
    let mut columns = Vec::with_capacity(varying_levels.len());
    for &level in varying_levels {
        let varying_policy = hierarchy.policy(fixed_agent.opponent(), level)?;
        let (p_pol, e_pol) = match fixed_agent {
            Agent::Evader => (varying_policy, fixed_policy),
            Agent::Pursuer => (fixed_policy, varying_policy),
        };
        let stats = run_match(
            kernel,
            p_pol,
            e_pol,
            s0,
            n_games,
            splitmix64(seed.wrapping_add(level as u64)),
            max_steps,
        )?;
        columns.push(LevelColumn { varying_level: level, stats });
    }
    Ok(LevelMatrix { fixed_agent, fixed_level, n_games, columns })
}

/// Default step bound used when a configuration does not set one.
pub fn default_max_steps(width: u16, height: u16) -> usize {
    50 * (width as usize + height as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AgentSpec, Cell, GridSpec, WindField};
    use crate::mcam::{build_kernel, GameModel};
    use crate::mcam::N_SLOTS;
    use crate::solver::{
        level0_policy, policy_evaluation, Level0Variant, PolicyTable, SolveParams,
    };

    fn kernel_with(
        width: u16,
        height: u16,
        sigma: f64,
        obstacles: Vec<Cell>,
        rho: f64,
    ) -> TransitionKernel {
        let grid = GridSpec::new(width, height, 1.0, obstacles, [], rho).unwrap();
        let wind = WindField::calm(&grid, sigma).unwrap();
        let m = GameModel::new(grid, wind, AgentSpec::compass(1.0), AgentSpec::compass(1.0)).unwrap();
        build_kernel(m).unwrap()
    }

    fn pure(kernel: &TransitionKernel, agent: Agent, action: u16) -> Policy {
        Policy {
            agent,
            n_actions: kernel.n_actions(agent),
            table: PolicyTable::Pure(vec![action; kernel.n_interior()]),
        }
    }

    #[test]
    fn forced_one_step_capture() {
        // Noise-free kernel, evader boxed except toward the pursuer, rho
        // covering one cell: whichever agent the step moves, the result is
        // Capture after exactly one transition.
        let obstacles = vec![Cell::new(7, 3), Cell::new(6, 2), Cell::new(6, 4)];
        let kernel = kernel_with(9, 9, 0.0, obstacles, 1.5);
        let s0 = JointState::new(Cell::new(4, 3), Cell::new(6, 3));
        let p_pol = pure(&kernel, Agent::Pursuer, 0);
        let e_toward = pure(&kernel, Agent::Evader, 2); // heading pi, toward the pursuer
        for seed in 0..5 {
            let t = rollout(&kernel, &p_pol, &e_toward, s0, seed, 100).unwrap();
            assert_eq!(t.steps(), 1);
            assert_eq!(t.outcome, Outcome::Terminal(TerminalClass::Capture));
        }
        // any evader action still terminates in one step with reward +1
        let e_uni = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        for seed in 0..20 {
            let t = rollout(&kernel, &p_pol, &e_uni, s0, seed, 100).unwrap();
            assert_eq!(t.steps(), 1);
            let cls = t.terminal_class().unwrap();
            assert!(matches!(cls, TerminalClass::Capture | TerminalClass::CrashEvaderOnly));
        }
    }

    #[test]
    fn rollout_is_deterministic_in_seed() {
        let kernel = kernel_with(7, 7, 0.4, vec![], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let a = rollout(&kernel, &p_pol, &e_pol, s0, 99, 500).unwrap();
        let b = rollout(&kernel, &p_pol, &e_pol, s0, 99, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rollout_rejects_terminal_start() {
        let kernel = kernel_with(7, 7, 0.4, vec![], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let s0 = JointState::new(Cell::new(0, 2), Cell::new(4, 4));
        assert!(matches!(
            rollout(&kernel, &p_pol, &e_pol, s0, 1, 100),
            Err(SimError::StartNotInterior(..))
        ));
    }

    #[test]
    fn truncation_is_flagged_not_an_error() {
        let kernel = kernel_with(9, 9, 0.4, vec![], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::SafeUniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::SafeUniform);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(6, 6));
        let t = rollout(&kernel, &p_pol, &e_pol, s0, 7, 1).unwrap();
        if t.steps() == 1 && t.terminal_class().is_none() {
            assert_eq!(t.outcome, Outcome::Truncated);
        }
        assert!(t.steps() <= 1);
    }

    #[test]
    fn one_step_sampler_matches_kernel_probabilities() {
        // empirical successor frequencies from single-step rollouts agree
        // with the marginal kernel row within 3-sigma binomial bounds
        let kernel = kernel_with(7, 7, 0.4, vec![], 0.5);
        let p_pol = pure(&kernel, Agent::Pursuer, 0);
        let e_pol = pure(&kernel, Agent::Evader, 2);
        let s0 = JointState::new(Cell::new(2, 3), Cell::new(4, 3));
        let rank = kernel.rank_of_state(s0).unwrap();
        let row = kernel.row(rank, 0 * kernel.n_actions(Agent::Evader) + 2).to_vec();
        let succ = *kernel.successors_of_rank(rank);

        let n = 100_000usize;
        let mut counts = [0usize; N_SLOTS];
        for g in 0..n {
            let t = rollout(&kernel, &p_pol, &e_pol, s0, splitmix64(1234 + g as u64), 1).unwrap();
            let landed = kernel.state_index(t.states[1]);
            let slot = succ.iter().position(|&j| j as usize == landed).unwrap();
            counts[slot] += 1;
        }
        for k in 0..N_SLOTS {
            let p = row[k];
            let freq = counts[k] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-12,
                "slot {k}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn match_counts_partition_games() {
        let kernel = kernel_with(8, 8, 0.4, vec![Cell::new(4, 4)], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(5, 5));
        let stats = run_match(&kernel, &p_pol, &e_pol, s0, 500, 77, 2000).unwrap();
        assert_eq!(stats.pursuer_wins, stats.wins_by_capture + stats.wins_by_evader_crash);
        assert_eq!(stats.evader_wins, stats.wins_by_evasion + stats.wins_by_pursuer_crash);
        assert_eq!(stats.games, stats.pursuer_wins + stats.evader_wins + stats.draws);
        assert_eq!(stats.games + stats.truncated, 500);
        assert!(stats.mean_steps > 0.0);
    }

    #[test]
    fn run_match_rejects_zero_games() {
        let kernel = kernel_with(6, 6, 0.4, vec![], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(3, 3));
        assert!(matches!(
            run_match(&kernel, &p_pol, &e_pol, s0, 0, 1, 100),
            Err(SimError::ZeroGames)
        ));
    }

    #[test]
    fn run_match_is_reproducible() {
        let kernel = kernel_with(7, 7, 0.4, vec![], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let a = run_match(&kernel, &p_pol, &e_pol, s0, 300, 5, 1000).unwrap();
        let b = run_match(&kernel, &p_pol, &e_pol, s0, 300, 5, 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_reward_matches_exact_value() {
        let kernel = kernel_with(7, 7, 0.4, vec![], 0.5);
        let p_pol = level0_policy(&kernel, Agent::Pursuer, Level0Variant::Uniform);
        let e_pol = level0_policy(&kernel, Agent::Evader, Level0Variant::Uniform);
        let s0 = JointState::new(Cell::new(2, 3), Cell::new(4, 3));
        let params = SolveParams::default();
        let v = policy_evaluation(&kernel, &p_pol, &e_pol, Agent::Pursuer, &params).unwrap();
        let stats = run_match(&kernel, &p_pol, &e_pol, s0, 4000, 31, 5000).unwrap();
        assert_eq!(stats.truncated, 0);
        let se = (1.0 / stats.games as f64).sqrt();
        assert!(
            (stats.mean_terminal_reward() - v.at(&kernel, s0)).abs() <= 3.0 * se,
            "empirical {} exact {}",
            stats.mean_terminal_reward(),
            v.at(&kernel, s0)
        );
    }
}

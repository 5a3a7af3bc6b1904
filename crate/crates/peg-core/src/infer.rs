//! Maximum-likelihood inference of the opponent's rationality level from
//! observed state trajectories, and the dynamic controller that adapts
//! its own level to one above the inferred one.
//!
//! The likelihood of a window of transitions under hypothesis "opponent
//! plays level c" is the product of joint-policy transition probabilities
//! with both agents' action distributions marginalized out; observed
//! actions are not used. Transitions that are impossible under a
//! hypothesis contribute a fixed log floor instead of -inf so that
//! candidates stay comparable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Agent, JointState};
use crate::mcam::TransitionKernel;
use crate::simulate::{Outcome, SimError, Trajectory};
use crate::solver::{Hierarchy, Policy, SolveError};

/// Log-likelihood contribution of a transition with zero probability
/// under the hypothesis.
pub const LOG_FLOOR: f64 = -50.0;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("window state ({0}, {1})/({2}, {3}) is not interior")]
    NotInterior(u16, u16, u16, u16),
    #[error("own level count {got} does not match {want} transitions")]
    LevelCountMismatch { got: usize, want: usize },
    #[error("observer k_max must be at least 1")]
    ZeroKMax,
    #[error("own level {level} exceeds observer k_max {k_max}")]
    OwnLevelTooHigh { level: usize, k_max: usize },
    #[error("trajectory has no states")]
    EmptyTrajectory,
    #[error("window length must be at least 1 transition")]
    ZeroWindow,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Likelihood state over the candidate opponent levels at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub candidate_levels: Vec<usize>,
    pub log_likelihoods: Vec<f64>,
    /// Argmax candidate; ties break toward the lowest level.
    pub mle_level: usize,
    /// True when some transition in the window was impossible under at
    /// least one hypothesis and was floored.
    pub floored: bool,
}

impl Belief {
    /// Exponentiated, normalized likelihoods (sums to one).
    pub fn normalized_probabilities(&self) -> Vec<f64> {
        let max = self.log_likelihoods.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = self.log_likelihoods.iter().map(|&ll| (ll - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    fn from_lls(candidate_levels: Vec<usize>, log_likelihoods: Vec<f64>, floored: bool) -> Belief {
        let mut mle = candidate_levels[0];
        let mut best = log_likelihoods[0];
        for (i, &ll) in log_likelihoods.iter().enumerate().skip(1) {
            if ll > best {
                best = ll;
                mle = candidate_levels[i];
            }
        }
        Belief { candidate_levels, log_likelihoods, mle_level: mle, floored }
    }
}

/// Joint-policy transition probability P(next | s, policy pair), both
/// policies marginalized.
fn pair_step_prob(
    kernel: &TransitionKernel,
    rank: usize,
    p_policy: &Policy,
    e_policy: &Policy,
    next_index: usize,
) -> f64 {
    let succ = kernel.successors_of_rank(rank);
    let Some(slot) = succ.iter().position(|&j| j as usize == next_index) else {
        return 0.0;
    };
    let n_e = kernel.n_actions(Agent::Evader);
    let mut total = 0.0;
    for ap in 0..kernel.n_actions(Agent::Pursuer) {
        let wp = p_policy.prob(rank, ap);
        if wp == 0.0 {
            continue;
        }
        for ae in 0..n_e {
            let w = wp * e_policy.prob(rank, ae);
            if w == 0.0 {
                continue;
            }
            total += w * kernel.row(rank, ap * n_e + ae)[slot];
        }
    }
    total
}

fn policies_for(
    hierarchy: &Hierarchy,
    observer: Agent,
    own_level: usize,
    opp_level: usize,
) -> Result<(&Policy, &Policy), InferError> {
    let own = hierarchy.policy(observer, own_level)?;
    let opp = hierarchy.policy(observer.opponent(), opp_level)?;
    Ok(match observer {
        Agent::Pursuer => (own, opp),
        Agent::Evader => (opp, own),
    })
}

/// Sum of per-transition log-probabilities of a window of states, with
/// the observer's own level allowed to vary per stage.
///
/// `own_levels[n]` is the level the observer played on the transition
/// from `states[n]` to `states[n + 1]`, so it must have exactly
/// `states.len() - 1` entries. A window with no transitions has
/// log-likelihood zero. Returns the value and a flag marking floored
/// (zero-probability) transitions.
pub fn window_log_likelihood(
    kernel: &TransitionKernel,
    hierarchy: &Hierarchy,
    observer: Agent,
    own_levels: &[usize],
    opp_level: usize,
    states: &[JointState],
) -> Result<(f64, bool), InferError> {
    if states.is_empty() {
        return Err(InferError::EmptyTrajectory);
    }
    let transitions = states.len() - 1;
    if own_levels.len() != transitions {
        return Err(InferError::LevelCountMismatch { got: own_levels.len(), want: transitions });
    }
    let mut total = 0.0;
    let mut floored = false;
    for n in 0..transitions {
        let s = states[n];
        let rank = kernel.rank_of_state(s).ok_or(InferError::NotInterior(
            s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y,
        ))?;
        let (p_pol, e_pol) = policies_for(hierarchy, observer, own_levels[n], opp_level)?;
        let next_index = kernel.state_index(states[n + 1]);
        let p = pair_step_prob(kernel, rank, p_pol, e_pol, next_index);
        if p > 0.0 {
            total += p.ln();
        } else {
            total += LOG_FLOOR;
            floored = true;
        }
    }
    Ok((total, floored))
}

fn belief_over_candidates(
    kernel: &TransitionKernel,
    hierarchy: &Hierarchy,
    observer: Agent,
    observer_k_max: usize,
    own_levels: &[usize],
    states: &[JointState],
) -> Result<Belief, InferError> {
    let candidates: Vec<usize> = (0..observer_k_max).collect();
    let mut lls = Vec::with_capacity(candidates.len());
    let mut floored = false;
    for &c in &candidates {
        let (ll, f) = window_log_likelihood(kernel, hierarchy, observer, own_levels, c, states)?;
        lls.push(ll);
        floored |= f;
    }
    Ok(Belief::from_lls(candidates, lls, floored))
}

/// Fixed-level inference: the observer played `my_level` throughout and
/// re-estimates the opponent's level after every observed transition,
/// using a moving window of at most `window_w` transitions.
///
/// Candidates are the levels the observer has access to,
/// `{0, ..., observer_k_max - 1}`. Returns one belief per stage.
pub fn infer_fixed(
    kernel: &TransitionKernel,
    hierarchy: &Hierarchy,
    observer: Agent,
    my_level: usize,
    observer_k_max: usize,
    states: &[JointState],
    window_w: usize,
) -> Result<Vec<Belief>, InferError> {
    if observer_k_max == 0 {
        return Err(InferError::ZeroKMax);
    }
    if my_level > observer_k_max {
        return Err(InferError::OwnLevelTooHigh { level: my_level, k_max: observer_k_max });
    }
    if window_w == 0 {
        return Err(InferError::ZeroWindow);
    }
    if states.is_empty() {
        return Err(InferError::EmptyTrajectory);
    }
    let transitions = states.len() - 1;
    let mut beliefs = Vec::with_capacity(transitions);
    for stage in 1..=transitions {
        let take = stage.min(window_w);
        let window = &states[stage - take..=stage];
        let own_levels = vec![my_level; take];
        beliefs.push(belief_over_candidates(
            kernel,
            hierarchy,
            observer,
            observer_k_max,
            &own_levels,
            window,
        )?);
    }
    Ok(beliefs)
}

/// One row of a dynamic-level schedule: the level played on the stage's
/// transition and the opponent level inferred right after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub stage: usize,
    pub own_level: usize,
    pub inferred_opponent: usize,
}

/// Plays one level above the inferred opponent level, capped at its own
/// maximum, re-inferring from a sliding window after each observed
/// transition. Before any evidence it assumes a level-0 opponent and
/// plays level 1.
#[derive(Debug, Clone)]
pub struct DynamicLevelController {
    agent: Agent,
    k_max: usize,
    window_w: usize,
    last_state: JointState,
    /// (state the transition left from, own level played on it)
    window: Vec<(JointState, usize)>,
    current_level: usize,
    stage: usize,
    schedule: Vec<ScheduleEntry>,
}

impl DynamicLevelController {
    pub fn new(agent: Agent, k_max: usize, window_w: usize, s0: JointState) -> Result<Self, InferError> {
        if k_max == 0 {
            return Err(InferError::ZeroKMax);
        }
        if window_w == 0 {
            return Err(InferError::ZeroWindow);
        }
        Ok(DynamicLevelController {
            agent,
            k_max,
            window_w,
            last_state: s0,
            window: Vec::new(),
            current_level: 1.min(k_max),
            stage: 0,
            schedule: Vec::new(),
        })
    }

    /// Level to play on the upcoming transition.
    pub fn current_level(&self) -> usize {
        self.current_level
    }

    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }

    /// Ingests the transition out of the last observed state, refreshes
    /// the estimate and picks the level for the next stage.
    pub fn observe(
        &mut self,
        kernel: &TransitionKernel,
        hierarchy: &Hierarchy,
        next_state: JointState,
    ) -> Result<Belief, InferError> {
        let played = self.current_level;
        self.window.push((self.last_state, played));
        if self.window.len() > self.window_w {
            self.window.remove(0);
        }

        let mut states: Vec<JointState> = self.window.iter().map(|(s, _)| *s).collect();
        states.push(next_state);
        let own_levels: Vec<usize> = self.window.iter().map(|(_, l)| *l).collect();
        let belief = belief_over_candidates(
            kernel,
            hierarchy,
            self.agent,
            self.k_max,
            &own_levels,
            &states,
        )?;

        self.stage += 1;
        self.schedule.push(ScheduleEntry {
            stage: self.stage,
            own_level: played,
            inferred_opponent: belief.mle_level,
        });
        self.current_level = (belief.mle_level + 1).min(self.k_max);
        self.last_state = next_state;
        Ok(belief)
    }
}

/// A full game played by a dynamic-level agent against a fixed-level
/// opponent.
#[derive(Debug, Clone)]
pub struct DynamicGame {
    pub trajectory: Trajectory,
    pub schedule: Vec<ScheduleEntry>,
    pub beliefs: Vec<Belief>,
    /// Level the controller would play next (its settled level at game
    /// end).
    pub final_level: usize,
}

/// Rolls out one game where `controller_agent` adapts its level online
/// while the opponent plays a fixed level. Sampling draws in the same
/// order as `rollout`: pursuer action, evader action, successor.
pub fn simulate_dynamic(
    kernel: &TransitionKernel,
    hierarchy: &Hierarchy,
    controller_agent: Agent,
    controller_k_max: usize,
    window_w: usize,
    opponent_level: usize,
    s0: JointState,
    seed: u64,
    max_steps: usize,
) -> Result<DynamicGame, InferError> {
    let mut rank = kernel.rank_of_state(s0).ok_or(SimError::StartNotInterior(
        s0.pursuer.x, s0.pursuer.y, s0.evader.x, s0.evader.y,
    ))?;
    let opp_policy = hierarchy.policy(controller_agent.opponent(), opponent_level)?;
    let mut controller = DynamicLevelController::new(controller_agent, controller_k_max, window_w, s0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut states = vec![s0];
    let mut actions = Vec::new();
    let mut times = vec![0.0];
    let mut beliefs = Vec::new();
    let mut clock = 0.0;
    let outcome = loop {
        if actions.len() >= max_steps {
            break Outcome::Truncated;
        }
        let own_policy = hierarchy.policy(controller_agent, controller.current_level())?;
        let (p_pol, e_pol) = match controller_agent {
            Agent::Pursuer => (own_policy, opp_policy),
            Agent::Evader => (opp_policy, own_policy),
        };
        let sample = |policy: &Policy, rank: usize, rng: &mut ChaCha8Rng| -> usize {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for a in 0..policy.n_actions {
                acc += policy.prob(rank, a);
                if u < acc {
                    return a;
                }
            }
            policy.n_actions - 1
        };
        let ap = sample(p_pol, rank, &mut rng);
        let ae = sample(e_pol, rank, &mut rng);
        let row = kernel.row(rank, ap * kernel.n_actions(Agent::Evader) + ae);
        let u: f64 = rng.gen();
        let mut slot = crate::mcam::N_SLOTS - 1;
        let mut acc = 0.0;
        for (k, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                slot = k;
                break;
            }
        }
        let next_index = kernel.successors_of_rank(rank)[slot] as usize;
        let next_state = kernel.state_at(next_index);

        clock += kernel.holding_time_of_rank(rank);
        actions.push(crate::mcam::JointAction::new(ap, ae));
        states.push(next_state);
        times.push(clock);
        beliefs.push(controller.observe(kernel, hierarchy, next_state)?);

        match kernel.rank_of_index(next_index) {
            Some(r) => rank = r,
            None => break Outcome::Terminal(kernel.class_of_index(next_index)),
        }
    };

    let final_level = controller.current_level();
    Ok(DynamicGame {
        trajectory: Trajectory { states, actions, times, outcome },
        schedule: controller.schedule().to_vec(),
        beliefs,
        final_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AgentSpec, Cell, GridSpec, WindField};
    use crate::mcam::{build_kernel, GameModel, JointAction};
    use crate::simulate::{rollout, splitmix64};
    use crate::solver::{build_hierarchy, Level0Variant, SolveParams};

    fn kernel_6x6() -> TransitionKernel {
        let grid = GridSpec::with_default_capture(
            6,
            6,
            1.0,
            [Cell::new(3, 3)],
            [Cell::new(1, 3)],
        )
        .unwrap();
        let wind = crate::grid::generate_wind(&grid, 17, 0.3, 0.4).unwrap();
        let m = GameModel::new(grid, wind, AgentSpec::compass(1.0), AgentSpec::compass(1.0)).unwrap();
        build_kernel(m).unwrap()
    }

    fn hierarchy_for(kernel: &TransitionKernel, depth: usize) -> Hierarchy {
        build_hierarchy(kernel, depth, depth, Level0Variant::SafeUniform, &SolveParams::default())
            .unwrap()
    }

    #[test]
    fn empty_window_has_zero_log_likelihood() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 2);
        let s = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let (ll, floored) =
            window_log_likelihood(&kernel, &h, Agent::Evader, &[], 1, &[s]).unwrap();
        assert_eq!(ll, 0.0);
        assert!(!floored);
    }

    #[test]
    fn single_transition_matches_marginalized_probability() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 2);
        let s = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let next = JointState::new(Cell::new(2, 2), Cell::new(4, 5));
        let (ll, floored) =
            window_log_likelihood(&kernel, &h, Agent::Evader, &[2], 1, &[s, next]).unwrap();
        assert!(!floored);

        // oracle: brute-force sum over joint actions from the sparse view
        let p_pol = h.policy(Agent::Pursuer, 1).unwrap();
        let e_pol = h.policy(Agent::Evader, 2).unwrap();
        let rank = kernel.rank_of_state(s).unwrap();
        let mut expect = 0.0;
        for ap in 0..4 {
            for ae in 0..4 {
                let dist = kernel.distribution(s, JointAction::new(ap, ae)).unwrap();
                if let Some((_, p)) = dist.iter().find(|(t, _)| *t == next) {
                    expect += p_pol.prob(rank, ap) * e_pol.prob(rank, ae) * p;
                }
            }
        }
        assert!((ll - expect.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_decomposes_over_transitions() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 3);
        let p_pol = h.policy(Agent::Pursuer, 2).unwrap();
        let e_pol = h.policy(Agent::Evader, 3).unwrap();
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let traj = rollout(&kernel, p_pol, e_pol, s0, 11, 50).unwrap();
        let n = traj.states.len().min(6);
        let states = &traj.states[..n];
        let levels = vec![3usize; n - 1];
        let (full, _) =
            window_log_likelihood(&kernel, &h, Agent::Evader, &levels, 2, states).unwrap();
        let mut acc = 0.0;
        for t in 0..n - 1 {
            let (step, _) = window_log_likelihood(
                &kernel,
                &h,
                Agent::Evader,
                &[3],
                2,
                &states[t..=t + 1],
            )
            .unwrap();
            acc += step;
        }
        assert!((full - acc).abs() < 1e-12);
    }

    #[test]
    fn impossible_transition_is_floored() {
        // a step changes at most one coordinate, so observing both agents
        // move at once has probability zero under every hypothesis
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 2);
        let s = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let next = JointState::new(Cell::new(3, 2), Cell::new(4, 5));
        let (ll, floored) =
            window_log_likelihood(&kernel, &h, Agent::Evader, &[1], 0, &[s, next]).unwrap();
        assert!(floored);
        assert_eq!(ll, LOG_FLOOR);
    }

    #[test]
    fn beliefs_normalize_and_clamp_window() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 3);
        let p_pol = h.policy(Agent::Pursuer, 2).unwrap();
        let e_pol = h.policy(Agent::Evader, 3).unwrap();
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let traj = rollout(&kernel, p_pol, e_pol, s0, 3, 60).unwrap();
        // window far larger than the trajectory: uses all history
        let beliefs =
            infer_fixed(&kernel, &h, Agent::Evader, 3, 3, &traj.states, 10_000).unwrap();
        assert_eq!(beliefs.len(), traj.steps());
        for b in &beliefs {
            assert_eq!(b.candidate_levels, vec![0, 1, 2]);
            let probs = b.normalized_probabilities();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(b.log_likelihoods.iter().all(|&ll| ll <= 1e-12));
        }
    }

    #[test]
    fn mle_recovers_true_level_most_of_the_time() {
        // arena with a wall the pursuer must route around, so its levels
        // separate on visited states
        let grid = GridSpec::with_default_capture(
            8,
            8,
            1.0,
            [Cell::new(4, 3), Cell::new(4, 4)],
            [Cell::new(1, 4)],
        )
        .unwrap();
        let wind = crate::grid::generate_wind(&grid, 9, 0.4, 0.4).unwrap();
        let m = GameModel::new(grid, wind, AgentSpec::compass(1.0), AgentSpec::compass(1.0)).unwrap();
        let kernel = build_kernel(m).unwrap();
        let h = hierarchy_for(&kernel, 3);
        let p_pol = h.policy(Agent::Pursuer, 2).unwrap();
        let e_pol = h.policy(Agent::Evader, 3).unwrap();
        let s0 = JointState::new(Cell::new(2, 4), Cell::new(6, 4));
        let mut hits = 0;
        let n = 200;
        for g in 0..n {
            let traj = rollout(&kernel, p_pol, e_pol, s0, splitmix64(900 + g), 600).unwrap();
            if traj.steps() == 0 {
                continue;
            }
            let beliefs =
                infer_fixed(&kernel, &h, Agent::Evader, 3, 3, &traj.states, 10_000).unwrap();
            if beliefs.last().unwrap().mle_level == 2 {
                hits += 1;
            }
        }
        assert!(hits * 2 > n, "recovered {hits}/{n}");
    }

    #[test]
    fn coinciding_policies_yield_identical_likelihoods() {
        // levels beyond a ladder fixed point repeat exactly, so their
        // hypotheses are indistinguishable on any trajectory
        let grid = GridSpec::with_default_capture(6, 6, 1.0, [], []).unwrap();
        let wind = WindField::calm(&grid, 0.4).unwrap();
        let m = GameModel::new(grid, wind, AgentSpec::compass(1.0), AgentSpec::compass(1.0)).unwrap();
        let kernel = build_kernel(m).unwrap();
        let h = build_hierarchy(&kernel, 8, 8, Level0Variant::Uniform, &SolveParams::default())
            .unwrap();
        let Some(fp) = h.fixed_point else { return };
        let (a, b) = (fp.level, fp.level + 2);
        let opp = fp.agent; // hypotheses are about this agent's levels
        let observer = opp.opponent();
        if b >= h.k_max(observer) {
            return;
        }
        let p_pol = h.policy(Agent::Pursuer, 1).unwrap();
        let e_pol = h.policy(Agent::Evader, 1).unwrap();
        let s0 = JointState::new(Cell::new(1, 2), Cell::new(4, 3));
        let traj = rollout(&kernel, p_pol, e_pol, s0, 5, 60).unwrap();
        let levels = vec![1usize; traj.steps()];
        let (ll_a, _) =
            window_log_likelihood(&kernel, &h, observer, &levels, a, &traj.states).unwrap();
        let (ll_b, _) =
            window_log_likelihood(&kernel, &h, observer, &levels, b, &traj.states).unwrap();
        assert_eq!(ll_a, ll_b);
    }

    #[test]
    fn controller_with_k_max_one_always_plays_one() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 2);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let game =
            simulate_dynamic(&kernel, &h, Agent::Pursuer, 1, 5, 1, s0, 123, 200).unwrap();
        assert!(game.schedule.iter().all(|e| e.own_level == 1));
        assert_eq!(game.final_level, 1);
    }

    #[test]
    fn schedule_obeys_level_law() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 4);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let game =
            simulate_dynamic(&kernel, &h, Agent::Evader, 4, 6, 2, s0, 77, 300).unwrap();
        assert_eq!(game.schedule.len(), game.trajectory.steps());
        // first stage plays the bootstrap level 1
        assert_eq!(game.schedule[0].own_level, 1);
        for w in game.schedule.windows(2) {
            let expect = (w[0].inferred_opponent + 1).min(4);
            assert_eq!(w[1].own_level, expect);
        }
        let last = game.schedule.last().unwrap();
        assert_eq!(game.final_level, (last.inferred_opponent + 1).min(4));
    }

    #[test]
    fn dynamic_game_is_deterministic() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 3);
        let s0 = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        let a = simulate_dynamic(&kernel, &h, Agent::Pursuer, 3, 8, 2, s0, 5, 300).unwrap();
        let b = simulate_dynamic(&kernel, &h, Agent::Pursuer, 3, 8, 2, s0, 5, 300).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.schedule, b.schedule);
    }

    #[test]
    fn infer_fixed_validates_inputs() {
        let kernel = kernel_6x6();
        let h = hierarchy_for(&kernel, 2);
        let s = JointState::new(Cell::new(2, 2), Cell::new(4, 4));
        assert!(matches!(
            infer_fixed(&kernel, &h, Agent::Evader, 1, 0, &[s, s], 5),
            Err(InferError::ZeroKMax)
        ));
        assert!(matches!(
            infer_fixed(&kernel, &h, Agent::Evader, 5, 2, &[s, s], 5),
            Err(InferError::OwnLevelTooHigh { .. })
        ));
        assert!(matches!(
            infer_fixed(&kernel, &h, Agent::Evader, 1, 2, &[], 5),
            Err(InferError::EmptyTrajectory)
        ));
        assert!(matches!(
            infer_fixed(&kernel, &h, Agent::Evader, 1, 2, &[s, s], 0),
            Err(InferError::ZeroWindow)
        ));
    }
}

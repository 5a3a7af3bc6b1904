//! Stochastic pursuit-evasion games on a grid, solved for bounded-rational
//! agents.
//!
//! The pipeline: [`grid`] defines the arena and terminal classes, [`mcam`]
//! discretizes the noisy continuous dynamics into a locally consistent
//! competitive MDP, [`solver`] builds level-k policy ladders by iterated
//! best-response value iteration, [`simulate`] plays seeded Monte Carlo
//! games, and [`infer`] estimates an opponent's rationality level from
//! observed play. [`cache`] and [`export`] handle the on-disk artifacts.

pub mod cache;
pub mod export;
pub mod grid;
pub mod infer;
pub mod mcam;
pub mod simulate;
pub mod solver;

pub use grid::{
    classify_state, evader_reward, generate_wind, reward_for, terminal_reward, Agent, AgentSpec,
    Cell, GridSpec, JointState, TerminalClass, WindField,
};
pub use infer::{
    infer_fixed, simulate_dynamic, window_log_likelihood, Belief, DynamicGame,
    DynamicLevelController, InferError, ScheduleEntry, LOG_FLOOR,
};
pub use mcam::{
    build_kernel, drift, holding_time, q_factor, transition_probs, GameModel, JointAction,
    McamError, TransitionKernel,
};
pub use simulate::{
    default_max_steps, level_matrix_experiment, rollout, run_match, splitmix64, LevelColumn,
    LevelMatrix, MatchStats, Outcome, SimError, Trajectory,
};
pub use solver::{
    best_response, build_hierarchy, level0_policy, nash_check, outcome_probabilities,
    policy_evaluation, FixedPoint, Hierarchy, Level0Variant, LevelEntry, NashReport, Policy,
    PolicyTable, SolveError, SolveParams, ValueFunction,
};

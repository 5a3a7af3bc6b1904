//! Plain-text exports: CSV tables for wind fields, trajectories, policies,
//! values, belief heatmaps and level schedules, plus the aligned-text
//! match reports. Floats are written with Rust's shortest round-trip
//! formatting, so re-importing a table reproduces the original bits.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Agent, Cell, GridSpec, JointState, WindField};
use crate::infer::{Belief, ScheduleEntry};
use crate::mcam::TransitionKernel;
use crate::simulate::{LevelMatrix, Trajectory};
use crate::solver::{Policy, ValueFunction};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("trajectory file {0} contains no states")]
    EmptyTrajectory(String),
    #[error("wind table covers {got} cells, grid has {want}")]
    WindCoverage { got: usize, want: usize },
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> ExportError {
    ExportError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Flat wind table: `x,y,wx,wy`, one row per cell in index order.
pub fn write_wind_csv(path: &Path, grid: &GridSpec, wind: &WindField) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,wx,wy")?;
    for i in 0..grid.n_cells() {
        let c = grid.cell_at(i);
        writeln!(w, "{},{},{},{}", c.x, c.y, wind.mean_x[i], wind.mean_y[i])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a wind table back; every grid cell must appear exactly once.
pub fn read_wind_csv(path: &Path, grid: &GridSpec, sigma: f64) -> Result<WindField, ExportError> {
    let reader = BufReader::new(File::open(path)?);
    let n = grid.n_cells();
    let mut mean_x = vec![f64::NAN; n];
    let mut mean_y = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    let mut count = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(path, lineno + 1, "expected 4 fields: x,y,wx,wy"));
        }
        let x: u16 = fields[0].trim().parse().map_err(|e| parse_err(path, lineno + 1, format!("x: {e}")))?;
        let y: u16 = fields[1].trim().parse().map_err(|e| parse_err(path, lineno + 1, format!("y: {e}")))?;
        let cell = Cell::new(x, y);
        if !grid.in_bounds(cell) {
            return Err(parse_err(path, lineno + 1, format!("cell ({x}, {y}) outside the grid")));
        }
        let i = grid.cell_index(cell);
        if seen[i] {
            return Err(parse_err(path, lineno + 1, format!("duplicate cell ({x}, {y})")));
        }
        seen[i] = true;
        mean_x[i] = fields[2].trim().parse().map_err(|e| parse_err(path, lineno + 1, format!("wx: {e}")))?;
        mean_y[i] = fields[3].trim().parse().map_err(|e| parse_err(path, lineno + 1, format!("wy: {e}")))?;
        count += 1;
    }
    if count != n {
        return Err(ExportError::WindCoverage { got: count, want: n });
    }
    Ok(WindField::new(grid, sigma, mean_x, mean_y)?)
}

/// Trajectory table: one row per visited state; action columns are empty
/// on the final row.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,pursuer_x,pursuer_y,evader_x,evader_y,pursuer_action,evader_action,cum_time")?;
    for (n, s) in traj.states.iter().enumerate() {
        let (pa, ea) = match traj.actions.get(n) {
            Some(a) => (a.pursuer.to_string(), a.evader.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            n, s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y, pa, ea, traj.times[n]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the state sequence of a trajectory table; actions and times are
/// ignored (inference only needs states).
pub fn read_trajectory_states(path: &Path) -> Result<Vec<JointState>, ExportError> {
    let reader = BufReader::new(File::open(path)?);
    let mut states = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            return Err(parse_err(path, lineno + 1, "expected at least 5 fields"));
        }
        let coord = |idx: usize, name: &str| -> Result<u16, ExportError> {
            fields[idx]
                .trim()
                .parse()
                .map_err(|e| parse_err(path, lineno + 1, format!("{name}: {e}")))
        };
        let px = coord(1, "pursuer_x")?;
        let py = coord(2, "pursuer_y")?;
        let ex = coord(3, "evader_x")?;
        let ey = coord(4, "evader_y")?;
        states.push(JointState::new(Cell::new(px, py), Cell::new(ex, ey)));
    }
    if states.is_empty() {
        return Err(ExportError::EmptyTrajectory(path.display().to_string()));
    }
    Ok(states)
}

/// Per-interior-state action probabilities:
/// `state_index,pursuer_x,...,p0..p{n-1}`.
pub fn write_policy_csv(path: &Path, kernel: &TransitionKernel, policy: &Policy) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "state_index,pursuer_x,pursuer_y,evader_x,evader_y")?;
    for a in 0..policy.n_actions {
        write!(w, ",p{a}")?;
    }
    writeln!(w)?;
    for rank in 0..kernel.n_interior() {
        let j = kernel.index_of_rank(rank);
        let s = kernel.state_at(j);
        write!(w, "{},{},{},{},{}", j, s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y)?;
        for a in 0..policy.n_actions {
            write!(w, ",{}", policy.prob(rank, a))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Value table over all joint states.
pub fn write_value_csv(path: &Path, kernel: &TransitionKernel, value: &ValueFunction) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "state_index,pursuer_x,pursuer_y,evader_x,evader_y,value")?;
    for j in 0..kernel.n_joint_states() {
        let s = kernel.state_at(j);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            j, s.pursuer.x, s.pursuer.y, s.evader.x, s.evader.y, value.at_index(j)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Heatmap table of normalized per-stage beliefs: `stage,level,probability`.
pub fn write_belief_heatmap_csv(path: &Path, beliefs: &[Belief]) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "stage,level,probability")?;
    for (i, belief) in beliefs.iter().enumerate() {
        let probs = belief.normalized_probabilities();
        for (lvl, p) in belief.candidate_levels.iter().zip(probs.iter()) {
            writeln!(w, "{},{},{}", i + 1, lvl, p)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Level schedule log: `stage,own_level,inferred_level`.
pub fn write_schedule_csv(path: &Path, schedule: &[ScheduleEntry]) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "stage,own_level,inferred_level")?;
    for e in schedule {
        writeln!(w, "{},{},{}", e.stage, e.own_level, e.inferred_opponent)?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned-text report of a level sweep, in the shape of the win-rate
/// tables: win percentages with the capture/evasion breakdown, plus raw
/// counts.
pub fn render_level_matrix_text(matrix: &LevelMatrix) -> String {
    let varying = matrix.fixed_agent.opponent();
    let (win_label, cause_label) = match varying {
        Agent::Pursuer => ("Pursuer Wins %", "  Due to Capture %"),
        Agent::Evader => ("Evader Wins %", "  Due to Evasion %"),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} fixed at level {} | {} games per column",
        matrix.fixed_agent.label(),
        matrix.fixed_level,
        matrix.n_games
    );
    let _ = write!(out, "{:<22}", "");
    for col in &matrix.columns {
        let _ = write!(out, "{:>10}", format!("k = {}", col.varying_level));
    }
    out.push('\n');
    let _ = write!(out, "{win_label:<22}");
    for col in &matrix.columns {
        let rate = match varying {
            Agent::Pursuer => col.stats.pursuer_win_rate(),
            Agent::Evader => col.stats.evader_win_rate(),
        };
        let _ = write!(out, "{:>10.1}", 100.0 * rate);
    }
    out.push('\n');
    let _ = write!(out, "{cause_label:<22}");
    for col in &matrix.columns {
        let rate = match varying {
            Agent::Pursuer => col.stats.capture_rate(),
            Agent::Evader => col.stats.evasion_rate(),
        };
        let _ = write!(out, "{:>10.1}", 100.0 * rate);
    }
    out.push('\n');
    let _ = write!(out, "{:<22}", "  wins / games");
    for col in &matrix.columns {
        let wins = match varying {
            Agent::Pursuer => col.stats.pursuer_wins,
            Agent::Evader => col.stats.evader_wins,
        };
        let _ = write!(out, "{:>10}", format!("{}/{}", wins, col.stats.games));
    }
    out.push('\n');
    out
}

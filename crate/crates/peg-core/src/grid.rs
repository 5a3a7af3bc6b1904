//! The game board: a rectangular grid of square cells with obstacles, an
//! evasion region and a stochastic wind field, plus the classification of
//! joint pursuer/evader states into interior and terminal categories.
//!
//! The outermost ring of cells is always treated as part of the crash
//! region, so agent positions never index outside the grid.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid must be at least 2x2 cells, got {0}x{1}")]
    TooSmall(u16, u16),
    #[error("cell size must be positive, got {0}")]
    NonPositiveCellSize(f64),
    #[error("capture radius must be nonnegative, got {0}")]
    NegativeCaptureRadius(f64),
    #[error("cell ({0}, {1}) is outside the {2}x{3} grid")]
    OutOfBounds(u16, u16, u16, u16),
    #[error("cell ({0}, {1}) is listed as both obstacle and evasion")]
    ObstacleEvasionOverlap(u16, u16),
    #[error("wind field has {got} entries per component, grid has {want} cells")]
    WindSizeMismatch { got: usize, want: usize },
    #[error("noise intensity must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("agent speed must be nonnegative, got {0}")]
    NegativeSpeed(f64),
    #[error("action set must not be empty")]
    EmptyActionSet,
    #[error("action set contains duplicate heading {0}")]
    DuplicateHeading(f64),
}

/// A cell index pair (x, y), with x running along the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u16, u16)", into = "(u16, u16)")]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub fn new(x: u16, y: u16) -> Self {
        Cell { x, y }
    }
}

impl From<(u16, u16)> for Cell {
    fn from(v: (u16, u16)) -> Self {
        Cell { x: v.0, y: v.1 }
    }
}

impl From<Cell> for (u16, u16) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

/// Which side of the game an object belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Pursuer,
    Evader,
}

impl Agent {
    pub fn opponent(self) -> Agent {
        match self {
            Agent::Pursuer => Agent::Evader,
            Agent::Evader => Agent::Pursuer,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Agent::Pursuer => "pursuer",
            Agent::Evader => "evader",
        }
    }
}

impl std::fmt::Display for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Static geometry of the arena.
///
/// Perimeter cells are crash cells by construction; `obstacles` and
/// `evasion` must lie within the grid and be disjoint from each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    width: u16,
    height: u16,
    cell_size: f64,
    obstacles: BTreeSet<Cell>,
    evasion: BTreeSet<Cell>,
    capture_radius: f64,
}

impl GridSpec {
    pub fn new(
        width: u16,
        height: u16,
        cell_size: f64,
        obstacles: impl IntoIterator<Item = Cell>,
        evasion: impl IntoIterator<Item = Cell>,
        capture_radius: f64,
    ) -> Result<Self, GridError> {
        if width < 2 || height < 2 {
            return Err(GridError::TooSmall(width, height));
        }
        if !(cell_size > 0.0) {
            return Err(GridError::NonPositiveCellSize(cell_size));
        }
        if !(capture_radius >= 0.0) {
            return Err(GridError::NegativeCaptureRadius(capture_radius));
        }
        let obstacles: BTreeSet<Cell> = obstacles.into_iter().collect();
        let evasion: BTreeSet<Cell> = evasion.into_iter().collect();
        let spec = GridSpec {
            width,
            height,
            cell_size,
            obstacles,
            evasion,
            capture_radius,
        };
        for c in spec.obstacles.iter().chain(spec.evasion.iter()) {
            if !spec.in_bounds(*c) {
                return Err(GridError::OutOfBounds(c.x, c.y, width, height));
            }
        }
        if let Some(c) = spec.obstacles.intersection(&spec.evasion).next() {
            return Err(GridError::ObstacleEvasionOverlap(c.x, c.y));
        }
        Ok(spec)
    }

    /// Grid with the default same-cell capture radius of half a cell.
    pub fn with_default_capture(
        width: u16,
        height: u16,
        cell_size: f64,
        obstacles: impl IntoIterator<Item = Cell>,
        evasion: impl IntoIterator<Item = Cell>,
    ) -> Result<Self, GridError> {
        let rho = 0.5 * cell_size;
        Self::new(width, height, cell_size, obstacles, evasion, rho)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn capture_radius(&self) -> f64 {
        self.capture_radius
    }

    pub fn obstacles(&self) -> &BTreeSet<Cell> {
        &self.obstacles
    }

    pub fn evasion_cells(&self) -> &BTreeSet<Cell> {
        &self.evasion
    }

    pub fn n_cells(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Row-major cell index, y outer.
    pub fn cell_index(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let w = self.width as usize;
        Cell {
            x: (index % w) as u16,
            y: (index / w) as u16,
        }
    }

    pub fn is_perimeter(&self, c: Cell) -> bool {
        c.x == 0 || c.y == 0 || c.x == self.width - 1 || c.y == self.height - 1
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacles.contains(&c)
    }

    pub fn is_evasion(&self, c: Cell) -> bool {
        self.evasion.contains(&c)
    }

    /// Crash region for a single agent: obstacles plus the boundary ring.
    pub fn is_crash_cell(&self, c: Cell) -> bool {
        self.is_perimeter(c) || self.is_obstacle(c)
    }

    /// Centroid of a cell in length units.
    pub fn centroid(&self, c: Cell) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.cell_size,
            (c.y as f64 + 0.5) * self.cell_size,
        )
    }

    /// Euclidean distance between two cell centroids, in length units.
    pub fn centroid_distance(&self, a: Cell, b: Cell) -> f64 {
        let dx = a.x as f64 - b.x as f64;
        let dy = a.y as f64 - b.y as f64;
        (dx * dx + dy * dy).sqrt() * self.cell_size
    }
}

/// Mean wind velocity per cell plus the scalar noise intensity.
///
/// The noise intensity is spatially constant; the per-cell mean arrays are
/// stored in cell-index order and must match the grid they were built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindField {
    pub sigma: f64,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
}

impl WindField {
    pub fn new(grid: &GridSpec, sigma: f64, mean_x: Vec<f64>, mean_y: Vec<f64>) -> Result<Self, GridError> {
        if !(sigma >= 0.0) {
            return Err(GridError::NegativeSigma(sigma));
        }
        let want = grid.n_cells();
        if mean_x.len() != want || mean_y.len() != want {
            return Err(GridError::WindSizeMismatch {
                got: mean_x.len().min(mean_y.len()),
                want,
            });
        }
        Ok(WindField { sigma, mean_x, mean_y })
    }

    /// Calm field: zero mean everywhere.
    pub fn calm(grid: &GridSpec, sigma: f64) -> Result<Self, GridError> {
        let n = grid.n_cells();
        Self::new(grid, sigma, vec![0.0; n], vec![0.0; n])
    }

    /// Mean wind components at a cell.
    pub fn at(&self, grid: &GridSpec, c: Cell) -> (f64, f64) {
        let i = grid.cell_index(c);
        (self.mean_x[i], self.mean_y[i])
    }
}

/// Draws a mean wind field with per-cell independent direction and
/// magnitude.
///
/// Each cell uses its own stream of a counter-based generator (ChaCha8
/// keyed by `seed`, stream = cell index), so the field is a pure function
/// of `(grid, seed, max_speed)` and identical calls reproduce identical
/// bits. Magnitudes are uniform in `[0, max_speed)`, directions uniform
/// over the circle.
pub fn generate_wind(grid: &GridSpec, seed: u64, max_speed: f64, sigma: f64) -> Result<WindField, GridError> {
    if !(max_speed >= 0.0) {
        return Err(GridError::NegativeSpeed(max_speed));
    }
    let n = grid.n_cells();
    let mut mean_x = vec![0.0; n];
    let mut mean_y = vec![0.0; n];
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let angle = rng.gen_range(0.0..TAU);
        let mag = max_speed * rng.gen::<f64>();
        mean_x[i] = mag * angle.cos();
        mean_y[i] = mag * angle.sin();
    }
    WindField::new(grid, sigma, mean_x, mean_y)
}

/// Kinematics of one agent: constant speed and a finite set of heading
/// angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub speed: f64,
    pub headings: Vec<f64>,
}

impl AgentSpec {
    pub fn new(speed: f64, headings: Vec<f64>) -> Result<Self, GridError> {
        if !(speed >= 0.0) {
            return Err(GridError::NegativeSpeed(speed));
        }
        if headings.is_empty() {
            return Err(GridError::EmptyActionSet);
        }
        for (i, &h) in headings.iter().enumerate() {
            if headings[..i].contains(&h) {
                return Err(GridError::DuplicateHeading(h));
            }
        }
        Ok(AgentSpec { speed, headings })
    }

    /// The four compass headings {0, pi/2, pi, 3pi/2}.
    pub fn compass(speed: f64) -> Self {
        AgentSpec::new(speed, vec![0.0, FRAC_PI_2, PI, 1.5 * PI]).expect("compass headings are valid")
    }

    pub fn n_actions(&self) -> usize {
        self.headings.len()
    }
}

/// The joint position of both agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub pursuer: Cell,
    pub evader: Cell,
}

impl JointState {
    pub fn new(pursuer: Cell, evader: Cell) -> Self {
        JointState { pursuer, evader }
    }

    pub fn cell_of(&self, agent: Agent) -> Cell {
        match agent {
            Agent::Pursuer => self.pursuer,
            Agent::Evader => self.evader,
        }
    }
}

/// Outcome category of a joint state.
///
/// Crash classes take precedence over capture, which takes precedence
/// over evasion; every state falls in exactly one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum TerminalClass {
    Interior = 0,
    CrashPursuerOnly = 1,
    CrashEvaderOnly = 2,
    CrashBoth = 3,
    Capture = 4,
    Evasion = 5,
}

impl TerminalClass {
    pub fn is_terminal(self) -> bool {
        self != TerminalClass::Interior
    }

    pub(crate) fn from_u8(v: u8) -> Option<TerminalClass> {
        match v {
            0 => Some(TerminalClass::Interior),
            1 => Some(TerminalClass::CrashPursuerOnly),
            2 => Some(TerminalClass::CrashEvaderOnly),
            3 => Some(TerminalClass::CrashBoth),
            4 => Some(TerminalClass::Capture),
            5 => Some(TerminalClass::Evasion),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TerminalClass::Interior => "interior",
            TerminalClass::CrashPursuerOnly => "crash_pursuer_only",
            TerminalClass::CrashEvaderOnly => "crash_evader_only",
            TerminalClass::CrashBoth => "crash_both",
            TerminalClass::Capture => "capture",
            TerminalClass::Evasion => "evasion",
        }
    }
}

/// Classifies a joint state into its terminal class.
pub fn classify_state(grid: &GridSpec, s: JointState) -> Result<TerminalClass, GridError> {
    if !grid.in_bounds(s.pursuer) {
        return Err(GridError::OutOfBounds(s.pursuer.x, s.pursuer.y, grid.width, grid.height));
    }
    if !grid.in_bounds(s.evader) {
        return Err(GridError::OutOfBounds(s.evader.x, s.evader.y, grid.width, grid.height));
    }
    let crash_p = grid.is_crash_cell(s.pursuer);
    let crash_e = grid.is_crash_cell(s.evader);
    Ok(match (crash_p, crash_e) {
        (true, true) => TerminalClass::CrashBoth,
        (true, false) => TerminalClass::CrashPursuerOnly,
        (false, true) => TerminalClass::CrashEvaderOnly,
        (false, false) => {
            if grid.centroid_distance(s.pursuer, s.evader) <= grid.capture_radius {
                TerminalClass::Capture
            } else if grid.is_evasion(s.evader) {
                TerminalClass::Evasion
            } else {
                TerminalClass::Interior
            }
        }
    })
}

/// Terminal reward for the pursuer. Interior states carry no reward.
pub fn terminal_reward(cls: TerminalClass) -> f64 {
    match cls {
        TerminalClass::Capture => 1.0,
        TerminalClass::Evasion => -1.0,
        TerminalClass::CrashPursuerOnly => -1.0,
        TerminalClass::CrashEvaderOnly => 1.0,
        TerminalClass::CrashBoth => 0.0,
        TerminalClass::Interior => 0.0,
    }
}

/// Terminal reward from the evader's side; the game is zero-sum.
pub fn evader_reward(cls: TerminalClass) -> f64 {
    -terminal_reward(cls)
}

/// Terminal reward from `agent`'s side.
pub fn reward_for(agent: Agent, cls: TerminalClass) -> f64 {
    match agent {
        Agent::Pursuer => terminal_reward(cls),
        Agent::Evader => evader_reward(cls),
    }
}

//! Versioned binary files: the kernel cache and the solved hierarchy
//! bundle. Both are keyed by a content hash of the model (grid, wind,
//! agents and the discretization step) so stale artifacts are rejected at
//! load time. Layouts are little-endian throughout; see docs/formats.md.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{Agent, AgentSpec, Cell, GridSpec, TerminalClass, WindField};
use crate::mcam::{GameModel, TransitionKernel};
use crate::solver::{FixedPoint, Hierarchy, LevelEntry, Policy, PolicyTable, ValueFunction};

const KERNEL_MAGIC: &[u8; 8] = b"PEGKRN01";
const HIERARCHY_MAGIC: &[u8; 8] = b"PEGHIE01";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a {0} file")]
    BadMagic(&'static str),
    #[error("file key does not match the requested model")]
    KeyMismatch,
    #[error("truncated or corrupt file at byte {0}")]
    Truncated(usize),
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    Mcam(#[from] crate::mcam::McamError),
}

struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    fn new() -> Self {
        Enc { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }
}

struct Dec<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn new(data: &'a [u8]) -> Self {
        Dec { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CacheError> {
        if self.pos + n > self.data.len() {
            return Err(CacheError::Truncated(self.pos));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CacheError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CacheError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self) -> Result<Vec<f64>, CacheError> {
        let n = self.u64()? as usize;
        let bytes = self.take(n * 8)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn encode_cells(enc: &mut Enc, cells: impl Iterator<Item = Cell>, count: usize) {
    enc.u32(count as u32);
    for c in cells {
        enc.u32(c.x as u32);
        enc.u32(c.y as u32);
    }
}

fn decode_cells(dec: &mut Dec) -> Result<Vec<Cell>, CacheError> {
    let n = dec.u32()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = dec.u32()? as u16;
        let y = dec.u32()? as u16;
        out.push(Cell::new(x, y));
    }
    Ok(out)
}

fn encode_agent(enc: &mut Enc, spec: &AgentSpec) {
    enc.f64(spec.speed);
    enc.f64_slice(&spec.headings);
}

fn decode_agent(dec: &mut Dec) -> Result<AgentSpec, CacheError> {
    let speed = dec.f64()?;
    let headings = dec.f64_vec()?;
    Ok(AgentSpec::new(speed, headings)?)
}

fn encode_model(model: &GameModel) -> Vec<u8> {
    let mut enc = Enc::new();
    let grid = &model.grid;
    enc.u32(grid.width() as u32);
    enc.u32(grid.height() as u32);
    enc.f64(grid.cell_size());
    enc.f64(grid.capture_radius());
    encode_cells(&mut enc, grid.obstacles().iter().copied(), grid.obstacles().len());
    encode_cells(&mut enc, grid.evasion_cells().iter().copied(), grid.evasion_cells().len());
    enc.f64(model.wind.sigma);
    enc.f64_slice(&model.wind.mean_x);
    enc.f64_slice(&model.wind.mean_y);
    encode_agent(&mut enc, &model.pursuer);
    encode_agent(&mut enc, &model.evader);
    enc.buf
}

fn decode_model(dec: &mut Dec) -> Result<GameModel, CacheError> {
    let width = dec.u32()? as u16;
    let height = dec.u32()? as u16;
    let cell_size = dec.f64()?;
    let capture_radius = dec.f64()?;
    let obstacles = decode_cells(dec)?;
    let evasion = decode_cells(dec)?;
    let grid = GridSpec::new(width, height, cell_size, obstacles, evasion, capture_radius)?;
    let sigma = dec.f64()?;
    let mean_x = dec.f64_vec()?;
    let mean_y = dec.f64_vec()?;
    let wind = WindField::new(&grid, sigma, mean_x, mean_y)?;
    let pursuer = decode_agent(dec)?;
    let evader = decode_agent(dec)?;
    Ok(GameModel::new(grid, wind, pursuer, evader)?)
}

/// Content hash of a model; the cache key for kernels and hierarchies.
pub fn model_hash(model: &GameModel) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(encode_model(model));
    hasher.finalize().into()
}

pub fn hash_hex(key: &[u8; 32]) -> String {
    key.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the kernel with its model and content key.
pub fn write_kernel_cache(path: &Path, kernel: &TransitionKernel) -> Result<(), CacheError> {
    let mut enc = Enc::new();
    enc.buf.extend_from_slice(KERNEL_MAGIC);
    enc.buf.extend_from_slice(&model_hash(kernel.model()));
    enc.buf.extend_from_slice(&encode_model(kernel.model()));

    let (classes, interior, holding, probs) = kernel.raw_parts();
    enc.u64(classes.len() as u64);
    enc.buf.extend(classes.iter().map(|&c| c as u8));
    enc.u64(interior.len() as u64);
    for &j in interior {
        enc.u32(j);
    }
    enc.f64_slice(holding);
    enc.f64_slice(probs);

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&enc.buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a kernel cache, verifying magic and (when given) the expected
/// model key.
pub fn read_kernel_cache(path: &Path, expect_key: Option<&[u8; 32]>) -> Result<TransitionKernel, CacheError> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    let mut dec = Dec::new(&data);
    if dec.take(8)? != KERNEL_MAGIC {
        return Err(CacheError::BadMagic("kernel cache"));
    }
    let key: [u8; 32] = dec.take(32)?.try_into().unwrap();
    if let Some(expect) = expect_key {
        if &key != expect {
            return Err(CacheError::KeyMismatch);
        }
    }
    let model = decode_model(&mut dec)?;
    if model_hash(&model) != key {
        return Err(CacheError::KeyMismatch);
    }

    let n_joint = dec.u64()? as usize;
    let class_bytes = dec.take(n_joint)?;
    let mut classes = Vec::with_capacity(n_joint);
    for &b in class_bytes {
        classes.push(
            TerminalClass::from_u8(b)
                .ok_or_else(|| CacheError::Invalid(format!("terminal class tag {b}")))?,
        );
    }
    let n_interior = dec.u64()? as usize;
    let mut interior = Vec::with_capacity(n_interior);
    for _ in 0..n_interior {
        interior.push(dec.u32()?);
    }
    let holding = dec.f64_vec()?;
    let probs = dec.f64_vec()?;

    let expected_probs = n_interior * model.n_joint_actions() * crate::mcam::N_SLOTS;
    if holding.len() != n_interior || probs.len() != expected_probs {
        return Err(CacheError::Invalid("kernel array sizes".into()));
    }
    Ok(TransitionKernel::from_raw_parts(model, classes, interior, holding, probs))
}

fn encode_policy(enc: &mut Enc, policy: &Policy) {
    enc.u8(match policy.agent {
        Agent::Pursuer => 0,
        Agent::Evader => 1,
    });
    enc.u32(policy.n_actions as u32);
    match &policy.table {
        PolicyTable::Mixed(rows) => {
            enc.u8(0);
            enc.f64_slice(rows);
        }
        PolicyTable::Pure(actions) => {
            enc.u8(1);
            enc.u64(actions.len() as u64);
            for &a in actions {
                enc.buf.extend_from_slice(&a.to_le_bytes());
            }
        }
    }
}

fn decode_agent_tag(tag: u8) -> Result<Agent, CacheError> {
    match tag {
        0 => Ok(Agent::Pursuer),
        1 => Ok(Agent::Evader),
        t => Err(CacheError::Invalid(format!("agent tag {t}"))),
    }
}

fn decode_policy(dec: &mut Dec) -> Result<Policy, CacheError> {
    let agent = decode_agent_tag(dec.u8()?)?;
    let n_actions = dec.u32()? as usize;
    let table = match dec.u8()? {
        0 => PolicyTable::Mixed(dec.f64_vec()?),
        1 => {
            let n = dec.u64()? as usize;
            let bytes = dec.take(n * 2)?;
            PolicyTable::Pure(
                bytes.chunks_exact(2).map(|c| u16::from_le_bytes(c.try_into().unwrap())).collect(),
            )
        }
        t => return Err(CacheError::Invalid(format!("policy kind {t}"))),
    };
    Ok(Policy { agent, n_actions, table })
}

fn encode_ladder(enc: &mut Enc, levels: &[LevelEntry]) {
    enc.u32(levels.len() as u32);
    for entry in levels {
        encode_policy(enc, &entry.policy);
        match &entry.value {
            Some(v) => {
                enc.u8(1);
                enc.u8(match v.agent {
                    Agent::Pursuer => 0,
                    Agent::Evader => 1,
                });
                enc.f64_slice(v.values());
            }
            None => enc.u8(0),
        }
    }
}

fn decode_ladder(dec: &mut Dec) -> Result<Vec<LevelEntry>, CacheError> {
    let n = dec.u32()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let policy = decode_policy(dec)?;
        let value = match dec.u8()? {
            0 => None,
            1 => {
                let agent = decode_agent_tag(dec.u8()?)?;
                Some(ValueFunction::from_values(agent, dec.f64_vec()?))
            }
            t => return Err(CacheError::Invalid(format!("value flag {t}"))),
        };
        out.push(LevelEntry { policy, value });
    }
    Ok(out)
}

/// Writes a solved hierarchy keyed to its kernel's model.
pub fn write_hierarchy(path: &Path, key: &[u8; 32], hierarchy: &Hierarchy) -> Result<(), CacheError> {
    let mut enc = Enc::new();
    enc.buf.extend_from_slice(HIERARCHY_MAGIC);
    enc.buf.extend_from_slice(key);
    enc.u32(hierarchy.k_max_pursuer as u32);
    enc.u32(hierarchy.k_max_evader as u32);
    enc.u32(hierarchy.depth as u32);
    match hierarchy.fixed_point {
        Some(fp) => {
            enc.u8(1);
            enc.u8(match fp.agent {
                Agent::Pursuer => 0,
                Agent::Evader => 1,
            });
            enc.u32(fp.level as u32);
        }
        None => enc.u8(0),
    }
    encode_ladder(&mut enc, &hierarchy.pursuer_levels);
    encode_ladder(&mut enc, &hierarchy.evader_levels);

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&enc.buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a hierarchy bundle, verifying its key when one is expected.
pub fn read_hierarchy(path: &Path, expect_key: Option<&[u8; 32]>) -> Result<Hierarchy, CacheError> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    let mut dec = Dec::new(&data);
    if dec.take(8)? != HIERARCHY_MAGIC {
        return Err(CacheError::BadMagic("hierarchy bundle"));
    }
    let key: [u8; 32] = dec.take(32)?.try_into().unwrap();
    if let Some(expect) = expect_key {
        if &key != expect {
            return Err(CacheError::KeyMismatch);
        }
    }
    let k_max_pursuer = dec.u32()? as usize;
    let k_max_evader = dec.u32()? as usize;
    let depth = dec.u32()? as usize;
    let fixed_point = match dec.u8()? {
        0 => None,
        1 => {
            let agent = decode_agent_tag(dec.u8()?)?;
            let level = dec.u32()? as usize;
            Some(FixedPoint { agent, level })
        }
        t => return Err(CacheError::Invalid(format!("fixed point flag {t}"))),
    };
    let pursuer_levels = decode_ladder(&mut dec)?;
    let evader_levels = decode_ladder(&mut dec)?;
    Ok(Hierarchy {
        k_max_pursuer,
        k_max_evader,
        depth,
        pursuer_levels,
        evader_levels,
        fixed_point,
    })
}

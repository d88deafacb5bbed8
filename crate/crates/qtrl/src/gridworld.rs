//! A 5×5 walled gridworld with a 3×3 interior: the agent starts at (1,1)
//! facing east, the goal sits at (3,3), and reaching it pays
//! 1 − 0.9·(steps/100). Observations are egocentric 7×7×3 windows flattened
//! to 147 features in [0,1].
//!
//! This is a faithful desk-scale reimplementation of the usual empty-room
//! task, not a bit-exact port: the object/colour vocabulary is reduced to
//! {unseen, empty, wall, goal} with the channel maxima documented below.

use crate::error::{Error, Result};

/// Grid side length including the boundary walls.
pub const GRID: i32 = 5;
/// Episode step cap: 4·5².
pub const MAX_STEPS: u32 = 100;
/// Egocentric view side length.
pub const VIEW: usize = 7;
/// Flattened observation length: 7·7·3.
pub const OBS_LEN: usize = VIEW * VIEW * 3;

// Object channel codes and maximum.
pub const OBJ_UNSEEN: u8 = 0;
pub const OBJ_EMPTY: u8 = 1;
pub const OBJ_WALL: u8 = 2;
pub const OBJ_GOAL: u8 = 3;
pub const OBJ_MAX: f64 = 3.0;

// Colour channel codes and maximum.
pub const COLOR_NONE: u8 = 0;
pub const COLOR_GREY: u8 = 1;
pub const COLOR_GREEN: u8 = 2;
pub const COLOR_MAX: f64 = 2.0;

// State channel: reserved (always 0 in this task), maximum kept at 1 so the
// normalization stays well defined.
pub const STATE_MAX: f64 = 1.0;

/// The three agent actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Left = 0,
    Right = 1,
    Forward = 2,
}

impl Action {
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Action::Left),
            1 => Ok(Action::Right),
            2 => Ok(Action::Forward),
            _ => Err(Error::DimensionMismatch {
                expected: 3,
                actual: index,
            }),
        }
    }
}

/// Facing direction; turning right cycles east → south → west → north.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Direction {
    fn vector(&self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::North => (0, -1),
        }
    }

    fn left(&self) -> Direction {
        Direction::from_u8((*self as u8 + 3) % 4)
    }

    fn right(&self) -> Direction {
        Direction::from_u8((*self as u8 + 1) % 4)
    }

    fn from_u8(v: u8) -> Direction {
        match v {
            0 => Direction::East,
            1 => Direction::South,
            2 => Direction::West,
            _ => Direction::North,
        }
    }
}

/// Complete environment state; transitions are pure functions of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub agent_pos: (i32, i32),
    pub agent_dir: Direction,
    pub goal_pos: (i32, i32),
    pub step_count: u32,
    pub done: bool,
}

/// Flattened 7×7×3 egocentric observation, every entry in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: Vec<f64>,
}

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Synthetic observation for frozen-trajectory gradient checks.
    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        Observation { values }
    }
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: EnvState,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// Fresh episode. The layout is fixed, so the seed is accepted only for API
/// symmetry with stochastic tasks.
pub fn reset(_seed: u64) -> (EnvState, Observation) {
    let state = EnvState {
        agent_pos: (1, 1),
        agent_dir: Direction::East,
        goal_pos: (3, 3),
        step_count: 0,
        done: false,
    };
    let obs = encode_obs(&state);
    (state, obs)
}

/// Applies one action: left/right rotate, forward moves one cell unless the
/// destination is a wall. Reaching the goal ends the episode with reward
/// 1 − 0.9·(steps/100); exhausting the step cap ends it with reward 0.
pub fn step(state: &EnvState, action: Action) -> Result<StepOutcome> {
    if state.done {
        return Err(Error::EpisodeFinished);
    }
    let mut next = *state;
    next.step_count += 1;
    match action {
        Action::Left => next.agent_dir = state.agent_dir.left(),
        Action::Right => next.agent_dir = state.agent_dir.right(),
        Action::Forward => {
            let (dx, dy) = state.agent_dir.vector();
            let target = (state.agent_pos.0 + dx, state.agent_pos.1 + dy);
            if !is_wall(target) {
                next.agent_pos = target;
            }
        }
    }

    let mut reward = 0.0;
    if next.agent_pos == next.goal_pos {
        next.done = true;
        reward = 1.0 - 0.9 * (next.step_count as f64 / MAX_STEPS as f64);
    } else if next.step_count >= MAX_STEPS {
        next.done = true;
    }

    let observation = encode_obs(&next);
    Ok(StepOutcome {
        state: next,
        observation,
        reward,
        done: next.done,
    })
}

fn is_wall(pos: (i32, i32)) -> bool {
    pos.0 == 0 || pos.0 == GRID - 1 || pos.1 == 0 || pos.1 == GRID - 1
}

fn in_grid(pos: (i32, i32)) -> bool {
    pos.0 >= 0 && pos.0 < GRID && pos.1 >= 0 && pos.1 < GRID
}

/// Encodes the 7×7 window in front of the agent. The agent sits at window
/// column 3, row 6, facing row 0; window index (wx, wy) maps to the world
/// cell `pos + (6−wy)·forward + (wx−3)·right`. Cells outside the grid encode
/// "unseen". Flat layout: `obs[(wy·7 + wx)·3 + channel]`.
pub fn encode_obs(state: &EnvState) -> Observation {
    let fwd = state.agent_dir.vector();
    let right = state.agent_dir.right().vector();
    let mut values = vec![0.0; OBS_LEN];
    for wy in 0..VIEW as i32 {
        for wx in 0..VIEW as i32 {
            let ahead = (VIEW as i32 - 1) - wy;
            let side = wx - 3;
            let world = (
                state.agent_pos.0 + ahead * fwd.0 + side * right.0,
                state.agent_pos.1 + ahead * fwd.1 + side * right.1,
            );
            let (object, color) = classify(state, world);
            let base = ((wy as usize) * VIEW + wx as usize) * 3;
            values[base] = object as f64 / OBJ_MAX;
            values[base + 1] = color as f64 / COLOR_MAX;
            values[base + 2] = 0.0 / STATE_MAX;
        }
    }
    Observation { values }
}

fn classify(state: &EnvState, pos: (i32, i32)) -> (u8, u8) {
    if !in_grid(pos) {
        (OBJ_UNSEEN, COLOR_NONE)
    } else if is_wall(pos) {
        (OBJ_WALL, COLOR_GREY)
    } else if pos == state.goal_pos {
        (OBJ_GOAL, COLOR_GREEN)
    } else {
        (OBJ_EMPTY, COLOR_NONE)
    }
}

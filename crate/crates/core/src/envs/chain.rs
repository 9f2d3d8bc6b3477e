use super::{one_hot, EnvFrame, EnvSpec, Environment, EpisodeClock};
use crate::error::Result;

pub(crate) const DEFAULT_MAX_FRAMES: usize = 50;

/// Six-cell deterministic chain. The agent starts in cell 0; entering cell 5
/// pays +1 and ends the episode. Every other frame pays 0. Moving left from
/// cell 0 leaves the agent in place.
///
/// With exploring starts the episode begins in cell `seed % 5` instead, so
/// every non-goal cell is visited no matter how long the chosen durations are.
///
/// Actions: `0 = LEFT`, `1 = RIGHT`. Observation: one-hot cell index.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    cell: usize,
    exploring_starts: bool,
    clock: EpisodeClock,
}

impl ChainMdp {
    pub const CELLS: usize = 6;
    pub const GOAL: usize = Self::CELLS - 1;
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;

    pub fn new(max_frames: usize) -> Self {
        Self {
            cell: 0,
            exploring_starts: false,
            clock: EpisodeClock::new(max_frames),
        }
    }

    pub fn with_exploring_starts(max_frames: usize) -> Self {
        Self {
            exploring_starts: true,
            ..Self::new(max_frames)
        }
    }

    pub fn cell(&self) -> usize {
        self.cell
    }

    pub fn observe(cell: usize) -> Vec<f64> {
        one_hot(Self::CELLS, cell)
    }
}

impl Environment for ChainMdp {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            action_count: 2,
            observation_width: Self::CELLS,
            max_frames_per_episode: self.clock.max_frames(),
        }
    }

    fn reset(&mut self, seed: u64) -> EnvFrame {
        self.cell = if self.exploring_starts {
            (seed % Self::GOAL as u64) as usize
        } else {
            0
        };
        self.clock.start();
        EnvFrame {
            observation: Self::observe(self.cell),
            reward: 0.0,
            terminal: false,
        }
    }

    fn step(&mut self, action: usize) -> Result<EnvFrame> {
        self.clock.check_running(action, 2)?;
        self.cell = match action {
            Self::LEFT => self.cell.saturating_sub(1),
            _ => self.cell + 1,
        };
        let at_goal = self.cell == Self::GOAL;
        let terminal = self.clock.tick(at_goal);
        Ok(EnvFrame {
            observation: Self::observe(self.cell),
            reward: if at_goal { 1.0 } else { 0.0 },
            terminal,
        })
    }
}

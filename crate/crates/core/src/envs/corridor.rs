use super::{one_hot, EnvFrame, EnvSpec, Environment, EpisodeClock};
use crate::error::Result;

pub(crate) const DEFAULT_MAX_FRAMES: usize = 150;

/// Fixed layout: `#` wall, `.` free, `G` goal.
///
/// A 23-cell top corridor with a shaft dropping from its middle (x = 11)
/// straight onto the goal, and a slower loop round the outside: down either
/// edge and back along the bottom row. Both starts sit seven cells from the
/// shaft, so the fast route is a seven-frame run and a turn; runs of even
/// length never stop over the shaft and have to take the loop.
pub const CORRIDOR_LAYOUT: [&str; 6] = [
    ".......................",
    ".##########.##########.",
    ".##########.##########.",
    ".##########.##########.",
    ".##########.##########.",
    "...........G...........",
];

/// Start cells `(x, y)`; `reset(seed)` starts at `CORRIDOR_STARTS[seed % 2]`.
pub const CORRIDOR_STARTS: [(usize, usize); 2] = [(4, 0), (18, 0)];

const LIVING_COST: f64 = -0.01;
const BUMP_PENALTY: f64 = -0.1;
const GOAL_REWARD: f64 = 1.0;

/// Grid corridor with long straight runs and a turn that has to be hit
/// exactly.
///
/// Actions: `0 = UP`, `1 = RIGHT`, `2 = DOWN`, `3 = LEFT`. Each frame moving
/// into a free cell costs 0.01, bumping into a wall costs 0.1 and leaves the
/// agent in place, entering the goal pays +1 and ends the episode.
///
/// Observation: one-hot indicator over the free cells, in row-major order.
#[derive(Debug, Clone)]
pub struct CorridorWorld {
    width: usize,
    height: usize,
    /// Observation index per grid cell; `None` for walls.
    cell_index: Vec<Option<usize>>,
    goal: (usize, usize),
    free_cells: usize,
    pos: (usize, usize),
    clock: EpisodeClock,
}

impl CorridorWorld {
    pub const UP: usize = 0;
    pub const RIGHT: usize = 1;
    pub const DOWN: usize = 2;
    pub const LEFT: usize = 3;

    pub fn new(max_frames: usize) -> Self {
        let height = CORRIDOR_LAYOUT.len();
        let width = CORRIDOR_LAYOUT[0].len();
        let mut cell_index = Vec::with_capacity(width * height);
        let mut goal = (0, 0);
        let mut next = 0;
        for (y, row) in CORRIDOR_LAYOUT.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                if c == '#' {
                    cell_index.push(None);
                } else {
                    if c == 'G' {
                        goal = (x, y);
                    }
                    cell_index.push(Some(next));
                    next += 1;
                }
            }
        }
        Self {
            width,
            height,
            cell_index,
            goal,
            free_cells: next,
            pos: CORRIDOR_STARTS[0],
            clock: EpisodeClock::new(max_frames),
        }
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn start_for_seed(seed: u64) -> (usize, usize) {
        CORRIDOR_STARTS[(seed % CORRIDOR_STARTS.len() as u64) as usize]
    }

    fn index_of(&self, (x, y): (usize, usize)) -> Option<usize> {
        self.cell_index[y * self.width + x]
    }

    pub fn is_free(&self, pos: (usize, usize)) -> bool {
        pos.0 < self.width && pos.1 < self.height && self.index_of(pos).is_some()
    }

    /// Observation for an arbitrary free cell.
    pub fn observe(&self, pos: (usize, usize)) -> Option<Vec<f64>> {
        self.index_of(pos).map(|i| one_hot(self.free_cells, i))
    }

    /// All free cells in observation order.
    pub fn free_positions(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&p| self.is_free(p))
            .collect()
    }

    fn neighbor(&self, action: usize) -> Option<(usize, usize)> {
        let (x, y) = self.pos;
        let next = match action {
            Self::UP => (x, y.checked_sub(1)?),
            Self::RIGHT => (x + 1, y),
            Self::DOWN => (x, y + 1),
            _ => (x.checked_sub(1)?, y),
        };
        self.is_free(next).then_some(next)
    }

    fn frame(&self, reward: f64, terminal: bool) -> EnvFrame {
        EnvFrame {
            observation: self.observe(self.pos).expect("agent stands on a free cell"),
            reward,
            terminal,
        }
    }
}

impl Environment for CorridorWorld {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            action_count: 4,
            observation_width: self.free_cells,
            max_frames_per_episode: self.clock.max_frames(),
        }
    }

    fn reset(&mut self, seed: u64) -> EnvFrame {
        self.pos = Self::start_for_seed(seed);
        self.clock.start();
        self.frame(0.0, false)
    }

    fn step(&mut self, action: usize) -> Result<EnvFrame> {
        self.clock.check_running(action, 4)?;
        let reward = match self.neighbor(action) {
            Some(next) => {
                self.pos = next;
                if next == self.goal {
                    GOAL_REWARD
                } else {
                    LIVING_COST
                }
            }
            None => BUMP_PENALTY,
        };
        let terminal = self.clock.tick(self.pos == self.goal);
        Ok(self.frame(reward, terminal))
    }
}

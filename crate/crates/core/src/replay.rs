//! Fixed-capacity ring of SMDP transitions with uniform sampling.

use rand::Rng;

use crate::error::{Error, Result};

/// One decision step: action `action` held for up to `duration` frames.
///
/// `action` is the index into the Q head. For the discrete-duration baseline
/// that is the (action, duration) pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub duration: usize,
    /// Discounted sum of per-frame rewards over the frames actually run.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub frames_elapsed: usize,
    pub terminal: bool,
    /// Bandit reward recorded when the transition was collected.
    pub bandit_reward: f64,
}

impl Transition {
    pub fn validate(&self, d_max: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTransition(msg));
        if self.duration == 0 || self.duration > d_max {
            return bad(format!("duration {} outside 1..={d_max}", self.duration));
        }
        if self.frames_elapsed == 0 || self.frames_elapsed > self.duration {
            return bad(format!(
                "frames_elapsed {} outside 1..={}",
                self.frames_elapsed, self.duration
            ));
        }
        if self.frames_elapsed < self.duration && !self.terminal {
            return bad("truncated duration on a non-terminal transition".into());
        }
        if self.state.len() != self.next_state.len() {
            return bad("state and next_state widths differ".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    d_max: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, d_max: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            d_max,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate(self.d_max)?;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return Err(Error::NotReady {
                size: self.items.len(),
                batch: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    /// Stored transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

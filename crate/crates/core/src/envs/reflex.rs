use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{one_hot, EnvFrame, EnvSpec, Environment, EpisodeClock};
use crate::error::Result;

pub(crate) const DEFAULT_MAX_FRAMES: usize = 30;

const WAIT_COST: f64 = -0.01;
const MISFIRE_COST: f64 = -0.1;
const HIT_REWARD: f64 = 1.0;

/// A target shows up at a seeded frame and stays for three frames.
///
/// Actions: `0 = WAIT`, `1 = FIRE`. Firing while the target is up pays +1 and
/// ends the episode. Firing at nothing costs 0.1 per frame, waiting 0.01 per
/// frame. If the window passes without a hit the episode ends.
///
/// The appearance frame is `1 + (draw in 0..12)` from a ChaCha8 generator
/// seeded with the reset seed, so it lies in `1..=12`.
///
/// Observation (width 4): one-hot over {no target, target up for 0 frames,
/// 1 frame, 2 frames}.
#[derive(Debug, Clone)]
pub struct ReflexTarget {
    frame: usize,
    appear_at: usize,
    clock: EpisodeClock,
}

impl ReflexTarget {
    pub const WAIT: usize = 0;
    pub const FIRE: usize = 1;
    pub const WINDOW: usize = 3;
    pub const LATEST_APPEARANCE: usize = 12;

    pub fn new(max_frames: usize) -> Self {
        Self {
            frame: 0,
            appear_at: 1,
            clock: EpisodeClock::new(max_frames),
        }
    }

    pub fn appearance_for_seed(seed: u64) -> usize {
        1 + ChaCha8Rng::seed_from_u64(seed).gen_range(0..Self::LATEST_APPEARANCE)
    }

    pub fn appear_at(&self) -> usize {
        self.appear_at
    }

    /// Frames since the target appeared, while it is up.
    pub fn target_age(&self) -> Option<usize> {
        (self.frame >= self.appear_at && self.frame < self.appear_at + Self::WINDOW)
            .then(|| self.frame - self.appear_at)
    }

    fn observation(&self, over: bool) -> Vec<f64> {
        match self.target_age() {
            Some(age) if !over => one_hot(4, 1 + age),
            _ => one_hot(4, 0),
        }
    }
}

impl Environment for ReflexTarget {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            action_count: 2,
            observation_width: 4,
            max_frames_per_episode: self.clock.max_frames(),
        }
    }

    fn reset(&mut self, seed: u64) -> EnvFrame {
        self.frame = 0;
        self.appear_at = Self::appearance_for_seed(seed);
        self.clock.start();
        EnvFrame {
            observation: self.observation(false),
            reward: 0.0,
            terminal: false,
        }
    }

    fn step(&mut self, action: usize) -> Result<EnvFrame> {
        self.clock.check_running(action, 2)?;
        let visible = self.target_age().is_some();
        let hit = action == Self::FIRE && visible;
        let reward = match (action, hit) {
            (_, true) => HIT_REWARD,
            (Self::FIRE, false) => MISFIRE_COST,
            _ => WAIT_COST,
        };
        self.frame += 1;
        let missed = !hit && self.frame >= self.appear_at + Self::WINDOW;
        let terminal = self.clock.tick(hit || missed);
        Ok(EnvFrame {
            observation: self.observation(hit || missed),
            reward,
            terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_with_appearance(at: usize) -> (ReflexTarget, u64) {
        let seed = (0..1000u64)
            .find(|&s| ReflexTarget::appearance_for_seed(s) == at)
            .expect("some seed hits every appearance frame");
        let mut env = ReflexTarget::new(30);
        env.reset(seed);
        (env, seed)
    }

    #[test]
    fn appearance_frames_cover_range() {
        let mut seen = [false; 13];
        for s in 0..500 {
            let a = ReflexTarget::appearance_for_seed(s);
            assert!((1..=12).contains(&a));
            seen[a] = true;
        }
        assert!(seen[1..].iter().all(|&b| b));
    }

    #[test]
    fn firing_inside_window_hits() {
        for offset in 0..3 {
            let (mut env, _) = env_with_appearance(4);
            for _ in 0..4 + offset {
                let f = env.step(ReflexTarget::WAIT).unwrap();
                assert_eq!(f.reward, -0.01);
            }
            assert_eq!(env.target_age(), Some(offset));
            let f = env.step(ReflexTarget::FIRE).unwrap();
            assert_eq!((f.reward, f.terminal), (1.0, true));
        }
    }

    #[test]
    fn firing_outside_window_pays_nothing_positive() {
        let (mut env, _) = env_with_appearance(4);
        let f = env.step(ReflexTarget::FIRE).unwrap();
        assert_eq!(f.reward, -0.1);
        assert!(!f.terminal);
    }

    #[test]
    fn window_expiry_ends_episode() {
        let (mut env, _) = env_with_appearance(2);
        let mut last = None;
        for _ in 0..5 {
            last = Some(env.step(ReflexTarget::WAIT).unwrap());
        }
        let f = last.unwrap();
        assert!(f.terminal);
        assert_eq!(f.observation, one_hot(4, 0));
    }

    #[test]
    fn observation_tracks_target_age() {
        let (mut env, _) = env_with_appearance(1);
        assert_eq!(env.step(0).unwrap().observation, one_hot(4, 1));
        assert_eq!(env.step(0).unwrap().observation, one_hot(4, 2));
        assert_eq!(env.step(0).unwrap().observation, one_hot(4, 3));
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = ReflexTarget::new(30);
        let mut b = ReflexTarget::new(30);
        assert_eq!(a.reset(77), b.reset(77));
        assert_eq!(a.appear_at(), b.appear_at());
    }
}

//! Named random streams derived from one master seed.
//!
//! Every consumer of randomness (environment episode seeds, exploration,
//! duration sampling, initialization, replay sampling, evaluation) draws from
//! its own ChaCha stream keyed by the master seed. Turning one consumer off
//! never shifts the draws seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamName {
    Env,
    Exploration,
    Duration,
    Init,
    Replay,
    EvalEnv,
    EvalDuration,
}

impl StreamName {
    pub const TRAINING: [StreamName; 5] = [
        StreamName::Env,
        StreamName::Exploration,
        StreamName::Duration,
        StreamName::Init,
        StreamName::Replay,
    ];

    fn id(self) -> u64 {
        match self {
            StreamName::Env => 1,
            StreamName::Exploration => 2,
            StreamName::Duration => 3,
            StreamName::Init => 4,
            StreamName::Replay => 5,
            StreamName::EvalEnv => 6,
            StreamName::EvalDuration => 7,
        }
    }
}

pub fn stream(master_seed: u64, name: StreamName) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(name.id());
    rng
}

/// The five training streams owned by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStreams {
    pub env: ChaCha8Rng,
    pub exploration: ChaCha8Rng,
    pub duration: ChaCha8Rng,
    pub init: ChaCha8Rng,
    pub replay: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        Self {
            env: stream(master_seed, StreamName::Env),
            exploration: stream(master_seed, StreamName::Exploration),
            duration: stream(master_seed, StreamName::Duration),
            init: stream(master_seed, StreamName::Init),
            replay: stream(master_seed, StreamName::Replay),
        }
    }

    fn get(&self, name: StreamName) -> Option<&ChaCha8Rng> {
        match name {
            StreamName::Env => Some(&self.env),
            StreamName::Exploration => Some(&self.exploration),
            StreamName::Duration => Some(&self.duration),
            StreamName::Init => Some(&self.init),
            StreamName::Replay => Some(&self.replay),
            StreamName::EvalEnv | StreamName::EvalDuration => None,
        }
    }

    pub fn snapshot(&self) -> Vec<StreamState> {
        StreamName::TRAINING
            .iter()
            .filter_map(|&name| self.get(name).map(|rng| StreamState::capture(name, rng)))
            .collect()
    }

    pub fn restore(states: &[StreamState]) -> Result<Self> {
        let find = |name: StreamName| -> Result<ChaCha8Rng> {
            states
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| Error::Incompatible(format!("checkpoint lacks rng stream {name:?}")))?
                .rebuild()
        };
        Ok(Self {
            env: find(StreamName::Env)?,
            exploration: find(StreamName::Exploration)?,
            duration: find(StreamName::Duration)?,
            init: find(StreamName::Init)?,
            replay: find(StreamName::Replay)?,
        })
    }
}

/// Serializable position of one stream: key, stream id and word offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub name: StreamName,
    /// 32-byte ChaCha key, hex encoded.
    pub key: String,
    pub stream: u64,
    /// Word position; a decimal string because it is a u128.
    pub word_pos: String,
}

impl StreamState {
    fn capture(name: StreamName, rng: &ChaCha8Rng) -> Self {
        let key = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        Self {
            name,
            key,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn rebuild(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Incompatible(format!("malformed rng state for {:?}", self.name));
        if self.key.len() != 64 {
            return Err(bad());
        }
        let mut key = [0u8; 32];
        for (i, byte) in key.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.key[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let word_pos: u128 = self.word_pos.parse().map_err(|_| bad())?;
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

//! Seeded random streams.
//!
//! All randomness in the simulator comes from ChaCha8 generators keyed by a
//! user seed plus a stream id, so that independent consumers (channel noise,
//! exploration noise, replay sampling, per-job RNGs) never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Well-known stream ids.
pub mod stream {
    pub const CHANNEL: u64 = 1;
    pub const TRACKER: u64 = 2;
    pub const AGENT_INIT: u64 = 3;
    pub const EXPLORATION: u64 = 4;
    pub const REPLAY: u64 = 5;
    pub const TRACE: u64 = 6;
    pub const EPISODE_BASE: u64 = 1 << 32;
}

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for one episode of a run; independent of everything the agent does.
pub fn episode_rng(seed: u64, episode: u64) -> SimRng {
    stream_rng(seed, stream::EPISODE_BASE + episode)
}

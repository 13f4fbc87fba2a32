//! Geometric 2-D multipath channel simulator.
//!
//! Each reflection point contributes one transmitter -> point -> receiver
//! path. A band-limited `sinc` pulse is propagated over all paths, sampled
//! over a short receive window with additive noise, and the retained DFT
//! bins of that window form one channel frequency response snapshot.
//! Between snapshots the receiver and the mobile reflection points move
//! linearly.

mod cfr;
mod channel;
mod config;
mod scene;

pub use cfr::{compute_cfr, run_simulation, CfrSeries, CfrSnapshot, CfrTransform, Simulator};
pub use channel::{
    add_noise, path_geometry, received_clean, sinc, synthesize_received, Multipath,
    SPEED_OF_LIGHT,
};
pub use config::ScenarioConfig;
pub use scene::{advance_scene, init_scene, Scene, Vec2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_POSITIONS: u64 = 0;
pub(crate) const STREAM_VELOCITIES: u64 = 1;
pub(crate) const STREAM_NOISE: u64 = 2;

/// Independent deterministic sub-stream of the master seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Noise stream used by [`Simulator`] for a given master seed.
pub fn noise_stream(seed: u64) -> ChaCha8Rng {
    substream(seed, STREAM_NOISE)
}

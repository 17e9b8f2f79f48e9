//! Seeded, named random streams.
//!
//! One root seed fans out into independent ChaCha streams keyed by a run
//! index and a stable label, so that swapping one device's strategy never
//! shifts the draws seen by the other device or by the harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// A child tree whose streams do not overlap with the parent's.
    pub fn child(&self, label: &str) -> SeedTree {
        SeedTree { root: splitmix64(self.root ^ fnv1a(label.as_bytes())) }
    }

    /// Independent stream for `label` within run `run`.
    pub fn stream(&self, run: u64, label: &str) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.root ^ splitmix64(run)));
        rng.set_stream(fnv1a(label.as_bytes()));
        rng
    }

    pub fn device_streams(&self, run: u64) -> DeviceStreams {
        DeviceStreams { device1: self.stream(run, "device1"), device2: self.stream(run, "device2") }
    }
}

/// Per-device random streams for one mechanism run.
#[derive(Clone, Debug)]
pub struct DeviceStreams {
    pub device1: StreamRng,
    pub device2: StreamRng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

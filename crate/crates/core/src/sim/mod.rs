//! Synthetic two-joint manipulator with switchable joint stiffness.
//!
//! Each joint is a link inertia behind a spring to an ideally
//! position-controlled motor. Collisions enter as half-sine torque
//! pulses on the link and are labeled for exactly the samples they act.

mod corpus;
mod dynamics;
mod schedule;
mod trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{generate_corpus, load_corpus, write_corpus, Corpus, CorpusEntry, EntryInfo, Split, CORPUS_MANIFEST};
pub use dynamics::simulate_trace;
pub use schedule::{schedule_collisions, CollisionEvent};
pub use trajectory::{generate_trajectory, Trajectory};

/// Equivalent joint stiffness in N·m/rad for levels 1 to 4.
pub const STIFFNESS_TABLE: [f64; 4] = [6.0, 50.0, 160.0, 246.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// rad/s
    pub max_speed: f64,
    /// rad/s²
    pub max_accel: f64,
    /// s
    pub dwell_min: f64,
    /// s
    pub dwell_max: f64,
    /// Symmetric position limit, rad.
    pub joint_limit: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig { max_speed: 1.0, max_accel: 4.0, dwell_min: 0.2, dwell_max: 1.0, joint_limit: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionConfig {
    /// Mean events per minute.
    pub rate_per_min: f64,
    /// Peak joint torque range, N·m.
    pub peak_min: f64,
    pub peak_max: f64,
    /// Pulse length range, ms.
    pub duration_min_ms: u32,
    pub duration_max_ms: u32,
    /// Minimum start-to-start spacing, s.
    pub min_separation_s: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig {
            rate_per_min: 17.2,
            peak_min: 1.0,
            peak_max: 8.0,
            duration_min_ms: 30,
            duration_max_ms: 80,
            min_separation_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// kg·m², per joint.
    pub link_inertia: f64,
    /// N·m·s/rad, per joint.
    pub link_damping: f64,
    /// K_eq for levels 1..=4, N·m/rad.
    pub stiffness_table: [f64; 4],
    /// N·m
    pub torque_noise_std: f64,
    /// rad/s
    pub velocity_noise_std: f64,
    pub motion: MotionConfig,
    pub collision: CollisionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            link_inertia: 0.05,
            link_damping: 0.5,
            stiffness_table: STIFFNESS_TABLE,
            torque_noise_std: 0.02,
            velocity_noise_std: 0.005,
            motion: MotionConfig::default(),
            collision: CollisionConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("link_inertia", self.link_inertia),
            ("link_damping", self.link_damping),
            ("motion.max_accel", self.motion.max_accel),
            ("motion.joint_limit", self.motion.joint_limit),
            ("collision.peak_min", self.collision.peak_min),
            ("collision.min_separation_s", self.collision.min_separation_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("torque_noise_std", self.torque_noise_std),
            ("velocity_noise_std", self.velocity_noise_std),
            ("motion.max_speed", self.motion.max_speed),
            ("motion.dwell_min", self.motion.dwell_min),
            ("collision.rate_per_min", self.collision.rate_per_min),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.stiffness_table != STIFFNESS_TABLE {
            return Err(Error::Config(format!(
                "stiffness_table must be {STIFFNESS_TABLE:?}, got {:?}",
                self.stiffness_table
            )));
        }
        if !(self.motion.dwell_max.is_finite() && self.motion.dwell_max >= self.motion.dwell_min) {
            return Err(Error::Config("motion.dwell_max must be >= motion.dwell_min".into()));
        }
        let c = &self.collision;
        if !(c.peak_max.is_finite() && c.peak_max >= c.peak_min) {
            return Err(Error::Config("collision.peak_max must be >= collision.peak_min".into()));
        }
        if c.duration_min_ms < 20 || c.duration_max_ms > 120 || c.duration_min_ms > c.duration_max_ms {
            return Err(Error::Config(format!(
                "collision duration range [{}, {}] ms must lie within [20, 120]",
                c.duration_min_ms, c.duration_max_ms
            )));
        }
        if c.min_separation_s * 1000.0 < f64::from(c.duration_max_ms) {
            return Err(Error::Config("collision.min_separation_s must cover the longest pulse".into()));
        }
        Ok(())
    }

    /// K_eq for a stiffness level in 1..=4.
    pub fn stiffness(&self, level: u8) -> Result<f64> {
        match level {
            1..=4 => Ok(self.stiffness_table[usize::from(level) - 1]),
            _ => Err(Error::Config(format!("stiffness level {level} is not in 1..=4"))),
        }
    }
}

/// Independent generator for sub-stream `stream` of `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples in `duration_s` seconds at 1 kHz.
pub(crate) fn sample_count(duration_s: f64) -> Result<usize> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Input(format!("duration must be positive, got {duration_s}")));
    }
    Ok((duration_s * 1000.0).round() as usize)
}

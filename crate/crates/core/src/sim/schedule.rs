use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{sample_count, stream_rng, CollisionConfig};
use crate::data::JOINTS;
use crate::error::Result;

/// One external contact, as a half-sine torque pulse on a single link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// 0-based joint index.
    pub joint: usize,
    /// First active sample, ms.
    pub start_ms: usize,
    /// Active samples, ms.
    pub duration_ms: usize,
    /// N·m, positive.
    pub peak_torque: f64,
    /// +1 or -1.
    pub sign: i8,
}

impl CollisionEvent {
    pub fn is_active(&self, n: usize) -> bool {
        n >= self.start_ms && n < self.start_ms + self.duration_ms
    }

    /// External torque at sample `n`. Sampled at mid-step so every active
    /// sample carries a nonzero load.
    pub fn torque_at(&self, n: usize) -> f64 {
        if !self.is_active(n) {
            return 0.0;
        }
        let phase = ((n - self.start_ms) as f64 + 0.5) / self.duration_ms as f64;
        f64::from(self.sign) * self.peak_torque * (std::f64::consts::PI * phase).sin()
    }

    pub fn end_ms(&self) -> usize {
        self.start_ms + self.duration_ms
    }
}

/// Random contacts at the configured mean rate. Start-to-start gaps are the
/// minimum separation plus an exponential remainder, so the mean rate is
/// exact and no two starts are closer than the separation. Events that
/// would run past the end of the trace are dropped.
pub fn schedule_collisions(duration_s: f64, config: &CollisionConfig, seed: u64) -> Result<Vec<CollisionEvent>> {
    let n = sample_count(duration_s)?;
    if config.rate_per_min <= 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(seed, 0);
    let min_gap_ms = (config.min_separation_s * 1000.0).ceil();
    let mean_gap_ms = 60_000.0 / config.rate_per_min;
    let tail = Exp::new(1.0 / (mean_gap_ms - min_gap_ms).max(1e-9)).expect("positive rate");
    let mut events = Vec::new();
    let mut t = 0usize;
    loop {
        t += (min_gap_ms + tail.sample(&mut rng)).round() as usize;
        let duration_ms = rng.gen_range(config.duration_min_ms..=config.duration_max_ms) as usize;
        let joint = rng.gen_range(0..JOINTS);
        let peak_torque = rng.gen_range(config.peak_min..=config.peak_max);
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        if t + duration_ms > n {
            break;
        }
        events.push(CollisionEvent { joint, start_ms: t, duration_ms, peak_torque, sign });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        let c = CollisionConfig { rate_per_min: 0.0, ..CollisionConfig::default() };
        assert!(schedule_collisions(600.0, &c, 1).unwrap().is_empty());
    }

    #[test]
    fn ten_minutes_average_near_172() {
        let c = CollisionConfig::default();
        let total: usize = (0..20).map(|s| schedule_collisions(600.0, &c, s).unwrap().len()).sum();
        let mean = total as f64 / 20.0;
        assert!((mean - 172.0).abs() <= 15.0, "mean {mean}");
    }

    #[test]
    fn separation_and_bounds() {
        let c = CollisionConfig::default();
        for seed in 0..20 {
            let ev = schedule_collisions(120.0, &c, seed).unwrap();
            for w in ev.windows(2) {
                assert!(w[1].start_ms - w[0].start_ms >= 500);
            }
            for e in &ev {
                assert!(e.end_ms() <= 120_000);
                assert!((30..=80).contains(&e.duration_ms));
                assert!((1.0..=8.0).contains(&e.peak_torque));
            }
        }
    }

    #[test]
    fn pulse_shape() {
        let e = CollisionEvent { joint: 0, start_ms: 10, duration_ms: 4, peak_torque: 2.0, sign: -1 };
        assert_eq!(e.torque_at(9), 0.0);
        assert_eq!(e.torque_at(14), 0.0);
        let s = (std::f64::consts::PI / 8.0).sin();
        assert!((e.torque_at(10) + 2.0 * s).abs() < 1e-15);
        assert!((e.torque_at(10) - e.torque_at(13)).abs() < 1e-15);
        assert!(e.torque_at(11) < e.torque_at(10));
    }
}

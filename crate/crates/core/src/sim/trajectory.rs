use rand::Rng;

use super::{sample_count, stream_rng, MotionConfig};
use crate::data::JOINTS;
use crate::error::{Error, Result};

const DT: f64 = 1e-3;

/// Motor-side reference per joint, one entry per 1 kHz sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// rad
    pub position: [Vec<f64>; JOINTS],
    /// rad/s
    pub velocity: [Vec<f64>; JOINTS],
}

impl Trajectory {
    /// Motor held still at `position` for `samples` samples.
    pub fn at_rest(position: [f64; JOINTS], samples: usize) -> Self {
        Trajectory {
            position: position.map(|p| vec![p; samples]),
            velocity: [vec![0.0; samples], vec![0.0; samples]],
        }
    }

    pub fn len(&self) -> usize {
        self.position[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rest-to-rest move of signed length `distance` under speed and
/// acceleration limits.
struct Move {
    sign: f64,
    ramp: f64,
    cruise: f64,
    peak: f64,
    accel: f64,
}

impl Move {
    fn new(distance: f64, max_speed: f64, max_accel: f64) -> Self {
        let d = distance.abs();
        let full_ramp = max_speed / max_accel;
        let (ramp, peak, cruise) = if d >= max_speed * full_ramp {
            (full_ramp, max_speed, (d - max_speed * full_ramp) / max_speed)
        } else {
            let ramp = (d / max_accel).sqrt();
            (ramp, max_accel * ramp, 0.0)
        };
        Move { sign: distance.signum(), ramp, cruise, peak, accel: max_accel }
    }

    fn total(&self) -> f64 {
        2.0 * self.ramp + self.cruise
    }

    /// Displacement and velocity `tau` seconds into the move.
    fn eval(&self, tau: f64) -> (f64, f64) {
        let (a, r, c, vp) = (self.accel, self.ramp, self.cruise, self.peak);
        let total = vp * (r + c);
        let (s, v) = if tau <= 0.0 {
            (0.0, 0.0)
        } else if tau < r {
            (0.5 * a * tau * tau, a * tau)
        } else if tau < r + c {
            (0.5 * a * r * r + vp * (tau - r), vp)
        } else if tau < 2.0 * r + c {
            let rem = 2.0 * r + c - tau;
            (total - 0.5 * a * rem * rem, a * rem)
        } else {
            (total, 0.0)
        };
        (self.sign * s, self.sign * v)
    }
}

fn check_motion(m: &MotionConfig) -> Result<()> {
    let ok = m.max_speed.is_finite()
        && m.max_speed >= 0.0
        && m.max_accel.is_finite()
        && (m.max_accel > 0.0 || m.max_speed == 0.0)
        && m.dwell_min.is_finite()
        && m.dwell_min >= 0.0
        && m.dwell_max.is_finite()
        && m.dwell_max >= m.dwell_min
        && m.joint_limit.is_finite()
        && m.joint_limit > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("infeasible motion limits: {m:?}")))
    }
}

fn joint_profile(n: usize, m: &MotionConfig, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    let mut here = rng.gen_range(-m.joint_limit..=m.joint_limit);
    while pos.len() < n {
        let dwell = rng.gen_range(m.dwell_min..=m.dwell_max);
        let hold = ((dwell / DT).round() as usize).max(1);
        for _ in 0..hold.min(n - pos.len()) {
            pos.push(here);
            vel.push(0.0);
        }
        if m.max_speed == 0.0 {
            continue;
        }
        let target = rng.gen_range(-m.joint_limit..=m.joint_limit);
        let mv = Move::new(target - here, m.max_speed, m.max_accel);
        let steps = (mv.total() / DT).ceil() as usize;
        for k in 1..steps.min(n - pos.len() + 1) {
            let (s, v) = mv.eval(k as f64 * DT);
            pos.push(here + s);
            vel.push(v);
        }
        here = target;
    }
    (pos, vel)
}

/// Random rest-to-rest trapezoidal moves between targets inside the joint
/// limits, separated by random dwells. Joints move independently.
pub fn generate_trajectory(duration_s: f64, motion: &MotionConfig, seed: u64) -> Result<Trajectory> {
    check_motion(motion)?;
    let n = sample_count(duration_s)?;
    let mut position: [Vec<f64>; JOINTS] = Default::default();
    let mut velocity: [Vec<f64>; JOINTS] = Default::default();
    for j in 0..JOINTS {
        let mut rng = stream_rng(seed, j as u64);
        let (p, v) = joint_profile(n, motion, &mut rng);
        position[j] = p;
        velocity[j] = v;
    }
    Ok(Trajectory { position, velocity })
}

use rand_distr::{Distribution, Normal};

use super::{stream_rng, CollisionEvent, SimConfig, Trajectory};
use crate::data::{Trace, JOINTS};
use crate::error::{Error, Result};

const DT: f64 = 1e-3;
const DIVERGENCE_LIMIT: f64 = 1e6;

/// Integrates `J·θ̈ₗ = −b·θ̇ₗ + K·(θₘ − θₗ) + τ_ext` per joint with
/// semi-implicit Euler at 1 kHz, starting from rest at the motor position.
/// Records spring torque and link velocity with additive Gaussian noise.
pub fn simulate_trace(
    config: &SimConfig,
    stiffness_level: u8,
    events: &[CollisionEvent],
    trajectory: &Trajectory,
    seed: u64,
) -> Result<Trace> {
    config.validate()?;
    if !(2..=4).contains(&stiffness_level) {
        return Err(Error::Input(format!(
            "stiffness level {stiffness_level} is not a data level (2, 3 or 4)"
        )));
    }
    let k = config.stiffness(stiffness_level)?;
    let n = trajectory.len();
    if trajectory.position.iter().chain(&trajectory.velocity).any(|s| s.len() != n) {
        return Err(Error::Shape("trajectory joints differ in length".into()));
    }
    if let Some(e) = events.iter().find(|e| e.joint >= JOINTS || e.end_ms() > n || e.duration_ms == 0) {
        return Err(Error::Input(format!("collision event {e:?} does not fit the trace")));
    }

    let mut label = vec![0u8; n];
    for e in events {
        label[e.start_ms..e.end_ms()].fill(1);
    }

    let (j_inv, b) = (1.0 / config.link_inertia, config.link_damping);
    let mut torque: [Vec<f64>; JOINTS] = Default::default();
    let mut velocity: [Vec<f64>; JOINTS] = Default::default();
    for joint in 0..JOINTS {
        let motor = &trajectory.position[joint];
        let mut external = vec![0.0; n];
        for e in events.iter().filter(|e| e.joint == joint) {
            for (t, x) in external.iter_mut().enumerate().take(e.end_ms()).skip(e.start_ms) {
                *x = e.torque_at(t);
            }
        }
        let mut tau = Vec::with_capacity(n);
        let mut vel = Vec::with_capacity(n);
        let (mut q, mut qd) = (motor.first().copied().unwrap_or(0.0), 0.0);
        for t in 0..n {
            let spring = k * (motor[t] - q);
            tau.push(spring);
            vel.push(qd);
            qd += DT * j_inv * (spring - b * qd + external[t]);
            q += DT * qd;
            if !(qd.is_finite() && qd.abs() < DIVERGENCE_LIMIT) {
                return Err(Error::Simulation(format!("joint {} diverged at sample {t}", joint + 1)));
            }
        }
        add_noise(&mut tau, config.torque_noise_std, seed, 2 * joint as u64);
        add_noise(&mut vel, config.velocity_noise_std, seed, 2 * joint as u64 + 1);
        torque[joint] = tau;
        velocity[joint] = vel;
    }
    Trace::new(torque, velocity, label, stiffness_level)
}

fn add_noise(values: &mut [f64], std: f64, seed: u64, stream: u64) {
    if std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("validated noise level");
    let mut rng = stream_rng(seed, stream);
    for v in values {
        *v += normal.sample(&mut rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_trajectory, MotionConfig};

    fn quiet() -> SimConfig {
        SimConfig { torque_noise_std: 0.0, velocity_noise_std: 0.0, ..SimConfig::default() }
    }

    fn pulse(joint: usize) -> CollisionEvent {
        CollisionEvent { joint, start_ms: 200, duration_ms: 50, peak_torque: 4.0, sign: 1 }
    }

    #[test]
    fn equilibrium_stays_zero() {
        let traj = Trajectory::at_rest([0.3, -0.2], 2000);
        let tr = simulate_trace(&quiet(), 4, &[], &traj, 1).unwrap();
        for j in 0..JOINTS {
            assert!(tr.torque(j).iter().all(|&x| x == 0.0));
            assert!(tr.velocity(j).iter().all(|&x| x == 0.0));
        }
        assert!(tr.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn joints_are_uncoupled() {
        let traj = Trajectory::at_rest([0.0, 0.0], 1000);
        let tr = simulate_trace(&quiet(), 3, &[pulse(0)], &traj, 1).unwrap();
        assert!(tr.torque(1).iter().all(|&x| x == 0.0));
        assert!(tr.torque(0).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn labels_match_events() {
        let traj = Trajectory::at_rest([0.0, 0.0], 1000);
        let tr = simulate_trace(&quiet(), 2, &[pulse(1)], &traj, 1).unwrap();
        for (t, &l) in tr.labels().iter().enumerate() {
            assert_eq!(l == 1, (200..250).contains(&t));
        }
    }

    #[test]
    fn stiffness_changes_deflection_peak() {
        let traj = Trajectory::at_rest([0.0, 0.0], 1000);
        let peak = |level| {
            let tr = simulate_trace(&quiet(), level, &[pulse(0)], &traj, 1).unwrap();
            tr.torque(0).iter().fold(0.0f64, |m, x| m.max(x.abs()))
        };
        let (p2, p3, p4) = (peak(2), peak(3), peak(4));
        assert!(p2 < p3 && p3 < p4, "{p2} {p3} {p4}");
    }

    #[test]
    fn long_motion_stays_bounded() {
        let cfg = quiet();
        let traj = generate_trajectory(900.0, &MotionConfig::default(), 4).unwrap();
        for level in 2..=4 {
            let tr = simulate_trace(&cfg, level, &[], &traj, 0).unwrap();
            for j in 0..JOINTS {
                assert!(tr.torque(j).iter().all(|x| x.abs() < 10.0));
                assert!(tr.velocity(j).iter().all(|x| x.abs() < 5.0));
            }
        }
    }

    #[test]
    fn rejects_level_one_and_bad_events() {
        let traj = Trajectory::at_rest([0.0, 0.0], 100);
        assert!(simulate_trace(&quiet(), 1, &[], &traj, 1).is_err());
        assert!(simulate_trace(&quiet(), 4, &[pulse(0)], &traj, 1).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = SimConfig { link_inertia: 1e-6, ..quiet() };
        let traj = generate_trajectory(2.0, &MotionConfig::default(), 1).unwrap();
        assert!(matches!(simulate_trace(&cfg, 4, &[], &traj, 1), Err(Error::Simulation(_))));
    }

    #[test]
    fn deterministic_with_noise() {
        let cfg = SimConfig::default();
        let traj = generate_trajectory(3.0, &cfg.motion, 2).unwrap();
        let a = simulate_trace(&cfg, 4, &[pulse(1)], &traj, 8).unwrap();
        assert_eq!(a, simulate_trace(&cfg, 4, &[pulse(1)], &traj, 8).unwrap());
        assert_ne!(a, simulate_trace(&cfg, 4, &[pulse(1)], &traj, 9).unwrap());
    }
}

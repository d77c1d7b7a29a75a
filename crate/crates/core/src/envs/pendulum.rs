use std::f64::consts::PI;

use super::{EnvError, Transition};

pub const G: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;

/// Wraps an angle into `[-pi, pi)`.
pub fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Recovers the angle from a `(cos, sin, theta_dot)` observation.
pub fn angle_of(obs: &[f64]) -> f64 {
    obs[1].atan2(obs[0])
}

pub fn observe(theta: f64, theta_dot: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin(), theta_dot]
}

/// One Pendulum transition with semi-implicit Euler integration.
///
/// The reward is computed from the state before the update, and the torque is
/// clipped before use. The pendulum never terminates.
pub fn step(obs: [f64; 3], torque: f64) -> Result<Transition, EnvError> {
    if obs.iter().any(|v| !v.is_finite()) || !torque.is_finite() {
        return Err(EnvError::Domain("Pendulum inputs must be finite".into()));
    }
    let theta = obs[1].atan2(obs[0]);
    let theta_dot = obs[2];
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let cost = angle_normalize(theta).powi(2) + 0.1 * theta_dot.powi(2) + 0.001 * u.powi(2);

    let accel = 3.0 * G / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let new_theta_dot = (theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let new_theta = theta + new_theta_dot * DT;

    Ok(Transition {
        state: observe(new_theta, new_theta_dot),
        reward: -cost,
        terminated: false,
    })
}

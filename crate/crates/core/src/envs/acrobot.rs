use std::f64::consts::PI;

use super::{EnvError, Transition};

pub const DT: f64 = 0.2;
pub const LINK_LENGTH_1: f64 = 1.0;
pub const LINK_MASS_1: f64 = 1.0;
pub const LINK_MASS_2: f64 = 1.0;
pub const LINK_COM_POS_1: f64 = 0.5;
pub const LINK_COM_POS_2: f64 = 0.5;
pub const LINK_MOI: f64 = 1.0;
pub const GRAVITY: f64 = 9.8;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
pub const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];

/// Internal joint state `(theta1, theta2, dtheta1, dtheta2)`.
pub type Joints = [f64; 4];

pub fn observe(s: &Joints) -> Vec<f64> {
    vec![s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
}

pub fn joints_of(obs: &[f64]) -> Joints {
    [obs[1].atan2(obs[0]), obs[3].atan2(obs[2]), obs[4], obs[5]]
}

/// Height of the free end above the pivot, in link lengths (hanging = -2).
pub fn tip_height(s: &Joints) -> f64 {
    -s[0].cos() - (s[1] + s[0]).cos()
}

fn derivatives(s: &Joints, torque: f64) -> Joints {
    let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
    let (l1, lc1, lc2) = (LINK_LENGTH_1, LINK_COM_POS_1, LINK_COM_POS_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let g = GRAVITY;
    let [theta1, theta2, dtheta1, dtheta2] = *s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    // "book" variant of the second joint's acceleration.
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(s: &Joints, torque: f64, dt: f64) -> Joints {
    let add = |a: &Joints, k: &Joints, h: f64| -> Joints {
        [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]]
    };
    let k1 = derivatives(s, torque);
    let k2 = derivatives(&add(s, &k1, dt / 2.0), torque);
    let k3 = derivatives(&add(s, &k2, dt / 2.0), torque);
    let k4 = derivatives(&add(s, &k3, dt), torque);
    let mut out = *s;
    for i in 0..4 {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn wrap(mut x: f64) -> f64 {
    while x > PI {
        x -= 2.0 * PI;
    }
    while x < -PI {
        x += 2.0 * PI;
    }
    x
}

/// Integrates one step from joint coordinates.
pub fn step_joints(s: &Joints, action: usize) -> Result<(Joints, f64, bool), EnvError> {
    let torque = *TORQUES
        .get(action)
        .ok_or_else(|| EnvError::Domain(format!("Acrobot action {action} not in {{0,1,2}}")))?;
    let mut ns = rk4(s, torque, DT);
    ns[0] = wrap(ns[0]);
    ns[1] = wrap(ns[1]);
    ns[2] = ns[2].clamp(-MAX_VEL_1, MAX_VEL_1);
    ns[3] = ns[3].clamp(-MAX_VEL_2, MAX_VEL_2);
    let terminated = tip_height(&ns) > 1.0;
    let reward = if terminated { 0.0 } else { -1.0 };
    Ok((ns, reward, terminated))
}

/// One Acrobot transition on the six-component observation.
pub fn step(obs: &[f64], action: usize) -> Result<Transition, EnvError> {
    if obs.len() != 6 || obs.iter().any(|v| !v.is_finite()) {
        return Err(EnvError::Domain("Acrobot observation must be 6 finite values".into()));
    }
    let (ns, reward, terminated) = step_joints(&joints_of(obs), action)?;
    Ok(Transition {
        state: observe(&ns),
        reward,
        terminated,
    })
}

//! Reference dynamics written directly from the textbook equations, sharing
//! no code with the library.

#![allow(clippy::manual_clamp)]

use std::f64::consts::PI;

pub fn mountain_car(pos: f64, vel: f64, action: usize) -> ([f64; 2], f64, bool) {
    let force = match action {
        0 => -0.001,
        1 => 0.0,
        2 => 0.001,
        _ => panic!("bad action"),
    };
    let mut v = vel + force + (-0.0025) * f64::cos(3.0 * pos);
    if v > 0.07 {
        v = 0.07;
    }
    if v < -0.07 {
        v = -0.07;
    }
    let mut p = pos + v;
    if p > 0.6 {
        p = 0.6;
    }
    if p < -1.2 {
        p = -1.2;
    }
    if p == -1.2 && v < 0.0 {
        v = 0.0;
    }
    if p == 0.6 && v > 0.0 {
        v = 0.0;
    }
    ([p, v], -1.0, p >= 0.5)
}

pub fn pendulum(obs: [f64; 3], torque: f64) -> ([f64; 3], f64) {
    let th = f64::atan2(obs[1], obs[0]);
    let thdot = obs[2];
    let u = torque.max(-2.0).min(2.0);
    let norm = {
        let two_pi = 2.0 * PI;
        let m = (th + PI) - two_pi * ((th + PI) / two_pi).floor();
        m - PI
    };
    let cost = norm * norm + 0.1 * thdot * thdot + 0.001 * u * u;
    let mut newthdot = thdot + (3.0 * 10.0 / 2.0 * th.sin() + 3.0 * u) * 0.05;
    newthdot = newthdot.max(-8.0).min(8.0);
    let newth = th + newthdot * 0.05;
    ([newth.cos(), newth.sin(), newthdot], -cost)
}

/// Equations of motion as a 2x2 mass-matrix system solved by Cramer's rule.
/// Mathematically equal to [`acrobot_accel`] but rounded differently.
pub fn acrobot_accel_cramer(q: [f64; 4], tau: f64) -> [f64; 4] {
    let (t1, t2, w1, w2) = (q[0], q[1], q[2], q[3]);
    let (m1, m2, l1, lc1, lc2, i1, i2, g) = (1.0, 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 9.8);
    let c2 = t2.cos();
    let s2 = t2.sin();
    let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i1 + i2;
    let m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
    let m22 = m2 * lc2 * lc2 + i2;
    let grav2 = m2 * lc2 * g * (t1 + t2 - PI / 2.0).cos();
    let grav1 = (m1 * lc1 + m2 * l1) * g * (t1 - PI / 2.0).cos() + grav2;
    let cor1 = -m2 * l1 * lc2 * s2 * (w2 * w2 + 2.0 * w1 * w2);
    let cor2 = m2 * l1 * lc2 * s2 * w1 * w1;
    // M * [a1, a2] = [-(cor1 + grav1), tau - cor2 - grav2]
    let b1 = -(cor1 + grav1);
    let b2 = tau - cor2 - grav2;
    let det = m11 * m22 - m12 * m12;
    let a1 = (b1 * m22 - m12 * b2) / det;
    let a2 = (m11 * b2 - m12 * b1) / det;
    [w1, w2, a1, a2]
}

/// The closed-form accelerations of the standard formulation.
pub fn acrobot_accel(q: [f64; 4], tau: f64) -> [f64; 4] {
    let (t1, t2, w1, w2) = (q[0], q[1], q[2], q[3]);
    let g = 9.8;
    // m1 = m2 = l1 = 1, lc1 = lc2 = 0.5, I1 = I2 = 1
    let d1 = 0.25 + (1.0 + 0.25 + t2.cos()) + 2.0;
    let d2 = (0.25 + 0.5 * t2.cos()) + 1.0;
    let phi2 = 0.5 * g * f64::cos(t1 + t2 - PI / 2.0);
    let phi1 = -0.5 * w2 * w2 * t2.sin() - 2.0 * 0.5 * w2 * w1 * t2.sin() + 1.5 * g * f64::cos(t1 - PI / 2.0) + phi2;
    let a2 = (tau + d2 / d1 * phi1 - 0.5 * w1 * w1 * t2.sin() - phi2) / (0.25 + 1.0 - d2 * d2 / d1);
    let a1 = -(d2 * a2 + phi1) / d1;
    [w1, w2, a1, a2]
}

fn wrap(x: f64) -> f64 {
    let mut y = x;
    while y > PI {
        y -= 2.0 * PI;
    }
    while y < -PI {
        y += 2.0 * PI;
    }
    y
}

pub fn acrobot(obs: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
    acrobot_with(acrobot_accel, obs, action)
}

pub fn acrobot_with(accel: fn([f64; 4], f64) -> [f64; 4], obs: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
    let acrobot_accel = accel;
    let tau = action as f64 - 1.0;
    let s = [obs[1].atan2(obs[0]), obs[3].atan2(obs[2]), obs[4], obs[5]];
    let dt = 0.2;
    let axpy = |x: [f64; 4], k: [f64; 4], h: f64| [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2], x[3] + h * k[3]];
    let k1 = acrobot_accel(s, tau);
    let k2 = acrobot_accel(axpy(s, k1, dt / 2.0), tau);
    let k3 = acrobot_accel(axpy(s, k2, dt / 2.0), tau);
    let k4 = acrobot_accel(axpy(s, k3, dt), tau);
    let mut n = [0.0; 4];
    for i in 0..4 {
        n[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    n[0] = wrap(n[0]);
    n[1] = wrap(n[1]);
    n[2] = n[2].max(-4.0 * PI).min(4.0 * PI);
    n[3] = n[3].max(-9.0 * PI).min(9.0 * PI);
    let done = -n[0].cos() - (n[1] + n[0]).cos() > 1.0;
    (
        vec![n[0].cos(), n[0].sin(), n[1].cos(), n[1].sin(), n[2], n[3]],
        if done { 0.0 } else { -1.0 },
        done,
    )
}

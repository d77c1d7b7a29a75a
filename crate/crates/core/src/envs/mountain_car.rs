use super::{EnvError, Transition};

pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const INIT_POSITION: (f64, f64) = (-0.6, -0.4);

/// One MountainCar transition.
///
/// Velocity is updated first, then position moves by the new velocity. Both
/// are clipped; hitting either wall is inelastic and zeroes the velocity.
pub fn step(state: [f64; 2], action: usize) -> Result<Transition, EnvError> {
    if action > 2 {
        return Err(EnvError::Domain(format!("MountainCar action {action} not in {{0,1,2}}")));
    }
    let [position, velocity] = state;
    let mut velocity = velocity + (action as f64 - 1.0) * FORCE - (3.0 * position).cos() * GRAVITY;
    velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
    let mut position = position + velocity;
    if position <= MIN_POSITION {
        position = MIN_POSITION;
        if velocity < 0.0 {
            velocity = 0.0;
        }
    } else if position >= MAX_POSITION {
        position = MAX_POSITION;
        if velocity > 0.0 {
            velocity = 0.0;
        }
    }
    Ok(Transition {
        state: vec![position, velocity],
        reward: -1.0,
        terminated: position >= GOAL_POSITION,
    })
}

//! Scripted controllers that stand in for trained agents, plus a seeded
//! uniform-random policy.

use rand::Rng;

use crate::domain::{Action, ActionSpace, TaskSpec};
use crate::envs::{acrobot, pendulum, BuiltinEnv};
use crate::rng;

/// Position of a decision inside a dataset, used to key stochastic policies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCtx {
    pub episode: usize,
    pub t: usize,
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn act(&self, state: &[f64], ctx: StepCtx) -> Action;
}

/// Pushes along the current velocity to pump energy into the car.
#[derive(Debug, Clone, Copy, Default)]
pub struct MountainCarBangBang;

pub fn mc_bang_bang(state: &[f64]) -> usize {
    if state[1] >= 0.0 {
        2
    } else {
        0
    }
}

impl Policy for MountainCarBangBang {
    fn name(&self) -> &str {
        "mc_bang_bang"
    }

    fn act(&self, state: &[f64], _ctx: StepCtx) -> Action {
        Action::Discrete(mc_bang_bang(state))
    }
}

/// Energy-shaping swing-up with a PD catch near upright.
#[derive(Debug, Clone, Copy)]
pub struct PendulumSwingUp {
    pub energy_gain: f64,
    pub kp: f64,
    pub kd: f64,
    /// Switch to the PD law once `cos(theta)` exceeds this.
    pub capture_cos: f64,
}

impl Default for PendulumSwingUp {
    fn default() -> Self {
        Self {
            energy_gain: 0.2,
            kp: 20.0,
            kd: 2.0,
            capture_cos: 0.8,
        }
    }
}

impl PendulumSwingUp {
    pub fn torque(&self, obs: &[f64]) -> f64 {
        let theta = pendulum::angle_of(obs);
        let theta_dot = obs[2];
        let stiffness = 3.0 * pendulum::G / (2.0 * pendulum::LENGTH);
        let u = if theta.cos() > self.capture_cos {
            -self.kp * theta - self.kd * theta_dot
        } else {
            // Scaled energy: upright at rest has exactly `stiffness`.
            let energy = 0.5 * theta_dot * theta_dot + stiffness * theta.cos();
            let u = self.energy_gain * theta_dot * (stiffness - energy);
            if theta_dot.abs() < 1e-9 {
                // At rest the shaping term vanishes; kick to start swinging.
                1.0
            } else {
                u
            }
        };
        u.clamp(-pendulum::MAX_TORQUE, pendulum::MAX_TORQUE)
    }
}

pub fn pendulum_energy_swingup(obs: &[f64]) -> f64 {
    PendulumSwingUp::default().torque(obs)
}

impl Policy for PendulumSwingUp {
    fn name(&self) -> &str {
        "pendulum_energy_swingup"
    }

    fn act(&self, state: &[f64], _ctx: StepCtx) -> Action {
        Action::Continuous(vec![self.torque(state)])
    }
}

/// Bang-bang elbow torque against the shoulder's angular velocity; the
/// reaction on the first link pushes it along its swing.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcrobotPump;

pub fn acrobot_pump(obs: &[f64]) -> usize {
    let [_, _, dtheta1, _] = acrobot::joints_of(obs);
    if dtheta1 >= 0.0 {
        0
    } else {
        2
    }
}

impl Policy for AcrobotPump {
    fn name(&self) -> &str {
        "acrobot_pump"
    }

    fn act(&self, state: &[f64], _ctx: StepCtx) -> Action {
        Action::Discrete(acrobot_pump(state))
    }
}

/// Uniform over the action space, deterministic per `(seed, episode, t)`.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    space: ActionSpace,
    seed: u64,
}

pub fn random_policy(task: &TaskSpec, seed: u64) -> RandomPolicy {
    RandomPolicy {
        space: task.action_space.clone(),
        seed,
    }
}

impl RandomPolicy {
    pub fn sample(&self, ctx: StepCtx) -> Action {
        let mut r = rng::stream("random_policy", &[&self.seed, &ctx.episode, &ctx.t]);
        match &self.space {
            ActionSpace::Discrete { n } => Action::Discrete(r.gen_range(0..*n)),
            ActionSpace::Continuous { bounds } => {
                Action::Continuous(bounds.iter().map(|b| r.gen_range(b.low..=b.high)).collect())
            }
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, _state: &[f64], ctx: StepCtx) -> Action {
        self.sample(ctx)
    }
}

pub fn scripted(env: BuiltinEnv) -> Box<dyn Policy> {
    match env {
        BuiltinEnv::MountainCar => Box::new(MountainCarBangBang),
        BuiltinEnv::Pendulum => Box::new(PendulumSwingUp::default()),
        BuiltinEnv::Acrobot => Box::new(AcrobotPump),
    }
}

/// Resolves a policy by name; `None` or `"scripted"` picks the task's controller.
pub fn by_name(name: Option<&str>, env: BuiltinEnv, seed: u64) -> Result<Box<dyn Policy>, String> {
    match name {
        None | Some("scripted") => Ok(scripted(env)),
        Some("random") => Ok(Box::new(random_policy(&env.spec(), seed))),
        Some(other) => {
            let p = scripted(env);
            if p.name() == other {
                Ok(p)
            } else {
                Err(format!("policy `{other}` is not available for {}", env.name()))
            }
        }
    }
}

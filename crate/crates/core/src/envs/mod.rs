//! Deterministic simulators for the built-in tasks.
//!
//! Each simulator is a pure function of `(observation, action)`. Angles are
//! recovered from the stored `(cos, sin)` pairs on every step, so an episode
//! can be replayed from its recorded states alone.

pub mod acrobot;
pub mod mountain_car;
pub mod pendulum;

use rand::Rng;

use crate::domain::{Action, TaskSpec};
use crate::rng;
use crate::tasks;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("task `{0}` has no built-in simulator")]
    NotBuiltin(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinEnv {
    MountainCar,
    Pendulum,
    Acrobot,
}

impl BuiltinEnv {
    pub const ALL: [BuiltinEnv; 3] = [BuiltinEnv::MountainCar, BuiltinEnv::Acrobot, BuiltinEnv::Pendulum];

    pub fn for_task(name: &str) -> Result<Self, EnvError> {
        match tasks::lookup(name).map(|t| t.name.as_str()) {
            Some("MountainCar") => Ok(BuiltinEnv::MountainCar),
            Some("Pendulum") => Ok(BuiltinEnv::Pendulum),
            Some("Acrobot") => Ok(BuiltinEnv::Acrobot),
            _ => Err(EnvError::NotBuiltin(name.to_string())),
        }
    }

    pub fn spec(&self) -> TaskSpec {
        match self {
            BuiltinEnv::MountainCar => tasks::mountain_car(),
            BuiltinEnv::Pendulum => tasks::pendulum(),
            BuiltinEnv::Acrobot => tasks::acrobot(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinEnv::MountainCar => "MountainCar",
            BuiltinEnv::Pendulum => "Pendulum",
            BuiltinEnv::Acrobot => "Acrobot",
        }
    }

    pub fn step(&self, state: &[f64], action: &Action) -> Result<Transition, EnvError> {
        let dims = |n: usize| {
            if state.len() == n {
                Ok(())
            } else {
                Err(EnvError::Domain(format!(
                    "{} expects a {n}-component state, got {}",
                    self.name(),
                    state.len()
                )))
            }
        };
        match (self, action) {
            (BuiltinEnv::MountainCar, Action::Discrete(a)) => {
                dims(2)?;
                mountain_car::step([state[0], state[1]], *a)
            }
            (BuiltinEnv::Acrobot, Action::Discrete(a)) => {
                dims(6)?;
                acrobot::step(state, *a)
            }
            (BuiltinEnv::Pendulum, Action::Continuous(u)) if u.len() == 1 => {
                dims(3)?;
                pendulum::step([state[0], state[1], state[2]], u[0])
            }
            _ => Err(EnvError::Domain(format!("{} cannot take action {action:?}", self.name()))),
        }
    }

    /// Initial observation for the `episode`-th run under `seed`.
    pub fn reset(&self, seed: u64, episode: usize) -> Vec<f64> {
        let mut r = rng::stream("reset", &[&self.name(), &seed, &episode]);
        match self {
            BuiltinEnv::MountainCar => {
                let (lo, hi) = mountain_car::INIT_POSITION;
                vec![r.gen_range(lo..=hi), 0.0]
            }
            BuiltinEnv::Pendulum => {
                let theta = r.gen_range(-std::f64::consts::PI..=std::f64::consts::PI);
                let theta_dot = r.gen_range(-1.0..=1.0);
                pendulum::observe(theta, theta_dot)
            }
            BuiltinEnv::Acrobot => {
                let mut s = [0.0; 4];
                for v in &mut s {
                    *v = r.gen_range(-0.1..=0.1);
                }
                acrobot::observe(&s)
            }
        }
    }
}

//! Evaluation harness for probing how well language models build mental
//! models of reinforcement-learning agents: simulators and scripted policies
//! produce episode datasets, queries mask out one step of an episode, prompts
//! are rendered and sent to a backend, and the parsed answers are scored.

pub mod backends;
pub mod dataset;
pub mod domain;
pub mod envs;
pub mod metrics;
pub mod parsing;
pub mod policies;
pub mod prompting;
pub mod rng;
pub mod runner;
pub mod tasks;

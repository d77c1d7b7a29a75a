//! Registry of known task specifications.
//!
//! Three tasks ship with analytic simulators (MountainCar, Pendulum, Acrobot);
//! the rest describe external-physics tasks whose episodes enter through
//! file ingestion.

use std::sync::LazyLock;

use crate::domain::TaskSpec;

/// Bumped whenever a task text asset changes wording.
pub const TASK_TEXT_VERSION: u32 = 1;

const ASSETS: [&str; 8] = [
    include_str!("../assets/tasks/mountain_car.toml"),
    include_str!("../assets/tasks/acrobot.toml"),
    include_str!("../assets/tasks/lunar_lander.toml"),
    include_str!("../assets/tasks/pendulum.toml"),
    include_str!("../assets/tasks/inverted_double_pendulum.toml"),
    include_str!("../assets/tasks/fetch_pick_and_place.toml"),
    include_str!("../assets/tasks/fetch_push.toml"),
    include_str!("../assets/tasks/fetch_slide.toml"),
];

static REGISTRY: LazyLock<Vec<TaskSpec>> = LazyLock::new(|| {
    ASSETS
        .iter()
        .map(|src| {
            let spec: TaskSpec = toml::from_str(src).expect("bundled task asset parses");
            spec.validate().expect("bundled task asset is valid");
            spec
        })
        .collect()
});

pub fn all() -> &'static [TaskSpec] {
    &REGISTRY
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Looks a task up by name, ignoring case and separators
/// (`mountain-car`, `MountainCar` and `mountaincar` all match).
pub fn lookup(name: &str) -> Option<&'static TaskSpec> {
    let key = normalize(name);
    // Common gym-style suffixes such as "-v0".
    let key = key.strip_suffix("v0").or_else(|| key.strip_suffix("v1")).unwrap_or(&key);
    REGISTRY.iter().find(|t| normalize(&t.name) == key)
}

/// Whether two task names refer to the same task under `lookup`'s rules.
pub fn same_name(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

fn get(name: &str) -> TaskSpec {
    lookup(name).cloned().expect("bundled task present")
}

pub fn mountain_car() -> TaskSpec {
    get("MountainCar")
}

pub fn pendulum() -> TaskSpec {
    get("Pendulum")
}

pub fn acrobot() -> TaskSpec {
    get("Acrobot")
}

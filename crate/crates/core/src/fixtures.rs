//! World specs bundled with the crate, addressable by name from the CLI.

use std::sync::Arc;

use crate::env::{EnvError, WorldSpec};

pub const SYNTHSHOP: &str = include_str!("../fixtures/synthshop.json");
pub const PLANSUITE: &str = include_str!("../fixtures/plansuite.json");
pub const CITYMIX: &str = include_str!("../fixtures/citymix.json");

pub fn builtin_names() -> &'static [&'static str] {
    &["synthshop", "plansuite", "citymix"]
}

pub fn builtin_world(name: &str) -> Option<Result<Arc<WorldSpec>, EnvError>> {
    let text = match name {
        "synthshop" => SYNTHSHOP,
        "plansuite" => PLANSUITE,
        "citymix" => CITYMIX,
        _ => return None,
    };
    Some(WorldSpec::parse(text).map(Arc::new))
}

/// Resolves a bundled world name, falling back to a spec file path.
pub fn resolve_world(name_or_path: &str) -> Result<Arc<WorldSpec>, EnvError> {
    match builtin_world(name_or_path) {
        Some(spec) => spec,
        None => WorldSpec::from_path(name_or_path).map(Arc::new),
    }
}

//! Config presets shipped inside the binary, reachable by file name.

use std::path::Path;

pub const PAPER_500M: &str = include_str!("../presets/paper_500m.cfg");
pub const PAPER_B2B: &str = include_str!("../presets/paper_b2b.cfg");
pub const IDEAL: &str = include_str!("../presets/ideal.cfg");

pub const DEFAULT: &str = PAPER_500M;

/// Preset text for a bare preset file name such as `paper_500m.cfg`.
pub fn lookup(path: &Path) -> Option<&'static str> {
    if path.parent().is_some_and(|p| !p.as_os_str().is_empty()) {
        return None;
    }
    match path.to_str()? {
        "paper_500m.cfg" => Some(PAPER_500M),
        "paper_b2b.cfg" => Some(PAPER_B2B),
        "ideal.cfg" => Some(IDEAL),
        _ => None,
    }
}

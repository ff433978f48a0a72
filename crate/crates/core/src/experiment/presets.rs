//! Bundled experiment configurations.

use crate::error::{Result, SimError};

const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../../presets/fig1.toml")),
    ("fig2", include_str!("../../presets/fig2.toml")),
    ("fig3", include_str!("../../presets/fig3.toml")),
    ("fig4", include_str!("../../presets/fig4.toml")),
    ("mint0", include_str!("../../presets/mint0.toml")),
    (
        "hamiltonian",
        include_str!("../../presets/hamiltonian.toml"),
    ),
    (
        "lagrangian-exact",
        include_str!("../../presets/lagrangian-exact.toml"),
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<_> = preset_names().collect();
            SimError::Config(format!(
                "unknown preset `{name}` (known: {})",
                known.join(", ")
            ))
        })
}

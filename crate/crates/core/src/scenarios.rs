//! Bundled example scenarios. Their numbers are made up to show typical
//! curve shapes and are marked `illustrative` in their metadata.

use crate::io::{parse_scenario, ScenarioFile};

/// `(name, JSON text)` of every bundled scenario.
pub const ALL: [(&str, &str); 4] = [
    ("remote-scada", include_str!("../scenarios/remote-scada.json")),
    ("three-gdfs", include_str!("../scenarios/three-gdfs.json")),
    (
        "smart-meters-vs-relays",
        include_str!("../scenarios/smart-meters-vs-relays.json"),
    ),
    ("wifi-thermostats", include_str!("../scenarios/wifi-thermostats.json")),
];

pub fn text(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled scenario by name.
pub fn load(name: &str) -> Option<ScenarioFile> {
    text(name).map(|t| parse_scenario(t).expect("bundled scenarios are valid"))
}

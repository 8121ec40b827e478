//! Bundled configuration files.

pub const PRESETS: &[(&str, &str)] = &[
    ("single-site", include_str!("../presets/single-site.toml")),
    ("two-site", include_str!("../presets/two-site.toml")),
    ("weak-oracle", include_str!("../presets/weak-oracle.toml")),
    ("two-site-oracle", include_str!("../presets/two-site-oracle.toml")),
    ("two-emitter", include_str!("../presets/two-emitter.toml")),
    ("single-emitter", include_str!("../presets/single-emitter.toml")),
    ("double-slit-scale", include_str!("../presets/double-slit-scale.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

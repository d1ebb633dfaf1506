//! Scenario sources shipped with the library.

pub const BUILTIN_NAMES: [&str; 6] = ["pair", "chain", "paradox", "network_no_interact", "network_with_G", "great_grand"];

const SOURCES: [(&str, &str); 6] = [
    ("pair", include_str!("../../scenarios/pair.qrf")),
    ("chain", include_str!("../../scenarios/chain.qrf")),
    ("paradox", include_str!("../../scenarios/paradox.qrf")),
    ("network_no_interact", include_str!("../../scenarios/network_no_interact.qrf")),
    ("network_with_G", include_str!("../../scenarios/network_with_G.qrf")),
    ("great_grand", include_str!("../../scenarios/great_grand.qrf")),
];

/// Source text of a bundled scenario. A trailing `.qrf` is ignored.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".qrf").unwrap_or(name);
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// `(name, source)` for every bundled scenario, in catalog order.
pub fn builtin_scenarios() -> impl Iterator<Item = (&'static str, &'static str)> {
    SOURCES.iter().copied()
}

/// Shipped experiment presets as `(name, JSON)`; the same files live in the
/// crate's `presets/` directory.
pub const PRESETS: [(&str, &str); 4] = [
    (
        "scm_spurious",
        include_str!("../../presets/scm_spurious.json"),
    ),
    ("glyphs_rot", include_str!("../../presets/glyphs_rot.json")),
    (
        "ablation_fraction",
        include_str!("../../presets/ablation_fraction.json"),
    ),
    (
        "ablation_iterative",
        include_str!("../../presets/ablation_iterative.json"),
    ),
];

/// JSON text of a shipped preset.
pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

use spin_dce::{Error, Result};

pub const NAMES: [&str; 5] = ["fig2b", "fig3a", "fig3c", "fig4", "quench-homogeneous"];

pub fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2b" => include_str!("../presets/fig2b.toml"),
        "fig3a" => include_str!("../presets/fig3a.toml"),
        "fig3c" => include_str!("../presets/fig3c.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "quench-homogeneous" => include_str!("../presets/quench-homogeneous.toml"),
        _ => return None,
    })
}

pub fn preset_table(name: &str) -> Result<toml::Table> {
    let src = preset_source(name).ok_or_else(|| {
        Error::config(
            "cli",
            format!("unknown preset '{name}' (available: {})", NAMES.join(", ")),
        )
    })?;
    src.parse()
        .map_err(|e: toml::de::Error| Error::config("cli", format!("preset {name}: {e}")))
}

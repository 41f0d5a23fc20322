//! Config parsing, result export and figure presets for the `majorana-nh`
//! command-line tool.

pub mod config;
pub mod export;
pub mod presets;
pub mod run;
pub mod svg;

use std::path::PathBuf;

use majorana_nh_core::model::EnergyScale;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use presets::{preset, Preset, PRESET_IDS};
pub use run::{execute, CliError, Report};

pub const THREADS_ENV: &str = "MAJORANA_NH_THREADS";
pub const OUT_ENV: &str = "MAJORANA_NH_OUT";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scale: Option<EnergyScale>,
}

/// Merges `overlay` into `base`, descending into tables.
fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn unknown_preset(id: &str) -> ConfigError {
    ConfigError::new(
        Some("preset"),
        format!("unknown preset `{id}`; available: {}", PRESET_IDS.join(", ")),
    )
}

/// Builds the run config from optional config text and an optional preset.
///
/// For `reproduce`, the preset (from `preset_id` or the config's `preset`
/// key) supplies every default and the config text is overlaid on it.
pub fn resolve(
    command: Command,
    text: Option<&str>,
    preset_id: Option<&str>,
    overrides: &Overrides,
) -> Result<(RunConfig, Option<Preset>), ConfigError> {
    let source = text.unwrap_or("");
    let user: toml::Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| ConfigError {
            line: e.span().map(|s| t[..s.start].matches('\n').count() + 1),
            key: None,
            message: e.message().trim().to_string(),
        })?,
        None => toml::Table::new(),
    };
    let preset = if command == Command::Reproduce {
        let from_text = user.get("preset").and_then(|v| v.as_str());
        let id = preset_id.or(from_text).ok_or_else(|| ConfigError::new(Some("preset"), "reproduce needs a preset"))?;
        if let (Some(a), Some(b)) = (preset_id, from_text) {
            if a != b {
                return Err(ConfigError::new(Some("preset"), format!("config is for preset `{b}` but `{a}` was requested")));
            }
        }
        Some(presets::preset(id).ok_or_else(|| unknown_preset(id))?)
    } else {
        if preset_id.is_some() {
            return Err(ConfigError::new(Some("preset"), "--preset is only valid for reproduce"));
        }
        None
    };
    let mut config = match &preset {
        Some(p) => {
            let mut base: toml::Table = toml::from_str(&p.config.to_toml()).expect("preset serializes");
            if user.contains_key("model") {
                // A user model replaces the preset model rather than mixing keys.
                base.remove("model");
            }
            merge(&mut base, user);
            config::parse_table(source, base, Some(command))?
        }
        None => {
            if text.is_none() {
                return Err(ConfigError::new(None, format!("`{command}` needs --config")));
            }
            parse_config(source, Some(command))?
        }
    };
    if let Some(out) = &overrides.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(scale) = overrides.scale {
        config.scale = scale;
    }
    Ok((config, preset))
}

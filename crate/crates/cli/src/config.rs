//! Run configuration: TOML surface syntax, defaults and validation.
//!
//! Complex numbers are written either as `[re, im]`, as a bare real number,
//! or as a polar table `{ mod = 2.5, phase_over_pi = 0.3333333333 }`.

use std::f64::consts::PI;
use std::fmt;

use majorana_nh_core::model::{Coupling3, DmiVectors, EnergyScale, Extension, MagParams, ModelConfig};
use majorana_nh_core::ribbon::{Boundary, Classifier, NhseOptions, WeightNormalization};
use num_complex::Complex64;
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", location(.line, .key))]
pub struct ConfigError {
    /// 1-based line of the offending key or value, when known.
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

fn location(line: &Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!("line {l}, key `{k}`: "),
        (Some(l), None) => format!("line {l}: "),
        (None, Some(k)) => format!("key `{k}`: "),
        (None, None) => String::new(),
    }
}

impl ConfigError {
    pub fn new(key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: key.map(str::to_string),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BlochSpectrum,
    EpFind,
    ArcTrace,
    SkinCheck,
    RibbonSweep,
    Localization,
    Reproduce,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BlochSpectrum => "bloch-spectrum",
            Command::EpFind => "ep-find",
            Command::ArcTrace => "arc-trace",
            Command::SkinCheck => "skin-check",
            Command::RibbonSweep => "ribbon-sweep",
            Command::Localization => "localization",
            Command::Reproduce => "reproduce",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A complex number in config syntax; always written back as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexValue(pub Complex64);

impl Serialize for ComplexValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(ComplexVisitor)
    }
}

struct ComplexVisitor;

impl<'de> Visitor<'de> for ComplexVisitor {
    type Value = ComplexValue;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a complex number as [re, im], a real number, or { mod, phase_over_pi }")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
        Ok(ComplexValue(Complex64::new(v, 0.0)))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
        self.visit_f64(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
        self.visit_f64(v as f64)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
        let re: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
        let im: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
        if seq.next_element::<f64>()?.is_some() {
            return Err(de::Error::invalid_length(3, &self));
        }
        Ok(ComplexValue(Complex64::new(re, im)))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
        let (mut modulus, mut phase) = (None, None);
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "mod" => modulus = Some(map.next_value::<f64>()?),
                "phase_over_pi" => phase = Some(map.next_value::<f64>()?),
                other => return Err(de::Error::unknown_field(other, &["mod", "phase_over_pi"])),
            }
        }
        let modulus = modulus.ok_or_else(|| de::Error::missing_field("mod"))?;
        let phase = phase.ok_or_else(|| de::Error::missing_field("phase_over_pi"))?;
        Ok(ComplexValue(Complex64::from_polar(modulus, phase * PI)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Pure,
    K,
    Gamma,
    Mag,
}

/// DMI geometry: a named default or explicit post-cross-product vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DmiSpec {
    Named(DmiName),
    Explicit(DmiTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmiName {
    C3,
    WithoutZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmiTable {
    pub x: [f64; 2],
    pub y: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<[f64; 2]>,
}

impl DmiSpec {
    fn vectors(&self) -> DmiVectors {
        match self {
            DmiSpec::Named(DmiName::C3) => DmiVectors::c3(),
            DmiSpec::Named(DmiName::WithoutZ) => DmiVectors::without_z(),
            DmiSpec::Explicit(t) => DmiVectors { x: t.x, y: t.y, z: t.z },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: VariantName,
    /// `[J_x, J_y, J_z]`.
    pub j: [ComplexValue; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<ComplexValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<ComplexValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_field: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmi: Option<DmiSpec>,
}

impl ModelSection {
    /// Fills variant defaults so the echoed config is fully explicit.
    fn resolve(&mut self) {
        let zero = ComplexValue(Complex64::new(0.0, 0.0));
        match self.variant {
            VariantName::Pure => {}
            VariantName::K => {
                self.k.get_or_insert(zero);
            }
            VariantName::Gamma => {
                self.gamma.get_or_insert(zero);
            }
            VariantName::Mag => {
                self.d.get_or_insert(0.0);
                self.b_field.get_or_insert([0.0; 3]);
                self.dmi.get_or_insert(DmiSpec::Named(DmiName::C3));
            }
        }
    }

    /// Keys set but meaningless for the chosen variant.
    fn foreign_keys(&self) -> Vec<&'static str> {
        let allowed: &[&str] = match self.variant {
            VariantName::Pure => &[],
            VariantName::K => &["k"],
            VariantName::Gamma => &["gamma"],
            VariantName::Mag => &["d", "b_field", "dmi"],
        };
        let present = [
            ("k", self.k.is_some()),
            ("gamma", self.gamma.is_some()),
            ("d", self.d.is_some()),
            ("b_field", self.b_field.is_some()),
            ("dmi", self.dmi.is_some()),
        ];
        present
            .iter()
            .filter(|(key, set)| *set && !allowed.contains(key))
            .map(|(key, _)| *key)
            .collect()
    }

    pub fn to_model(&self) -> ModelConfig {
        let [x, y, z] = self.j;
        let j = Coupling3::new(x.0, y.0, z.0);
        let zero = Complex64::new(0.0, 0.0);
        let extension = match self.variant {
            VariantName::Pure => Extension::None,
            VariantName::K => Extension::K(self.k.map_or(zero, |v| v.0)),
            VariantName::Gamma => Extension::Gamma(self.gamma.map_or(zero, |v| v.0)),
            VariantName::Mag => Extension::Mag(MagParams {
                d: self.d.unwrap_or(0.0),
                field: self.b_field.unwrap_or([0.0; 3]),
                dmi: self.dmi.map_or(DmiVectors::c3(), |s| s.vectors()),
            }),
        };
        ModelConfig {
            j,
            extension,
            scale: EnergyScale::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Points per direction of the bond-phase grid used by `bloch-spectrum`,
    /// `ep-find` and `arc-trace`.
    pub bz_n: usize,
    /// Dimer rows of the ribbon.
    pub w: usize,
    pub kx_samples: usize,
    pub boundary: Boundary,
    /// Transverse samples of the periodic reference cloud; 0 disables it.
    pub cloud_samples: usize,
    /// Flavour `1..=3` for `arc-trace`; all flavours when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flavour: Option<u8>,
    /// Explicit momenta `[k_x, k_y]` for `bloch-spectrum`; replaces the grid
    /// when nonempty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub k_points: Vec<[f64; 2]>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            bz_n: 64,
            w: 52,
            kx_samples: 402,
            boundary: Boundary::Open,
            cloud_samples: 512,
            flavour: None,
            k_points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationSection {
    /// Dimer rows of the ribbon used for eigenvector profiles.
    pub w: usize,
    pub kx_values: Vec<f64>,
    /// Number of states nearest to zero energy, used unless `indices` is set.
    pub states: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    pub normalization: WeightNormalization,
}

impl Default for LocalizationSection {
    fn default() -> Self {
        Self {
            w: 12,
            kx_values: vec![2.0 * PI / 3.0],
            states: 6,
            indices: None,
            normalization: WeightNormalization::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    /// Eigensolver residual target; the size-dependent default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eig: Option<f64>,
    pub gap_rel: f64,
    pub overlap: f64,
    pub cloud: f64,
    pub edge_fraction: f64,
    pub edge_mass: f64,
    pub nhse_presence: f64,
    pub flip_deadband: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let c = Classifier::default();
        let n = NhseOptions::default();
        Self {
            eig: None,
            gap_rel: 1e-6,
            overlap: 1e-4,
            cloud: c.cloud_tol,
            edge_fraction: c.edge_fraction,
            edge_mass: c.edge_mass,
            nhse_presence: n.presence_threshold,
            flip_deadband: n.flip_deadband,
        }
    }
}

impl ToleranceSection {
    pub fn classifier(&self) -> Classifier {
        Classifier {
            edge_fraction: self.edge_fraction,
            edge_mass: self.edge_mass,
            cloud_tol: self.cloud,
        }
    }

    pub fn nhse(&self) -> NhseOptions {
        NhseOptions {
            presence_threshold: self.nhse_presence,
            flip_deadband: self.flip_deadband,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Ndjson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<Format>,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            formats: vec![Format::Csv, Format::Json],
            svg: true,
        }
    }
}

/// A fully resolved run; serializing it yields a config that reproduces the
/// run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Preset the run was derived from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub scale: EnergyScale,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub localization: LocalizationSection,
    #[serde(default)]
    pub tolerance: ToleranceSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn model(&self) -> ModelConfig {
        self.model.as_ref().map(ModelSection::to_model).expect("validated config has a model")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// 1-based line containing byte `offset`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside the `[section]` table, if written that way.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        if (current == section && lhs == key) || lhs == format!("{section}.{key}") {
            return Some(i + 1);
        }
    }
    None
}

fn parse_error(text: &str, err: toml::de::Error) -> ConfigError {
    ConfigError {
        line: err.span().map(|s| line_of(text, s.start)),
        key: None,
        message: err.message().trim().to_string(),
    }
}

/// Parses a TOML table into a [`RunConfig`], with `command` supplied by the
/// caller when the text omits it.
pub fn parse_table(text: &str, table: toml::Table, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let mut table = table;
    if let Some(cmd) = command {
        match table.get("command").and_then(|v| v.as_str()) {
            Some(given) if given != cmd.name() => {
                return Err(ConfigError {
                    line: key_line(text, "", "command"),
                    key: Some("command".into()),
                    message: format!("config is for `{given}` but `{cmd}` was requested"),
                })
            }
            _ => {
                table.insert("command".into(), toml::Value::String(cmd.name().into()));
            }
        }
    }
    let mut config: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::new(None, e.message().trim()))?;
    validate(text, &mut config)?;
    Ok(config)
}

/// Parses config text; `command` fills in or must match the `command` key.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    // Deserialize once straight from the text so type errors carry spans.
    if let Err(e) = toml::from_str::<RunConfigShape>(text) {
        return Err(parse_error(text, e));
    }
    parse_table(text, table, command)
}

/// Mirror of [`RunConfig`] with `command` optional, used only to locate
/// schema errors in the source text.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct RunConfigShape {
    #[serde(default)]
    command: Option<Command>,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    scale: EnergyScale,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    model: Option<ModelSection>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    localization: LocalizationSection,
    #[serde(default)]
    tolerance: ToleranceSection,
    #[serde(default)]
    output: OutputSection,
}

fn invalid(text: &str, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: key_line(text, section, key),
        key: Some(if section.is_empty() { key.to_string() } else { format!("{section}.{key}") }),
        message: message.into(),
    }
}

fn validate(text: &str, c: &mut RunConfig) -> Result<(), ConfigError> {
    match (&mut c.model, c.command) {
        (None, Command::Reproduce) if c.preset.is_some() => {}
        (None, _) => return Err(ConfigError::new(Some("model"), "missing [model] table")),
        (Some(m), _) => {
            if let Some(key) = m.foreign_keys().first() {
                let variant = serde_json::to_value(m.variant).unwrap_or_default();
                return Err(invalid(
                    text,
                    "model",
                    key,
                    format!("field not valid for variant {}", variant.as_str().unwrap_or("?")),
                ));
            }
            m.resolve();
            if let Err(e) = m.to_model().validate() {
                return Err(invalid(text, "model", "j", e.to_string()));
            }
        }
    }
    let g = &c.grid;
    if g.w < 2 {
        return Err(invalid(text, "grid", "w", "ribbon needs at least 2 dimer rows"));
    }
    if g.bz_n < 2 {
        return Err(invalid(text, "grid", "bz_n", "grid needs at least 2 points per direction"));
    }
    if matches!(c.command, Command::EpFind | Command::ArcTrace) && g.bz_n < 32 {
        return Err(invalid(text, "grid", "bz_n", "EP scans need at least 32 points per direction"));
    }
    if !g.k_points.iter().flatten().all(|k| k.is_finite()) {
        return Err(invalid(text, "grid", "k_points", "values must be finite"));
    }
    if g.kx_samples == 0 {
        return Err(invalid(text, "grid", "kx_samples", "at least one k_x sample is required"));
    }
    if let Some(f) = g.flavour {
        if !(1..=3).contains(&f) {
            return Err(invalid(text, "grid", "flavour", "flavour must be 1, 2 or 3"));
        }
    }
    let l = &c.localization;
    if l.w < 2 {
        return Err(invalid(text, "localization", "w", "ribbon needs at least 2 dimer rows"));
    }
    if !l.kx_values.iter().all(|k| k.is_finite()) {
        return Err(invalid(text, "localization", "kx_values", "values must be finite"));
    }
    if l.states == 0 && l.indices.as_ref().is_none_or(|v| v.is_empty()) {
        return Err(invalid(text, "localization", "states", "empty state selection"));
    }
    let t = &c.tolerance;
    let positive = [
        ("gap_rel", t.gap_rel),
        ("overlap", t.overlap),
        ("cloud", t.cloud),
        ("edge_fraction", t.edge_fraction),
        ("edge_mass", t.edge_mass),
        ("nhse_presence", t.nhse_presence),
    ];
    for (key, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(text, "tolerance", key, "must be positive and finite"));
        }
    }
    if !(t.flip_deadband >= 0.0) {
        return Err(invalid(text, "tolerance", "flip_deadband", "must be nonnegative"));
    }
    if let Some(e) = t.eig {
        if !(e > 0.0) {
            return Err(invalid(text, "tolerance", "eig", "must be positive"));
        }
    }
    if c.output.formats.is_empty() && !c.output.svg {
        return Err(invalid(text, "output", "formats", "no output requested"));
    }
    Ok(())
}

//! Figure-reproduction presets.
//!
//! Spectrum presets sweep a 52-row ribbon over 402 `k_x` points with the
//! figure energy scale of 1/2. Profile presets compute right-eigenvector
//! weights on a 12-row ribbon at representative `k_x` values and summarize a
//! sweep of the same ribbon.

use std::f64::consts::PI;

use majorana_nh_core::model::EnergyScale;
use majorana_nh_core::ribbon::WeightNormalization;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{
    Command, ComplexValue, DmiName, DmiSpec, GridSection, LocalizationSection, ModelSection, OutputSection, RunConfig,
    ToleranceSection, VariantName,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Value given with the reference figure.
    Stated,
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub parameter: &'static str,
    pub source: Source,
    pub note: &'static str,
}

/// Qualitative outcome the figure shows; `None` where it shows nothing
/// checkable.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Expectation {
    pub nhse: Option<bool>,
    pub extended_states_coexist: Option<bool>,
    /// Zero-energy edge bands are the only states outside the periodic cloud.
    pub obc_within_pbc_except_edges: Option<bool>,
    pub flips_near: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub id: &'static str,
    pub title: &'static str,
    pub provenance: Vec<Provenance>,
    pub expect: Expectation,
    #[serde(skip)]
    pub config: RunConfig,
}

pub const PRESET_IDS: [&str; 13] = [
    "fig2a-like", "fig2b-like", "fig2c-like", "fig3a", "fig3b", "fig3c", "fig4", "fig5", "fig6a", "fig6b", "fig6c",
    "fig7", "fig8",
];

fn cv(re: f64) -> ComplexValue {
    ComplexValue(Complex64::new(re, 0.0))
}

fn polar(m: f64, phase_over_pi: f64) -> ComplexValue {
    ComplexValue(Complex64::from_polar(m, phase_over_pi * PI))
}

#[derive(Clone, Copy)]
enum Couplings {
    /// `(2, 1, 2.5)` or `(1, 1, 1)`.
    Real,
    /// Complex `J_z` only.
    ComplexZ,
    /// `J_x`, `J_y` complex with relative phase π/6.
    ComplexXy,
}

fn gamma_family(c: Couplings) -> [ComplexValue; 3] {
    match c {
        Couplings::Real => [cv(2.0), cv(1.0), cv(2.5)],
        Couplings::ComplexZ => [cv(2.0), cv(1.0), polar(2.5, 1.0 / 3.0)],
        Couplings::ComplexXy => [polar(2.0, 1.0 / 3.0), polar(1.0, 1.0 / 6.0), cv(2.5)],
    }
}

fn mag_family(c: Couplings) -> [ComplexValue; 3] {
    match c {
        Couplings::Real => [cv(1.0), cv(1.0), cv(1.0)],
        Couplings::ComplexZ => [cv(1.0), cv(1.0), polar(1.0, 1.0 / 3.0)],
        Couplings::ComplexXy => [polar(1.0, 1.0 / 3.0), polar(1.0, 1.0 / 6.0), cv(1.0)],
    }
}

fn model(variant: VariantName, c: Couplings) -> ModelSection {
    let mut m = ModelSection {
        variant,
        j: match variant {
            VariantName::Mag => mag_family(c),
            _ => gamma_family(c),
        },
        k: None,
        gamma: None,
        d: None,
        b_field: None,
        dmi: None,
    };
    match variant {
        VariantName::K => m.k = Some(cv(0.4)),
        VariantName::Gamma => m.gamma = Some(cv(0.4)),
        VariantName::Mag => {
            m.d = Some(0.5);
            m.b_field = Some([0.0, 0.0, 0.7]);
            m.dmi = Some(DmiSpec::Named(DmiName::C3));
        }
        VariantName::Pure => {}
    }
    m
}

fn base(id: &str, model: ModelSection) -> RunConfig {
    RunConfig {
        command: Command::Reproduce,
        preset: Some(id.to_string()),
        scale: EnergyScale::Half,
        seed: 0,
        model: Some(model),
        grid: GridSection::default(),
        localization: LocalizationSection {
            kx_values: Vec::new(),
            ..LocalizationSection::default()
        },
        tolerance: ToleranceSection::default(),
        output: OutputSection {
            dir: format!("out/{id}"),
            ..OutputSection::default()
        },
    }
}

fn spectrum(id: &str, model: ModelSection) -> RunConfig {
    base(id, model)
}

fn profiles(id: &str, model: ModelSection) -> RunConfig {
    let mut c = base(id, model);
    c.grid.w = 12;
    c.localization = LocalizationSection {
        w: 12,
        kx_values: vec![PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0],
        states: 12,
        indices: None,
        normalization: WeightNormalization::Linear,
    };
    c
}

/// K-model spectra plus the log-scaled edge-mode snapshot at `k_x = 2π/3`.
fn k_spectrum(id: &str, c: Couplings) -> RunConfig {
    let mut cfg = spectrum(id, model(VariantName::K, c));
    cfg.localization = LocalizationSection {
        w: 52,
        kx_values: vec![2.0 * PI / 3.0],
        states: 6,
        indices: None,
        normalization: WeightNormalization::Log01,
    };
    cfg
}

fn stated(parameter: &'static str, note: &'static str) -> Provenance {
    Provenance { parameter, source: Source::Stated, note }
}

fn assumed(parameter: &'static str, note: &'static str) -> Provenance {
    Provenance { parameter, source: Source::Assumed, note }
}

fn ribbon_notes(profile: bool) -> Vec<Provenance> {
    if profile {
        vec![
            stated("w", "12 rows of z-links, 24 sublattice sites"),
            assumed("kx_values", "representative k_x values are shown only as plot labels"),
            assumed("states", "the 12 states nearest zero energy"),
            assumed("kx_samples", "summary sweep density is unstated"),
        ]
    } else {
        vec![
            stated("w", "52 rows, matrix dimension 6 x 52"),
            stated("scale", "spectra scaled by 1/2"),
            assumed("kx_samples", "k_x grid density is unstated"),
        ]
    }
}

fn no_nhse() -> Expectation {
    Expectation {
        nhse: Some(false),
        ..Default::default()
    }
}

fn mixed_nhse() -> Expectation {
    Expectation {
        nhse: Some(true),
        extended_states_coexist: Some(true),
        ..Default::default()
    }
}

fn hermitian() -> Expectation {
    Expectation {
        nhse: Some(false),
        obc_within_pbc_except_edges: Some(true),
        ..Default::default()
    }
}

pub fn preset(id: &str) -> Option<Preset> {
    use Couplings::*;
    let k_assumed = assumed("model", "K-figure couplings unstated; the Gamma-figure magnitudes with K = 0.4 are reused");
    let gamma_real = assumed("j", "real couplings (2, 1, 2.5) assumed from the complex cases");
    let gamma_z = stated("j, gamma", "J = (2, 1, 2.5 e^{i pi/3}), Gamma = 0.4");
    let gamma_xy = stated("j, gamma", "J = (2 e^{i pi/3}, e^{i pi/6}, 2.5), Gamma = 0.4");
    let mag_real = assumed("j", "real couplings (1, 1, 1) assumed from the complex cases");
    let mag_z = stated("j", "J = (1, 1, e^{i pi/3})");
    let mag_xy = stated("j", "J = (e^{i pi/3}, e^{i pi/6}, 1)");
    let mag_fields = stated("d, b_field", "D = 0.5, B = 0.7 z");
    let dmi = assumed("dmi", "z-link DMI vector completed by C3 symmetry");
    let flips = Expectation {
        nhse: Some(true),
        flips_near: Some(vec![0.0, PI]),
        ..Default::default()
    };
    let with = |mut v: Vec<Provenance>, extra: Vec<Provenance>| {
        v.extend(extra);
        v
    };
    let (title, provenance, expect, config) = match id {
        "fig2a-like" => ("K model, real couplings", with(ribbon_notes(false), vec![k_assumed]), hermitian(), k_spectrum(id, Real)),
        "fig2b-like" => ("K model, complex J_z", with(ribbon_notes(false), vec![k_assumed]), no_nhse(), k_spectrum(id, ComplexZ)),
        "fig2c-like" => (
            "K model, complex J_x and J_y",
            with(ribbon_notes(false), vec![k_assumed]),
            Expectation {
                nhse: Some(true),
                ..Default::default()
            },
            k_spectrum(id, ComplexXy),
        ),
        "fig3a" => ("Gamma model, real couplings", with(ribbon_notes(false), vec![gamma_real]), hermitian(), spectrum(id, model(VariantName::Gamma, Real))),
        "fig3b" => ("Gamma model, complex J_z", with(ribbon_notes(false), vec![gamma_z]), mixed_nhse(), spectrum(id, model(VariantName::Gamma, ComplexZ))),
        "fig3c" => ("Gamma model, complex J_x and J_y", with(ribbon_notes(false), vec![gamma_xy]), mixed_nhse(), spectrum(id, model(VariantName::Gamma, ComplexXy))),
        "fig4" => ("Gamma model profiles, complex J_z", with(ribbon_notes(true), vec![gamma_z]), mixed_nhse(), profiles(id, model(VariantName::Gamma, ComplexZ))),
        "fig5" => ("Gamma model profiles, complex J_x and J_y", with(ribbon_notes(true), vec![gamma_xy]), mixed_nhse(), profiles(id, model(VariantName::Gamma, ComplexXy))),
        "fig6a" => ("DMI and field, real couplings", with(ribbon_notes(false), vec![mag_real, mag_fields, dmi]), hermitian(), spectrum(id, model(VariantName::Mag, Real))),
        "fig6b" => ("DMI and field, complex J_z", with(ribbon_notes(false), vec![mag_z, mag_fields, dmi]), no_nhse(), spectrum(id, model(VariantName::Mag, ComplexZ))),
        "fig6c" => ("DMI and field, complex J_x and J_y", with(ribbon_notes(false), vec![mag_xy, mag_fields, dmi]), flips, spectrum(id, model(VariantName::Mag, ComplexXy))),
        "fig7" => ("DMI and field profiles, complex J_z", with(ribbon_notes(true), vec![mag_z, mag_fields, dmi]), no_nhse(), profiles(id, model(VariantName::Mag, ComplexZ))),
        "fig8" => ("DMI and field profiles, complex J_x and J_y", with(ribbon_notes(true), vec![mag_xy, mag_fields, dmi]), flips, profiles(id, model(VariantName::Mag, ComplexXy))),
        _ => return None,
    };
    Some(Preset {
        id: PRESET_IDS.iter().find(|p| **p == id)?,
        title,
        provenance,
        expect,
        config,
    })
}

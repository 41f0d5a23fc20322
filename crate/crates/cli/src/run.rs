//! Command pipelines: compute, export tables and plots, write metadata.

use std::f64::consts::PI;
use std::path::Path;

use majorana_nh_core::eigen::eig;
use majorana_nh_core::ep::{
    ep_closed_form_model, ep_scan, fermi_arc_trace, k_from_bond_phase, skin_criterion, skin_criterion_any, EpMethod,
    EpRecord, EpTolerances, ScanOptions,
};
use majorana_nh_core::error::{EigenError, EpError, ModelError, RibbonError};
use majorana_nh_core::model::{bloch_hamiltonian, ModelConfig};
use majorana_nh_core::ribbon::{
    edge_mode_weights, nhse_summary, sweep, symmetric_kx_grid, NhseSummary, StateSelection, SweepOptions, SweepResult,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{Command, ConfigError, RunConfig};
use crate::export::{Cell, OutputDir, Table};
use crate::presets::{Expectation, Preset};
use crate::svg::{Point, Scatter};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(ConfigError::new(Some("model"), e.to_string()))
    }
}

impl From<EigenError> for CliError {
    fn from(e: EigenError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<RibbonError> for CliError {
    fn from(e: RibbonError) -> Self {
        match e {
            RibbonError::Model(m) => m.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<EpError> for CliError {
    fn from(e: EpError) -> Self {
        match e {
            EpError::Model(m) => m.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

pub const SPECTRUM_COLUMNS: [&str; 6] = ["k_x", "k_y", "state_index", "re_E", "im_E", "abs_E"];
pub const RIBBON_COLUMNS: [&str; 11] = [
    "k_x", "state_index", "re_E", "im_E", "abs_E", "mean_row", "ipr", "class", "bottom_mass", "top_mass", "imbalance",
];
const ENERGY_COLUMNS: [&str; 3] = ["re_E", "im_E", "abs_E"];

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    energy_scale_factor: f64,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<&'a Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a Report>,
    outputs: &'a [String],
}

/// Runs `config` and writes every output into `out`.
pub fn execute(config: &RunConfig, out: &Path, preset: Option<&Preset>) -> Result<Option<Report>, CliError> {
    let mut dir = OutputDir::create(out)?;
    let model = config.model();
    model.validate()?;
    let report = match config.command {
        Command::BlochSpectrum => {
            bloch_spectrum(config, &model, &mut dir)?;
            None
        }
        Command::EpFind => {
            ep_find(config, &model, &mut dir)?;
            None
        }
        Command::ArcTrace => {
            arc_trace(config, &model, &mut dir)?;
            None
        }
        Command::SkinCheck => {
            skin_check(config, &model, &mut dir)?;
            None
        }
        Command::RibbonSweep => {
            ribbon_sweep(config, &model, &mut dir)?;
            None
        }
        Command::Localization => {
            localization(config, &model, &mut dir)?;
            None
        }
        Command::Reproduce => Some(reproduce(config, &model, preset, &mut dir)?),
    };
    dir.text("config.resolved.toml", &config.to_toml())?;
    let mut outputs = dir.files.clone();
    outputs.push("metadata.json".to_string());
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: config.command,
        energy_scale_factor: config.scale.factor(),
        config,
        preset,
        report: report.as_ref(),
        outputs: &outputs,
    };
    dir.json("metadata.json", &meta)?;
    Ok(report)
}

fn energy_cells(e: Complex64) -> [Cell; 3] {
    [e.re.into(), e.im.into(), e.norm().into()]
}

fn check_residual(config: &RunConfig, achieved: f64) -> Result<(), CliError> {
    match config.tolerance.eig {
        Some(tol) if !(achieved <= tol) => Err(CliError::Numeric(format!(
            "eigensolver residual {achieved:e} exceeds tolerance.eig = {tol:e}"
        ))),
        _ => Ok(()),
    }
}

/// Momenta of the bond-phase grid, or the explicit list when given.
fn bloch_points(config: &RunConfig) -> Vec<[f64; 2]> {
    if !config.grid.k_points.is_empty() {
        return config.grid.k_points.clone();
    }
    let n = config.grid.bz_n;
    let h = 2.0 * PI / n as f64;
    (0..n * n)
        .map(|idx| k_from_bond_phase(-PI + (idx / n) as f64 * h, -PI + (idx % n) as f64 * h))
        .collect()
}

fn bloch_spectrum(config: &RunConfig, model: &ModelConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let points = bloch_points(config);
    let spectra = points
        .par_iter()
        .map(|&k| -> Result<Vec<Complex64>, CliError> {
            let h = bloch_hamiltonian(model, k)?.entries;
            Ok(eig(&h, false, config.tolerance.eig)?.eigenvalues)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new("spectrum", &SPECTRUM_COLUMNS);
    for (k, values) in points.iter().zip(&spectra) {
        for (i, e) in values.iter().enumerate() {
            let [re, im, abs] = energy_cells(*e);
            table.push(vec![k[0].into(), k[1].into(), i.into(), re, im, abs]);
        }
    }
    table.scale_columns(&ENERGY_COLUMNS, config.scale.factor());
    dir.table(&table, &config.output.formats)?;
    if config.output.svg {
        let plot = Scatter {
            title: "Bloch spectrum".into(),
            x_label: "Re E".into(),
            y_label: "Im E".into(),
            points: spectra
                .iter()
                .flatten()
                .map(|e| Point {
                    x: e.re * config.scale.factor(),
                    y: e.im * config.scale.factor(),
                    c: None,
                })
                .collect(),
            ..Default::default()
        };
        dir.text("spectrum.svg", &plot.render())?;
    }
    Ok(())
}

const EP_COLUMNS: [&str; 11] = [
    "method", "flavour", "k_x", "k_y", "theta1", "theta2", "gap", "overlap", "residual", "confirmed", "index",
];

fn ep_table(name: &str, records: &[EpRecord]) -> Table {
    let mut table = Table::new(name, &EP_COLUMNS);
    for (i, r) in records.iter().enumerate() {
        let method = match r.method {
            EpMethod::ClosedForm => "closed_form",
            EpMethod::Scan => "scan",
        };
        table.push(vec![
            method.into(),
            r.flavour.into(),
            r.k[0].into(),
            r.k[1].into(),
            r.bond_phase[0].into(),
            r.bond_phase[1].into(),
            r.gap.into(),
            r.overlap.into(),
            r.residual.into(),
            r.confirmed.into(),
            i.into(),
        ]);
    }
    table
}

fn ep_find(config: &RunConfig, model: &ModelConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let mut records = if model.is_flavour_diagonal() {
        ep_closed_form_model(model)?
    } else {
        Vec::new()
    };
    let opts = ScanOptions {
        grid_n: config.grid.bz_n,
        tol: EpTolerances {
            gap_rel: config.tolerance.gap_rel,
            overlap: config.tolerance.overlap,
        },
    };
    records.extend(ep_scan(model, &opts)?);
    dir.table(&ep_table("eps", &records), &config.output.formats)?;
    if config.output.svg {
        let plot = Scatter {
            title: "Exceptional points".into(),
            x_label: "k_x".into(),
            y_label: "k_y".into(),
            points: records
                .iter()
                .map(|r| Point {
                    x: r.k[0],
                    y: r.k[1],
                    c: Some(if r.confirmed { 1.0 } else { 0.0 }),
                })
                .collect(),
            ..Default::default()
        };
        dir.text("eps.svg", &plot.render())?;
    }
    Ok(())
}

fn arc_trace(config: &RunConfig, model: &ModelConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let trace = fermi_arc_trace(model, config.grid.flavour, config.grid.bz_n)?;
    let mut table = Table::new(
        "arcs",
        &["arc", "flavour", "point_index", "k_x", "k_y", "theta1", "theta2", "start_ep", "end_ep"],
    );
    for (a, arc) in trace.arcs.iter().enumerate() {
        for (i, (k, t)) in arc.points.iter().zip(&arc.bond_phases).enumerate() {
            table.push(vec![
                a.into(),
                arc.flavour.into(),
                i.into(),
                k[0].into(),
                k[1].into(),
                t[0].into(),
                t[1].into(),
                arc.endpoint_eps[0].into(),
                arc.endpoint_eps[1].into(),
            ]);
        }
    }
    dir.table(&table, &config.output.formats)?;
    dir.table(&ep_table("arc_eps", &trace.eps), &config.output.formats)?;
    if config.output.svg {
        let n = trace.arcs.len().max(2) - 1;
        let plot = Scatter {
            title: "Fermi arcs".into(),
            x_label: "k_x".into(),
            y_label: "k_y".into(),
            points: trace
                .arcs
                .iter()
                .enumerate()
                .flat_map(|(a, arc)| arc.points.iter().map(move |k| Point { x: k[0], y: k[1], c: Some(a as f64 / n as f64) }))
                .collect(),
            background: trace.eps.iter().map(|r| (r.k[0], r.k[1])).collect(),
            lines: false,
        };
        dir.text("arcs.svg", &plot.render())?;
    }
    Ok(())
}

fn skin_check(config: &RunConfig, model: &ModelConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let js = model.flavour_couplings().ok_or_else(|| {
        CliError::Config(ConfigError::new(
            Some("model.variant"),
            "skin-check requires a flavour-diagonal model (pure or k)",
        ))
    })?;
    let mut summary = Table::new(
        "skin",
        &["flavour", "jx_re", "jx_im", "jy_re", "jy_im", "jz_re", "jz_im", "skin_any", "max_log_ratio"],
    );
    let mut per_kx = Table::new("skin_kx", &["flavour", "k_x", "forward", "backward", "log_ratio", "skin"]);
    let grid = symmetric_kx_grid(config.grid.kx_samples);
    for (idx, j) in js.iter().enumerate() {
        let eta = idx as u8 + 1;
        let mut worst = 0.0f64;
        for &kx in &grid {
            let e = Complex64::from_polar(1.0, kx);
            let forward = (j.x * e + j.y).norm();
            let backward = (j.x * e.conj() + j.y).norm();
            let ratio = (forward / backward).ln();
            if ratio.is_finite() {
                worst = worst.max(ratio.abs());
            }
            per_kx.push(vec![
                eta.into(),
                kx.into(),
                forward.into(),
                backward.into(),
                ratio.into(),
                skin_criterion(*j, kx).into(),
            ]);
        }
        summary.push(vec![
            eta.into(),
            j.x.re.into(),
            j.x.im.into(),
            j.y.re.into(),
            j.y.im.into(),
            j.z.re.into(),
            j.z.im.into(),
            skin_criterion_any(*j).into(),
            worst.into(),
        ]);
    }
    dir.table(&summary, &config.output.formats)?;
    dir.table(&per_kx, &config.output.formats)?;
    Ok(())
}

fn sweep_options(config: &RunConfig) -> SweepOptions {
    let mut opts = SweepOptions::new(config.grid.w);
    opts.boundary = config.grid.boundary;
    opts.cloud_samples = (config.grid.cloud_samples > 0).then_some(config.grid.cloud_samples);
    opts.classifier = config.tolerance.classifier();
    opts
}

fn run_sweep(config: &RunConfig, model: &ModelConfig) -> Result<SweepResult, CliError> {
    let grid = symmetric_kx_grid(config.grid.kx_samples);
    let result = sweep(model, &grid, &sweep_options(config))?;
    check_residual(config, result.max_residual())?;
    Ok(result)
}

/// Ribbon table sorted by `(k_x, state_index)`, raw energies scaled.
pub fn ribbon_table(result: &SweepResult, factor: f64) -> Table {
    let mut table = Table::new("ribbon", &RIBBON_COLUMNS);
    for p in &result.points {
        for r in &p.records {
            let [re, im, abs] = energy_cells(r.eigenvalue);
            table.push(vec![
                p.k_x.into(),
                r.state_index.into(),
                re,
                im,
                abs,
                r.mean_row.into(),
                r.ipr.into(),
                r.class.name().into(),
                r.bottom_mass.into(),
                r.top_mass.into(),
                r.imbalance.into(),
            ]);
        }
    }
    table.scale_columns(&ENERGY_COLUMNS, factor);
    table
}

fn nhse_table(summary: &NhseSummary) -> Table {
    let mut table = Table::new("nhse", &["k_x", "bottom", "top", "extended", "edge_states", "imbalance"]);
    for p in &summary.points {
        table.push(vec![
            p.k_x.into(),
            p.bottom.into(),
            p.top.into(),
            p.extended.into(),
            p.edge_states.into(),
            p.imbalance.into(),
        ]);
    }
    table
}

fn write_sweep(config: &RunConfig, result: &SweepResult, summary: &NhseSummary, dir: &mut OutputDir) -> Result<(), CliError> {
    let factor = config.scale.factor();
    dir.table(&ribbon_table(result, factor), &config.output.formats)?;
    if result.points.iter().any(|p| p.cloud.is_some()) {
        let mut pbc = Table::new("pbc", &["k_x", "band", "sample", "re_E", "im_E", "abs_E"]);
        for p in &result.points {
            let Some(cloud) = &p.cloud else { continue };
            for (b, band) in cloud.bands.iter().enumerate() {
                for (i, e) in band.iter().enumerate() {
                    let [re, im, abs] = energy_cells(*e);
                    pbc.push(vec![p.k_x.into(), b.into(), i.into(), re, im, abs]);
                }
            }
        }
        pbc.scale_columns(&ENERGY_COLUMNS, factor);
        dir.table(&pbc, &config.output.formats)?;
    }
    dir.table(&nhse_table(summary), &config.output.formats)?;
    dir.json(
        "nhse_summary.json",
        &serde_json::json!({
            "bulk_localized_fraction": summary.bulk_localized_fraction,
            "extended_fraction": summary.extended_fraction,
            "flips": summary.flips,
            "nhse_present": summary.nhse_present,
            "max_residual": result.max_residual(),
        }),
    )?;
    if config.output.svg {
        let rows = 2.0 * result.w as f64;
        let plot = Scatter {
            title: format!("|E| vs k_x, w = {}", result.w),
            x_label: "k_x".into(),
            y_label: "|E|".into(),
            background: result
                .points
                .iter()
                .filter_map(|p| p.cloud.as_ref().map(|c| (p.k_x, c)))
                .flat_map(|(kx, c)| c.points().map(move |e| (kx, e.norm() * factor)))
                .collect(),
            points: result
                .points
                .iter()
                .flat_map(|p| {
                    p.records.iter().map(move |r| Point {
                        x: p.k_x,
                        y: r.eigenvalue.norm() * factor,
                        c: Some((r.mean_row - 1.0) / (rows - 1.0)),
                    })
                })
                .collect(),
            lines: false,
        };
        dir.text("ribbon.svg", &plot.render())?;
    }
    Ok(())
}

fn ribbon_sweep(config: &RunConfig, model: &ModelConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let result = run_sweep(config, model)?;
    let summary = nhse_summary(&result, &config.tolerance.nhse());
    write_sweep(config, &result, &summary, dir)
}

fn localization(config: &RunConfig, model: &ModelConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let l = &config.localization;
    if l.kx_values.is_empty() {
        return Err(ConfigError::new(Some("localization.kx_values"), "no k_x values given").into());
    }
    let selection = match &l.indices {
        Some(idx) if !idx.is_empty() => StateSelection::Indices(idx.clone()),
        _ => StateSelection::NearestZero(l.states),
    };
    let factor = config.scale.factor();
    let mut table = Table::new("profiles", &["k_x", "state_index", "re_E", "im_E", "abs_E", "site", "weight"]);
    for (n, &kx) in l.kx_values.iter().enumerate() {
        let profiles = edge_mode_weights(model, l.w, kx, l.normalization, &selection)?;
        let top = profiles.iter().map(|p| p.eigenvalue.norm()).fold(0.0, f64::max).max(1e-300);
        for p in &profiles {
            for (site, w) in p.weights.iter().enumerate() {
                let [re, im, abs] = energy_cells(p.eigenvalue);
                table.push(vec![kx.into(), p.state_index.into(), re, im, abs, (site + 1).into(), (*w).into()]);
            }
        }
        if config.output.svg {
            let plot = Scatter {
                title: format!("Right-eigenvector weights, k_x = {kx:.4}"),
                x_label: "site".into(),
                y_label: "weight".into(),
                points: profiles
                    .iter()
                    .flat_map(|p| {
                        let c = p.eigenvalue.norm() / top;
                        p.weights.iter().enumerate().map(move |(s, w)| Point {
                            x: (s + 1) as f64,
                            y: *w,
                            c: Some(c),
                        })
                    })
                    .collect(),
                ..Default::default()
            };
            dir.text(&format!("profiles_{n}.svg"), &plot.render())?;
        }
    }
    table.scale_columns(&ENERGY_COLUMNS, factor);
    dir.table(&table, &config.output.formats)
        .map_err(CliError::from)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

/// Qualitative comparison of a reproduced figure with what it shows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub w: usize,
    pub kx_samples: usize,
    pub nhse_present: bool,
    pub bulk_localized_fraction: f64,
    pub extended_fraction: f64,
    pub flips: Vec<f64>,
    /// Largest number of edge-classified states at a single `k_x`.
    pub max_edge_states: usize,
    /// Non-edge open-ribbon states farther than the cloud tolerance from the
    /// periodic spectrum.
    pub non_edge_outside_cloud: Option<usize>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn outside_cloud(result: &SweepResult, tol: f64) -> Option<usize> {
    let mut count = 0;
    for p in &result.points {
        let cloud = p.cloud.as_ref()?;
        let values: Vec<Complex64> = p.records.iter().map(|r| r.eigenvalue).collect();
        let inside = cloud.contains_all(&values, tol);
        count += p.records.iter().zip(inside).filter(|(r, ins)| !r.class.is_edge() && !ins).count();
    }
    Some(count)
}

fn report(config: &RunConfig, result: &SweepResult, summary: &NhseSummary, expect: Option<&Expectation>) -> Report {
    let step = 2.0 * PI / config.grid.kx_samples as f64;
    let mut r = Report {
        w: result.w,
        kx_samples: config.grid.kx_samples,
        nhse_present: summary.nhse_present,
        bulk_localized_fraction: summary.bulk_localized_fraction,
        extended_fraction: summary.extended_fraction,
        flips: summary.flips.clone(),
        max_edge_states: summary.points.iter().map(|p| p.edge_states).max().unwrap_or(0),
        non_edge_outside_cloud: outside_cloud(result, config.tolerance.cloud),
        checks: Vec::new(),
    };
    let Some(e) = expect else { return r };
    if let Some(want) = e.nhse {
        r.checks.push(Check {
            name: "nhse_present",
            expected: want.to_string(),
            observed: format!("{} (bulk-localized fraction {:.4})", r.nhse_present, r.bulk_localized_fraction),
            pass: want == r.nhse_present,
        });
    }
    if let Some(want) = e.extended_states_coexist {
        let got = r.extended_fraction > 0.0;
        r.checks.push(Check {
            name: "extended_states_coexist",
            expected: want.to_string(),
            observed: format!("{got} (extended fraction {:.4})", r.extended_fraction),
            pass: want == got,
        });
    }
    if let Some(want) = e.obc_within_pbc_except_edges {
        let got = r.non_edge_outside_cloud == Some(0) && r.max_edge_states > 0;
        r.checks.push(Check {
            name: "obc_within_pbc_except_edges",
            expected: want.to_string(),
            observed: format!(
                "{got} ({} non-edge states outside the cloud, up to {} edge states per k_x)",
                r.non_edge_outside_cloud.map_or("?".to_string(), |n| n.to_string()),
                r.max_edge_states
            ),
            pass: want == got,
        });
    }
    if let Some(want) = &e.flips_near {
        let near = |target: f64| {
            r.flips
                .iter()
                .any(|f| (f - target).abs() <= step || (f - target).abs() >= 2.0 * PI - step)
        };
        let got = want.iter().all(|t| near(*t));
        r.checks.push(Check {
            name: "flips_near",
            expected: format!("{want:?}"),
            observed: format!("{:?}", r.flips),
            pass: got,
        });
    }
    r
}

fn reproduce(config: &RunConfig, model: &ModelConfig, preset: Option<&Preset>, dir: &mut OutputDir) -> Result<Report, CliError> {
    let result = run_sweep(config, model)?;
    let summary = nhse_summary(&result, &config.tolerance.nhse());
    write_sweep(config, &result, &summary, dir)?;
    if !config.localization.kx_values.is_empty() {
        localization(config, model, dir)?;
    }
    let report = report(config, &result, &summary, preset.map(|p| &p.expect));
    dir.json("report.json", &report)?;
    Ok(report)
}

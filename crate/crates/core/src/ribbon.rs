//! Zigzag ribbons: periodic along x, open or periodic along y.
//!
//! A dimer row `r` holds one A and one B triangle joined by an x-link and a
//! y-link; the vertical z-link joins B of row `r` to A of row `r + 1`.
//! Matrix index of (row `r` in `1..=w`, sublattice `s` with A = 0 and B = 1,
//! flavour `μ`) is `(2(r − 1) + s)·3 + μ`. Sites are numbered `1..=2w` from
//! the bottom edge: site `2(r − 1) + s + 1`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, frobenius, sort_order, Spectrum};
use crate::error::{EigenError, RibbonError};
use crate::model::{assemble_bloch, flavour_pair, Flavour3, FlavourBondTable, ModelConfig, CONVENTION_FACTOR};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RibbonSpec {
    /// Number of dimer rows.
    pub w: usize,
    pub boundary: Boundary,
    pub k_x: f64,
    pub model: ModelConfig,
}

impl RibbonSpec {
    pub fn new(model: ModelConfig, w: usize, k_x: f64, boundary: Boundary) -> Self {
        Self { w, boundary, k_x, model }
    }

    pub fn dimension(&self) -> usize {
        6 * self.w
    }

    fn validate(&self) -> Result<(), RibbonError> {
        if self.w < 2 {
            return Err(RibbonError::TooFewRows(self.w));
        }
        self.model.validate()?;
        Ok(())
    }
}

/// Matrix index of (row `1..=w`, sublattice 0 = A / 1 = B, flavour `0..3`).
pub fn basis_index(row: usize, sublattice: usize, flavour: usize) -> usize {
    (2 * (row - 1) + sublattice) * 3 + flavour
}

/// Inverse of [`basis_index`].
pub fn basis_label(index: usize) -> (usize, usize, usize) {
    let site = index / 3;
    (site / 2 + 1, site % 2, index % 3)
}

/// Flavour-space couplings of a ribbon: `nf × nf` link and onsite matrices.
struct RibbonTable {
    nf: usize,
    links: [Vec<Complex64>; 3],
    onsite: Vec<Complex64>,
}

impl RibbonTable {
    fn full(table: &FlavourBondTable) -> Self {
        let flat = |m: &Flavour3| m.iter().flatten().copied().collect::<Vec<_>>();
        Self {
            nf: 3,
            links: [flat(&table.links[0]), flat(&table.links[1]), flat(&table.links[2])],
            onsite: flat(&table.onsite),
        }
    }

    fn single(table: &FlavourBondTable, mu: usize) -> Self {
        Self {
            nf: 1,
            links: [
                vec![table.links[0][mu][mu]],
                vec![table.links[1][mu][mu]],
                vec![table.links[2][mu][mu]],
            ],
            onsite: vec![table.onsite[mu][mu]],
        }
    }

    fn assemble(&self, w: usize, k_x: f64, boundary: Boundary) -> Array2<Complex64> {
        let nf = self.nf;
        let c = CONVENTION_FACTOR;
        let n = 2 * w * nf;
        let mut h = Array2::zeros((n, n));
        let fwd = Complex64::from_polar(1.0, k_x / 2.0);
        let bwd = fwd.conj();
        // Index of (row 0-based, sublattice, flavour).
        let idx = |r: usize, s: usize, mu: usize| (2 * r + s) * nf + mu;
        let at = |m: &[Complex64], mu: usize, nu: usize| m[mu * nf + nu];
        for r in 0..w {
            for mu in 0..nf {
                for nu in 0..nf {
                    // Intra-row x- and y-links, A → B.
                    let ab = at(&self.links[0], mu, nu) * fwd + at(&self.links[1], mu, nu) * bwd;
                    let ba = at(&self.links[0], nu, mu) * bwd + at(&self.links[1], nu, mu) * fwd;
                    h[[idx(r, 0, mu), idx(r, 1, nu)]] = I * c * ab;
                    h[[idx(r, 1, mu), idx(r, 0, nu)]] = -I * c * ba;
                    let on = I * c * at(&self.onsite, mu, nu);
                    h[[idx(r, 0, mu), idx(r, 0, nu)]] = on;
                    h[[idx(r, 1, mu), idx(r, 1, nu)]] = on;
                }
            }
            let next = if r + 1 < w {
                Some(r + 1)
            } else if boundary == Boundary::Periodic {
                Some(0)
            } else {
                None
            };
            if let Some(rn) = next {
                for mu in 0..nf {
                    for nu in 0..nf {
                        // z-link: A of the next row to B of this row.
                        h[[idx(rn, 0, mu), idx(r, 1, nu)]] += I * c * at(&self.links[2], mu, nu);
                        h[[idx(r, 1, mu), idx(rn, 0, nu)]] += -I * c * at(&self.links[2], nu, mu);
                    }
                }
            }
        }
        h
    }
}

/// The raw `6w × 6w` ribbon matrix.
pub fn build_ribbon(spec: &RibbonSpec) -> Result<Array2<Complex64>, RibbonError> {
    spec.validate()?;
    let table = spec.model.bond_table();
    Ok(RibbonTable::full(&table).assemble(spec.w, spec.k_x, spec.boundary))
}

fn solver_error(k_x: f64) -> impl Fn(EigenError) -> RibbonError {
    move |source| RibbonError::Solver { kx: k_x, source }
}

/// Eigen-decomposition of the ribbon matrix.
///
/// Flavour-diagonal models are solved block by block; the embedded result has
/// the same layout, ordering and residual definition as a direct solve.
pub fn ribbon_spectrum(spec: &RibbonSpec, want_left: bool) -> Result<Spectrum, RibbonError> {
    spec.validate()?;
    let table = spec.model.bond_table();
    if !spec.model.is_flavour_diagonal() {
        let h = RibbonTable::full(&table).assemble(spec.w, spec.k_x, spec.boundary);
        return eigen::eig(&h, want_left, None).map_err(solver_error(spec.k_x));
    }

    let n = spec.dimension();
    let target = eigen::default_tolerance(n);
    let blocks: Vec<Array2<Complex64>> = (0..3)
        .map(|mu| RibbonTable::single(&table, mu).assemble(spec.w, spec.k_x, spec.boundary))
        .collect();
    let full_norm = blocks.iter().map(|b| frobenius(b).powi(2)).sum::<f64>().sqrt();

    let mut values = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut defective = Vec::with_capacity(n);
    for (mu, block) in blocks.iter().enumerate() {
        let s = eigen::eig(block, want_left, Some(target)).map_err(solver_error(spec.k_x))?;
        let rescale = frobenius(block).max(1.0) / full_norm.max(1.0);
        for k in 0..s.len() {
            values.push(s.eigenvalues[k]);
            right.push(embed(s.right_vectors.column(k).iter(), mu, n));
            if let Some(l) = &s.left_vectors {
                left.push(embed(l.column(k).iter(), mu, n));
            }
            residuals.push(s.residuals[k] * rescale);
            defective.push(s.defective[k]);
        }
    }

    let order = sort_order(&values);
    let pick = |cols: &[Vec<Complex64>]| {
        let mut m = Array2::zeros((n, n));
        for (dst, &src) in order.iter().enumerate() {
            for (i, v) in cols[src].iter().enumerate() {
                m[[i, dst]] = *v;
            }
        }
        m
    };
    let residuals: Vec<f64> = order.iter().map(|&i| residuals[i]).collect();
    let achieved = residuals.iter().copied().fold(0.0, f64::max);
    Ok(Spectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        right_vectors: pick(&right),
        left_vectors: want_left.then(|| pick(&left)),
        residuals,
        defective: order.iter().map(|&i| defective[i]).collect(),
        achieved_tolerance: achieved,
    })
}

fn embed<'a>(v: impl Iterator<Item = &'a Complex64>, mu: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n];
    for (site, x) in v.enumerate() {
        out[site * 3 + mu] = *x;
    }
    out
}

/// Bloch eigenvalues at `k_x` for transverse phase `q`, where a periodic ribbon
/// of `w` rows samples `q = 2πn/w` and `k = (k_x, 2q/√3)`.
fn transverse_bloch_values(model: &ModelConfig, table: &FlavourBondTable, k_x: f64, q: f64) -> Vec<Complex64> {
    let (t1, t2) = (k_x / 2.0 + q, -k_x / 2.0 + q);
    match model.flavour_couplings() {
        Some(js) => js.iter().flat_map(|j| flavour_pair(*j, t1, t2)).collect(),
        None => {
            let h = assemble_bloch(table, t1, t2);
            match eigen::eigenvalues(&h) {
                Ok(v) => v,
                Err(EigenError::NoConvergence { best, .. }) => best.eigenvalues,
                Err(_) => unreachable!("Bloch matrices are finite and square"),
            }
        }
    }
}

/// Transverse momentum `k_y` that corresponds to the ribbon phase `q`.
pub fn transverse_k_y(q: f64) -> f64 {
    2.0 * q / crate::model::SQRT3
}

/// Periodic-boundary spectrum at fixed `k_x`, traced along the transverse
/// momentum as a set of closed bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbcCloud {
    pub k_x: f64,
    /// `bands[b][i]` is band `b` at sample `i`; consecutive samples are
    /// matched so that each band is a continuous path.
    pub bands: Vec<Vec<Complex64>>,
    /// Closed loops, each a sequence of band indices traversed in order.
    pub cycles: Vec<Vec<usize>>,
}

impl PbcCloud {
    pub fn new(model: &ModelConfig, k_x: f64, samples: usize) -> Result<Self, RibbonError> {
        model.validate()?;
        let samples = samples.max(8);
        let table = model.bond_table();
        let raw: Vec<Vec<Complex64>> = (0..samples)
            .map(|i| transverse_bloch_values(model, &table, k_x, 2.0 * PI * i as f64 / samples as f64))
            .collect();
        let nb = raw[0].len();
        let mut bands = vec![Vec::with_capacity(samples); nb];
        let mut prev = raw[0].clone();
        for (b, v) in prev.iter().enumerate() {
            bands[b].push(*v);
        }
        for values in raw.iter().skip(1) {
            let next = match_to(&prev, values);
            for (b, v) in next.iter().enumerate() {
                bands[b].push(*v);
            }
            prev = next;
        }
        // After a full period band b ends where band perm[b] starts.
        let first: Vec<Complex64> = bands.iter().map(|b| b[0]).collect();
        let closing = match_to(&prev, &first);
        let perm: Vec<usize> = closing
            .iter()
            .map(|v| first.iter().position(|f| f == v).unwrap_or(0))
            .collect();
        let mut seen = vec![false; nb];
        let mut cycles = Vec::new();
        for start in 0..nb {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut b = start;
            while !seen[b] {
                seen[b] = true;
                cycle.push(b);
                b = perm[b];
            }
            cycles.push(cycle);
        }
        Ok(Self { k_x, bands, cycles })
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.bands.iter().flatten().copied()
    }

    /// Points of each closed band loop in traversal order.
    fn loops(&self) -> Vec<Vec<Complex64>> {
        self.cycles
            .iter()
            .map(|c| c.iter().flat_map(|&b| self.bands[b].iter().copied()).collect())
            .collect()
    }

    /// Distance from `e` to the traced bands.
    pub fn distance(&self, e: Complex64) -> f64 {
        self.loops().iter().map(|l| loop_distance(l, e)).fold(f64::INFINITY, f64::min)
    }

    /// Winding number of each closed band loop around `e`.
    pub fn windings(&self, e: Complex64) -> Vec<i64> {
        self.loops().iter().map(|l| loop_winding(l, e)).collect()
    }

    /// Within `tol` of a band or enclosed by a band loop.
    pub fn contains(&self, e: Complex64, tol: f64) -> bool {
        self.contains_all(&[e], tol)[0]
    }

    /// [`PbcCloud::contains`] for many energies.
    pub fn contains_all(&self, energies: &[Complex64], tol: f64) -> Vec<bool> {
        let loops = self.loops();
        energies
            .iter()
            .map(|&e| {
                loops.iter().any(|l| loop_distance(l, e) <= tol) || loops.iter().any(|l| loop_winding(l, e) != 0)
            })
            .collect()
    }

    /// Smallest `|E|` on the traced bands.
    pub fn min_abs(&self) -> f64 {
        self.distance(ZERO)
    }
}

/// Closing segment first, then consecutive pairs.
fn loop_segments(points: &[Complex64]) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
    let closing = points.last().zip(points.first()).map(|(a, b)| (*a, *b));
    closing.into_iter().chain(points.windows(2).map(|p| (p[0], p[1])))
}

fn loop_distance(points: &[Complex64], e: Complex64) -> f64 {
    loop_segments(points)
        .map(|(a, b)| segment_distance_sqr(e, a, b))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Signed crossings of the ray from `e` towards +Re.
fn loop_winding(points: &[Complex64], e: Complex64) -> i64 {
    loop_segments(points)
        .map(|(a, b)| {
            let side = (b.re - a.re) * (e.im - a.im) - (e.re - a.re) * (b.im - a.im);
            if a.im <= e.im && b.im > e.im && side > 0.0 {
                1
            } else if b.im <= e.im && a.im > e.im && side < 0.0 {
                -1
            } else {
                0
            }
        })
        .sum()
}

/// Greedy nearest matching of `next` onto the ordering of `prev`.
fn match_to(prev: &[Complex64], next: &[Complex64]) -> Vec<Complex64> {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(next[j]);
            used[j] = true;
        }
    }
    out.into_iter().map(|v| v.unwrap_or(ZERO)).collect()
}

fn segment_distance_sqr(e: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (e - a).norm_sqr();
    }
    let t = (((e - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (e - (a + d * t)).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationClass {
    EdgeBottom,
    EdgeTop,
    BulkLocalizedBottom,
    BulkLocalizedTop,
    Extended,
}

impl LocalizationClass {
    pub fn name(self) -> &'static str {
        match self {
            Self::EdgeBottom => "edge_bottom",
            Self::EdgeTop => "edge_top",
            Self::BulkLocalizedBottom => "bulk_localized_bottom",
            Self::BulkLocalizedTop => "bulk_localized_top",
            Self::Extended => "extended",
        }
    }

    pub fn is_edge(self) -> bool {
        matches!(self, Self::EdgeBottom | Self::EdgeTop)
    }

    pub fn is_bulk_localized(self) -> bool {
        matches!(self, Self::BulkLocalizedBottom | Self::BulkLocalizedTop)
    }
}

/// Thresholds of the localization classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// Fraction of sites counted as the edge region at each end.
    pub edge_fraction: f64,
    /// Minimum mass in the two edge regions for a localized state.
    pub edge_mass: f64,
    /// Distance below which an eigenvalue belongs to the periodic cloud.
    pub cloud_tol: f64,
}

impl Default for Classifier {
    fn default() -> Self {
        Self {
            edge_fraction: 0.1,
            edge_mass: 0.6,
            cloud_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub state_index: usize,
    pub eigenvalue: Complex64,
    /// Weighted mean site in `[1, 2w]`.
    pub mean_row: f64,
    pub ipr: f64,
    pub bottom_mass: f64,
    pub top_mass: f64,
    /// Mass in the lower minus the upper half of the ribbon.
    pub imbalance: f64,
    pub class: LocalizationClass,
}

/// Normalized per-site weights `Σ_μ |ψ(ℓ, μ)|²`.
pub fn site_weights(vector: impl IntoIterator<Item = Complex64>, w: usize) -> Vec<f64> {
    let mut weights = vec![0.0; 2 * w];
    for (i, z) in vector.into_iter().enumerate() {
        weights[i / 3] += z.norm_sqr();
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|x| *x /= total);
    }
    weights
}

impl Classifier {
    fn edge_sites(&self, w: usize) -> usize {
        ((self.edge_fraction * (2 * w) as f64).ceil() as usize).clamp(1, w)
    }

    /// Record for one state given its site weights; `inside_cloud` is `None`
    /// when no periodic reference is available.
    pub fn record(&self, state_index: usize, eigenvalue: Complex64, weights: &[f64], inside_cloud: Option<bool>) -> LocalizationRecord {
        let n = weights.len();
        let w = n / 2;
        let m = self.edge_sites(w);
        let mean_row = weights.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
        let ipr = weights.iter().map(|x| x * x).sum();
        let bottom_mass: f64 = weights[..m].iter().sum();
        let top_mass: f64 = weights[n - m..].iter().sum();
        let imbalance = weights[..w].iter().sum::<f64>() - weights[w..].iter().sum::<f64>();
        let class = if bottom_mass + top_mass >= self.edge_mass {
            let bottom = bottom_mass >= top_mass;
            match (inside_cloud.unwrap_or(false), bottom) {
                (false, true) => LocalizationClass::EdgeBottom,
                (false, false) => LocalizationClass::EdgeTop,
                (true, true) => LocalizationClass::BulkLocalizedBottom,
                (true, false) => LocalizationClass::BulkLocalizedTop,
            }
        } else {
            LocalizationClass::Extended
        };
        LocalizationRecord {
            state_index,
            eigenvalue,
            mean_row,
            ipr,
            bottom_mass,
            top_mass,
            imbalance,
            class,
        }
    }
}

/// Localization records of every right eigenvector of a `6w` ribbon spectrum.
pub fn localization_profile(
    spectrum: &Spectrum,
    w: usize,
    cloud: Option<&PbcCloud>,
    classifier: &Classifier,
) -> Result<Vec<LocalizationRecord>, RibbonError> {
    let n = spectrum.right_vectors.nrows();
    if n != 6 * w || spectrum.right_vectors.ncols() != spectrum.len() {
        return Err(RibbonError::Dimension { got: n, expected: 6 * w });
    }
    let inside = cloud.map(|c| c.contains_all(&spectrum.eigenvalues, classifier.cloud_tol));
    Ok((0..spectrum.len())
        .map(|k| {
            let weights = site_weights(spectrum.right_vectors.column(k).iter().copied(), w);
            classifier.record(k, spectrum.eigenvalues[k], &weights, inside.as_ref().map(|v| v[k]))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub w: usize,
    pub boundary: Boundary,
    /// Transverse samples of the periodic reference; `None` skips it.
    pub cloud_samples: Option<usize>,
    pub classifier: Classifier,
}

impl SweepOptions {
    pub fn new(w: usize) -> Self {
        Self {
            w,
            boundary: Boundary::Open,
            cloud_samples: Some(512),
            classifier: Classifier::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k_x: f64,
    pub records: Vec<LocalizationRecord>,
    pub max_residual: f64,
    pub cloud: Option<PbcCloud>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub w: usize,
    pub boundary: Boundary,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn kx_grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.k_x).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(|p| p.max_residual).fold(0.0, f64::max)
    }
}

/// `n` points `k_x = −π + 2π(i + 1)/n`, covering `(−π, π]`.
pub fn symmetric_kx_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + 2.0 * PI * (i + 1) as f64 / n as f64).collect()
}

/// Diagonalizes the ribbon at every `k_x` in parallel and classifies states.
pub fn sweep(model: &ModelConfig, kx_grid: &[f64], opts: &SweepOptions) -> Result<SweepResult, RibbonError> {
    if kx_grid.is_empty() {
        return Err(RibbonError::EmptyGrid);
    }
    RibbonSpec::new(*model, opts.w, 0.0, opts.boundary).validate()?;
    let points = kx_grid
        .par_iter()
        .map(|&k_x| sweep_point(model, k_x, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        w: opts.w,
        boundary: opts.boundary,
        points,
    })
}

fn sweep_point(model: &ModelConfig, k_x: f64, opts: &SweepOptions) -> Result<SweepPoint, RibbonError> {
    let spec = RibbonSpec::new(*model, opts.w, k_x, opts.boundary);
    let spectrum = ribbon_spectrum(&spec, false)?;
    let cloud = opts.cloud_samples.map(|n| PbcCloud::new(model, k_x, n)).transpose()?;
    let records = localization_profile(&spectrum, opts.w, cloud.as_ref(), &opts.classifier)?;
    Ok(SweepPoint {
        k_x,
        records,
        max_residual: spectrum.max_residual(),
        cloud,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightNormalization {
    Linear,
    Log01,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateSelection {
    /// The `n` states with smallest `|E|`.
    NearestZero(usize),
    Indices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub state_index: usize,
    pub eigenvalue: Complex64,
    pub weights: Vec<f64>,
}

/// Affine rescaling of `log x` onto `[0, 1]`.
pub fn log01(weights: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = weights.iter().map(|x| x.max(1e-300).ln()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        logs.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; logs.len()]
    }
}

/// Site-resolved right-eigenvector weights of selected open-ribbon states.
pub fn edge_mode_weights(
    model: &ModelConfig,
    w: usize,
    k_x: f64,
    normalization: WeightNormalization,
    selection: &StateSelection,
) -> Result<Vec<SiteProfile>, RibbonError> {
    let spectrum = ribbon_spectrum(&RibbonSpec::new(*model, w, k_x, Boundary::Open), false)?;
    let indices: Vec<usize> = match selection {
        StateSelection::NearestZero(n) => {
            let mut order: Vec<usize> = (0..spectrum.len()).collect();
            order.sort_by(|&a, &b| {
                spectrum.eigenvalues[a]
                    .norm()
                    .total_cmp(&spectrum.eigenvalues[b].norm())
                    .then(a.cmp(&b))
            });
            order.truncate(*n);
            order.sort_unstable();
            order
        }
        StateSelection::Indices(v) => v.iter().copied().filter(|&i| i < spectrum.len()).collect(),
    };
    if indices.is_empty() {
        return Err(RibbonError::EmptySelection);
    }
    Ok(indices
        .into_iter()
        .map(|k| {
            let linear = site_weights(spectrum.right_vectors.column(k).iter().copied(), w);
            let weights = match normalization {
                WeightNormalization::Linear => linear,
                WeightNormalization::Log01 => log01(&linear),
            };
            SiteProfile {
                state_index: k,
                eigenvalue: spectrum.eigenvalues[k],
                weights,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NhsePoint {
    pub k_x: f64,
    /// Fractions of the non-edge states at this `k_x`.
    pub bottom: f64,
    pub top: f64,
    pub extended: f64,
    pub edge_states: usize,
    /// Mean lower-half minus upper-half mass over non-edge states.
    pub imbalance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NhseOptions {
    /// Bulk-localized fraction of all non-edge states above which NHSE is
    /// reported.
    pub presence_threshold: f64,
    /// Imbalances smaller than this are ignored when locating flips.
    pub flip_deadband: f64,
}

impl Default for NhseOptions {
    fn default() -> Self {
        Self {
            presence_threshold: 0.05,
            flip_deadband: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NhseSummary {
    pub points: Vec<NhsePoint>,
    pub bulk_localized_fraction: f64,
    pub extended_fraction: f64,
    /// `k_x` values, in `(−π, π]`, where the bulk imbalance changes sign.
    pub flips: Vec<f64>,
    pub nhse_present: bool,
}

pub fn nhse_summary(sweep: &SweepResult, opts: &NhseOptions) -> NhseSummary {
    let mut points = Vec::with_capacity(sweep.points.len());
    let (mut localized, mut extended, mut bulk) = (0usize, 0usize, 0usize);
    for p in &sweep.points {
        let non_edge: Vec<&LocalizationRecord> = p.records.iter().filter(|r| !r.class.is_edge()).collect();
        let count = |c: LocalizationClass| non_edge.iter().filter(|r| r.class == c).count();
        let (b, t, e) = (
            count(LocalizationClass::BulkLocalizedBottom),
            count(LocalizationClass::BulkLocalizedTop),
            count(LocalizationClass::Extended),
        );
        let n = non_edge.len().max(1) as f64;
        localized += b + t;
        extended += e;
        bulk += non_edge.len();
        points.push(NhsePoint {
            k_x: p.k_x,
            bottom: b as f64 / n,
            top: t as f64 / n,
            extended: e as f64 / n,
            edge_states: p.records.len() - non_edge.len(),
            imbalance: non_edge.iter().map(|r| r.imbalance).sum::<f64>() / n,
        });
    }
    let bulk = bulk.max(1) as f64;
    let bulk_localized_fraction = localized as f64 / bulk;
    NhseSummary {
        flips: flip_points(&points, opts.flip_deadband),
        bulk_localized_fraction,
        extended_fraction: extended as f64 / bulk,
        nhse_present: bulk_localized_fraction > opts.presence_threshold,
        points,
    }
}

/// Sign changes of the imbalance around the cyclic `k_x` grid.
fn flip_points(points: &[NhsePoint], deadband: f64) -> Vec<f64> {
    let kept: Vec<&NhsePoint> = points.iter().filter(|p| p.imbalance.abs() >= deadband).collect();
    if kept.len() < 2 {
        return Vec::new();
    }
    let mut flips = Vec::new();
    for i in 0..kept.len() {
        let (a, b) = (kept[i], kept[(i + 1) % kept.len()]);
        if a.imbalance.signum() != b.imbalance.signum() {
            let mut kb = b.k_x;
            while kb < a.k_x {
                kb += 2.0 * PI;
            }
            flips.push(crate::ep::wrap_phase((a.k_x + kb) / 2.0));
        }
    }
    flips.sort_by(f64::total_cmp);
    flips
}

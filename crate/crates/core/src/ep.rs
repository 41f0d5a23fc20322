//! Exceptional points, Fermi arcs, the skin-effect criterion and
//! degeneracy classification.
//!
//! Searches run in bond-phase coordinates `(θ1, θ2) = (k·M1, −k·M2)`, where
//! every Bloch matrix is `2π`-periodic in each component; results are
//! reported in both bond phases and Cartesian `k`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, inner};
use crate::error::{EigenError, EpError, ModelError};
use crate::model::{
    assemble_bloch, bond_phases, f_from_phases, Coupling3, FlavourBondTable, ModelConfig, CONVENTION_FACTOR, SQRT3,
};

const TAU: f64 = 2.0 * PI;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(θ1, θ2) = (k·M1, −k·M2)`.
pub fn bond_phase_from_k(k: [f64; 2]) -> (f64, f64) {
    bond_phases(k)
}

/// Inverse of [`bond_phase_from_k`].
pub fn k_from_bond_phase(theta1: f64, theta2: f64) -> [f64; 2] {
    [theta1 - theta2, (theta1 + theta2) / SQRT3]
}

/// Reduces an angle to `(−π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn phase_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d0 = wrap_phase(a[0] - b[0]);
    let d1 = wrap_phase(a[1] - b[1]);
    d0.hypot(d1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpMethod {
    ClosedForm,
    Scan,
}

/// A located eigenvalue coalescence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpRecord {
    /// Cartesian momentum, inside the fundamental cell.
    pub k: [f64; 2],
    /// Bond phases `(θ1, θ2)`, each in `(−π, π]`.
    pub bond_phase: [f64; 2],
    pub method: EpMethod,
    /// Flavour `η ∈ {1, 2, 3}` for flavour-diagonal models.
    pub flavour: Option<u8>,
    /// Distance between the two closest eigenvalues.
    pub gap: f64,
    /// `|⟨v_i, v_j⟩|` of the closest pair's unit eigenvectors.
    pub overlap: f64,
    /// `|A_η|` of the vanishing factor for closed-form records, otherwise the
    /// smallest singular value of `H − λ̄`.
    pub residual: f64,
    /// Gap below the gap tolerance and overlap above `1 − overlap_tol`.
    pub confirmed: bool,
}

impl EpRecord {
    fn at_phase(theta: [f64; 2], method: EpMethod, flavour: Option<u8>) -> Self {
        let bond_phase = [wrap_phase(theta[0]), wrap_phase(theta[1])];
        Self {
            k: k_from_bond_phase(bond_phase[0], bond_phase[1]),
            bond_phase,
            method,
            flavour,
            gap: f64::NAN,
            overlap: f64::NAN,
            residual: f64::NAN,
            confirmed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpTolerances {
    /// Relative to `max(1, ‖H‖_F)` of the matrix at the candidate point.
    pub gap_rel: f64,
    pub overlap: f64,
}

impl Default for EpTolerances {
    fn default() -> Self {
        Self {
            gap_rel: 1e-6,
            overlap: 1e-4,
        }
    }
}

/// Result of the closed-form search; `reason` explains an empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpList {
    pub records: Vec<EpRecord>,
    pub reason: Option<String>,
}

/// The `2×2` flavour block `2[[0, iA(θ)], [−iA(−θ), 0]]`.
fn flavour_block(j: Coupling3, theta: [f64; 2]) -> Array2<Complex64> {
    let a = f_from_phases(j, theta[0], theta[1]);
    let am = f_from_phases(j, -theta[0], -theta[1]);
    let c = CONVENTION_FACTOR;
    let mut h = Array2::zeros((2, 2));
    h[[0, 1]] = I * c * a;
    h[[1, 0]] = -I * c * am;
    h
}

/// Closest eigenvalue pair: `(gap, overlap, mean eigenvalue, ‖H‖_F)`.
fn closest_pair(h: &Array2<Complex64>) -> Result<(f64, f64, Complex64, f64), EigenError> {
    let s = match eigen::eig(h, false, None) {
        Ok(s) => s,
        Err(EigenError::NoConvergence { best, .. }) => *best,
        Err(e) => return Err(e),
    };
    let n = s.len();
    let mut best = (f64::INFINITY, 0.0, ZERO);
    for i in 0..n {
        for j in i + 1..n {
            let gap = (s.eigenvalues[i] - s.eigenvalues[j]).norm();
            if gap < best.0 {
                let vi = s.right_vectors.column(i).to_vec();
                let vj = s.right_vectors.column(j).to_vec();
                let ov = inner(&vi, &vj).norm().min(1.0);
                best = (gap, ov, (s.eigenvalues[i] + s.eigenvalues[j]) * 0.5);
            }
        }
    }
    let norm = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok((best.0, best.1, best.2, norm))
}

fn closest_gap_only(h: &Array2<Complex64>) -> f64 {
    let values = match eigen::eigenvalues(h) {
        Ok(v) => v,
        Err(EigenError::NoConvergence { best, .. }) => best.eigenvalues,
        Err(_) => return f64::INFINITY,
    };
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

fn shifted_min_singular(h: &Array2<Complex64>, shift: Complex64) -> f64 {
    let mut m = h.clone();
    for i in 0..m.nrows() {
        m[[i, i]] -= shift;
    }
    eigen::min_singular_value(&m).unwrap_or(f64::NAN)
}

/// Fills gap, overlap and confirmation for a record at its phase.
fn certify(record: &mut EpRecord, h: &Array2<Complex64>, tol: &EpTolerances) -> Result<(), EigenError> {
    let (gap, overlap, _, norm) = closest_pair(h)?;
    record.gap = gap;
    record.overlap = overlap;
    record.confirmed = gap < tol.gap_rel * norm.max(1.0) && overlap > 1.0 - tol.overlap;
    Ok(())
}

/// Closed-form zeros of `A(k)` and `A(−k)` for one coupling triple.
///
/// With `J_α = |J_α| e^{iφ_α} e^{iφ_z}` the zeros of `A` are the bond phases
/// `(±a − φ_x, ∓b − φ_y)` with `cos a = (|J_y|²−|J_x|²−|J_z|²)/(2|J_x||J_z|)` and
/// `cos b = (|J_x|²−|J_y|²−|J_z|²)/(2|J_y||J_z|)`; the zeros of `A(−k)` are their
/// negatives. Coinciding solutions (Hermitian couplings) are merged.
pub fn ep_closed_form(j_eff: Coupling3) -> Result<EpList, EpError> {
    ep_closed_form_tagged(j_eff, None, &EpTolerances::default())
}

fn ep_closed_form_tagged(j: Coupling3, flavour: Option<u8>, tol: &EpTolerances) -> Result<EpList, EpError> {
    if !j.is_finite() {
        return Err(ModelError::NonFinite("j").into());
    }
    let [mx, my, mz] = j.moduli();
    if mx == 0.0 || my == 0.0 {
        return Err(EpError::DegenerateCouplings("|J_x| and |J_y| must be nonzero"));
    }
    if mz == 0.0 {
        return Err(EpError::DegenerateCouplings("|J_z| = 0 gives a line of zeros"));
    }
    if !crate::model::triangle_test([mx, my, mz])? {
        return Ok(EpList {
            records: Vec::new(),
            reason: Some("triangle inequality violated".to_string()),
        });
    }
    let phi_x = j.x.arg() - j.z.arg();
    let phi_y = j.y.arg() - j.z.arg();
    let a = ((my * my - mx * mx - mz * mz) / (2.0 * mx * mz)).clamp(-1.0, 1.0).acos();
    let b = ((mx * mx - my * my - mz * mz) / (2.0 * my * mz)).clamp(-1.0, 1.0).acos();

    let zeros_of_a = [[a - phi_x, -b - phi_y], [-a - phi_x, b - phi_y]];
    let mut candidates: Vec<([f64; 2], bool)> = zeros_of_a.iter().map(|t| (*t, true)).collect();
    candidates.extend(zeros_of_a.iter().map(|t| ([-t[0], -t[1]], false)));

    let mut records: Vec<EpRecord> = Vec::new();
    for (theta, forward) in candidates {
        let mut rec = EpRecord::at_phase(theta, EpMethod::ClosedForm, flavour);
        if records
            .iter()
            .any(|r| phase_distance(r.bond_phase, rec.bond_phase) < 1e-9)
        {
            continue;
        }
        let [t1, t2] = rec.bond_phase;
        let vanishing = if forward {
            f_from_phases(j, t1, t2)
        } else {
            f_from_phases(j, -t1, -t2)
        };
        rec.residual = vanishing.norm();
        let block = flavour_block(j, rec.bond_phase);
        certify(&mut rec, &block, tol)?;
        records.push(rec);
    }
    Ok(EpList { records, reason: None })
}

/// Closed-form EPs of every flavour of a flavour-diagonal model.
pub fn ep_closed_form_model(model: &ModelConfig) -> Result<Vec<EpRecord>, EpError> {
    let js = model
        .flavour_couplings()
        .ok_or(ModelError::NotFlavourDiagonal(model.variant().name()))?;
    let tol = EpTolerances::default();
    let mut out = Vec::new();
    for (eta, j) in js.iter().enumerate() {
        match ep_closed_form_tagged(*j, Some(eta as u8 + 1), &tol) {
            Ok(list) => out.extend(list.records),
            Err(EpError::DegenerateCouplings(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub grid_n: usize,
    pub tol: EpTolerances,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            grid_n: 64,
            tol: EpTolerances::default(),
        }
    }
}

/// Matrix family scanned by [`ep_scan`].
enum Target {
    Block(Coupling3, u8),
    Full(FlavourBondTable),
}

impl Target {
    fn matrix(&self, theta: [f64; 2]) -> Array2<Complex64> {
        match self {
            Target::Block(j, _) => flavour_block(*j, theta),
            Target::Full(table) => assemble_bloch(table, theta[0], theta[1]),
        }
    }

    fn flavour(&self) -> Option<u8> {
        match self {
            Target::Block(_, eta) => Some(*eta),
            Target::Full(_) => None,
        }
    }
}

fn targets(model: &ModelConfig) -> Vec<Target> {
    match model.flavour_couplings() {
        Some(js) => js
            .iter()
            .enumerate()
            .map(|(eta, j)| Target::Block(*j, eta as u8 + 1))
            .collect(),
        None => vec![Target::Full(model.bond_table())],
    }
}

/// Minimizes `f` over the plane with Nelder–Mead from `start`.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, max_iter: usize) -> ([f64; 2], f64) {
    let mut simplex = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut values = simplex.map(&f);
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let size = (simplex[1][0] - simplex[0][0])
            .abs()
            .max((simplex[1][1] - simplex[0][1]).abs())
            .max((simplex[2][0] - simplex[0][0]).abs())
            .max((simplex[2][1] - simplex[0][1]).abs());
        if size < 1e-15 || values[0] == 0.0 {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for p in 1..3 {
                    simplex[p] = [
                        0.5 * (simplex[0][0] + simplex[p][0]),
                        0.5 * (simplex[0][1] + simplex[p][1]),
                    ];
                    values[p] = f(simplex[p]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best], values[best])
}

/// Grid scan for eigenvalue coalescences followed by local refinement.
///
/// Every local minimum of the closest-pair gap on the `grid_n × grid_n`
/// bond-phase grid seeds a Nelder–Mead minimization of the squared gap.
/// Refined points whose gap falls below the gap tolerance are returned,
/// deduplicated within one grid step; `confirmed` separates exceptional
/// points from ordinary (diabolic) crossings. Flavour-diagonal models are
/// scanned one flavour block at a time.
pub fn ep_scan(model: &ModelConfig, opts: &ScanOptions) -> Result<Vec<EpRecord>, EpError> {
    model.validate()?;
    let n = opts.grid_n.max(2);
    let h = TAU / n as f64;
    let mut out = Vec::new();
    for target in targets(model) {
        let theta_at = |i: usize, j: usize| [-PI + i as f64 * h, -PI + j as f64 * h];
        let gaps: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| closest_gap_only(&target.matrix(theta_at(idx / n, idx % n))))
            .collect();
        let at = |i: usize, j: usize| gaps[(i % n) * n + (j % n)];
        let mut seeds = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let g = at(i, j);
                let is_min = (0..3).all(|di| {
                    (0..3).all(|dj| {
                        if di == 1 && dj == 1 {
                            return true;
                        }
                        let other = at(i + n + di - 1, j + n + dj - 1);
                        // Ties go to the lexicographically first cell.
                        g < other || (g == other && (di, dj) > (1, 1))
                    })
                });
                if is_min {
                    seeds.push(theta_at(i, j));
                }
            }
        }

        let refined: Vec<Result<Option<EpRecord>, EigenError>> = seeds
            .par_iter()
            .map(|seed| {
                let objective = |t: [f64; 2]| {
                    let g = closest_gap_only(&target.matrix(t));
                    g * g
                };
                let (best, _) = nelder_mead(objective, *seed, 0.5 * h, 4000);
                let mut rec = EpRecord::at_phase(best, EpMethod::Scan, target.flavour());
                let m = target.matrix(rec.bond_phase);
                let (gap, overlap, mean, norm) = closest_pair(&m)?;
                if !(gap < opts.tol.gap_rel * norm.max(1.0)) {
                    return Ok(None);
                }
                rec.gap = gap;
                rec.overlap = overlap;
                rec.confirmed = overlap > 1.0 - opts.tol.overlap;
                rec.residual = shifted_min_singular(&m, mean);
                Ok(Some(rec))
            })
            .collect();

        let mut found: Vec<EpRecord> = Vec::new();
        for r in refined {
            let Some(rec) = r? else { continue };
            match found
                .iter_mut()
                .find(|f| phase_distance(f.bond_phase, rec.bond_phase) < h)
            {
                Some(existing) => {
                    if rec.gap < existing.gap {
                        *existing = rec;
                    }
                }
                None => found.push(rec),
            }
        }
        out.extend(found);
    }
    Ok(out)
}

/// A traced Fermi-arc polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPolyline {
    /// Cartesian points, unwrapped so consecutive points are close.
    pub points: Vec<[f64; 2]>,
    /// The same points in bond-phase coordinates.
    pub bond_phases: Vec<[f64; 2]>,
    pub flavour: Option<u8>,
    /// Indices into [`ArcTrace::eps`] of the EPs matched to each endpoint.
    pub endpoint_eps: [Option<usize>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcTrace {
    pub arcs: Vec<ArcPolyline>,
    pub eps: Vec<EpRecord>,
    pub grid_n: usize,
}

/// Zero-level polylines of a periodic scalar field sampled on an `n × n`
/// bond-phase grid, clipped to the region where `keep >= 0`.
///
/// Returns open chains only; closed loops never end at an EP.
pub(crate) fn zero_contours(
    n: usize,
    field: &(dyn Fn([f64; 2]) -> f64 + Sync),
    keep: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Vec<Vec<[f64; 2]>> {
    let h = TAU / n as f64;
    let theta_at = |i: usize, j: usize| [-PI + i as f64 * h, -PI + j as f64 * h];
    let values: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| field(theta_at(idx / n, idx % n)))
        .collect();
    let v = |i: usize, j: usize| values[(i % n) * n + (j % n)];

    // Node ids: 2 * (i * n + j) for the edge (i,j)-(i+1,j), +1 for (i,j)-(i,j+1).
    let mut coords: std::collections::BTreeMap<usize, [f64; 2]> = Default::default();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut node_point = |id: usize, a: [f64; 2], b: [f64; 2], va: f64, vb: f64| {
        coords.entry(id).or_insert_with(|| {
            let t = if va == vb { 0.5 } else { va / (va - vb) };
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        });
        id
    };
    for i in 0..n {
        for j in 0..n {
            let p00 = theta_at(i, j);
            let p10 = [p00[0] + h, p00[1]];
            let p01 = [p00[0], p00[1] + h];
            let p11 = [p00[0] + h, p00[1] + h];
            let (v00, v10, v11, v01) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            let idx = |a: usize, b: usize| (a % n) * n + (b % n);
            // Cell edges in order: bottom, right, top, left.
            let edges = [
                (2 * idx(i, j), p00, p10, v00, v10),
                (2 * idx(i + 1, j) + 1, p10, p11, v10, v11),
                (2 * idx(i, j + 1), p01, p11, v01, v11),
                (2 * idx(i, j) + 1, p00, p01, v00, v01),
            ];
            let crosses = |a: f64, b: f64| (a >= 0.0) != (b >= 0.0);
            let hit: Vec<usize> = (0..4).filter(|&e| crosses(edges[e].3, edges[e].4)).collect();
            let mut add = |e1: usize, e2: usize| {
                let (id1, a1, b1, va1, vb1) = edges[e1];
                let (id2, a2, b2, va2, vb2) = edges[e2];
                let n1 = node_point(id1, a1, b1, va1, vb1);
                let n2 = node_point(id2, a2, b2, va2, vb2);
                segments.push((n1, n2));
            };
            match hit.len() {
                2 => add(hit[0], hit[1]),
                4 => {
                    let center = 0.25 * (v00 + v10 + v11 + v01);
                    if (center >= 0.0) == (v00 >= 0.0) {
                        add(0, 1);
                        add(2, 3);
                    } else {
                        add(0, 3);
                        add(1, 2);
                    }
                }
                _ => {}
            }
        }
    }

    // Clip each segment to `keep >= 0`; clipped ends become fresh nodes.
    let base_nodes = 2 * n * n;
    let mut next_id = base_nodes;
    let keep_at: std::collections::BTreeMap<usize, f64> =
        coords.iter().map(|(id, p)| (*id, keep(*p))).collect();
    let mut clipped: Vec<(usize, usize)> = Vec::new();
    for (a, b) in segments {
        let (ka, kb) = (keep_at[&a], keep_at[&b]);
        match (ka >= 0.0, kb >= 0.0) {
            (true, true) => clipped.push((a, b)),
            (false, false) => {}
            (a_in, _) => {
                let (inside, outside) = if a_in { (a, b) } else { (b, a) };
                let pin = coords[&inside];
                let mut pout = coords[&outside];
                // Unwrap the outside point next to the inside one.
                pout = [
                    pin[0] + wrap_phase(pout[0] - pin[0]),
                    pin[1] + wrap_phase(pout[1] - pin[1]),
                ];
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let p = [pin[0] + mid * (pout[0] - pin[0]), pin[1] + mid * (pout[1] - pin[1])];
                    if keep(p) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let p = [pin[0] + lo * (pout[0] - pin[0]), pin[1] + lo * (pout[1] - pin[1])];
                coords.insert(next_id, p);
                clipped.push((inside, next_id));
                next_id += 1;
            }
        }
    }

    let mut adjacency: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (s, &(a, b)) in clipped.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let mut used = vec![false; clipped.len()];
    let mut chains = Vec::new();
    let starts: Vec<usize> = adjacency
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(id, _)| *id)
        .collect();
    for start in starts {
        let mut node = start;
        let mut chain = vec![coords[&node]];
        loop {
            let Some(&seg) = adjacency[&node].iter().find(|&&s| !used[s]) else {
                break;
            };
            used[seg] = true;
            let (a, b) = clipped[seg];
            node = if a == node { b } else { a };
            let prev = *chain.last().unwrap();
            let p = coords[&node];
            chain.push([prev[0] + wrap_phase(p[0] - prev[0]), prev[1] + wrap_phase(p[1] - prev[1])]);
        }
        if chain.len() >= 2 {
            chains.push(chain);
        }
    }
    chains
}

fn nearest_ep(eps: &[EpRecord], theta: [f64; 2], flavour: Option<u8>, radius: f64) -> Option<usize> {
    eps.iter()
        .enumerate()
        .filter(|(_, e)| flavour.is_none() || e.flavour == flavour)
        .map(|(i, e)| (i, phase_distance(e.bond_phase, theta)))
        .filter(|(_, d)| *d <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

fn polyline(points: Vec<[f64; 2]>, flavour: Option<u8>, endpoint_eps: [Option<usize>; 2]) -> ArcPolyline {
    ArcPolyline {
        points: points.iter().map(|t| k_from_bond_phase(t[0], t[1])).collect(),
        bond_phases: points,
        flavour,
        endpoint_eps,
    }
}

/// `A(θ) A(−θ)`; the flavour block has eigenvalues `±2√` of it.
pub(crate) fn block_product(j: Coupling3, theta: [f64; 2]) -> Complex64 {
    f_from_phases(j, theta[0], theta[1]) * f_from_phases(j, -theta[0], -theta[1])
}

/// Traces Fermi arcs: loci of purely imaginary eigenvalue pairs ending at EPs.
///
/// For flavour-diagonal models this is `{Im[A(k)A(−k)] = 0, Re[A(k)A(−k)] ≤ 0}`
/// per flavour (all flavours when `flavour` is `None`). Hermitian flavours,
/// where the product is real everywhere, collapse to their Dirac points.
/// For mixing models the contour `Re λ = 0` is traced and only pieces with an
/// endpoint next to a confirmed scanned EP are kept.
pub fn fermi_arc_trace(model: &ModelConfig, flavour: Option<u8>, grid_n: usize) -> Result<ArcTrace, EpError> {
    model.validate()?;
    let n = grid_n.max(4);
    let h = TAU / n as f64;
    let radius = 2.0 * h;
    let mut arcs = Vec::new();

    if let Some(js) = model.flavour_couplings() {
        let mut eps = Vec::new();
        for (idx, j) in js.iter().enumerate() {
            let eta = idx as u8 + 1;
            if flavour.is_some_and(|f| f != eta) {
                continue;
            }
            let list = match ep_closed_form_tagged(*j, Some(eta), &EpTolerances::default()) {
                Ok(list) => list,
                Err(EpError::DegenerateCouplings(_)) => continue,
                Err(e) => return Err(e),
            };
            if list.records.is_empty() {
                continue;
            }
            let offset = eps.len();
            eps.extend(list.records.iter().copied());
            let local = &eps[offset..];

            let j = *j;
            let (mut max_im, mut max_abs): (f64, f64) = (0.0, 0.0);
            for i in 0..n {
                for jj in 0..n {
                    let p = block_product(j, [-PI + i as f64 * h, -PI + jj as f64 * h]);
                    max_im = max_im.max(p.im.abs());
                    max_abs = max_abs.max(p.norm());
                }
            }
            if max_im <= 1e-12 * max_abs.max(1.0) {
                for (r, rec) in local.iter().enumerate() {
                    arcs.push(polyline(vec![rec.bond_phase], Some(eta), [Some(offset + r), Some(offset + r)]));
                }
                continue;
            }
            let field = move |t: [f64; 2]| block_product(j, t).im;
            let keep = move |t: [f64; 2]| -block_product(j, t).re;
            for chain in zero_contours(n, &field, &keep) {
                let ends = [
                    nearest_ep(&eps, chain[0], Some(eta), radius),
                    nearest_ep(&eps, *chain.last().unwrap(), Some(eta), radius),
                ];
                if ends.iter().any(|e| e.is_some()) {
                    arcs.push(polyline(chain, Some(eta), ends));
                }
            }
        }
        return Ok(ArcTrace { arcs, eps, grid_n: n });
    }

    let eps: Vec<EpRecord> = ep_scan(
        model,
        &ScanOptions {
            grid_n: n,
            tol: EpTolerances::default(),
        },
    )?
    .into_iter()
    .filter(|e| e.confirmed)
    .collect();
    if eps.is_empty() {
        return Ok(ArcTrace { arcs, eps, grid_n: n });
    }
    let table = model.bond_table();
    let chiral = table.onsite.iter().flatten().all(|v| *v == ZERO);
    let field = |t: [f64; 2]| {
        let values = eigen::eigenvalues(&assemble_bloch(&table, t[0], t[1])).unwrap_or_default();
        if chiral {
            // Spectrum comes in ±λ pairs: use the three distinct λ².
            squared_pairs(&values).iter().map(|m| m.im).product()
        } else {
            values.iter().map(|l| l.re).product()
        }
    };
    let scale = table
        .links
        .iter()
        .flatten()
        .flatten()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let keep = |t: [f64; 2]| {
        let values = eigen::eigenvalues(&assemble_bloch(&table, t[0], t[1])).unwrap_or_default();
        let m = values.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        10.0 * h * scale - m
    };
    for chain in zero_contours(n, &field, &keep) {
        let ends = [
            nearest_ep(&eps, chain[0], None, radius),
            nearest_ep(&eps, *chain.last().unwrap(), None, radius),
        ];
        if ends.iter().any(|e| e.is_some()) {
            arcs.push(polyline(chain, None, ends));
        }
    }
    Ok(ArcTrace { arcs, eps, grid_n: n })
}

/// Pairs `±λ` and returns one `λ²` per pair.
fn squared_pairs(values: &[Complex64]) -> Vec<Complex64> {
    let sq: Vec<Complex64> = values.iter().map(|l| l * l).collect();
    let mut used = vec![false; sq.len()];
    let mut out = Vec::new();
    for i in 0..sq.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (0..sq.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (sq[a] - sq[i]).norm().total_cmp(&(sq[b] - sq[i]).norm()));
        if let Some(j) = partner {
            used[j] = true;
            out.push((sq[i] + sq[j]) * 0.5);
        } else {
            out.push(sq[i]);
        }
    }
    out
}

/// `|J_x e^{ik_x} + J_y| ≠ |J_x e^{−ik_x} + J_y|` beyond `1e−12`.
pub fn skin_criterion(j_eff: Coupling3, k_x: f64) -> bool {
    let e = Complex64::from_polar(1.0, k_x);
    ((j_eff.x * e + j_eff.y).norm() - (j_eff.x * e.conj() + j_eff.y).norm()).abs() > 1e-12
}

/// [`skin_criterion`] on a 1024-point `k_x` grid over `[0, 2π)`.
pub fn skin_criterion_any(j_eff: Coupling3) -> bool {
    (0..1024).any(|i| skin_criterion(j_eff, TAU * i as f64 / 1024.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyKind {
    /// Cross-flavour crossing of diagonalizable blocks.
    NonsingularCrossing,
    /// Within-flavour coalescence into Jordan blocks in each crossing flavour.
    PairedSecondOrderEps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub k: [f64; 2],
    pub kind: DegeneracyKind,
    /// Flavours `η ∈ {1, 2, 3}` taking part in a cross-flavour degeneracy.
    pub flavours: Vec<u8>,
    pub energy: Complex64,
}

/// Classifies a cross-flavour degeneracy of a flavour-diagonal model at `k`.
///
/// Because the flavour eigenvectors live in orthogonal subspaces, a
/// crossing between flavours can only be exceptional if each flavour block is
/// itself defective there, i.e. exactly one of `A_η(k)`, `A_η(−k)` vanishes.
pub fn classify_degeneracy(model: &ModelConfig, k: [f64; 2], tol: f64) -> Result<DegeneracyReport, EpError> {
    model.validate()?;
    let js = model
        .flavour_couplings()
        .ok_or(ModelError::NotFlavourDiagonal(model.variant().name()))?;
    let (t1, t2) = bond_phases(k);
    let pairs: Vec<[Complex64; 2]> = js
        .iter()
        .map(|j| crate::model::flavour_pair(*j, t1, t2))
        .collect();

    let mut flavours = Vec::new();
    let mut energy = None;
    for a in 0..3 {
        for b in a + 1..3 {
            for ea in pairs[a] {
                for eb in pairs[b] {
                    if (ea - eb).norm() <= tol {
                        energy.get_or_insert(ea);
                        for f in [a as u8 + 1, b as u8 + 1] {
                            if !flavours.contains(&f) {
                                flavours.push(f);
                            }
                        }
                    }
                }
            }
        }
    }
    let Some(energy) = energy else {
        return Err(EpError::NoDegeneracy(k[0], k[1]));
    };
    flavours.sort_unstable();

    let jordan = |eta: u8| {
        let j = js[eta as usize - 1];
        let fwd = f_from_phases(j, t1, t2).norm() <= tol;
        let bwd = f_from_phases(j, -t1, -t2).norm() <= tol;
        let [p, m] = pairs[eta as usize - 1];
        (p - m).norm() <= tol && (fwd != bwd)
    };
    let kind = if flavours.iter().all(|&eta| jordan(eta)) {
        DegeneracyKind::PairedSecondOrderEps
    } else {
        DegeneracyKind::NonsingularCrossing
    };
    Ok(DegeneracyReport {
        k,
        kind,
        flavours,
        energy,
    })
}

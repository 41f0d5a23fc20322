//! Coupling data, flavour bond tables and Bloch matrices for the Yao-Lee
//! model family in the zero-flux sector.
//!
//! All Bloch matrices use the basis `(a^x, b^x, a^y, b^y, a^z, b^z)`, where
//! `a`/`b` are the Majorana operators on the A/B triangles and the
//! superscript is the flavour. Builders emit the "raw" matrix whose
//! Hermitian eigenvalues are `±2|f(k)|`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub const SQRT3: f64 = 1.732_050_807_568_877_2_f64;

/// Primitive translation of the underlying triangular lattice attached to x-links.
pub const M1: [f64; 2] = [0.5, SQRT3 / 2.0];
/// Primitive translation attached (with a minus sign) to y-links.
pub const M2: [f64; 2] = [0.5, -SQRT3 / 2.0];

/// Overall factor multiplying every Bloch and ribbon matrix.
pub const CONVENTION_FACTOR: f64 = 2.0;

/// A 3×3 matrix in flavour space, indexed `[row][column]` = `[μ][ν]`.
pub type Flavour3 = [[Complex64; 3]; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Nearest-neighbour couplings `(J_x, J_y, J_z)` on the three link types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling3 {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl Coupling3 {
    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        Self { x, y, z }
    }

    pub fn real(x: f64, y: f64, z: f64) -> Self {
        Self::new(x.into(), y.into(), z.into())
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.x, self.y, self.z]
    }

    /// True iff every coupling has an exactly vanishing imaginary part.
    pub fn is_hermitian(&self) -> bool {
        self.as_array().iter().all(|c| c.im == 0.0)
    }

    pub fn moduli(&self) -> [f64; 3] {
        self.as_array().map(|c| c.norm())
    }

    pub fn phases(&self) -> [f64; 3] {
        self.as_array().map(|c| c.arg())
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|c| c.is_finite())
    }

    /// Multiplies all three couplings by the same complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(self.x * factor, self.y * factor, self.z * factor)
    }
}

/// Which member of the model family a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    PureYl,
    KModel,
    GammaModel,
    MagModel,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::PureYl,
        Variant::KModel,
        Variant::GammaModel,
        Variant::MagModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PureYl => "pure",
            Variant::KModel => "k",
            Variant::GammaModel => "gamma",
            Variant::MagModel => "mag",
        }
    }
}

/// Scale applied to *reported* eigenvalues. Matrices are always raw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyScale {
    #[default]
    Raw,
    Half,
}

impl EnergyScale {
    pub fn factor(self) -> f64 {
        match self {
            EnergyScale::Raw => 1.0,
            EnergyScale::Half => 0.5,
        }
    }
}

/// In-plane components `(δ_x, δ_y)` of the DMI vector of each link type,
/// stored after the cross product with ẑ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmiVectors {
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// `None` drops the DMI term on z-links entirely.
    pub z: Option<[f64; 2]>,
}

impl DmiVectors {
    /// `ŷ×ẑ`, `−(√3x̂+ŷ)/2×ẑ` and the C3-completing `(√3x̂−ŷ)/2×ẑ`.
    pub fn c3() -> Self {
        Self {
            x: [1.0, 0.0],
            y: [-0.5, SQRT3 / 2.0],
            z: Some([-0.5, -SQRT3 / 2.0]),
        }
    }

    pub fn without_z() -> Self {
        Self {
            z: None,
            ..Self::c3()
        }
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
            && self.z.map_or(true, |z| z.iter().all(|v| v.is_finite()))
    }
}

impl Default for DmiVectors {
    fn default() -> Self {
        Self::c3()
    }
}

/// DMI strength, uniform field and DMI geometry of the magnetic variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagParams {
    pub d: f64,
    pub field: [f64; 3],
    pub dmi: DmiVectors,
}

impl MagParams {
    pub fn new(d: f64, field: [f64; 3]) -> Self {
        Self {
            d,
            field,
            dmi: DmiVectors::c3(),
        }
    }

    pub fn field_norm(&self) -> f64 {
        self.field.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

/// The symmetry-breaking term added on top of the Yao-Lee couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extension {
    None,
    K(Complex64),
    Gamma(Complex64),
    Mag(MagParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub j: Coupling3,
    pub extension: Extension,
    #[serde(default)]
    pub scale: EnergyScale,
}

impl ModelConfig {
    pub fn pure(j: Coupling3) -> Self {
        Self {
            j,
            extension: Extension::None,
            scale: EnergyScale::Raw,
        }
    }

    pub fn k_model(j: Coupling3, k: Complex64) -> Self {
        Self {
            extension: Extension::K(k),
            ..Self::pure(j)
        }
    }

    pub fn gamma_model(j: Coupling3, gamma: Complex64) -> Self {
        Self {
            extension: Extension::Gamma(gamma),
            ..Self::pure(j)
        }
    }

    pub fn mag_model(j: Coupling3, d: f64, field: [f64; 3]) -> Self {
        Self {
            extension: Extension::Mag(MagParams::new(d, field)),
            ..Self::pure(j)
        }
    }

    pub fn with_scale(mut self, scale: EnergyScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn variant(&self) -> Variant {
        match self.extension {
            Extension::None => Variant::PureYl,
            Extension::K(_) => Variant::KModel,
            Extension::Gamma(_) => Variant::GammaModel,
            Extension::Mag(_) => Variant::MagModel,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.j.is_finite() {
            return Err(ModelError::NonFinite("j"));
        }
        match self.extension {
            Extension::None => {}
            Extension::K(k) if !k.is_finite() => return Err(ModelError::NonFinite("k")),
            Extension::Gamma(g) if !g.is_finite() => return Err(ModelError::NonFinite("gamma")),
            Extension::Mag(m) => {
                if !m.d.is_finite() {
                    return Err(ModelError::NonFinite("d"));
                }
                if !m.field.iter().all(|b| b.is_finite()) {
                    return Err(ModelError::NonFinite("b_field"));
                }
                if !m.dmi.is_finite() {
                    return Err(ModelError::NonFinite("dmi"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// True when the three flavours never mix, i.e. the Bloch matrix is
    /// block-diagonal in flavour.
    pub fn is_flavour_diagonal(&self) -> bool {
        matches!(self.variant(), Variant::PureYl | Variant::KModel)
    }

    /// Per-flavour effective couplings `J^(η)` for flavour-diagonal models.
    pub fn flavour_couplings(&self) -> Option<[Coupling3; 3]> {
        match self.extension {
            Extension::None => Some([self.j; 3]),
            Extension::K(k) => Some(effective_couplings(self.j, k)),
            _ => None,
        }
    }

    /// True when every parameter is real, so every matrix is Hermitian.
    pub fn is_hermitian(&self) -> bool {
        self.j.is_hermitian()
            && match self.extension {
                Extension::K(k) | Extension::Gamma(k) => k.im == 0.0,
                _ => true,
            }
    }

    pub fn bond_table(&self) -> FlavourBondTable {
        FlavourBondTable::from_model(self)
    }

    /// Same couplings with the symmetry-breaking term removed.
    pub fn reduced_to_pure(&self) -> Self {
        Self {
            extension: Extension::None,
            ..*self
        }
    }
}

fn unit(row: usize, col: usize) -> Flavour3 {
    let mut m = [[ZERO; 3]; 3];
    m[row][col] = Complex64::new(1.0, 0.0);
    m
}

fn add_scaled(acc: &mut Flavour3, m: &Flavour3, s: Complex64) {
    for (ra, rm) in acc.iter_mut().zip(m.iter()) {
        for (a, v) in ra.iter_mut().zip(rm.iter()) {
            *a += s * v;
        }
    }
}

/// `E_{μν} − E_{νμ}`.
fn antisym(mu: usize, nu: usize) -> Flavour3 {
    let mut m = unit(mu, nu);
    m[nu][mu] = Complex64::new(-1.0, 0.0);
    m
}

/// Per-link flavour amplitudes and the onsite flavour matrix shared by all
/// four variants.
///
/// `links[α][μ][ν]` is the amplitude of `i c_j^(μ) c_l^(ν)` on an α-link with
/// `j` on the A and `l` on the B triangle; `onsite[μ][ν]` is the amplitude of
/// `i c^(μ) c^(ν)` on every triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlavourBondTable {
    pub links: [Flavour3; 3],
    pub onsite: Flavour3,
}

impl FlavourBondTable {
    pub fn from_model(model: &ModelConfig) -> Self {
        let j = model.j.as_array();
        let mut links = [[[ZERO; 3]; 3]; 3];
        for (alpha, link) in links.iter_mut().enumerate() {
            for (mu, row) in link.iter_mut().enumerate() {
                row[mu] = j[alpha];
            }
        }
        let mut onsite = [[ZERO; 3]; 3];

        match model.extension {
            Extension::None => {}
            Extension::K(k) => {
                for (alpha, link) in links.iter_mut().enumerate() {
                    link[alpha][alpha] += k;
                }
            }
            Extension::Gamma(gamma) => {
                for (alpha, link) in links.iter_mut().enumerate() {
                    let (mu, nu) = ((alpha + 1) % 3, (alpha + 2) % 3);
                    link[mu][nu] -= gamma;
                    link[nu][mu] -= gamma;
                }
            }
            Extension::Mag(m) => {
                let deltas = [Some(m.dmi.x), Some(m.dmi.y), m.dmi.z];
                for (link, delta) in links.iter_mut().zip(deltas) {
                    if let Some([dx, dy]) = delta {
                        add_scaled(link, &antisym(1, 2), (m.d * dx).into());
                        add_scaled(link, &antisym(2, 0), (m.d * dy).into());
                    }
                }
                let [bx, by, bz] = m.field;
                add_scaled(&mut onsite, &antisym(1, 2), bx.into());
                add_scaled(&mut onsite, &antisym(2, 0), by.into());
                add_scaled(&mut onsite, &antisym(0, 1), bz.into());
            }
        }
        Self { links, onsite }
    }

    /// `t_x e^{iθ1} + t_y e^{iθ2} + t_z` for bond phases `(θ1, θ2)`.
    pub fn hopping(&self, theta1: f64, theta2: f64) -> Flavour3 {
        let mut t = self.links[2];
        add_scaled(&mut t, &self.links[0], Complex64::from_polar(1.0, theta1));
        add_scaled(&mut t, &self.links[1], Complex64::from_polar(1.0, theta2));
        t
    }
}

/// A 6×6 Bloch matrix at momentum `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMatrix {
    pub k: [f64; 2],
    pub entries: Array2<Complex64>,
}

/// Bond phases `(k·M1, −k·M2)`.
pub fn bond_phases(k: [f64; 2]) -> (f64, f64) {
    (dot(k, M1), -dot(k, M2))
}

/// `J_x e^{i k·M1} + J_y e^{−i k·M2} + J_z`.
pub fn f_function(j: Coupling3, k: [f64; 2]) -> Complex64 {
    let (t1, t2) = bond_phases(k);
    f_from_phases(j, t1, t2)
}

pub(crate) fn f_from_phases(j: Coupling3, theta1: f64, theta2: f64) -> Complex64 {
    j.x * Complex64::from_polar(1.0, theta1) + j.y * Complex64::from_polar(1.0, theta2) + j.z
}

/// The shifted coupling triples `J^(1)`, `J^(2)`, `J^(3)` obtained by adding
/// `K` to `J_x`, `J_y` and `J_z` respectively.
pub fn effective_couplings(j: Coupling3, k_coupling: Complex64) -> [Coupling3; 3] {
    [
        Coupling3::new(j.x + k_coupling, j.y, j.z),
        Coupling3::new(j.x, j.y + k_coupling, j.z),
        Coupling3::new(j.x, j.y, j.z + k_coupling),
    ]
}

/// `(A_1, A_2, A_3)` at `k`.
pub fn a_functions(j: Coupling3, k_coupling: Complex64, k: [f64; 2]) -> [Complex64; 3] {
    let (t1, t2) = bond_phases(k);
    let f = f_from_phases(j, t1, t2);
    [
        f + k_coupling * Complex64::from_polar(1.0, t1),
        f + k_coupling * Complex64::from_polar(1.0, t2),
        f + k_coupling,
    ]
}

/// True iff each modulus is at most the sum of the other two.
pub fn triangle_test(moduli: [f64; 3]) -> Result<bool, ModelError> {
    if moduli.iter().any(|m| !(*m >= 0.0)) {
        return Err(ModelError::NegativeModulus);
    }
    let [a, b, c] = moduli;
    Ok(a <= b + c && b <= a + c && c <= a + b)
}

/// Assembles the raw 6×6 Bloch matrix.
pub fn bloch_hamiltonian(model: &ModelConfig, k: [f64; 2]) -> Result<BlochMatrix, ModelError> {
    model.validate()?;
    let table = model.bond_table();
    let (t1, t2) = bond_phases(k);
    let entries = assemble_bloch(&table, t1, t2);
    Ok(BlochMatrix { k, entries })
}

/// Bloch matrix as a function of bond phases; `k` and `(θ1, θ2)` are related
/// by [`bond_phases`].
pub(crate) fn assemble_bloch(table: &FlavourBondTable, theta1: f64, theta2: f64) -> Array2<Complex64> {
    let c = CONVENTION_FACTOR;
    let forward = table.hopping(theta1, theta2);
    let backward = table.hopping(-theta1, -theta2);
    let mut h = Array2::zeros((6, 6));
    for mu in 0..3 {
        for nu in 0..3 {
            let (a_mu, b_mu, a_nu, b_nu) = (2 * mu, 2 * mu + 1, 2 * nu, 2 * nu + 1);
            h[[a_mu, b_nu]] = I * c * forward[mu][nu];
            h[[b_mu, a_nu]] = -I * c * backward[nu][mu];
            h[[a_mu, a_nu]] = I * c * table.onsite[mu][nu];
            h[[b_mu, b_nu]] = I * c * table.onsite[mu][nu];
        }
    }
    h
}

/// Principal branch normalized so the real part is nonnegative, with ties
/// broken towards a nonnegative imaginary part.
pub(crate) fn branch_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        -s
    } else {
        s
    }
}

/// Eigenvalues `±2√(A(k)A(−k))` of one flavour block with couplings `j`.
pub(crate) fn flavour_pair(j: Coupling3, theta1: f64, theta2: f64) -> [Complex64; 2] {
    let s = CONVENTION_FACTOR
        * branch_sqrt(f_from_phases(j, theta1, theta2) * f_from_phases(j, -theta1, -theta2));
    [s, -s]
}

/// Whether [`closed_form_spectrum`] result is exact or only a heuristic
/// continuation of a Hermitian formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedFormKind {
    Exact,
    Heuristic,
}

/// Closed-form eigenvalues where the model admits them: PureYL and KModel
/// (three flavour blocks) and the magnetic variant without DMI.
///
/// Returns `None` for the Γ model and for DMI with `D ≠ 0`.
pub fn closed_form_spectrum(model: &ModelConfig, k: [f64; 2]) -> Option<Vec<Complex64>> {
    closed_form_with_kind(model, k).map(|(values, _)| values)
}

pub fn closed_form_with_kind(
    model: &ModelConfig,
    k: [f64; 2],
) -> Option<(Vec<Complex64>, ClosedFormKind)> {
    let (t1, t2) = bond_phases(k);
    closed_form_from_phases(model, t1, t2)
}

pub(crate) fn closed_form_from_phases(
    model: &ModelConfig,
    theta1: f64,
    theta2: f64,
) -> Option<(Vec<Complex64>, ClosedFormKind)> {
    if let Some(js) = model.flavour_couplings() {
        let values = js
            .iter()
            .flat_map(|j| flavour_pair(*j, theta1, theta2))
            .collect();
        return Some((values, ClosedFormKind::Exact));
    }
    match model.extension {
        Extension::Mag(m) if m.d == 0.0 => {
            // The field term commutes with the flavour-identity hopping, so the
            // field eigenvalues {0, ±2|B|} simply shift the hopping bands.
            let [s, _] = flavour_pair(model.j, theta1, theta2);
            let b = CONVENTION_FACTOR * m.field_norm();
            let values = vec![s, -s, b + s, b - s, -(b + s), -(b - s)];
            Some((values, ClosedFormKind::Exact))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fig_j() -> Coupling3 {
        Coupling3::new(2.0.into(), 1.0.into(), Complex64::from_polar(2.5, PI / 3.0))
    }

    #[test]
    fn f_at_gamma_point() {
        assert_abs_diff_eq!(f_function(Coupling3::real(1.0, 1.0, 1.0), [0.0, 0.0]).re, 3.0);
    }

    #[test]
    fn f_vanishes_at_dirac_point() {
        let f = f_function(Coupling3::real(1.0, 1.0, 1.0), [4.0 * PI / 3.0, 0.0]);
        assert!(f.norm() < 1e-12);
    }

    #[test]
    fn f_with_complex_jz() {
        let f = f_function(fig_j(), [0.0, 0.0]);
        assert_abs_diff_eq!(f.re, 4.25, epsilon = 1e-12);
        assert_abs_diff_eq!(f.im, 2.5 * (PI / 3.0).sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.im, 2.165_063_509_461_097, epsilon = 1e-12);
    }

    #[test]
    fn a_functions_reduce_to_f() {
        let j = Coupling3::real(1.0, 1.0, 1.0);
        let a = a_functions(j, c(0.4, 0.0), [0.0, 0.0]);
        for v in a {
            assert_abs_diff_eq!(v.re, 3.4, epsilon = 1e-14);
        }
        let k = [0.3, -1.2];
        let f = f_function(j, k);
        for v in a_functions(j, ZERO, k) {
            assert_eq!(v, f);
        }
    }

    #[test]
    fn a_functions_match_shifted_couplings() {
        let kc = c(0.4, 0.0);
        let k = [PI / 2.0, 0.0];
        let a = a_functions(fig_j(), kc, k);
        for (a_eta, j_eta) in a.iter().zip(effective_couplings(fig_j(), kc)) {
            assert!((a_eta - f_function(j_eta, k)).norm() < 1e-14);
        }
    }

    #[test]
    fn effective_coupling_shifts() {
        let [j1, j2, j3] = effective_couplings(Coupling3::real(2.0, 1.0, 2.5), c(0.4, 0.0));
        assert_eq!(j1, Coupling3::real(2.4, 1.0, 2.5));
        assert_eq!(j2, Coupling3::real(2.0, 1.4, 2.5));
        assert_eq!(j3, Coupling3::real(2.0, 1.0, 2.9));
        let [_, _, j3] = effective_couplings(fig_j(), c(0.4, 0.0));
        assert_abs_diff_eq!(j3.z.re, 1.65, epsilon = 1e-12);
        assert_abs_diff_eq!(j3.z.im, 2.165_063_509_461_097, epsilon = 1e-12);
        let same = effective_couplings(Coupling3::real(1.0, 1.0, 1.0), ZERO);
        assert!(same.iter().all(|j| *j == Coupling3::real(1.0, 1.0, 1.0)));
    }

    #[test]
    fn triangle_cases() {
        assert!(triangle_test([1.0, 1.0, 1.0]).unwrap());
        assert!(!triangle_test([1.0, 1.0, 2.5]).unwrap());
        assert!(triangle_test([2.0, 1.0, 2.5]).unwrap());
        assert!(triangle_test([-1.0, 1.0, 1.0]).is_err());
        assert!(triangle_test([f64::NAN, 1.0, 1.0]).is_err());
    }

    #[test]
    fn coupling_polar_roundtrip() {
        let j = fig_j();
        for (m, (p, v)) in j.moduli().iter().zip(j.phases().iter().zip(j.as_array())) {
            assert!((Complex64::from_polar(*m, *p) - v).norm() < 1e-15);
        }
        assert!(!j.is_hermitian());
        assert!(Coupling3::real(1.0, -2.0, 0.5).is_hermitian());
    }

    #[test]
    fn pure_matrix_matches_block_display() {
        let j = fig_j();
        let k = [0.7, -0.4];
        let h = bloch_hamiltonian(&ModelConfig::pure(j), k).unwrap().entries;
        let fk = f_function(j, k);
        let fmk = f_function(j, [-k[0], -k[1]]);
        for eta in 0..3 {
            let (a, b) = (2 * eta, 2 * eta + 1);
            assert!((h[[a, b]] - 2.0 * I * fk).norm() < 1e-14);
            assert!((h[[b, a]] + 2.0 * I * fmk).norm() < 1e-14);
            assert_eq!(h[[a, a]], ZERO);
        }
        assert_eq!(h[[0, 3]], ZERO);
    }

    #[test]
    fn reductions_equal_pure() {
        let j = fig_j();
        let k = [1.1, 0.2];
        let pure = bloch_hamiltonian(&ModelConfig::pure(j), k).unwrap().entries;
        for model in [
            ModelConfig::k_model(j, ZERO),
            ModelConfig::gamma_model(j, ZERO),
            ModelConfig::mag_model(j, 0.0, [0.0; 3]),
        ] {
            assert_eq!(bloch_hamiltonian(&model, k).unwrap().entries, pure);
        }
    }

    #[test]
    fn dmi_defaults_sum_to_zero() {
        let d = DmiVectors::c3();
        let z = d.z.unwrap();
        assert_abs_diff_eq!(d.x[0] + d.y[0] + z[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.x[1] + d.y[1] + z[1], 0.0, epsilon = 1e-15);
        assert!(DmiVectors::without_z().z.is_none());
    }

    #[test]
    fn gamma_table_is_symmetric_offdiagonal() {
        let t = ModelConfig::gamma_model(Coupling3::real(1.0, 1.0, 1.0), c(0.4, 0.0)).bond_table();
        // x-link mixes y and z.
        assert_eq!(t.links[0][1][2], t.links[0][2][1]);
        assert_eq!(t.links[0][1][2], c(-0.4, 0.0));
        assert_eq!(t.links[0][0][1], ZERO);
        assert_eq!(t.links[2][0][1], c(-0.4, 0.0));
    }

    #[test]
    fn mag_table_is_antisymmetric() {
        let model = ModelConfig::mag_model(Coupling3::real(1.0, 1.0, 1.0), 0.5, [0.1, 0.2, 0.7]);
        let t = model.bond_table();
        for link in &t.links {
            for mu in 0..3 {
                for nu in 0..3 {
                    if mu != nu {
                        assert_eq!(link[mu][nu], -link[nu][mu]);
                    }
                }
            }
        }
        assert_eq!(t.onsite[0][1], c(0.7, 0.0));
        assert_eq!(t.onsite[1][2], c(0.1, 0.0));
        assert_eq!(t.onsite[2][0], c(0.2, 0.0));
    }

    #[test]
    fn closed_form_availability() {
        let j = Coupling3::real(1.0, 1.0, 1.0);
        assert!(closed_form_spectrum(&ModelConfig::gamma_model(j, c(0.4, 0.0)), [0.0; 2]).is_none());
        assert!(closed_form_spectrum(&ModelConfig::mag_model(j, 0.5, [0.0, 0.0, 0.7]), [0.0; 2]).is_none());
        let zeros = closed_form_spectrum(&ModelConfig::pure(j), [4.0 * PI / 3.0, 0.0]).unwrap();
        assert!(zeros.iter().all(|e| e.norm() < 1e-10));
    }

    #[test]
    fn mag_closed_form_at_gamma() {
        let model = ModelConfig::mag_model(Coupling3::real(1.0, 1.0, 1.0), 0.0, [0.0, 0.0, 0.7]);
        let mut got: Vec<f64> = closed_form_spectrum(&model, [0.0, 0.0])
            .unwrap()
            .iter()
            .map(|e| e.re)
            .collect();
        got.sort_by(f64::total_cmp);
        let want = [-7.4, -6.0, -4.6, 4.6, 6.0, 7.4];
        for (g, w) in got.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn branch_prefers_positive_real_then_imag() {
        assert_eq!(branch_sqrt(c(-4.0, -0.0)), c(0.0, 2.0));
        assert_eq!(branch_sqrt(c(4.0, 0.0)), c(2.0, 0.0));
        assert!(branch_sqrt(c(-3.0, -1.0)).re >= 0.0);
    }

    #[test]
    fn validation_rejects_non_finite() {
        let bad = ModelConfig::k_model(Coupling3::real(1.0, 1.0, 1.0), c(f64::NAN, 0.0));
        assert!(bloch_hamiltonian(&bad, [0.0; 2]).is_err());
        let bad = ModelConfig::mag_model(Coupling3::real(1.0, 1.0, 1.0), f64::INFINITY, [0.0; 3]);
        assert!(bad.validate().is_err());
    }
}

use majorana_nh_core::eigen::eig;
use majorana_nh_core::model::{bloch_hamiltonian, Coupling3, DmiVectors, Extension, MagParams, ModelConfig};
use majorana_nh_core::ribbon::{
    basis_index, basis_label, build_ribbon, edge_mode_weights, localization_profile, log01,
    ribbon_spectrum, sweep, symmetric_kx_grid, transverse_k_y, Boundary, Classifier,
    RibbonSpec, StateSelection, SweepOptions, WeightNormalization,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

mod common;
use common::{match_multisets, random_polar};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex_j() -> Coupling3 {
    Coupling3::new(c(2.0, 0.0), c(1.0, 0.0), Complex64::from_polar(2.5, PI / 3.0))
}

fn variants(j: Coupling3) -> Vec<ModelConfig> {
    vec![
        ModelConfig::pure(j),
        ModelConfig::k_model(j, c(0.4, 0.0)),
        ModelConfig::gamma_model(j, c(0.4, 0.0)),
        ModelConfig::mag_model(j, 0.5, [0.0, 0.0, 0.7]),
    ]
}

/// Union of Bloch spectra over the transverse momenta a periodic ribbon of
/// `w` rows samples.
fn bloch_union(model: &ModelConfig, w: usize, k_x: f64) -> Vec<Complex64> {
    (0..w)
        .flat_map(|n| {
            let q = 2.0 * PI * n as f64 / w as f64;
            let h = bloch_hamiltonian(model, [k_x, transverse_k_y(q)]).unwrap().entries;
            eig(&h, false, None).unwrap().eigenvalues
        })
        .collect()
}

#[test]
fn dimension_and_index_maps() {
    let spec = RibbonSpec::new(ModelConfig::pure(Coupling3::real(1.0, 1.0, 1.0)), 52, 0.3, Boundary::Open);
    assert_eq!(spec.dimension(), 312);
    assert_eq!(build_ribbon(&spec).unwrap().dim(), (312, 312));
    for idx in 0..312 {
        let (row, sub, flavour) = basis_label(idx);
        assert!((1..=52).contains(&row) && sub < 2 && flavour < 3);
        assert_eq!(basis_index(row, sub, flavour), idx);
    }
    assert_eq!(basis_index(1, 0, 0), 0);
    assert_eq!(basis_index(1, 1, 0), 3);
    assert_eq!(basis_index(2, 0, 2), 8);
}

#[test]
fn too_few_rows_are_rejected() {
    let spec = RibbonSpec::new(ModelConfig::pure(Coupling3::real(1.0, 1.0, 1.0)), 1, 0.0, Boundary::Open);
    assert!(build_ribbon(&spec).is_err());
    assert!(ribbon_spectrum(&spec, false).is_err());
}

#[test]
fn periodic_ribbon_equals_bloch_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for j in [Coupling3::real(1.0, 1.0, 1.0), complex_j()] {
        for model in variants(j) {
            for w in [8, 24] {
                for _ in 0..3 {
                    let k_x = rng.random_range(-PI..PI);
                    let spec = RibbonSpec::new(model, w, k_x, Boundary::Periodic);
                    let h = build_ribbon(&spec).unwrap();
                    let full = eig(&h, false, None).unwrap().eigenvalues;
                    let fast = ribbon_spectrum(&spec, false).unwrap().eigenvalues;
                    let want = bloch_union(&model, w, k_x);
                    let err = match_multisets(&full, &want).max(match_multisets(&fast, &want));
                    assert!(err < 1e-8, "{:?} w={w} k_x={k_x}: {err}", model.variant());
                }
            }
        }
    }
}

#[test]
fn real_couplings_give_real_ribbon_spectra() {
    let j = Coupling3::real(1.0, 0.7, 1.3);
    let mut no_z = MagParams::new(0.5, [0.2, -0.1, 0.7]);
    no_z.dmi = DmiVectors::without_z();
    let mut models = variants(j);
    models.push(ModelConfig {
        extension: Extension::Mag(no_z),
        ..ModelConfig::pure(j)
    });
    let grid = symmetric_kx_grid(100);
    for model in models {
        let mut opts = SweepOptions::new(6);
        opts.cloud_samples = None;
        let result = sweep(&model, &grid, &opts).unwrap();
        let worst = result
            .points
            .iter()
            .flat_map(|p| p.records.iter().map(|r| r.eigenvalue.im.abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{:?}: {worst}", model.variant());
    }
}

#[test]
fn vanishing_extensions_reduce_to_pure_ribbon() {
    let j = complex_j();
    for boundary in [Boundary::Open, Boundary::Periodic] {
        let pure = build_ribbon(&RibbonSpec::new(ModelConfig::pure(j), 5, 0.8, boundary)).unwrap();
        for model in [
            ModelConfig::k_model(j, c(0.0, 0.0)),
            ModelConfig::gamma_model(j, c(0.0, 0.0)),
            ModelConfig::mag_model(j, 0.0, [0.0; 3]),
        ] {
            assert_eq!(build_ribbon(&RibbonSpec::new(model, 5, 0.8, boundary)).unwrap(), pure);
        }
    }
}

#[test]
fn ribbon_antisymmetry_under_kx_reversal() {
    for model in variants(complex_j()) {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let h = build_ribbon(&RibbonSpec::new(model, 6, 0.9, boundary)).unwrap();
            let hm = build_ribbon(&RibbonSpec::new(model, 6, -0.9, boundary)).unwrap();
            let worst = (&h + &hm.t()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst < 1e-14);
        }
    }
}

#[test]
fn fast_path_matches_full_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let j = Coupling3::new(random_polar(&mut rng, 0.5, 2.0), random_polar(&mut rng, 0.5, 2.0), random_polar(&mut rng, 0.5, 2.0));
        let model = ModelConfig::k_model(j, random_polar(&mut rng, 0.1, 0.5));
        let spec = RibbonSpec::new(model, 10, rng.random_range(-PI..PI), Boundary::Open);
        let h = build_ribbon(&spec).unwrap();
        let fast = ribbon_spectrum(&spec, false).unwrap();
        let full = eig(&h, false, None).unwrap();
        let scale = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        for k in 0..fast.len() {
            let v = fast.right_vectors.column(k);
            let r = h.dot(&v) - v.mapv(|x| x * fast.eigenvalues[k]);
            let res = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / scale;
            assert!(res <= 1e-8, "state {k}: {res}");
            assert!((fast.residuals[k] - res).abs() < 1e-10);
        }
        let sorted = fast.eigenvalues.windows(2).all(|p| (p[0].re, p[0].im) <= (p[1].re, p[1].im));
        assert!(sorted);
        // Open non-Hermitian ribbons can be badly conditioned; compare loosely.
        assert!(match_multisets(&fast.eigenvalues, &full.eigenvalues) < 1e-6);
    }
}

#[test]
fn localization_records_are_normalized() {
    let w = 8;
    let model = ModelConfig::gamma_model(complex_j(), c(0.4, 0.0));
    let grid = symmetric_kx_grid(12);
    let result = sweep(&model, &grid, &SweepOptions::new(w)).unwrap();
    assert_eq!(result.kx_grid(), grid);
    for point in &result.points {
        assert_eq!(point.records.len(), 6 * w);
        for r in &point.records {
            assert!(r.ipr >= 1.0 / (2 * w) as f64 - 1e-12 && r.ipr <= 1.0 + 1e-12);
            assert!(r.mean_row >= 1.0 - 1e-12 && r.mean_row <= 2.0 * w as f64 + 1e-12);
        }
    }
    let spec = RibbonSpec::new(model, w, 0.4, Boundary::Open);
    let spectrum = ribbon_spectrum(&spec, false).unwrap();
    for k in 0..spectrum.len() {
        let weights = majorana_nh_core::ribbon::site_weights(spectrum.right_vectors.column(k).iter().copied(), w);
        assert_eq!(weights.len(), 2 * w);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(localization_profile(&spectrum, w + 1, None, &Classifier::default()).is_err());
}

#[test]
fn sweeps_are_deterministic() {
    let model = ModelConfig::mag_model(
        Coupling3::new(Complex64::from_polar(1.0, PI / 3.0), Complex64::from_polar(1.0, PI / 6.0), c(1.0, 0.0)),
        0.5,
        [0.0, 0.0, 0.7],
    );
    let grid = symmetric_kx_grid(6);
    let a = sweep(&model, &grid, &SweepOptions::new(6)).unwrap();
    let b = sweep(&model, &grid, &SweepOptions::new(6)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn hermitian_zero_modes_decay_from_the_edges() {
    let w = 24;
    let model = ModelConfig::pure(Coupling3::real(1.0, 1.0, 1.0));
    let profiles = edge_mode_weights(&model, w, PI, WeightNormalization::Linear, &StateSelection::NearestZero(6)).unwrap();
    assert_eq!(profiles.len(), 6);
    let outer = 3;
    for p in &profiles {
        assert!(p.eigenvalue.norm() < 1e-8);
        let edge: f64 = p.weights[..outer].iter().chain(&p.weights[2 * w - outer..]).sum();
        let middle: f64 = p.weights[w - 4..w + 4].iter().sum();
        assert!(edge > 0.95, "edge mass {edge}");
        assert!(middle < 1e-6, "middle mass {middle}");
    }
}

#[test]
fn edge_mode_snapshot_at_two_thirds_pi() {
    let w = 24;
    let model = ModelConfig::pure(Coupling3::real(1.0, 1.0, 1.0));
    let linear = edge_mode_weights(&model, w, 2.0 * PI / 3.0, WeightNormalization::Linear, &StateSelection::NearestZero(3)).unwrap();
    for p in &linear {
        assert_eq!(p.weights.len(), 2 * w);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let logs = edge_mode_weights(&model, w, 2.0 * PI / 3.0, WeightNormalization::Log01, &StateSelection::NearestZero(3)).unwrap();
    for p in &logs {
        let lo = p.weights.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }
    let empty = edge_mode_weights(&model, w, 0.0, WeightNormalization::Linear, &StateSelection::Indices(vec![]));
    assert!(empty.is_err());
}

#[test]
fn log01_two_values() {
    assert_eq!(log01(&[1e-8, 1.0]), vec![0.0, 1.0]);
    assert_eq!(log01(&[0.5, 0.5]), vec![0.0, 0.0]);
}

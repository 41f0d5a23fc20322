#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((n, n), |_| random_complex(rng))
}

/// Gram-Schmidt on a random matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Array2<Complex64> {
    let mut q = random_matrix(rng, n);
    for j in 0..n {
        for k in 0..j {
            let proj: Complex64 = (0..n).map(|i| q[[i, k]].conj() * q[[i, j]]).sum();
            for i in 0..n {
                let v = q[[i, k]];
                q[[i, j]] -= proj * v;
            }
        }
        let norm = (0..n).map(|i| q[[i, j]].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Random coupling in polar form with modulus in `[lo, hi]`.
pub fn random_polar<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Complex64 {
    Complex64::from_polar(rng.random_range(lo..hi), rng.random_range(-PI..PI))
}

/// Largest distance under the optimal pairing of two equally sized multisets.
///
/// Exhaustive over permutations for small sizes, greedy-with-repair otherwise.
pub fn match_multisets(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n <= 7 {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |p| {
            let worst = p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).fold(0.0, f64::max);
            if worst < best {
                best = worst;
            }
        });
        return best;
    }
    let mut used = vec![false; n];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn permute(idx: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}

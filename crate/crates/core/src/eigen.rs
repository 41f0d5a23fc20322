//! Dense complex non-symmetric eigensolver.
//!
//! Householder reduction to upper Hessenberg form, single-shift implicit QR
//! iteration to complex Schur form `A = Z T Z^H`, then eigenvectors of `T`
//! by back substitution. Every returned pair carries its residual
//! `‖Av − λv‖₂ / max(1, ‖A‖_F)`.
//!
//! Near-defective eigenvalues are flagged, never rejected: exceptional points
//! are exactly the matrices we want to look at.

use ndarray::{Array2, ArrayBase, Data, Ix2};
use num_complex::Complex64;

use crate::error::EigenError;

const ULP: f64 = f64::EPSILON;
const SAFE_MIN: f64 = 1e-300;
const RESCALE_AT: f64 = 1e150;
/// Eigenvector pairs whose overlap exceeds `1 - DEFECTIVE_OVERLAP` are flagged.
pub const DEFECTIVE_OVERLAP: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigen-decomposition of a square complex matrix, sorted by real part and
/// then imaginary part.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors, one per column.
    pub right_vectors: Array2<Complex64>,
    /// Unit-norm left eigenvectors `l` with `l^H A = λ l^H`, one per column.
    pub left_vectors: Option<Array2<Complex64>>,
    pub residuals: Vec<f64>,
    pub defective: Vec<bool>,
    /// Largest residual actually achieved.
    pub achieved_tolerance: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Default residual target for a matrix of dimension `n`.
pub fn default_tolerance(n: usize) -> f64 {
    if n <= 16 {
        1e-10
    } else {
        1e-8
    }
}

/// Column-major square work matrix.
#[derive(Clone)]
struct Work {
    n: usize,
    data: Vec<Complex64>,
}

impl Work {
    fn from_array<S: Data<Elem = Complex64>>(a: &ArrayBase<S, Ix2>) -> Self {
        let n = a.nrows();
        let mut data = vec![ZERO; n * n];
        for ((i, j), v) in a.indexed_iter() {
            data[i + j * n] = *v;
        }
        Self { n, data }
    }

    fn identity(n: usize) -> Self {
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            data[i + i * n] = ONE;
        }
        Self { n, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i + j * self.n]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i + j * self.n]
    }

    fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

#[inline]
fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

fn check_input<S: Data<Elem = Complex64>>(a: &ArrayBase<S, Ix2>) -> Result<(), EigenError> {
    let (rows, cols) = a.dim();
    if rows != cols || rows == 0 {
        return Err(EigenError::Shape { rows, cols });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    Ok(())
}

pub(crate) fn frobenius<S: Data<Elem = Complex64>>(a: &ArrayBase<S, Ix2>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Reduces `h` to upper Hessenberg form in place, accumulating the unitary
/// transformation into `z` when given.
fn hessenberg(h: &mut Work, mut z: Option<&mut Work>) {
    let n = h.n;
    let mut u = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let m = k + 1;
        let xnorm = (m..n).map(|i| h.at(i, k).norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = h.at(m, k);
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        for i in m..n {
            u[i] = h.at(i, k);
        }
        u[m] += phase * xnorm;
        let unorm2: f64 = (m..n).map(|i| u[i].norm_sqr()).sum();
        if unorm2 == 0.0 {
            continue;
        }
        let scale = 2.0 / unorm2;

        // P = I - 2 u u^H / |u|^2 applied from the left.
        for j in k..n {
            let mut dot = ZERO;
            for i in m..n {
                dot += u[i].conj() * h.at(i, j);
            }
            let dot = dot * scale;
            for i in m..n {
                *h.at_mut(i, j) -= u[i] * dot;
            }
        }
        // ... and from the right, on every row.
        right_reflect(h, &u, m, scale);
        if let Some(z) = z.as_deref_mut() {
            right_reflect(z, &u, m, scale);
        }
        *h.at_mut(m, k) = -phase * xnorm;
        for i in m + 1..n {
            *h.at_mut(i, k) = ZERO;
        }
    }
}

fn right_reflect(a: &mut Work, u: &[Complex64], m: usize, scale: f64) {
    let n = a.n;
    let mut acc = vec![ZERO; n];
    for j in m..n {
        let uj = u[j];
        let col = a.col(j);
        for i in 0..n {
            acc[i] += col[i] * uj;
        }
    }
    for j in m..n {
        let f = u[j].conj() * scale;
        for i in 0..n {
            let d = acc[i] * f;
            *a.at_mut(i, j) -= d;
        }
    }
}

/// Rotation `[c, s; -conj(s), c]` with `c` real that maps `(x, y)` to `(r, 0)`.
#[inline]
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, y.conj() / y.norm());
    }
    let xn = x.norm();
    let norm = xn.hypot(y.norm());
    (xn / norm, (x / xn) * y.conj() / norm)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let p = (a - d) * 0.5;
    let bc = b * c;
    if bc == ZERO {
        return d;
    }
    let disc = (p * p + bc).sqrt();
    let denom = if (p.conj() * disc).re >= 0.0 {
        p + disc
    } else {
        p - disc
    };
    if denom == ZERO {
        d
    } else {
        d - bc / denom
    }
}

/// Drives the Hessenberg matrix `h` to upper triangular Schur form.
///
/// With `full` unset only the active window is updated, which is enough for
/// eigenvalues. Returns `false` when the iteration budget is exhausted.
fn schur(h: &mut Work, mut z: Option<&mut Work>, full: bool) -> bool {
    let n = h.n;
    if n == 1 {
        return true;
    }
    let max_its = 30 * n.max(10);
    let mut ihi = n - 1;
    let mut its = 0usize;
    loop {
        // Look for a negligible subdiagonal entry in the active block.
        let mut l = ihi;
        while l > 0 {
            let mut s = cabs1(h.at(l - 1, l - 1)) + cabs1(h.at(l, l));
            if s == 0.0 {
                s = (0..=ihi).map(|i| cabs1(h.at(i, i))).sum::<f64>().max(SAFE_MIN);
            }
            if cabs1(h.at(l, l - 1)) <= ULP * s {
                *h.at_mut(l, l - 1) = ZERO;
                break;
            }
            l -= 1;
        }
        if l == ihi {
            if ihi == 0 {
                return true;
            }
            ihi -= 1;
            its = 0;
            if ihi == 0 {
                return true;
            }
            continue;
        }
        its += 1;
        if its > max_its {
            return false;
        }

        let mu = if its % 10 == 0 {
            h.at(ihi, ihi) + 0.75 * cabs1(h.at(ihi, ihi - 1))
        } else {
            wilkinson_shift(
                h.at(ihi - 1, ihi - 1),
                h.at(ihi - 1, ihi),
                h.at(ihi, ihi - 1),
                h.at(ihi, ihi),
            )
        };

        let (col_end, row_start) = if full { (n, 0) } else { (ihi + 1, l) };
        for k in l..ihi {
            let (x, y) = if k == l {
                (h.at(l, l) - mu, h.at(l + 1, l))
            } else {
                (h.at(k, k - 1), h.at(k + 1, k - 1))
            };
            let (c, s) = givens(x, y);
            let first = if k > l { k - 1 } else { l };
            for j in first..col_end {
                let a = h.at(k, j);
                let b = h.at(k + 1, j);
                *h.at_mut(k, j) = a * c + s * b;
                *h.at_mut(k + 1, j) = -s.conj() * a + b * c;
            }
            let last = (k + 2).min(ihi);
            let sc = s.conj();
            for i in row_start..=last {
                let a = h.at(i, k);
                let b = h.at(i, k + 1);
                *h.at_mut(i, k) = a * c + b * sc;
                *h.at_mut(i, k + 1) = b * c - a * s;
            }
            if k > l {
                *h.at_mut(k + 1, k - 1) = ZERO;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let a = z.at(i, k);
                    let b = z.at(i, k + 1);
                    *z.at_mut(i, k) = a * c + b * sc;
                    *z.at_mut(i, k + 1) = b * c - a * s;
                }
            }
        }
    }
}

fn tnorm(t: &Work) -> f64 {
    let n = t.n;
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j.min(n - 1) {
            m = m.max(cabs1(t.at(i, j)));
        }
    }
    m
}

/// Eigenvectors of upper-triangular `t`, one per column of the result.
fn triangular_right_vectors(t: &Work) -> Work {
    let n = t.n;
    let big = tnorm(t);
    let smin = (ULP * big).max(SAFE_MIN);
    let mut x = Work {
        n,
        data: vec![ZERO; n * n],
    };
    let mut rhs = vec![ZERO; n];
    for k in 0..n {
        let lambda = t.at(k, k);
        let mut xk = vec![ZERO; k + 1];
        xk[k] = ONE;
        let mut xmax: f64 = 1.0;
        for i in 0..k {
            rhs[i] = -t.at(i, k);
        }
        for i in (0..k).rev() {
            let num = rhs[i];
            let mut den = t.at(i, i) - lambda;
            let xi = if cabs1(den) < smin {
                if cabs1(num) <= 16.0 * ULP * big * xmax {
                    ZERO
                } else {
                    den = Complex64::new(smin, 0.0);
                    num / den
                }
            } else {
                num / den
            };
            xk[i] = xi;
            let a = cabs1(xi);
            if a > RESCALE_AT {
                let s = 1.0 / a;
                for v in xk.iter_mut() {
                    *v *= s;
                }
                for r in rhs[..i].iter_mut() {
                    *r *= s;
                }
                xmax *= s;
            }
            xmax = xmax.max(cabs1(xk[i]));
            let xi = xk[i];
            if xi != ZERO {
                for (j, r) in rhs[..i].iter_mut().enumerate() {
                    *r -= t.at(j, i) * xi;
                }
            }
        }
        x.data[k * n..k * n + k + 1].copy_from_slice(&xk);
    }
    x
}

/// Vectors `y` with `y^H t = λ y^H` for upper-triangular `t`.
fn triangular_left_vectors(t: &Work) -> Work {
    let n = t.n;
    let big = tnorm(t);
    let smin = (ULP * big).max(SAFE_MIN);
    let mut y = Work {
        n,
        data: vec![ZERO; n * n],
    };
    for k in 0..n {
        let lambda = t.at(k, k).conj();
        let mut yk = vec![ZERO; n];
        yk[k] = ONE;
        let mut ymax: f64 = 1.0;
        for i in k + 1..n {
            let mut num = ZERO;
            for j in k..i {
                num -= t.at(j, i).conj() * yk[j];
            }
            let mut den = t.at(i, i).conj() - lambda;
            let yi = if cabs1(den) < smin {
                if cabs1(num) <= 16.0 * ULP * big * ymax {
                    ZERO
                } else {
                    den = Complex64::new(smin, 0.0);
                    num / den
                }
            } else {
                num / den
            };
            yk[i] = yi;
            let a = cabs1(yi);
            if a > RESCALE_AT {
                let s = 1.0 / a;
                for v in yk[..=i].iter_mut() {
                    *v *= s;
                }
                ymax *= s;
            }
            ymax = ymax.max(cabs1(yk[i]));
        }
        y.data[k * n..(k + 1) * n].copy_from_slice(&yk);
    }
    y
}

/// `z * x` with `x` upper triangular, columns normalized to unit 2-norm.
fn back_transform(z: &Work, x: &Work, upper: bool) -> Array2<Complex64> {
    let n = z.n;
    let mut out = Array2::zeros((n, n));
    let mut col = vec![ZERO; n];
    for k in 0..n {
        col.iter_mut().for_each(|c| *c = ZERO);
        let range = if upper { 0..k + 1 } else { k..n };
        for j in range {
            let xj = x.at(j, k);
            if xj == ZERO {
                continue;
            }
            for (c, zv) in col.iter_mut().zip(z.col(j)) {
                *c += zv * xj;
            }
        }
        let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        for (i, c) in col.iter().enumerate() {
            out[[i, k]] = c * inv;
        }
    }
    out
}

pub(crate) fn sort_order(values: &[Complex64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });
    order
}

fn permute_columns(a: &Array2<Complex64>, order: &[usize]) -> Array2<Complex64> {
    let mut out = Array2::zeros(a.dim());
    for (dst, &src) in order.iter().enumerate() {
        out.column_mut(dst).assign(&a.column(src));
    }
    out
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Residual `‖Av − λv‖₂ / max(1, ‖A‖_F)` of every column of `vectors`.
pub fn residuals<S: Data<Elem = Complex64>>(
    a: &ArrayBase<S, Ix2>,
    eigenvalues: &[Complex64],
    vectors: &Array2<Complex64>,
) -> Vec<f64> {
    let scale = frobenius(a).max(1.0);
    let av = a.dot(vectors);
    eigenvalues
        .iter()
        .enumerate()
        .map(|(k, lambda)| {
            let r: f64 = av
                .column(k)
                .iter()
                .zip(vectors.column(k).iter())
                .map(|(x, vi)| (x - lambda * vi).norm_sqr())
                .sum::<f64>()
                .sqrt();
            r / scale
        })
        .collect()
}

/// Flags pairs whose eigenvectors are nearly parallel.
pub(crate) fn defective_flags(values: &[Complex64], vectors: &Array2<Complex64>, scale: f64) -> Vec<bool> {
    let n = values.len();
    let mut flags = vec![false; n];
    let window = 2e-3 * scale.max(1.0);
    let cols: Vec<Vec<Complex64>> = (0..n).map(|k| vectors.column(k).to_vec()).collect();
    for i in 0..n {
        for j in i + 1..n {
            // Sorted by real part, so the window closes.
            if values[j].re - values[i].re > window {
                break;
            }
            if (values[j] - values[i]).norm() > window {
                continue;
            }
            if inner(&cols[i], &cols[j]).norm() > 1.0 - DEFECTIVE_OVERLAP {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    flags
}

/// Full eigendecomposition with residual certification.
///
/// `tol` defaults to [`default_tolerance`]. If the achieved residual misses
/// the target, the best-effort spectrum is returned inside the error.
pub fn eig<S: Data<Elem = Complex64>>(
    a: &ArrayBase<S, Ix2>,
    want_left: bool,
    tol: Option<f64>,
) -> Result<Spectrum, EigenError> {
    check_input(a)?;
    let n = a.nrows();
    let target = tol.unwrap_or_else(|| default_tolerance(n));
    let mut t = Work::from_array(a);
    let mut z = Work::identity(n);
    hessenberg(&mut t, Some(&mut z));
    let converged = schur(&mut t, Some(&mut z), true);

    let raw_values: Vec<Complex64> = (0..n).map(|i| t.at(i, i)).collect();
    let right = back_transform(&z, &triangular_right_vectors(&t), true);
    let left = want_left.then(|| back_transform(&z, &triangular_left_vectors(&t), false));

    let order = sort_order(&raw_values);
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| raw_values[i]).collect();
    let right_vectors = permute_columns(&right, &order);
    let left_vectors = left.map(|l| permute_columns(&l, &order));
    let residuals = residuals(a, &eigenvalues, &right_vectors);
    let defective = defective_flags(&eigenvalues, &right_vectors, frobenius(a));
    let achieved = residuals.iter().copied().fold(0.0, f64::max);

    let spectrum = Spectrum {
        eigenvalues,
        right_vectors,
        left_vectors,
        residuals,
        defective,
        achieved_tolerance: achieved,
    };
    if !converged || !(achieved <= target) {
        return Err(EigenError::NoConvergence {
            target,
            achieved,
            best: Box::new(spectrum),
        });
    }
    Ok(spectrum)
}

/// Eigenvalues only, in the same deterministic order as [`eig`].
pub fn eigenvalues<S: Data<Elem = Complex64>>(a: &ArrayBase<S, Ix2>) -> Result<Vec<Complex64>, EigenError> {
    check_input(a)?;
    let n = a.nrows();
    let mut t = Work::from_array(a);
    hessenberg(&mut t, None);
    let converged = schur(&mut t, None, false);
    let raw: Vec<Complex64> = (0..n).map(|i| t.at(i, i)).collect();
    let values: Vec<Complex64> = sort_order(&raw).into_iter().map(|i| raw[i]).collect();
    if !converged {
        return Err(EigenError::NoConvergence {
            target: default_tolerance(n),
            achieved: f64::INFINITY,
            best: Box::new(Spectrum {
                eigenvalues: values,
                right_vectors: Array2::zeros((n, n)),
                left_vectors: None,
                residuals: vec![f64::INFINITY; n],
                defective: vec![false; n],
                achieved_tolerance: f64::INFINITY,
            }),
        });
    }
    Ok(values)
}

/// Smallest singular value via one-sided Jacobi rotations.
pub fn min_singular_value<S: Data<Elem = Complex64>>(a: &ArrayBase<S, Ix2>) -> Result<f64, EigenError> {
    check_input(a)?;
    let mut w = Work::from_array(a);
    let n = w.n;
    let tol = ULP * n as f64;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (ci, cj) = (i * n, j * n);
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = ZERO;
                for r in 0..n {
                    let (x, y) = (w.data[ci + r], w.data[cj + r]);
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let x = w.data[ci + r];
                    let y = w.data[cj + r] * phase.conj();
                    w.data[ci + r] = x * c - y * s;
                    w.data[cj + r] = (x * s + y * c) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    Ok((0..n)
        .map(|j| w.col(j).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let a = Array2::from_diag(&ndarray::arr1(&[c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let s = eig(&a, true, None).unwrap();
        assert_eq!(s.eigenvalues, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert!(s.residuals.iter().all(|r| *r == 0.0));
        assert!(s.defective.iter().all(|d| !d));
    }

    #[test]
    fn hermitian_two_by_two() {
        let a = array![[c(0.0, 0.0), c(0.0, 3.0)], [c(0.0, -3.0), c(0.0, 0.0)]];
        let s = eig(&a, false, None).unwrap();
        assert!((s.eigenvalues[0] - c(-3.0, 0.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn jordan_block_is_flagged() {
        let a = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let s = eig(&a, true, None).unwrap();
        assert!(s.eigenvalues.iter().all(|e| e.norm() == 0.0));
        assert!(s.defective.iter().all(|d| *d));
        assert!(s.max_residual() < 1e-14);
        assert_eq!(min_singular_value(&a).unwrap(), 0.0);
    }

    #[test]
    fn one_by_one() {
        let a = array![[c(2.0, -1.0)]];
        let s = eig(&a, true, None).unwrap();
        assert_eq!(s.eigenvalues, vec![c(2.0, -1.0)]);
        assert_eq!(s.right_vectors[[0, 0]], c(1.0, 0.0));
    }

    #[test]
    fn degenerate_normal_matrix_keeps_independent_vectors() {
        let mut a = Array2::zeros((4, 4));
        a[[0, 0]] = c(1.0, 0.0);
        a[[1, 1]] = c(1.0, 0.0);
        a[[2, 2]] = c(1.0, 0.0);
        a[[3, 3]] = c(-2.0, 0.0);
        let s = eig(&a, true, None).unwrap();
        assert!(s.defective.iter().all(|d| !d));
    }

    #[test]
    fn rejects_bad_input() {
        let a: Array2<Complex64> = Array2::zeros((2, 3));
        assert!(matches!(eig(&a, false, None), Err(EigenError::Shape { .. })));
        let a = array![[c(f64::NAN, 0.0)]];
        assert!(matches!(eig(&a, false, None), Err(EigenError::NonFinite)));
        let a: Array2<Complex64> = Array2::zeros((0, 0));
        assert!(eigenvalues(&a).is_err());
    }

    #[test]
    fn identity_singular_value() {
        let a: Array2<Complex64> = Array2::eye(6);
        assert!((min_singular_value(&a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_values_of_known_matrix() {
        // diag(3, 0.5) rotated by unitaries keeps singular values.
        let u = array![[c(0.6, 0.0), c(0.0, 0.8)], [c(0.0, 0.8), c(0.6, 0.0)]];
        let d = array![[c(3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        let a = u.dot(&d);
        assert!((min_singular_value(&a).unwrap() - 0.5).abs() < 1e-14);
    }
}

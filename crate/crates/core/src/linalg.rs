//! Dense linear algebra for small systems (n <= 8): compartment models,
//! stability matrices, and the vesicle-pool steady state. Partial-pivot
//! elimination and a characteristic-polynomial eigensolver are all that is
//! needed at these sizes.

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Pivot magnitude below which elimination reports a singular matrix.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Row-major square matrix, 1 <= n <= 8.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SmallMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} outside 1..=8");
        SmallMatrix { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a flat row-major slice of length n*n.
    pub fn from_row_major(n: usize, data: &[f64]) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} outside 1..=8");
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        SmallMatrix { n, a: data.to_vec() }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.n, other.n);
        SmallMatrix::from_fn(self.n, |i, j| {
            (0..self.n).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }

    /// Max absolute row sum (infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> SmallMatrix {
        SmallMatrix { n: self.n, a: self.a.iter().map(|v| v * s).collect() }
    }
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
///
/// A pivot below `SINGULAR_PIVOT` is reported as singular. After the solve,
/// the residual is checked against `||Ax - b||_inf <= 1e-10 ||b||_inf`;
/// systems too ill-conditioned to meet that bound are rejected rather than
/// silently returning garbage.
pub fn solve_linear(a: &SmallMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::validation(format!(
            "rhs has length {}, matrix is {n}x{n}",
            b.len()
        )));
    }
    let mut m = a.a.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        // pivot: largest magnitude on or below the diagonal
        let mut p = col;
        let mut pmax = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > pmax {
                pmax = v;
                p = r;
            }
        }
        if pmax < SINGULAR_PIVOT {
            return Err(Error::Singular { col, pivot: pmax });
        }
        if p != col {
            for j in 0..n {
                m.swap(col * n + j, p * n + j);
            }
            x.swap(col, p);
        }
        let inv = 1.0 / m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            m[r * n + col] = 0.0;
            for j in col + 1..n {
                m[r * n + j] -= f * m[col * n + j];
            }
            x[r] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }

    let residual = a
        .mul_vec(&x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi).abs())
        .fold(0.0, f64::max);
    let bound = 1e-10 * b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if residual > bound {
        return Err(Error::IllConditioned { residual, bound });
    }
    Ok(x)
}

/// Coefficients of det(lambda I - A) in ascending order, leading term 1,
/// by the Faddeev-LeVerrier recurrence. Exact-zero traces stay exact, so a
/// zero matrix yields the monomial lambda^n with no rounding residue.
fn characteristic_polynomial(a: &SmallMatrix) -> Vec<f64> {
    let n = a.n();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = a.clone();
    c[n - 1] = -m.trace();
    for k in 2..=n {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted.set(i, i, shifted.get(i, i) + c[n - k + 1]);
        }
        m = a.mul_mat(&shifted);
        c[n - k] = -m.trace() / k as f64;
    }
    c
}

fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Durand-Kerner iteration cap.
const DK_MAX_ITER: usize = 10_000;

/// All roots of a monic real polynomial given by ascending coefficients
/// (leading 1 included). Exact zero roots are deflated first; the rest come
/// from a Durand-Kerner sweep started on a spiral of radius 1 + max|c|.
fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut c = coeffs.to_vec();
    let mut roots = Vec::new();
    // each exactly-zero constant term is a root at the origin
    while c.len() > 1 && c[0] == 0.0 {
        roots.push(Complex64::new(0.0, 0.0));
        c.remove(0);
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(roots);
    }
    let radius = 1.0 + c[..deg].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let base = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| base.powu(k as u32 + 1) * radius)
        .collect();

    for _ in 0..DK_MAX_ITER {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // coincident estimates: nudge apart and retry next sweep
                z[i] += Complex64::new(1e-8 * radius, 1e-8 * radius);
                max_step = f64::INFINITY;
                continue;
            }
            let step = poly_eval(&c, z[i]) / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
        }
        if max_step <= 1e-13 {
            roots.extend(z);
            // deterministic order: by real part, then imaginary
            roots.sort_by(|p, q| {
                p.re.partial_cmp(&q.re)
                    .unwrap()
                    .then(p.im.partial_cmp(&q.im).unwrap())
            });
            return Ok(roots);
        }
    }
    Err(Error::NonConvergence { what: "durand-kerner root iteration", iterations: DK_MAX_ITER })
}

/// Eigenvalues of a small matrix via its characteristic polynomial.
///
/// Adequate for the well-scaled n <= 8 matrices that appear here; returned
/// sorted by real part then imaginary part.
pub fn eigenvalues_small(a: &SmallMatrix) -> Result<Vec<Complex64>> {
    polynomial_roots(&characteristic_polynomial(a))
}

/// Companion matrix of a monic polynomial with ascending coefficients
/// (leading 1 included), for cross-checking root finders.
pub fn companion_matrix(coeffs: &[f64]) -> SmallMatrix {
    let deg = coeffs.len() - 1;
    assert!((1..=MAX_DIM).contains(&deg));
    assert_eq!(coeffs[deg], 1.0, "polynomial must be monic");
    let mut m = SmallMatrix::zeros(deg);
    for i in 0..deg {
        m.set(0, i, -coeffs[deg - 1 - i]);
    }
    for i in 1..deg {
        m.set(i, i - 1, 1.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2() {
        let a = SmallMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 3.0]);
        let x = solve_linear(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_identity_is_exact() {
        let a = SmallMatrix::identity(5);
        let b = [1.0, -2.0, 3.5, 0.0, 9.0];
        let x = solve_linear(&a, &b).unwrap();
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = SmallMatrix::from_row_major(2, &[1.0, 2.0, 2.0, 4.0]);
        let e = solve_linear(&a, &[1.0, 2.0]).unwrap_err();
        assert!(matches!(e, Error::Singular { .. }), "{e:?}");
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = SmallMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]);
        let x = solve_linear(&a, &[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![4.0, 3.0]);
    }

    #[test]
    fn characteristic_polynomial_of_companion() {
        // companion of p(x) = x^2 - 1.8 x + 1.2 must reproduce p
        let m = companion_matrix(&[1.2, -1.8, 1.0]);
        let c = characteristic_polynomial(&m);
        assert!((c[0] - 1.2).abs() < 1e-12);
        assert!((c[1] + 1.8).abs() < 1e-12);
        assert_eq!(c[2], 1.0);
    }

    #[test]
    fn eigenvalues_zero_matrix() {
        let eigs = eigenvalues_small(&SmallMatrix::zeros(4)).unwrap();
        assert_eq!(eigs.len(), 4);
        for e in eigs {
            assert_eq!(e, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn eigenvalues_diagonal() {
        let mut a = SmallMatrix::zeros(3);
        a.set(0, 0, -1.0);
        a.set(1, 1, 2.0);
        a.set(2, 2, 0.5);
        let eigs = eigenvalues_small(&a).unwrap();
        let mut re: Vec<f64> = eigs.iter().map(|e| e.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 1.0).abs() < 1e-10);
        assert!((re[1] - 0.5).abs() < 1e-10);
        assert!((re[2] - 2.0).abs() < 1e-10);
        for e in &eigs {
            assert!(e.im.abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_rotation_pair() {
        // [[0, -1], [1, 0]] has eigenvalues +-i
        let a = SmallMatrix::from_row_major(2, &[0.0, -1.0, 1.0, 0.0]);
        let eigs = eigenvalues_small(&a).unwrap();
        assert!((eigs[0].im + 1.0).abs() < 1e-12 || (eigs[0].im - 1.0).abs() < 1e-12);
        assert!((eigs[0].im + eigs[1].im).abs() < 1e-12);
        assert!(eigs[0].re.abs() < 1e-12);
        assert!(eigs[1].re.abs() < 1e-12);
    }
}

//! Small dense complex linear algebra: just enough for the effective
//! Hamiltonians here (dimension at most a few dozen).
//!
//! The eigensolver reduces to upper Hessenberg form with Householder
//! reflections and then runs single-shift complex QR iteration with Wilkinson
//! shifts, producing a Schur form `A = Z T Z^H`. Eigenvectors come from back
//! substitution on `T`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square, row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows are not square.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "CMatrix::from_rows: row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn conj_transpose(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inverse by LU decomposition with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix> {
        let n = self.n;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.frobenius_norm().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= 1e-14 * scale {
                return Err(Error::Defective {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= factor * v;
                }
            }
        }
        let mut inv = CMatrix::zeros(n);
        let mut col = vec![ZERO; n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = if perm[i] == j { ONE } else { ZERO };
            }
            for i in 0..n {
                for k in 0..i {
                    let v = lu[(i, k)] * col[k];
                    col[i] -= v;
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    let v = lu[(i, k)] * col[k];
                    col[i] -= v;
                }
                col[i] /= lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Complex Schur form `A = Z T Z^H`, `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub t: CMatrix,
    pub z: CMatrix,
    pub iterations: usize,
}

const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with real `c`, chosen so that
/// `G [a, b]^T = [r, 0]^T`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, ONE);
    }
    let r = an.hypot(bn);
    (an / r, (a / an) * b.conj() / r)
}

fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.dim();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            ONE
        } else {
            x[0] / x[0].norm()
        };
        let mut v = x;
        v[0] += phase * xnorm;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H <- P H P with P = I - 2 v v^H / (v^H v)
        for j in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)])
                .sum();
            let f = dot * (2.0 / vnorm2);
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * f;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let dot: C64 = v
                    .iter()
                    .enumerate()
                    .map(|(j, vj)| m[(i, k + 1 + j)] * vj)
                    .sum();
                let f = dot * (2.0 / vnorm2);
                for (j, vj) in v.iter().enumerate() {
                    m[(i, k + 1 + j)] -= f * vj.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Eigenvalue of the trailing 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Computes the complex Schur decomposition of `a`.
pub fn schur(a: &CMatrix) -> Result<Schur> {
    let n = a.dim();
    let (mut t, mut z) = hessenberg(a);
    let norm = a.frobenius_norm();
    let mut total_iterations = 0;
    if n <= 1 {
        return Ok(Schur {
            t,
            z,
            iterations: 0,
        });
    }
    let mut hi = n - 1;
    let mut iter_here = 0;
    while hi > 0 {
        // Find the start of the unreduced block ending at `hi`.
        let mut lo = hi;
        while lo > 0 {
            let scale = t[(lo, lo)].norm() + t[(lo - 1, lo - 1)].norm();
            let scale = if scale == 0.0 { norm } else { scale };
            if t[(lo, lo - 1)].norm() <= f64::EPSILON * scale {
                t[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter_here = 0;
            continue;
        }
        iter_here += 1;
        total_iterations += 1;
        if iter_here > MAX_ITERATIONS_PER_EIGENVALUE {
            return Err(Error::NoConvergence {
                iterations: total_iterations,
            });
        }
        let mu = if iter_here % 11 == 10 {
            // exceptional shift to break cycles
            t[(hi, hi)] + C64::new(t[(hi, hi - 1)].norm(), 0.0) * 0.75
        } else {
            wilkinson_shift(
                t[(hi - 1, hi - 1)],
                t[(hi - 1, hi)],
                t[(hi, hi - 1)],
                t[(hi, hi)],
            )
        };
        for i in lo..=hi {
            t[(i, i)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
            for j in k..n {
                let x = t[(k, j)];
                let y = t[(k + 1, j)];
                t[(k, j)] = x * c + s * y;
                t[(k + 1, j)] = -s.conj() * x + y * c;
            }
            t[(k + 1, k)] = ZERO;
            rotations.push((k, c, s));
        }
        for &(k, c, s) in &rotations {
            let rows = (k + 2).min(hi) + 1;
            for i in 0..rows {
                let x = t[(i, k)];
                let y = t[(i, k + 1)];
                t[(i, k)] = x * c + y * s.conj();
                t[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            t[(i, i)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[(i, j)] = ZERO;
        }
    }
    Ok(Schur {
        t,
        z,
        iterations: total_iterations,
    })
}

/// Eigenvalues only, in Schur order. Does not fail on defective matrices.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    Ok(schur(a)?.t.diagonal())
}

/// Right eigenvectors (as columns, unit 2-norm) for the Schur form, in the
/// same order as the diagonal of `T`.
pub fn schur_eigenvectors(s: &Schur) -> CMatrix {
    let n = s.t.dim();
    let t = &s.t;
    let tiny = f64::EPSILON * t.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut x_all = CMatrix::zeros(n);
    let mut x = vec![ZERO; n];
    for k in 0..n {
        let lambda = t[(k, k)];
        x.iter_mut().for_each(|v| *v = ZERO);
        x[k] = ONE;
        for j in (0..k).rev() {
            let rhs: C64 = (j + 1..=k).map(|i| t[(j, i)] * x[i]).sum();
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < tiny {
                denom = C64::new(tiny, 0.0);
            }
            x[j] = -rhs / denom;
        }
        for i in 0..n {
            x_all[(i, k)] = x[i];
        }
    }
    let mut v = s.z.matmul(&x_all);
    for k in 0..n {
        let norm = (0..n).map(|i| v[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                v[(i, k)] /= norm;
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn test_matrix() -> CMatrix {
        CMatrix::from_rows(&[
            vec![c(1.0, 0.5), c(2.0, -1.0), c(0.0, 0.3), c(-1.0, 0.0)],
            vec![c(0.5, 0.0), c(-1.0, 0.0), c(3.0, 1.0), c(0.2, 0.2)],
            vec![c(0.0, 2.0), c(1.0, 0.0), c(0.0, -4.0), c(1.0, 1.0)],
            vec![c(1.5, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.3, 0.0)],
        ])
    }

    #[test]
    fn schur_reconstructs_input() {
        let a = test_matrix();
        let s = schur(&a).unwrap();
        let back = s.z.matmul(&s.t).matmul(&s.z.conj_transpose());
        assert!(back.sub(&a).frobenius_norm() < 1e-12 * a.frobenius_norm());
        let unit = s.z.conj_transpose().matmul(&s.z);
        assert!(unit.sub(&CMatrix::identity(4)).frobenius_norm() < 1e-13);
        for i in 1..4 {
            for j in 0..i {
                assert_eq!(s.t[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn eigenvectors_satisfy_eigen_equation() {
        let a = test_matrix();
        let s = schur(&a).unwrap();
        let v = schur_eigenvectors(&s);
        for k in 0..4 {
            let col = v.column(k);
            let mut av = vec![ZERO; 4];
            a.apply(&col, &mut av);
            let lambda = s.t[(k, k)];
            let resid: f64 = av
                .iter()
                .zip(&col)
                .map(|(x, y)| (x - lambda * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-12, "eigenpair {k} residual {resid}");
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = test_matrix();
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        assert!(id.sub(&CMatrix::identity(4)).frobenius_norm() < 1e-13);
    }

    #[test]
    fn singular_inverse_is_rejected() {
        let a = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]]);
        assert!(a.inverse().is_err());
    }

    #[test]
    fn one_by_one_and_diagonal() {
        let a = CMatrix::from_diagonal(&[c(3.0, -1.0)]);
        assert_eq!(eigenvalues(&a).unwrap(), vec![c(3.0, -1.0)]);
        let d = CMatrix::from_diagonal(&[c(1.0, 0.0), c(-2.0, 0.5), c(0.0, -1.0)]);
        let mut ev = eigenvalues(&d).unwrap();
        ev.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert_eq!(ev, vec![c(-2.0, 0.5), c(0.0, -1.0), c(1.0, 0.0)]);
    }

    #[test]
    fn rotation_like_matrix_converges() {
        // real rotation has eigenvalues on the unit circle; plain QR without
        // complex shifts stalls on it
        let a = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-13);
        assert!((ev[1] - c(1.0, 0.0)).norm() < 1e-13);
        assert!((ev[2] - c(0.0, 1.0)).norm() < 1e-13);
    }
}

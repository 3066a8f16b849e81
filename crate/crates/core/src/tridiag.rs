//! Tridiagonal kernels: LU with partial pivoting (real or complex), implicit
//! QL eigenvalues and inverse-iteration eigenvectors.

use nalgebra::{ComplexField, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("pivot {index} underflowed: shift is numerically on the spectrum")]
    Breakdown { index: usize },
    #[error("dimension mismatch: operator has {expected} rows, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("QL iteration failed to converge for eigenvalue {0}")]
    NoConvergence(usize),
}

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            off.len() + 1 == diag.len() || (diag.is_empty() && off.is_empty()),
            "off-diagonal must have length n - 1"
        );
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = T x` for real or complex `x`.
    pub fn apply<T: ComplexField<RealField = f64> + Copy>(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = x[i].scale(self.diag[i]);
            if i > 0 {
                acc += x[i - 1].scale(self.off[i - 1]);
            }
            if i + 1 < n {
                acc += x[i + 1].scale(self.off[i]);
            }
            y.push(acc);
        }
        y
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

/// LU factorization of a general tridiagonal matrix with partial pivoting,
/// laid out as in LAPACK `?gttrf`: `L` has unit diagonal and multipliers in
/// `dl`, `U` has up to two superdiagonals (`du`, `du2`).
#[derive(Debug, Clone)]
pub struct TridiagLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: ComplexField<RealField = f64> + Copy> TridiagLu<T> {
    /// Factors the matrix with subdiagonal `dl`, diagonal `d`, superdiagonal `du`.
    /// Pivots with modulus below `tiny` are either reported as breakdown or,
    /// when `perturb` is set, replaced by `tiny` (inverse iteration).
    pub fn factor(
        mut dl: Vec<T>,
        mut d: Vec<T>,
        mut du: Vec<T>,
        tiny: f64,
        perturb: bool,
    ) -> Result<Self, SolveError> {
        let n = d.len();
        assert!(n >= 1 && dl.len() + 1 == n && du.len() + 1 == n);
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm1() >= dl[i].norm1() {
                if d[i].norm1() > 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        for (i, di) in d.iter_mut().enumerate() {
            if di.modulus() <= tiny {
                if perturb {
                    *di = T::from_real(tiny.max(f64::MIN_POSITIVE));
                } else {
                    return Err(SolveError::Breakdown { index: i });
                }
            }
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let bi = b[i];
                b[i + 1] -= self.dl[i] * bi;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson shifts, ascending.
pub fn eigenvalues(t: &SymTridiag) -> Result<Vec<f64>, SolveError> {
    let mut d = t.diag.clone();
    let mut e = t.off.clone();
    e.push(0.0);
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues and eigenvectors by implicit QL with accumulated rotations.
/// `O(n^3)`; used for small systems and as a reference.
pub fn eigen_ql(t: &SymTridiag) -> Result<(Vec<f64>, DMatrix<f64>), SolveError> {
    let n = t.len();
    let mut d = t.diag.clone();
    let mut e = t.off.clone();
    e.push(0.0);
    let mut z = DMatrix::<f64>::identity(n, n);
    ql_implicit(&mut d, &mut e, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| z[(i, order[j])]);
    Ok((values, vectors))
}

fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut DMatrix<f64>>) -> Result<(), SolveError> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(SolveError::NoConvergence(l));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let rows = z.nrows();
                    for k in 0..rows {
                        let f = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * f;
                        z[(k, i)] = c * z[(k, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvectors for the given (ascending, accurate) eigenvalues by inverse
/// iteration. Each vector is reorthogonalized against previously computed
/// vectors whose eigenvalue lies within `1e-3 * ||T||`.
pub fn inverse_iteration(t: &SymTridiag, values: &[f64], seed: u64) -> DMatrix<f64> {
    let n = t.len();
    let norm = t.norm_inf().max(f64::MIN_POSITIVE);
    let window = 1e-3 * norm;
    let tiny = f64::EPSILON * norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut prev = f64::NEG_INFINITY;
    for j in 0..n {
        // separate (numerically) repeated eigenvalues
        let mut lambda = values[j];
        if j > 0 && lambda - prev < 10.0 * tiny {
            lambda = prev + 10.0 * tiny;
        }
        prev = lambda;
        let dl = t.off.clone();
        let du = t.off.clone();
        let dd: Vec<f64> = t.diag.iter().map(|&x| x - lambda).collect();
        let lu = if n == 1 {
            None
        } else {
            Some(TridiagLu::factor(dl, dd, du, tiny, true).expect("perturbed LU cannot fail"))
        };
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let first = (0..j).find(|&k| values[j] - values[k] <= window).unwrap_or(j);
        for _ in 0..3 {
            if let Some(lu) = &lu {
                lu.solve_in_place(&mut x);
            }
            for _pass in 0..2 {
                for k in first..j {
                    let col = q.column(k);
                    let dot: f64 = col.iter().zip(&x).map(|(a, b)| a * b).sum();
                    for (xi, ci) in x.iter_mut().zip(col.iter()) {
                        *xi -= dot * ci;
                    }
                }
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        // sign convention: largest component positive
        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let sign = if x[imax] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in x.iter().enumerate() {
            q[(i, j)] = sign * v;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn laplace(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn lu_solves_small_complex_system() {
        let t = laplace(5);
        let z = Complex64::new(0.3, 0.7);
        let dl: Vec<Complex64> = t.off.iter().map(|&v| v.into()).collect();
        let d: Vec<Complex64> = t.diag.iter().map(|&v| Complex64::from(v) - z).collect();
        let lu = TridiagLu::factor(dl.clone(), d, dl, 0.0, false).unwrap();
        let f: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut u = f.clone();
        lu.solve_in_place(&mut u);
        let tu = t.apply(&u);
        for i in 0..5 {
            assert!((tu[i] - z * u[i] - f[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn lu_pivots_on_small_diagonal() {
        // zero leading diagonal forces a row interchange
        let dl = vec![1.0, 1.0, 1.0];
        let d = vec![0.0, 0.0, 0.0, 1.0];
        let du = vec![1.0, 1.0, 1.0];
        let lu = TridiagLu::factor(dl, d, du, 0.0, false).unwrap();
        let mut b = vec![1.0, 2.0, 3.0, 4.0];
        lu.solve_in_place(&mut b);
        // A x = (x1, x0 + x2, x1 + x3, x2 + x3)
        let x = &b;
        let ax = [x[1], x[0] + x[2], x[1] + x[3], x[2] + x[3]];
        for (a, e) in ax.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_reports_breakdown() {
        let err = TridiagLu::factor(vec![], vec![0.0], vec![], 0.0, false).unwrap_err();
        assert_eq!(err, SolveError::Breakdown { index: 0 });
    }

    #[test]
    fn ql_matches_analytic_laplacian() {
        let n = 20;
        let vals = eigenvalues(&laplace(n)).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64);
            let exact = 4.0 * theta.sin().powi(2);
            assert!((v - exact).abs() < 1e-13, "{k}: {v} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_agrees_with_ql_vectors() {
        let n = 40;
        let t = SymTridiag::new(
            (0..n).map(|i| 2.0 + 0.1 * (i as f64).sin()).collect(),
            (0..n - 1).map(|i| -1.0 + 0.05 * (i as f64).cos()).collect(),
        );
        let (vals, qql) = eigen_ql(&t).unwrap();
        let qi = inverse_iteration(&t, &vals, 3);
        for j in 0..n {
            let dot: f64 = qql.column(j).dot(&qi.column(j));
            assert!((dot.abs() - 1.0).abs() < 1e-10, "column {j}: {dot}");
        }
    }
}

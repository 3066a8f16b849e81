//! Radial sector operators `T_l(h) = -h^2 d^2/dr^2 + h^2 nu_l / r^2 + V`
//! on a uniform Dirichlet grid, shifted complex solves and eigendecomposition.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::model::{PotentialSpec, RadialGrid};
use crate::tridiag::{self, SolveError, SymTridiag, TridiagLu};

/// Below this size the eigenvectors come from accumulated QL rotations.
const DENSE_EIGEN_LIMIT: usize = 300;
const EIGEN_SEED: u64 = 0x5eed_7a11;

/// Centrifugal coefficient of the `l`-th spherical harmonic sector in `R^n`.
pub fn nu_l(n: usize, l: usize) -> f64 {
    let (n, l) = (n as f64, l as f64);
    l * (l + n - 2.0) + (n - 1.0) * (n - 3.0) / 4.0
}

#[derive(Debug, Clone)]
pub struct SectorOperator {
    grid: RadialGrid,
    h: f64,
    l: usize,
    nu: f64,
    matrix: SymTridiag,
}

impl SectorOperator {
    pub fn build(grid: &RadialGrid, p: &PotentialSpec, h: f64, l: usize) -> Self {
        assert!(h > 0.0, "h must be positive");
        let nu = nu_l(grid.dimension(), l);
        let h2 = h * h;
        let dr = grid.dr();
        let kinetic = h2 / (dr * dr);
        let diag = (0..grid.len())
            .map(|j| {
                let r = grid.r(j);
                2.0 * kinetic + h2 * nu / (r * r) + p.value(r)
            })
            .collect();
        let off = vec![-kinetic; grid.len() - 1];
        Self {
            grid: grid.clone(),
            h,
            l,
            nu,
            matrix: SymTridiag::new(diag, off),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    pub fn diag(&self) -> &[f64] {
        &self.matrix.diag
    }

    /// The (constant) off-diagonal entry `-h^2/dr^2`.
    pub fn off(&self) -> f64 {
        self.matrix.off.first().copied().unwrap_or(0.0)
    }
}

impl AsRef<SymTridiag> for SectorOperator {
    fn as_ref(&self) -> &SymTridiag {
        &self.matrix
    }
}

pub fn build_sector(grid: &RadialGrid, p: &PotentialSpec, h: f64, l: usize) -> SectorOperator {
    SectorOperator::build(grid, p, h, l)
}

/// Pivoted LU of `T - z`, reusable for many right-hand sides and for the
/// adjoint `(T - conj z)^{-1}`.
#[derive(Debug, Clone)]
pub struct ShiftedFactor {
    lu: TridiagLu<Complex64>,
    z: Complex64,
    norm: f64,
}

impl ShiftedFactor {
    pub fn new(t: &SymTridiag, z: Complex64) -> Result<Self, SolveError> {
        let n = t.len();
        if n == 0 {
            return Err(SolveError::DimensionMismatch { expected: 1, got: 0 });
        }
        let off: Vec<Complex64> = t.off.iter().map(|&v| Complex64::from(v)).collect();
        let d: Vec<Complex64> = t.diag.iter().map(|&v| Complex64::from(v) - z).collect();
        let norm = (0..n)
            .map(|i| {
                let mut s = (t.diag[i] - z).norm();
                if i > 0 {
                    s += t.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += t.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max);
        let tiny = f64::MIN_POSITIVE / f64::EPSILON * norm.max(1.0);
        let lu = TridiagLu::factor(off.clone(), d, off, tiny, false)?;
        Ok(Self { lu, z, norm })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    /// `||T - z||_inf`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn solve_in_place(&self, f: &mut [Complex64]) -> Result<(), SolveError> {
        if f.len() != self.lu.len() {
            return Err(SolveError::DimensionMismatch {
                expected: self.lu.len(),
                got: f.len(),
            });
        }
        self.lu.solve_in_place(f);
        Ok(())
    }

    pub fn solve(&self, f: &[Complex64]) -> Result<Vec<Complex64>, SolveError> {
        let mut u = f.to_vec();
        self.solve_in_place(&mut u)?;
        Ok(u)
    }

    /// `(T - conj z)^{-1} g`, computed as `conj((T - z)^{-1} conj g)` since `T` is real.
    pub fn solve_adjoint_in_place(&self, g: &mut [Complex64]) -> Result<(), SolveError> {
        g.iter_mut().for_each(|v| *v = v.conj());
        self.solve_in_place(g)?;
        g.iter_mut().for_each(|v| *v = v.conj());
        Ok(())
    }

    pub fn solve_adjoint(&self, g: &[Complex64]) -> Result<Vec<Complex64>, SolveError> {
        let mut u = g.to_vec();
        self.solve_adjoint_in_place(&mut u)?;
        Ok(u)
    }
}

/// Relative residual `||(T - z)u - f|| / (||T - z|| ||u|| + ||f||)` (max norms).
pub fn relative_residual(t: &SymTridiag, z: Complex64, u: &[Complex64], f: &[Complex64]) -> f64 {
    let tu = t.apply(u);
    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, f64::max);
    let res = max(&mut tu.iter().zip(u).zip(f).map(|((a, b), c)| (a - z * b - c).norm()));
    let n = t.len();
    let norm = (0..n)
        .map(|i| {
            (t.diag[i] - z).norm()
                + if i > 0 { t.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { t.off[i].abs() } else { 0.0 }
        })
        .fold(0.0, f64::max);
    let den = norm * max(&mut u.iter().map(|v| v.norm())) + max(&mut f.iter().map(|v| v.norm()));
    if den == 0.0 {
        0.0
    } else {
        res / den
    }
}

pub fn solve_shifted(t: &SymTridiag, z: Complex64, f: &[Complex64]) -> Result<Vec<Complex64>, SolveError> {
    ShiftedFactor::new(t, z)?.solve(f)
}

pub fn adjoint_solve(t: &SymTridiag, z: Complex64, g: &[Complex64]) -> Result<Vec<Complex64>, SolveError> {
    ShiftedFactor::new(t, z)?.solve_adjoint(g)
}

/// Ascending eigenvalues and orthonormal eigenvectors (columns of `vectors`).
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max |Q^T Q - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.vectors.tr_mul(&self.vectors);
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `max |Q diag(lambda) Q^T - T| / ||T||_inf`.
    pub fn reconstruction_defect(&self, t: &SymTridiag) -> f64 {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        let rec = scaled * q.transpose();
        (rec - t.to_dense()).abs().max() / t.norm_inf().max(f64::MIN_POSITIVE)
    }
}

pub fn eigendecompose(t: &SymTridiag) -> Result<SpectralData, SolveError> {
    if t.len() <= DENSE_EIGEN_LIMIT {
        let (eigenvalues, vectors) = tridiag::eigen_ql(t)?;
        return Ok(SpectralData { eigenvalues, vectors });
    }
    let eigenvalues = tridiag::eigenvalues(t)?;
    let vectors = tridiag::inverse_iteration(t, &eigenvalues, EIGEN_SEED);
    Ok(SpectralData { eigenvalues, vectors })
}

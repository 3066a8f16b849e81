//! Discrete checks of the spherical energy method on a single sector: the
//! functional `F`, the identity for `(wF)'`, its lower bound for repulsive
//! potentials, and the Hardy inequality.

use num_complex::Complex64;

use crate::model::{PotentialSpec, RadialGrid, RepulsiveWeight};
use crate::quad::panels;
use crate::sector::{SectorOperator, ShiftedFactor};
use crate::tridiag::SolveError;

/// Complex grid function with zero padding `u_0 = u_{N+1} = 0` and centered
/// first and second difference tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorFunction {
    grid: RadialGrid,
    values: Vec<Complex64>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
}

impl SectorFunction {
    pub fn new(grid: &RadialGrid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len());
        let n = values.len();
        let dr = grid.dr();
        let zero = Complex64::new(0.0, 0.0);
        let at = |i: isize| -> Complex64 {
            if i < 0 || i as usize >= n {
                zero
            } else {
                values[i as usize]
            }
        };
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n as isize {
            d1.push((at(i + 1) - at(i - 1)) / (2.0 * dr));
            d2.push((at(i + 1) - at(i) * 2.0 + at(i - 1)) / (dr * dr));
        }
        Self {
            grid: *grid,
            values,
            d1,
            d2,
        }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.r(i))).collect())
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivative(&self) -> &[Complex64] {
        &self.d1
    }

    pub fn second_derivative(&self) -> &[Complex64] {
        &self.d2
    }
}

/// Sector data entering `F`: `h`, the centrifugal coefficient and `V`.
#[derive(Debug, Clone)]
pub struct SectorParams {
    pub h: f64,
    pub nu: f64,
    pub potential: PotentialSpec,
}

/// `F(r) = |h u'|^2 - (h^2 nu / r^2 + V - E)|u|^2` at every grid point.
pub fn energy_f(u: &SectorFunction, params: &SectorParams, e: f64) -> Vec<f64> {
    let h2 = params.h * params.h;
    (0..u.values.len())
        .map(|i| {
            let r = u.grid.r(i);
            let pot = h2 * params.nu / (r * r) + params.potential.value(r) - e;
            h2 * u.d1[i].norm_sqr() - pot * u.values[i].norm_sqr()
        })
        .collect()
}

/// Centered difference of `w F`, defined for `2 <= i < N - 2`.
fn centered_wf_derivative(wf: &[f64], dr: f64, i: usize) -> f64 {
    (wf[i + 1] - wf[i - 1]) / (2.0 * dr)
}

fn interior(u: &SectorFunction) -> std::ops::Range<usize> {
    2..u.values.len().saturating_sub(2)
}

/// Max over the window of `|(wF)' - RHS|`, where the right side is the
/// expanded form
/// `-2w Re((P - E)u ū') + w'|hu'|^2 + (2w/r - w') h^2 nu |u|^2 / r^2 + E w'|u|^2 - (w V' + w' V)|u|^2`
/// with `(P - E)u` formed from the second difference table. `weight = None`
/// means `w ≡ 1`.
pub fn check_wf_identity(
    u: &SectorFunction,
    params: &SectorParams,
    weight: Option<&RepulsiveWeight>,
    e: f64,
    window: (f64, f64),
) -> f64 {
    let grid = &u.grid;
    let h2 = params.h * params.h;
    let f = energy_f(u, params, e);
    let w = |r: f64| weight.map_or(1.0, |w| w.value(r));
    let wp = |r: f64| weight.map_or(0.0, |w| w.derivative(r));
    let wf: Vec<f64> = f.iter().enumerate().map(|(i, v)| w(grid.r(i)) * v).collect();
    let mut worst: f64 = 0.0;
    for i in interior(u) {
        let r = grid.r(i);
        if r < window.0 || r > window.1 {
            continue;
        }
        let lhs = centered_wf_derivative(&wf, grid.dr(), i);
        let (ui, du) = (u.values[i], u.d1[i]);
        let v = params.potential.value(r);
        let cent = h2 * params.nu / (r * r);
        let pu = -u.d2[i] * h2 + ui * (cent + v - e);
        let rhs = -2.0 * w(r) * (pu * du.conj()).re
            + wp(r) * h2 * du.norm_sqr()
            + (2.0 * w(r) / r - wp(r)) * cent * ui.norm_sqr()
            + e * wp(r) * ui.norm_sqr()
            - (w(r) * params.potential.density(r) + wp(r) * v) * ui.norm_sqr();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Sign of the absorption: `Plus` solves `(T - E + iε) u = g`, `Minus` solves `(T - E - iε) u = g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorption {
    Plus,
    Minus,
}

impl Absorption {
    fn sign(self) -> f64 {
        match self {
            Absorption::Plus => 1.0,
            Absorption::Minus => -1.0,
        }
    }

    /// Shift `z` with `T - z = T - E ± iε`.
    pub fn shift(self, e: f64, eps: f64) -> Complex64 {
        Complex64::new(e, -self.sign() * eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    /// `(wF)' - RHS` on the interior points; `NaN` where the stencil is undefined.
    pub margin: Vec<f64>,
    pub tolerance: f64,
    pub scale: f64,
    pub min_margin: f64,
    /// Radii where the margin falls below `-tolerance`.
    pub violations: Vec<f64>,
    /// `(r_J, -w(r_J) ΔV |u(r_J)|^2)` for each atom of `dV` inside the grid.
    pub atom_terms: Vec<(f64, f64)>,
}

impl LowerBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.atom_terms.iter().all(|&(_, v)| v >= 0.0)
    }
}

/// Pointwise margin of the lower bound
/// `(wF)' >= -2w Re(g ū') ∓ 2εw Im(u ū') + w'|hu'|^2 + E w'|u|^2`
/// for `u` solving `(T - E ± iε) u = g`; tolerance `10 dr^2 max|RHS|`.
pub fn check_wf_lowerbound(
    u: &SectorFunction,
    g: &[Complex64],
    params: &SectorParams,
    weight: &RepulsiveWeight,
    e: f64,
    eps: f64,
    sign: Absorption,
) -> LowerBoundReport {
    let grid = &u.grid;
    let dr = grid.dr();
    let h2 = params.h * params.h;
    let f = energy_f(u, params, e);
    let wf: Vec<f64> = f.iter().enumerate().map(|(i, v)| weight.value(grid.r(i)) * v).collect();
    let n = u.values.len();
    let mut margin = vec![f64::NAN; n];
    let mut rhs_all = vec![0.0; n];
    let mut scale: f64 = 0.0;
    for i in interior(u) {
        let r = grid.r(i);
        let (w, wp) = (weight.value(r), weight.derivative(r));
        let (ui, du) = (u.values[i], u.d1[i]);
        let rhs = -2.0 * w * (g[i] * du.conj()).re - sign.sign() * 2.0 * eps * w * (ui * du.conj()).im
            + wp * h2 * du.norm_sqr()
            + e * wp * ui.norm_sqr();
        rhs_all[i] = rhs;
        scale = scale.max(rhs.abs());
        margin[i] = centered_wf_derivative(&wf, dr, i) - rhs;
    }
    let tolerance = 10.0 * dr * dr * scale;
    let mut min_margin = f64::INFINITY;
    let mut violations = Vec::new();
    for i in interior(u) {
        min_margin = min_margin.min(margin[i]);
        if margin[i] < -tolerance {
            violations.push(grid.r(i));
        }
    }
    let atom_terms = params
        .potential
        .atoms_in(0.0, grid.radius())
        .map(|a| {
            // nearest grid value of |u|^2 at the jump
            let idx = ((a.location / dr).round() as usize).clamp(1, n) - 1;
            (a.location, -weight.value(a.location) * a.size * u.values[idx].norm_sqr())
        })
        .collect();
    LowerBoundReport {
        margin,
        tolerance,
        scale,
        min_margin,
        violations,
        atom_terms,
    }
}

/// Solves `(T - E ± iε) u = g` on the sector and wraps the result.
pub fn solve_sector(
    t: &SectorOperator,
    g: &[Complex64],
    e: f64,
    eps: f64,
    sign: Absorption,
) -> Result<SectorFunction, SolveError> {
    let factor = ShiftedFactor::new(t.matrix(), sign.shift(e, eps))?;
    Ok(SectorFunction::new(t.grid(), factor.solve(g)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyPair {
    /// `||u / r||^2` over `R^n`.
    pub lhs: f64,
    /// `||∇u||^2` over `R^n`.
    pub gradient: f64,
    /// `(2/(n-2))^2`.
    pub constant: f64,
    pub rhs: f64,
}

/// Both sides of `||u/r||^2 <= (2/(n-2))^2 ||∇u||^2` for a radial profile on
/// `[0, r_max]`, with the `r^{n-1}` measure and the sphere area.
pub fn hardy_check(u: impl Fn(f64) -> f64, du: impl Fn(f64) -> f64, n: usize, r_max: f64) -> HardyPair {
    assert!(n >= 3, "Hardy inequality needs n >= 3");
    let m = n as f64;
    let area = sphere_area(n);
    let panels_n = 400;
    let lhs = area * panels(0.0, r_max, panels_n, |r| u(r).powi(2) * r.powf(m - 3.0));
    let gradient = area * panels(0.0, r_max, panels_n, |r| du(r).powi(2) * r.powf(m - 1.0));
    let constant = (2.0 / (m - 2.0)).powi(2);
    HardyPair {
        lhs,
        gradient,
        constant,
        rhs: constant * gradient,
    }
}

/// Area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / libm::tgamma(half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_grid;
    use std::f64::consts::PI;

    fn free(nu: f64) -> SectorParams {
        SectorParams {
            h: 1.0,
            nu,
            potential: PotentialSpec::zero(),
        }
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_function() {
        let grid = make_grid(3, 5.0, 100).unwrap();
        let u = SectorFunction::from_fn(&grid, |_| c(0.0));
        assert!(energy_f(&u, &free(2.0), 1.0).iter().all(|&v| v == 0.0));
        let w = RepulsiveWeight::new(1.0, 0.5).unwrap();
        assert_eq!(check_wf_identity(&u, &free(2.0), Some(&w), 1.0, (0.0, 5.0)), 0.0);
        let g = vec![c(0.0); 100];
        let rep = check_wf_lowerbound(&u, &g, &free(0.0), &w, 1.0, 0.1, Absorption::Plus);
        assert!(rep.margin.iter().filter(|v| !v.is_nan()).all(|&v| v == 0.0));
    }

    #[test]
    fn sine_energy_is_cos_squared() {
        let n = 400;
        let grid = make_grid(3, PI, n).unwrap();
        let u = SectorFunction::from_fn(&grid, |r| c(r.sin()));
        let f = energy_f(&u, &free(0.0), 0.0);
        for i in 0..n - 1 {
            let r = grid.r(i);
            assert!((f[i] - r.cos().powi(2)).abs() < 2.0 * grid.dr().powi(2), "{i}");
        }
    }

    #[test]
    fn energy_shift_is_linear() {
        let grid = make_grid(3, 4.0, 80).unwrap();
        let u = SectorFunction::from_fn(&grid, |r| Complex64::new(r.sin(), 0.3 * r.cos()));
        let p = SectorParams {
            h: 0.7,
            nu: 2.0,
            potential: PotentialSpec::yukawa(1.0),
        };
        let a = energy_f(&u, &p, 0.5);
        let b = energy_f(&u, &p, 2.0);
        for i in 0..80 {
            assert!((b[i] - a[i] - 1.5 * u.values()[i].norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_weight_identity_converges() {
        let defect = |n: usize| {
            let grid = make_grid(3, PI, n).unwrap();
            let u = SectorFunction::from_fn(&grid, |r| c(r.sin()));
            let p = SectorParams {
                h: 1.0,
                nu: 2.0,
                potential: PotentialSpec::yukawa(1.0),
            };
            check_wf_identity(&u, &p, None, 1.0, (0.5, PI - 0.5))
        };
        let (a, b) = (defect(200), defect(400));
        assert!((a / b).log2() > 1.8, "{a} {b}");
    }

    #[test]
    fn free_margin_is_centrifugal_term() {
        let grid = make_grid(3, 30.0, 3000).unwrap();
        let p = PotentialSpec::zero();
        let t = SectorOperator::build(&grid, &p, 1.0, 1);
        let g: Vec<Complex64> = (0..3000)
            .map(|i| {
                let r = grid.r(i);
                c(if (1.0..3.0).contains(&r) { ((r - 2.0) * PI).cos() + 1.0 } else { 0.0 })
            })
            .collect();
        let u = solve_sector(&t, &g, 1.0, 0.1, Absorption::Plus).unwrap();
        let w = RepulsiveWeight::new(1.0, 0.5).unwrap();
        let params = SectorParams {
            h: 1.0,
            nu: t.nu(),
            potential: p,
        };
        let rep = check_wf_lowerbound(&u, &g, &params, &w, 1.0, 0.1, Absorption::Plus);
        assert!(rep.passed());
        for i in 2..2998 {
            let r = grid.r(i);
            let expect = (2.0 * w.value(r) / r - w.derivative(r)) * t.nu() * u.values()[i].norm_sqr() / (r * r);
            assert!((rep.margin[i] - expect).abs() <= rep.tolerance, "r = {r}");
        }
    }

    #[test]
    fn hardy_examples() {
        let u = |r: f64| (-r * r).exp();
        let du = |r: f64| -2.0 * r * (-r * r).exp();
        let p3 = hardy_check(u, du, 3, 12.0);
        assert!(p3.lhs < 4.0 * p3.gradient);
        assert!(p3.lhs <= p3.rhs * (1.0 + 1e-3));
        // closed forms: 4π ∫ e^{-2r^2} dr and 4π ∫ 4 r^4 e^{-2r^2} dr
        assert!((p3.lhs - 4.0 * PI * (PI / 8.0).sqrt()).abs() < 1e-10);
        let p4 = hardy_check(u, du, 4, 12.0);
        assert_eq!(p4.constant, 1.0);
        assert!(p4.lhs <= p4.rhs);
        let z = hardy_check(|_| 0.0, |_| 0.0, 3, 1.0);
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }
}

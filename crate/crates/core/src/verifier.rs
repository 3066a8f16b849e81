//! Weighted resolvent norms `||W1 (P(h) - z)^{-1} W2||` as a supremum over
//! spherical-harmonic sectors, explicit-constant bound checks, and the
//! sharpness experiments for the free operator in three dimensions.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{check_repulsive, ModelError, PotentialSpec, RadialGrid, WeightForm, WeightSpec};
use crate::quad::{log_panels_width, panels};
use crate::sector::{relative_residual, SectorOperator, ShiftedFactor};
use crate::tridiag::{self, SolveError, SymTridiag};

pub const DEFAULT_SLACK: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 20_240_917;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 500;
/// Relative Aitken-extrapolated defect of the Rayleigh quotient accepted as converged.
const AITKEN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("weights must be positive and at most 1")]
    BadWeights,
    #[error("z = {0} lies on [0, ∞)")]
    ZOnPositiveAxis(Complex64),
    #[error("semiclassical bound needs s1 = s2 = s in (1/2, 1) (got s1 = {0}, s2 = {1})")]
    ExponentOutOfRange(f64, f64),
    #[error("low-frequency bound needs s1, s2 > 1/2 and s1 + s2 > 2 (got s1 = {0}, s2 = {1})")]
    LowFreqExponents(f64, f64),
    #[error("potential fails the repulsivity check with C_V = {c_v} on ({left}, {right}]")]
    NotRepulsive { c_v: f64, left: f64, right: f64 },
    #[error("z = {z} is outside the sector |Im z| < {alpha} Re z")]
    OutsideSector { z: Complex64, alpha: f64 },
    #[error("invalid sharpness parameters: {0}")]
    Sharpness(String),
}

/// Largest singular value of `x -> w1 ⊙ (T - z)^{-1}(w2 ⊙ x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorNorm {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual of the first shifted solve.
    pub residual: f64,
}

/// Power iteration on `A* A`, `A* = diag(w2) (T - conj z)^{-1} diag(w1)`, with a
/// Lanczos rescue when the iteration stalls.
pub fn weighted_sector_norm(
    t: &SymTridiag,
    z: Complex64,
    w1: &[f64],
    w2: &[f64],
    seed: u64,
) -> Result<SectorNorm, VerifyError> {
    let n = t.len();
    if w1.len() != n || w2.len() != n {
        return Err(SolveError::DimensionMismatch {
            expected: n,
            got: w1.len().min(w2.len()),
        }
        .into());
    }
    if w1.iter().chain(w2).any(|&w| !(w > 0.0 && w <= 1.0)) {
        return Err(VerifyError::BadWeights);
    }
    let factor = ShiftedFactor::new(t, z)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    normalize(&mut x);
    let mut work = vec![Complex64::new(0.0, 0.0); n];
    let mut history = [f64::NAN; 3];
    let mut rho = 0.0;
    let mut residual = 0.0;
    for it in 1..=POWER_MAX_ITER {
        for i in 0..n {
            work[i] = x[i] * w2[i];
        }
        if it == 1 {
            let rhs = work.clone();
            factor.solve_in_place(&mut work)?;
            residual = relative_residual(t, z, &work, &rhs);
        } else {
            factor.solve_in_place(&mut work)?;
        }
        for i in 0..n {
            work[i] *= w1[i] * w1[i];
        }
        factor.solve_adjoint_in_place(&mut work)?;
        for i in 0..n {
            work[i] *= w2[i];
        }
        rho = x.iter().zip(&work).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let defect = x
            .iter()
            .zip(&work)
            .map(|(a, b)| (b - a * rho).norm_sqr())
            .sum::<f64>()
            .sqrt();
        history = [history[1], history[2], rho];
        let done = defect <= POWER_TOL * rho || aitken_settled(&history);
        std::mem::swap(&mut x, &mut work);
        normalize(&mut x);
        if done {
            return Ok(SectorNorm {
                value: rho.sqrt(),
                iterations: it,
                converged: true,
                residual,
            });
        }
    }
    // clustered top singular values: restarted Lanczos from the current iterate
    let apply = |v: &[Complex64]| -> Result<Vec<Complex64>, SolveError> {
        let mut out: Vec<Complex64> = v.iter().zip(w2).map(|(a, w)| a * w).collect();
        factor.solve_in_place(&mut out)?;
        out.iter_mut().zip(w1).for_each(|(a, w)| *a *= w * w);
        factor.solve_adjoint_in_place(&mut out)?;
        out.iter_mut().zip(w2).for_each(|(a, w)| *a *= w);
        Ok(out)
    };
    let (theta, steps, converged) = lanczos_top(apply, x)?;
    Ok(SectorNorm {
        value: theta.max(rho).max(0.0).sqrt(),
        iterations: POWER_MAX_ITER + steps,
        converged,
        residual,
    })
}

const LANCZOS_DIM: usize = 40;
const LANCZOS_RESTARTS: usize = 50;

/// Largest eigenvalue of a Hermitian positive operator by explicitly restarted
/// Lanczos with full reorthogonalization. Returns `(theta, products, converged)`.
fn lanczos_top(
    apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>, SolveError>,
    mut x: Vec<Complex64>,
) -> Result<(f64, usize, bool), SolveError> {
    let n = x.len();
    let m = n.min(LANCZOS_DIM);
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| p.conj() * q).sum::<Complex64>();
    let mut steps = 0;
    let mut theta = 0.0;
    normalize(&mut x);
    for _ in 0..LANCZOS_RESTARTS {
        let mut basis = vec![x.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        loop {
            let j = basis.len() - 1;
            let mut w = apply(&basis[j])?;
            steps += 1;
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let b = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            beta.push(b);
            let scale = alpha.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
            if basis.len() == m || b <= 1e-14 * scale {
                break;
            }
            w.iter_mut().for_each(|v| *v /= b);
            basis.push(w);
        }
        let k = alpha.len();
        let (values, vectors) = tridiag::eigen_ql(&SymTridiag::new(alpha, beta[..k - 1].to_vec()))?;
        theta = values[k - 1];
        let y = vectors.column(k - 1);
        let ritz_residual = beta[k - 1] * y[k - 1].abs();
        x = vec![Complex64::new(0.0, 0.0); n];
        for (coef, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(a, b)| *a += b * *coef);
        }
        normalize(&mut x);
        if ritz_residual <= POWER_TOL * theta || k < m {
            return Ok((theta, steps, true));
        }
    }
    Ok((theta, steps, false))
}

fn aitken_settled(h: &[f64; 3]) -> bool {
    if h.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let (d1, d2) = (h[1] - h[0], h[2] - h[1]);
    if d2 == 0.0 {
        return true;
    }
    if d1 == d2 {
        return false;
    }
    let ratio = d2 / d1;
    // geometric approach from below with a contraction factor
    if !(0.0..1.0).contains(&ratio) {
        return false;
    }
    let limit = h[2] + d2 * ratio / (1.0 - ratio);
    (limit - h[2]).abs() <= AITKEN_TOL * h[2].abs()
}

fn normalize(x: &mut [Complex64]) {
    let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

#[derive(Debug, Clone)]
pub struct ResolventQuery {
    pub potential: PotentialSpec,
    pub h: f64,
    pub z: Complex64,
    pub s1: f64,
    pub s2: f64,
    pub form: WeightForm,
    pub grid: RadialGrid,
    pub l_max: usize,
    pub seed: u64,
}

impl ResolventQuery {
    pub fn new(potential: PotentialSpec, grid: RadialGrid, h: f64, z: Complex64, s1: f64, s2: f64) -> Self {
        Self {
            potential,
            h,
            z,
            s1,
            s2,
            form: WeightForm::OnePlusR,
            grid,
            l_max: 400,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_grid(&self, grid: RadialGrid) -> Self {
        Self { grid, ..self.clone() }
    }

    pub fn swapped(&self) -> Self {
        Self {
            s1: self.s2,
            s2: self.s1,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.z.im == 0.0 && self.z.re >= 0.0 {
            return Err(VerifyError::ZOnPositiveAxis(self.z));
        }
        WeightSpec::new(self.s1, self.form)?;
        WeightSpec::new(self.s2, self.form)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullNorm {
    pub norm: f64,
    pub l_used: usize,
    pub per_l: Vec<f64>,
    /// Sectors examined up to the hint without the decrease rule firing.
    pub cutoff_hit: bool,
    pub all_converged: bool,
    pub max_residual: f64,
}

/// Supremum over sectors `l = 0, 1, ...`; stops once the sector value has
/// decreased three times in a row and is below 10% of the running maximum.
pub fn full_norm(q: &ResolventQuery) -> Result<FullNorm, VerifyError> {
    q.validate()?;
    let w1 = WeightSpec::new(q.s1, q.form)?.sample(&q.grid);
    let w2 = WeightSpec::new(q.s2, q.form)?.sample(&q.grid);
    let mut per_l = Vec::new();
    let mut best: f64 = 0.0;
    let mut decreases = 0;
    let mut all_converged = true;
    let mut max_residual: f64 = 0.0;
    let mut stopped = false;
    for l in 0..=q.l_max {
        let t = SectorOperator::build(&q.grid, &q.potential, q.h, l);
        let sn = weighted_sector_norm(t.matrix(), q.z, &w1, &w2, q.seed)?;
        all_converged &= sn.converged;
        max_residual = max_residual.max(sn.residual);
        if let Some(&prev) = per_l.last() {
            if sn.value < prev {
                decreases += 1;
            } else {
                decreases = 0;
            }
        }
        best = best.max(sn.value);
        per_l.push(sn.value);
        if decreases >= 3 && sn.value < 0.1 * best {
            stopped = true;
            break;
        }
    }
    Ok(FullNorm {
        norm: best,
        l_used: per_l.len(),
        per_l,
        cutoff_hit: !stopped,
        all_converged,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Semiclassical,
    LowFrequency,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Semiclassical => write!(f, "semiclassical"),
            BoundKind::LowFrequency => write!(f, "lowfreq"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub slack: f64,
    /// Always evaluate the `(2N, 2R)` companion run.
    pub refine: bool,
    /// Evaluate the sector form of the constant with this aperture.
    pub alpha: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            slack: DEFAULT_SLACK,
            refine: true,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub points: usize,
    pub radius: f64,
    pub measured: f64,
    pub margin: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub potential: String,
    pub n: usize,
    pub h: f64,
    pub z: Complex64,
    pub s1: f64,
    pub s2: f64,
    pub c_v: f64,
    pub delta: f64,
    /// `(1/delta + 1/C_V)` times the aperture factor.
    pub prefactor: f64,
    pub bound: f64,
    pub measured: f64,
    pub margin: f64,
    pub per_l: Vec<f64>,
    pub l_used: usize,
    pub cutoff_hit: bool,
    pub converged: bool,
    pub max_residual: f64,
    pub points: usize,
    pub radius: f64,
    pub refined: Option<Refinement>,
    pub slack: f64,
    pub seed: u64,
    pub form: WeightForm,
    pub verdict: Verdict,
}

/// `(1/delta + 1/C_V)(sqrt(1 + alpha) + sqrt(2 + alpha))`, times
/// `(1 + alpha^2)^{1/4}` when `alpha > 0`.
pub fn bound_prefactor(delta: f64, c_v: f64, alpha: f64) -> f64 {
    (1.0 / delta + 1.0 / c_v) * ((1.0 + alpha).sqrt() + (2.0 + alpha).sqrt()) * (1.0 + alpha * alpha).powf(0.25)
}

/// Semiclassical constant `|z|^{-1/2} h^{-1} (1/(2s-1) + 1/C_V)(1 + √2)`.
pub fn semiclassical_bound(h: f64, z: Complex64, s: f64, c_v: f64) -> f64 {
    bound_prefactor(2.0 * s - 1.0, c_v, 0.0) / (z.norm().sqrt() * h)
}

/// Effective `delta` for the low-frequency constant: `s1 + s2 - 2`, capped
/// at 1 (larger sums reduce to smaller exponents, which only enlarge the norm).
pub fn lowfreq_delta(s1: f64, s2: f64) -> f64 {
    (s1 + s2 - 2.0).min(1.0)
}

/// `delta` after the adjoint/monotonicity reduction that caps the larger
/// exponent at `(3 + delta_1)/2` with `s_min = 1/2 + delta_1`.
pub fn lowfreq_delta_reduced(s1: f64, s2: f64) -> f64 {
    let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
    let d1 = lo - 0.5;
    (lo + hi.min((3.0 + d1) / 2.0) - 2.0).min(1.0)
}

/// `h^{-2} (1/delta + 1/C_V)(1 + √2)` with `delta = min(s1 + s2 - 2, 1)`.
pub fn lowfreq_bound(h: f64, s1: f64, s2: f64, c_v: f64) -> f64 {
    bound_prefactor(lowfreq_delta(s1, s2), c_v, 0.0) / (h * h)
}

fn require_repulsive(q: &ResolventQuery) -> Result<f64, VerifyError> {
    let c_v = q.potential.repulsivity();
    if let crate::model::Repulsivity::Fail(w) = check_repulsive(&q.potential, &q.grid, c_v) {
        return Err(VerifyError::NotRepulsive {
            c_v,
            left: w.left,
            right: w.right,
        });
    }
    Ok(c_v)
}

fn finish_report(
    q: &ResolventQuery,
    kind: BoundKind,
    c_v: f64,
    delta: f64,
    prefactor: f64,
    bound: f64,
    opts: &VerifyOptions,
) -> Result<BoundReport, VerifyError> {
    let base = full_norm(q)?;
    let limit = bound * (1.0 + opts.slack);
    let base_ok = base.all_converged && !base.cutoff_hit;
    let mut verdict = if !base_ok {
        Verdict::Inconclusive
    } else if base.norm <= limit {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let refined = if opts.refine || verdict == Verdict::Fail {
        let grid = q.grid.doubled();
        let r = full_norm(&q.with_grid(grid))?;
        let converged = r.all_converged && !r.cutoff_hit;
        if verdict == Verdict::Fail && converged && r.norm <= limit {
            verdict = Verdict::Pass;
        }
        Some(Refinement {
            points: grid.len(),
            radius: grid.radius(),
            measured: r.norm,
            margin: bound - r.norm,
            converged,
        })
    } else {
        None
    };
    Ok(BoundReport {
        kind,
        potential: q.potential.name(),
        n: q.grid.dimension(),
        h: q.h,
        z: q.z,
        s1: q.s1,
        s2: q.s2,
        c_v,
        delta,
        prefactor,
        bound,
        measured: base.norm,
        margin: bound - base.norm,
        per_l: base.per_l,
        l_used: base.l_used,
        cutoff_hit: base.cutoff_hit,
        converged: base.all_converged,
        max_residual: base.max_residual,
        points: q.grid.len(),
        radius: q.grid.radius(),
        refined,
        slack: opts.slack,
        seed: q.seed,
        form: q.form,
        verdict,
    })
}

pub fn verify_semiclassical_bound(q: &ResolventQuery, opts: &VerifyOptions) -> Result<BoundReport, VerifyError> {
    q.validate()?;
    if q.s1 != q.s2 || !(q.s1 > 0.5 && q.s1 < 1.0) {
        return Err(VerifyError::ExponentOutOfRange(q.s1, q.s2));
    }
    let c_v = require_repulsive(q)?;
    let delta = 2.0 * q.s1 - 1.0;
    let alpha = match opts.alpha {
        Some(a) if a > 0.0 => {
            if !(q.z.im.abs() < a * q.z.re) {
                return Err(VerifyError::OutsideSector { z: q.z, alpha: a });
            }
            a
        }
        _ => 0.0,
    };
    let prefactor = bound_prefactor(delta, c_v, alpha);
    let bound = prefactor / (q.z.norm().sqrt() * q.h);
    finish_report(q, BoundKind::Semiclassical, c_v, delta, prefactor, bound, opts)
}

pub fn verify_lowfreq_bound(q: &ResolventQuery, opts: &VerifyOptions) -> Result<BoundReport, VerifyError> {
    q.validate()?;
    if !(q.s1 > 0.5 && q.s2 > 0.5 && q.s1 + q.s2 > 2.0) {
        return Err(VerifyError::LowFreqExponents(q.s1, q.s2));
    }
    let c_v = require_repulsive(q)?;
    let delta = lowfreq_delta(q.s1, q.s2);
    let prefactor = bound_prefactor(delta, c_v, 0.0);
    let bound = prefactor / (q.h * q.h);
    finish_report(q, BoundKind::LowFrequency, c_v, delta, prefactor, bound, opts)
}

/// Compactly supported test profile on the unit box: value, `∂_1` and Laplacian.
pub trait Bump: Sync {
    fn eval(&self, x: [f64; 3]) -> (f64, f64, f64);
}

/// `χ(x) = e · exp(1/(|x|^2 - 1))` on the unit ball, `χ(0) = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardBump;

impl Bump for StandardBump {
    fn eval(&self, x: [f64; 3]) -> (f64, f64, f64) {
        let q = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if q >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let m = q - 1.0;
        let g = (1.0 + 1.0 / m).exp();
        let g1 = -g / (m * m);
        let g2 = g / m.powi(4) + 2.0 * g / m.powi(3);
        (g, 2.0 * x[0] * g1, 6.0 * g1 + 4.0 * q * g2)
    }
}

/// `∫<x>^{-2s} χ^2`, `∫<x>^{2s} (Δχ)^2` and `∫<x>^{2s} (∂_1 χ)^2` over the unit box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasimodeIntegrals {
    pub mass: f64,
    pub laplacian: f64,
    pub gradient: f64,
    /// Largest relative gap between the Richardson value and the fine midpoint value.
    pub richardson_gap: f64,
}

impl QuasimodeIntegrals {
    pub fn compute(s: f64, bump: &dyn Bump, coarse: usize) -> Self {
        let a = midpoint_cube(s, bump, coarse);
        let b = midpoint_cube(s, bump, 2 * coarse);
        let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
        let vals = [rich(a[0], b[0]), rich(a[1], b[1]), rich(a[2], b[2])];
        let gap = (0..3)
            .map(|k| {
                if vals[k] == 0.0 {
                    (b[k] - vals[k]).abs()
                } else {
                    ((b[k] - vals[k]) / vals[k]).abs()
                }
            })
            .fold(0.0, f64::max);
        Self {
            mass: vals[0],
            laplacian: vals[1],
            gradient: vals[2],
            richardson_gap: gap,
        }
    }

    /// `||<x>^{-s} χ|| / ||<x>^{s} (-h^2 Δ - E) e^{i√E x_1/h} χ||`.
    pub fn ratio(&self, h: f64, e: f64) -> f64 {
        let h2 = h * h;
        (self.mass / (h2 * h2 * self.laplacian + 4.0 * h2 * e * self.gradient)).sqrt()
    }
}

fn midpoint_cube(s: f64, bump: &dyn Bump, m: usize) -> [f64; 3] {
    let dx = 2.0 / m as f64;
    let mut acc = [0.0; 3];
    let coords: Vec<f64> = (0..m).map(|i| -1.0 + (i as f64 + 0.5) * dx).collect();
    for &x in &coords {
        for &y in &coords {
            for &z in &coords {
                let (c, d1, lap) = bump.eval([x, y, z]);
                if c == 0.0 && d1 == 0.0 && lap == 0.0 {
                    continue;
                }
                let br = 1.0 + x * x + y * y + z * z;
                let up = br.powf(s);
                acc[0] += c * c / up;
                acc[1] += lap * lap * up;
                acc[2] += d1 * d1 * up;
            }
        }
    }
    let vol = dx * dx * dx;
    [acc[0] * vol, acc[1] * vol, acc[2] * vol]
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeReport {
    pub h: f64,
    pub e: f64,
    pub s: f64,
    pub ratio: f64,
    pub integrals: QuasimodeIntegrals,
    /// Richardson disagreement above 1%.
    pub quadrature_flag: bool,
}

pub fn sharpness_quasimode(h: f64, e: f64, s: f64, bump: &dyn Bump) -> Result<QuasimodeReport, VerifyError> {
    if !(h > 0.0 && e > 0.0) {
        return Err(VerifyError::Sharpness(format!("need h > 0 and E > 0 (got h = {h}, E = {e})")));
    }
    let integrals = QuasimodeIntegrals::compute(s, bump, 64);
    if !(integrals.mass > 0.0) {
        return Err(VerifyError::Sharpness("bump profile vanishes".into()));
    }
    Ok(QuasimodeReport {
        h,
        e,
        s,
        ratio: integrals.ratio(h, e),
        quadrature_flag: integrals.richardson_gap > 0.01,
        integrals,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub eps: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightExponentReport {
    pub s: f64,
    pub e: f64,
    pub h: f64,
    pub rows: Vec<GrowthRow>,
    /// `f̂(E/h) / f̂(0)` for the Gaussian source.
    pub transform_ratio: f64,
    pub transform_flag: bool,
    pub monotone_growth: bool,
    /// Relative change below 1% over each of the last two halvings.
    pub saturated: bool,
}

/// `||<x>^{-s} R_0 f||_{L^2(R^3)}` for `R_0 = (-h^2 Δ - λ^2)^{-1}`,
/// `λ = E + iε`, and the radial source `f = amplitude · exp(-|y|^2)`.
pub fn weighted_free_solution_norm(s: f64, e: f64, h: f64, eps: f64, amplitude: f64) -> f64 {
    let k = Complex64::new(e, eps) / h;
    let gauss = |r: f64| amplitude * (-r * r).exp();
    // u(r) = (1/(k r h^2)) [e^{ikr} ∫_0^r ρ f sin(kρ) + sin(kr) ∫_r^∞ ρ f e^{ikρ}]
    let inner_r = 10.0;
    let m = 20_000;
    let dr = inner_r / m as f64;
    let rs: Vec<f64> = (0..=m).map(|i| i as f64 * dr).collect();
    let lower_integrand: Vec<Complex64> = rs.iter().map(|&r| r * gauss(r) * (k * r).sin()).collect();
    let upper_integrand: Vec<Complex64> = rs
        .iter()
        .map(|&r| r * gauss(r) * (Complex64::i() * k * r).exp())
        .collect();
    let mut lower = vec![Complex64::new(0.0, 0.0); m + 1];
    for i in 1..=m {
        lower[i] = lower[i - 1] + (lower_integrand[i - 1] + lower_integrand[i]) * (0.5 * dr);
    }
    let mut upper = vec![Complex64::new(0.0, 0.0); m + 1];
    for i in (0..m).rev() {
        upper[i] = upper[i + 1] + (upper_integrand[i] + upper_integrand[i + 1]) * (0.5 * dr);
    }
    let weight = |r: f64| (1.0 + r * r).powf(-s);
    let h2 = h * h;
    let density: Vec<f64> = (0..=m)
        .map(|i| {
            let r = rs[i];
            if i == 0 {
                return 0.0;
            }
            let u = ((Complex64::i() * k * r).exp() * lower[i] + (k * r).sin() * upper[i]) / (k * r * h2);
            weight(r) * u.norm_sqr() * r * r
        })
        .collect();
    // composite Simpson on the inner interval
    let mut inner = density[0] + density[m];
    for (i, d) in density.iter().enumerate().take(m).skip(1) {
        inner += if i % 2 == 1 { 4.0 * d } else { 2.0 * d };
    }
    inner *= dr / 3.0;
    // beyond inner_r the source has no mass: u = e^{ikr} G / (k r h^2)
    let g = lower[m];
    let amp = g.norm_sqr() / (k.norm_sqr() * h2 * h2);
    let decay = 2.0 * k.im;
    let outer_r = (40.0 / decay).max(2.0 * inner_r);
    let outer = amp * log_panels_width(inner_r, outer_r, 0.5, |r| weight(r) * (-decay * r).exp());
    (4.0 * PI * (inner + outer)).sqrt()
}

pub fn sharpness_weight_exponent(s: f64, e: f64, h: f64, eps: &[f64]) -> Result<WeightExponentReport, VerifyError> {
    if !(e > 0.0 && h > 0.0 && s > 0.0) || eps.iter().any(|&v| !(v > 0.0)) {
        return Err(VerifyError::Sharpness("need s, E, h, eps > 0".into()));
    }
    let rows: Vec<GrowthRow> = eps
        .iter()
        .map(|&eps| GrowthRow {
            eps,
            value: weighted_free_solution_norm(s, e, h, eps, 1.0),
        })
        .collect();
    let transform_ratio = (-(e / h).powi(2) / 4.0).exp();
    let (monotone_growth, saturated) = growth_summary(&rows);
    Ok(WeightExponentReport {
        s,
        e,
        h,
        rows,
        transform_ratio,
        transform_flag: transform_ratio < 1e-6,
        monotone_growth,
        saturated,
    })
}

/// Rows are ordered by decreasing `eps`.
fn growth_summary(rows: &[GrowthRow]) -> (bool, bool) {
    let monotone = rows.windows(2).all(|w| w[1].value > w[0].value);
    let n = rows.len();
    let saturated = n >= 3
        && (n - 2..n).all(|i| ((rows[i].value - rows[i - 1].value) / rows[i - 1].value).abs() < 0.01);
    (monotone, saturated)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSumReport {
    pub s_sum: f64,
    pub eta: f64,
    pub rows: Vec<GrowthRow>,
    /// Still growing by more than 1% over the last halving.
    pub divergent: bool,
}

/// `h^{-2} || e^{-3ε|x|/(2h)} <x>^{-s1-s2-η+1/2} ||_{L^2(R^3)}`.
pub fn weight_sum_lower_bound(s_sum: f64, eta: f64, h: f64, eps: f64) -> f64 {
    let p = -s_sum - eta + 0.5;
    let rate = 3.0 * eps / h;
    let outer = 60.0 / rate;
    let f = |r: f64| (1.0 + r * r).powf(p) * (-rate * r).exp() * r * r;
    let near = panels(0.0, 1.0, 4, f);
    let far = log_panels_width(1.0, outer.max(2.0), 0.5, f);
    (4.0 * PI * (near + far)).sqrt() / (h * h)
}

pub fn sharpness_weight_sum(s1: f64, s2: f64, eta: f64, h: f64, eps: &[f64]) -> Result<WeightSumReport, VerifyError> {
    if !(eta > 0.0 && h > 0.0) || eps.iter().any(|&v| !(v > 0.0)) {
        return Err(VerifyError::Sharpness("need eta, h, eps > 0".into()));
    }
    let s_sum = s1 + s2;
    let rows: Vec<GrowthRow> = eps
        .iter()
        .map(|&eps| GrowthRow {
            eps,
            value: weight_sum_lower_bound(s_sum, eta, h, eps),
        })
        .collect();
    let n = rows.len();
    let divergent = n >= 2 && rows[n - 1].value > 1.01 * rows[n - 2].value;
    Ok(WeightSumReport {
        s_sum,
        eta,
        rows,
        divergent,
    })
}

/// `2^{-1}, 2^{-2}, ..., 2^{-k}`.
pub fn halving_sequence(k: u32) -> Vec<f64> {
    (1..=k as i32).map(|j| 2f64.powi(-j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_grid;
    use nalgebra::{Complex, DMatrix};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dense_norm(t: &SymTridiag, z: Complex64, w1: &[f64], w2: &[f64]) -> f64 {
        let n = t.len();
        let shifted = t.to_dense().map(|v| Complex::new(v, 0.0)) - DMatrix::identity(n, n) * z;
        let inv = shifted.try_inverse().unwrap();
        let a = DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * w1[i] * w2[j]);
        a.singular_values().max()
    }

    #[test]
    fn diagonal_example() {
        let t = SymTridiag::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 3]);
        let ones = [1.0; 4];
        let sn = weighted_sector_norm(&t, c(0.0, 1.0), &ones, &ones, 1).unwrap();
        assert!(sn.converged);
        assert!((sn.value - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn free_negative_shift_is_contractive() {
        let grid = make_grid(3, 20.0, 200).unwrap();
        let t = SectorOperator::build(&grid, &PotentialSpec::zero(), 1.0, 0);
        let w = WeightSpec::new(1.0, WeightForm::OnePlusR).unwrap().sample(&grid);
        let sn = weighted_sector_norm(t.matrix(), c(-1.0, 0.0), &w, &w, 3).unwrap();
        assert!(sn.value <= 1.0);
    }

    #[test]
    fn random_six_point_system_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = SymTridiag::new(
            (0..6).map(|_| rng.random_range(0.0..3.0)).collect(),
            (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let w1: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.0)).collect();
        let w2: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.0)).collect();
        let z = c(0.5, 0.2);
        let sn = weighted_sector_norm(&t, z, &w1, &w2, 5).unwrap();
        let d = dense_norm(&t, z, &w1, &w2);
        assert!((sn.value - d).abs() <= 1e-5 * d, "{} vs {d}", sn.value);
    }

    #[test]
    fn rejects_bad_weights() {
        let t = SymTridiag::new(vec![1.0, 1.0], vec![0.0]);
        assert_eq!(
            weighted_sector_norm(&t, c(0.0, 1.0), &[1.5, 1.0], &[1.0, 1.0], 0).unwrap_err(),
            VerifyError::BadWeights
        );
    }

    #[test]
    fn free_sector_supremum_is_s_wave() {
        let grid = make_grid(3, 30.0, 300).unwrap();
        let q = ResolventQuery::new(PotentialSpec::zero(), grid, 1.0, c(-1.0, 0.0), 1.0, 1.0);
        let full = full_norm(&q).unwrap();
        assert!(!full.cutoff_hit);
        assert_eq!(full.norm, full.per_l[0]);
        assert!(full.per_l.len() >= 4);
        assert!(full.per_l.iter().all(|&v| v <= full.norm));
    }

    #[test]
    fn constants() {
        let pre = bound_prefactor(0.5, 1.0, 0.0);
        assert!((pre - 3.0 * (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-14);
        assert!((pre - 7.243).abs() < 1e-3);
        assert!((lowfreq_bound(1.0, 1.25, 1.25, 1.0) - pre).abs() < 1e-14);
        assert!((semiclassical_bound(0.5, c(4.0, 0.0), 0.75, 1.0) - pre).abs() < 1e-14);
        assert!((lowfreq_delta_reduced(1.25, 1.25) - 0.5).abs() < 1e-15);
        assert!((lowfreq_delta_reduced(0.8, 1.7) - 0.45).abs() < 1e-15);
        assert!((lowfreq_delta(1.7, 1.9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponent_preconditions() {
        let grid = make_grid(3, 10.0, 50).unwrap();
        let q = ResolventQuery::new(PotentialSpec::coulomb(1.0), grid, 1.0, c(2.0, 0.2), 1.2, 1.2);
        let opts = VerifyOptions::default();
        assert!(matches!(verify_semiclassical_bound(&q, &opts), Err(VerifyError::ExponentOutOfRange(..))));
        let q = ResolventQuery { s1: 0.9, s2: 1.0, ..q };
        assert!(matches!(verify_lowfreq_bound(&q, &opts), Err(VerifyError::LowFreqExponents(..))));
        let q = ResolventQuery { z: c(4.0, 0.0), ..q };
        assert!(matches!(q.validate(), Err(VerifyError::ZOnPositiveAxis(_))));
    }

    #[test]
    fn coulomb_constant_too_large_is_refused() {
        let grid = make_grid(3, 200.0, 400).unwrap();
        let p = PotentialSpec::coulomb(1.0).with_repulsivity(1.5);
        let q = ResolventQuery::new(p, grid, 1.0, c(2.0, 0.2), 0.75, 0.75);
        assert!(matches!(
            verify_semiclassical_bound(&q, &VerifyOptions::default()),
            Err(VerifyError::NotRepulsive { .. })
        ));
    }

    #[test]
    fn sector_form_requires_z_in_sector() {
        let grid = make_grid(3, 20.0, 100).unwrap();
        let q = ResolventQuery::new(PotentialSpec::zero(), grid, 1.0, c(-1.0, 0.0), 0.75, 0.75);
        let opts = VerifyOptions {
            alpha: Some(0.5),
            refine: false,
            ..Default::default()
        };
        assert!(matches!(verify_semiclassical_bound(&q, &opts), Err(VerifyError::OutsideSector { .. })));
        let q = ResolventQuery { z: c(2.0, 0.2), ..q };
        let r = verify_semiclassical_bound(&q, &opts).unwrap();
        let expected = 3.0 * (1.5f64.sqrt() + 2.5f64.sqrt()) * 1.25f64.powf(0.25);
        assert!((r.prefactor - expected).abs() < 1e-12);
    }

    #[test]
    fn symmetric_profile_has_no_energy_term() {
        struct Radial;
        impl Bump for Radial {
            fn eval(&self, x: [f64; 3]) -> (f64, f64, f64) {
                let (c, _, lap) = StandardBump.eval(x);
                (c, 0.0, lap)
            }
        }
        let q = QuasimodeIntegrals::compute(0.75, &Radial, 16);
        assert_eq!(q.gradient, 0.0);
        let r1 = q.ratio(0.3, 1.0);
        let r2 = q.ratio(0.3, 100.0);
        assert_eq!(r1, r2);
        assert!((r1 - (q.mass / q.laplacian).sqrt() / 0.09).abs() < 1e-12 * r1);
    }

    #[test]
    fn zero_source_gives_zero() {
        assert_eq!(weighted_free_solution_norm(0.6, 1.0, 1.0, 0.1, 0.0), 0.0);
    }

    #[test]
    fn weight_sum_finite_at_unit_eps() {
        for s in [1.0, 1.8, 2.2, 3.0] {
            let v = weight_sum_lower_bound(s, 0.05, 1.0, 1.0);
            assert!(v.is_finite() && v > 0.0);
        }
    }

    #[test]
    fn clustered_top_singular_values() {
        let t = SymTridiag::new(vec![1.0, 1.0 + 1e-6, 3.0, 5.0, 8.0], vec![0.0; 4]);
        let w = vec![1.0; 5];
        let sn = weighted_sector_norm(&t, c(1.0, 0.5), &w, &w, 3).unwrap();
        assert!(sn.converged);
        assert!((sn.value - 2.0).abs() < 1e-9, "{}", sn.value);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-2.0)).collect();
        assert!((loglog_slope(&xs, &ys) + 2.0).abs() < 1e-12);
    }
}

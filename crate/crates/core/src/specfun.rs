//! Macdonald functions `K_nu` of complex argument, free resolvent kernels in
//! `R^n`, Hilbert-Schmidt finiteness of power-weighted kernels and the Schur
//! row/column bound.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::quad::log_panels;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const K_TOL: f64 = 1e-14;
const K_MAX_LEVELS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("Macdonald argument must have positive real part (got {0})")]
    NonPositiveRealPart(Complex64),
    #[error("kernel evaluated at zero distance")]
    ZeroDistance,
    #[error("spectral parameter must satisfy Im lambda > 0 (got {0})")]
    BadSpectralParameter(Complex64),
    #[error("dimension must be at least 1 (got {0})")]
    BadDimension(usize),
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Macdonald {
    pub value: Complex64,
    /// Set when `Re w < 1e-2` or the trapezoid sequence did not settle.
    pub reduced_accuracy: bool,
}

/// `K_nu(w) = ∫_0^∞ exp(-w cosh t) cosh(nu t) dt` by trapezoid halving.
pub fn macdonald_k(nu: f64, w: Complex64) -> Result<Macdonald, SpecFunError> {
    if !(w.re > 0.0) || !w.im.is_finite() {
        return Err(SpecFunError::NonPositiveRealPart(w));
    }
    let nu = nu.abs();
    let log_abs = |t: f64| -w.re * t.cosh() + log_cosh(nu * t);
    // cutoff: past the peak and 40 e-folds below it
    let mut peak = log_abs(0.0);
    let mut t_max = 0.0;
    loop {
        t_max += 0.125;
        let v = log_abs(t_max);
        peak = peak.max(v);
        if v < peak - 40.0 && w.re * t_max.sinh() > nu * (nu * t_max).tanh() {
            break;
        }
    }
    let f = |t: f64| (-w * t.cosh()).exp() * (nu * t).cosh();
    let mut step = t_max / 8.0;
    let mut sum = 0.5 * f(0.0) + (1..=8).map(|k| f(k as f64 * step)).sum::<Complex64>();
    let mut estimate = sum * step;
    let mut settled = false;
    for level in 0..K_MAX_LEVELS {
        let count = 8usize << level;
        let odd: Complex64 = (0..count).map(|k| f((2 * k + 1) as f64 * step / 2.0)).sum();
        sum += odd;
        step /= 2.0;
        let next = sum * step;
        let change = (next - estimate).norm();
        estimate = next;
        if level >= 2 && change <= K_TOL * next.norm() {
            settled = true;
            break;
        }
    }
    Ok(Macdonald {
        value: estimate,
        reduced_accuracy: !settled || w.re < 1e-2,
    })
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Ascending-series evaluation, intended for `|w| <= 2`.
pub fn macdonald_k_series(nu: f64, w: Complex64) -> Complex64 {
    let nu = nu.abs();
    let m = nu.round();
    if (nu - m).abs() < 1e-12 {
        let m = m as usize;
        let k0 = k0_series(w);
        if m == 0 {
            return k0;
        }
        let mut prev = k0;
        let mut cur = k1_series(w);
        for j in 1..m {
            let next = prev + cur * (2.0 * j as f64) / w;
            prev = cur;
            cur = next;
        }
        return cur;
    }
    let i_series = |mu: f64| -> Complex64 {
        let half = w / 2.0;
        let q = half * half;
        let mut term = half.powf(mu) / libm::tgamma(mu + 1.0);
        let mut sum = term;
        for k in 1..200 {
            term *= q / (k as f64 * (k as f64 + mu));
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    };
    (i_series(-nu) - i_series(nu)) * (PI / (2.0 * (nu * PI).sin()))
}

fn k0_series(w: Complex64) -> Complex64 {
    let q = w * w / 4.0;
    let mut term = Complex64::new(1.0, 0.0);
    let mut i0 = term;
    let mut tail = Complex64::new(0.0, 0.0);
    let mut harmonic = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term.norm() * harmonic.max(1.0) < 1e-17 * i0.norm() {
            break;
        }
    }
    -((w / 2.0).ln() + EULER_GAMMA) * i0 + tail
}

fn k1_series(w: Complex64) -> Complex64 {
    let q = w * w / 4.0;
    let half = w / 2.0;
    // I_1 and the digamma sum over (z^2/4)^k / (k!(k+1)!)
    let mut term = Complex64::new(1.0, 0.0);
    let mut i1 = term;
    let mut psi_sum = term * (-2.0 * EULER_GAMMA + 1.0);
    let mut hk = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        hk += 1.0 / kf;
        let hk1 = hk + 1.0 / (kf + 1.0);
        i1 += term;
        psi_sum += term * (-2.0 * EULER_GAMMA + hk + hk1);
        if term.norm() * (hk1 + 2.0) < 1e-17 * i1.norm() {
            break;
        }
    }
    let i1 = i1 * half;
    w.inv() + i1 * half.ln() - half / 2.0 * psi_sum
}

/// Spectral data of `h^{-2}(-Δ - λ^2)^{-1}` in `R^n`; `Im λ > 0` selects the
/// decaying (outgoing) branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub n: usize,
    pub h: f64,
    pub lambda: Complex64,
}

impl KernelSpec {
    pub fn new(n: usize, h: f64, lambda: Complex64) -> Result<Self, SpecFunError> {
        if n == 0 {
            return Err(SpecFunError::BadDimension(n));
        }
        if !(lambda.im > 0.0) {
            return Err(SpecFunError::BadSpectralParameter(lambda));
        }
        Ok(Self { n, h, lambda })
    }

    /// `λ = sqrt(z)/h` on the branch with positive imaginary part.
    pub fn from_z(n: usize, h: f64, z: Complex64) -> Result<Self, SpecFunError> {
        Self::new(n, h, outgoing_sqrt(z) / h)
    }
}

/// Square root of `z ∉ [0, ∞)` with `Im > 0`.
pub fn outgoing_sqrt(z: Complex64) -> Complex64 {
    Complex64::i() * (-z).sqrt()
}

/// `h^{-2} (1/2π) (-iλ/(2π d))^{n/2-1} K_{n/2-1}(-iλ d)`.
pub fn free_kernel(dist: f64, spec: &KernelSpec) -> Result<Complex64, SpecFunError> {
    if !(dist > 0.0) {
        return Err(SpecFunError::ZeroDistance);
    }
    let mu = spec.n as f64 / 2.0 - 1.0;
    let a = -Complex64::i() * spec.lambda * dist;
    let k = macdonald_k(mu, a)?.value;
    let pre = (-Complex64::i() * spec.lambda / (2.0 * PI * dist)).powf(mu);
    Ok(pre * k / (2.0 * PI * spec.h * spec.h))
}

/// `λ`-derivative of [`free_kernel`]:
/// `h^{-2} (1/2π) i d (2π d^2)^{-μ} a^μ K_{μ-1}(a)` with `a = -iλd`, `μ = n/2 - 1`.
pub fn dkernel_dlambda(dist: f64, spec: &KernelSpec) -> Result<Complex64, SpecFunError> {
    if !(dist > 0.0) {
        return Err(SpecFunError::ZeroDistance);
    }
    let mu = spec.n as f64 / 2.0 - 1.0;
    let a = -Complex64::i() * spec.lambda * dist;
    let k = macdonald_k(mu - 1.0, a)?.value;
    let pre = Complex64::i() * dist * (2.0 * PI * dist * dist).powf(-mu) * a.powf(mu);
    Ok(pre * k / (2.0 * PI * spec.h * spec.h))
}

/// Closed form of the three-dimensional kernel `h^{-2} e^{i sqrt(z) d / h} / (4π d)`.
pub fn free_kernel_3d(dist: f64, h: f64, z: Complex64) -> Complex64 {
    let k = outgoing_sqrt(z) / h;
    (Complex64::i() * k * dist).exp() / (4.0 * PI * dist * h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsVerdict {
    Converges,
    Diverges,
}

/// Finiteness of `∫∫ <x>^{-s} <y>^{-t} |x-y|^{-p} dx dy` over `R^n × R^n`.
pub fn hs_finite(s: f64, t: f64, p: f64, n: usize) -> HsVerdict {
    let n = n as f64;
    if s + p > n && t + p > n && s + p + t > 2.0 * n && p < n {
        HsVerdict::Converges
    } else {
        HsVerdict::Diverges
    }
}

/// Euclidean distance of `(s, t, p)` to the nearest boundary hyperplane of
/// the finiteness region in `R^3`.
pub fn hs_boundary_distance(s: f64, t: f64, p: f64) -> f64 {
    let r2 = 2f64.sqrt();
    let r3 = 3f64.sqrt();
    [
        (s + p - 3.0).abs() / r2,
        (t + p - 3.0).abs() / r2,
        (s + t + p - 6.0).abs() / r3,
        (p - 3.0).abs(),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HsOutcome {
    Converges(f64),
    Diverges,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsEstimate {
    pub outcome: HsOutcome,
    /// Truncated integrals along the exhaustion sequence.
    pub levels: Vec<f64>,
}

const HS_LEVELS: usize = 4;
/// Relative changes below this are quadrature noise, not a trend.
const HS_NOISE: f64 = 1e-5;

/// Numerical companion to [`hs_finite`] for `n = 3`: the angular integrals
/// are done in closed form and the remaining radial double integral is
/// evaluated on an exhausting sequence of domains.
pub fn hs_norm_estimate_3d(s: f64, t: f64, p: f64) -> HsEstimate {
    if hs_boundary_distance(s, t, p) < 0.05 {
        return HsEstimate {
            outcome: HsOutcome::Indeterminate,
            levels: Vec::new(),
        };
    }
    let levels: Vec<f64> = (0..HS_LEVELS)
        .map(|k| {
            let big = 2f64.powi(24 + 8 * k as i32);
            let small = 2f64.powi(-20 - 4 * k as i32);
            let band = 2f64.powi(-24 - 8 * k as i32);
            hs_truncated(s, t, p, small, big, band)
        })
        .collect();
    let m = levels.len();
    let last = levels[m - 1] - levels[m - 2];
    let prev = levels[m - 2] - levels[m - 3];
    let rel = last.abs() / levels[m - 1].abs();
    let outcome = if !levels[m - 1].is_finite() {
        HsOutcome::Diverges
    } else if rel <= 0.01 && (last.abs() <= prev.abs() || rel <= HS_NOISE) {
        HsOutcome::Converges(levels[m - 1])
    } else if rel >= 0.10 && last >= prev && last > 0.0 {
        HsOutcome::Diverges
    } else {
        HsOutcome::Indeterminate
    };
    HsEstimate { outcome, levels }
}

/// Angular average of `|x - y|^{-p}` over two unit spheres for `|x| = r`,
/// `|y| = rho`, given `delta = |r - rho|` to full relative precision.
fn angular_average(p: f64, r: f64, rho: f64, delta: f64) -> f64 {
    let q = 2.0 - p;
    let c = (2.0 * r.min(rho) / delta).ln_1p();
    if q == 0.0 {
        c / (2.0 * r * rho)
    } else {
        delta.powf(q) * (q * c).exp_m1() / (2.0 * q * r * rho)
    }
}

fn hs_truncated(s: f64, t: f64, p: f64, small: f64, big: f64, band: f64) -> f64 {
    let bracket = |x: f64, e: f64| (1.0 + x * x).powf(-e / 2.0);
    let inner = |r: f64| -> f64 {
        let g = |rho: f64, delta: f64| rho * rho * bracket(rho, t) * angular_average(p, r, rho, delta);
        let b = band * r;
        let mut acc = log_panels(small, (0.5 * r).min(big), |rho| g(rho, r - rho));
        // near the diagonal, integrate in ln|r - rho|
        acc += log_panels(b, 0.5 * r, |d| g(r - d, d));
        let right = (0.5 * r).min(big - r);
        acc += log_panels(b, right, |d| g(r + d, d));
        acc += log_panels(1.5 * r, big, |rho| g(rho, rho - r));
        acc
    };
    16.0 * PI * PI * log_panels(small, big, |r| r * r * bracket(r, s) * inner(r))
}

/// `max(max row sum, max column sum)` of a nonnegative matrix; bounds its
/// spectral norm.
pub fn schur_bound(m: &DMatrix<f64>) -> Result<f64, SpecFunError> {
    for (j, col) in m.column_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v < 0.0 || v.is_nan() {
                return Err(SpecFunError::NegativeEntry { row: i, col: j, value: v });
            }
        }
    }
    let rows = m.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let cols = m.column_iter().map(|c| c.sum()).fold(0.0, f64::max);
    Ok(rows.max(cols))
}

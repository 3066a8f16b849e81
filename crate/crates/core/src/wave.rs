//! Radial wave equation `v_tt + T v = 0` in conjugated coordinates, solved by
//! spectral synthesis on one sector, and the weighted energy decay experiment.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ModelError, PotentialSpec, RadialGrid};
use crate::sector::{eigendecompose, SectorOperator, SpectralData};
use crate::tridiag::{SolveError, SymTridiag};

/// Distance kept between the reach of the data at the horizon and `R`.
pub const BOUNDARY_MARGIN: f64 = 10.0;
/// Start of the window used for the decay slope.
pub const SLOPE_START: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("wave experiments run in dimension 3 (got n = {0})")]
    Dimension(usize),
    #[error("weight exponent s = {s} must exceed {min}")]
    WeightExponent { s: f64, min: f64 },
    #[error("short-range exponent delta_V = {delta_v} must exceed {min}")]
    ShortRange { delta_v: f64, min: f64 },
    #[error("horizon T = {horizon} too long: need R = {radius} >= r_supp + T + 10 with r_supp = {support}")]
    Horizon { horizon: f64, radius: f64, support: f64 },
    #[error("data length {got} does not match grid length {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("horizon must be positive and finite (got {0})")]
    BadHorizon(f64),
}

/// Solution snapshot `(v, v_t)` at time `t` on a radial grid, `v = r u`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
    pub grid: RadialGrid,
    pub s: f64,
}

impl WaveState {
    pub fn zero(grid: &RadialGrid, s: f64) -> Self {
        Self {
            t: 0.0,
            v: vec![0.0; grid.len()],
            vt: vec![0.0; grid.len()],
            grid: *grid,
            s,
        }
    }
}

/// `cos(t ω)` and `sin(t ω) / ω` for `λ = ω^2`, continued to `λ <= 0`.
fn multipliers(lambda: f64, t: f64) -> (f64, f64, f64, f64) {
    if lambda >= 0.0 {
        let w = lambda.sqrt();
        let x = t * w;
        let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        (x.cos(), t * sinc, -w * x.sin(), x.cos())
    } else {
        let w = (-lambda).sqrt();
        let x = t * w;
        let sinhc = if x.abs() < 1e-4 { 1.0 + x * x / 6.0 } else { x.sinh() / x };
        (x.cosh(), t * sinhc, w * x.sinh(), x.cosh())
    }
}

/// Spectral propagator for fixed initial data.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    spectral: &'a SpectralData,
    grid: RadialGrid,
    c0: DVector<f64>,
    c1: DVector<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(spectral: &'a SpectralData, grid: &RadialGrid, v0: &[f64], v1: &[f64]) -> Result<Self, WaveError> {
        let n = spectral.len();
        for d in [v0, v1] {
            if d.len() != n {
                return Err(WaveError::DataLength { expected: n, got: d.len() });
            }
        }
        let q = &spectral.vectors;
        Ok(Self {
            spectral,
            grid: *grid,
            c0: q.tr_mul(&DVector::from_column_slice(v0)),
            c1: q.tr_mul(&DVector::from_column_slice(v1)),
        })
    }

    /// Snapshots at all `times`, one matrix product per component.
    pub fn states(&self, times: &[f64], s: f64) -> Vec<WaveState> {
        let n = self.spectral.len();
        let k = times.len();
        let mut mv = DMatrix::zeros(n, k);
        let mut mt = DMatrix::zeros(n, k);
        for (col, &t) in times.iter().enumerate() {
            for j in 0..n {
                let (c, sn, dc, ds) = multipliers(self.spectral.eigenvalues[j], t);
                mv[(j, col)] = c * self.c0[j] + sn * self.c1[j];
                mt[(j, col)] = dc * self.c0[j] + ds * self.c1[j];
            }
        }
        let q = &self.spectral.vectors;
        let v = q * mv;
        let vt = q * mt;
        times
            .iter()
            .enumerate()
            .map(|(col, &t)| WaveState {
                t,
                v: v.column(col).iter().copied().collect(),
                vt: vt.column(col).iter().copied().collect(),
                grid: self.grid,
                s,
            })
            .collect()
    }

    pub fn state(&self, t: f64, s: f64) -> WaveState {
        self.states(&[t], s).pop().expect("one time requested")
    }
}

/// `v(t) = Q cos(t√Λ) Q^T v0 + Q sin(t√Λ)/√Λ Q^T v1` and its time derivative.
pub fn synth_solution(
    spectral: &SpectralData,
    grid: &RadialGrid,
    v0: &[f64],
    v1: &[f64],
    t: f64,
    s: f64,
) -> Result<WaveState, WaveError> {
    Ok(Propagator::new(spectral, grid, v0, v1)?.state(t, s))
}

/// `v' - v/r` with the centered stencil and `v(0) = v(R + dr) = 0`.
fn radial_gradient(grid: &RadialGrid, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let dr = grid.dr();
    (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { v[i - 1] };
            let right = if i + 1 == n { 0.0 } else { v[i + 1] };
            (right - left) / (2.0 * dr) - v[i] / grid.r(i)
        })
        .collect()
}

/// `4π Σ ⟨r⟩^{-2s} (|v_t|^2 + |v' - v/r|^2 + |v|^2) dr`.
pub fn weighted_energy(state: &WaveState) -> f64 {
    let grid = &state.grid;
    let grad = radial_gradient(grid, &state.v);
    let mut sum = 0.0;
    for i in 0..state.v.len() {
        let r = grid.r(i);
        let w = (1.0 + r * r).powf(-state.s);
        sum += w * (state.vt[i].powi(2) + grad[i].powi(2) + state.v[i].powi(2));
    }
    4.0 * PI * sum * grid.dr()
}

/// `E(0) = 4π Σ (|v0' - v0/r|^2 + |v1|^2) dr`.
pub fn initial_energy(grid: &RadialGrid, v0: &[f64], v1: &[f64]) -> f64 {
    let grad = radial_gradient(grid, v0);
    let sum: f64 = grad.iter().zip(v1).map(|(g, b)| g * g + b * b).sum();
    4.0 * PI * sum * grid.dr()
}

/// `||v_t||^2 + ⟨v, T v⟩` in the discrete inner product.
pub fn conserved_energy(t: &SymTridiag, state: &WaveState) -> f64 {
    let tv = t.apply(&state.v);
    let kinetic: f64 = state.vt.iter().map(|x| x * x).sum();
    let potential: f64 = state.v.iter().zip(&tv).map(|(a, b)| a * b).sum();
    (kinetic + potential) * state.grid.dr()
}

/// Largest radius where either datum is nonzero.
pub fn support_radius(grid: &RadialGrid, v0: &[f64], v1: &[f64]) -> f64 {
    (0..grid.len())
        .rev()
        .find(|&i| v0[i] != 0.0 || v1[i] != 0.0)
        .map_or(0.0, |i| grid.r(i))
}

/// `exp(-1/(1 - x^2))` on `|x| < 1`, zero outside.
pub fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// `v0 = r χ(r / a)` sampled on the grid.
pub fn bump_data(grid: &RadialGrid, a: f64) -> Vec<f64> {
    (0..grid.len()).map(|i| grid.r(i) * bump(grid.r(i) / a)).collect()
}

#[derive(Debug, Clone)]
pub struct DecaySetup {
    pub potential: PotentialSpec,
    pub grid: RadialGrid,
    pub s: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl DecaySetup {
    pub fn new(potential: PotentialSpec, grid: RadialGrid, s: f64, horizon: f64) -> Self {
        Self {
            potential,
            grid,
            s,
            horizon,
            dt: 0.25,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let steps = (self.horizon / self.dt).round().max(1.0) as usize;
        (0..=steps).map(|k| self.horizon * k as f64 / steps as f64).collect()
    }

    /// Dimension, `s > 3/2`, `delta_V > 2` and the radius rule.
    pub fn validate(&self, v0: &[f64], v1: &[f64]) -> Result<(), WaveError> {
        let n = self.grid.dimension();
        if n != 3 {
            return Err(WaveError::Dimension(n));
        }
        for d in [v0, v1] {
            if d.len() != self.grid.len() {
                return Err(WaveError::DataLength {
                    expected: self.grid.len(),
                    got: d.len(),
                });
            }
        }
        let s_min = (n as f64 + 3.0) / 4.0;
        if !(self.s > s_min) {
            return Err(WaveError::WeightExponent { s: self.s, min: s_min });
        }
        let delta_v = self.potential.short_range();
        if !(delta_v > 2.0) {
            return Err(WaveError::ShortRange { delta_v, min: 2.0 });
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(WaveError::BadHorizon(self.horizon));
        }
        let support = support_radius(&self.grid, v0, v1);
        if self.grid.radius() < support + self.horizon + BOUNDARY_MARGIN {
            return Err(WaveError::Horizon {
                horizon: self.horizon,
                radius: self.grid.radius(),
                support,
            });
        }
        self.potential.check_hypotheses(&self.grid)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub weighted: Vec<f64>,
    /// `⟨t⟩^2 E_s(t) / E(0)`.
    pub k: Vec<f64>,
    pub initial: f64,
    pub s: f64,
    pub horizon: f64,
    pub slope: f64,
    pub sup_k: f64,
    pub sup_k_early: f64,
    pub sup_k_late: f64,
    /// `max_t |energy(t) - energy(0)| / energy(0)` for the unweighted energy.
    pub energy_drift: f64,
}

impl DecayReport {
    /// Slope `<= -2 + 0.3` and `sup_{[10,T]} K <= 3 sup_{[0,10]} K`.
    pub fn decays(&self) -> bool {
        self.slope <= -1.7 && self.sup_k_late <= 3.0 * self.sup_k_early
    }
}

pub fn decay_experiment(setup: &DecaySetup, v0: &[f64], v1: &[f64]) -> Result<DecayReport, WaveError> {
    setup.validate(v0, v1)?;
    let op = SectorOperator::build(&setup.grid, &setup.potential, 1.0, 0);
    let spectral = eigendecompose(op.matrix())?;
    let prop = Propagator::new(&spectral, &setup.grid, v0, v1)?;
    let times = setup.times();
    let states = prop.states(&times, setup.s);
    let initial = initial_energy(&setup.grid, v0, v1);
    let weighted: Vec<f64> = states.iter().map(weighted_energy).collect();
    let k: Vec<f64> = times
        .iter()
        .zip(&weighted)
        .map(|(t, e)| if initial > 0.0 { (1.0 + t * t) * e / initial } else { 0.0 })
        .collect();
    let e0 = conserved_energy(op.matrix(), &states[0]);
    let energy_drift = states
        .iter()
        .map(|st| (conserved_energy(op.matrix(), st) - e0).abs())
        .fold(0.0, f64::max)
        / e0.abs().max(f64::MIN_POSITIVE);
    let sup_in = |a: f64, b: f64| {
        times
            .iter()
            .zip(&k)
            .filter(|(t, _)| **t >= a && **t <= b)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    };
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(&weighted)
        .filter(|(t, e)| **t >= SLOPE_START && **e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    Ok(DecayReport {
        slope: least_squares_slope(&window),
        sup_k: k.iter().copied().fold(0.0, f64::max),
        sup_k_early: sup_in(0.0, 10.0),
        sup_k_late: sup_in(10.0, setup.horizon),
        times,
        weighted,
        k,
        initial,
        s: setup.s,
        horizon: setup.horizon,
        energy_drift,
    })
}

/// Least-squares slope of `y` against `x`; `NaN` for fewer than two points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub t: f64,
    /// `∫_t^T E_s dτ` (trapezoid).
    pub tail: f64,
    /// `t^2 ∫_t^T E_s dτ`.
    pub weighted_tail: f64,
    /// `E_s(t) / ∫_t^T E_s dτ`, zero when both vanish.
    pub ratio: f64,
    /// `∫_t^T E_s dτ / E(0)`, zero for zero data.
    pub relative_tail: f64,
}

pub fn integral_tail_check(report: &DecayReport, t: f64) -> TailCheck {
    let ts = &report.times;
    let es = &report.weighted;
    let mut tail = 0.0;
    for i in 1..ts.len() {
        let (a, b) = (ts[i - 1].max(t), ts[i]);
        if b <= a {
            continue;
        }
        let lerp = |x: f64| es[i - 1] + (es[i] - es[i - 1]) * (x - ts[i - 1]) / (ts[i] - ts[i - 1]);
        tail += 0.5 * (b - a) * (lerp(a) + lerp(b));
    }
    let at = ts
        .iter()
        .position(|&x| x >= t)
        .map_or(0.0, |i| es[i]);
    TailCheck {
        t,
        tail,
        weighted_tail: t * t * tail,
        ratio: if tail > 0.0 { at / tail } else { 0.0 },
        relative_tail: if report.initial > 0.0 { tail / report.initial } else { 0.0 },
    }
}

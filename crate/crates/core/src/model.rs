//! Radial grids, repulsive potentials and radial weights.
//!
//! Everything here is immutable after construction. Potentials are radial:
//! `V(x) = V(|x|)`, with a bounded-variation profile whose distributional
//! derivative is split into an absolutely continuous density and a finite
//! list of atoms (downward jumps).

use std::fmt;

use thiserror::Error;

/// Absolute tolerance per interval in the discrete repulsivity check.
pub const REPULSIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension below 3 (got n = {0})")]
    DimensionBelowThree(usize),
    #[error("radius must be positive (got R = {0})")]
    NonPositiveRadius(f64),
    #[error("grid needs at least 2 points (got N = {0})")]
    TooFewPoints(usize),
    #[error("potential evaluated at nonpositive radius r = {0}")]
    NonPositiveArgument(f64),
    #[error("weight exponent delta must lie in (0, 1) (got {0})")]
    DeltaOutOfRange(f64),
    #[error("repulsivity constant C_V must be positive (got {0})")]
    NonPositiveRepulsivity(f64),
    #[error("weight exponent s must be positive (got {0})")]
    NonPositiveExponent(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
}

/// Uniform radial mesh `r_j = j * dr`, `j = 1..=N`, with `R = N * dr`.
///
/// Indices in code are zero based: `r(i) = (i + 1) * dr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    dimension: usize,
    points: usize,
    dr: f64,
}

impl RadialGrid {
    pub fn new(dimension: usize, radius: f64, points: usize) -> Result<Self, ModelError> {
        if dimension < 3 {
            return Err(ModelError::DimensionBelowThree(dimension));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(ModelError::NonPositiveRadius(radius));
        }
        if points < 2 {
            return Err(ModelError::TooFewPoints(points));
        }
        Ok(Self {
            dimension,
            points,
            dr: radius / points as f64,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn radius(&self) -> f64 {
        self.points as f64 * self.dr
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dr
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.r(i)).collect()
    }

    /// Same spacing, twice the radius. Used by the (N, R) -> (2N, 2R) refinement.
    pub fn doubled(&self) -> Self {
        Self {
            points: 2 * self.points,
            ..*self
        }
    }

    pub fn with_dimension(&self, dimension: usize) -> Result<Self, ModelError> {
        Self::new(dimension, self.radius(), self.points)
    }
}

/// Shorthand for [`RadialGrid::new`].
pub fn make_grid(dimension: usize, radius: f64, points: usize) -> Result<RadialGrid, ModelError> {
    RadialGrid::new(dimension, radius, points)
}

/// A jump of the potential profile at `location`; `size = V^R(a) - V^L(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub size: f64,
}

/// Piecewise linear profile through `(r, V)` samples, plus explicit atoms.
///
/// Between samples the profile is interpolated linearly; outside the table it
/// is held constant. Atoms are added on top with the right-limit convention.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedBv {
    r: Vec<f64>,
    v: Vec<f64>,
    atoms: Vec<Atom>,
}

impl TabulatedBv {
    pub fn new(r: Vec<f64>, v: Vec<f64>, mut atoms: Vec<Atom>) -> Result<Self, ModelError> {
        if r.len() != v.len() || r.len() < 2 {
            return Err(ModelError::InvalidPotential(
                "table needs at least two (r, V) rows".into(),
            ));
        }
        if r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidPotential(
                "table radii must be positive and strictly increasing".into(),
            ));
        }
        if v.iter().chain(atoms.iter().map(|a| &a.location)).any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidPotential("non-finite table entry".into()));
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(Self { r, v, atoms })
    }

    /// Parses whitespace or comma separated `r V` rows; `#` starts a comment.
    pub fn parse(text: &str, atoms: Vec<Atom>) -> Result<Self, ModelError> {
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|c| !c.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(ModelError::InvalidPotential(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    ModelError::InvalidPotential(format!("line {}: bad number {s:?}", lineno + 1))
                })
            };
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::new(r, v, atoms)
    }

    fn continuous(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return self.v[0];
        }
        if x >= self.r[n - 1] {
            return self.v[n - 1];
        }
        let k = self.r.partition_point(|&ri| ri <= x) - 1;
        let t = (x - self.r[k]) / (self.r[k + 1] - self.r[k]);
        self.v[k] + t * (self.v[k + 1] - self.v[k])
    }

    fn slope(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] || x >= self.r[n - 1] {
            return 0.0;
        }
        let k = self.r.partition_point(|&ri| ri <= x) - 1;
        (self.v[k + 1] - self.v[k]) / (self.r[k + 1] - self.r[k])
    }

    fn value(&self, x: f64) -> f64 {
        let jumps: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location <= x)
            .map(|a| a.size)
            .sum();
        self.continuous(x) + jumps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `g / r`
    Coulomb { g: f64 },
    /// `g e^{-r} / r`
    Yukawa { g: f64 },
    /// `g (1/r on r < 1, r^{-delta}/2 on r >= 1)`
    Prototype { g: f64, delta: f64 },
    Tabulated(TabulatedBv),
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "zero"),
            PotentialKind::Coulomb { .. } => write!(f, "coulomb"),
            PotentialKind::Yukawa { .. } => write!(f, "yukawa"),
            PotentialKind::Prototype { .. } => write!(f, "prototype"),
            PotentialKind::Tabulated(_) => write!(f, "tabulated"),
        }
    }
}

/// A radial potential together with its repulsivity constant `C_V` and
/// short-range exponent `delta_V` (`+inf` for exponentially decaying or zero
/// potentials).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    repulsivity: f64,
    short_range: f64,
    atoms: Vec<Atom>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            repulsivity: 1.0,
            short_range: f64::INFINITY,
            atoms: Vec::new(),
        }
    }

    pub fn coulomb(g: f64) -> Self {
        Self {
            kind: PotentialKind::Coulomb { g },
            repulsivity: 1.0,
            short_range: 1.0,
            atoms: Vec::new(),
        }
    }

    pub fn yukawa(g: f64) -> Self {
        Self {
            kind: PotentialKind::Yukawa { g },
            repulsivity: 1.0,
            short_range: f64::INFINITY,
            atoms: Vec::new(),
        }
    }

    pub fn prototype(g: f64, delta: f64) -> Self {
        Self {
            kind: PotentialKind::Prototype { g, delta },
            repulsivity: delta.min(1.0),
            short_range: delta,
            atoms: vec![Atom {
                location: 1.0,
                size: -0.5 * g,
            }],
        }
    }

    pub fn tabulated(table: TabulatedBv, repulsivity: f64, short_range: f64) -> Self {
        let atoms = table.atoms.clone();
        Self {
            kind: PotentialKind::Tabulated(table),
            repulsivity,
            short_range,
            atoms,
        }
    }

    pub fn with_repulsivity(mut self, c_v: f64) -> Self {
        self.repulsivity = c_v;
        self
    }

    pub fn with_short_range(mut self, delta_v: f64) -> Self {
        self.short_range = delta_v;
        self
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    /// `C_V`.
    pub fn repulsivity(&self) -> f64 {
        self.repulsivity
    }

    /// `delta_V`.
    pub fn short_range(&self) -> f64 {
        self.short_range
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    pub fn eval(&self, r: f64) -> Result<f64, ModelError> {
        if !(r > 0.0) {
            return Err(ModelError::NonPositiveArgument(r));
        }
        Ok(self.value(r))
    }

    /// `V(r)` for `r > 0`, right-continuous across jumps.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Coulomb { g } => g / r,
            PotentialKind::Yukawa { g } => g * (-r).exp() / r,
            PotentialKind::Prototype { g, delta } => {
                if r < 1.0 {
                    g / r
                } else {
                    0.5 * g * r.powf(-delta)
                }
            }
            PotentialKind::Tabulated(t) => t.value(r),
        }
    }

    /// Density of the absolutely continuous part of `dV`.
    #[inline]
    pub fn density(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Coulomb { g } => -g / (r * r),
            PotentialKind::Yukawa { g } => -g * (-r).exp() * (1.0 / r + 1.0 / (r * r)),
            PotentialKind::Prototype { g, delta } => {
                if r < 1.0 {
                    -g / (r * r)
                } else {
                    -0.5 * g * delta * r.powf(-delta - 1.0)
                }
            }
            PotentialKind::Tabulated(t) => t.slope(r),
        }
    }

    /// Atoms located in the half-open interval `(a, b]`.
    pub fn atoms_in(&self, a: f64, b: f64) -> impl Iterator<Item = &Atom> {
        self.atoms
            .iter()
            .filter(move |at| at.location > a && at.location <= b)
    }

    /// Nonnegativity, `r V` bounded on `(0, 1]`, `V` bounded on `[1, R]`, and
    /// downward atoms, all sampled on the grid.
    pub fn check_hypotheses(&self, grid: &RadialGrid) -> Result<(), ModelError> {
        if !(self.repulsivity > 0.0) {
            return Err(ModelError::NonPositiveRepulsivity(self.repulsivity));
        }
        if let Some(a) = self.atoms.iter().find(|a| a.size > 0.0) {
            return Err(ModelError::InvalidPotential(format!(
                "upward jump {} at r = {}",
                a.size, a.location
            )));
        }
        let mut r_v_max: f64 = 0.0;
        for i in 0..grid.len() {
            let r = grid.r(i);
            let v = self.value(r);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidPotential(format!(
                    "V({r}) = {v} is not a finite nonnegative value"
                )));
            }
            if r <= 1.0 {
                r_v_max = r_v_max.max(r * v);
            }
        }
        if !r_v_max.is_finite() {
            return Err(ModelError::InvalidPotential("r V unbounded near 0".into()));
        }
        Ok(())
    }
}

/// Outcome of [`check_repulsive`].
#[derive(Debug, Clone, PartialEq)]
pub enum Repulsivity {
    Pass,
    Fail(RepulsivityWitness),
}

impl Repulsivity {
    pub fn passed(&self) -> bool {
        matches!(self, Repulsivity::Pass)
    }
}

/// First interval `(left, right]` where `increment > allowed + tol`.
/// For an upward atom `left == right == location`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepulsivityWitness {
    pub left: f64,
    pub right: f64,
    pub increment: f64,
    pub allowed: f64,
}

/// Discrete check of `dV <= -C_V (r + 1)^{-1} V dr` on consecutive grid
/// intervals, midpoint rule for the right side, atoms compared exactly.
pub fn check_repulsive(p: &PotentialSpec, grid: &RadialGrid, c_v: f64) -> Repulsivity {
    for a in p.atoms() {
        if a.size > 0.0 {
            return Repulsivity::Fail(RepulsivityWitness {
                left: a.location,
                right: a.location,
                increment: a.size,
                allowed: 0.0,
            });
        }
    }
    let rhs = |a: f64, b: f64| -> f64 {
        let m = 0.5 * (a + b);
        -c_v * (b - a) * p.value(m) / (m + 1.0)
    };
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid.r(i), grid.r(i + 1));
        let increment = p.value(b) - p.value(a);
        // Split the measure at atoms so the midpoint rule only sees the
        // continuous part.
        let mut allowed = 0.0;
        let mut left = a;
        for at in p.atoms_in(a, b) {
            allowed += rhs(left, at.location) + at.size;
            left = at.location;
        }
        allowed += rhs(left, b);
        if increment > allowed + REPULSIVITY_TOL {
            return Repulsivity::Fail(RepulsivityWitness {
                left: a,
                right: b,
                increment,
                allowed,
            });
        }
    }
    Repulsivity::Pass
}

/// `w(r) = 1 - C_V/(C_V + delta) (1 + r)^{-delta}` and its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsiveWeight {
    c_v: f64,
    delta: f64,
}

impl RepulsiveWeight {
    pub fn new(c_v: f64, delta: f64) -> Result<Self, ModelError> {
        if !(c_v > 0.0) {
            return Err(ModelError::NonPositiveRepulsivity(c_v));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ModelError::DeltaOutOfRange(delta));
        }
        Ok(Self { c_v, delta })
    }

    pub fn c_v(&self) -> f64 {
        self.c_v
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        1.0 - self.c_v / (self.c_v + self.delta) * (1.0 + r).powf(-self.delta)
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        self.delta * self.c_v / (self.c_v + self.delta) * (r + 1.0).powf(-1.0 - self.delta)
    }
}

pub fn weight_w(r: f64, c_v: f64, delta: f64) -> Result<f64, ModelError> {
    Ok(RepulsiveWeight::new(c_v, delta)?.value(r))
}

pub fn weight_w_prime(r: f64, c_v: f64, delta: f64) -> Result<f64, ModelError> {
    Ok(RepulsiveWeight::new(c_v, delta)?.derivative(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightForm {
    /// `(1 + r)^{-s}`
    #[default]
    OnePlusR,
    /// `<r>^{-s} = (1 + r^2)^{-s/2}`
    Japanese,
}

impl fmt::Display for WeightForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightForm::OnePlusR => write!(f, "one_plus_r"),
            WeightForm::Japanese => write!(f, "japanese"),
        }
    }
}

/// Decaying radial weight with exponent `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub s: f64,
    pub form: WeightForm,
}

impl WeightSpec {
    pub fn new(s: f64, form: WeightForm) -> Result<Self, ModelError> {
        if !(s > 0.0) {
            return Err(ModelError::NonPositiveExponent(s));
        }
        Ok(Self { s, form })
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match self.form {
            WeightForm::OnePlusR => (1.0 + r).powf(-self.s),
            WeightForm::Japanese => (1.0 + r * r).powf(-0.5 * self.s),
        }
    }

    pub fn sample(&self, grid: &RadialGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(grid.r(i))).collect()
    }
}

//! Sectioned `key = value` experiment configs.
//!
//! ```text
//! # comment
//! [potential]
//! kind = coulomb        # zero | coulomb | yukawa | prototype | tabulated
//! g = 1
//!
//! [numerics]
//! n = 3
//! R = 200
//! N = 4000
//!
//! [verify-bound]
//! h = 1, 0.5, 0.25
//! z = (2, 0.2), (-1, 0)
//! s = 0.75
//! ```
//!
//! Lists are comma separated; complex entries are written `(re, im)` and a
//! bare real `x` means `(x, 0)`. Every family section present in the file is
//! run, in the order of [`FAMILIES`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Atom, ModelError, PotentialSpec, TabulatedBv, WeightForm};
use crate::verifier::{halving_sequence, DEFAULT_SEED, DEFAULT_SLACK};

pub const FAMILIES: [&str; 6] = [
    "verify-bound",
    "lowfreq-bound",
    "sharpness",
    "energy-identity",
    "wave-decay",
    "special-fn",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown section: [{0}]")]
    UnknownSection(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("missing key: {0}")]
    MissingKey(String),
    #[error("empty sweep: {0}")]
    EmptySweep(String),
    #[error("z on [0,∞): ({0}, {1})")]
    ZOnAxis(f64, f64),
    #[error("{key}: bad value {value:?}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("no experiment section; expected one of {}", FAMILIES.join(", "))]
    NoExperiment,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub n: usize,
    pub radius: f64,
    pub points: usize,
    pub l_max: usize,
    pub slack: f64,
    pub seed: u64,
    pub refine: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n: 3,
            radius: 200.0,
            points: 4000,
            l_max: 400,
            slack: DEFAULT_SLACK,
            seed: DEFAULT_SEED,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSweep {
    pub h: Vec<f64>,
    pub z: Vec<Complex64>,
    pub s: Vec<f64>,
    pub form: WeightForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowFreqSweep {
    pub h: Vec<f64>,
    pub z: Vec<Complex64>,
    /// Paired `(s1, s2)` exponents.
    pub pairs: Vec<(f64, f64)>,
    pub form: WeightForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessSweep {
    /// Quasimode grid `h × energy × s`.
    pub h: Vec<f64>,
    pub energy: Vec<f64>,
    pub s: Vec<f64>,
    /// Weight-exponent experiment exponents.
    pub exponent_s: Vec<f64>,
    /// Weight-sum experiment totals `s1 + s2`.
    pub s_sum: Vec<f64>,
    pub eps: Vec<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySweep {
    pub h: Vec<f64>,
    pub energy: Vec<f64>,
    pub eps: Vec<f64>,
    pub l: Vec<usize>,
    /// Exponent of the repulsive weight `w`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSweep {
    pub s: Vec<f64>,
    pub horizon: f64,
    pub support: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialSweep {
    pub nu: Vec<f64>,
    pub w: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    VerifyBound(BoundSweep),
    LowFreqBound(LowFreqSweep),
    Sharpness(SharpnessSweep),
    EnergyIdentity(EnergySweep),
    WaveDecay(WaveSweep),
    SpecialFn(SpecialSweep),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::VerifyBound(_) => FAMILIES[0],
            Family::LowFreqBound(_) => FAMILIES[1],
            Family::Sharpness(_) => FAMILIES[2],
            Family::EnergyIdentity(_) => FAMILIES[3],
            Family::WaveDecay(_) => FAMILIES[4],
            Family::SpecialFn(_) => FAMILIES[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    pub numerics: Numerics,
    pub families: Vec<Family>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// `base` resolves relative table paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut sections = split_sections(text)?;
        let potential = match sections.remove("potential") {
            Some(s) => parse_potential(s, base)?,
            None => return Err(ConfigError::MissingKey("[potential]".into())),
        };
        let numerics = match sections.remove("numerics") {
            Some(s) => parse_numerics(s)?,
            None => Numerics::default(),
        };
        let mut families = Vec::new();
        for name in FAMILIES {
            if let Some(s) = sections.remove(name) {
                families.push(parse_family(name, s)?);
            }
        }
        if let Some(name) = sections.keys().next() {
            return Err(ConfigError::UnknownSection(name.clone()));
        }
        if families.is_empty() {
            return Err(ConfigError::NoExperiment);
        }
        Ok(Self {
            potential,
            numerics,
            families,
        })
    }
}

/// Raw entries of one section; keys are removed as they are consumed.
struct Section {
    name: String,
    entries: BTreeMap<String, String>,
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut out: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                })?
                .trim()
                .to_string();
            if out.contains_key(&name) {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("section [{name}] repeated"),
                });
            }
            out.insert(
                name.clone(),
                Section {
                    name: name.clone(),
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim().to_string();
        let Some(section) = current.as_ref() else {
            return Err(ConfigError::UnknownKey(key));
        };
        let sec = out.get_mut(section).expect("section registered");
        if sec.entries.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(format!("{section}.{key}")));
        }
    }
    Ok(out)
}

impl Section {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn bad(&self, key: &str, value: &str) -> ConfigError {
        ConfigError::BadValue {
            key: format!("{}.{key}", self.name),
            value: value.to_string(),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<f64>().map(Some).map_err(|_| self.bad(key, &v)),
        }
    }

    fn integer(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| self.bad(key, &v)),
        }
    }

    fn reals(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        let items = split_list(&v);
        if items.is_empty() {
            return Err(ConfigError::EmptySweep(key.into()));
        }
        items
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| self.bad(key, s)))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn sweep(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.reals(key)?
            .ok_or_else(|| ConfigError::MissingKey(format!("{}.{key}", self.name)))
    }

    fn complexes(&mut self, key: &str) -> Result<Vec<Complex64>, ConfigError> {
        let v = self
            .take(key)
            .ok_or_else(|| ConfigError::MissingKey(format!("{}.{key}", self.name)))?;
        let items = split_list(&v);
        if items.is_empty() {
            return Err(ConfigError::EmptySweep(key.into()));
        }
        items.iter().map(|s| parse_complex(s).ok_or_else(|| self.bad(key, s))).collect()
    }

    fn form(&mut self) -> Result<WeightForm, ConfigError> {
        match self.take("form").as_deref() {
            None | Some("one_plus_r") => Ok(WeightForm::OnePlusR),
            Some("japanese") => Ok(WeightForm::Japanese),
            Some(other) => Err(self.bad("form", other)),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.keys().next() {
            Some(k) => Err(ConfigError::UnknownKey(format!("{}.{k}", self.name))),
            None => Ok(()),
        }
    }
}

/// Top-level comma split, ignoring commas inside parentheses.
fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let (a, b) = inner.split_once(',')?;
        Some(Complex64::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
    } else {
        Some(Complex64::new(s.parse().ok()?, 0.0))
    }
}

fn parse_potential(mut sec: Section, base: &Path) -> Result<PotentialSpec, ConfigError> {
    let kind = sec
        .take("kind")
        .ok_or_else(|| ConfigError::MissingKey("potential.kind".into()))?;
    let g = sec.real("g")?.unwrap_or(1.0);
    let delta_v = sec.real("delta_v")?;
    let c_v = sec.real("c_v")?;
    let mut p = match kind.as_str() {
        "zero" => PotentialSpec::zero(),
        "coulomb" => PotentialSpec::coulomb(g),
        "yukawa" => PotentialSpec::yukawa(g),
        "prototype" => PotentialSpec::prototype(g, delta_v.unwrap_or(1.0)),
        "tabulated" => {
            let file = sec
                .take("table")
                .ok_or_else(|| ConfigError::MissingKey("potential.table".into()))?;
            let path = base.join(file);
            let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?;
            let atoms = match sec.take("atoms") {
                None => Vec::new(),
                Some(v) => split_list(&v)
                    .iter()
                    .map(|s| {
                        parse_complex(s)
                            .map(|c| Atom {
                                location: c.re,
                                size: c.im,
                            })
                            .ok_or_else(|| sec.bad("atoms", s))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let table = TabulatedBv::parse(&text, atoms)?;
            let c = c_v.ok_or_else(|| ConfigError::MissingKey("potential.c_v".into()))?;
            let d = delta_v.ok_or_else(|| ConfigError::MissingKey("potential.delta_v".into()))?;
            PotentialSpec::tabulated(table, c, d)
        }
        other => return Err(sec.bad("kind", other)),
    };
    if let Some(c) = c_v {
        p = p.with_repulsivity(c);
    }
    if let (Some(d), false) = (delta_v, matches!(kind.as_str(), "prototype" | "tabulated")) {
        p = p.with_short_range(d);
    }
    sec.finish()?;
    Ok(p)
}

fn parse_numerics(mut sec: Section) -> Result<Numerics, ConfigError> {
    let d = Numerics::default();
    let refine = match sec.take("refine").as_deref() {
        None => d.refine,
        Some("true") => true,
        Some("false") => false,
        Some(other) => return Err(sec.bad("refine", other)),
    };
    let num = Numerics {
        n: sec.integer("n")?.map_or(d.n, |v| v as usize),
        radius: sec.real("R")?.unwrap_or(d.radius),
        points: sec.integer("N")?.map_or(d.points, |v| v as usize),
        l_max: sec.integer("l_max")?.map_or(d.l_max, |v| v as usize),
        slack: sec.real("slack")?.unwrap_or(d.slack),
        seed: sec.integer("seed")?.unwrap_or(d.seed),
        refine,
    };
    sec.finish()?;
    if !(num.slack >= 0.0) {
        return Err(ConfigError::Invalid(format!("slack must be nonnegative (got {})", num.slack)));
    }
    Ok(num)
}

fn check_z(z: &[Complex64]) -> Result<(), ConfigError> {
    match z.iter().find(|z| z.im == 0.0 && z.re >= 0.0) {
        Some(z) => Err(ConfigError::ZOnAxis(z.re, z.im)),
        None => Ok(()),
    }
}

fn positive(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    match v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        Some(x) => Err(ConfigError::Invalid(format!("{key} must be positive (got {x})"))),
        None => Ok(()),
    }
}

fn parse_family(name: &str, mut sec: Section) -> Result<Family, ConfigError> {
    let family = match name {
        "verify-bound" => {
            let h = sec.sweep("h")?;
            let z = sec.complexes("z")?;
            let s = sec.sweep("s")?;
            positive("h", &h)?;
            check_z(&z)?;
            Family::VerifyBound(BoundSweep {
                h,
                z,
                s,
                form: sec.form()?,
            })
        }
        "lowfreq-bound" => {
            let h = sec.sweep("h")?;
            let z = sec.complexes("z")?;
            let s1 = sec.sweep("s1")?;
            let s2 = sec.sweep("s2")?;
            positive("h", &h)?;
            check_z(&z)?;
            if s1.len() != s2.len() {
                return Err(ConfigError::Invalid("s1 and s2 must have equal length".into()));
            }
            Family::LowFreqBound(LowFreqSweep {
                h,
                z,
                pairs: s1.into_iter().zip(s2).collect(),
                form: sec.form()?,
            })
        }
        "sharpness" => {
            let h = sec.sweep("h")?;
            let energy = sec.sweep("energy")?;
            let s = sec.reals("s")?.unwrap_or_else(|| vec![0.75]);
            let exponent_s = sec.sweep("exponent_s")?;
            let s_sum = sec.sweep("s_sum")?;
            let eps = match (sec.reals("eps")?, sec.integer("halvings")?) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Invalid("give either eps or halvings".into()));
                }
                (Some(e), None) => e,
                (None, Some(k)) if k > 0 => halving_sequence(k as u32),
                (None, Some(_)) => return Err(ConfigError::EmptySweep("eps".into())),
                (None, None) => return Err(ConfigError::MissingKey("sharpness.eps".into())),
            };
            positive("h", &h)?;
            positive("energy", &energy)?;
            positive("eps", &eps)?;
            Family::Sharpness(SharpnessSweep {
                h,
                energy,
                s,
                exponent_s,
                s_sum,
                eps,
                eta: sec.real("eta")?.unwrap_or(0.05),
            })
        }
        "energy-identity" => {
            let h = sec.sweep("h")?;
            let energy = sec.sweep("energy")?;
            let eps = sec.sweep("eps")?;
            let l = sec.reals("l")?.unwrap_or_else(|| vec![0.0]);
            positive("h", &h)?;
            positive("eps", &eps)?;
            if l.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
                return Err(ConfigError::Invalid("l must be nonnegative integers".into()));
            }
            Family::EnergyIdentity(EnergySweep {
                h,
                energy,
                eps,
                l: l.into_iter().map(|x| x as usize).collect(),
                delta: sec.real("delta")?.unwrap_or(0.5),
            })
        }
        "wave-decay" => {
            let s = sec.sweep("s")?;
            let horizon = sec
                .real("horizon")?
                .ok_or_else(|| ConfigError::MissingKey("wave-decay.horizon".into()))?;
            Family::WaveDecay(WaveSweep {
                s,
                horizon,
                support: sec.real("support")?.unwrap_or(2.0),
                dt: sec.real("dt")?.unwrap_or(0.25),
            })
        }
        "special-fn" => Family::SpecialFn(SpecialSweep {
            nu: sec.sweep("nu")?,
            w: sec.complexes("w")?,
        }),
        _ => unreachable!("family names come from FAMILIES"),
    };
    sec.finish()?;
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    const BASE: &str = "[potential]\nkind = coulomb\n[numerics]\nN = 100\nR = 10\n";

    #[test]
    fn verify_section() {
        let cfg = parse(&format!("{BASE}[verify-bound]\nh = 1, 0.5\nz = (2, 0.2), -1\ns = 0.75\n")).unwrap();
        assert_eq!(cfg.numerics.points, 100);
        let Family::VerifyBound(b) = &cfg.families[0] else { panic!() };
        assert_eq!(b.h, vec![1.0, 0.5]);
        assert_eq!(b.z, vec![Complex64::new(2.0, 0.2), Complex64::new(-1.0, 0.0)]);
    }

    #[test]
    fn empty_sweep_names_key() {
        let err = parse(&format!("{BASE}[verify-bound]\nh =\nz = -1\ns = 0.75\n")).unwrap_err();
        assert_eq!(err.to_string(), "empty sweep: h");
    }

    #[test]
    fn z_on_axis() {
        let err = parse(&format!("{BASE}[verify-bound]\nh = 1\nz = (4, 0)\ns = 0.75\n")).unwrap_err();
        assert!(err.to_string().starts_with("z on [0,∞)"));
    }

    #[test]
    fn unknown_key_named() {
        let err = parse(&format!("{BASE}[verify-bound]\nh = 1\nz = -1\ns = 0.75\nbogus = 3\n")).unwrap_err();
        assert_eq!(err.to_string(), "unknown key: verify-bound.bogus");
        let err = parse("[potential]\nkind = zero\ncolour = red\n[wave-decay]\ns = 2\nhorizon = 1\n").unwrap_err();
        assert_eq!(err.to_string(), "unknown key: potential.colour");
    }

    #[test]
    fn no_family() {
        assert!(matches!(parse(BASE), Err(ConfigError::NoExperiment)));
        assert!(matches!(parse(&format!("{BASE}[nope]\n")), Err(ConfigError::UnknownSection(_))));
    }

    #[test]
    fn list_split() {
        assert_eq!(split_list("(1, 2), 3"), vec!["(1, 2)", "3"]);
        assert!(split_list("  ").is_empty());
    }
}

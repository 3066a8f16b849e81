//! Dispatch of the experiment families onto the library.

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{
    BoundSweep, EnergySweep, ExperimentConfig, Family, LowFreqSweep, Numerics, SharpnessSweep, SpecialSweep,
    WaveSweep,
};
use super::report::{Cell, Series, Table};
use crate::energymethod::{check_wf_identity, check_wf_lowerbound, solve_sector, Absorption, SectorParams};
use crate::model::{make_grid, PotentialSpec, RadialGrid, RepulsiveWeight};
use crate::sector::SectorOperator;
use crate::specfun::{macdonald_k, macdonald_k_series};
use crate::verifier::{
    sharpness_quasimode, sharpness_weight_exponent, sharpness_weight_sum, verify_lowfreq_bound,
    verify_semiclassical_bound, BoundReport, ResolventQuery, StandardBump, Verdict, VerifyError, VerifyOptions,
};
use crate::wave::{bump, bump_data, decay_experiment, DecaySetup};

/// Ratio window accepted by the quasimode scaling rows.
const SCALING_TOL: f64 = 0.1;
/// Relative defect accepted between the two Macdonald evaluations.
const SPECIAL_TOL: f64 = 1e-7;
/// Conservation tolerance for the unweighted wave energy.
const WAVE_DRIFT_TOL: f64 = 1e-8;

/// Results of one family: a CSV table, optional charts, and one verdict per check.
#[derive(Debug, Clone)]
pub struct FamilyOutcome {
    pub name: &'static str,
    pub table: Table,
    pub charts: Vec<(String, Series)>,
    pub verdicts: Vec<Verdict>,
}

impl FamilyOutcome {
    pub fn overall(&self) -> Verdict {
        if self.verdicts.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if self.verdicts.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn summary(&self) -> String {
        let count = |v: Verdict| self.verdicts.iter().filter(|x| **x == v).count();
        format!(
            "{}: {} rows, {} pass, {} fail, {} inconclusive -> {}",
            self.name,
            self.table.rows.len(),
            count(Verdict::Pass),
            count(Verdict::Fail),
            count(Verdict::Inconclusive),
            self.overall()
        )
    }
}

pub fn run_family(cfg: &ExperimentConfig, family: &Family) -> Result<FamilyOutcome, String> {
    match family {
        Family::VerifyBound(s) => verify_bound(cfg, s),
        Family::LowFreqBound(s) => lowfreq_bound(cfg, s),
        Family::Sharpness(s) => sharpness(s),
        Family::EnergyIdentity(s) => energy_identity(cfg, s),
        Family::WaveDecay(s) => wave_decay(cfg, s),
        Family::SpecialFn(s) => special_fn(s),
    }
}

fn grid(num: &Numerics) -> Result<RadialGrid, String> {
    make_grid(num.n, num.radius, num.points).map_err(|e| e.to_string())
}

pub const BOUND_COLUMNS: [&str; 22] = [
    "index",
    "potential",
    "n",
    "h",
    "re_z",
    "im_z",
    "s1",
    "s2",
    "form",
    "delta",
    "c_v",
    "prefactor",
    "bound",
    "measured",
    "margin",
    "refined_measured",
    "refined_margin",
    "l_used",
    "cutoff_hit",
    "converged",
    "max_residual",
    "verdict",
];

fn bound_row(index: usize, r: &BoundReport) -> Vec<Cell> {
    let (rm, rmargin) = r.refined.as_ref().map_or((f64::NAN, f64::NAN), |x| (x.measured, x.margin));
    vec![
        index.into(),
        r.potential.clone().into(),
        r.n.into(),
        r.h.into(),
        r.z.re.into(),
        r.z.im.into(),
        r.s1.into(),
        r.s2.into(),
        r.form.to_string().into(),
        r.delta.into(),
        r.c_v.into(),
        r.prefactor.into(),
        r.bound.into(),
        r.measured.into(),
        r.margin.into(),
        rm.into(),
        rmargin.into(),
        r.l_used.into(),
        r.cutoff_hit.into(),
        r.converged.into(),
        r.max_residual.into(),
        r.verdict.to_string().into(),
    ]
}

fn failed_solve_row(index: usize, q: &ResolventQuery, name: &str) -> Vec<Cell> {
    let nan = || Cell::Real(f64::NAN);
    let mut row = vec![
        index.into(),
        name.into(),
        q.grid.dimension().into(),
        q.h.into(),
        q.z.re.into(),
        q.z.im.into(),
        q.s1.into(),
        q.s2.into(),
        q.form.to_string().into(),
    ];
    row.extend((0..8).map(|_| nan()));
    row.extend([0usize.into(), false.into(), false.into(), nan(), Verdict::Inconclusive.to_string().into()]);
    row
}

type Verify = fn(&ResolventQuery, &VerifyOptions) -> Result<BoundReport, VerifyError>;

fn run_queries(
    name: &'static str,
    cfg: &ExperimentConfig,
    queries: Vec<ResolventQuery>,
    verify: Verify,
) -> Result<FamilyOutcome, String> {
    let opts = VerifyOptions {
        slack: cfg.numerics.slack,
        refine: cfg.numerics.refine,
        alpha: None,
    };
    let results: Vec<Result<BoundReport, VerifyError>> = queries.par_iter().map(|q| verify(q, &opts)).collect();
    let mut table = Table::new(name, &BOUND_COLUMNS);
    let mut verdicts = Vec::new();
    for (i, (q, res)) in queries.iter().zip(results).enumerate() {
        match res {
            Ok(r) => {
                verdicts.push(r.verdict);
                table.push(bound_row(i, &r));
            }
            Err(VerifyError::Solve(_)) => {
                verdicts.push(Verdict::Inconclusive);
                table.push(failed_solve_row(i, q, &cfg.potential.name()));
            }
            Err(e) => return Err(format!("{name} row {i}: {e}")),
        }
    }
    Ok(FamilyOutcome {
        name,
        table,
        charts: Vec::new(),
        verdicts,
    })
}

fn query(cfg: &ExperimentConfig, g: RadialGrid, h: f64, z: Complex64, s1: f64, s2: f64) -> ResolventQuery {
    let mut q = ResolventQuery::new(cfg.potential.clone(), g, h, z, s1, s2);
    q.l_max = cfg.numerics.l_max;
    q.seed = cfg.numerics.seed;
    q
}

fn verify_bound(cfg: &ExperimentConfig, s: &BoundSweep) -> Result<FamilyOutcome, String> {
    let g = grid(&cfg.numerics)?;
    let mut queries = Vec::new();
    for &h in &s.h {
        for &z in &s.z {
            for &e in &s.s {
                let mut q = query(cfg, g, h, z, e, e);
                q.form = s.form;
                queries.push(q);
            }
        }
    }
    run_queries("verify-bound", cfg, queries, verify_semiclassical_bound)
}

fn lowfreq_bound(cfg: &ExperimentConfig, s: &LowFreqSweep) -> Result<FamilyOutcome, String> {
    let g = grid(&cfg.numerics)?;
    let mut queries = Vec::new();
    for &h in &s.h {
        for &z in &s.z {
            for &(s1, s2) in &s.pairs {
                let mut q = query(cfg, g, h, z, s1, s2);
                q.form = s.form;
                queries.push(q);
            }
        }
    }
    run_queries("lowfreq-bound", cfg, queries, verify_lowfreq_bound)
}

pub const SHARPNESS_COLUMNS: [&str; 8] = ["index", "test", "h", "energy", "s", "eps", "value", "verdict"];

fn sharpness(sw: &SharpnessSweep) -> Result<FamilyOutcome, String> {
    let mut table = Table::new("sharpness", &SHARPNESS_COLUMNS);
    let mut verdicts = Vec::new();
    let mut push = |table: &mut Table, test: &str, h: f64, e: f64, s: f64, eps: f64, value: f64, v: Option<Verdict>| {
        let idx = table.rows.len();
        let label = v.map_or_else(String::new, |v| v.to_string());
        table.push(vec![
            idx.into(),
            test.into(),
            h.into(),
            e.into(),
            s.into(),
            eps.into(),
            value.into(),
            label.into(),
        ]);
        if let Some(v) = v {
            verdicts.push(v);
        }
    };
    let nan = f64::NAN;
    let mut grid_points = Vec::new();
    for &s in &sw.s {
        for &e in &sw.energy {
            for &h in &sw.h {
                grid_points.push((h, e, s));
            }
        }
    }
    let reports: Vec<_> = grid_points
        .par_iter()
        .map(|&(h, e, s)| sharpness_quasimode(h, e, s, &StandardBump))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for r in &reports {
        let v = if r.quadrature_flag { Verdict::Inconclusive } else { Verdict::Pass };
        push(&mut table, "quasimode", r.h, r.e, r.s, nan, r.ratio, Some(v));
    }
    let within = |x: f64, target: f64| (x / target - 1.0).abs() <= SCALING_TOL;
    for a in &reports {
        for b in &reports {
            if a.s != b.s {
                continue;
            }
            if a.e == b.e && b.h == 0.5 * a.h {
                let ratio = b.ratio / a.ratio;
                let v = if within(ratio, 2.0) { Verdict::Pass } else { Verdict::Fail };
                push(&mut table, "quasimode-h-halving", b.h, b.e, b.s, nan, ratio, Some(v));
            }
            if a.h == b.h && b.e == 4.0 * a.e {
                let ratio = b.ratio / a.ratio;
                let v = if within(ratio, 0.5) { Verdict::Pass } else { Verdict::Fail };
                push(&mut table, "quasimode-e-quadrupling", b.h, b.e, b.s, nan, ratio, Some(v));
            }
        }
    }
    let e0 = sw.energy[0];
    for &s in &sw.exponent_s {
        let r = sharpness_weight_exponent(s, e0, 1.0, &sw.eps).map_err(|e| e.to_string())?;
        for row in &r.rows {
            push(&mut table, "weight-exponent", 1.0, e0, s, row.eps, row.value, None);
        }
        let expected = if s < 0.5 {
            r.monotone_growth && !r.saturated
        } else {
            r.saturated
        };
        let v = if r.transform_flag {
            Verdict::Inconclusive
        } else if expected {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let last = r.rows.last().map_or(nan, |x| x.value);
        push(&mut table, "weight-exponent-summary", 1.0, e0, s, nan, last, Some(v));
    }
    for &total in &sw.s_sum {
        let r = sharpness_weight_sum(0.5 * total, 0.5 * total, sw.eta, 1.0, &sw.eps).map_err(|e| e.to_string())?;
        for row in &r.rows {
            push(&mut table, "weight-sum", 1.0, nan, total, row.eps, row.value, None);
        }
        let expected = r.divergent == (total < 2.0);
        let v = if expected { Verdict::Pass } else { Verdict::Fail };
        let last = r.rows.last().map_or(nan, |x| x.value);
        push(&mut table, "weight-sum-summary", 1.0, nan, total, nan, last, Some(v));
    }
    Ok(FamilyOutcome {
        name: "sharpness",
        table,
        charts: Vec::new(),
        verdicts,
    })
}

pub const ENERGY_COLUMNS: [&str; 14] = [
    "index",
    "potential",
    "l",
    "h",
    "energy",
    "eps",
    "sign",
    "min_margin",
    "tolerance",
    "scale",
    "violations",
    "atom_min",
    "identity_defect",
    "verdict",
];

/// `g = χ(r - 2)`, supported in `[1, 3]`.
pub fn energy_source(grid: &RadialGrid) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| Complex64::new(bump(grid.r(i) - 2.0), 0.0))
        .collect()
}

fn energy_identity(cfg: &ExperimentConfig, sw: &EnergySweep) -> Result<FamilyOutcome, String> {
    let g = grid(&cfg.numerics)?;
    let p: &PotentialSpec = &cfg.potential;
    let weight = RepulsiveWeight::new(p.repulsivity(), sw.delta).map_err(|e| e.to_string())?;
    let source = energy_source(&g);
    let mut points = Vec::new();
    for &l in &sw.l {
        for &h in &sw.h {
            for &e in &sw.energy {
                for &eps in &sw.eps {
                    for sign in [Absorption::Plus, Absorption::Minus] {
                        points.push((l, h, e, eps, sign));
                    }
                }
            }
        }
    }
    let rows: Vec<_> = points
        .par_iter()
        .map(|&(l, h, e, eps, sign)| {
            let op = SectorOperator::build(&g, p, h, l);
            let params = SectorParams {
                h,
                nu: op.nu(),
                potential: p.clone(),
            };
            let res = solve_sector(&op, &source, e, eps, sign).map(|u| {
                let rep = check_wf_lowerbound(&u, &source, &params, &weight, e, eps, sign);
                let defect = check_wf_identity(&u, &params, Some(&weight), e, (0.0, g.radius()));
                (rep, defect)
            });
            (l, h, e, eps, sign, res)
        })
        .collect();
    let mut table = Table::new("energy-identity", &ENERGY_COLUMNS);
    let mut verdicts = Vec::new();
    for (i, (l, h, e, eps, sign, res)) in rows.into_iter().enumerate() {
        let label = if sign == Absorption::Plus { "plus" } else { "minus" };
        let mut row: Vec<Cell> = vec![
            i.into(),
            p.name().into(),
            l.into(),
            h.into(),
            e.into(),
            eps.into(),
            label.into(),
        ];
        let verdict = match res {
            Ok((rep, defect)) => {
                let atom_min = rep.atom_terms.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
                let v = if rep.passed() { Verdict::Pass } else { Verdict::Fail };
                row.extend([
                    rep.min_margin.into(),
                    rep.tolerance.into(),
                    rep.scale.into(),
                    rep.violations.len().into(),
                    atom_min.into(),
                    defect.into(),
                ]);
                v
            }
            Err(_) => {
                row.extend((0..6).map(|_| Cell::Real(f64::NAN)));
                Verdict::Inconclusive
            }
        };
        row.push(verdict.to_string().into());
        table.push(row);
        verdicts.push(verdict);
    }
    Ok(FamilyOutcome {
        name: "energy-identity",
        table,
        charts: Vec::new(),
        verdicts,
    })
}

pub const WAVE_COLUMNS: [&str; 8] = ["index", "s", "t", "weighted_energy", "k", "slope", "energy_drift", "verdict"];

fn wave_decay(cfg: &ExperimentConfig, sw: &WaveSweep) -> Result<FamilyOutcome, String> {
    let g = grid(&cfg.numerics)?;
    let v0 = bump_data(&g, sw.support);
    let v1 = vec![0.0; g.len()];
    let setups: Vec<DecaySetup> = sw
        .s
        .iter()
        .map(|&s| {
            let mut d = DecaySetup::new(cfg.potential.clone(), g, s, sw.horizon);
            d.dt = sw.dt;
            d
        })
        .collect();
    for d in &setups {
        d.validate(&v0, &v1).map_err(|e| e.to_string())?;
    }
    let reports = setups
        .par_iter()
        .map(|d| decay_experiment(d, &v0, &v1))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut table = Table::new("wave-decay", &WAVE_COLUMNS);
    let mut verdicts = Vec::new();
    let mut charts = Vec::new();
    for (k, r) in reports.iter().enumerate() {
        let v = if r.decays() && r.energy_drift <= WAVE_DRIFT_TOL {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        verdicts.push(v);
        for j in 0..r.times.len() {
            let idx = table.rows.len();
            table.push(vec![
                idx.into(),
                r.s.into(),
                r.times[j].into(),
                r.weighted[j].into(),
                r.k[j].into(),
                r.slope.into(),
                r.energy_drift.into(),
                v.to_string().into(),
            ]);
        }
        charts.push((
            format!("wave-decay-{k}.svg"),
            Series {
                title: format!("weighted energy, s = {}", r.s),
                x_label: "t".into(),
                y_label: "E_s(t)".into(),
                points: r.times.iter().copied().zip(r.weighted.iter().copied()).collect(),
                log_log: true,
            },
        ));
    }
    Ok(FamilyOutcome {
        name: "wave-decay",
        table,
        charts,
        verdicts,
    })
}

pub const SPECIAL_COLUMNS: [&str; 11] = [
    "index",
    "nu",
    "re_w",
    "im_w",
    "re_k",
    "im_k",
    "re_series",
    "im_series",
    "rel_defect",
    "reduced_accuracy",
    "verdict",
];

fn special_fn(sw: &SpecialSweep) -> Result<FamilyOutcome, String> {
    let mut table = Table::new("special-fn", &SPECIAL_COLUMNS);
    let mut verdicts = Vec::new();
    for &nu in &sw.nu {
        for &w in &sw.w {
            let k = macdonald_k(nu, w).map_err(|e| format!("special-fn: {e}"))?;
            let series = macdonald_k_series(nu, w);
            let defect = (k.value - series).norm() / series.norm().max(f64::MIN_POSITIVE);
            let v = if k.reduced_accuracy {
                Verdict::Inconclusive
            } else if defect <= SPECIAL_TOL {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            let idx = table.rows.len();
            table.push(vec![
                idx.into(),
                nu.into(),
                w.re.into(),
                w.im.into(),
                k.value.re.into(),
                k.value.im.into(),
                series.re.into(),
                series.im.into(),
                defect.into(),
                k.reduced_accuracy.into(),
                v.to_string().into(),
            ]);
            verdicts.push(v);
        }
    }
    Ok(FamilyOutcome {
        name: "special-fn",
        table,
        charts: Vec::new(),
        verdicts,
    })
}

//! Drivers for the reproduction experiments and the bundled reference values
//! they are checked against.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::PsiTable;
use crate::config::{fmt17, Configuration, ModelParams, Species};
use crate::diagnostics::{self, RunStats};
use crate::error::{Error, Result};
use crate::flow::{self, IntegratorOptions, Trajectory};
use crate::measures::{self, MeasurePair};
use crate::potentials::PhaseShift;
use crate::separated::{self, SeparatedMinimizer};

/// `alpha_n` as a multiple of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    HalfN,
    N,
    SevenTenthsN,
    TwoN,
    Custom(f64),
}

impl AlphaRule {
    pub fn coefficient(self) -> f64 {
        match self {
            Self::HalfN => 0.5,
            Self::N => 1.0,
            Self::SevenTenthsN => 0.7,
            Self::TwoN => 2.0,
            Self::Custom(c) => c,
        }
    }

    pub fn alpha(self, n: usize) -> f64 {
        self.coefficient() * n as f64
    }

    pub fn label(self) -> String {
        match self {
            Self::HalfN => "half_n".into(),
            Self::N => "n".into(),
            Self::SevenTenthsN => "seven_tenths_n".into(),
            Self::TwoN => "two_n".into(),
            Self::Custom(c) => format!("custom({c})"),
        }
    }
}

impl std::str::FromStr for AlphaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_n" => Ok(Self::HalfN),
            "n" => Ok(Self::N),
            "seven_tenths_n" => Ok(Self::SevenTenthsN),
            "two_n" => Ok(Self::TwoN),
            _ => {
                let inner = s
                    .strip_prefix("custom(")
                    .and_then(|r| r.strip_suffix(')'))
                    .unwrap_or(s);
                inner
                    .parse::<f64>()
                    .ok()
                    .filter(|c| *c > 0.0 && c.is_finite())
                    .map(Self::Custom)
                    .ok_or_else(|| Error::Parameter(format!("unknown alpha rule '{s}'")))
            }
        }
    }
}

/// One gradient-flow run from the equispaced initial condition.
#[derive(Clone, Debug, Serialize)]
pub struct FlowRun {
    pub params: ModelParams,
    pub rule: AlphaRule,
    pub trajectory: Trajectory,
    pub stats: RunStats,
}

impl FlowRun {
    pub fn final_config(&self) -> &Configuration {
        &self.trajectory.final_state.config
    }
}

pub fn run_flow(
    n: usize,
    rule: AlphaRule,
    a: PhaseShift,
    gamma: f64,
    opts: &IntegratorOptions,
) -> Result<FlowRun> {
    let params = ModelParams::balanced(n, rule.alpha(n), gamma, a)?;
    let c0 = flow::initial_condition_equispaced(n)?;
    let trajectory = flow::integrate(&c0, &params, opts)?;
    if !trajectory.completed {
        return Err(Error::Numerical(format!(
            "n = {n}, alpha = {}: {}",
            params.alpha,
            trajectory
                .diagnostic
                .clone()
                .unwrap_or_else(|| "run did not complete".into())
        )));
    }
    let stats = RunStats::from_state(&trajectory.final_state.config, &params)?;
    Ok(FlowRun {
        params,
        rule,
        trajectory,
        stats,
    })
}

/// Independent runs scheduled on the rayon pool; results keep the input order.
pub fn run_batch(
    jobs: &[(usize, AlphaRule)],
    a: PhaseShift,
    gamma: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<FlowRun>> {
    jobs.par_iter()
        .map(|&(n, rule)| run_flow(n, rule, a, gamma, opts))
        .collect()
}

fn distance_to(run: &FlowRun, target: &MeasurePair) -> Result<f64> {
    Ok(measures::big_w(
        &MeasurePair::from_configuration(run.final_config())?,
        target,
    ))
}

/// Decay rates between consecutive runs with `n` and `2n`.
fn rates(runs: &[FlowRun], target: &MeasurePair) -> Result<Vec<Option<f64>>> {
    let dist: Vec<f64> = runs
        .iter()
        .map(|r| distance_to(r, target))
        .collect::<Result<_>>()?;
    runs.iter()
        .enumerate()
        .map(|(i, r)| {
            let n = r.params.n();
            match runs.iter().position(|s| s.params.n() == 2 * n) {
                Some(j) => diagnostics::decay_rate(dist[i], dist[j]).map(Some),
                None => Ok(None),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table4Row {
    pub n: usize,
    pub d_plus_minus: f64,
    pub q: Option<f64>,
    /// `d_bar` of the negative species; the positive one is its mirror image.
    pub d_bar: f64,
    pub separated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table5Row {
    pub n: usize,
    pub q_tilde: Option<f64>,
    pub mixed: bool,
}

/// Final-state statistics at `alpha_n = 2n`, with `q_n` against the separated state.
pub fn table4(
    ns: &[usize],
    a: PhaseShift,
    opts: &IntegratorOptions,
) -> Result<(Vec<Table4Row>, Vec<FlowRun>)> {
    let jobs: Vec<_> = ns.iter().map(|&n| (n, AlphaRule::TwoN)).collect();
    let runs = run_batch(&jobs, a, 0.0, opts)?;
    let q = rates(&runs, &measures::rho_sep())?;
    let rows = runs
        .iter()
        .zip(q)
        .map(|(r, q)| Table4Row {
            n: r.params.n(),
            d_plus_minus: r.stats.d_plus_minus,
            q,
            d_bar: r.stats.d_bar_minus,
            separated: r.stats.separated,
        })
        .collect();
    Ok((rows, runs))
}

/// Final states at `alpha_n = n/2`, with `q~_n` against the mixed state.
pub fn table5(
    ns: &[usize],
    a: PhaseShift,
    opts: &IntegratorOptions,
) -> Result<(Vec<Table5Row>, Vec<FlowRun>)> {
    let jobs: Vec<_> = ns.iter().map(|&n| (n, AlphaRule::HalfN)).collect();
    let runs = run_batch(&jobs, a, 0.0, opts)?;
    let q = rates(&runs, &measures::rho_mix())?;
    let rows = runs
        .iter()
        .zip(q)
        .map(|(r, q_tilde)| Table5Row {
            n: r.params.n(),
            q_tilde,
            mixed: r.stats.mixed,
        })
        .collect();
    Ok((rows, runs))
}

pub fn table4_csv(rows: &[Table4Row]) -> String {
    let mut out = String::from("n,d_plus_minus,q,d_bar,separated\n");
    for r in rows {
        let q = r.q.map(fmt17).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt17(r.d_plus_minus),
            q,
            fmt17(r.d_bar),
            r.separated
        );
    }
    out
}

pub fn table5_csv(rows: &[Table5Row]) -> String {
    let mut out = String::from("n,q_tilde,mixed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.n,
            r.q_tilde.map(fmt17).unwrap_or_default(),
            r.mixed
        );
    }
    out
}

pub const FIG4_N: usize = 64;
pub const FIG4_RULES: [AlphaRule; 4] = [
    AlphaRule::HalfN,
    AlphaRule::SevenTenthsN,
    AlphaRule::N,
    AlphaRule::TwoN,
];

/// Sample times of the trajectory plots: four per decade on `[1e-4, T]`.
pub fn fig4_sample_times(t_end: f64) -> Vec<f64> {
    flow::geometric_grid(1e-4, t_end, 4)
}

/// The four regimes at `n = 64`, sampled on the geometric grid.
pub fn fig4(n: usize, a: PhaseShift, opts: &IntegratorOptions) -> Result<Vec<FlowRun>> {
    let mut opts = opts.clone();
    opts.sample_times = fig4_sample_times(opts.t_end);
    let jobs: Vec<_> = FIG4_RULES.iter().map(|&r| (n, r)).collect();
    run_batch(&jobs, a, 0.0, &opts)
}

pub const FIG5_N: usize = 512;
pub const FIG5_TIMES: [f64; 4] = [0.0, 0.1, 1.0 / 3.0, flow::T_EQUILIBRIUM];

#[derive(Clone, Debug, Serialize)]
pub struct DensitySlice {
    pub t: f64,
    pub plus: Vec<(f64, f64)>,
    pub minus: Vec<(f64, f64)>,
}

impl DensitySlice {
    pub fn from_config(t: f64, c: &Configuration) -> Result<Self> {
        let n = c.n();
        Ok(Self {
            t,
            plus: diagnostics::discrete_density(c, Species::Plus, n)?,
            minus: diagnostics::discrete_density(c, Species::Minus, n)?,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("species,x,density\n");
        for (sign, s) in [(1, &self.plus), (-1, &self.minus)] {
            for (x, rho) in s.iter() {
                let _ = writeln!(out, "{sign},{},{}", fmt17(*x), fmt17(*rho));
            }
        }
        out
    }

    /// Largest deviation from `1/2` of either density on `[lo, hi]`.
    pub fn bulk_deviation(&self, lo: f64, hi: f64) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .filter(|(x, _)| (lo..=hi).contains(x))
            .map(|(_, rho)| (rho - 0.5).abs())
            .fold(0.0, f64::max)
    }
}

/// Density slices of the `alpha_n = n/2` run at the requested times (the
/// last one is the end time).
pub fn fig5(
    n: usize,
    a: PhaseShift,
    opts: &IntegratorOptions,
    times: &[f64],
) -> Result<Vec<DensitySlice>> {
    let mut opts = opts.clone();
    opts.sample_times = times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= opts.t_end)
        .collect();
    let run = run_flow(n, AlphaRule::HalfN, a, 0.0, &opts)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let c = if t <= 0.0 {
            flow::initial_condition_equispaced(n)?
        } else {
            run.trajectory
                .samples
                .iter()
                .find(|s| s.t == t)
                .map(|s| s.config.clone())
                .ok_or_else(|| Error::Numerical(format!("no sample at t = {t}")))?
        };
        out.push(DensitySlice::from_config(t, &c)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SepMinimizerRow {
    pub n: usize,
    pub alpha: f64,
    pub result: SeparatedMinimizer,
}

pub fn sep_minimizer_sweep(
    ns: &[usize],
    rule: AlphaRule,
    a: PhaseShift,
) -> Result<Vec<SepMinimizerRow>> {
    ns.par_iter()
        .map(|&n| {
            let p = ModelParams::balanced(n, rule.alpha(n), 0.0, a)?;
            let result = separated::find_separated_minimizer(&p, separated::default_margin(&p)?)?;
            Ok(SepMinimizerRow {
                n,
                alpha: p.alpha,
                result,
            })
        })
        .collect()
}

pub fn sep_minimizer_csv(rows: &[SepMinimizerRow]) -> String {
    let mut out = String::from(
        "n,alpha,d_plus_minus,interior,boundary_derivative,projected_gradient,converged\n",
    );
    for r in rows {
        let m = &r.result;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            fmt17(r.alpha),
            fmt17(m.d_plus_minus),
            m.interior,
            fmt17(m.boundary_derivative),
            fmt17(m.projected_gradient),
            m.converged
        );
    }
    out
}

/// The cell-problem table on the `5 x 5` grid `{0, 1/4, ..., 1}^2`.
pub fn psi_table(m_list: &[f64], starts: usize, seed: u64) -> Result<PsiTable> {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    PsiTable::compute(&grid, &grid, m_list, starts, seed)
}

/// Reference values `(n, d_plus_minus, q, d_bar)` at `alpha_n = 2n`.
pub const TABLE4_REFERENCE: [(usize, f64, Option<f64>, f64); 5] = [
    (16, 2.102, Some(1.022), 1.069),
    (32, 2.026, Some(1.010), 1.033),
    (64, 1.989, Some(1.005), 1.017),
    (128, 1.971, Some(1.002), 1.008),
    (256, 1.962, None, 1.004),
];

/// Reference values `(n, q_tilde)` at `alpha_n = n/2`.
pub const TABLE5_REFERENCE: [(usize, f64); 3] = [(16, 0.940), (32, 0.944), (64, 0.965)];

pub const TOL_D: f64 = 0.03;
pub const TOL_Q: f64 = 0.02;
pub const TOL_D_BAR: f64 = 0.01;
pub const TOL_Q_TILDE: f64 = 0.03;
pub const TOL_BULK_DENSITY: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub experiment: String,
    pub n: usize,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    /// `tolerance - |value - reference|`.
    pub margin: f64,
    pub pass: bool,
}

impl CheckLine {
    fn new(
        experiment: &str,
        n: usize,
        quantity: &str,
        value: f64,
        reference: f64,
        tolerance: f64,
    ) -> Self {
        let margin = tolerance - (value - reference).abs();
        Self {
            experiment: experiment.into(),
            n,
            quantity: quantity.into(),
            value,
            reference,
            tolerance,
            margin,
            pass: margin >= 0.0,
        }
    }

    fn flag(experiment: &str, n: usize, quantity: &str, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::new(experiment, n, quantity, v, 1.0, 0.0)
    }

    pub fn render(&self) -> String {
        format!(
            "{} {} n={} {}: value {:.6} reference {:.6} tol {:.3} margin {:+.4}",
            if self.pass { "PASS" } else { "FAIL" },
            self.experiment,
            self.n,
            self.quantity,
            self.value,
            self.reference,
            self.tolerance,
            self.margin
        )
    }
}

fn missing(experiment: &str, n: usize, quantity: &str) -> CheckLine {
    let mut c = CheckLine::new(experiment, n, quantity, f64::NAN, f64::NAN, 0.0);
    c.pass = false;
    c.margin = f64::NEG_INFINITY;
    c
}

/// Compares Table 4 rows with the bundled reference; rows the reference does
/// not cover are ignored, reference rows missing from `rows` are not checked.
pub fn check_table4(rows: &[Table4Row]) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for &(n, d, q, d_bar) in &TABLE4_REFERENCE {
        let Some(r) = rows.iter().find(|r| r.n == n) else {
            continue;
        };
        out.push(CheckLine::new(
            "table4",
            n,
            "d_plus_minus",
            r.d_plus_minus,
            d,
            TOL_D,
        ));
        if let Some(q_ref) = q {
            if rows.iter().any(|s| s.n == 2 * n) {
                out.push(match r.q {
                    Some(v) => CheckLine::new("table4", n, "q", v, q_ref, TOL_Q),
                    None => missing("table4", n, "q"),
                });
            }
        }
        out.push(CheckLine::new(
            "table4", n, "d_bar", r.d_bar, d_bar, TOL_D_BAR,
        ));
        out.push(CheckLine::flag("table4", n, "separated", r.separated));
    }
    out
}

pub fn check_table5(rows: &[Table5Row]) -> Vec<CheckLine> {
    let mut out: Vec<CheckLine> = rows
        .iter()
        .map(|r| CheckLine::flag("table5", r.n, "mixed", r.mixed))
        .collect();
    for &(n, q_ref) in &TABLE5_REFERENCE {
        let Some(r) = rows.iter().find(|r| r.n == n) else {
            continue;
        };
        if rows.iter().any(|s| s.n == 2 * n) {
            out.push(match r.q_tilde {
                Some(v) => CheckLine::new("table5", n, "q_tilde", v, q_ref, TOL_Q_TILDE),
                None => missing("table5", n, "q_tilde"),
            });
        }
    }
    out
}

/// The regime flags of the trajectory plots.
pub fn check_fig4(runs: &[FlowRun]) -> Vec<CheckLine> {
    runs.iter()
        .map(|r| {
            let n = r.params.n();
            let s = &r.stats;
            let (quantity, ok) = match r.rule {
                AlphaRule::HalfN => ("completely mixed", s.mixed),
                AlphaRule::N => ("one adjacency change", s.swaps == 1),
                AlphaRule::TwoN => ("fully separated", s.separated),
                _ => ("neither mixed nor separated", !s.mixed && !s.separated),
            };
            CheckLine::flag("fig4", n, &format!("{} {quantity}", r.rule.label()), ok)
        })
        .collect()
}

/// Bulk densities of the last slice on `[1/4, 3/4]`.
pub fn check_fig5(slices: &[DensitySlice], n: usize) -> Vec<CheckLine> {
    match slices.last() {
        Some(s) => vec![CheckLine::new(
            "fig5",
            n,
            "bulk density deviation",
            s.bulk_deviation(0.25, 0.75),
            0.0,
            TOL_BULK_DENSITY,
        )],
        None => vec![missing("fig5", n, "bulk density deviation")],
    }
}

pub fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parameter(format!("cannot parse n list '{s}'"));
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi): (usize, usize) = (
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
        );
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n *= 2;
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect()
    }
}

//! Property audit of the interaction potentials.
//!
//! Fourier transforms use `F f(omega) = int f(x) exp(-2 pi i x omega) dx`.
//! Transforms of `W_a` are computed two ways: by direct cosine quadrature,
//! and from the closed-form transform `h^` of `h = 1/(cosh 2r + a)` through
//!
//! ```text
//! W_a'(r) = -2r (a h + (1 - a^2) h^2)
//! W_a^(omega) = -(1 / (2 pi^2 omega)) (a h^'(omega) + (1 - a^2) (h^ * h^)'(omega))
//! ```
//!
//! with `h^(omega) = pi / sqrt(1 - a^2) sinh(pi arccos(a) omega) / sinh(pi^2 omega)`.
//! Both terms are positive for `omega > 0`, so the second route keeps full
//! relative accuracy where direct quadrature drowns in cancellation.
//! `a = 1` goes through `W_1(r) = 2 W_0(r/2)`, i.e. `W_1^(omega) = 4 W_0^(2 omega)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{self, PhaseShift};
use crate::quadrature;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub grid: String,
    /// Distance from the failure threshold; positive is safe.
    pub worst_margin: f64,
    pub pass: bool,
    /// Set when a quadrature did not reach its tolerance.
    pub inconclusive: bool,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let flag = if c.inconclusive {
                "INCONCLUSIVE"
            } else if c.pass {
                "PASS"
            } else {
                "FAIL"
            };
            let _ = writeln!(
                out,
                "{flag:<12} {:<40} margin {:>11.3e}  [{}]",
                c.name, c.worst_margin, c.grid
            );
            if !c.note.is_empty() {
                let _ = writeln!(out, "{:12} {}", "", c.note);
            }
        }
        out
    }
}

fn check(
    name: impl Into<String>,
    grid: impl Into<String>,
    margin: f64,
    inconclusive: bool,
) -> AuditCheck {
    AuditCheck {
        name: name.into(),
        grid: grid.into(),
        worst_margin: margin,
        pass: margin > 0.0 && !inconclusive,
        inconclusive,
        note: String::new(),
    }
}

/// The audited frequencies `0.4 k`, `k = 1..50`.
pub fn default_omega_grid() -> Vec<f64> {
    (1..=50).map(|k| 0.4 * k as f64).collect()
}

/// `2 int_0^R f(r) cos(2 pi omega r) dr` for an even `f` negligible beyond `R`.
/// Returns the value and whether the quadrature converged.
pub fn cosine_transform<F: Fn(f64) -> f64>(f: F, omega: f64, cut: f64) -> (f64, bool) {
    let step = if omega > 0.0 {
        (0.25 / omega).min(1.0)
    } else {
        1.0
    };
    let k = (cut / step).ceil() as usize;
    let mut points: Vec<f64> = (0..=k).map(|i| (i as f64 * step).min(cut)).collect();
    points.dedup();
    let r = quadrature::integrate_breakpoints(
        |x| f(x) * (2.0 * PI * omega * x).cos(),
        &points,
        1e-15,
        1e-13,
    );
    (2.0 * r.value, r.converged)
}

const W_CUT: f64 = 40.0;

/// `W_a^(omega)` by direct cosine quadrature.
pub fn w_hat_direct(a: PhaseShift, omega: f64) -> (f64, bool) {
    cosine_transform(|r| potentials::w(r, a), omega, W_CUT)
}

/// `sinh(A w) / sinh(B w)` and its derivative, `A = pi arccos a`, `B = pi^2`.
struct Ratio {
    a: f64,
    b: f64,
}

impl Ratio {
    fn new(a: f64) -> Self {
        Self {
            a: PI * a.acos(),
            b: PI * PI,
        }
    }

    fn value(&self, w: f64) -> f64 {
        let w = w.abs();
        if w == 0.0 {
            return self.a / self.b;
        }
        ((self.a - self.b) * w).exp() * (-2.0 * self.a * w).exp_m1() / (-2.0 * self.b * w).exp_m1()
    }

    /// `d/dw log f = A coth(A w) - B coth(B w)`.
    fn log_slope(&self, w: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if b * w < 1e-2 {
            (a * a - b * b) * w / 3.0 - (a.powi(4) - b.powi(4)) * w.powi(3) / 45.0
        } else {
            a / (a * w).tanh() - b / (b * w).tanh()
        }
    }

    fn derivative(&self, w: f64) -> f64 {
        let x = w.abs();
        let d = self.value(x) * self.log_slope(x);
        if w < 0.0 {
            -d
        } else {
            d
        }
    }
}

/// Closed-form transform of `1 / (cosh 2r + a)`, `0 <= a < 1`.
pub fn h_hat(a: f64, omega: f64) -> f64 {
    PI / (1.0 - a * a).sqrt() * Ratio::new(a).value(omega)
}

/// `W_a^(omega)` from the closed form of `h^`; `a = 1` via `4 W_0^(2 omega)`.
pub fn w_hat_closed(a: PhaseShift, omega: f64) -> Result<f64> {
    let av = a.value();
    if !(0.0..=1.0).contains(&av) {
        return Err(Error::Parameter(format!(
            "closed-form transform needs a in [0, 1], got {av}"
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "closed-form transform needs omega > 0, got {omega}"
        )));
    }
    if av == 1.0 {
        return Ok(4.0 * w_hat_closed(PhaseShift::new(0.0)?, 2.0 * omega)?);
    }
    let f = Ratio::new(av);
    // (f * f)'(w) = int f(s) f'(w - s) ds; both factors decay like exp(-(B - A)|.|)
    let decay = f.b - f.a;
    let l = 45.0 / decay;
    let mut points = vec![-l];
    let mut x = -l.floor();
    while x < omega + l {
        if x > -l {
            points.push(x);
        }
        x += 0.5;
    }
    points.push(omega + l);
    points.push(0.0);
    points.push(omega);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let conv = quadrature::integrate_breakpoints(
        |s| f.value(s) * f.derivative(omega - s),
        &points,
        0.0,
        1e-12,
    );
    if !conv.converged {
        return Err(Error::Numerical(format!(
            "convolution at omega = {omega} did not converge"
        )));
    }
    let first = -av / (2.0 * PI * omega * (1.0 - av * av).sqrt()) * f.derivative(omega);
    let second = -conv.value / (2.0 * omega);
    Ok(first + second)
}

/// Positivity of `W_a^` on the grid, from the closed form.
pub fn check_fourier_positivity(a: PhaseShift, omegas: &[f64]) -> AuditCheck {
    let mut worst = f64::INFINITY;
    let mut inconclusive = false;
    for &w in omegas {
        match w_hat_closed(a, w) {
            Ok(v) => worst = worst.min(v),
            Err(_) => inconclusive = true,
        }
    }
    let mut c = check(
        format!("fourier positivity a={}", a.value()),
        format!(
            "{} frequencies in ({}, {}]",
            omegas.len(),
            0,
            omegas.iter().fold(0.0_f64, |m, w| m.max(*w))
        ),
        worst,
        inconclusive,
    );
    c.note = "margin is the smallest transform value".into();
    c
}

/// Direct quadrature against the closed form, absolute residual below `tol`.
pub fn check_closed_form_transform(a: PhaseShift, omegas: &[f64], tol: f64) -> AuditCheck {
    let mut worst = 0.0_f64;
    let mut inconclusive = false;
    for &w in omegas {
        let (direct, ok) = w_hat_direct(a, w);
        inconclusive |= !ok;
        match w_hat_closed(a, w) {
            Ok(closed) => worst = worst.max((direct - closed).abs()),
            Err(_) => inconclusive = true,
        }
    }
    check(
        format!("closed-form transform a={}", a.value()),
        format!("{} frequencies", omegas.len()),
        tol - worst,
        inconclusive,
    )
}

/// Direct quadrature of `1/(cosh 2r + a)` against its closed-form transform.
pub fn check_intermediate_identity(a: f64, omegas: &[f64], tol: f64) -> AuditCheck {
    let mut worst = 0.0_f64;
    let mut inconclusive = false;
    for &w in omegas {
        let (direct, ok) = cosine_transform(|r| 1.0 / ((2.0 * r).cosh() + a), w, W_CUT);
        inconclusive |= !ok;
        worst = worst.max((direct - h_hat(a, w)).abs());
    }
    check(
        format!("transform of 1/(cosh 2r + a), a={a}"),
        format!("{} frequencies", omegas.len()),
        tol - worst,
        inconclusive,
    )
}

/// `W_1^(omega) = 4 W_0^(2 omega)`, both sides by direct quadrature.
pub fn check_a1_scaling(omegas: &[f64], tol: f64) -> Result<AuditCheck> {
    let (w0, w1) = (PhaseShift::new(0.0)?, PhaseShift::new(1.0)?);
    let mut worst = 0.0_f64;
    let mut inconclusive = false;
    for &w in omegas {
        let (l, ok1) = w_hat_direct(w1, w);
        let (r, ok2) = w_hat_direct(w0, 2.0 * w);
        inconclusive |= !(ok1 && ok2);
        worst = worst.max((l - 4.0 * r).abs());
    }
    Ok(check(
        "W1^(w) = 4 W0^(2w)",
        format!("{} frequencies", omegas.len()),
        tol - worst,
        inconclusive,
    ))
}

/// The transform convention on `exp(-pi x^2)`, which is its own transform.
pub fn check_gaussian_convention(tol: f64) -> AuditCheck {
    let mut worst = 0.0_f64;
    let mut inconclusive = false;
    for w in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
        let (v, ok) = cosine_transform(|x| (-PI * x * x).exp(), w, 8.0);
        inconclusive |= !ok;
        worst = worst.max((v - (-PI * w * w).exp()).abs());
    }
    check(
        "gaussian self-transform",
        "omega in {0, .25, .5, 1, 1.5, 2}",
        tol - worst,
        inconclusive,
    )
}

/// `V'' - W_a'' > 0` on the grid.
pub fn check_convexity_v_minus_w(a: PhaseShift, rs: &[f64]) -> Result<AuditCheck> {
    let mut worst = f64::INFINITY;
    for &r in rs {
        worst = worst.min(potentials::v_second(r)? - potentials::w_second(r, a));
    }
    Ok(check(
        format!("convexity of V - W_a, a={}", a.value()),
        format!("{} radii in (0, 15]", rs.len()),
        worst,
        false,
    ))
}

/// `0 < W_{a_1} < ... < W_{a_k} < V` pointwise (with `<=` allowed nowhere).
pub fn check_ordering(a_list: &[PhaseShift], rs: &[f64]) -> AuditCheck {
    let mut worst = f64::INFINITY;
    for &r in rs {
        let mut chain = vec![0.0];
        chain.extend(a_list.iter().map(|&a| potentials::w(r, a)));
        chain.push(potentials::v(r));
        for p in chain.windows(2) {
            // relative gap, so that the tail does not read as a tie
            worst = worst.min((p[1] - p[0]) / p[1].abs().max(f64::MIN_POSITIVE));
        }
    }
    let names: Vec<String> = a_list.iter().map(|a| a.value().to_string()).collect();
    check(
        format!("ordering 0 < W_a < V, a in {{{}}}", names.join(", ")),
        format!("{} radii", rs.len()),
        worst,
        false,
    )
}

/// Least-squares slope of `-log(W_a(r) / r)` on `[5, 15]`; checked against `min_rate`.
pub fn check_decay(a: PhaseShift, min_rate: f64) -> AuditCheck {
    let rs: Vec<f64> = (0..=100).map(|k| 5.0 + 0.1 * k as f64).collect();
    let ys: Vec<f64> = rs
        .iter()
        .map(|&r| -(potentials::w(r, a) / r).ln())
        .collect();
    let n = rs.len() as f64;
    let (mx, my) = (rs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = rs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = rs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let rate = sxy / sxx;
    let mut c = check(
        format!("exponential decay of W_a, a={}", a.value()),
        "r in [5, 15]",
        rate - min_rate,
        false,
    );
    c.note = format!("fitted rate {rate:.4}");
    c
}

pub fn check_evenness(a: PhaseShift, rs: &[f64]) -> AuditCheck {
    let worst = rs
        .iter()
        .map(|&r| (potentials::w(r, a) - potentials::w(-r, a)).abs())
        .fold(0.0_f64, f64::max);
    let mut c = check(
        format!("evenness of W_a, a={}", a.value()),
        format!("{} radii", rs.len()),
        1.0,
        false,
    );
    c.pass = worst == 0.0;
    c.worst_margin = -worst;
    c
}

/// `C(r) = |V(r) - lead(r)| / (r e^{-4r})` on `rs`; bounded means
/// `max C / min C <= 2`.
pub fn asymptotic_constant_spread<F: Fn(f64) -> f64>(lead: F, rs: &[f64]) -> (f64, f64) {
    let cs: Vec<f64> = rs
        .iter()
        .map(|&r| (potentials::v(r) - lead(r)).abs() / (r * (-4.0 * r).exp()))
        .collect();
    let hi = cs.iter().fold(0.0_f64, |m, c| m.max(*c));
    let lo = cs.iter().fold(f64::INFINITY, |m, c| m.min(*c));
    (lo, hi)
}

/// Two-term tail `V(r) = (2r + 1) e^{-2r} + O(r e^{-4r})`, on `[5, 12]`
/// where the remainder is still far above rounding in `V`.
pub fn check_asymptotic_v() -> AuditCheck {
    let rs: Vec<f64> = (0..=70).map(|k| 5.0 + 0.1 * k as f64).collect();
    let (lo, hi) = asymptotic_constant_spread(|r| (2.0 * r + 1.0) * (-2.0 * r).exp(), &rs);
    let mut c = check(
        "V(r) - (2r+1)e^{-2r} = O(r e^{-4r})",
        "r in [5, 12]",
        2.0 - hi / lo,
        false,
    );
    c.note = format!("C(r) in [{lo:.4}, {hi:.4}]");
    c
}

/// The full suite.
pub fn run_audit() -> Result<AuditReport> {
    let omegas = default_omega_grid();
    let a_list: Vec<PhaseShift> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&a| PhaseShift::new(a))
        .collect::<Result<_>>()?;
    let radii: Vec<f64> = (1..=150).map(|k| 0.1 * k as f64).collect();
    let mut report = AuditReport::default();
    report.checks.push(check_gaussian_convention(1e-12));
    for &a in &a_list {
        report.checks.push(check_fourier_positivity(a, &omegas));
        report
            .checks
            .push(check_closed_form_transform(a, &omegas, 1e-8));
        if a.value() < 1.0 {
            report
                .checks
                .push(check_intermediate_identity(a.value(), &omegas, 1e-8));
        }
    }
    report.checks.push(check_a1_scaling(&omegas, 1e-8)?);
    for &a in &a_list {
        report.checks.push(check_convexity_v_minus_w(a, &radii)?);
    }
    report.checks.push(check_ordering(&a_list, &radii));
    for &a in &a_list {
        report.checks.push(check_decay(a, 1.9));
        report.checks.push(check_evenness(a, &radii));
    }
    report.checks.push(check_asymptotic_v());
    Ok(report)
}

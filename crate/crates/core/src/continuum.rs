//! Limit energies of the three scaling regimes, evaluated on measure pairs.
//!
//! * fixed `alpha`: pair interactions integrated against product measures;
//! * `1 << alpha_n << n`: local quadratic functional weighted by `int V`, `int W`;
//! * `alpha_n / n -> alpha`: `int psi_alpha(rho^+, rho^-)` with the cell density.
//!
//! Every regime adds the loading term `gamma^2 int x dmu^+ + gamma^2 int (1 - x) dmu^-`.

use serde::{Deserialize, Serialize};

use crate::cell::PsiTable;
use crate::error::{Error, Result};
use crate::measures::{self, MeasureOnUnit, MeasurePair, Representation};
use crate::potentials::{self, HalfLine, PhaseShift};
use crate::quadrature;
use crate::summation::Neumaier;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum LimitRegime {
    FixedAlpha { alpha: f64 },
    Intermediate,
    Scaling { alpha: f64 },
}

/// Beyond this distance both kernels are below `1e-24` and are dropped.
const KERNEL_CUT: f64 = 30.0;

/// `G(R) = int_0^R (R - u) K(u) du` for the unscaled kernel `K = V` or `W_a`.
fn second_antiderivative(which: HalfLine, r: f64) -> Result<f64> {
    let r = r.abs();
    if r == 0.0 {
        return Ok(0.0);
    }
    let top = r.min(KERNEL_CUT);
    let kernel = |u: f64| match which {
        HalfLine::V => potentials::v(u),
        HalfLine::W(a) => potentials::w(u, a),
    };
    let mut points = vec![0.0];
    if matches!(which, HalfLine::V) {
        // dyadic refinement towards the logarithmic singularity
        points.extend((1..=40).rev().map(|k| top * 2f64.powi(-k)));
    }
    points.extend([1.0, 2.0, 4.0, 8.0, 16.0].into_iter().filter(|&p| p < top));
    points.push(top);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let quad = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let res = quadrature::integrate_breakpoints(f, &points, 1e-15, 1e-14);
        if !res.converged {
            return Err(Error::Numerical(format!(
                "kernel antiderivative at {r} did not converge"
            )));
        }
        Ok(res.value)
    };
    if r <= KERNEL_CUT {
        quad(&|u| (r - u) * kernel(u))
    } else {
        Ok(r * quad(&kernel)? - quad(&|u| u * kernel(u))?)
    }
}

/// `int_a^b int_c^d alpha K(alpha (x - y)) dy dx`.
fn rectangle(which: HalfLine, alpha: f64, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    let g = |r: f64| -> Result<f64> { Ok(second_antiderivative(which, alpha * r)? / alpha) };
    Ok(g(b - c)? - g(a - c)? - g(b - d)? + g(a - d)?)
}

/// Pieces `(left, right, density)` of an absolutely continuous measure.
fn pieces(m: &MeasureOnUnit) -> Option<Vec<(f64, f64, f64)>> {
    match &m.representation {
        Representation::PiecewiseDensity {
            breakpoints,
            values,
        } => Some(
            breakpoints
                .windows(2)
                .zip(values)
                .filter(|(_, v)| **v > 0.0)
                .map(|(w, v)| (w[0], w[1], *v))
                .collect(),
        ),
        Representation::Empirical { atoms, .. } if atoms.is_empty() => Some(Vec::new()),
        Representation::Empirical { .. } => None,
    }
}

fn atoms(m: &MeasureOnUnit) -> Option<(&[f64], f64)> {
    match &m.representation {
        Representation::Empirical { atoms, weight } => Some((atoms, *weight)),
        Representation::PiecewiseDensity { .. } => None,
    }
}

/// `int x dmu`.
fn first_moment(m: &MeasureOnUnit) -> f64 {
    match &m.representation {
        Representation::Empirical { atoms, weight } => {
            weight * atoms.iter().copied().collect::<Neumaier>().sum()
        }
        Representation::PiecewiseDensity {
            breakpoints,
            values,
        } => breakpoints
            .windows(2)
            .zip(values)
            .map(|(w, v)| 0.5 * v * (w[1] * w[1] - w[0] * w[0]))
            .collect::<Neumaier>()
            .sum(),
    }
}

/// `gamma^2 int x dmu^+ + gamma^2 int (1 - x) dmu^-`.
pub fn external_energy(pair: &MeasurePair, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    g2 * first_moment(&pair.plus) + g2 * (pair.minus.total_mass - first_moment(&pair.minus))
}

fn fixed_alpha_empirical(
    (xp, wp): (&[f64], f64),
    (xm, wm): (&[f64], f64),
    alpha: f64,
    a: PhaseShift,
) -> f64 {
    let mut acc = Neumaier::default();
    for (x, w) in [(xp, wp), (xm, wm)] {
        for i in 0..x.len() {
            for j in 0..i {
                let r = alpha * (x[i] - x[j]);
                if r == 0.0 {
                    return f64::INFINITY;
                }
                acc.add(w * w * alpha * potentials::v(r));
            }
        }
    }
    for &x in xp {
        for &y in xm {
            acc.add(wp * wm * alpha * potentials::w(alpha * (x - y), a));
        }
    }
    acc.sum()
}

fn fixed_alpha_density(
    pp: &[(f64, f64, f64)],
    pm: &[(f64, f64, f64)],
    alpha: f64,
    a: PhaseShift,
) -> Result<f64> {
    let mut acc = Neumaier::default();
    for side in [pp, pm] {
        for &(a0, b0, r0) in side {
            for &(a1, b1, r1) in side {
                acc.add(0.5 * r0 * r1 * rectangle(HalfLine::V, alpha, a0, b0, a1, b1)?);
            }
        }
    }
    for &(a0, b0, r0) in pp {
        for &(a1, b1, r1) in pm {
            acc.add(r0 * r1 * rectangle(HalfLine::W(a), alpha, a0, b0, a1, b1)?);
        }
    }
    Ok(acc.sum())
}

/// Common refinement of two piecewise-constant densities: `(length, rho^+, rho^-)`.
fn merged_pieces(pp: &[(f64, f64, f64)], pm: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    for &(l, r, _) in pp.iter().chain(pm) {
        cuts.push(l);
        cuts.push(r);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let at = |p: &[(f64, f64, f64)], x: f64| {
        p.iter()
            .find(|&&(l, r, _)| l <= x && x < r)
            .map_or(0.0, |q| q.2)
    };
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0], at(pp, mid), at(pm, mid))
        })
        .collect()
}

/// Interaction part of the limit energy; `+inf` where the regime needs
/// densities and gets atoms.
pub fn interaction_energy(
    pair: &MeasurePair,
    regime: LimitRegime,
    a: PhaseShift,
    psi: Option<&PsiTable>,
) -> Result<f64> {
    match regime {
        LimitRegime::FixedAlpha { alpha } => {
            if !(alpha > 0.0) {
                return Err(Error::Parameter(format!(
                    "alpha must be positive, got {alpha}"
                )));
            }
            let (ep, em) = (atoms(&pair.plus), atoms(&pair.minus));
            if let (Some(p), Some(m)) = (ep, em) {
                return Ok(fixed_alpha_empirical(p, m, alpha, a));
            }
            match (pieces(&pair.plus), pieces(&pair.minus)) {
                (Some(p), Some(m)) => fixed_alpha_density(&p, &m, alpha, a),
                _ => Err(Error::Parameter(
                    "fixed-alpha energy of mixed atomic/density pairs is not supported".into(),
                )),
            }
        }
        LimitRegime::Intermediate => {
            let (Some(p), Some(m)) = (pieces(&pair.plus), pieces(&pair.minus)) else {
                return Ok(f64::INFINITY);
            };
            let iv = potentials::integral_0_inf(HalfLine::V)?;
            let iw = potentials::integral_0_inf(HalfLine::W(a))?;
            let mut same = Neumaier::default();
            let mut cross = Neumaier::default();
            for (len, rp, rm) in merged_pieces(&p, &m) {
                same.add(len * (rp * rp + rm * rm));
                cross.add(len * 2.0 * rp * rm);
            }
            Ok(iv * same.sum() + iw * cross.sum())
        }
        LimitRegime::Scaling { alpha } => {
            if !(alpha > 0.0) {
                return Err(Error::Parameter(format!(
                    "alpha must be positive, got {alpha}"
                )));
            }
            let Some(table) = psi else {
                return Err(Error::Precondition(
                    "scaling regime needs a psi table".into(),
                ));
            };
            let (Some(p), Some(m)) = (pieces(&pair.plus), pieces(&pair.minus)) else {
                return Ok(f64::INFINITY);
            };
            // psi_alpha(sigma) = alpha^2 psi_1(sigma / alpha)
            let mut acc = Neumaier::default();
            for (len, rp, rm) in merged_pieces(&p, &m) {
                acc.add(len * alpha * alpha * table.interpolate(rp / alpha, rm / alpha)?);
            }
            Ok(acc.sum())
        }
    }
}

/// Interaction energy plus the loading term.
pub fn limit_energy(
    pair: &MeasurePair,
    regime: LimitRegime,
    gamma: f64,
    a: PhaseShift,
    psi: Option<&PsiTable>,
) -> Result<f64> {
    let e = interaction_energy(pair, regime, a, psi)?;
    Ok(e + external_energy(pair, gamma))
}

/// `(1 - t) psi(1, 0) + t psi(1/2, 1/2)`, the scaling-regime energy of `rho_t`.
pub fn energy_along_mixing_curve(t: f64, psi: &PsiTable) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!(
            "mixing parameter t = {t} outside [0, 1]"
        )));
    }
    let sep = psi.interpolate(1.0, 0.0)?;
    let mix = psi.interpolate(0.5, 0.5)?;
    Ok((1.0 - t) * sep + t * mix)
}

/// Difference quotients `(E(rho_0) - E(rho_t)) / W(rho_0, rho_t)`.
pub fn slope_lower_bound_at_sep(psi: &PsiTable, ts: &[f64]) -> Result<Vec<f64>> {
    if ts.iter().any(|&t| !(t > 0.0 && t <= 0.25)) {
        return Err(Error::Parameter("t values must lie in (0, 1/4]".into()));
    }
    if ts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("t values must decrease".into()));
    }
    let e0 = energy_along_mixing_curve(0.0, psi)?;
    ts.iter()
        .map(|&t| {
            Ok((e0 - energy_along_mixing_curve(t, psi)?) / measures::mixing_curve_distance(t, 0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Configuration, ModelParams};
    use crate::energy;
    use crate::measures::{mixing_curve, rho_mix, rho_sep};

    fn a1() -> PhaseShift {
        PhaseShift::new(1.0).unwrap()
    }

    #[test]
    fn empirical_fixed_alpha_matches_discrete_energy() {
        let c = Configuration::new(vec![0.0, 0.2, 0.45, 0.5], vec![0.3, 0.5, 0.8, 1.0]).unwrap();
        let pair = MeasurePair::from_configuration(&c).unwrap();
        for alpha in [0.5, 3.0, 17.0] {
            let p = ModelParams::balanced(8, alpha, 0.7, a1()).unwrap();
            let e = limit_energy(
                &pair,
                LimitRegime::FixedAlpha { alpha },
                0.7 * (8f64).sqrt(),
                a1(),
                None,
            )
            .unwrap();
            // the loading term of E_n carries gamma_n^2 / n
            let ed = energy::energy(&c, &p);
            let ext = 0.49 * (0.0 + 0.2 + 0.45 + 0.5 + 0.7 + 0.5 + 0.2 + 0.0);
            let ei = ed - 0.49 / 8.0 * (1.15 + 1.4);
            assert!((e - ext - ei).abs() < 1e-12, "{alpha}: {e} vs {}", ei + ext);
        }
    }

    #[test]
    fn antiderivative_against_direct_quadrature() {
        // d^2/dR^2 G = K
        let h = 1e-3;
        for r in [0.3, 1.0, 2.5] {
            for which in [HalfLine::V, HalfLine::W(a1())] {
                let g = |x| second_antiderivative(which, x).unwrap();
                let fd = (g(r + h) - 2.0 * g(r) + g(r - h)) / (h * h);
                let k = match which {
                    HalfLine::V => potentials::v(r),
                    HalfLine::W(a) => potentials::w(r, a),
                };
                assert!((fd - k).abs() < 1e-5, "{r}: {fd} vs {k}");
            }
        }
    }

    #[test]
    fn density_fixed_alpha_approaches_intermediate() {
        // alpha int int V(alpha(x - y)) ~ 2 int V on the diagonal as alpha grows
        let alpha = 400.0;
        let mix = rho_mix();
        let fixed =
            interaction_energy(&mix, LimitRegime::FixedAlpha { alpha }, a1(), None).unwrap();
        let inter = interaction_energy(&mix, LimitRegime::Intermediate, a1(), None).unwrap();
        assert!((fixed - inter).abs() < 1e-2 * inter, "{fixed} vs {inter}");
    }

    #[test]
    fn intermediate_closed_forms() {
        let iv = std::f64::consts::PI.powi(2) / 6.0;
        let iw = std::f64::consts::PI.powi(2) / 12.0;
        let sep = interaction_energy(&rho_sep(), LimitRegime::Intermediate, a1(), None).unwrap();
        assert!((sep - iv).abs() < 1e-12);
        let mix = interaction_energy(&rho_mix(), LimitRegime::Intermediate, a1(), None).unwrap();
        assert!((mix - (0.5 * iv + 0.5 * iw)).abs() < 1e-12);
        let t = mixing_curve(0.3).unwrap();
        let e = interaction_energy(&t, LimitRegime::Intermediate, a1(), None).unwrap();
        let es = interaction_energy(&t.swap(), LimitRegime::Intermediate, a1(), None).unwrap();
        assert_eq!(e, es);
        let atoms =
            MeasurePair::from_configuration(&Configuration::new(vec![0.1], vec![0.9]).unwrap())
                .unwrap();
        assert_eq!(
            interaction_energy(&atoms, LimitRegime::Intermediate, a1(), None).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn loading_term_vanishes_at_barriers() {
        let c = Configuration::new(vec![0.0, 0.0 + 1e-9], vec![1.0 - 1e-9, 1.0]).unwrap();
        let pair = MeasurePair::from_configuration(&c).unwrap();
        assert!(external_energy(&pair, 3.0) < 1e-8);
        let sep = external_energy(&rho_sep(), 1.0);
        assert!((sep - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mixing_curve_energy_and_slopes() {
        let g = [0.0, 0.5, 1.0];
        let t = PsiTable::compute(&g, &g, &[8.0, 12.0, 16.0], 4, 1).unwrap();
        let sep = t.interpolate(1.0, 0.0).unwrap();
        let mix = t.interpolate(0.5, 0.5).unwrap();
        assert_eq!(energy_along_mixing_curve(0.0, &t).unwrap(), sep);
        assert_eq!(energy_along_mixing_curve(1.0, &t).unwrap(), mix);
        let s = LimitRegime::Scaling { alpha: 1.0 };
        for tt in [0.0, 0.4, 1.0] {
            let e = interaction_energy(&mixing_curve(tt).unwrap(), s, a1(), Some(&t)).unwrap();
            assert!((e - energy_along_mixing_curve(tt, &t).unwrap()).abs() < 1e-14);
        }
        let q = slope_lower_bound_at_sep(&t, &[0.01, 0.0025]).unwrap();
        let expect = 2.0 * 3f64.sqrt() * (sep - mix) * 0.01f64.powf(-0.5);
        assert!((q[0] - expect).abs() < 1e-9 * expect.abs());
        assert!((q[1] / q[0] - 2.0).abs() < 1e-9);
        assert!(slope_lower_bound_at_sep(&t, &[0.5]).is_err());
    }
}

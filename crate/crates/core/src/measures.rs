//! Measures on `[0, 1]`, the quadratic Wasserstein distance on the line and
//! the two-species distance
//!
//! ```text
//! W^2(mu, nu) = sum_{s = +,-} (sigma^s ^ iota^s) W_2^2(mu^s/sigma^s, nu^s/iota^s) + |sigma^s - iota^s|
//! ```
//!
//! where `sigma^s`, `iota^s` are the species masses.
//!
//! Quantile functions are stored as piecewise linear segments over the mass
//! coordinate, so `W_2` reduces to exact integrals of squared linear functions.

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::summation::Neumaier;

const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    /// Equal-weight atoms.
    Empirical { atoms: Vec<f64>, weight: f64 },
    /// Density `values[k]` on `(breakpoints[k], breakpoints[k + 1])`.
    PiecewiseDensity {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureOnUnit {
    pub representation: Representation,
    pub total_mass: f64,
}

/// Linear piece of a quantile function: on `[s0, s1]` it runs from `q0` to `q1`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Segment {
    s0: f64,
    s1: f64,
    q0: f64,
    q1: f64,
}

impl Segment {
    fn at(&self, s: f64) -> f64 {
        if self.s1 == self.s0 {
            return self.q0;
        }
        let t = (s - self.s0) / (self.s1 - self.s0);
        self.q0 + t * (self.q1 - self.q0)
    }
}

impl MeasureOnUnit {
    pub fn empirical(mut atoms: Vec<f64>, weight: f64) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(Error::Parameter(format!(
                "atom weight must be positive, got {weight}"
            )));
        }
        if atoms.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain("atoms must lie in [0, 1]".into()));
        }
        atoms.sort_by(f64::total_cmp);
        let total_mass = weight * atoms.len() as f64;
        Ok(Self {
            representation: Representation::Empirical { atoms, weight },
            total_mass,
        })
    }

    pub fn density(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::Parameter(
                "need one more breakpoint than density value".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1]))
            || breakpoints.first().is_some_and(|&b| b < 0.0)
            || breakpoints.last().is_some_and(|&b| b > 1.0)
        {
            return Err(Error::Domain(
                "breakpoints must increase strictly inside [0, 1]".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(
                "density values must be finite and non-negative".into(),
            ));
        }
        let total_mass = breakpoints
            .windows(2)
            .zip(&values)
            .map(|(w, v)| (w[1] - w[0]) * v)
            .collect::<Neumaier>()
            .sum();
        Ok(Self {
            representation: Representation::PiecewiseDensity {
                breakpoints,
                values,
            },
            total_mass,
        })
    }

    pub fn zero() -> Self {
        Self {
            representation: Representation::Empirical {
                atoms: Vec::new(),
                weight: 1.0,
            },
            total_mass: 0.0,
        }
    }

    pub fn is_density(&self) -> bool {
        matches!(self.representation, Representation::PiecewiseDensity { .. })
    }

    /// Density value at `x` (right-continuous); `None` for empirical measures.
    pub fn density_at(&self, x: f64) -> Option<f64> {
        match &self.representation {
            Representation::Empirical { atoms, .. } => atoms.is_empty().then_some(0.0),
            Representation::PiecewiseDensity {
                breakpoints,
                values,
            } => {
                if x < breakpoints[0] || x >= breakpoints[breakpoints.len() - 1] {
                    return Some(0.0);
                }
                let k = breakpoints.partition_point(|&b| b <= x) - 1;
                Some(values[k])
            }
        }
    }

    /// Mass of `[0, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.representation {
            Representation::Empirical { atoms, weight } => {
                weight * atoms.partition_point(|&a| a <= x) as f64
            }
            Representation::PiecewiseDensity {
                breakpoints,
                values,
            } => {
                let mut acc = Neumaier::default();
                for (w, v) in breakpoints.windows(2).zip(values) {
                    if x <= w[0] {
                        break;
                    }
                    acc.add(v * (x.min(w[1]) - w[0]));
                }
                acc.sum()
            }
        }
    }

    /// Generalised inverse of [`cdf`](Self::cdf) at mass coordinate `s`.
    /// Mass interval `((i - 1) w, i w]` maps to atom `i`.
    pub fn quantile(&self, s: f64) -> f64 {
        let segs = self.segments();
        if segs.is_empty() {
            return 0.0;
        }
        let scaled = s / self.total_mass;
        let k = segs.partition_point(|g| g.s1 < scaled).min(segs.len() - 1);
        segs[k].at(scaled.clamp(segs[k].s0, segs[k].s1))
    }

    /// Quantile function of the normalised measure as linear pieces on `[0, 1]`.
    fn segments(&self) -> Vec<Segment> {
        if self.total_mass <= 0.0 {
            return Vec::new();
        }
        match &self.representation {
            Representation::Empirical { atoms, .. } => {
                let m = atoms.len() as f64;
                atoms
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| Segment {
                        s0: i as f64 / m,
                        s1: (i + 1) as f64 / m,
                        q0: x,
                        q1: x,
                    })
                    .collect()
            }
            Representation::PiecewiseDensity {
                breakpoints,
                values,
            } => {
                let mut out = Vec::new();
                let mut cum = Neumaier::default();
                for (w, &v) in breakpoints.windows(2).zip(values) {
                    if v == 0.0 {
                        continue;
                    }
                    let s0 = cum.sum() / self.total_mass;
                    cum.add(v * (w[1] - w[0]));
                    let s1 = (cum.sum() / self.total_mass).min(1.0);
                    out.push(Segment {
                        s0,
                        s1,
                        q0: w[0],
                        q1: w[1],
                    });
                }
                if let Some(last) = out.last_mut() {
                    last.s1 = 1.0;
                }
                out
            }
        }
    }
}

/// Squared `W_2` distance between the normalisations of two non-zero measures.
fn w2_squared_normalised(mu: &MeasureOnUnit, nu: &MeasureOnUnit) -> f64 {
    let a = mu.segments();
    let b = nu.segments();
    let mut cuts: Vec<f64> = a.iter().chain(&b).flat_map(|g| [g.s0, g.s1]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let (mut ia, mut ib) = (0, 0);
    let mut acc = Neumaier::default();
    for w in cuts.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 <= s0 {
            continue;
        }
        while ia + 1 < a.len() && a[ia].s1 <= s0 {
            ia += 1;
        }
        while ib + 1 < b.len() && b[ib].s1 <= s0 {
            ib += 1;
        }
        let d0 = a[ia].at(s0) - b[ib].at(s0);
        let d1 = a[ia].at(s1) - b[ib].at(s1);
        acc.add((s1 - s0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0);
    }
    acc.sum().max(0.0)
}

/// Quadratic Wasserstein distance between probability measures on `[0, 1]`.
pub fn wasserstein2(mu: &MeasureOnUnit, nu: &MeasureOnUnit) -> Result<f64> {
    for m in [mu, nu] {
        if (m.total_mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Precondition(format!(
                "W_2 needs probability measures, got mass {}",
                m.total_mass
            )));
        }
    }
    Ok(w2_squared_normalised(mu, nu).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurePair {
    pub plus: MeasureOnUnit,
    pub minus: MeasureOnUnit,
}

impl MeasurePair {
    pub fn new(plus: MeasureOnUnit, minus: MeasureOnUnit) -> Result<Self> {
        let total = plus.total_mass + minus.total_mass;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!(
                "species masses sum to {total}, not 1"
            )));
        }
        Ok(Self { plus, minus })
    }

    /// Empirical measures with weight `1/n` per particle.
    pub fn from_configuration(c: &Configuration) -> Result<Self> {
        let n = c.n();
        if n == 0 {
            return Err(Error::Precondition("empty configuration".into()));
        }
        let w = 1.0 / n as f64;
        let side = |v: &[f64]| {
            if v.is_empty() {
                Ok(MeasureOnUnit::zero())
            } else {
                MeasureOnUnit::empirical(v.to_vec(), w)
            }
        };
        Self::new(side(c.plus())?, side(c.minus())?)
    }

    pub fn swap(&self) -> Self {
        Self {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    pub fn is_density(&self) -> bool {
        self.plus.is_density() && self.minus.is_density()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        Self::new(p.plus, p.minus)
    }
}

fn species_term(mu: &MeasureOnUnit, nu: &MeasureOnUnit) -> f64 {
    let (s, i) = (mu.total_mass, nu.total_mass);
    let m = s.min(i);
    let transport = if m > 0.0 {
        m * w2_squared_normalised(mu, nu)
    } else {
        0.0
    };
    transport + (s - i).abs()
}

/// The two-species distance between measure pairs.
pub fn big_w(a: &MeasurePair, b: &MeasurePair) -> f64 {
    (species_term(&a.plus, &b.plus) + species_term(&a.minus, &b.minus)).sqrt()
}

/// `rho_t`: positive density `1` on `(0, (1-t)/2)`, `1/2` on `((1-t)/2, (1+t)/2)`,
/// `0` beyond; the negative density is `1` minus the positive one.
/// `t = 0` is the separated state, `t = 1` the mixed state.
pub fn mixing_curve(t: f64) -> Result<MeasurePair> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!(
            "mixing parameter t = {t} outside [0, 1]"
        )));
    }
    let l = 0.5 * (1.0 - t);
    let r = 0.5 * (1.0 + t);
    let mut bps = vec![0.0];
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (end, vp, vm) in [(l, 1.0, 0.0), (r, 0.5, 0.5), (1.0, 0.0, 1.0)] {
        if end > *bps.last().unwrap() {
            bps.push(end);
            plus.push(vp);
            minus.push(vm);
        }
    }
    MeasurePair::new(
        MeasureOnUnit::density(bps.clone(), plus)?,
        MeasureOnUnit::density(bps, minus)?,
    )
}

pub fn rho_sep() -> MeasurePair {
    mixing_curve(0.0).expect("t = 0 is valid")
}

pub fn rho_mix() -> MeasurePair {
    mixing_curve(1.0).expect("t = 1 is valid")
}

/// Closed form of `big_w(rho_t, rho_s)` for `s <= t`.
pub fn mixing_curve_distance(t: f64, s: f64) -> f64 {
    let (t, s) = if s <= t { (t, s) } else { (s, t) };
    0.5 * ((t + 2.0 * s) / 3.0).sqrt() * (t - s)
}

//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- 4 9`.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wallpile::cell::{self, CellSpec, PsiTable};
use wallpile::config::ModelParams;
use wallpile::continuum;
use wallpile::diagnostics;
use wallpile::energy;
use wallpile::flow::IntegratorOptions;
use wallpile::measures::{self, MeasureOnUnit, MeasurePair};
use wallpile::potentials::{self, PhaseShift};
use wallpile::reproduce::{self, CheckLine};
use wallpile::verify;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn a1() -> PhaseShift {
    PhaseShift::new(1.0).unwrap()
}

fn summarize(lines: &[CheckLine]) -> Outcome {
    let failed: Vec<String> = lines
        .iter()
        .filter(|l| !l.pass)
        .map(CheckLine::render)
        .collect();
    let worst = lines.iter().map(|l| l.margin).fold(f64::INFINITY, f64::min);
    if failed.is_empty() {
        outcome(
            true,
            format!("{} checks, worst margin {worst:+.4}", lines.len()),
        )
    } else {
        outcome(false, failed.join("; "))
    }
}

fn criterion_1() -> Outcome {
    let (rows, _) =
        reproduce::table4(&[16, 32, 64, 128, 256], a1(), &IntegratorOptions::default()).unwrap();
    let lines = reproduce::check_table4(&rows);
    // 5 x (d, d_bar, separated) + 4 q values
    assert_eq!(lines.len(), 19);
    summarize(&lines)
}

fn criterion_2() -> Outcome {
    let (rows, _) =
        reproduce::table5(&[16, 32, 64, 128], a1(), &IntegratorOptions::default()).unwrap();
    let lines = reproduce::check_table5(&rows);
    assert_eq!(lines.len(), 4 + 3);
    summarize(&lines)
}

fn criterion_3() -> Outcome {
    let runs = reproduce::fig4(64, a1(), &IntegratorOptions::default()).unwrap();
    summarize(&reproduce::check_fig4(&runs))
}

fn criterion_4() -> Outcome {
    let sum = potentials::v_prime_eff_abs(1.98).unwrap();
    let force = potentials::w_prime(potentials::r_star(a1()).unwrap(), a1()).abs();
    let margin = diagnostics::separation_criterion(1.0, 1.98, a1()).unwrap();
    let checks = [
        ("sum |V'(1.98k)|", sum, 0.1576, 5e-4),
        ("|W1'(r*)|", force, 0.4477, 5e-4),
        ("criterion margin", margin, -0.2901, 1e-3),
    ];
    let parts: Vec<String> = checks
        .iter()
        .map(|(name, v, r, tol)| {
            let ok = (v - r).abs() <= *tol;
            format!(
                "{name} = {v:.6} vs {r} +- {tol:e} {}",
                if ok { "ok" } else { "out" }
            )
        })
        .collect();
    outcome(
        checks.iter().all(|(_, v, r, tol)| (v - r).abs() <= *tol),
        parts.join("; "),
    )
}

fn criterion_5() -> Outcome {
    let mut worst_curve = 0.0_f64;
    for i in 0..20 {
        for j in 0..20 {
            let (t, s) = (i as f64 / 19.0, j as f64 / 19.0);
            let got = measures::big_w(
                &measures::mixing_curve(t).unwrap(),
                &measures::mixing_curve(s).unwrap(),
            );
            worst_curve = worst_curve.max((got - measures::mixing_curve_distance(t, s)).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_pairs = 0.0_f64;
    for _ in 0..100 {
        let np = rng.random_range(1..=12);
        let nm = rng.random_range(1..=12);
        let draw =
            |rng: &mut ChaCha8Rng, k| (0..k).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let x =
            wallpile::config::Configuration::new(draw(&mut rng, np), draw(&mut rng, nm)).unwrap();
        let y =
            wallpile::config::Configuration::new(draw(&mut rng, np), draw(&mut rng, nm)).unwrap();
        let d2: f64 = x
            .to_block()
            .iter()
            .zip(y.to_block())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let expect = (d2 / (np + nm) as f64).sqrt();
        let got = measures::big_w(
            &MeasurePair::from_configuration(&x).unwrap(),
            &MeasurePair::from_configuration(&y).unwrap(),
        );
        worst_pairs = worst_pairs.max((got - expect).abs());
    }

    // pairs of mass (1/2, 1/2): mixing-curve densities and balanced empirical pairs
    let random_pair = |rng: &mut ChaCha8Rng| -> MeasurePair {
        if rng.random_bool(0.3) {
            measures::mixing_curve(rng.random()).unwrap()
        } else {
            let k = rng.random_range(1..=8);
            let w = 0.5 / k as f64;
            let atoms =
                |rng: &mut ChaCha8Rng| (0..k).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
            MeasurePair::new(
                MeasureOnUnit::empirical(atoms(rng), w).unwrap(),
                MeasureOnUnit::empirical(atoms(rng), w).unwrap(),
            )
            .unwrap()
        }
    };
    let mut worst_slack = f64::INFINITY;
    for _ in 0..500 {
        let (p, q, r) = (
            random_pair(&mut rng),
            random_pair(&mut rng),
            random_pair(&mut rng),
        );
        let slack = measures::big_w(&p, &q) + measures::big_w(&q, &r) - measures::big_w(&p, &r);
        worst_slack = worst_slack.min(slack);
    }
    outcome(
        worst_curve <= 1e-9 && worst_pairs <= 1e-12 && worst_slack >= -1e-10,
        format!("mixing curve {worst_curve:.2e}, empirical pairs {worst_pairs:.2e}, triangle slack {worst_slack:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=32);
        let np = rng.random_range(0..=n);
        let nm = n - np;
        let alpha = rng.random_range(0.5..(4.0 * n as f64));
        let gamma = rng.random_range(0.0..2.0);
        let a = PhaseShift::new(rng.random_range(0.0..=1.0)).unwrap();
        let p = ModelParams::new(np, nm, alpha, gamma, a).unwrap();
        // same-species gaps at least 1e-3, positions well inside the unit interval
        let species = |rng: &mut ChaCha8Rng, k: usize| -> Vec<f64> {
            loop {
                let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
                v.sort_by(f64::total_cmp);
                if v.windows(2).all(|w| w[1] - w[0] > 1e-3) {
                    return v;
                }
            }
        };
        let (plus, minus) = (species(&mut rng, np), species(&mut rng, nm));
        let g = energy::grad_split(&plus, &minus, &p).unwrap().block();
        let mut x = plus.clone();
        x.extend_from_slice(&minus);
        let e = |x: &[f64]| energy::energy_split(&x[..np], &x[np..], &p);
        let h = 1e-6;
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (e(&xp) - e(&xm)) / (2.0 * h);
            diff2 += (fd - g[k]).powi(2);
            norm2 += g[k].powi(2);
        }
        worst = worst.max(diff2.sqrt() / norm2.sqrt().max(1e-300));
    }
    outcome(
        worst <= 1e-6,
        format!("worst relative error {worst:.2e} over 100 configurations"),
    )
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0_f64;
    for n in [2usize, 5, 16] {
        for alpha in [0.5, 1.0, 3.0] {
            let h = energy::quadratic_comparator_hessian(n, alpha);
            let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let top = 2.0 * alpha.powi(3) / n as f64;
            worst = worst.max(ev[0].abs());
            for v in &ev[1..] {
                worst = worst.max((v - top).abs());
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("worst eigenvalue deviation {worst:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let m_list = [32.0, 64.0, 128.0];
    let tol = 2.0 * cell::SOLVER_TOL;
    let seed = 8;
    let table: PsiTable = reproduce::psi_table(&m_list, cell::DEFAULT_STARTS, seed).unwrap();
    let g = table.sigma_plus.len();
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    let mut note = |name: &str, slack: f64| {
        worst = worst.min(slack);
        if slack < 0.0 {
            failures.push(format!("{name} slack {slack:.2e}"));
        }
    };
    let psi = |i: usize, j: usize, k: usize| table.point(i, j).samples[k].psi_m;

    // psi_m(s, 0) for s = 0, 1/4, ..., 2 covers every sigma^+ + sigma^-
    let line: Vec<Vec<f64>> = (0..2 * g - 1)
        .map(|l| {
            let s = 0.25 * l as f64;
            m_list
                .iter()
                .enumerate()
                .map(|(k, &m)| {
                    if l < g {
                        psi(l, 0, k)
                    } else {
                        cell::psi_m(
                            &CellSpec::new(s, 0.0, m).unwrap(),
                            cell::DEFAULT_STARTS,
                            seed,
                        )
                        .unwrap()
                        .value
                    }
                })
                .collect()
        })
        .collect();

    for k in 0..m_list.len() {
        for i in 0..g {
            for j in 0..g {
                let v = psi(i, j, k);
                note("clamp", v);
                note("symmetry", tol - (v - psi(j, i, k)).abs());
                note("lower bound", v - (psi(i, 0, k) + psi(0, j, k) - tol));
                note("upper bound", line[i + j][k] + tol - v);
            }
        }
        for l in 1..line.len() {
            note("monotonicity", line[l][k] - line[l - 1][k] + tol);
        }
    }

    let sep = table.point(g - 1, 0);
    let mix = table.point(g / 2, g / 2);
    let gap = sep.estimate - mix.estimate - sep.uncertainty - mix.uncertainty;
    if !(gap > 0.0) {
        failures.push(format!(
            "psi(1/2,1/2) not below psi(1,0) by a positive margin: {gap:.3e}"
        ));
    }

    let ts = [1e-2, 1e-3, 1e-4];
    let quotients = continuum::slope_lower_bound_at_sep(&table, &ts).unwrap();
    let scaled: Vec<f64> = quotients
        .iter()
        .zip(ts)
        .map(|(q, t)| q * t.sqrt())
        .collect();
    let hi = scaled.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let lo = scaled.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let spread = hi / lo - 1.0;
    if !(lo > 0.0 && spread <= 0.01) {
        failures.push(format!(
            "slope quotients not ~ t^(-1/2): spread {spread:.3e}"
        ));
    }

    let detail = format!(
        "worst invariant slack {worst:.2e}; psi(1,0) = {:.4} +- {:.1e}, psi(1/2,1/2) = {:.4} +- {:.1e}; quotient spread {spread:.1e}",
        sep.estimate, sep.uncertainty, mix.estimate, mix.uncertainty
    );
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; {}", failures.join("; ")))
    }
}

fn criterion_9() -> Outcome {
    let report = verify::run_audit().unwrap();
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    // the bound as literally stated: |V(r) - 2r e^{-2r}| <= C r e^{-4r} with C bounded on [5, 20]
    let rs: Vec<f64> = (0..=150).map(|k| 5.0 + 0.1 * k as f64).collect();
    let (lo, hi) = verify::asymptotic_constant_spread(|r| 2.0 * r * (-2.0 * r).exp(), &rs);
    let literal_ok = hi / lo <= 2.0;
    let detail = format!(
        "{} audit checks, {} failed{}; literal |V - 2r e^(-2r)| / (r e^(-4r)) ranges over [{lo:.3e}, {hi:.3e}]",
        report.checks.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) },
    );
    outcome(failed.is_empty() && literal_ok, detail)
}

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if std::env::args().any(|a| a == "--list") {
        for k in 1..=9 {
            println!("criterion_{k}: test");
        }
        return;
    }
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "table 4 reproduction", criterion_1),
        (2, "table 5 reproduction", criterion_2),
        (3, "regime flags at n = 64", criterion_3),
        (4, "separation constants", criterion_4),
        (5, "metric oracles", criterion_5),
        (6, "gradient audit", criterion_6),
        (7, "comparator spectrum", criterion_7),
        (8, "cell-problem properties", criterion_8),
        (9, "potential audit suite", criterion_9),
    ];
    let mut failed = 0;
    for (k, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        println!(
            "criterion {k} {} [{name}] ({:.1} s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

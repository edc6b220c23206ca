mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use wallpile::config::ModelParams;
use wallpile::diagnostics::RunStats;
use wallpile::flow::IntegratorOptions;
use wallpile::potentials::PhaseShift;
use wallpile::reproduce::{self, AlphaRule, CheckLine, FlowRun};
use wallpile::verify;
use wallpile::Error;

use svg::{Plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Experiment {
    Table4,
    Table5,
    Fig4,
    Fig5,
    #[value(name = "psi_table")]
    PsiTable,
    #[value(name = "sep_minimizer")]
    SepMinimizer,
    Audit,
    Custom,
}

/// Reproduction harness for the two-species wall pile-up model.
#[derive(Parser, Debug, Serialize)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Particle counts: `16..256` (doubling) or a comma list.
    #[arg(long)]
    n: Option<String>,
    /// half_n, n, seven_tenths_n, two_n or custom(c) for alpha_n = c n.
    #[arg(long)]
    alpha_rule: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = wallpile::flow::T_EQUILIBRIUM)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    atol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; must not exist or be empty. Defaults to `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare against the bundled reference values and exit 1 on a breach.
    #[arg(long)]
    check: bool,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Multistart count for the cell problem.
    #[arg(long, default_value_t = wallpile::cell::DEFAULT_STARTS)]
    starts: usize,
    /// Cell sizes for psi_table.
    #[arg(long, default_value = "32,64,128")]
    m_list: String,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Singular(_) => Self::Numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

#[derive(Default)]
struct Outcome {
    files: Vec<(String, String)>,
    checks: Vec<CheckLine>,
    audit: Option<verify::AuditReport>,
    summary: serde_json::Value,
}

impl Outcome {
    fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn breached(&self) -> bool {
        self.checks.iter().any(|c| !c.pass) || self.audit.as_ref().is_some_and(|a| !a.all_pass())
    }
}

fn params_hash(p: &ModelParams) -> String {
    let bytes = serde_json::to_vec(p).unwrap_or_default();
    Sha256::digest(&bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn options(cli: &Cli) -> IntegratorOptions {
    IntegratorOptions {
        rtol: cli.rtol,
        atol: cli.atol,
        t_end: cli.t_end,
        ..IntegratorOptions::default()
    }
}

fn n_list(cli: &Cli, default: &str) -> Result<Vec<usize>, Failure> {
    let ns = reproduce::parse_n_list(cli.n.as_deref().unwrap_or(default))?;
    if let Some(n) = ns.iter().find(|n| **n == 0 || *n % 2 != 0) {
        return Err(Failure::Config(format!(
            "n = {n} must be even and positive"
        )));
    }
    Ok(ns)
}

fn single_n(cli: &Cli, default: usize) -> Result<usize, Failure> {
    match n_list(cli, &default.to_string())?.as_slice() {
        [n] => Ok(*n),
        _ => Err(Failure::Config("this experiment takes a single n".into())),
    }
}

fn stats_csv(runs: &[FlowRun], opts: &IntegratorOptions) -> String {
    let mut out = format!("{}\n", RunStats::CSV_HEADER);
    for r in runs {
        out.push_str(
            &r.stats
                .csv_row(&params_hash(&r.params), opts.rtol, opts.atol),
        );
        out.push('\n');
    }
    out
}

fn trajectory_plot(run: &FlowRun) -> String {
    let n_plus = run.params.n_plus;
    let n = run.params.n();
    let states: Vec<_> = run
        .trajectory
        .samples
        .iter()
        .chain(std::iter::once(&run.trajectory.final_state))
        .collect();
    let series = (0..n)
        .map(|k| {
            let points = states
                .iter()
                .map(|s| {
                    let x = if k < n_plus {
                        s.config.plus()[k]
                    } else {
                        s.config.minus()[k - n_plus]
                    };
                    (s.t, x)
                })
                .collect();
            Series {
                points,
                color: if k < n_plus { "crimson" } else { "royalblue" },
            }
        })
        .collect();
    Plot {
        title: format!("n = {n}, alpha_n = {}", run.params.alpha),
        x_label: "t".into(),
        y_label: "position".into(),
        log_x: true,
        series,
    }
    .render()
}

fn runs_files(out: &mut Outcome, runs: &[FlowRun]) {
    for r in runs {
        out.file(
            format!("final_n{}_{}.csv", r.params.n(), r.rule.label()),
            r.final_config().to_csv(),
        );
    }
}

fn run_experiment(cli: &Cli) -> Result<Outcome, Failure> {
    let a = PhaseShift::new(cli.a)?;
    let opts = options(cli);
    let mut out = Outcome::default();
    match cli.experiment {
        Experiment::Table4 => {
            let (rows, runs) = reproduce::table4(&n_list(cli, "16..256")?, a, &opts)?;
            out.file("table4.csv", reproduce::table4_csv(&rows));
            out.file("runs.csv", stats_csv(&runs, &opts));
            runs_files(&mut out, &runs);
            out.checks = reproduce::check_table4(&rows);
            out.summary = json!(rows);
        }
        Experiment::Table5 => {
            let (rows, runs) = reproduce::table5(&n_list(cli, "16..128")?, a, &opts)?;
            out.file("table5.csv", reproduce::table5_csv(&rows));
            out.file("runs.csv", stats_csv(&runs, &opts));
            runs_files(&mut out, &runs);
            out.checks = reproduce::check_table5(&rows);
            out.summary = json!(rows);
        }
        Experiment::Fig4 => {
            let n = single_n(cli, reproduce::FIG4_N)?;
            let runs = reproduce::fig4(n, a, &opts)?;
            for r in &runs {
                let label = r.rule.label();
                out.file(format!("fig4_{label}.csv"), r.trajectory.to_csv());
                let mut o = opts.clone();
                o.sample_times = reproduce::fig4_sample_times(opts.t_end);
                out.file(
                    format!("fig4_{label}.json"),
                    r.trajectory.metadata_json(&r.params, &o)?,
                );
                if cli.svg {
                    out.file(format!("fig4_{label}.svg"), trajectory_plot(r));
                }
            }
            out.file("runs.csv", stats_csv(&runs, &opts));
            out.checks = reproduce::check_fig4(&runs);
            out.summary = json!(runs.iter().map(|r| &r.stats).collect::<Vec<_>>());
        }
        Experiment::Fig5 => {
            let n = single_n(cli, reproduce::FIG5_N)?;
            let times: Vec<f64> = reproduce::FIG5_TIMES
                .iter()
                .map(|&t| {
                    if t == wallpile::flow::T_EQUILIBRIUM {
                        opts.t_end
                    } else {
                        t
                    }
                })
                .collect();
            let slices = reproduce::fig5(n, a, &opts, &times)?;
            for (k, s) in slices.iter().enumerate() {
                out.file(format!("fig5_slice{k}.csv"), s.to_csv());
            }
            if cli.svg {
                let colors = ["gray", "orange", "seagreen", "black"];
                let series = slices
                    .iter()
                    .zip(colors)
                    .flat_map(|(s, c)| {
                        [
                            Series {
                                points: s.plus.clone(),
                                color: c,
                            },
                            Series {
                                points: s.minus.clone(),
                                color: c,
                            },
                        ]
                    })
                    .collect();
                let plot = Plot {
                    title: format!("densities, n = {n}"),
                    x_label: "x".into(),
                    y_label: "density".into(),
                    log_x: false,
                    series,
                };
                out.file("fig5.svg", plot.render());
            }
            out.checks = reproduce::check_fig5(&slices, n);
            out.summary = json!(slices.iter().map(|s| s.t).collect::<Vec<_>>());
        }
        Experiment::PsiTable => {
            let m_list: Vec<f64> = cli
                .m_list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::Config(format!("bad m list '{}'", cli.m_list)))
                })
                .collect::<Result<_, _>>()?;
            let table = reproduce::psi_table(&m_list, cli.starts, cli.seed)?;
            out.file("psi_table.csv", table.to_csv());
            out.summary = json!(table
                .points
                .iter()
                .map(|p| (p.sigma_plus, p.sigma_minus, p.estimate, p.uncertainty))
                .collect::<Vec<_>>());
        }
        Experiment::SepMinimizer => {
            let rule: AlphaRule = cli.alpha_rule.as_deref().unwrap_or("two_n").parse()?;
            let rows = reproduce::sep_minimizer_sweep(&n_list(cli, "16..256")?, rule, a)?;
            out.file("sep_minimizer.csv", reproduce::sep_minimizer_csv(&rows));
            out.summary = json!(rows.len());
        }
        Experiment::Audit => {
            let report = verify::run_audit()?;
            out.file("audit.json", report.to_json()?);
            out.file("audit.txt", report.to_text());
            out.audit = Some(report);
        }
        Experiment::Custom => {
            let rule: AlphaRule = cli
                .alpha_rule
                .as_deref()
                .ok_or_else(|| Failure::Config("custom needs --alpha-rule".into()))?
                .parse()?;
            let ns = n_list(cli, "")?;
            let jobs: Vec<_> = ns.iter().map(|&n| (n, rule)).collect();
            let runs = reproduce::run_batch(&jobs, a, cli.gamma, &opts)?;
            out.file("runs.csv", stats_csv(&runs, &opts));
            runs_files(&mut out, &runs);
            out.summary = json!(runs.iter().map(|r| &r.stats).collect::<Vec<_>>());
        }
    }
    Ok(out)
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(Failure::Config(format!(
            "output directory {} is not empty",
            dir.display()
        )));
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join(".incomplete"), "run in progress\n")?;
    Ok(())
}

fn configure_threads() -> Result<usize, Failure> {
    if let Ok(v) = std::env::var("WALLPILE_THREADS") {
        let k: usize = v.parse().ok().filter(|k| *k > 0).ok_or_else(|| {
            Failure::Config(format!(
                "WALLPILE_THREADS = '{v}' is not a positive integer"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(rayon::current_num_threads())
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    if cli.gamma != 0.0 && cli.experiment != Experiment::Custom {
        return Err(Failure::Config(
            "--gamma is only honoured by the custom experiment".into(),
        ));
    }
    let threads = configure_threads()?;
    let dir = cli.out.clone().unwrap_or_else(|| {
        let name = serde_json::to_value(cli.experiment)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        PathBuf::from("out").join(name)
    });
    prepare_dir(&dir)?;
    let start = Instant::now();
    let outcome = match run_experiment(cli) {
        Ok(o) => o,
        Err(e) => {
            let msg = match &e {
                Failure::Config(m) | Failure::Numerical(m) => m.clone(),
            };
            fs::write(dir.join(".incomplete"), format!("failed: {msg}\n"))?;
            return Err(e);
        }
    };
    for (name, contents) in &outcome.files {
        fs::write(dir.join(name), contents)?;
    }
    let manifest = json!({
        "config": cli,
        "seed": cli.seed,
        "tolerances": { "rtol": cli.rtol, "atol": cli.atol },
        "wall_time_s": start.elapsed().as_secs_f64(),
        "threads": threads,
        "versions": { "wallpile": env!("CARGO_PKG_VERSION") },
        "files": outcome.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "checks": outcome.checks,
        "summary": outcome.summary,
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap_or_default(),
    )?;
    fs::remove_file(dir.join(".incomplete"))?;

    for c in &outcome.checks {
        println!("{}", c.render());
    }
    if let Some(a) = &outcome.audit {
        print!("{}", a.to_text());
    }
    println!(
        "wrote {} files to {}",
        outcome.files.len() + 1,
        dir.display()
    );
    let breach = outcome.breached();
    Ok(!breach || (!cli.check && outcome.audit.is_none()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

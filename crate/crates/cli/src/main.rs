//! `landscape`: stationary densities, landscapes, chains and checks for
//! driven diffusions on the circle.

mod figures;
mod output;
mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use landscape_core::asymptotics::{classify, landscape_v, sup_construct, wkb_prefactor, Regime};
use landscape_core::attractors::{barriers, find_fixed_points, kramers_rate, AttractorGraph, Direction, Stability};
use landscape_core::chain::{build_chain, chain_exponents, equilibrium_test, lambda_surgery_lifts, paste_global};
use landscape_core::exact_stationary::solve_stationary;
use landscape_core::model::{CircleSystem, PeriodicPotential, SystemConfig};
use landscape_core::simulate::{first_passage, run_ensemble, SimConfig};
use landscape_core::verify::{epsilon_sweep, run_suite, TorusConfig};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::output::Table;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] landscape_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0} verification check(s) failed")]
    Verification(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use landscape_core::Error as E;
        match self {
            CliError::Core(
                E::Config { .. }
                | E::InvalidEpsilon(_)
                | E::MissingEpsilon
                | E::GridTooSmall { .. }
                | E::InvalidSimConfig(_)
                | E::UnstableStep { .. },
            )
            | CliError::Usage(_) => 2,
            CliError::Core(_) | CliError::Io { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "landscape", version, about = "Landscapes of driven diffusions on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// The system `dθ = (f − U′) dt + √(2ε) dB`. Flags override the config file.
/// Without `--cos`/`--sin`/`--wells`, `U = −cos(2πθ)/2π`.
#[derive(Args, Clone)]
struct SystemArgs {
    /// JSON config `{cos, sin, f, epsilon}`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Constant drive.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<f64>,
    /// Noise strength.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Cosine coefficients of U, modes 1, 2, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cos: Option<Vec<f64>>,
    /// Sine coefficients of U, modes 1, 2, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sin: Option<Vec<f64>>,
    /// Use `U = −cos(2πkθ)/(2πk)` with k wells.
    #[arg(long, conflicts_with_all = ["cos", "sin"])]
    wells: Option<usize>,
}

impl SystemArgs {
    fn load(&self) -> CliResult<Option<SystemConfig>> {
        self.config
            .as_ref()
            .map(|p| {
                let text = fs::read_to_string(p).map_err(|e| CliError::Io { path: p.display().to_string(), source: e })?;
                Ok(SystemConfig::from_json(&text)?)
            })
            .transpose()
    }

    fn potential(&self, file: Option<&SystemConfig>) -> CliResult<PeriodicPotential> {
        if let Some(k) = self.wells {
            if k == 0 {
                return Err(config_err("wells", "must be at least 1"));
            }
            return Ok(PeriodicPotential::sine_wells(k));
        }
        if self.cos.is_some() || self.sin.is_some() {
            let c = self.cos.clone().unwrap_or_default();
            let s = self.sin.clone().unwrap_or_default();
            return Ok(PeriodicPotential::new(c, s)?);
        }
        match file {
            Some(cfg) => Ok(PeriodicPotential::new(cfg.cos.clone(), cfg.sin.clone())?),
            None => Ok(PeriodicPotential::sine_wells(1)),
        }
    }

    /// The system with drive `f` (from `drive`, the flag or the file).
    fn system_with(&self, drive: Option<f64>) -> CliResult<CircleSystem> {
        let file = self.load()?;
        let f = drive
            .or(self.f)
            .or(file.as_ref().map(|c| c.f))
            .ok_or_else(|| config_err("f", "missing; pass --f or a config file"))?;
        let sys = CircleSystem::new(self.potential(file.as_ref())?, f)?;
        match self.epsilon.or(file.and_then(|c| c.epsilon)) {
            Some(e) if !(e.is_finite() && e > 0.0) => {
                Err(config_err("epsilon", &format!("must be positive and finite, got {e}")))
            }
            Some(e) => Ok(sys.with_epsilon(e)?),
            None => Ok(sys),
        }
    }

    fn system(&self) -> CliResult<CircleSystem> {
        self.system_with(None)
    }
}

fn config_err(field: &str, reason: &str) -> CliError {
    CliError::Core(landscape_core::Error::Config { field: field.into(), reason: reason.into() })
}

fn need_epsilon(sys: &CircleSystem) -> CliResult<f64> {
    sys.epsilon().map_err(|_| config_err("epsilon", "required by this command; pass --epsilon"))
}

#[derive(Args, Clone)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Fig1,
    Fig2,
    Fig3,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Exact stationary density and cycle flux.
    Solve {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[command(flatten)]
        out: Output,
    },
    /// U*, the exponent landscape V and the limit-cycle prefactor.
    Landscape {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[command(flatten)]
        out: Output,
        /// Also write the triptych (tilted potential, U*, V).
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Attractors, barriers and Kramers rates.
    Rates {
        #[command(flatten)]
        sys: SystemArgs,
        /// Apply the curvature prefactor.
        #[arg(long)]
        prefactor: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Markov chain between attractors: π, W_i, equilibrium test, lifts.
    Chain {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        prefactor: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Global landscape pasted from local pieces.
    Paste {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[command(flatten)]
        out: Output,
        /// Also write the four-panel pasting figure.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Euler–Maruyama ensemble: histogram, flux, optional passage times.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 100)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        burn_in: f64,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        /// Skip the step-size safeguard.
        #[arg(long)]
        force: bool,
        /// Measure passage times from this angle (requires --mfpt-to).
        #[arg(long, requires = "mfpt_to")]
        mfpt_from: Option<f64>,
        #[arg(long, requires = "mfpt_from")]
        mfpt_to: Option<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Run the verification suite; exit 4 if any check fails.
    Verify {
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[arg(long, default_value_t = 20_000)]
        torus_paths: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Flux against drive (`--f-range`) or convergence in ε (`--eps-list`).
    Sweep {
        #[command(flatten)]
        sys: SystemArgs,
        /// `lo:hi`, sampled at `--steps` evenly spaced drives.
        #[arg(long, conflicts_with = "eps_list")]
        f_range: Option<String>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Decreasing noise strengths.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Write the standard figures as SVG plus CSV data.
    Figures {
        #[arg(value_enum, default_value = "all")]
        which: Which,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Noise strength for the chain behind the pasting figure.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
}

fn write_to(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

fn emit(out: &Output, text: &str) -> CliResult<()> {
    match &out.out {
        Some(p) => write_to(p, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io { path: "<stdout>".into(), source: e }),
    }
}

fn emit_json(out: &Output, v: &Value) -> CliResult<()> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(v).expect("JSON values serialize")))
}

fn solve(sys: &SystemArgs, grid: usize, out: &Output) -> CliResult<()> {
    let sys = sys.system()?;
    let eps = need_epsilon(&sys)?;
    let sol = solve_stationary(&sys, grid)?;
    let mut t = Table::new(
        "solve",
        json!({ "epsilon": eps, "f": sys.drive(), "J": sol.flux, "logA": sol.log_normalizer }),
        &["theta", "u", "log_u"],
    );
    for (k, &th) in sol.density.grid().iter().enumerate() {
        t.row(vec![Some(th), Some(sol.density.values()[k]), Some(sol.log_density.values()[k])]);
    }
    emit(out, &t.to_csv())
}

fn landscape(sys: &SystemArgs, grid: usize, out: &Output, svg: Option<&Path>) -> CliResult<()> {
    let sys = sys.system()?;
    let class = classify(&sys);
    let v = landscape_v(&sys, grid)?;
    let ustar = sup_construct(&sys, grid)?;
    let mut meta = json!({
        "f": sys.drive(),
        "regime": class.regime,
        "nu": class.nu,
        "degenerate": class.degenerate,
        "kinks": v.kinks(),
        "ustar_kinks": ustar.kinks(),
    });
    let c0 = match class.regime {
        Regime::LimitCycle => {
            let p = wkb_prefactor(&sys, grid)?;
            meta["period"] = json!(p.period);
            meta["flux"] = json!(p.flux);
            Some(p.c0)
        }
        Regime::FixedPoints => {
            let stars: Vec<f64> = find_fixed_points(&sys)?
                .into_iter()
                .filter(|p| p.kind == Stability::Stable)
                .map(|p| p.theta)
                .collect();
            meta["theta_star"] = json!(stars);
            None
        }
    };
    let mut t = Table::new("landscape", meta, &["theta", "V", "Ustar", "C0"]);
    for (k, &th) in v.grid().iter().enumerate() {
        t.row(vec![Some(th), Some(v.values()[k]), Some(ustar.values()[k]), c0.as_ref().map(|c| c.values()[k])]);
    }
    if let Some(p) = svg {
        write_to(p, &figures::fig1(&sys, grid)?.svg)?;
    }
    emit(out, &t.to_csv())
}

fn rates(sys: &SystemArgs, prefactor: bool, out: &Output) -> CliResult<()> {
    let sys = sys.system()?;
    let g = AttractorGraph::new(&sys)?;
    let attractors: Vec<Value> = g
        .attractors()
        .iter()
        .enumerate()
        .map(|(i, p)| json!({ "index": i, "theta": p.theta, "curvature": p.curvature }))
        .collect();
    let bars: Vec<Value> =
        barriers(&g).iter().map(|b| json!([b.from, b.to, b.height, b.direction.label()])).collect();
    let mut at_eps = Vec::new();
    if let Some(eps) = sys.epsilon_opt() {
        for i in 0..g.len() {
            for dir in [Direction::Cw, Direction::Ccw] {
                let r = kramers_rate(&g, i, dir, eps, prefactor)?;
                at_eps.push(json!({
                    "from": r.from,
                    "to": r.to,
                    "direction": dir.label(),
                    "exponent": r.exponent,
                    "prefactor": r.prefactor,
                    "log_rate": r.log_rate,
                    "rate": r.rate(),
                    "warning": r.warning,
                }));
            }
        }
    }
    emit_json(
        out,
        &json!({
            "f": sys.drive(),
            "epsilon": sys.epsilon_opt(),
            "attractors": attractors,
            "barriers": bars,
            "rates_at_epsilon": at_eps,
        }),
    )
}

fn chain(sys: &SystemArgs, prefactor: bool, out: &Output) -> CliResult<()> {
    let sys = sys.system()?;
    let eps = need_epsilon(&sys)?;
    let g = AttractorGraph::new(&sys)?;
    let c = build_chain(&g, eps, prefactor)?;
    let asym = chain_exponents(&c)?;
    let eq = equilibrium_test(&c)?;
    let lifts = lambda_surgery_lifts(&asym, &c)?;
    let n = c.len();
    let log_rates: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| (0..n).map(|j| Some(c.log_rate(i, j)).filter(|x| x.is_finite())).collect())
        .collect();
    emit_json(
        out,
        &json!({
            "f": sys.drive(),
            "epsilon": eps,
            "states": n,
            "theta": g.attractors().iter().map(|p| p.theta).collect::<Vec<_>>(),
            "log_rates": log_rates,
            "pi": asym.pi,
            "log_pi": asym.log_pi,
            "W_i": asym.w,
            "equilibrium": eq.equilibrium,
            "defect": eq.defect,
            "log_rate_ratio": eq.log_rate_ratio,
            "lifts": lifts,
        }),
    )
}

fn paste(sys: &SystemArgs, grid: usize, out: &Output, svg: Option<&Path>) -> CliResult<()> {
    let sys = sys.system()?;
    let eps = need_epsilon(&sys)?;
    let g = AttractorGraph::new(&sys)?;
    let c = build_chain(&g, eps, false)?;
    let asym = chain_exponents(&c)?;
    let eq = equilibrium_test(&c)?;
    let lifts = lambda_surgery_lifts(&asym, &c)?;
    let gl = paste_global(&g, &asym, grid)?;
    let mut t = Table::new(
        "paste",
        json!({
            "f": sys.drive(),
            "epsilon": eps,
            "W_i": gl.w_i,
            "defect": eq.defect,
            "equilibrium": eq.equilibrium,
            "lifts": lifts,
            "exponent_lifts": gl.exponent_lifts,
            "kinks": gl.w.kinks(),
            "plateau_kinks": gl.plateau_kinks,
            "ties": gl.ties,
            "continuous": gl.is_continuous(),
        }),
        &["theta", "W"],
    );
    for (k, &th) in gl.w.grid().iter().enumerate() {
        t.row(vec![Some(th), Some(gl.w.values()[k])]);
    }
    if let Some(p) = svg {
        write_to(p, &figures::fig3(&sys, eps, grid)?.svg)?;
    }
    emit(out, &t.to_csv())
}

fn simulate(sys: &SystemArgs, cfg: SimConfig, mfpt: Option<(f64, f64)>, out: &Output) -> CliResult<()> {
    let sys = sys.system()?;
    let eps = need_epsilon(&sys)?;
    let stats = run_ensemble(&sys, &cfg)?;
    let passage = match mfpt {
        Some((from, to)) => {
            let p = first_passage(&sys, &SimConfig { start: from, ..cfg.clone() }, from, to)?;
            json!({
                "from": from,
                "to": to,
                "n": p.times.len(),
                "censored": p.censored,
                "mean": p.mean(),
                "std_dev": p.std_dev(),
                "stderr": p.stderr(),
                "cv": p.cv(),
            })
        }
        None => Value::Null,
    };
    let mut t = Table::new(
        "simulate",
        json!({
            "f": sys.drive(),
            "epsilon": eps,
            "seed": cfg.seed,
            "paths": cfg.n_paths,
            "dt": stats.dt,
            "steps": stats.steps,
            "horizon": cfg.horizon,
            "burn_in": cfg.burn_in,
            "flux": stats.flux,
            "flux_stderr": stats.flux_stderr,
            "mfpt": passage,
        }),
        &["bin_center", "density"],
    );
    let b = cfg.bins as f64;
    for (k, d) in stats.density().into_iter().enumerate() {
        t.row(vec![Some((k as f64 + 0.5) / b), Some(d)]);
    }
    emit(out, &t.to_csv())
}

fn verify(grid: usize, torus_paths: usize, seed: u64, out: &Output) -> CliResult<()> {
    let torus = TorusConfig { n_paths: torus_paths, seed, ..Default::default() };
    let checks = run_suite(grid, &torus)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    emit_json(out, &json!({ "all_passed": failed == 0, "checks": checks }))?;
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

fn parse_range(s: &str) -> CliResult<(f64, f64)> {
    let bad = || config_err("f-range", &format!("expected lo:hi with lo < hi, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (lo, hi): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn sweep(
    sys: &SystemArgs,
    f_range: Option<&str>,
    steps: usize,
    eps_list: Option<&[f64]>,
    grid: usize,
    out: &Output,
) -> CliResult<()> {
    match (f_range, eps_list) {
        (Some(r), _) => {
            let (lo, hi) = parse_range(r)?;
            if steps < 2 {
                return Err(config_err("steps", "need at least 2"));
            }
            let base = sys.system_with(Some(lo))?;
            let eps = need_epsilon(&base)?;
            let drives: Vec<f64> = (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect();
            let rows: Vec<(f64, f64, Option<f64>)> = drives
                .par_iter()
                .map(|&f| -> CliResult<_> {
                    let s = sys.system_with(Some(f))?;
                    let j = solve_stationary(&s, grid)?.flux;
                    let limit = match classify(&s).regime {
                        Regime::LimitCycle => Some(wkb_prefactor(&s, grid.max(256))?.flux),
                        Regime::FixedPoints => None,
                    };
                    Ok((f, j, limit))
                })
                .collect::<CliResult<_>>()?;
            let mut t = Table::new("sweep", json!({ "epsilon": eps, "f_range": [lo, hi] }), &["f", "J", "J_limit"]);
            for (f, j, l) in rows {
                t.row(vec![Some(f), Some(j), l]);
            }
            emit(out, &t.to_csv())
        }
        (None, Some(list)) => {
            let s = sys.system()?;
            let table = epsilon_sweep(&s, list, grid)?;
            let mut t = Table::new(
                "sweep",
                json!({
                    "f": s.drive(),
                    "fitted_c": table.fitted_c,
                    "exponent_monotone": table.exponent_monotone,
                    "density_monotone": table.density_monotone,
                    "within_bound": table.within_bound,
                }),
                &["epsilon", "exponent_error", "offset", "density_error"],
            );
            for r in &table.rows {
                t.row(vec![Some(r.epsilon), Some(r.exponent_error), Some(r.offset), r.density_error]);
            }
            emit(out, &t.to_csv())
        }
        (None, None) => Err(CliError::Usage("sweep needs --f-range or --eps-list".into())),
    }
}

fn figures_cmd(which: Which, dir: &Path, grid: usize, epsilon: f64) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    let save = |name: &str, fig: figures::Figure| -> CliResult<()> {
        write_to(&dir.join(format!("{name}.svg")), &fig.svg)?;
        write_to(&dir.join(format!("{name}.csv")), &fig.table.to_csv())
    };
    let all = matches!(which, Which::All);
    if all || matches!(which, Which::Fig1) {
        save("fig1", figures::fig1(&CircleSystem::sine(0.5), grid)?)?;
    }
    if all || matches!(which, Which::Fig2) {
        save("fig2", figures::fig2(grid.max(256))?)?;
    }
    if all || matches!(which, Which::Fig3) {
        save("fig3", figures::fig3(&CircleSystem::multiwell(3, 0.1), epsilon, grid)?)?;
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("LANDSCAPE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("LANDSCAPE_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Solve { sys, grid, out } => solve(&sys, grid, &out),
        Command::Landscape { sys, grid, out, svg } => landscape(&sys, grid, &out, svg.as_deref()),
        Command::Rates { sys, prefactor, out } => rates(&sys, prefactor, &out),
        Command::Chain { sys, prefactor, out } => chain(&sys, prefactor, &out),
        Command::Paste { sys, grid, out, svg } => paste(&sys, grid, &out, svg.as_deref()),
        Command::Simulate {
            sys,
            dt,
            horizon,
            paths,
            seed,
            burn_in,
            bins,
            start,
            force,
            mfpt_from,
            mfpt_to,
            out,
        } => {
            let cfg = SimConfig { dt, horizon, n_paths: paths, seed, burn_in, bins, start, force };
            simulate(&sys, cfg, mfpt_from.zip(mfpt_to), &out)
        }
        Command::Verify { grid, torus_paths, seed, out } => verify(grid, torus_paths, seed, &out),
        Command::Sweep { sys, f_range, steps, eps_list, grid, out } => {
            sweep(&sys, f_range.as_deref(), steps, eps_list.as_deref(), grid, &out)
        }
        Command::Figures { which, out_dir, grid, epsilon } => figures_cmd(which, &out_dir, grid, epsilon),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Machine-checkable cross-checks between the exact, asymptotic and
//! simulated pictures.
//!
//! In one dimension the WKB hierarchy for `u ≈ C₀ e^{−φ/ε}` reads
//!
//! ```text
//! (φ′ + F) φ′ = 0                          (eikonal)
//! C₀′ (2φ′ + F) + C₀ (φ″ + F′) = 0          (transport)
//! ```
//!
//! with `F = f − U′`. The rate function `φ = max V − V` decreases along the
//! flow, `F φ′ ≤ 0`, which is the Lyapunov property checked here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{classify, landscape_v, limiting_density, LimitingDensity, Regime};
use crate::attractors::AttractorGraph;
use crate::chain::{build_chain, chain_exponents, paste_global};
use crate::error::{Error, Result};
use crate::exact_stationary::solve_stationary;
use crate::model::{CircleSystem, LandscapeFn, PeriodicPotential};
use crate::numerics::linear_fit;

/// Base step of the first-derivative stencil.
const D1_STEP: f64 = 1.0 / 1024.0;
/// Base step of the second-derivative stencil; coarser to keep roundoff
/// (which grows like `h⁻²`) below `1e-10`.
const D2_STEP: f64 = 1.0 / 128.0;

fn stride(l: &LandscapeFn, step: f64) -> Result<usize> {
    let h = l
        .spacing()
        .ok_or_else(|| Error::InvalidLandscape("residuals need a uniform grid".into()))?;
    Ok(((step / h).round() as usize).max(1))
}

/// Central first and second derivatives at grid index `k`, Richardson
/// extrapolated over strides `s, 2s, 4s, 8s` (eighth order).
fn derivatives(l: &LandscapeFn, k: usize, s1: usize, s2: usize) -> (f64, f64) {
    let h = 1.0 / l.len() as f64;
    let k = k as isize;
    let v = |i: isize| l.value_wrapped(i);
    let d1 = |s: isize| (v(k + s) - v(k - s)) / (2.0 * s as f64 * h);
    let d2 = |s: isize| (v(k + s) - 2.0 * v(k) + v(k - s)) / ((s as f64 * h).powi(2));
    let rich = |d: &dyn Fn(isize) -> f64, s: isize| {
        let mut t: Vec<f64> = (0..4).map(|j| d(s << j)).collect();
        for (level, p) in [4.0, 16.0, 64.0].into_iter().enumerate() {
            for j in 0..3 - level {
                t[j] = (p * t[j] - t[j + 1]) / (p - 1.0);
            }
        }
        t[0]
    };
    (rich(&d1, s1 as isize), rich(&d2, s2 as isize))
}

fn near_kink(l: &LandscapeFn, k: usize, reach: usize, kinks: &[f64]) -> bool {
    let n = l.len() as f64;
    kinks.iter().any(|&t| {
        let d = ((t * n).round() - k as f64).rem_euclid(n);
        d.min(n - d) <= reach as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `sup |(φ′ + F) φ′|`.
    pub eikonal: f64,
    /// `sup |C₀′(2φ′ + F) + C₀(φ″ + F′)| / max|C₀|`; `C₀` is only defined up
    /// to a constant factor.
    pub transport: f64,
    /// Grid points left out because a stencil would cross a kink.
    pub masked: usize,
}

/// Residuals of the first two WKB orders for a candidate pair `(φ, C₀)`.
pub fn wkb_residual(sys: &CircleSystem, phi: &LandscapeFn, c0: &LandscapeFn) -> Result<ResidualReport> {
    if phi.grid() != c0.grid() {
        return Err(Error::InvalidLandscape("φ and C₀ must share a grid".into()));
    }
    let s1 = stride(phi, D1_STEP)?;
    let s2 = stride(phi, D2_STEP)?;
    let reach = 8 * s1.max(s2);
    let kinks: Vec<f64> = phi.kinks().iter().chain(c0.kinks()).copied().collect();
    let (mut eikonal, mut transport, mut masked) = (0.0f64, 0.0f64, 0);
    for (k, &t) in phi.grid().iter().enumerate() {
        if near_kink(phi, k, reach, &kinks) {
            masked += 1;
            continue;
        }
        let (p1, p2) = derivatives(phi, k, s1, s2);
        let (c1, _) = derivatives(c0, k, s1, s2);
        let f = sys.drift(t);
        let f1 = sys.drift_slope(t);
        let c = c0.values()[k];
        eikonal = eikonal.max(((p1 + f) * p1).abs());
        transport = transport.max((c1 * (2.0 * p1 + f) + c * (p2 + f1)).abs());
    }
    let c_max = c0.values().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if c_max > 0.0 {
        transport /= c_max;
    }
    Ok(ResidualReport { eikonal, transport, masked })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub pass: bool,
    /// Grid points where `F · L′ > tol`.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    /// Kinks of `L`, excluded from the check.
    pub excluded: Vec<f64>,
    pub tol: f64,
}

/// Checks `F · L′ ≤ tol` at every grid point whose stencil avoids a kink.
/// The default tolerance `h · max|F| · max|L′|` absorbs the first-order error
/// of central differences across `C¹` junctions.
pub fn lyapunov_check(sys: &CircleSystem, l: &LandscapeFn, tol: Option<f64>) -> Result<LyapunovReport> {
    let n = l.len();
    let h = l.spacing().ok_or_else(|| Error::InvalidLandscape("Lyapunov check needs a uniform grid".into()))?;
    let slope = |k: usize| (l.value_wrapped(k as isize + 1) - l.value_wrapped(k as isize - 1)) / (2.0 * h);
    let max_f = l.grid().iter().map(|&t| sys.drift(t).abs()).fold(0.0, f64::max);
    let max_d = (0..n).map(|k| slope(k).abs()).fold(0.0, f64::max);
    let tol = tol.unwrap_or(h * max_f * max_d);
    let mut violations = Vec::new();
    let mut max_violation: f64 = 0.0;
    for k in 0..n {
        if near_kink(l, k, 2, l.kinks()) {
            continue;
        }
        let x = sys.drift(l.grid()[k]) * slope(k);
        max_violation = max_violation.max(x);
        if x > tol {
            violations.push(l.grid()[k]);
        }
    }
    Ok(LyapunovReport { pass: violations.is_empty(), violations, max_violation, excluded: l.kinks().to_vec(), tol })
}

/// `max V − V`, the limit of `−ε ln u_ε` up to a constant.
pub fn rate_function(v: &LandscapeFn) -> LandscapeFn {
    let top = v.max();
    let mut out = v.map(|_, x| top - x);
    out.set_kinks(v.kinks().to_vec());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// `sup |(−ε ln u_ε − min) − (max V − V)|`.
    pub exponent_error: f64,
    /// `min(−ε ln u_ε)`, the part removed by the shape comparison.
    pub offset: f64,
    /// `sup |u_ε − u₀|` in the limit-cycle regime.
    pub density_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub exponent_monotone: bool,
    pub density_monotone: Option<bool>,
    /// Least-squares `C` in `exponent_error ≈ C ε |ln ε|`.
    pub fitted_c: f64,
    /// Whether every row satisfies `exponent_error ≤ C ε |ln ε|` with the fitted `C`
    /// inflated by 50%.
    pub within_bound: bool,
}

/// Convergence of the exact solution toward the asymptotic picture over a
/// decreasing list of noise strengths.
pub fn epsilon_sweep(sys: &CircleSystem, eps_list: &[f64], grid_size: usize) -> Result<SweepTable> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config { field: "epsilon".into(), reason: "sweep list must be decreasing".into() });
    }
    let v = landscape_v(sys, grid_size)?;
    let target = rate_function(&v);
    let limit = match classify(sys).regime {
        Regime::LimitCycle => match limiting_density(sys, grid_size)? {
            LimitingDensity::Continuous(u) => Some(u),
            LimitingDensity::Delta { .. } => None,
        },
        Regime::FixedPoints => None,
    };
    let rows: Vec<SweepRow> = eps_list
        .par_iter()
        .map(|&eps| -> Result<SweepRow> {
            let s = sys.clone().with_epsilon(eps)?;
            let sol = solve_stationary(&s, grid_size)?;
            let minus_log: Vec<f64> = sol.log_density.values().iter().map(|l| -eps * l).collect();
            let offset = minus_log.iter().copied().fold(f64::INFINITY, f64::min);
            let t_min = target.min();
            let exponent_error = minus_log
                .iter()
                .zip(target.values())
                .fold(0.0f64, |m, (a, b)| m.max(((a - offset) - (b - t_min)).abs()));
            let density_error = limit.as_ref().map(|u0| sol.density.sup_distance(u0)).transpose()?;
            Ok(SweepRow { epsilon: eps, exponent_error, offset, density_error })
        })
        .collect::<Result<_>>()?;
    let exponent_monotone = rows.windows(2).all(|w| w[1].exponent_error < w[0].exponent_error);
    let density_monotone = limit.as_ref().map(|_| {
        rows.windows(2).all(|w| w[1].density_error.unwrap() < w[0].density_error.unwrap())
    });
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon * r.epsilon.ln().abs()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.exponent_error).collect();
    let fitted_c = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let within_bound = xs.iter().zip(&ys).all(|(x, y)| *y <= 1.5 * fitted_c * x + 1e-12);
    Ok(SweepTable { rows, exponent_monotone, density_monotone, fitted_c, within_bound })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusConfig {
    pub n_paths: usize,
    /// Samples recorded per path after burn-in.
    pub samples_per_path: usize,
    /// Time between recorded samples.
    pub spacing: f64,
    pub burn_in: f64,
    pub dt: f64,
    pub bins: usize,
    pub seed: u64,
    /// Drive both angles with the same noise (fault injection).
    pub shared_noise: bool,
}

impl Default for TorusConfig {
    fn default() -> Self {
        Self {
            n_paths: 20_000,
            samples_per_path: 20,
            spacing: 0.5,
            burn_in: 2.0,
            dt: 5e-3,
            bins: 8,
            seed: 2024,
            shared_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusReport {
    /// `Σ |p_ab − p_a q_b|` over the bins.
    pub l1_joint_vs_product: f64,
    pub l1_joint_vs_uniform: f64,
    pub l1_marginals_vs_uniform: (f64, f64),
    pub factorized: bool,
    pub uniform: bool,
    pub threshold: f64,
}

/// Simulates `dθ = Θ dt + √(2εD₁) dB₁`, `dξ = Ξ dt + √(2εD₂) dB₂` on the
/// 2-torus and tests that the stationary histogram is uniform and factorizes.
pub fn torus_product_check(
    theta_drift: f64,
    xi_drift: f64,
    epsilon: f64,
    d1: f64,
    d2: f64,
    cfg: &TorusConfig,
) -> Result<TorusReport> {
    if !(epsilon > 0.0 && d1 > 0.0 && d2 > 0.0) {
        return Err(Error::InvalidEpsilon(epsilon.min(d1).min(d2)));
    }
    let b = cfg.bins;
    let burn = (cfg.burn_in / cfg.dt).round() as usize;
    let gap = ((cfg.spacing / cfg.dt).round() as usize).max(1);
    let (n1, n2) = ((2.0 * epsilon * d1 * cfg.dt).sqrt(), (2.0 * epsilon * d2 * cfg.dt).sqrt());
    let counts: Vec<Vec<u64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(p as u64);
            let (mut x, mut y) = (0.0f64, 0.0f64);
            let mut c = vec![0u64; b * b];
            let step = |x: &mut f64, y: &mut f64, rng: &mut ChaCha8Rng| {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = if cfg.shared_noise { z1 } else { rng.sample(StandardNormal) };
                *x += theta_drift * cfg.dt + n1 * z1;
                *y += xi_drift * cfg.dt + n2 * z2;
            };
            for _ in 0..burn {
                step(&mut x, &mut y, &mut rng);
            }
            for _ in 0..cfg.samples_per_path {
                for _ in 0..gap {
                    step(&mut x, &mut y, &mut rng);
                }
                let i = ((x.rem_euclid(1.0) * b as f64) as usize).min(b - 1);
                let j = ((y.rem_euclid(1.0) * b as f64) as usize).min(b - 1);
                c[i * b + j] += 1;
            }
            c
        })
        .collect();
    let mut joint = vec![0.0; b * b];
    for c in &counts {
        for (acc, &v) in joint.iter_mut().zip(c) {
            *acc += v as f64;
        }
    }
    let total: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|p| *p /= total);
    let px: Vec<f64> = (0..b).map(|i| (0..b).map(|j| joint[i * b + j]).sum()).collect();
    let py: Vec<f64> = (0..b).map(|j| (0..b).map(|i| joint[i * b + j]).sum()).collect();
    let u = 1.0 / (b * b) as f64;
    let mut l1_prod = 0.0;
    let mut l1_unif = 0.0;
    for i in 0..b {
        for j in 0..b {
            l1_prod += (joint[i * b + j] - px[i] * py[j]).abs();
            l1_unif += (joint[i * b + j] - u).abs();
        }
    }
    let m = |p: &[f64]| p.iter().map(|x| (x - 1.0 / b as f64).abs()).sum::<f64>();
    let threshold = 0.02;
    let marg = (m(&px), m(&py));
    Ok(TorusReport {
        l1_joint_vs_product: l1_prod,
        l1_joint_vs_uniform: l1_unif,
        l1_marginals_vs_uniform: marg,
        factorized: l1_prod < threshold,
        uniform: l1_unif < threshold && marg.0 < threshold && marg.1 < threshold,
        threshold,
    })
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, value: f64, threshold: f64, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.into(), passed, value, threshold, detail }
}

/// The full suite on the built-in systems: the tilted sine (`f = 0.5`, and
/// `f = 2` for the cycle) and three tilted wells (`f = 0.1`).
pub fn run_suite(grid_size: usize, torus: &TorusConfig) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let n = grid_size.max(4096);

    // WKB pairs
    let cycle = CircleSystem::sine(2.0);
    let lc = crate::asymptotics::wkb_prefactor(&cycle, n)?;
    let zero = LandscapeFn::uniform(n, |_| 0.0);
    let r = wkb_residual(&cycle, &zero, &lc.c0)?;
    let worst = r.eikonal.max(r.transport);
    out.push(outcome("wkb_limit_cycle", worst < 1e-10, worst, 1e-10, format!("{r:?}")));

    let boltz = CircleSystem::sine(0.0);
    let u0 = boltz.potential().value(0.0);
    let phi = LandscapeFn::uniform(n, |t| boltz.potential().value(t) - u0);
    let one = LandscapeFn::uniform(n, |_| 1.0);
    let r = wkb_residual(&boltz, &phi, &one)?;
    let worst = r.eikonal.max(r.transport);
    out.push(outcome("wkb_boltzmann", worst < 1e-10, worst, 1e-10, format!("{r:?}")));

    let bad = LandscapeFn::uniform(n, |t| {
        lc.c0.value_at(t) * (1.0 + 0.1 * (2.0 * std::f64::consts::PI * t).sin())
    });
    let r = wkb_residual(&cycle, &zero, &bad)?;
    out.push(outcome("wkb_fault_detected", r.transport > 0.01, r.transport, 0.01, "perturbed C0".into()));

    // Lyapunov property
    let single = CircleSystem::sine(0.5);
    let three = CircleSystem::multiwell(3, 0.1);
    for (name, sys) in [("single_well", &single), ("three_well", &three)] {
        let v = landscape_v(sys, n)?;
        let rep = lyapunov_check(sys, &rate_function(&v), None)?;
        out.push(outcome(
            &format!("lyapunov_rate_function_{name}"),
            rep.pass,
            rep.max_violation,
            rep.tol,
            format!("{} violations", rep.violations.len()),
        ));
        let rep = lyapunov_check(sys, &v, None)?;
        out.push(outcome(
            &format!("lyapunov_fault_{name}"),
            !rep.pass,
            rep.max_violation,
            rep.tol,
            "V itself must fail".into(),
        ));
    }

    // pasting
    let g = AttractorGraph::new(&three)?;
    let chain = build_chain(&g, 0.05, false)?;
    let asym = chain_exponents(&chain)?;
    let gl = paste_global(&g, &asym, n)?;
    let rep = lyapunov_check(&three, &gl.w, None)?;
    out.push(outcome("lyapunov_global_w", rep.pass, rep.max_violation, rep.tol, String::new()));
    let rf = rate_function(&landscape_v(&three, n)?);
    let lo = rf.min();
    let d = gl.w.sup_distance(&rf.map(|_, x| x - lo))?;
    out.push(outcome("pasting_matches_v", d < 1e-6, d, 1e-6, String::new()));

    // sweeps
    let t = epsilon_sweep(&cycle, &[0.1, 0.05, 0.02, 0.01], 1024)?;
    out.push(outcome(
        "sweep_limit_cycle_density",
        t.density_monotone == Some(true),
        t.rows.last().and_then(|r| r.density_error).unwrap_or(f64::NAN),
        f64::NAN,
        format!("{:?}", t.rows.iter().map(|r| r.density_error).collect::<Vec<_>>()),
    ));
    let t = epsilon_sweep(&single, &[0.1, 0.05, 0.02], 1024)?;
    out.push(outcome(
        "sweep_fixed_point_exponent",
        t.exponent_monotone,
        t.rows.last().map_or(f64::NAN, |r| r.exponent_error),
        f64::NAN,
        format!("C = {:.4}", t.fitted_c),
    ));

    // detailed balance at f = 0
    let flat_flux = solve_stationary(&CircleSystem::sine(0.0).with_epsilon(0.05)?, 256)?.flux;
    out.push(outcome("zero_drive_zero_flux", flat_flux.abs() < 1e-12, flat_flux.abs(), 1e-12, String::new()));

    // torus
    let rep = torus_product_check(1.0, 2f64.sqrt(), 0.1, 1.0, 1.0, torus)?;
    out.push(outcome(
        "torus_product",
        rep.factorized && rep.uniform,
        rep.l1_joint_vs_product.max(rep.l1_joint_vs_uniform),
        rep.threshold,
        format!("{rep:?}"),
    ));
    let faulty = TorusConfig { shared_noise: true, ..torus.clone() };
    let rep = torus_product_check(1.0, 1.0, 0.1, 1.0, 1.0, &faulty)?;
    out.push(outcome(
        "torus_fault_detected",
        !rep.factorized,
        rep.l1_joint_vs_product,
        rep.threshold,
        "shared noise".into(),
    ));
    Ok(out)
}

/// Helper for tests and examples: `U = 0`, constant drive.
pub fn constant_drift(f: f64) -> CircleSystem {
    CircleSystem::new(PeriodicPotential::zero(), f).expect("finite drive")
}

/// Slope of `ln(MFPT)` against `1/ε`, the exponent of an Arrhenius law.
pub fn arrhenius_slope(eps: &[f64], mean_times: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    let ys: Vec<f64> = mean_times.iter().map(|t| t.ln()).collect();
    linear_fit(&xs, &ys).1
}

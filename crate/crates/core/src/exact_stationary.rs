//! Exact stationary density and cycle flux at finite noise.
//!
//! The stationary density is
//!
//! ```text
//! u(θ) = A · I(θ) · e^{−g(θ)},   g = Ũ/ε,   I(θ) = ∫_θ^{θ+1} e^{g(z)} dz
//! ```
//!
//! with flux `J = ε A (1 − e^{−f/ε})`. Exponents reach `10³` at `ε = 1e-3`, so
//! everything is carried in logs. The staircase `g(z + 1) = g(z) − f/ε` turns
//! `I` into a backward partial integral plus a damped forward one,
//!
//! ```text
//! I(θ_k) = ∫_{θ_k}^{1} e^g + e^{−f/ε} ∫_0^{θ_k} e^g,
//! ```
//!
//! both of which are running sums of positive terms and need no cancellation.
//! The trapezoid rule is corrected with the Euler–Maclaurin end terms, which
//! are available in closed form because every derivative of `g` is.

use crate::error::{Error, Result};
use crate::model::{uniform_grid, CircleSystem, LandscapeFn};
use crate::numerics::{log_abs_one_minus_exp_neg, log_add_exp, log_sum_exp};

pub const MIN_GRID: usize = 64;
/// Convergence tolerance on the sup change of `log u` between two refinements.
pub const LOG_DENSITY_TOL: f64 = 1e-9;
const MAX_FINE_POINTS: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolution {
    /// Normalized density on `θ_k = k/n`.
    pub density: LandscapeFn,
    pub log_density: LandscapeFn,
    /// Net probability current, positive in the direction of increasing θ.
    pub flux: f64,
    /// `ln A_ε`.
    pub log_normalizer: f64,
    pub epsilon: f64,
    pub drive: f64,
    /// Quadrature points per revolution used for the accepted solution.
    pub fine_points: usize,
}

/// Solves for the stationary density on an `grid_size`-point output grid,
/// refining the internal quadrature until `log u` is stable to
/// [`LOG_DENSITY_TOL`].
pub fn solve_stationary(sys: &CircleSystem, grid_size: usize) -> Result<StationarySolution> {
    let eps = sys.epsilon()?;
    if grid_size < MIN_GRID {
        return Err(Error::GridTooSmall { got: grid_size, min: MIN_GRID });
    }
    // one quadrature step should move g by at most ~1/4
    let speed = sys.drive().abs() + sys.max_abs_drift();
    let mut m = grid_size;
    while (m as f64) < 4.0 * speed / eps && m < MAX_FINE_POINTS {
        m *= 2;
    }
    let mut prev = fine_log_density(sys, eps, m, grid_size);
    loop {
        let next_m = m * 2;
        if next_m > MAX_FINE_POINTS {
            return Err(Error::NotConverged(format!(
                "log-density still changing at {m} points per revolution"
            )));
        }
        let next = fine_log_density(sys, eps, next_m, grid_size);
        let change = match (&prev, &next) {
            (Some(a), Some(b)) => {
                a.log_u.iter().zip(&b.log_u).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
            }
            _ => f64::INFINITY,
        };
        if change <= LOG_DENSITY_TOL {
            let fine = next.expect("finite change implies a solution");
            return Ok(assemble(sys, eps, grid_size, next_m, fine));
        }
        prev = next;
        m = next_m;
    }
}

/// Net current of a solved system.
pub fn cycle_flux(sol: &StationarySolution) -> f64 {
    sol.flux
}

struct FineSolution {
    /// `ln u` on the output grid.
    log_u: Vec<f64>,
    log_normalizer: f64,
}

/// One quadrature pass with `m` points per revolution. Returns `None` when
/// the Euler–Maclaurin correction is too large to trust at this resolution.
fn fine_log_density(sys: &CircleSystem, eps: f64, m: usize, n_out: usize) -> Option<FineSolution> {
    let h = 1.0 / m as f64;
    let f = sys.drive();
    let p = sys.potential();
    let g: Vec<f64> = (0..=m).map(|k| sys.tilted(k as f64 * h) / eps).collect();
    let log_half_h = (0.5 * h).ln();

    // log ∫_0^{x_k} e^g and log ∫_{x_k}^1 e^g by the trapezoid rule
    let mut fwd = vec![f64::NEG_INFINITY; m + 1];
    for k in 0..m {
        fwd[k + 1] = log_add_exp(fwd[k], log_half_h + log_add_exp(g[k], g[k + 1]));
    }
    let mut bwd = vec![f64::NEG_INFINITY; m + 1];
    for k in (0..m).rev() {
        bwd[k] = log_add_exp(bwd[k + 1], log_half_h + log_add_exp(g[k], g[k + 1]));
    }

    let shift = -f / eps;
    let log_gap = log_abs_one_minus_exp_neg(f / eps);
    let h2 = h * h;
    let mut log_u = Vec::with_capacity(m);
    for k in 0..m {
        let x = k as f64 * h;
        let log_t = log_add_exp(bwd[k], shift + fwd[k]);
        // ∫ = T + (1 − e^{−f/ε}) [h²/12 F′(x) − h⁴/720 F‴(x)] with F = e^g
        let mut log_i = log_t;
        if f != 0.0 {
            let g1 = -sys.drift(x) / eps;
            let g2 = p.curvature(x) / eps;
            let g3 = p.derivative(x, 3) / eps;
            let bracket = h2 / 12.0 * g1 - h2 * h2 / 720.0 * (g3 + 3.0 * g1 * g2 + g1 * g1 * g1);
            let rho = f.signum() * bracket * (log_gap + g[k] - log_t).exp();
            if !rho.is_finite() || rho <= -0.5 {
                return None;
            }
            log_i += rho.ln_1p();
        }
        log_u.push(log_i - g[k]);
    }

    // periodic trapezoid normalization on the fine grid
    let log_z = log_sum_exp(&log_u) + h.ln();
    let stride = m / n_out;
    let out = (0..n_out).map(|i| log_u[i * stride] - log_z).collect();
    Some(FineSolution { log_u: out, log_normalizer: -log_z })
}

fn assemble(sys: &CircleSystem, eps: f64, n: usize, m: usize, fine: FineSolution) -> StationarySolution {
    let f = sys.drive();
    let log_density = LandscapeFn::new(uniform_grid(n), fine.log_u).expect("uniform grid");
    let density = log_density.map(|_, l| l.exp());
    let flux = if f == 0.0 {
        0.0
    } else {
        f.signum() * (eps.ln() + fine.log_normalizer + log_abs_one_minus_exp_neg(f / eps)).exp()
    };
    StationarySolution {
        density,
        log_density,
        flux,
        log_normalizer: fine.log_normalizer,
        epsilon: eps,
        drive: f,
        fine_points: m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicPotential;
    use proptest::prelude::*;

    fn flat(f: f64, eps: f64) -> CircleSystem {
        CircleSystem::new(PeriodicPotential::zero(), f).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn uniform_equilibrium() {
        let sol = solve_stationary(&flat(0.0, 0.1), 128).unwrap();
        assert_eq!(sol.flux, 0.0);
        assert!(sol.density.values().iter().all(|u| (u - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_drift_is_uniform_with_flux_f() {
        let sol = solve_stationary(&flat(2.0, 0.1), 128).unwrap();
        assert!((cycle_flux(&sol) - 2.0).abs() < 1e-10, "{}", sol.flux);
        assert!(sol.density.values().iter().all(|u| (u - 1.0).abs() < 1e-10));
        let back = solve_stationary(&flat(-2.0, 0.1), 128).unwrap();
        assert!((back.flux + 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = CircleSystem::sine(2.0);
        assert_eq!(solve_stationary(&sys, 128), Err(Error::MissingEpsilon));
        let sys = sys.with_epsilon(0.1).unwrap();
        assert!(matches!(solve_stationary(&sys, 32), Err(Error::GridTooSmall { .. })));
    }

    /// Independent oracle: composite Simpson over `[θ, θ+1]` for every θ,
    /// with exponents shifted by their own maximum.
    fn simpson_oracle(sys: &CircleSystem, n: usize, panels: usize) -> Vec<f64> {
        let eps = sys.epsilon().unwrap();
        let log_i: Vec<f64> = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64;
                let h = 1.0 / panels as f64;
                let e: Vec<f64> = (0..=panels).map(|k| sys.tilted(a + k as f64 * h) / eps).collect();
                let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for (k, v) in e.iter().enumerate() {
                    let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * (v - mx).exp();
                }
                mx + (s * h / 3.0).ln() - sys.tilted(a) / eps
            })
            .collect();
        let mx = log_i.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = log_i.iter().map(|l| (l - mx).exp()).sum::<f64>() / n as f64;
        log_i.iter().map(|l| (l - mx).exp() / z).collect()
    }

    #[test]
    fn matches_finer_simpson_oracle() {
        let sys = CircleSystem::sine(2.0).with_epsilon(0.05).unwrap();
        let sol = solve_stationary(&sys, 128).unwrap();
        let oracle = simpson_oracle(&sys, 128, 10 * sol.fine_points);
        let err = sol.density.values().iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6, "sup error {err}");
    }

    #[test]
    fn flux_converges_to_rotation_number() {
        let target = 3f64.sqrt();
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| {
                let sys = CircleSystem::sine(2.0).with_epsilon(e).unwrap();
                (solve_stationary(&sys, 256).unwrap().flux - target).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn normalized_and_flux_is_constant_in_theta() {
        let sys = CircleSystem::sine(1.3).with_epsilon(0.05).unwrap();
        let n = 4096;
        let sol = solve_stationary(&sys, n).unwrap();
        assert!((sol.density.integral() - 1.0).abs() < 1e-8);
        let u = sol.density.values();
        let h = 1.0 / n as f64;
        for k in 0..n {
            let du = (u[(k + 1) % n] - u[(k + n - 1) % n]) / (2.0 * h);
            let j = u[k] * sys.drift(k as f64 * h) - 0.05 * du;
            assert!((j - sol.flux).abs() < 1e-4 * sol.flux, "k={k} j={j} J={}", sol.flux);
        }
    }

    #[test]
    fn zero_drive_is_boltzmann() {
        let eps = 0.05;
        let sys = CircleSystem::new(PeriodicPotential::new(vec![0.1, -0.05], vec![0.03]).unwrap(), 0.0)
            .unwrap()
            .with_epsilon(eps)
            .unwrap();
        let n = 512;
        let sol = solve_stationary(&sys, n).unwrap();
        assert_eq!(sol.flux, 0.0);
        let w: Vec<f64> = (0..n).map(|k| (-sys.potential().value(k as f64 / n as f64) / eps).exp()).collect();
        let z = w.iter().sum::<f64>() / n as f64;
        for (u, b) in sol.density.values().iter().zip(&w) {
            assert!((u - b / z).abs() < 1e-8);
        }
    }

    #[test]
    fn small_epsilon_survives() {
        let sys = CircleSystem::sine(0.5).with_epsilon(1e-4).unwrap();
        let sol = solve_stationary(&sys, 256).unwrap();
        assert!(sol.density.values().iter().all(|u| u.is_finite() && *u >= 0.0));
        assert!((sol.density.integral() - 1.0).abs() < 1e-6);
        assert!(sol.flux.is_finite() && sol.flux >= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reflection_keeps_density_and_negates_flux(
            a in -0.3f64..0.3, b in -0.3f64..0.3, f in -1.5f64..1.5, eps in 0.05f64..0.3,
        ) {
            let p = PeriodicPotential::new(vec![a, 0.05], vec![b]).unwrap();
            let sys = CircleSystem::new(p, f).unwrap().with_epsilon(eps).unwrap();
            let n = 128;
            let s1 = solve_stationary(&sys, n).unwrap();
            let s2 = solve_stationary(&sys.reflected(), n).unwrap();
            prop_assert!((s1.flux + s2.flux).abs() <= 1e-9 * (1.0 + s1.flux.abs()));
            let (u1, u2) = (s1.density.values(), s2.density.values());
            for k in 0..n {
                prop_assert!((u1[k] - u2[(n - k) % n]).abs() <= 1e-8 * (1.0 + u1[k]));
            }
        }

        #[test]
        fn density_positive_and_normalized(f in -3.0f64..3.0, eps in 0.01f64..0.5) {
            let sys = CircleSystem::multiwell(2, f).with_epsilon(eps).unwrap();
            let sol = solve_stationary(&sys, 256).unwrap();
            prop_assert!(sol.density.values().iter().all(|&u| u > 0.0));
            prop_assert!((sol.density.integral() - 1.0).abs() < 1e-8);
            prop_assert!(sol.flux == 0.0 || sol.flux.signum() == f.signum());
        }
    }
}

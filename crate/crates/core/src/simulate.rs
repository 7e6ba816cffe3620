//! Euler–Maruyama Monte Carlo on the circle.
//!
//! Paths are integrated on the real line and wrapped only when binned, so
//! winding numbers are read off the unwrapped endpoint. Every path draws from
//! its own ChaCha stream (`seed`, stream = path index), and reductions use
//! pairwise summation in path order, so results do not depend on the number
//! of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::attractors::Direction;
use crate::error::{Error, Result};
use crate::model::CircleSystem;
use crate::numerics::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Time step; `None` picks `max(ε/100, 1e-6)`.
    pub dt: Option<f64>,
    /// Measured time after burn-in (for `first_passage`, the time limit).
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub burn_in: f64,
    pub bins: usize,
    /// Initial angle of every path.
    pub start: f64,
    /// Skip the step-size safeguard.
    pub force: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: None, horizon: 10.0, n_paths: 100, seed: 0, burn_in: 1.0, bins: 64, start: 0.0, force: false }
    }
}

/// `dt ≤ 0.1 ε / max|drift|²`.
pub fn stable_dt_bound(sys: &CircleSystem, epsilon: f64) -> f64 {
    let m = sys.max_abs_drift();
    if m == 0.0 {
        f64::INFINITY
    } else {
        0.1 * epsilon / (m * m)
    }
}

fn resolve_dt(sys: &CircleSystem, cfg: &SimConfig) -> Result<(f64, f64)> {
    let eps = sys.epsilon()?;
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::InvalidSimConfig(format!("horizon must be positive, got {}", cfg.horizon)));
    }
    if !(cfg.burn_in >= 0.0 && cfg.burn_in.is_finite()) {
        return Err(Error::InvalidSimConfig(format!("burn-in must be non-negative, got {}", cfg.burn_in)));
    }
    if cfg.n_paths == 0 || cfg.bins == 0 {
        return Err(Error::InvalidSimConfig("need at least one path and one bin".into()));
    }
    let dt = cfg.dt.unwrap_or((eps / 100.0).max(1e-6));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidSimConfig(format!("dt must be positive, got {dt}")));
    }
    let bound = stable_dt_bound(sys, eps);
    if dt > bound && !cfg.force {
        return Err(Error::UnstableStep { dt, bound });
    }
    Ok((eps, dt))
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    /// Fraction of post-burn-in samples per bin of `[0, 1)`; sums to one.
    pub histogram: Vec<f64>,
    /// Signed revolutions of each path during the measured window.
    pub windings: Vec<f64>,
    /// Mean winding per unit time.
    pub flux: f64,
    pub flux_stderr: f64,
    pub dt: f64,
    pub steps: usize,
}

impl EnsembleStats {
    /// Histogram as a density on `[0, 1)`.
    pub fn density(&self) -> Vec<f64> {
        let b = self.histogram.len() as f64;
        self.histogram.iter().map(|p| p * b).collect()
    }
}

/// Runs `n_paths` independent paths for `burn_in + horizon`.
pub fn run_ensemble(sys: &CircleSystem, cfg: &SimConfig) -> Result<EnsembleStats> {
    let (eps, dt) = resolve_dt(sys, cfg)?;
    let burn = (cfg.burn_in / dt).round() as usize;
    let steps = (cfg.horizon / dt).round().max(1.0) as usize;
    let noise = (2.0 * eps * dt).sqrt();
    let bins = cfg.bins;

    let per_path: Vec<(Vec<u64>, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let mut x = cfg.start;
            for _ in 0..burn {
                let z: f64 = rng.sample(StandardNormal);
                x += sys.drift(x) * dt + noise * z;
            }
            let x0 = x;
            let mut counts = vec![0u64; bins];
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                x += sys.drift(x) * dt + noise * z;
                let b = ((x.rem_euclid(1.0)) * bins as f64) as usize;
                counts[b.min(bins - 1)] += 1;
            }
            (counts, x - x0)
        })
        .collect();

    let total = (steps * cfg.n_paths) as f64;
    let histogram = (0..bins)
        .map(|b| per_path.iter().map(|(c, _)| c[b]).sum::<u64>() as f64 / total)
        .collect();
    let windings: Vec<f64> = per_path.iter().map(|(_, w)| *w).collect();
    let t = steps as f64 * dt;
    let n = windings.len() as f64;
    let mean = pairwise_sum(&windings) / n;
    let var = if windings.len() > 1 {
        pairwise_sum(&windings.iter().map(|w| (w - mean).powi(2)).collect::<Vec<_>>()) / (n - 1.0)
    } else {
        0.0
    };
    Ok(EnsembleStats { histogram, flux: mean / t, flux_stderr: (var / n).sqrt() / t, windings, dt, steps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageSamples {
    /// Hitting times of paths that reached the target.
    pub times: Vec<f64>,
    /// Side from which each path reached the target.
    pub sides: Vec<Direction>,
    /// Paths still running at the horizon.
    pub censored: usize,
}

impl PassageSamples {
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.times) / self.times.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let n = self.times.len() as f64;
        (pairwise_sum(&self.times.iter().map(|t| (t - m).powi(2)).collect::<Vec<_>>()) / (n - 1.0)).sqrt()
    }

    pub fn stderr(&self) -> f64 {
        self.std_dev() / (self.times.len() as f64).sqrt()
    }

    /// Coefficient of variation; one for an exponential law.
    pub fn cv(&self) -> f64 {
        self.std_dev() / self.mean()
    }
}

/// First time each path started at `from` reaches the angle `to` from either
/// side. When `to ≡ from`, the target is a full revolution away in both
/// directions. `cfg.horizon` caps the time per path; `cfg.burn_in` and
/// `cfg.start` are not used.
pub fn first_passage(sys: &CircleSystem, cfg: &SimConfig, from: f64, to: f64) -> Result<PassageSamples> {
    let (eps, dt) = resolve_dt(sys, cfg)?;
    let ahead = (to - from).rem_euclid(1.0);
    let (lower, upper) = if ahead == 0.0 { (from - 1.0, from + 1.0) } else { (from + ahead - 1.0, from + ahead) };
    let max_steps = (cfg.horizon / dt).ceil() as u64;
    let noise = (2.0 * eps * dt).sqrt();

    let outcomes: Vec<Option<(f64, Direction)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let mut x = from;
            for step in 1..=max_steps {
                let z: f64 = rng.sample(StandardNormal);
                x += sys.drift(x) * dt + noise * z;
                if x >= upper {
                    return Some((step as f64 * dt, Direction::Cw));
                }
                if x <= lower {
                    return Some((step as f64 * dt, Direction::Ccw));
                }
            }
            None
        })
        .collect();

    let mut out = PassageSamples { times: Vec::new(), sides: Vec::new(), censored: 0 };
    for o in outcomes {
        match o {
            Some((t, side)) => {
                out.times.push(t);
                out.sides.push(side);
            }
            None => out.censored += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicPotential;

    fn flat(f: f64, eps: f64) -> CircleSystem {
        CircleSystem::new(PeriodicPotential::zero(), f).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let sys = CircleSystem::sine(1.5).with_epsilon(0.1).unwrap();
        let cfg = SimConfig { horizon: 1.0, n_paths: 16, seed: 7, dt: Some(1e-3), ..Default::default() };
        let a = run_ensemble(&sys, &cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&sys, &cfg).unwrap());
        assert_eq!(a, b);
        let c = run_ensemble(&sys, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.windings, c.windings);
    }

    #[test]
    fn flux_is_mean_winding_over_time() {
        let sys = CircleSystem::sine(2.0).with_epsilon(0.1).unwrap();
        let cfg = SimConfig { horizon: 2.0, n_paths: 8, seed: 1, dt: Some(1e-3), ..Default::default() };
        let s = run_ensemble(&sys, &cfg).unwrap();
        let total: f64 = s.windings.iter().sum();
        assert!((s.flux - total / (8.0 * s.steps as f64 * s.dt)).abs() < 1e-12);
        assert!((s.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.flux > 0.0);
    }

    #[test]
    fn free_diffusion_histogram_is_uniform() {
        let sys = flat(0.0, 0.1);
        let cfg = SimConfig { horizon: 20.0, n_paths: 64, seed: 3, dt: Some(1e-2), bins: 10, ..Default::default() };
        let s = run_ensemble(&sys, &cfg).unwrap();
        // samples are correlated; bound with an effective count of one per 0.25 time units
        let n_eff = 64.0 * 20.0 / 0.25;
        let sigma = (0.1f64 * 0.9 / n_eff).sqrt();
        for p in &s.histogram {
            assert!((p - 0.1).abs() < 4.0 * sigma, "{p}");
        }
    }

    #[test]
    fn step_safeguard() {
        let sys = CircleSystem::sine(2.0).with_epsilon(0.01).unwrap();
        let cfg = SimConfig { dt: Some(0.01), ..Default::default() };
        assert!(matches!(run_ensemble(&sys, &cfg), Err(Error::UnstableStep { .. })));
        let forced = SimConfig { dt: Some(0.01), force: true, horizon: 0.1, n_paths: 2, ..Default::default() };
        assert!(run_ensemble(&sys, &forced).is_ok());
        assert_eq!(run_ensemble(&CircleSystem::sine(2.0), &cfg), Err(Error::MissingEpsilon));
    }

    #[test]
    fn passage_sides_and_censoring() {
        // strong positive drift: every path exits forward, fast
        let sys = flat(5.0, 0.01);
        let cfg = SimConfig { horizon: 10.0, n_paths: 20, seed: 2, dt: Some(1e-4), force: true, ..Default::default() };
        let fp = first_passage(&sys, &cfg, 0.0, 0.5).unwrap();
        assert_eq!(fp.censored, 0);
        assert!(fp.sides.iter().all(|&s| s == Direction::Cw));
        assert!((fp.mean() - 0.1).abs() < 0.01);
        let short = SimConfig { horizon: 0.01, ..cfg };
        assert_eq!(first_passage(&sys, &short, 0.0, 0.5).unwrap().censored, 20);
    }

    #[test]
    fn symmetric_well_escapes_both_ways_equally() {
        let sys = CircleSystem::sine(0.0).with_epsilon(0.08).unwrap();
        let cfg = SimConfig { horizon: 1e3, n_paths: 400, seed: 11, ..Default::default() };
        let fp = first_passage(&sys, &cfg, 0.0, 0.5).unwrap();
        let cw = fp.sides.iter().filter(|&&s| s == Direction::Cw).count() as f64;
        let n = fp.times.len() as f64;
        assert!((cw / n - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
    }
}

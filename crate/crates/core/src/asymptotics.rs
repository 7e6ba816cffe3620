//! Small-noise asymptotics of the stationary density.
//!
//! Laplace's method applied to `I(θ) = ∫_θ^{θ+1} e^{Ũ/ε}` picks out
//! `U*(θ) = sup_{θ≤z≤θ+1} Ũ(z)`, so that `−ε ln u_ε → max V − V` with
//! `V = U* − Ũ`. When the drift never vanishes the sup sits at the left
//! end of the window, `V ≡ 0`, and the density tends to the inverse-speed
//! law of the deterministic cycle.
//!
//! For `f < 0` the window's right end dominates and `U* − Ũ` picks up the
//! constant `−f`; that constant is removed so that `min V = 0` in both
//! directions, which is the same as reflecting `θ → −θ`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::attractors::{find_fixed_points, Stability};
use crate::error::{Error, Result};
use crate::model::{uniform_grid, CircleSystem, LandscapeFn};
use crate::numerics::{golden_max, periodic_mean};

pub const MIN_SUP_GRID: usize = 256;
/// Grid used by [`classify`] for the per-point interior-maximum mask.
pub const CLASSIFY_GRID: usize = 1024;
/// Relative tolerance on `f` against the slope range for the saddle-node flag.
pub const DEGENERACY_TOL: f64 = 1e-9;
const ROOT_GRID: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    LimitCycle,
    FixedPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceClassification {
    pub regime: Regime,
    /// Power of ε in the Laplace prefactor: 1 for a boundary maximum, ½ for
    /// an interior one.
    pub nu: f64,
    /// `f` sits on the saddle-node boundary `f = max U′` or `f = min U′`.
    pub degenerate: bool,
    /// Grid of the mask below (`k / CLASSIFY_GRID`).
    pub grid: Vec<f64>,
    /// Whether the sup defining `U*(θ)` is attained strictly inside the window.
    pub interior_max: Vec<bool>,
}

/// Exact pointwise evaluation of `U*` and `V`.
///
/// The sup of a smooth function over a closed window is attained at an end
/// or at an interior local maximum, and the interior local maxima of `Ũ`
/// are the unstable zeros of the drift.
#[derive(Debug, Clone)]
pub struct SupEvaluator {
    sys: CircleSystem,
    maxima: Vec<f64>,
}

impl SupEvaluator {
    pub fn new(sys: &CircleSystem) -> Self {
        let maxima = sys
            .drift_sign_changes(ROOT_GRID)
            .into_iter()
            .filter(|z| z.ascending)
            .map(|z| z.theta)
            .collect();
        Self { sys: sys.clone(), maxima }
    }

    /// Local maxima of `Ũ` in `[0, 1)`.
    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    /// `U*(θ) = max_{θ ≤ z ≤ θ+1} Ũ(z)`.
    pub fn ustar(&self, theta: f64) -> f64 {
        let s = &self.sys;
        let mut best = s.tilted(theta).max(s.tilted(theta + 1.0));
        for &m in &self.maxima {
            let lifted = theta + (m - theta).rem_euclid(1.0);
            best = best.max(s.tilted(lifted));
        }
        best
    }

    /// `V(θ) = U*(θ) − Ũ(θ)`, shifted so that `min V = 0` when `f < 0`.
    pub fn v(&self, theta: f64) -> f64 {
        (self.ustar(theta) - self.sys.tilted(theta) + self.sys.drive().min(0.0)).max(0.0)
    }
}

/// Regime, Laplace exponent and interior-maximum mask.
pub fn classify(sys: &CircleSystem) -> LaplaceClassification {
    let (lo, hi) = sys.potential().slope_range();
    let f = sys.drive();
    let tol = DEGENERACY_TOL * (1.0 + f.abs());
    let degenerate = (f - hi).abs() <= tol || (f - lo).abs() <= tol;
    let regime = if !degenerate && (f > hi || f < lo) { Regime::LimitCycle } else { Regime::FixedPoints };
    let nu = match regime {
        Regime::LimitCycle => 1.0,
        Regime::FixedPoints => 0.5,
    };
    let grid = uniform_grid(CLASSIFY_GRID);
    let eval = SupEvaluator::new(sys);
    let scale = eval.maxima.iter().map(|&m| sys.tilted(m).abs()).fold(1.0, f64::max);
    let interior_max = grid.iter().map(|&t| eval.v(t) > 1e-12 * scale).collect();
    LaplaceClassification { regime, nu, degenerate, grid, interior_max }
}

/// `U*` on `grid_size` points with kinks recorded. The returned function
/// steps by `−f` per revolution.
///
/// A sliding-window maximum over the doubled grid gives the sup over grid
/// samples in `O(n)`; the exact interior maxima of `Ũ` are then merged in so
/// that grid values are exact.
pub fn sup_construct(sys: &CircleSystem, grid_size: usize) -> Result<LandscapeFn> {
    if grid_size < MIN_SUP_GRID {
        return Err(Error::GridTooSmall { got: grid_size, min: MIN_SUP_GRID });
    }
    let n = grid_size;
    let doubled: Vec<f64> = (0..=2 * n).map(|k| sys.tilted(k as f64 / n as f64)).collect();
    // window [k, k + n] for k = 0..n, deque holds indices with decreasing values
    let mut window = VecDeque::new();
    let mut sampled = Vec::with_capacity(n);
    for j in 0..=2 * n {
        while window.back().is_some_and(|&b: &usize| doubled[b] <= doubled[j]) {
            window.pop_back();
        }
        window.push_back(j);
        if j >= n {
            let k = j - n;
            while window.front().is_some_and(|&fr| fr < k) {
                window.pop_front();
            }
            sampled.push(doubled[*window.front().unwrap()]);
            if k + 1 == n {
                break;
            }
        }
    }
    let eval = SupEvaluator::new(sys);
    let grid = uniform_grid(n);
    let values = grid.iter().zip(&sampled).map(|(&t, &s)| s.max(eval.ustar(t))).collect();
    let mut out = LandscapeFn::new(grid, values)?.with_seam_offset(-sys.drive());
    out.detect_kinks(None)?;
    Ok(out)
}

/// Exponent landscape `V ≥ 0` on `grid_size` points with kinks recorded.
pub fn landscape_v(sys: &CircleSystem, grid_size: usize) -> Result<LandscapeFn> {
    if grid_size < MIN_SUP_GRID {
        return Err(Error::GridTooSmall { got: grid_size, min: MIN_SUP_GRID });
    }
    let eval = SupEvaluator::new(sys);
    let mut v = LandscapeFn::uniform(grid_size, |t| eval.v(t));
    v.detect_kinks(None)?;
    Ok(v)
}

/// Grid points of the flat region `{V < tol}`; the default tolerance is
/// `1e-9 · (max V + 1)`.
pub fn plateau(v: &LandscapeFn, tol: Option<f64>) -> Vec<f64> {
    let tol = tol.unwrap_or(1e-9 * (v.max().abs() + 1.0));
    v.grid().iter().zip(v.values()).filter(|(_, &x)| x < tol).map(|(&t, _)| t).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum LimitingDensity {
    /// Point masses at the listed stable fixed points (ties share the mass).
    Delta { locations: Vec<f64> },
    Continuous(LandscapeFn),
}

/// Limiting prefactor on the deterministic cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePrefactor {
    /// `C₀(θ) = J/|f − U′(θ)|`.
    pub c0: LandscapeFn,
    /// `T = ∫₀¹ dθ / |f − U′(θ)|`.
    pub period: f64,
    /// `J = 1/T`, carrying the sign of `f`.
    pub flux: f64,
}

fn saddle_node_location(sys: &CircleSystem) -> f64 {
    let n = 4096;
    let h = 1.0 / n as f64;
    let k = (0..n)
        .min_by(|&a, &b| {
            sys.drift(a as f64 * h).abs().partial_cmp(&sys.drift(b as f64 * h).abs()).unwrap()
        })
        .unwrap();
    let t = k as f64 * h;
    golden_max(|x| -sys.drift(x).abs(), t - h, t + h, 1e-14).0.rem_euclid(1.0)
}

/// Period of the deterministic cycle. Requires the limit-cycle regime.
pub fn cycle_period(sys: &CircleSystem) -> Result<f64> {
    let c = classify(sys);
    if c.degenerate {
        return Err(Error::Degenerate { theta: saddle_node_location(sys) });
    }
    if c.regime != Regime::LimitCycle {
        return Err(Error::NotLimitCycle);
    }
    Ok(periodic_mean(|t| 1.0 / sys.drift(t).abs(), 1e-15, 1 << 22))
}

/// `C₀`, period and limiting flux on the deterministic cycle.
pub fn wkb_prefactor(sys: &CircleSystem, grid_size: usize) -> Result<CyclePrefactor> {
    let period = cycle_period(sys)?;
    let j = 1.0 / period;
    let c0 = LandscapeFn::uniform(grid_size, |t| j / sys.drift(t).abs());
    Ok(CyclePrefactor { c0, period, flux: j * sys.drive().signum() })
}

/// The `ε → 0` limit of the stationary density.
///
/// Refuses saddle-node configurations, where neither limit applies.
pub fn limiting_density(sys: &CircleSystem, grid_size: usize) -> Result<LimitingDensity> {
    let c = classify(sys);
    if c.degenerate {
        return Err(Error::Degenerate { theta: saddle_node_location(sys) });
    }
    match c.regime {
        Regime::LimitCycle => Ok(LimitingDensity::Continuous(wkb_prefactor(sys, grid_size)?.c0)),
        Regime::FixedPoints => {
            let eval = SupEvaluator::new(sys);
            let stable: Vec<(f64, f64)> = find_fixed_points(sys)?
                .into_iter()
                .filter(|p| p.kind == Stability::Stable)
                .map(|p| (p.theta, eval.v(p.theta)))
                .collect();
            let top = stable.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-9 * (1.0 + top.abs());
            let locations = stable.iter().filter(|s| s.1 >= top - tol).map(|s| s.0).collect();
            Ok(LimitingDensity::Delta { locations })
        }
    }
}

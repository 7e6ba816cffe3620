//! Domain types: periodic potentials, the driven circle system, and sampled
//! landscapes with kink bookkeeping.
//!
//! The circle has circumference one, so angles live in `[0, 1)` and every
//! periodic quantity satisfies `g(θ + 1) = g(θ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, golden_max};

const TWO_PI: f64 = 2.0 * PI;

/// Finite Fourier series `U(θ) = c + Σ a_k cos(2πkθ) + b_k sin(2πkθ)`.
///
/// Periodicity and all derivatives are exact. The constant `c` is zero for
/// potentials built from coefficients and only appears through
/// [`PeriodicPotential::from_samples`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPotential {
    cos: Vec<f64>,
    sin: Vec<f64>,
    #[serde(default)]
    offset: f64,
}

impl PeriodicPotential {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        for (name, coeffs) in [("cos", &cos), ("sin", &sin)] {
            if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
                return Err(Error::Config {
                    field: format!("{name}[{k}]"),
                    reason: "coefficient is not finite".into(),
                });
            }
        }
        Ok(Self { cos, sin, offset: 0.0 })
    }

    pub fn zero() -> Self {
        Self { cos: Vec::new(), sin: Vec::new(), offset: 0.0 }
    }

    /// `U(θ) = −cos(2πkθ)/(2πk)`, whose slope is `sin(2πkθ)`.
    pub fn sine_wells(k: usize) -> Self {
        assert!(k >= 1, "mode index starts at 1");
        let mut cos = vec![0.0; k];
        cos[k - 1] = -1.0 / (TWO_PI * k as f64);
        Self { cos, sin: Vec::new(), offset: 0.0 }
    }

    /// Spectral interpolation of equally spaced samples `U(j/n)`, keeping
    /// modes `1..=max_mode`.
    ///
    /// This is the adapter for potentials only known as tables. The result is
    /// exact for trigonometric polynomials of degree `< n/2` and otherwise
    /// carries the usual truncation and aliasing error, so prefer explicit
    /// coefficients when they are available.
    pub fn from_samples(samples: &[f64], max_mode: usize) -> Result<Self> {
        let n = samples.len();
        if n < 4 {
            return Err(Error::InvalidLandscape(format!("need at least 4 samples, got {n}")));
        }
        if 2 * max_mode >= n {
            return Err(Error::InvalidLandscape(format!(
                "max_mode {max_mode} is not resolved by {n} samples"
            )));
        }
        let nf = n as f64;
        let mut cos = Vec::with_capacity(max_mode);
        let mut sin = Vec::with_capacity(max_mode);
        for k in 1..=max_mode {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, &u) in samples.iter().enumerate() {
                let (s, c) = (TWO_PI * ((k * j) % n) as f64 / nf).sin_cos();
                a += u * c;
                b += u * s;
            }
            cos.push(2.0 * a / nf);
            sin.push(2.0 * b / nf);
        }
        let offset = samples.iter().sum::<f64>() / nf;
        let mut p = Self::new(cos, sin)?;
        p.offset = offset;
        Ok(p)
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    pub fn max_mode(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// `d^order U / dθ^order` at `θ` (taken mod 1).
    pub fn derivative(&self, theta: f64, order: u32) -> f64 {
        let t = theta.rem_euclid(1.0);
        let shift = order as f64 * PI / 2.0;
        let mut acc = if order == 0 { self.offset } else { 0.0 };
        for k in 1..=self.max_mode() {
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let w = TWO_PI * k as f64;
            let (s, c) = (w * t + shift).sin_cos();
            acc += w.powi(order as i32) * (a * c + b * s);
        }
        acc
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.derivative(theta, 0)
    }

    pub fn slope(&self, theta: f64) -> f64 {
        self.derivative(theta, 1)
    }

    pub fn curvature(&self, theta: f64) -> f64 {
        self.derivative(theta, 2)
    }

    /// `(min U′, max U′)` over the circle.
    pub fn slope_range(&self) -> (f64, f64) {
        if self.max_mode() == 0 {
            return (0.0, 0.0);
        }
        let n = (256 * self.max_mode()).max(4096);
        let h = 1.0 / n as f64;
        let samples: Vec<f64> = (0..n).map(|k| self.slope(k as f64 * h)).collect();
        let refine = |sign: f64| {
            let mut best = f64::NEG_INFINITY;
            for k in 0..n {
                let prev = sign * samples[(k + n - 1) % n];
                let next = sign * samples[(k + 1) % n];
                let here = sign * samples[k];
                if here >= prev && here >= next {
                    let t = k as f64 * h;
                    let (_, v) = golden_max(|x| sign * self.slope(x), t - h, t + h, 1e-13);
                    best = best.max(v.max(here));
                }
            }
            sign * best
        };
        (refine(-1.0), refine(1.0))
    }

    /// The mirrored potential `θ ↦ U(−θ)`.
    pub fn reflected(&self) -> Self {
        Self {
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|b| -b).collect(),
            offset: self.offset,
        }
    }
}

/// The driven circle `dθ = (f − U′(θ)) dt + √(2ε) dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSystem {
    potential: PeriodicPotential,
    drive: f64,
    epsilon: Option<f64>,
}

impl CircleSystem {
    /// A deterministic system; attach noise with [`CircleSystem::with_epsilon`].
    pub fn new(potential: PeriodicPotential, drive: f64) -> Result<Self> {
        if !drive.is_finite() {
            return Err(Error::Config { field: "f".into(), reason: "must be finite".into() });
        }
        Ok(Self { potential, drive, epsilon: None })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        self.epsilon = Some(epsilon);
        Ok(self)
    }

    /// `θ̇ = f − sin(2πθ)`.
    pub fn sine(drive: f64) -> Self {
        Self::new(PeriodicPotential::sine_wells(1), drive).expect("finite drive")
    }

    /// `θ̇ = f − sin(2πkθ)`: `k` wells of equal depth.
    pub fn multiwell(k: usize, drive: f64) -> Self {
        Self::new(PeriodicPotential::sine_wells(k), drive).expect("finite drive")
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.potential
    }

    pub fn drive(&self) -> f64 {
        self.drive
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.epsilon.ok_or(Error::MissingEpsilon)
    }

    pub fn epsilon_opt(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn drift(&self, theta: f64) -> f64 {
        self.drive - self.potential.slope(theta)
    }

    /// `d(drift)/dθ = −U″(θ)`.
    pub fn drift_slope(&self, theta: f64) -> f64 {
        -self.potential.curvature(theta)
    }

    /// Tilted potential `Ũ(x) = U(x) − f x` on the real line.
    pub fn tilted(&self, x: f64) -> f64 {
        self.potential.value(x) - self.drive * x
    }

    /// Upper bound on `|drift|`.
    pub fn max_abs_drift(&self) -> f64 {
        let (lo, hi) = self.potential.slope_range();
        (self.drive - lo).abs().max((self.drive - hi).abs())
    }

    /// Mirror image under `θ ↦ −θ`: potential reflected and drive negated.
    pub fn reflected(&self) -> Self {
        Self { potential: self.potential.reflected(), drive: -self.drive, epsilon: self.epsilon }
    }

    /// Transversal zeros of the drift on `[0, 1)`, located by sign changes on
    /// an `n`-point grid and refined by bisection to machine precision.
    ///
    /// Zeros where the drift touches zero without changing sign are not
    /// reported; see [`crate::attractors::find_fixed_points`] for the checks
    /// that reject them.
    pub fn drift_sign_changes(&self, n: usize) -> Vec<DriftZero> {
        let h = 1.0 / n as f64;
        let d: Vec<f64> = (0..=n).map(|k| self.drift(k as f64 * h)).collect();
        let mut roots = Vec::new();
        for k in 0..n {
            let (a, b) = (d[k], d[k + 1]);
            if a == 0.0 {
                let prev = if k == 0 { d[n - 1] } else { d[k - 1] };
                if prev * b < 0.0 {
                    roots.push(DriftZero { theta: k as f64 * h, ascending: b > 0.0 });
                }
            } else if a * b < 0.0 {
                let r = bisect(|x| self.drift(x), k as f64 * h, (k + 1) as f64 * h, 0.0);
                roots.push(DriftZero { theta: if r < 1.0 { r } else { 0.0 }, ascending: b > 0.0 });
            }
        }
        roots.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
        roots.dedup_by(|a, b| (a.theta - b.theta).abs() < 1e-14);
        roots
    }
}

/// A sign change of the drift. `ascending` zeros (drift going from negative
/// to positive) are unstable and are the local maxima of `Ũ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftZero {
    pub theta: f64,
    pub ascending: bool,
}

/// Default slope-gap threshold for kink reports: `1e-3 · (max|value| + 1)`.
pub fn default_kink_tolerance(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-3 * (scale + 1.0)
}

/// A function sampled on a strictly increasing grid in `[0, 1)`, extended to
/// the real line by `value(θ + 1) = value(θ) + seam_offset`.
///
/// Most landscapes are periodic (`seam_offset = 0`); the sup-construction
/// `U*` inherits the tilt and steps by `−f` per revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeFn {
    grid: Vec<f64>,
    values: Vec<f64>,
    kinks: Vec<f64>,
    seam_offset: f64,
}

impl LandscapeFn {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidLandscape(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.is_empty() {
            return Err(Error::InvalidLandscape("empty grid".into()));
        }
        if grid[0] < 0.0 || *grid.last().unwrap() >= 1.0 {
            return Err(Error::InvalidLandscape("grid must lie in [0, 1)".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLandscape("grid must be strictly increasing".into()));
        }
        Ok(Self { grid, values, kinks: Vec::new(), seam_offset: 0.0 })
    }

    /// Samples `f` on `θ_k = k/n`.
    pub fn uniform<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> Self {
        let grid = uniform_grid(n);
        let values = grid.iter().map(|&t| f(t)).collect();
        Self { grid, values, kinks: Vec::new(), seam_offset: 0.0 }
    }

    pub fn with_seam_offset(mut self, offset: f64) -> Self {
        self.seam_offset = offset;
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn seam_offset(&self) -> f64 {
        self.seam_offset
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Grid spacing when the grid is `k/n`.
    pub fn spacing(&self) -> Option<f64> {
        let n = self.grid.len();
        let h = 1.0 / n as f64;
        self.grid
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - k as f64 * h).abs() < 1e-12)
            .then_some(h)
    }

    /// Value at grid index `k`, which may run past either end of the grid.
    pub fn value_wrapped(&self, k: isize) -> f64 {
        let n = self.len() as isize;
        let q = k.div_euclid(n);
        self.values[k.rem_euclid(n) as usize] + q as f64 * self.seam_offset
    }

    /// Piecewise-linear interpolation at any real `θ`.
    pub fn value_at(&self, theta: f64) -> f64 {
        let turns = theta.floor();
        let t = theta - turns;
        let base = turns * self.seam_offset;
        let n = self.len();
        let idx = self.grid.partition_point(|&g| g <= t);
        let (x0, v0, x1, v1) = if idx == 0 {
            (self.grid[n - 1] - 1.0, self.values[n - 1] - self.seam_offset, self.grid[0], self.values[0])
        } else if idx == n {
            (self.grid[n - 1], self.values[n - 1], self.grid[0] + 1.0, self.values[0] + self.seam_offset)
        } else {
            (self.grid[idx - 1], self.values[idx - 1], self.grid[idx], self.values[idx])
        };
        base + v0 + (v1 - v0) * (t - x0) / (x1 - x0)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid point of the (first) maximum.
    pub fn argmax(&self) -> f64 {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        self.grid[k]
    }

    pub fn argmin(&self) -> f64 {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        self.grid[k]
    }

    /// Applies `g(θ, value)` pointwise; kinks are dropped.
    pub fn map<F: Fn(f64, f64) -> f64>(&self, g: F) -> Self {
        let values = self.grid.iter().zip(&self.values).map(|(&t, &v)| g(t, v)).collect();
        Self { grid: self.grid.clone(), values, kinks: Vec::new(), seam_offset: self.seam_offset }
    }

    /// Same function minus its minimum; kinks are kept.
    pub fn shifted_to_zero_min(&self) -> Self {
        let m = self.min();
        let mut out = self.map(|_, v| v - m);
        out.kinks = self.kinks.clone();
        out
    }

    /// `max |self − other|` over a shared grid.
    pub fn sup_distance(&self, other: &LandscapeFn) -> Result<f64> {
        if self.grid.len() != other.grid.len()
            || self.grid.iter().zip(&other.grid).any(|(a, b)| (a - b).abs() > 1e-14)
        {
            return Err(Error::InvalidLandscape("landscapes are sampled on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Integral over one period by the trapezoid rule (periodic wrap).
    pub fn integral(&self) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for k in 0..n {
            let (x0, v0) = (self.grid[k], self.values[k]);
            let (x1, v1) = if k + 1 < n {
                (self.grid[k + 1], self.values[k + 1])
            } else {
                (self.grid[0] + 1.0, self.values[0] + self.seam_offset)
            };
            acc += 0.5 * (v0 + v1) * (x1 - x0);
        }
        acc
    }

    /// Estimated jump `slope(θ⁺) − slope(θ⁻)` associated with each grid
    /// interval `[θ_k, θ_{k+s}]` at stride `s` (uniform grids only).
    ///
    /// The estimator differences second differences on either side of the
    /// interval. It returns the exact jump for a corner anywhere inside the
    /// interval, while smooth curvature cancels to `O(h³)` and a jump in the
    /// second derivative shows up as `O(s·h)`.
    fn corner_estimates(&self, stride: isize) -> Vec<f64> {
        let n = self.len() as isize;
        let h = 1.0 / n as f64;
        let d = |k: isize| {
            self.value_wrapped(k + stride) - 2.0 * self.value_wrapped(k) + self.value_wrapped(k - stride)
        };
        (0..n)
            .map(|k| (d(k) + d(k + stride) - d(k - stride) - d(k + 2 * stride)) / (stride as f64 * h))
            .collect()
    }

    /// Detects points where one-sided slopes differ by more than `tol`
    /// (default [`default_kink_tolerance`]) and records them as kinks.
    ///
    /// Each reported kink is a grid point. A jump in the second derivative
    /// (a `C¹` junction) is not a kink; its estimate changes with the stride
    /// and the offset of the interval, while a corner's does not.
    pub fn detect_kinks(&mut self, tol: Option<f64>) -> Result<&[f64]> {
        if self.spacing().is_none() {
            return Err(Error::InvalidLandscape("kink detection needs a uniform grid".into()));
        }
        let n = self.len();
        if n < 16 {
            return Err(Error::InvalidLandscape("kink detection needs at least 16 points".into()));
        }
        let tol = tol.unwrap_or_else(|| default_kink_tolerance(&self.values));
        let fine = self.corner_estimates(1);
        let coarse = self.corner_estimates(2);
        let flagged: Vec<bool> = (0..n)
            .map(|k| {
                let g = fine[k];
                // both stride-2 intervals [k-1, k+1] and [k, k+2] contain a
                // corner lying in [k, k+1] and must see the same jump
                let agree = |c: f64| (c - g).abs() <= 0.25 * g.abs();
                g.abs() > tol && agree(coarse[k]) && agree(coarse[(k + n - 1) % n])
            })
            .collect();
        let mut kinks = Vec::new();
        if flagged.iter().all(|&f| f) {
            return Err(Error::InvalidLandscape("every interval looks like a kink".into()));
        }
        // walk clusters of consecutive flagged intervals, starting after an unflagged one
        let start = flagged.iter().position(|&f| !f).unwrap();
        let mut k = 0;
        while k < n {
            let i = (start + k) % n;
            if !flagged[i] {
                k += 1;
                continue;
            }
            let mut best = i;
            while k < n && flagged[(start + k) % n] {
                let j = (start + k) % n;
                if fine[j].abs() > fine[best].abs() {
                    best = j;
                }
                k += 1;
            }
            // the corner sits nearer the end of the interval with the larger second difference
            let left = (self.value_wrapped(best as isize + 1) - 2.0 * self.value_wrapped(best as isize)
                + self.value_wrapped(best as isize - 1))
            .abs();
            let right = (self.value_wrapped(best as isize + 2) - 2.0 * self.value_wrapped(best as isize + 1)
                + self.value_wrapped(best as isize))
            .abs();
            let idx = if left >= right { best } else { (best + 1) % n };
            kinks.push(self.grid[idx]);
        }
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup();
        self.kinks = kinks;
        Ok(&self.kinks)
    }

    /// Replaces the kink list (used when kinks are known analytically).
    pub fn set_kinks(&mut self, kinks: Vec<f64>) {
        self.kinks = kinks;
    }
}

/// `θ_k = k/n` for `k = 0..n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / n as f64).collect()
}

/// Circular distance between two angles.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// On-disk system description shared by every workflow:
/// `{ "cos": [a1, ...], "sin": [b1, ...], "f": real, "epsilon": real }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
    pub f: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            // unknown and missing fields are reported inside backticks at the top level
            let field = if path == "." {
                msg.split('`').nth(1).map(str::to_owned).unwrap_or_else(|| "<document>".into())
            } else {
                path
            };
            Error::Config { field, reason: msg }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn into_system(self) -> Result<CircleSystem> {
        let potential = PeriodicPotential::new(self.cos, self.sin)?;
        let sys = CircleSystem::new(potential, self.f)?;
        match self.epsilon {
            Some(e) if !(e.is_finite() && e > 0.0) => Err(Error::Config {
                field: "epsilon".into(),
                reason: format!("must be positive and finite, got {e}"),
            }),
            Some(e) => sys.with_epsilon(e),
            None => Ok(sys),
        }
    }

    pub fn from_system(sys: &CircleSystem) -> Self {
        Self {
            cos: sys.potential().cos_coeffs().to_vec(),
            sin: sys.potential().sin_coeffs().to_vec(),
            f: sys.drive(),
            epsilon: sys.epsilon_opt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn well() -> PeriodicPotential {
        PeriodicPotential::sine_wells(1)
    }

    #[test]
    fn sine_potential_spot_values() {
        let u = well();
        assert!(u.slope(0.0).abs() < 1e-15);
        assert!((u.slope(0.25) - 1.0).abs() < 1e-15);
        assert!((u.value(1.25) - u.value(0.25)).abs() < 1e-15);
        assert!((u.value(0.0) + 1.0 / TWO_PI).abs() < 1e-15);
    }

    #[test]
    fn drift_spot_values() {
        assert!((CircleSystem::sine(2.0).drift(0.25) - 1.0).abs() < 1e-15);
        assert!(CircleSystem::sine(0.5).drift(1.0 / 12.0).abs() < 1e-15);
        let flat = CircleSystem::new(PeriodicPotential::zero(), 0.0).unwrap();
        assert_eq!(flat.drift(0.37), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let u = PeriodicPotential::new(vec![0.3, -0.1], vec![0.05, 0.2, 0.01]).unwrap();
        let h = 1e-5;
        for &t in &[0.0, 0.13, 0.5, 0.91] {
            let fd1 = (u.value(t + h) - u.value(t - h)) / (2.0 * h);
            let fd2 = (u.slope(t + h) - u.slope(t - h)) / (2.0 * h);
            assert!((fd1 - u.slope(t)).abs() < 1e-7);
            assert!((fd2 - u.curvature(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn slope_range_of_sine_is_unit() {
        let (lo, hi) = well().slope_range();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_samples_recovers_trig_polynomial() {
        let u = PeriodicPotential::new(vec![0.2, 0.0, -0.4], vec![0.1]).unwrap();
        let samples: Vec<f64> = (0..32).map(|j| u.value(j as f64 / 32.0)).collect();
        let v = PeriodicPotential::from_samples(&samples, 5).unwrap();
        for k in 0..50 {
            let t = k as f64 / 50.0 + 0.003;
            assert!((u.value(t) - v.value(t)).abs() < 1e-12);
        }
        assert!(PeriodicPotential::from_samples(&samples, 16).is_err());
    }

    #[test]
    fn config_round_trip_and_field_errors() {
        let cfg = SystemConfig::from_json(r#"{"cos":[-0.159],"f":0.5,"epsilon":0.1}"#).unwrap();
        let sys = cfg.clone().into_system().unwrap();
        assert_eq!(sys.epsilon().unwrap(), 0.1);
        assert_eq!(SystemConfig::from_system(&sys), cfg);

        match SystemConfig::from_json(r#"{"cos":[1.0],"f":0.5,"epsilon":-1}"#).unwrap().into_system() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "epsilon"),
            other => panic!("unexpected {other:?}"),
        }
        match SystemConfig::from_json(r#"{"cos":[1.0],"f":0.5,"eps":1}"#) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "eps"),
            other => panic!("unexpected {other:?}"),
        }
        match SystemConfig::from_json(r#"{"cos":"x","f":0.5}"#) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "cos"),
            other => panic!("{other:?}"),
        }
        match SystemConfig::from_json(r#"{"cos":[1.0]}"#) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "f"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn landscape_interpolation_wraps_with_seam() {
        let l = LandscapeFn::uniform(8, |t| -0.5 * t).with_seam_offset(-0.5);
        assert!((l.value_at(0.3) + 0.15).abs() < 1e-15);
        assert!((l.value_at(1.3) + 0.65).abs() < 1e-14);
        assert!((l.value_at(0.95) + 0.475).abs() < 1e-14);
        assert!((l.value_at(-0.05) + 0.5 * -0.05).abs() < 1e-14);
    }

    #[test]
    fn kink_detector_finds_corners_and_ignores_curvature_jumps() {
        // corners at 0.3 and 0.8 (slope jumps ±2), C¹ junctions at 0.55 and 0.7
        let bump = |t: f64| {
            if t > 0.55 && t < 0.7 {
                2000.0 * (t - 0.55).powi(2) * (0.7 - t).powi(2)
            } else {
                0.0
            }
        };
        let n = 4096;
        let mut l = LandscapeFn::uniform(n, |t| circle_distance(t, 0.3) + bump(t));
        let kinks = l.detect_kinks(Some(0.1)).unwrap().to_vec();
        assert_eq!(kinks.len(), 2, "{kinks:?}");
        assert!((kinks[0] - 0.3).abs() <= 1.0 / n as f64);
        assert!((kinks[1] - 0.8).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn smooth_landscape_has_no_kinks() {
        let mut l = LandscapeFn::uniform(1024, |t| (TWO_PI * 3.0 * t).sin() / 3.0);
        assert!(l.detect_kinks(None).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn potential_is_periodic(theta in -5.0f64..5.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let u = PeriodicPotential::new(vec![a, 0.3], vec![b]).unwrap();
            for order in 0..3 {
                let x = u.derivative(theta, order);
                let y = u.derivative(theta + 1.0, order);
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn drift_periodic_and_staircase(theta in -3.0f64..3.0, f in -3.0f64..3.0) {
            let sys = CircleSystem::multiwell(2, f);
            prop_assert!((sys.drift(theta) - sys.drift(theta + 1.0)).abs() < 1e-12);
            let step = sys.tilted(theta + 1.0) - sys.tilted(theta);
            prop_assert!((step + f).abs() < 1e-12);
        }
    }
}

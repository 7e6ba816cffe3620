//! The emergent Markov chain between attractors and the global landscape.
//!
//! Stationary probabilities are computed with Grassmann–Taksar–Heyman state
//! reduction in the log domain: every step adds positive quantities, so the
//! result keeps full relative accuracy even when rates span thousands of
//! orders of magnitude (`V/ε ~ 10⁴` at `ε = 1e-3`).

use std::collections::VecDeque;

use serde::Serialize;

use crate::attractors::{barrier_matrix, fw_cost, pair_log_rate, AttractorGraph, Branch, Direction, PieceKind};
use crate::error::{Error, Result};
use crate::model::{uniform_grid, LandscapeFn};
use crate::numerics::{bisect, log_add_exp};
use crate::tropical::tree_exponents;

/// Threshold on the cycle defect (or cycle log-rate ratio) for equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

/// Continuous-time chain stored as log rates; `−∞` marks a missing edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChain {
    log_rates: Vec<Vec<f64>>,
    exponents: Option<Vec<Vec<f64>>>,
    epsilon: Option<f64>,
}

impl DiscreteChain {
    pub fn from_log_rates(
        log_rates: Vec<Vec<f64>>,
        exponents: Option<Vec<Vec<f64>>>,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        let n = log_rates.len();
        if n < 2 {
            return Err(Error::TooFewStates { got: n, min: 2 });
        }
        if log_rates.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidRates("rate matrix is not square".into()));
        }
        if log_rates.iter().flatten().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::InvalidRates("rates must be finite and non-negative".into()));
        }
        if let Some(v) = &exponents {
            if v.len() != n || v.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidRates("exponent matrix has the wrong shape".into()));
            }
            if v.iter().enumerate().any(|(i, r)| r.iter().enumerate().any(|(j, &x)| i != j && (x.is_nan() || x < 0.0))) {
                return Err(Error::InvalidRates("exponents must be non-negative".into()));
            }
        }
        let mut log_rates = log_rates;
        for (i, row) in log_rates.iter_mut().enumerate() {
            row[i] = f64::NEG_INFINITY;
        }
        Ok(Self { log_rates, exponents, epsilon })
    }

    /// Plain rates `k_ij ≥ 0`; the diagonal is ignored.
    pub fn from_rates(k: &[Vec<f64>]) -> Result<Self> {
        if k.iter().flatten().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidRates("rates must be finite and non-negative".into()));
        }
        Self::from_log_rates(k.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect(), None, None)
    }

    /// Unit prefactors: `k_ij = e^{−V(i,j)/ε}`, `V = +∞` for no edge.
    pub fn from_exponents(v: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        let lk = v.iter().map(|r| r.iter().map(|x| -x / epsilon).collect()).collect();
        Self::from_log_rates(lk, Some(v), Some(epsilon))
    }

    pub fn len(&self) -> usize {
        self.log_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_rates.is_empty()
    }

    pub fn log_rate(&self, i: usize, j: usize) -> f64 {
        self.log_rates[i][j]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.log_rates[i][j].exp()
    }

    pub fn exponents(&self) -> Option<&[Vec<f64>]> {
        self.exponents.as_deref()
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Generator `K` with `K_ii = −Σ_{j≠i} k_ij`, so rows sum to zero.
    pub fn rate_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| if i == j { 0.0 } else { self.rate(i, j) }).collect();
                row[i] = -row.iter().sum::<f64>();
                row
            })
            .collect()
    }

    fn reaches_all(&self, start: usize, forward: bool) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for w in 0..n {
                let edge = if forward { self.log_rates[u][w] } else { self.log_rates[w][u] };
                if !seen[w] && edge > f64::NEG_INFINITY {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_irreducible(&self) -> bool {
        self.reaches_all(0, true) && self.reaches_all(0, false)
    }
}

/// Chain on the attractors of `g` with Kramers rates at `ε`. With two
/// attractors both channels between them are summed into one rate.
pub fn build_chain(g: &AttractorGraph, epsilon: f64, with_prefactor: bool) -> Result<DiscreteChain> {
    let n = g.len();
    if n < 2 {
        return Err(Error::TooFewStates { got: n, min: 2 });
    }
    let mut lk = vec![vec![f64::NEG_INFINITY; n]; n];
    let mut v = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match pair_log_rate(g, i, j, epsilon, with_prefactor) {
                Ok((log_k, exponent)) => {
                    lk[i][j] = log_k;
                    v[i][j] = exponent;
                }
                Err(Error::NotAdjacent { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    DiscreteChain::from_log_rates(lk, Some(v), Some(epsilon))
}

/// `ln π` solving `πK = 0`, `Σπ = 1`.
pub fn stationary_log_pi(chain: &DiscreteChain) -> Result<Vec<f64>> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible);
    }
    let n = chain.len();
    let mut q = chain.log_rates.clone();
    // censor states n-1, ..., 1; q[i][k] then holds ln(q_ik / s_k)
    for k in (1..n).rev() {
        let s = (0..k).fold(f64::NEG_INFINITY, |acc, j| log_add_exp(acc, q[k][j]));
        if s == f64::NEG_INFINITY {
            return Err(Error::Reducible);
        }
        for row in q.iter_mut().take(k) {
            row[k] -= s;
        }
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    q[i][j] = log_add_exp(q[i][j], q[i][k] + q[k][j]);
                }
            }
        }
    }
    let mut log_pi = vec![0.0; n];
    for k in 1..n {
        log_pi[k] = (0..k).fold(f64::NEG_INFINITY, |acc, i| log_add_exp(acc, log_pi[i] + q[i][k]));
    }
    let z = log_pi.iter().fold(f64::NEG_INFINITY, |acc, &l| log_add_exp(acc, l));
    Ok(log_pi.into_iter().map(|l| l - z).collect())
}

pub fn stationary_pi(chain: &DiscreteChain) -> Result<Vec<f64>> {
    Ok(stationary_log_pi(chain)?.into_iter().map(f64::exp).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainAsymptotics {
    pub pi: Vec<f64>,
    pub log_pi: Vec<f64>,
    /// Lightest in-tree weights.
    pub w_raw: Vec<f64>,
    /// `w_raw − min w_raw`.
    pub w: Vec<f64>,
    pub equilibrium: bool,
}

/// π at the chain's own rates, and the min-plus exponents `W_i`.
pub fn chain_exponents(chain: &DiscreteChain) -> Result<ChainAsymptotics> {
    let v = chain.exponents().ok_or(Error::MissingExponents)?;
    let log_pi = stationary_log_pi(chain)?;
    let w_raw = tree_exponents(v);
    let lo = w_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let w = w_raw.iter().map(|x| x - lo).collect();
    let equilibrium = equilibrium_test(chain)?.equilibrium;
    Ok(ChainAsymptotics { pi: log_pi.iter().map(|l| l.exp()).collect(), log_pi, w_raw, w, equilibrium })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub equilibrium: bool,
    /// `Σ_i V(i,i+1) − V(i+1,i)` around the ring `0 → 1 → … → 0`; zero for
    /// two states, where the ring degenerates.
    pub defect: Option<f64>,
    /// `ln Π k_{i,i+1} − ln Π k_{i+1,i}` around the same ring.
    pub log_rate_ratio: f64,
}

/// Kolmogorov cycle criterion on the ring of states.
///
/// With exponents the verdict uses the exponent defect, which is the
/// `ε → 0` statement; otherwise it uses the log ratio of the rate products.
pub fn equilibrium_test(chain: &DiscreteChain) -> Result<EquilibriumReport> {
    let n = chain.len();
    let ring = |m: &dyn Fn(usize, usize) -> f64| -> f64 {
        if n == 2 {
            return 0.0;
        }
        (0..n).map(|i| m(i, (i + 1) % n) - m((i + 1) % n, i)).sum()
    };
    let log_rate_ratio = ring(&|i, j| chain.log_rate(i, j));
    let defect = chain.exponents().map(|v| ring(&|i, j| v[i][j]));
    if log_rate_ratio.is_nan() || defect.is_some_and(f64::is_nan) {
        return Err(Error::InvalidRates("ring edge missing in one direction".into()));
    }
    let equilibrium = match defect {
        Some(d) => d.abs() < EQUILIBRIUM_TOL,
        None => log_rate_ratio.abs() < EQUILIBRIUM_TOL,
    };
    Ok(EquilibriumReport { equilibrium, defect, log_rate_ratio })
}

/// Free-energy offset across one ring edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lift {
    pub from: usize,
    pub to: usize,
    /// `ln(π_i k_ij) − ln(π_j k_ji)`.
    pub delta_mu: f64,
}

/// `Δμ_{i,i+1}` for each ring edge (both orientations when `N = 2`).
pub fn lambda_surgery_lifts(asym: &ChainAsymptotics, chain: &DiscreteChain) -> Result<Vec<Lift>> {
    let n = chain.len();
    if asym.log_pi.len() != n {
        return Err(Error::InvalidRates("asymptotics belong to a different chain".into()));
    }
    Ok(ring_pairs(n)
        .into_iter()
        .map(|(i, j)| Lift {
            from: i,
            to: j,
            delta_mu: asym.log_pi[i] + chain.log_rate(i, j) - asym.log_pi[j] - chain.log_rate(j, i),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchSwitch {
    pub theta: f64,
    pub left: Branch,
    pub right: Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLandscape {
    /// `W(x) − min W`, kinks recorded.
    pub w: LandscapeFn,
    /// The `W_i` used for pasting.
    pub w_i: Vec<f64>,
    /// Minimizing branch at each grid point.
    pub branches: Vec<Branch>,
    pub switches: Vec<BranchSwitch>,
    /// Grid points where two different sources attain the minimum.
    pub ties: Vec<f64>,
    /// Kinks next to a constant (plateau) branch: the flat-topped maxima.
    pub plateau_kinks: Vec<f64>,
    /// `λ_{i,i+1} = W_{i+1} − W_i − V(i,i+1) + V(i+1,i)`, the `ε → 0` limit of
    /// `ε Δμ`.
    pub exponent_lifts: Vec<f64>,
    /// Largest jump of `W` across a saddle.
    pub saddle_gap: f64,
}

impl GlobalLandscape {
    pub fn is_continuous(&self) -> bool {
        self.saddle_gap < 1e-8
    }
}

/// `W(x) = min_i {W_i + V(i, x)}` with the minimizing branch at every point.
pub fn global_w(g: &AttractorGraph, w_i: &[f64], x: f64) -> (f64, Branch, f64) {
    let mut best = (f64::INFINITY, None, f64::INFINITY);
    for (i, &wi) in w_i.iter().enumerate() {
        let c = fw_cost(g, i, x);
        let val = wi + c.cost;
        if val < best.0 {
            best = (val, Some(c.branch), best.0);
        } else if val < best.2 {
            best.2 = val;
        }
    }
    (best.0, best.1.expect("at least one attractor"), best.2)
}

/// Pastes the local landscapes into the global one.
pub fn paste_global(g: &AttractorGraph, asym: &ChainAsymptotics, grid_size: usize) -> Result<GlobalLandscape> {
    let n = g.len();
    if asym.w_raw.len() != n {
        return Err(Error::InvalidRates(format!("{} exponents for {n} attractors", asym.w_raw.len())));
    }
    let w_i = asym.w_raw.clone();
    let grid = uniform_grid(grid_size);
    let evals: Vec<(f64, Branch, f64)> = grid.iter().map(|&x| global_w(g, &w_i, x)).collect();
    let lo = evals.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let scale = evals.iter().map(|e| e.0 - lo).fold(1.0, f64::max);
    let mut w = LandscapeFn::new(grid.clone(), evals.iter().map(|e| e.0 - lo).collect())?;
    w.detect_kinks(None)?;
    let branches: Vec<Branch> = evals.iter().map(|e| e.1).collect();

    let ties = grid
        .iter()
        .zip(&evals)
        .filter(|(_, e)| e.2 - e.0 <= 1e-12 * scale)
        .map(|(&t, _)| t)
        .collect();

    let mut switches = Vec::new();
    for k in 0..grid_size {
        let (a, b) = (branches[k], branches[(k + 1) % grid_size]);
        if a != b {
            let lo_t = grid[k];
            let hi_t = if k + 1 == grid_size { 1.0 } else { grid[k + 1] };
            // bisect on "still the left branch"
            let t = bisect(
                |x| if global_w(g, &w_i, x).1 == a { -1.0 } else { 1.0 },
                lo_t,
                hi_t,
                1e-13,
            );
            switches.push(BranchSwitch { theta: t.rem_euclid(1.0), left: a, right: b });
        }
    }

    let h = 1.0 / grid_size as f64;
    let plateau_kinks = w
        .kinks()
        .iter()
        .copied()
        .filter(|&t| {
            let k = (t / h).round() as isize;
            (-2..=2).any(|d| branches[(k + d).rem_euclid(grid_size as isize) as usize].kind == PieceKind::Plateau)
        })
        .collect();

    let mut saddle_gap: f64 = 0.0;
    for i in 0..n {
        let s = g.saddle(i, Direction::Cw);
        let d = 1e-9;
        saddle_gap = saddle_gap.max((global_w(g, &w_i, s - d).0 - global_w(g, &w_i, s + d).0).abs());
    }

    let v = if n >= 2 { barrier_matrix(g)? } else { vec![vec![f64::INFINITY]] };
    let exponent_lifts = ring_pairs(n)
        .into_iter()
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| w_i[j] - w_i[i] - v[i][j] + v[j][i])
        .collect();

    Ok(GlobalLandscape { w, w_i, branches, switches, ties, plateau_kinks, exponent_lifts, saddle_gap })
}

fn ring_pairs(n: usize) -> Vec<(usize, usize)> {
    if n <= 2 {
        vec![(0, 1), (1, 0)]
    } else {
        (0..n).map(|i| (i, (i + 1) % n)).collect()
    }
}

/// Each basin carries its own `φ_b`, with no offsets: discontinuous at
/// saddles unless the system is in equilibrium and the wells are level.
pub fn naive_pasting(g: &AttractorGraph, grid_size: usize) -> LandscapeFn {
    LandscapeFn::uniform(grid_size, |x| {
        let (b, y) = g.locate(x);
        g.phi(b, y)
    })
}

/// `W_b + φ_b` on each basin `b`.
pub fn lifted_pieces(g: &AttractorGraph, w_i: &[f64], grid_size: usize) -> LandscapeFn {
    LandscapeFn::uniform(grid_size, |x| {
        let (b, y) = g.locate(x);
        w_i[b] + g.phi(b, y)
    })
}

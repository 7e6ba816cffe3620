//! Fixed points, basins, barriers and escape rates in the multi-attractor
//! regime.
//!
//! On the circle every Freidlin–Wentzell quantity reduces to differences of
//! the tilted potential `Ũ` at critical points. Attractors are indexed in
//! order of increasing θ. Moving in the direction of increasing θ is called
//! clockwise (`Cw`); the unstable point crossed when leaving attractor `i`
//! clockwise is `saddle(i)`, lifted into `(θ_i, θ_i + 1)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::asymptotics::{classify, Regime};
use crate::error::{Error, Result};
use crate::model::{uniform_grid, CircleSystem, LandscapeFn};
use crate::numerics::{golden_max, log_add_exp};

/// Bracketing grid for drift zeros.
pub const ROOT_GRID: usize = 8192;
/// `|drift|` below this at a touching point means a double root.
pub const DOUBLE_ROOT_DRIFT: f64 = 1e-10;
/// `|drift slope|` below this at a root means a degenerate root.
pub const DEGENERATE_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub theta: f64,
    pub kind: Stability,
    /// `U″(θ)`, the negative of the drift slope; positive at stable points.
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Increasing θ.
    Cw,
    /// Decreasing θ.
    Ccw,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Cw => "cw",
            Direction::Ccw => "ccw",
        }
    }
}

/// The zeros of the drift on `[0, 1)`, sorted and classified.
///
/// Fails with [`Error::NoFixedPoints`] in the limit-cycle regime and with
/// [`Error::Degenerate`] at saddle-node configurations (a double root, or a
/// root where the drift slope is below [`DEGENERATE_SLOPE`]).
pub fn find_fixed_points(sys: &CircleSystem) -> Result<Vec<FixedPoint>> {
    let n = ROOT_GRID;
    let h = 1.0 / n as f64;
    let samples: Vec<f64> = (0..n).map(|k| sys.drift(k as f64 * h)).collect();
    if samples.iter().all(|&d| d.abs() < DOUBLE_ROOT_DRIFT) {
        // identically zero drift: every point is fixed
        return Err(Error::Degenerate { theta: 0.0 });
    }
    // touching zeros: local minima of |drift| without a sign change
    for k in 0..n {
        let (a, b, c) = (samples[(k + n - 1) % n], samples[k], samples[(k + 1) % n]);
        let crossing = a * b < 0.0 || b * c < 0.0 || (b == 0.0 && a * c < 0.0);
        if !crossing && b.abs() <= a.abs() && b.abs() <= c.abs() {
            let t = k as f64 * h;
            let (x, v) = golden_max(|x| -sys.drift(x).abs(), t - h, t + h, 1e-14);
            if -v < DOUBLE_ROOT_DRIFT {
                return Err(Error::Degenerate { theta: x.rem_euclid(1.0) });
            }
        }
    }
    let zeros = sys.drift_sign_changes(n);
    if zeros.is_empty() {
        return Err(Error::NoFixedPoints);
    }
    let mut points = Vec::with_capacity(zeros.len());
    for z in zeros {
        let slope = sys.drift_slope(z.theta);
        if slope.abs() < DEGENERATE_SLOPE {
            return Err(Error::Degenerate { theta: z.theta });
        }
        let kind = if z.ascending { Stability::Unstable } else { Stability::Stable };
        points.push(FixedPoint { theta: z.theta, kind, curvature: -slope });
    }
    Ok(points)
}

/// One barrier crossing: leave attractor `from` in `direction` over `saddle`
/// (lifted next to `θ_from`) and fall into attractor `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Barrier {
    pub from: usize,
    pub to: usize,
    pub direction: Direction,
    pub saddle: f64,
    pub height: f64,
}

/// Attractors, the unstable points between them, and the tilted potential.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorGraph {
    system: CircleSystem,
    fixed_points: Vec<FixedPoint>,
    attractors: Vec<FixedPoint>,
    /// `saddles[i]` lies in `(θ_i, θ_i + 1)` and separates `i` from `i + 1`.
    saddles: Vec<f64>,
}

impl AttractorGraph {
    pub fn new(sys: &CircleSystem) -> Result<Self> {
        let fixed_points = find_fixed_points(sys)?;
        let attractors: Vec<FixedPoint> =
            fixed_points.iter().copied().filter(|p| p.kind == Stability::Stable).collect();
        let unstable: Vec<f64> = fixed_points
            .iter()
            .filter(|p| p.kind == Stability::Unstable)
            .map(|p| p.theta)
            .collect();
        debug_assert_eq!(attractors.len(), unstable.len());
        let saddles = attractors
            .iter()
            .map(|a| {
                // first unstable point after θ_i on the lift
                unstable
                    .iter()
                    .map(|&s| if s > a.theta { s } else { s + 1.0 })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Ok(Self { system: sys.clone(), fixed_points, attractors, saddles })
    }

    pub fn system(&self) -> &CircleSystem {
        &self.system
    }

    pub fn fixed_points(&self) -> &[FixedPoint] {
        &self.fixed_points
    }

    pub fn attractors(&self) -> &[FixedPoint] {
        &self.attractors
    }

    pub fn len(&self) -> usize {
        self.attractors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attractors.is_empty()
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.attractors[i].theta
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::BadIndex { index: i, len: self.len() })
        }
    }

    /// Saddle crossed when leaving `i` in `dir`, lifted next to `θ_i`.
    pub fn saddle(&self, i: usize, dir: Direction) -> f64 {
        let n = self.len();
        match dir {
            Direction::Cw => self.saddles[i],
            Direction::Ccw => {
                let s = self.saddles[(i + n - 1) % n];
                if s > self.theta(i) {
                    s - 1.0
                } else {
                    s
                }
            }
        }
    }

    /// Lifted basin `(s_ccw, s_cw)` of attractor `i`.
    pub fn basin(&self, i: usize) -> (f64, f64) {
        (self.saddle(i, Direction::Ccw), self.saddle(i, Direction::Cw))
    }

    /// Index of the basin containing `x` and the lift of `x` into it.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        for i in 0..self.len() {
            let (lo, hi) = self.basin(i);
            let y = lo + (x - lo).rem_euclid(1.0);
            if y < hi {
                return (i, y);
            }
        }
        // x sits on a saddle up to rounding; attach it to the nearest basin
        let i = (0..self.len())
            .min_by(|&a, &b| {
                let da = (x - self.saddles[a]).rem_euclid(1.0).min((self.saddles[a] - x).rem_euclid(1.0));
                let db = (x - self.saddles[b]).rem_euclid(1.0).min((self.saddles[b] - x).rem_euclid(1.0));
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let (lo, _) = self.basin(i);
        (i, lo + (x - lo).rem_euclid(1.0))
    }

    pub fn neighbor(&self, i: usize, dir: Direction) -> usize {
        let n = self.len();
        match dir {
            Direction::Cw => (i + 1) % n,
            Direction::Ccw => (i + n - 1) % n,
        }
    }

    /// `Ũ(saddle) − Ũ(θ_i)` for the exit in `dir`.
    pub fn barrier_height(&self, i: usize, dir: Direction) -> f64 {
        self.system.tilted(self.saddle(i, dir)) - self.system.tilted(self.theta(i))
    }

    /// `φ_i(x) = Ũ(x) − Ũ(θ_i)` for `x` on the lift (no basin restriction).
    pub fn phi(&self, i: usize, x: f64) -> f64 {
        self.system.tilted(x) - self.system.tilted(self.theta(i))
    }
}

/// Every directed exit channel: two per attractor. With a single attractor
/// both channels return to it.
pub fn barriers(g: &AttractorGraph) -> Vec<Barrier> {
    let mut out = Vec::with_capacity(2 * g.len());
    for i in 0..g.len() {
        for dir in [Direction::Cw, Direction::Ccw] {
            out.push(Barrier {
                from: i,
                to: g.neighbor(i, dir),
                direction: dir,
                saddle: g.saddle(i, dir),
                height: g.barrier_height(i, dir),
            });
        }
    }
    out
}

/// `V(i, j)` for adjacent pairs, `+∞` elsewhere and on the diagonal. With
/// two attractors both channels join the same pair and the lower barrier
/// sets the exponent.
pub fn barrier_matrix(g: &AttractorGraph) -> Result<Vec<Vec<f64>>> {
    let n = g.len();
    if n < 2 {
        return Err(Error::TooFewStates { got: n, min: 2 });
    }
    let mut v = vec![vec![f64::INFINITY; n]; n];
    for b in barriers(g) {
        v[b.from][b.to] = v[b.from][b.to].min(b.height);
    }
    Ok(v)
}

/// Local landscape `φ_i` on `grid_size` points: `Ũ − Ũ(θ_i)` on the basin of
/// `i`, continued outside by the Freidlin–Wentzell cost [`fw_cost`] (constant
/// after each saddle, rising again past each further attractor).
pub fn local_landscape(g: &AttractorGraph, i: usize, grid_size: usize) -> Result<LandscapeFn> {
    g.check(i)?;
    let grid = uniform_grid(grid_size);
    let values = grid.iter().map(|&x| fw_cost(g, i, x).cost).collect();
    LandscapeFn::new(grid, values)
}

/// Which formula produced a value of `V(i, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    /// `x` is uphill of the attractor of its basin: cost rises with `φ_b(x)`.
    Slope,
    /// `x` is downhill of the entry saddle: cost is the accumulated barrier.
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Branch {
    pub source: usize,
    pub basin: usize,
    pub direction: Direction,
    pub kind: PieceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FwCost {
    pub cost: f64,
    pub branch: Branch,
}

/// Quasi-potential `V(i, x)` from attractor `i` to the point `x`.
///
/// The cheapest path is monotone and pays every uphill increment of `Ũ`
/// along the way, so it is the minimum over the two directions of the
/// barriers crossed plus the climb inside the basin of `x`. Either direction
/// may go all the way round, which produces the plateau inside `i`'s own
/// basin.
pub fn fw_cost(g: &AttractorGraph, i: usize, x: f64) -> FwCost {
    let (b, y) = g.locate(x);
    let n = g.len();
    let mut best: Option<FwCost> = None;
    for dir in [Direction::Cw, Direction::Ccw] {
        let uphill = match dir {
            Direction::Cw => y >= g.theta(b),
            Direction::Ccw => y <= g.theta(b),
        };
        let steps = match dir {
            Direction::Cw => (b + n - i) % n,
            Direction::Ccw => (i + n - b) % n,
        };
        let (cost, kind) = if steps == 0 {
            if uphill {
                (g.phi(i, y), PieceKind::Slope)
            } else {
                // all the way round, entering our own basin from the far side
                (ring_sum(g, i, dir), PieceKind::Plateau)
            }
        } else {
            let mut acc = 0.0;
            let mut k = i;
            for _ in 0..steps {
                acc += g.barrier_height(k, dir);
                k = g.neighbor(k, dir);
            }
            if uphill {
                (acc + g.phi(b, y), PieceKind::Slope)
            } else {
                (acc, PieceKind::Plateau)
            }
        };
        let c = FwCost { cost, branch: Branch { source: i, basin: b, direction: dir, kind } };
        if best.is_none_or(|bst| c.cost < bst.cost) {
            best = Some(c);
        }
    }
    best.expect("two directions evaluated")
}

/// Sum of all barriers met walking once around from `i` in `dir`.
fn ring_sum(g: &AttractorGraph, i: usize, dir: Direction) -> f64 {
    let mut k = i;
    let mut acc = 0.0;
    for _ in 0..g.len() {
        acc += g.barrier_height(k, dir);
        k = g.neighbor(k, dir);
    }
    acc
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::Cw => Direction::Ccw,
            Direction::Ccw => Direction::Cw,
        }
    }
}

/// Exit-rate estimate for one channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub from: usize,
    pub to: usize,
    pub direction: Direction,
    /// Barrier `V(i, j)`.
    pub exponent: f64,
    /// Curvature prefactor, when requested and well defined.
    pub prefactor: Option<f64>,
    pub epsilon: f64,
    /// `ln(prefactor) − V/ε`, with a unit prefactor when none is available.
    pub log_rate: f64,
    pub warning: Option<String>,
}

impl RateEstimate {
    pub fn rate(&self) -> f64 {
        self.log_rate.exp()
    }
}

/// Rate of leaving attractor `i` in `dir` at noise `ε`.
///
/// The exponent is the barrier height. With `with_prefactor`, the
/// Eyring–Kramers factor `√(|b′(θ_i)| |b′(s)|) / 2π` is applied, where `b′` is
/// the drift slope; it is skipped with a warning when either slope is below
/// [`DEGENERATE_SLOPE`]. The prefactor is a standard choice layered on top
/// of the exponential law, not part of it.
pub fn kramers_rate(
    g: &AttractorGraph,
    i: usize,
    dir: Direction,
    epsilon: f64,
    with_prefactor: bool,
) -> Result<RateEstimate> {
    g.check(i)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let exponent = g.barrier_height(i, dir);
    let (mut prefactor, mut warning) = (None, None);
    if with_prefactor {
        let well = g.system.drift_slope(g.theta(i)).abs();
        let top = g.system.drift_slope(g.saddle(i, dir)).abs();
        if well < DEGENERATE_SLOPE || top < DEGENERATE_SLOPE {
            warning = Some(format!(
                "flat drift slope (well {well:.3e}, saddle {top:.3e}); prefactor omitted"
            ));
        } else {
            prefactor = Some((well * top).sqrt() / (2.0 * PI));
        }
    }
    let log_rate = prefactor.map_or(0.0, f64::ln) - exponent / epsilon;
    Ok(RateEstimate { from: i, to: g.neighbor(i, dir), direction: dir, exponent, prefactor, epsilon, log_rate, warning })
}

/// Total rate from `i` to `j` summed over every channel connecting them,
/// returned as `(ln k_ij, min exponent)`.
pub fn pair_log_rate(
    g: &AttractorGraph,
    i: usize,
    j: usize,
    epsilon: f64,
    with_prefactor: bool,
) -> Result<(f64, f64)> {
    g.check(i)?;
    g.check(j)?;
    let mut log_k = f64::NEG_INFINITY;
    let mut exponent = f64::INFINITY;
    for dir in [Direction::Cw, Direction::Ccw] {
        if g.neighbor(i, dir) == j {
            let r = kramers_rate(g, i, dir, epsilon, with_prefactor)?;
            log_k = log_add_exp(log_k, r.log_rate);
            exponent = exponent.min(r.exponent);
        }
    }
    if log_k == f64::NEG_INFINITY {
        return Err(Error::NotAdjacent { from: i, to: j });
    }
    Ok((log_k, exponent))
}

/// Convenience wrapper: fails unless the system has stable fixed points.
pub fn attractor_graph(sys: &CircleSystem) -> Result<AttractorGraph> {
    if classify(sys).regime == Regime::LimitCycle {
        return Err(Error::NoFixedPoints);
    }
    AttractorGraph::new(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicPotential;
    use proptest::prelude::*;

    fn tilted_three_well() -> CircleSystem {
        CircleSystem::multiwell(3, 0.1)
    }

    #[test]
    fn single_well_fixed_points() {
        let pts = find_fixed_points(&CircleSystem::sine(0.5)).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].theta - 1.0 / 12.0).abs() < 1e-12 && pts[0].kind == Stability::Stable);
        assert!((pts[1].theta - 5.0 / 12.0).abs() < 1e-12 && pts[1].kind == Stability::Unstable);

        let pts = find_fixed_points(&CircleSystem::sine(0.0)).unwrap();
        assert!(pts[0].theta.abs() < 1e-12 && pts[0].kind == Stability::Stable);
        assert!((pts[1].theta - 0.5).abs() < 1e-12 && pts[1].kind == Stability::Unstable);
    }

    #[test]
    fn three_wells_alternate() {
        let pts = find_fixed_points(&CircleSystem::multiwell(3, 0.0)).unwrap();
        assert_eq!(pts.len(), 6);
        for (k, p) in pts.iter().enumerate() {
            assert!((p.theta - k as f64 / 6.0).abs() < 1e-12);
            let expect = if k % 2 == 0 { Stability::Stable } else { Stability::Unstable };
            assert_eq!(p.kind, expect);
        }
    }

    #[test]
    fn degenerate_and_limit_cycle_rejected() {
        assert_eq!(find_fixed_points(&CircleSystem::sine(2.0)), Err(Error::NoFixedPoints));
        match find_fixed_points(&CircleSystem::sine(1.0)) {
            Err(Error::Degenerate { theta }) => assert!((theta - 0.25).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let flat = CircleSystem::new(PeriodicPotential::zero(), 0.0).unwrap();
        assert!(matches!(find_fixed_points(&flat), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn single_well_barriers_and_local_landscape() {
        let g = AttractorGraph::new(&CircleSystem::sine(0.5)).unwrap();
        let b = barriers(&g);
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].from, b[0].to, b[0].direction), (0, 0, Direction::Cw));
        // Ũ(5/12) − Ũ(1/12) from the closed form
        let cw = (3f64.sqrt()) / (2.0 * PI) - 1.0 / 6.0;
        assert!((b[0].height - cw).abs() < 1e-12);
        assert!((b[1].height - (cw + 0.5)).abs() < 1e-12);
        assert!((b[0].height - 0.10900).abs() < 5e-6);
        assert!((b[1].height - 0.60900).abs() < 5e-6);

        let phi = local_landscape(&g, 0, 1200).unwrap();
        assert!(phi.value_at(1.0 / 12.0).abs() < 1e-12);
        assert!(phi.values().iter().all(|&v| v >= -1e-15));
    }

    #[test]
    fn symmetric_barriers_at_zero_drive() {
        let g = AttractorGraph::new(&CircleSystem::multiwell(2, 0.0)).unwrap();
        let v = barrier_matrix(&g).unwrap();
        assert!((v[0][1] - v[1][0]).abs() < 1e-12);
        let (k01, _) = pair_log_rate(&g, 0, 1, 0.05, true).unwrap();
        let (k10, _) = pair_log_rate(&g, 1, 0, 0.05, true).unwrap();
        assert!((k01 - k10).abs() < 1e-12);
    }

    #[test]
    fn rate_ratio_is_tilt() {
        let g = AttractorGraph::new(&CircleSystem::sine(0.5)).unwrap();
        let eps = 0.05;
        let cw = kramers_rate(&g, 0, Direction::Cw, eps, true).unwrap();
        let ccw = kramers_rate(&g, 0, Direction::Ccw, eps, true).unwrap();
        // same saddle, same curvature: the ratio is pure exponent
        assert!((cw.log_rate - ccw.log_rate - 0.5 / eps).abs() < 1e-9);
    }

    /// Brute force: cost of going from θ_i to the next attractor is the
    /// highest point of Ũ on the path, found on a dense grid.
    #[test]
    fn three_well_barriers_match_dense_path_max() {
        let sys = tilted_three_well();
        let g = AttractorGraph::new(&sys).unwrap();
        let m = 1_000_000;
        for b in barriers(&g) {
            let start = g.theta(b.from);
            let end = match b.direction {
                Direction::Cw => g.theta(b.to) + if g.theta(b.to) > start { 0.0 } else { 1.0 },
                Direction::Ccw => g.theta(b.to) - if g.theta(b.to) < start { 0.0 } else { 1.0 },
            };
            let top = (0..=m)
                .map(|k| sys.tilted(start + (end - start) * k as f64 / m as f64))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((top - sys.tilted(start) - b.height).abs() < 1e-6, "{b:?}");
        }
    }

    #[test]
    fn rate_prefactor_degenerate_warns() {
        // U = −cos(2πθ)/(2π) − 0.3·cos(4πθ)/(4π) has well-defined slopes; flatten one artificially
        let g = AttractorGraph::new(&CircleSystem::sine(0.5)).unwrap();
        let r = kramers_rate(&g, 0, Direction::Cw, 0.1, false).unwrap();
        assert!(r.prefactor.is_none() && r.warning.is_none());
        assert!((r.log_rate + r.exponent / 0.1).abs() < 1e-15);
        assert!(matches!(kramers_rate(&g, 3, Direction::Cw, 0.1, false), Err(Error::BadIndex { .. })));
    }

    #[test]
    fn fw_cost_in_own_basin_and_plateau() {
        let g = AttractorGraph::new(&CircleSystem::sine(0.5)).unwrap();
        let t = g.theta(0);
        assert!(fw_cost(&g, 0, t).cost.abs() < 1e-15);
        // just below the saddle on the ccw side of the well the direct climb
        // is 0.609 while going cw over 0.109 and sliding down is cheaper
        let x = g.saddle(0, Direction::Ccw) + 1e-3;
        let c = fw_cost(&g, 0, x);
        assert_eq!(c.branch.kind, PieceKind::Plateau);
        assert!((c.cost - g.barrier_height(0, Direction::Cw)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn tilt_bookkeeping(f in -0.9f64..0.9, k in 1usize..5) {
            let sys = CircleSystem::multiwell(k, f);
            let g = AttractorGraph::new(&sys).unwrap();
            let b = barriers(&g);
            let cw: f64 = b.iter().filter(|b| b.direction == Direction::Cw).map(|b| b.height).sum();
            let ccw: f64 = b.iter().filter(|b| b.direction == Direction::Ccw).map(|b| b.height).sum();
            prop_assert!((cw - ccw + f).abs() < 1e-8);
            prop_assert!(b.iter().all(|b| b.height > 0.0));
        }

        #[test]
        fn fixed_points_alternate(f in -0.95f64..0.95, a in -0.1f64..0.1) {
            let p = PeriodicPotential::new(vec![-1.0 / (2.0 * PI), a], vec![0.02]).unwrap();
            let sys = CircleSystem::new(p, f).unwrap();
            if let Ok(pts) = find_fixed_points(&sys) {
                prop_assert!(pts.len() % 2 == 0);
                for w in pts.windows(2) {
                    prop_assert!(w[0].kind != w[1].kind);
                    prop_assert!(sys.drift(w[0].theta).abs() < 1e-12);
                }
            }
        }
    }
}

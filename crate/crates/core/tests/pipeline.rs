//! End-to-end consistency between independent routes to the same quantity.

use landscape_core::asymptotics::landscape_v;
use landscape_core::attractors::{kramers_rate, AttractorGraph, Direction};
use landscape_core::chain::{build_chain, equilibrium_test, stationary_pi};
use landscape_core::exact_stationary::solve_stationary;
use landscape_core::model::{CircleSystem, PeriodicPotential};
use landscape_core::simulate::{first_passage, run_ensemble, SimConfig};

#[test]
fn simulated_histogram_matches_exact_density() {
    let sys = CircleSystem::sine(2.0).with_epsilon(0.05).unwrap();
    let exact = solve_stationary(&sys, 1024).unwrap();
    let cfg = SimConfig { dt: Some(5e-4), horizon: 20.0, n_paths: 200, seed: 3, bins: 32, ..Default::default() };
    let hist = run_ensemble(&sys, &cfg).unwrap().histogram;
    // exact mass per bin by trapezoid on the 1024 grid, 32 points per bin
    let l1: f64 = (0..32)
        .map(|b| {
            let mass: f64 = (0..32)
                .map(|k| {
                    let i = b * 32 + k;
                    0.5 * (exact.density.value_wrapped(i as isize) + exact.density.value_wrapped(i as isize + 1))
                })
                .sum::<f64>()
                / 1024.0;
            (mass - hist[b]).abs()
        })
        .sum();
    assert!(l1 < 0.05, "L1 = {l1}");
}

#[test]
fn kramers_rate_matches_escape_time() {
    // one well, barrier 1/π both ways; leaving means reaching the next copy of the well
    let sys = CircleSystem::sine(0.0);
    let g = AttractorGraph::new(&sys).unwrap();
    let barrier = g.barrier_height(0, Direction::Cw);
    assert!((barrier - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    let eps = barrier / 6.0;
    let k = kramers_rate(&g, 0, Direction::Cw, eps, true).unwrap().rate();
    let well = g.theta(0);
    let s = sys.with_epsilon(eps).unwrap();
    let cfg = SimConfig { dt: Some(eps / 50.0), horizon: 1e5, n_paths: 400, seed: 17, start: well, ..Default::default() };
    let p = first_passage(&s, &cfg, well, well).unwrap();
    let ratio = 1.0 / (p.mean() * 2.0 * k);
    assert!((ratio - 1.0).abs() < 0.25, "ratio {ratio}, mfpt {}", p.mean());
}

#[test]
fn reversing_the_drive_reflects_everything() {
    let pot = PeriodicPotential::new(vec![0.05, -0.02], vec![0.03]).unwrap();
    let a = CircleSystem::new(pot.clone(), 0.3).unwrap();
    let b = CircleSystem::new(pot.reflected(), -0.3).unwrap();
    let n = 512;
    let ua = solve_stationary(&a.clone().with_epsilon(0.05).unwrap(), n).unwrap();
    let ub = solve_stationary(&b.clone().with_epsilon(0.05).unwrap(), n).unwrap();
    assert!((ua.flux + ub.flux).abs() < 1e-10 * ua.flux.abs());
    let va = landscape_v(&a, n).unwrap();
    let vb = landscape_v(&b, n).unwrap();
    for k in 0..n as isize {
        assert!((ua.density.value_wrapped(k) - ub.density.value_wrapped(-k)).abs() < 1e-9);
        assert!((va.value_wrapped(k) - vb.value_wrapped(-k)).abs() < 1e-9);
    }
}

#[test]
fn chain_defect_flips_with_drive() {
    let d = |f: f64| {
        let g = AttractorGraph::new(&CircleSystem::multiwell(3, f)).unwrap();
        equilibrium_test(&build_chain(&g, 0.05, false).unwrap()).unwrap().defect.unwrap()
    };
    assert!((d(0.1) + 0.1).abs() < 1e-10);
    assert!((d(-0.1) - 0.1).abs() < 1e-10);
}

#[test]
fn chain_pi_matches_basin_masses_in_equilibrium() {
    // two unequal wells
    let sys = CircleSystem::new(PeriodicPotential::new(vec![0.02, -1.0 / (4.0 * std::f64::consts::PI)], vec![]).unwrap(), 0.0)
        .unwrap();
    let eps = 0.005;
    let g = AttractorGraph::new(&sys).unwrap();
    assert_eq!(g.len(), 2);
    let pi = stationary_pi(&build_chain(&g, eps, true).unwrap()).unwrap();
    let n = 8192;
    let sol = solve_stationary(&sys.clone().with_epsilon(eps).unwrap(), n).unwrap();
    let mut mass = [0.0; 2];
    for (k, &t) in sol.density.grid().iter().enumerate() {
        mass[g.locate(t).0] += sol.density.values()[k] / n as f64;
    }
    for i in 0..2 {
        assert!((pi[i] / mass[i] - 1.0).abs() < 0.05, "pi {pi:?} mass {mass:?}");
    }
}

//! The three standard figures, each as SVG plus the plotted data as CSV.

use landscape_core::asymptotics::{landscape_v, limiting_density, LimitingDensity, SupEvaluator};
use landscape_core::attractors::{local_landscape, AttractorGraph};
use landscape_core::chain::{build_chain, chain_exponents, lifted_pieces, naive_pasting, paste_global};
use landscape_core::model::{uniform_grid, CircleSystem};
use landscape_core::Result;
use serde_json::json;

use crate::output::Table;
use crate::svg::{render, Panel, Series, PALETTE};

pub struct Figure {
    pub svg: String,
    pub table: Table,
}

fn curve(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().copied().zip(ys.iter().copied()).collect()
}

/// Tilted potential, its forward sup and `V`, over two revolutions.
pub fn fig1(sys: &CircleSystem, n: usize) -> Result<Figure> {
    let eval = SupEvaluator::new(sys);
    let xs: Vec<f64> = (0..=2 * n).map(|k| k as f64 / n as f64).collect();
    let tilted: Vec<f64> = xs.iter().map(|&t| sys.tilted(t)).collect();
    let ustar: Vec<f64> = xs.iter().map(|&t| eval.ustar(t)).collect();
    let neg: Vec<f64> = tilted.iter().map(|u| -u).collect();
    let v: Vec<f64> = xs.iter().map(|&t| eval.v(t)).collect();
    let f = sys.drive();
    let slope: Vec<f64> = xs.iter().map(|&t| tilted[0] - f * t).collect();
    let panels = [
        Panel::new("(A) U - f theta and U*", "theta", "")
            .with(Series::new("U - f theta", curve(&xs, &tilted), PALETTE[0]))
            .with(Series::new("U*", curve(&xs, &ustar), PALETTE[1]).thick())
            .with(Series::new("slope -f", curve(&xs, &slope), "#777").dashed()),
        Panel::new("(B) U* and -U + f theta", "theta", "")
            .with(Series::new("U*", curve(&xs, &ustar), PALETTE[1]).thick())
            .with(Series::new("-U + f theta", curve(&xs, &neg), PALETTE[2])),
        Panel::new("(C) V = U* - U + f theta", "theta", "V").with(Series::new("V", curve(&xs, &v), PALETTE[3]).thick()),
    ];
    let mut table = Table::new(
        "fig1",
        json!({ "f": f, "kinks": landscape_v(sys, n.max(256))?.kinks() }),
        &["theta", "tilted", "ustar", "V"],
    );
    for k in 0..xs.len() {
        table.row(vec![Some(xs[k]), Some(tilted[k]), Some(ustar[k]), Some(v[k])]);
    }
    Ok(Figure { svg: render(&panels, 3), table })
}

pub const FIG2_DRIVES: [f64; 4] = [5.0, 2.0, 1.1, 1.05];

/// Limit-cycle densities of `θ̇ = f − sin 2πθ`.
pub fn fig2(n: usize) -> Result<Figure> {
    let xs = uniform_grid(n);
    let mut panel = Panel::new("Limiting density u0 for f = 5, 2, 1.1, 1.05", "theta", "u0");
    let mut cols = Vec::new();
    for (k, &f) in FIG2_DRIVES.iter().enumerate() {
        let u = match limiting_density(&CircleSystem::sine(f), n)? {
            LimitingDensity::Continuous(u) => u,
            LimitingDensity::Delta { .. } => unreachable!("f > 1 is a limit cycle"),
        };
        let mut pts = curve(&xs, u.values());
        pts.push((1.0, u.values()[0]));
        panel = panel.with(Series::new(format!("f = {f}"), pts, PALETTE[k]));
        cols.push(u.values().to_vec());
    }
    let mut table = Table::new("fig2", json!({ "f": FIG2_DRIVES }), &["theta", "u0_f5", "u0_f2", "u0_f1.1", "u0_f1.05"]);
    for (k, &t) in xs.iter().enumerate() {
        let mut row = vec![Some(t)];
        row.extend(cols.iter().map(|c| Some(c[k])));
        table.row(row);
    }
    Ok(Figure { svg: render(&[panel], 1), table })
}

/// Local pieces, naive pasting, lifted pieces and the pasted landscape.
pub fn fig3(sys: &CircleSystem, epsilon: f64, n: usize) -> Result<Figure> {
    let g = AttractorGraph::new(sys)?;
    let chain = build_chain(&g, epsilon, false)?;
    let asym = chain_exponents(&chain)?;
    let global = paste_global(&g, &asym, n)?;
    let xs = uniform_grid(n);
    let mut pieces = Panel::new("(a) local landscapes", "theta", "phi_i");
    let mut local_cols = Vec::new();
    for i in 0..g.len() {
        let l = local_landscape(&g, i, n)?;
        pieces = pieces.with(Series::new(format!("phi_{}", i + 1), curve(&xs, l.values()), PALETTE[i % PALETTE.len()]));
        local_cols.push(l.values().to_vec());
    }
    let naive = naive_pasting(&g, n);
    let lifted = lifted_pieces(&g, &global.w_i, n);
    let lifts: Vec<String> = global.exponent_lifts.iter().map(|l| format!("{l:.3}")).collect();
    // break the lines at basin boundaries so jumps show as gaps
    let gapped = |vals: &[f64]| -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(vals.len() + 8);
        for k in 0..vals.len() {
            if k > 0 && g.locate(xs[k]).0 != g.locate(xs[k - 1]).0 {
                out.push((xs[k], f64::NAN));
            }
            out.push((xs[k], vals[k]));
        }
        out
    };
    let panels = [
        pieces,
        Panel::new("(b) naive pasting", "theta", "").with(Series::new("", gapped(naive.values()), PALETTE[0])),
        Panel::new(format!("(c) lifted pieces, lifts [{}]", lifts.join(", ")), "theta", "")
            .with(Series::new("", gapped(lifted.values()), PALETTE[1])),
        Panel::new("(d) global landscape W", "theta", "W").with(Series::new("", curve(&xs, global.w.values()), PALETTE[3]).thick()),
    ];
    let mut names: Vec<String> = vec!["theta".into()];
    names.extend((0..g.len()).map(|i| format!("phi_{}", i + 1)));
    names.extend(["naive".into(), "lifted".into(), "W".into()]);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut table = Table::new(
        "fig3",
        json!({
            "f": sys.drive(),
            "epsilon": epsilon,
            "W_i": global.w_i,
            "lifts": global.exponent_lifts,
            "kinks": global.w.kinks(),
            "plateau_kinks": global.plateau_kinks,
        }),
        &name_refs,
    );
    for k in 0..n {
        let mut row = vec![Some(xs[k])];
        row.extend(local_cols.iter().map(|c| Some(c[k])));
        row.extend([Some(naive.values()[k]), Some(lifted.values()[k]), Some(global.w.values()[k])]);
        table.row(row);
    }
    Ok(Figure { svg: render(&panels, 2), table })
}

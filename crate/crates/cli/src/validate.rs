//! Self-checks run by `tdvertex validate`: closed-form disk polarization,
//! symmetry nulls, manufactured state solution and the finite-size expansion.

use std::f64::consts::PI;

use tdvertex::fem::l2_error;
use tdvertex::inclusion::build_inclusion;
use tdvertex::polarization::load_or_compute;
use tdvertex::tdmap::{smooth_test_image, FiniteEpsOptions};
use tdvertex::{finite_eps_check, solve_state, CoefficientField, Grid2D, InclusionShape, ScalarField, SolveParams};

use crate::config::Cli;
use crate::CheckFailed;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn disk(cli: &Cli, p: &SolveParams) -> anyhow::Result<Check> {
    let pol = load_or_compute(&InclusionShape::disk(64), p, &cli.common.exterior(), &cli.common.cache, false)?;
    let c = (p.lambda_out - p.lambda_in) / (p.lambda_in + p.lambda_out);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for k in 0..2 {
            let target = if i == k { c } else { 0.0 };
            worst = worst.max((pol.p1[i][k] - target).abs() / c);
        }
    }
    let x_zero = pol.x.iter().flatten().all(|v| *v == 0.0);
    Ok(Check {
        name: "disk polarization",
        pass: worst <= 0.05 && x_zero && pol.p2_max_abs() < 0.02,
        detail: format!("P1 rel dev {worst:.4}, |P2| {:.1e}, X zero {x_zero}", pol.p2_max_abs()),
    })
}

fn symmetry(cli: &Cli, p: &SolveParams) -> anyhow::Result<Check> {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for angles in [vec![0.0, 180.0], vec![0.0, 90.0, 180.0, 270.0]] {
        let shape = build_inclusion(&angles, cli.common.w)?;
        let pol = load_or_compute(&shape, p, &cli.common.exterior(), &cli.common.cache, false)?;
        pass &= pol.x.iter().flatten().all(|v| *v == 0.0);
        worst = worst.max(pol.p2_max_abs());
    }
    Ok(Check {
        name: "symmetry nulls",
        pass: pass && worst < 0.02,
        detail: format!("X zero {pass}, |P2| {worst:.1e}"),
    })
}

fn manufactured(p: &SolveParams) -> anyhow::Result<Check> {
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let mut errs = Vec::new();
    for n in [50, 100, 200] {
        let g = Grid2D::unit_square(n)?;
        let f = ScalarField::from_fn(&g, |x, y| (1.0 + 2.0 * PI * PI * p.alpha * p.lambda_out) * exact(x, y));
        let u = solve_state(&f, p, &CoefficientField::uniform(&g, p.lambda_out), &g)?;
        errs.push(l2_error(&u, exact));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(Check {
        name: "manufactured convergence",
        pass: orders.iter().all(|o| *o >= 1.9),
        detail: format!("orders {orders:.3?}"),
    })
}

fn finite_size(cli: &Cli, p: &SolveParams) -> anyhow::Result<Check> {
    let shape = build_inclusion(&[0.0, 90.0], cli.common.w)?;
    let pol = load_or_compute(&shape, p, &cli.common.exterior(), &cli.common.cache, false)?;
    let r = finite_eps_check(&smooth_test_image, &shape, &pol, [0.45, 0.55], p, &FiniteEpsOptions::default())?;
    let gap = r.final_td1_relative_gap();
    Ok(Check {
        name: "finite-size expansion",
        pass: r.is_monotone() && gap < 0.15,
        detail: format!("monotone {}, final relative gap {gap:.3}", r.is_monotone()),
    })
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let p = cli.common.solve_params()?;
    let checks = [disk(cli, &p)?, symmetry(cli, &p)?, manufactured(&p)?, finite_size(cli, &p)?];
    let mut failed = Vec::new();
    for c in &checks {
        println!("{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        if !c.pass {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(format!("failed checks: {}", failed.join(", "))).into())
    }
}

//! Scratch diagnostic: full pipeline on the desk problem and the builtin
//! two-bump profile.

use mcn_core::constants::{auto_bundle, compute_bundle};
use mcn_core::problem::detect_sign_structure;
use mcn_core::solver::{estimate_d_star, estimate_d_star_upper, find_two_solutions, lambda_sweep};
use mcn_core::{NonlinearitySpec, RadialProblem, SignDetection, SolveOptions, WeightSpec};
use std::time::Instant;

fn desk(lambda: f64) -> RadialProblem<f64> {
    RadialProblem::new(
        1,
        3.0,
        lambda,
        WeightSpec::PiecewiseConstant {
            breakpoints: vec![1.0, 2.0],
            values: vec![-1.0, 1.0, -1.0],
        },
        NonlinearitySpec::Power { p: 2.0 },
    )
    .unwrap()
}

fn run(name: &str, problem: &RadialProblem<f64>, epsilon: Option<f64>) {
    println!("=== {name} (lambda = {}) ===", problem.lambda);
    let structure = detect_sign_structure(problem, &SignDetection::default()).unwrap();
    let mut bundle = match epsilon {
        Some(e) => compute_bundle(problem, &structure, e).unwrap(),
        None => auto_bundle(problem, &structure).unwrap(),
    };
    println!(
        "  delta_star = {:.6e}  delta_low = {:.6e}  lambda_star = {:.6e}",
        bundle.delta_star, bundle.delta_low, bundle.lambda_star
    );

    let options = SolveOptions {
        grid_cells: 400,
        ..SolveOptions::default()
    };

    let t = Instant::now();
    let d = estimate_d_star(problem, bundle.delta_star, &options);
    println!(
        "  d_star = {:.6e} ({:?}) [{:.2?}]",
        d.value,
        d.provenance,
        t.elapsed()
    );
    bundle.d_star = Some(d);

    let t = Instant::now();
    match estimate_d_star_upper(problem, bundle.delta_star, &options) {
        Ok(up) => {
            println!(
                "  d_star_upper = {:.6e} ({:?}) [{:.2?}]",
                up.value,
                up.provenance,
                t.elapsed()
            );
            bundle.d_star_upper = Some(up);
        }
        Err(e) => println!("  d_star_upper failed: {e} [{:.2?}]", t.elapsed()),
    }

    let t = Instant::now();
    match find_two_solutions(problem, &bundle, &options) {
        Ok(two) => {
            println!(
                "  small: sup = {:.10e}  residual = {:.3e}  class = {:?}",
                two.small.profile.sup_norm(),
                two.small.residual,
                two.small.classification
            );
            println!(
                "  large: sup = {:.10e}  residual = {:.3e}  class = {:?}",
                two.large.profile.sup_norm(),
                two.large.residual,
                two.large.classification
            );
            println!(
                "  straddles = {}  [{:.2?}]",
                two.straddles_ceiling,
                t.elapsed()
            );
        }
        Err(miss) => {
            println!(
                "  FAILED: {} attempts, {} found [{:.2?}]",
                miss.attempts.len(),
                miss.found.len(),
                t.elapsed()
            );
            for s in &miss.found {
                println!(
                    "    found sup = {:.6e} residual = {:.3e}",
                    s.profile.sup_norm(),
                    s.residual
                );
            }
        }
    }
    println!();
}

fn main() {
    let lambda_star = 2180.483961442461_f64;
    run("desk at 2*lambda_star", &desk(2.0 * lambda_star), Some(0.2));
    run("figure1", &RadialProblem::figure1(), None);

    // sweep on the desk: well below threshold, then above
    let p = desk(2.0 * lambda_star);
    let structure = detect_sign_structure(&p, &SignDetection::default()).unwrap();
    let bundle = compute_bundle(&p, &structure, 0.2).unwrap();
    let options = SolveOptions {
        grid_cells: 400,
        ..SolveOptions::default()
    };
    let grid = vec![
        0.01 * lambda_star,
        0.5 * lambda_star,
        1.2 * lambda_star,
        2.0 * lambda_star,
    ];
    let t = Instant::now();
    let rows = lambda_sweep(&p, &grid, Some(&bundle), &options).unwrap();
    for row in &rows {
        let norms: Vec<String> = row.norms.iter().map(|n| format!("{n:.4e}")).collect();
        println!(
            "  lambda = {:10.3}  multiple = {}  norms = [{}]",
            row.lambda,
            row.multiple,
            norms.join(", ")
        );
    }
    println!("  sweep [{:.2?}]", t.elapsed());
    homotopy_probe();
    certify_pairs();
    acceptance_probes();
}

fn homotopy_probe() {
    use mcn_core::solver::{homotopy_path, StartProfile};
    use mcn_core::{Grid, GridProfile};
    let p = desk(4000.0);
    let grid = Grid::for_problem(&p, 400);
    let level = 1.25_f64;
    let peak = 1.5_f64;
    let u: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| (level - (r - peak).abs()).max(1e-3 * level))
        .collect();
    let tent = GridProfile {
        du: vec![0.0; grid.len()],
        grid,
        u,
    };
    let options = SolveOptions {
        grid_cells: 400,
        ..SolveOptions::default()
    };
    for grid_thetas in [
        vec![0.25, 0.5, 0.75, 1.0],
        vec![0.5, 0.75, 1.0],
        vec![0.9, 0.95, 1.0],
    ] {
        let t = std::time::Instant::now();
        match homotopy_path(&p, &grid_thetas, StartProfile::Profile(tent.clone()), &options) {
            Ok(path) => {
                let row: Vec<String> = path
                    .iter()
                    .map(|s| format!("{:.3e}/{:.1e}", s.profile.sup_norm(), s.residual))
                    .collect();
                println!("  thetas {grid_thetas:?}: {} [{:.2?}]", row.join("  "), t.elapsed());
            }
            Err(e) => println!("  thetas {grid_thetas:?}: ERR {e} [{:.2?}]", t.elapsed()),
        }
    }
}

fn certify_pairs() {
    use mcn_core::solver::find_two_solutions;
    use mcn_core::{certify, Tolerances};

    println!("=== certification at grid 2000 ===");
    let lambda_star = 2180.483961442461_f64;
    let p = desk(2.0 * lambda_star);
    let structure = detect_sign_structure(&p, &SignDetection::default()).unwrap();
    let mut bundle = compute_bundle(&p, &structure, 0.2).unwrap();
    let options = SolveOptions {
        grid_cells: 2000,
        ..SolveOptions::default()
    };
    let t = std::time::Instant::now();
    bundle.d_star = Some(mcn_core::solver::estimate_d_star(&p, bundle.delta_star, &options));
    bundle.d_star_upper =
        mcn_core::solver::estimate_d_star_upper(&p, bundle.delta_star, &options).ok();
    let two = find_two_solutions(&p, &bundle, &options).unwrap();
    println!("  desk pipeline [{:.2?}]", t.elapsed());
    let tol = Tolerances {
        trim_epsilon: Some(0.2),
        slope_margin: 1e-11,
        ..Tolerances::default()
    };
    for (tag, sol) in [("small", &two.small), ("large", &two.large)] {
        let t = std::time::Instant::now();
        let cert = certify(&p, &sol.profile, &tol).unwrap();
        println!(
            "  desk {tag}: sup = {:.6e}  overall = {}  [{:.2?}]",
            cert.sup_norm,
            cert.overall,
            t.elapsed()
        );
        if !cert.overall {
            print!("{}", cert.to_text());
        }
    }

    let p = RadialProblem::figure1();
    let structure = detect_sign_structure(&p, &SignDetection::default()).unwrap();
    let mut bundle = auto_bundle(&p, &structure).unwrap();
    let t = std::time::Instant::now();
    bundle.d_star = Some(mcn_core::solver::estimate_d_star(&p, bundle.delta_star, &options));
    bundle.d_star_upper =
        mcn_core::solver::estimate_d_star_upper(&p, bundle.delta_star, &options).ok();
    let two = find_two_solutions(&p, &bundle, &options).unwrap();
    println!("  figure1 pipeline [{:.2?}]", t.elapsed());
    let tol = Tolerances::default();
    for (tag, sol) in [("small", &two.small), ("large", &two.large)] {
        let t = std::time::Instant::now();
        let cert = certify(&p, &sol.profile, &tol).unwrap();
        println!(
            "  figure1 {tag}: sup = {:.6e}  max|u'| = {:.6}  overall = {}  [{:.2?}]",
            cert.sup_norm,
            cert.max_abs_slope,
            cert.overall,
            t.elapsed()
        );
        if !cert.overall {
            print!("{}", cert.to_text());
        }
    }
}

fn acceptance_probes() {
    use mcn_core::solver::{find_two_solutions, resample, solve, StartProfile};
    use mcn_core::{certify, Grid, GridProfile, ShotControls, Tolerances};

    println!("=== acceptance probes ===");
    // fig1 weight zeros
    let p = RadialProblem::figure1();
    let s = detect_sign_structure(&p, &SignDetection::default()).unwrap();
    print!("  fig1 sign boundaries:");
    for i in &s.intervals {
        print!(" [{:.6}, {:.6}]", i.lo, i.hi);
    }
    println!();

    // fig1 pair + oracle match at M=2000
    let mut bundle = auto_bundle(&p, &s).unwrap();
    let options = SolveOptions {
        grid_cells: 2000,
        ..SolveOptions::default()
    };
    bundle.d_star = Some(mcn_core::solver::estimate_d_star(&p, bundle.delta_star, &options));
    bundle.d_star_upper =
        mcn_core::solver::estimate_d_star_upper(&p, bundle.delta_star, &options).ok();
    let two = find_two_solutions(&p, &bundle, &options).unwrap();
    let controls = ShotControls {
        slope_margin: 1e-12,
        ..ShotControls::default()
    };
    let grid = Grid::for_problem(&p, 2000);
    for (tag, sol) in [("small", &two.small), ("large", &two.large)] {
        let c = sol.profile.u[0];
        let roots = mcn_core::shooting::find_roots(&p, 0.8 * c, 1.2 * c, 80, 1e-10, &controls)
            .unwrap();
        if roots.is_empty() {
            println!("  fig1 {tag}: NO shooting root near c = {c:.6e}");
            continue;
        }
        let shot = &roots[0];
        let raw = GridProfile {
            grid: Grid::from_nodes(shot.r.clone()).unwrap(),
            u: shot.u.clone(),
            du: shot.du.clone(),
        };
        let shot_on_grid = resample(&raw, &grid);
        let dist: f64 = sol
            .profile
            .u
            .iter()
            .zip(shot_on_grid.u.iter())
            .map(|(&a, &b): (&f64, &f64)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        let cert = certify(&p, &sol.profile, &Tolerances::default()).unwrap();
        println!(
            "  fig1 {tag}: sup = {:.8e}  oracle sup-dist = {:.3e} (budget {:.3e})  cert = {}",
            sol.profile.sup_norm(),
            dist,
            1e-4 * sol.profile.sup_norm(),
            cert.overall
        );
    }

    // Richardson triplet on the fig1 small branch (smooth weight)
    let mut sups: Vec<f64> = Vec::new();
    for m in [500usize, 1000, 2000] {
        let options = SolveOptions {
            grid_cells: m,
            ..SolveOptions::default()
        };
        let g = Grid::for_problem(&p, m);
        let start = StartProfile::Profile(resample(&two.small.profile, &g));
        let sol = solve(&p, start, &options).unwrap();
        sups.push(sol.profile.sup_norm());
    }
    let d1 = (sups[1] - sups[0]).abs();
    let d2 = (sups[2] - sups[1]).abs();
    println!(
        "  richardson small: sups = {:.10e} {:.10e} {:.10e}  order = {:.3}",
        sups[0],
        sups[1],
        sups[2],
        (d1 / d2).log2()
    );
    let mut sups: Vec<f64> = Vec::new();
    for m in [500usize, 1000, 2000] {
        let options = SolveOptions {
            grid_cells: m,
            ..SolveOptions::default()
        };
        let g = Grid::for_problem(&p, m);
        let start = StartProfile::Profile(resample(&two.large.profile, &g));
        let sol = solve(&p, start, &options).unwrap();
        sups.push(sol.profile.sup_norm());
    }
    let d1 = (sups[1] - sups[0]).abs();
    let d2 = (sups[2] - sups[1]).abs();
    println!(
        "  richardson large: sups = {:.10e} {:.10e} {:.10e}  order = {:.3}",
        sups[0],
        sups[1],
        sups[2],
        (d1 / d2).log2()
    );
}

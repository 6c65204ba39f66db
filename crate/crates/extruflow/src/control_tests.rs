use super::*;
use crate::dynamics::simulate_plant;
use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(
    model: ExtrusionModel,
    wref: Vec<f64>,
    bounds: (f64, f64),
    w0: f64,
    step: f64,
) -> TrackingProblem {
    TrackingProblem {
        reference: WidthReference { nominal: wref.iter().cloned().fold(0.0, f64::max), target: wref },
        model,
        bounds,
        w0,
        step,
        lengths: None,
    }
}

fn table_model() -> ExtrusionModel {
    ExtrusionModel::new(16.98, 37.81, 8.80, 0.03, 0.05).unwrap()
}

/// Exhaustive active-set enumeration: for every lo/free/hi pattern, solve
/// the equality-constrained least squares through an explicitly built dense
/// transition matrix and keep the best feasible objective. Independent of
/// the solver's recursion-based path.
fn brute_force_objective(
    a: &[f64],
    b: &[f64],
    wref: &[f64],
    w0: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let n = wref.len();
    // w = M xi + m with M[i][j] = prod(a[j+1..=i]) b[j], m[i] = prod(a[0..=i]) w0.
    let mut big_m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut prod = b[j];
        for i in j..n {
            if i > j {
                prod *= a[i];
            }
            big_m[(i, j)] = prod;
        }
    }
    let mut m = DVector::zeros(n);
    let mut prod = w0;
    for i in 0..n {
        prod *= a[i];
        m[i] = prod;
    }

    let mut best = f64::INFINITY;
    let patterns = 3usize.pow(n as u32);
    for code in 0..patterns {
        let mut c = code;
        let mut fixed = vec![None; n];
        let mut free_idx = Vec::new();
        for k in 0..n {
            match c % 3 {
                0 => fixed[k] = Some(lo),
                1 => fixed[k] = Some(hi),
                _ => free_idx.push(k),
            }
            c /= 3;
        }
        // rhs = wref - m - M_X x_X
        let mut rhs = DVector::from_iterator(n, wref.iter().cloned()) - &m;
        for k in 0..n {
            if let Some(v) = fixed[k] {
                rhs -= big_m.column(k) * v;
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            if let Some(v) = fixed[k] {
                x[k] = v;
            }
        }
        if !free_idx.is_empty() {
            let mf = DMatrix::from_fn(n, free_idx.len(), |i, jj| big_m[(i, free_idx[jj])]);
            let normal = mf.transpose() * &mf;
            let rhs_f = mf.transpose() * &rhs;
            match normal.lu().solve(&rhs_f) {
                Some(sol) => {
                    let mut ok = true;
                    for (jj, &k) in free_idx.iter().enumerate() {
                        if sol[jj] < lo - 1e-9 || sol[jj] > hi + 1e-9 {
                            ok = false;
                            break;
                        }
                        x[k] = sol[jj];
                    }
                    if !ok {
                        continue;
                    }
                }
                None => continue,
            }
        }
        let xv = DVector::from_iterator(n, x.iter().cloned());
        let resid = &big_m * &xv + &m - DVector::from_iterator(n, wref.iter().cloned());
        best = best.min(resid.norm_squared());
    }
    best
}

/// (a, b) arrays matching what `solve` derives for this problem.
fn schedule_arrays(p: &TrackingProblem) -> (Vec<f64>, Vec<f64>) {
    let dir = infer_direction(&p.reference.target, p.w0);
    let tau = p.model.tau(dir);
    let n = p.reference.len();
    let a: Vec<f64> = (0..n).map(|k| 1.0 - p.segment_length(k) / tau).collect();
    let b: Vec<f64> = (0..n).map(|k| p.model.alpha * p.segment_length(k) / tau).collect();
    (a, b)
}

#[test]
fn constant_reference_steady_state_is_exact() {
    let m = table_model();
    let xi_bar = 0.04;
    let wref = vec![m.alpha * xi_bar; 200];
    let p = problem(m, wref, (0.0, 0.1), m.alpha * xi_bar, 0.1);
    let sol = solve(&p).unwrap();
    for &u in &sol.controls.xi {
        assert_relative_eq!(u, xi_bar, epsilon = 1e-9);
    }
    assert!(sol.objective < 1e-18);
    assert!(sol.kkt_residual <= 1e-8);
}

#[test]
fn fig10_step_up_saturates_ahead_of_the_step() {
    // Step 0.509 -> 0.849 with bounds [-2, 2]: the control hits the upper
    // bound in advance of the step, then settles at 0.05.
    let m = table_model();
    let w_lo = m.alpha * 0.03;
    let w_hi = m.alpha * 0.05;
    let n = 400;
    let step_at = 200;
    let mut wref = vec![w_lo; n];
    for r in wref.iter_mut().skip(step_at) {
        *r = w_hi;
    }
    let p = problem(m, wref, (-2.0, 2.0), w_lo, 0.1);
    let sol = solve(&p).unwrap();

    let first_sat = sol.controls.xi.iter().position(|&u| u >= 2.0 - 1e-9);
    assert!(first_sat.is_some(), "control must saturate at the upper bound");
    assert!(first_sat.unwrap() < step_at, "saturation must begin before the step");
    let tail = *sol.controls.xi.last().unwrap();
    assert_relative_eq!(tail, 0.05, epsilon = 1e-3);
    assert!(sol.kkt_residual <= 1e-8);
}

#[test]
fn hand_instance_matches_enumeration() {
    // A = 0.9, B = 0.1 (alpha = 1, ds = 0.1, tau = 1), w* = 1, bounds [0, 2].
    let m = ExtrusionModel::new(1.0, 1.0, 1.0, 0.0, 2.0).unwrap();
    let p = problem(m, vec![1.0; 5], (0.0, 2.0), 0.0, 0.1);
    let sol = solve(&p).unwrap();
    let (a, b) = schedule_arrays(&p);
    let oracle = brute_force_objective(&a, &b, &p.reference.target, 0.0, 0.0, 2.0);
    assert!((sol.objective - oracle).abs() <= 1e-6 * oracle.max(1.0));
    assert_relative_eq!(sol.objective, 1.3643866004, epsilon = 1e-6);
    // Everything saturates: exact tracking would need xi far above 2.
    for &u in &sol.controls.xi {
        assert_relative_eq!(u, 2.0, epsilon = 1e-9);
    }
}

#[test]
fn randomized_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..40 {
        let n = rng.gen_range(1..=8usize);
        let alpha = rng.gen_range(0.5..20.0);
        let tau_e = rng.gen_range(0.5..40.0);
        let tau_s = rng.gen_range(0.5..40.0);
        let model = ExtrusionModel::new(alpha, tau_e, tau_s, 0.0, 1.0).unwrap();
        let step = rng.gen_range(0.05..0.9) * tau_e.min(tau_s);
        let hi: f64 = rng.gen_range(0.02..2.0);
        let lo = hi - rng.gen_range(0.01..2.0);
        let w0 = rng.gen_range(0.0..alpha * hi.max(0.1));
        let wref: Vec<f64> =
            (0..n).map(|_| rng.gen_range(0.0..1.3 * alpha * hi.abs().max(0.1))).collect();
        let p = problem(model, wref, (lo, hi), w0, step);
        let sol = solve(&p).unwrap();

        assert!(sol.kkt_residual <= 1e-8, "kkt {}", sol.kkt_residual);
        let (a, b) = schedule_arrays(&p);
        let oracle = brute_force_objective(&a, &b, &p.reference.target, w0, lo, hi);
        assert!(
            (sol.objective - oracle).abs() <= 1e-6 * oracle.max(1.0),
            "objective {} vs oracle {}",
            sol.objective,
            oracle
        );

        // Bound feasibility.
        for &u in &sol.controls.xi {
            assert!(u >= lo - 1e-9 && u <= hi + 1e-9);
        }

        // First-order optimality probe: single-coordinate perturbations
        // within the box never decrease the objective.
        let (av, bv) = (a.clone(), b.clone());
        let eval = |xi: &[f64]| -> f64 {
            let mut w = w0;
            let mut obj = 0.0;
            for k in 0..xi.len() {
                w = av[k] * w + bv[k] * xi[k];
                let d = w - p.reference.target[k];
                obj += d * d;
            }
            obj
        };
        for k in 0..sol.controls.len() {
            for delta in [-1e-4, 1e-4] {
                let mut xi = sol.controls.xi.clone();
                xi[k] = (xi[k] + delta).clamp(lo, hi);
                assert!(eval(&xi) >= sol.objective - 1e-10);
            }
        }
    }
}

#[test]
fn unconstrained_matches_closed_form() {
    let m = table_model();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 60;
    let wref: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let w0 = 0.3;
    let p = problem(m, wref.clone(), (-1e6, 1e6), w0, 0.1);
    let sol = solve(&p).unwrap();

    // The condensed system is square lower-triangular, so unconstrained
    // least squares tracks the reference exactly: forward substitution.
    let dir = infer_direction(&wref, w0);
    let tau = p.model.tau(dir);
    let (a, b) = (1.0 - 0.1 / tau, m.alpha * 0.1 / tau);
    let mut w = w0;
    let mut closed_form = Vec::with_capacity(n);
    for r in &wref {
        let u = (r - a * w) / b;
        closed_form.push(u);
        w = *r;
    }
    for (u, v) in sol.controls.xi.iter().zip(&closed_form) {
        assert!((u - v).abs() <= 1e-6 * v.abs().max(1.0), "{u} vs {v}");
    }
    assert!(sol.objective < 1e-12);
}

#[test]
fn predicted_profile_is_consistent_with_resimulation() {
    let m = table_model();
    let mut wref = vec![0.5094; 150];
    for (k, r) in wref.iter_mut().enumerate().skip(50) {
        *r = if k < 100 { 0.849 } else { 0.3 };
    }
    let p = problem(m, wref, (-2.0, 2.0), 0.5094, 0.1);
    for sol in [solve(&p).unwrap(), solve_per_regime(&p).unwrap()] {
        let states = resimulate(&p, &sol);
        for (s, (_, w)) in states.iter().zip(sol.predicted.samples().iter().skip(1)) {
            assert!((s.max(0.0) - w).abs() <= 1e-9);
        }
    }
}

#[test]
fn per_regime_equals_solve_on_pure_expansion() {
    let m = table_model();
    let w_lo = m.alpha * 0.03;
    let w_hi = m.alpha * 0.05;
    let mut wref = vec![w_lo; 120];
    for r in wref.iter_mut().skip(60) {
        *r = w_hi;
    }
    let p = problem(m, wref, (-2.0, 2.0), w_lo, 0.1);
    let a = solve(&p).unwrap();
    let b = solve_per_regime(&p).unwrap();
    assert_eq!(a.regimes, b.regimes);
    for (x, y) in a.controls.xi.iter().zip(&b.controls.xi) {
        assert!((x - y).abs() < 1e-7);
    }
}

#[test]
fn per_regime_labels_follow_reference_monotonicity() {
    use crate::corner::{build_reference, CornerModel};
    use crate::gcode::{ExtrusionMode, GMove, MoveKind, ToolPath};
    use crate::geometry::Vec3;
    use crate::path::discretize;

    // One 40 mm line bounded by corners: trim, ramp-up, plateau, ramp-down, trim.
    let mv = GMove {
        target: Vec3::new(40.0, 0.0, 0.0),
        extrude: 1.6,
        feedrate: None,
        kind: MoveKind::Print,
        in_place: false,
    };
    let tp = ToolPath::from_moves(vec![mv], ExtrusionMode::Relative);
    let d = discretize(&tp, 0.1).unwrap();
    let ext = table_model();
    let cm = CornerModel::new(66.0, 406.0).unwrap();
    let reference = build_reference(&ext, &cm, &d, 0.5);

    let runs = partition_monotone_runs(&reference.target, 0.0);
    // Expansion first (ramp-up from the trim zeros), then shrink (ramp-down
    // into the final trim).
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0].direction, Some(Direction::Expand));
    assert_eq!(runs[1].direction, Some(Direction::Shrink));

    let p = TrackingProblem {
        reference,
        model: ext,
        bounds: (-2.0, 2.0),
        w0: 0.0,
        step: 0.1,
        lengths: None,
    };
    let sol = solve_per_regime(&p).unwrap();
    assert_eq!(sol.regimes[10], Direction::Expand);
    assert_eq!(sol.regimes[sol.regimes.len() - 10], Direction::Shrink);
    assert!(sol.kkt_residual <= 1e-8);
}

#[test]
fn chained_solves_continue_from_terminal_width() {
    let m = table_model();
    let p1 = problem(m, vec![0.68; 80], (-2.0, 2.0), 0.0, 0.1);
    let s1 = solve_per_regime(&p1).unwrap();
    let terminal = s1.predicted.samples().last().unwrap().1;
    let p2 = problem(m, vec![0.5; 80], (-2.0, 2.0), terminal, 0.1);
    let s2 = solve_per_regime(&p2).unwrap();
    assert_eq!(s2.predicted.samples()[0], (0.0, terminal));
}

#[test]
fn simulated_tracking_beats_constant_baseline() {
    // Fig. 10 expansion scenario through the plant with the same model.
    let m = table_model();
    let w_lo = m.alpha * 0.03;
    let w_hi = m.alpha * 0.05;
    let n = 400;
    let step_at = 200;
    let mut wref = vec![w_lo; n];
    for r in wref.iter_mut().skip(step_at) {
        *r = w_hi;
    }
    let p = problem(m, wref.clone(), (-2.0, 2.0), w_lo, 0.1);
    let sol = solve(&p).unwrap();

    let rmse = |xi: &[f64]| -> f64 {
        let plant = simulate_plant(&m, &ControlSequence::new(xi.to_vec(), 0.1), w_lo);
        let err: f64 = plant
            .samples()
            .iter()
            .skip(1)
            .zip(&wref)
            .map(|(&(_, w), r)| (w - r) * (w - r))
            .sum();
        (err / n as f64).sqrt()
    };

    let mut baseline = vec![0.03; n];
    for u in baseline.iter_mut().skip(step_at) {
        *u = 0.05;
    }
    let rmse_opt = rmse(&sol.controls.xi);
    let rmse_base = rmse(&baseline);
    assert!(
        rmse_opt < rmse_base,
        "optimal {rmse_opt} must beat constant baseline {rmse_base}"
    );
}

#[test]
fn error_paths() {
    let m = table_model();
    let p = problem(m, vec![], (0.0, 1.0), 0.0, 0.1);
    assert!(matches!(solve(&p), Err(SolveError::EmptyHorizon)));

    let p = problem(m, vec![0.5], (1.0, 0.0), 0.0, 0.1);
    assert!(matches!(solve(&p), Err(SolveError::BadBounds { .. })));

    let p = problem(m, vec![0.5], (0.0, 1.0), -0.1, 0.1);
    assert!(matches!(solve(&p), Err(SolveError::BadInitialWidth(_))));

    // Step above tau_shrink propagates the stability error.
    let p = problem(m, vec![0.5, 0.4], (0.0, 1.0), 0.6, 9.5);
    assert!(matches!(
        solve(&p),
        Err(SolveError::Model(ModelError::UnstableStep { .. }))
    ));
}

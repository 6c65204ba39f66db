//! Box-constrained finite-horizon width tracking.
//!
//! Eliminating the states through the scalar dynamics turns the tracking
//! problem into a convex QP in the controls alone:
//!
//! ```text
//! minimize   sum_k (w[k+1] - wref[k])^2
//! subject to w[k+1] = A_k w[k] + B_k xi[k],   xi[k] in [lo, hi]
//! ```
//!
//! The solver runs projected gradient with Barzilai-Borwein steps to locate
//! the active set, then polishes with a primal active-set loop whose
//! equality-constrained subproblems are solved exactly in O(N) by a scalar
//! backward value recursion. Optimality is certified by the projected
//! gradient residual. Everything is deterministic.

use crate::corner::WidthReference;
use crate::dynamics::{ControlSequence, Direction, ExtrusionModel};
use crate::error::{ModelError, SolveError};
use crate::profile::WidthProfile;

/// Tracking problem over one discretized horizon.
#[derive(Debug, Clone)]
pub struct TrackingProblem {
    pub reference: WidthReference,
    pub model: ExtrusionModel,
    /// Control bounds (xi_min, xi_max); the model's identified ratio range
    /// is the natural default but callers may widen it.
    pub bounds: (f64, f64),
    /// Initial width: w_prev when continuing from a previous segment, 0 for
    /// the first one.
    pub w0: f64,
    pub step: f64,
    /// Per-segment actual lengths where they deviate from `step` (remainder
    /// segments); `None` means uniform.
    pub lengths: Option<Vec<f64>>,
}

impl TrackingProblem {
    pub fn segment_length(&self, k: usize) -> f64 {
        self.lengths.as_ref().map_or(self.step, |l| l[k])
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.reference.is_empty() {
            return Err(SolveError::EmptyHorizon);
        }
        let (lo, hi) = self.bounds;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SolveError::BadBounds { min: lo, max: hi });
        }
        if !(self.w0 >= 0.0) || !self.w0.is_finite() {
            return Err(SolveError::BadInitialWidth(self.w0));
        }
        if let Some(lengths) = &self.lengths {
            if lengths.len() != self.reference.len() {
                return Err(SolveError::EmptyHorizon);
            }
        }
        Ok(())
    }
}

/// Optimal controls with the model-predicted width trajectory.
#[derive(Debug, Clone)]
pub struct Solution {
    pub controls: ControlSequence,
    /// Model-predicted widths under the solved controls, starting at w0.
    pub predicted: WidthProfile,
    /// Sum of squared tracking errors (mm^2).
    pub objective: f64,
    /// Projected-gradient KKT residual at the reported solution.
    pub kkt_residual: f64,
    /// Regime applied at each step (fixes the re-simulation schedule).
    pub regimes: Vec<Direction>,
}

/// A maximal monotone run of the reference. `direction` is `None` for flat
/// runs, whose regime is decided by the drive sign once the incoming width
/// is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRun {
    pub start: usize,
    pub end: usize,
    pub direction: Option<Direction>,
}

/// Splits the reference into maximal nondecreasing/nonincreasing runs.
/// The per-step desired direction is the sign of `wref[k] - wref[k-1]`
/// (the first step compares against `w0`); a sign conflict closes the run.
pub fn partition_monotone_runs(reference: &[f64], w0: f64) -> Vec<RegimeRun> {
    let mut runs = Vec::new();
    if reference.is_empty() {
        return runs;
    }
    let mut start = 0usize;
    let mut dir: Option<Direction> = None;
    let mut prev = w0;
    for (k, &r) in reference.iter().enumerate() {
        let step_dir = if r > prev {
            Some(Direction::Expand)
        } else if r < prev {
            Some(Direction::Shrink)
        } else {
            None
        };
        if let Some(d) = step_dir {
            match dir {
                None => dir = Some(d),
                Some(current) if current != d => {
                    runs.push(RegimeRun { start, end: k, direction: Some(current) });
                    start = k;
                    dir = Some(d);
                }
                _ => {}
            }
        }
        prev = r;
    }
    runs.push(RegimeRun { start, end: reference.len(), direction: dir });
    runs
}

/// Regime for the whole horizon, from reference monotonicity and the
/// initial drive; non-monotone horizons use the averaged constant.
pub fn infer_direction(reference: &[f64], w0: f64) -> Direction {
    let mut up = false;
    let mut down = false;
    for run in partition_monotone_runs(reference, w0) {
        match run.direction {
            Some(Direction::Expand) => up = true,
            Some(Direction::Shrink) => down = true,
            _ => {}
        }
    }
    match (up, down) {
        (true, false) => Direction::Expand,
        (false, true) => Direction::Shrink,
        (false, false) => Direction::Expand, // steady: either constant gives the same answer
        (true, true) => Direction::Mixed,
    }
}

/// Per-step transition coefficients with the states eliminated.
struct Schedule {
    alpha: f64,
    /// ds/tau per step.
    rate: Vec<f64>,
}

impl Schedule {
    fn build(
        problem: &TrackingProblem,
        range: (usize, usize),
        direction: Direction,
    ) -> Result<Self, ModelError> {
        let tau = problem.model.tau(direction);
        let mut rate = Vec::with_capacity(range.1 - range.0);
        for k in range.0..range.1 {
            let ds = problem.segment_length(k);
            if ds >= tau {
                return Err(ModelError::UnstableStep {
                    delta_s: ds,
                    tau,
                    which: match direction {
                        Direction::Expand => "tau_expand",
                        Direction::Shrink => "tau_shrink",
                        Direction::Mixed => "averaged tau",
                    },
                });
            }
            rate.push(ds / tau);
        }
        Ok(Schedule { alpha: problem.model.alpha, rate })
    }

    fn len(&self) -> usize {
        self.rate.len()
    }

    #[inline]
    fn a(&self, k: usize) -> f64 {
        1.0 - self.rate[k]
    }

    #[inline]
    fn b(&self, k: usize) -> f64 {
        self.alpha * self.rate[k]
    }

    /// Forward states w_1..w_N in residual form (exact at fixed points).
    fn forward(&self, xi: &[f64], w0: f64) -> Vec<f64> {
        let mut states = Vec::with_capacity(xi.len());
        let mut w = w0;
        for (k, &u) in xi.iter().enumerate() {
            w += self.rate[k] * (self.alpha * u - w);
            states.push(w);
        }
        states
    }

    /// Objective gradient via the adjoint recursion.
    fn gradient(&self, states: &[f64], wref: &[f64], grad: &mut [f64]) {
        let n = self.len();
        let mut lambda = 0.0;
        for k in (0..n).rev() {
            let r = states[k] - wref[k];
            lambda = r + if k + 1 < n { self.a(k + 1) * lambda } else { 0.0 };
            grad[k] = 2.0 * self.b(k) * lambda;
        }
    }
}

fn objective_of(states: &[f64], wref: &[f64]) -> f64 {
    states.iter().zip(wref).map(|(w, r)| (w - r) * (w - r)).sum()
}

/// Projected-gradient KKT residual: infinity norm of `x - P(x - g)`.
fn kkt_residual(xi: &[f64], grad: &[f64], lo: f64, hi: f64) -> f64 {
    xi.iter()
        .zip(grad)
        .map(|(&x, &g)| (x - (x - g).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

const KKT_TOL: f64 = 1e-8;
const BB_MAX_ITER: usize = 600;
const AS_MAX_ITER: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Activity {
    Free,
    AtLo,
    AtHi,
}

/// Exact minimizer under the given activity pattern, via a scalar backward
/// value recursion. A free step pins the post-step state to the minimizer
/// of the remaining cost (decoupling past from future); fixed steps
/// propagate the quadratic value function through the dynamics.
fn equality_solve(
    schedule: &Schedule,
    wref: &[f64],
    w0: f64,
    activity: &[Activity],
    lo: f64,
    hi: f64,
    xi_out: &mut [f64],
) {
    let n = schedule.len();
    // Value function after step k: p w^2 + q w (constant terms dropped).
    let mut p = 0.0f64;
    let mut q = 0.0f64;
    let mut z_star = vec![0.0f64; n];
    for k in (0..n).rev() {
        // Cost-to-go through state z: (z - wref[k])^2 + p z^2 + q z.
        let c2 = 1.0 + p;
        let c1 = q - 2.0 * wref[k];
        match activity[k] {
            Activity::Free => {
                z_star[k] = -c1 / (2.0 * c2);
                p = 0.0;
                q = 0.0;
            }
            Activity::AtLo | Activity::AtHi => {
                let beta = if activity[k] == Activity::AtLo { lo } else { hi };
                let a = schedule.a(k);
                let b = schedule.b(k) * beta;
                // Compose with z = a w + b.
                p = c2 * a * a;
                q = (2.0 * c2 * b + c1) * a;
            }
        }
    }
    let mut w = w0;
    for k in 0..n {
        let u = match activity[k] {
            Activity::Free => (z_star[k] - schedule.a(k) * w) / schedule.b(k),
            Activity::AtLo => lo,
            Activity::AtHi => hi,
        };
        xi_out[k] = u;
        w += schedule.rate[k] * (schedule.alpha * u - w);
    }
}

/// Solves the box-constrained QP for one schedule.
fn solve_box(
    schedule: &Schedule,
    wref: &[f64],
    w0: f64,
    lo: f64,
    hi: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64, f64), SolveError> {
    let n = schedule.len();
    let mut xi: Vec<f64> = wref.iter().map(|r| (r / schedule.alpha).clamp(lo, hi)).collect();
    let mut grad = vec![0.0f64; n];
    let mut states = schedule.forward(&xi, w0);
    schedule.gradient(&states, wref, &mut grad);

    // Phase 1: projected gradient with Barzilai-Borwein steps to locate the
    // active set.
    let mut prev_xi = xi.clone();
    let mut prev_grad = grad.clone();
    let mut step = 1.0 / (schedule.alpha * schedule.alpha).max(1e-12);
    for iter in 0..BB_MAX_ITER {
        if kkt_residual(&xi, &grad, lo, hi) <= KKT_TOL * 0.1 {
            break;
        }
        if iter > 0 {
            let mut sy = 0.0;
            let mut ss = 0.0;
            for k in 0..n {
                let s = xi[k] - prev_xi[k];
                let y = grad[k] - prev_grad[k];
                sy += s * y;
                ss += s * s;
            }
            if sy > 1e-300 {
                step = (ss / sy).clamp(1e-10, 1e10);
            }
        }
        prev_xi.copy_from_slice(&xi);
        prev_grad.copy_from_slice(&grad);
        for k in 0..n {
            xi[k] = (xi[k] - step * grad[k]).clamp(lo, hi);
        }
        states = schedule.forward(&xi, w0);
        schedule.gradient(&states, wref, &mut grad);
    }

    // Phase 2: primal active-set polish with exact equality solves.
    let mut activity: Vec<Activity> = xi
        .iter()
        .map(|&x| {
            if x <= lo {
                Activity::AtLo
            } else if x >= hi {
                Activity::AtHi
            } else {
                Activity::Free
            }
        })
        .collect();
    let mut candidate = vec![0.0f64; n];
    let mut converged = false;
    for _ in 0..AS_MAX_ITER {
        equality_solve(schedule, wref, w0, &activity, lo, hi, &mut candidate);

        // Largest feasible fraction of the step from xi toward the candidate.
        let mut t = 1.0f64;
        let mut blocking: Option<(usize, Activity)> = None;
        for k in 0..n {
            if activity[k] != Activity::Free {
                continue;
            }
            let delta = candidate[k] - xi[k];
            if delta < 0.0 && candidate[k] < lo {
                let tk = (lo - xi[k]) / delta;
                if tk < t {
                    t = tk;
                    blocking = Some((k, Activity::AtLo));
                }
            } else if delta > 0.0 && candidate[k] > hi {
                let tk = (hi - xi[k]) / delta;
                if tk < t {
                    t = tk;
                    blocking = Some((k, Activity::AtHi));
                }
            }
        }

        if let Some((k, side)) = blocking {
            for j in 0..n {
                if activity[j] == Activity::Free {
                    xi[j] = (xi[j] + t * (candidate[j] - xi[j])).clamp(lo, hi);
                }
            }
            xi[k] = if side == Activity::AtLo { lo } else { hi };
            activity[k] = side;
            continue;
        }

        // Full step is feasible: take it and test multiplier signs.
        xi.copy_from_slice(&candidate);
        for k in 0..n {
            match activity[k] {
                Activity::AtLo => xi[k] = lo,
                Activity::AtHi => xi[k] = hi,
                Activity::Free => {}
            }
        }
        states = schedule.forward(&xi, w0);
        schedule.gradient(&states, wref, &mut grad);
        let mut worst: Option<(usize, f64)> = None;
        for k in 0..n {
            let violation = match activity[k] {
                Activity::AtLo => (-grad[k]).max(0.0),
                Activity::AtHi => grad[k].max(0.0),
                Activity::Free => 0.0,
            };
            if violation > KKT_TOL * 0.1 && worst.map_or(true, |(_, v)| violation > v) {
                worst = Some((k, violation));
            }
        }
        match worst {
            Some((k, _)) => activity[k] = Activity::Free,
            None => {
                converged = true;
                break;
            }
        }
    }

    states = schedule.forward(&xi, w0);
    schedule.gradient(&states, wref, &mut grad);
    let kkt = kkt_residual(&xi, &grad, lo, hi);
    if !converged && kkt > KKT_TOL {
        return Err(SolveError::NotConverged { kkt, iterations: BB_MAX_ITER + AS_MAX_ITER });
    }
    let objective = objective_of(&states, wref);
    Ok((xi, states, objective, kkt))
}

fn build_solution(
    problem: &TrackingProblem,
    xi: Vec<f64>,
    states: Vec<f64>,
    objective: f64,
    kkt: f64,
    regimes: Vec<Direction>,
) -> Solution {
    let mut samples = Vec::with_capacity(states.len() + 1);
    let mut x = 0.0;
    samples.push((0.0, problem.w0));
    for (k, w) in states.iter().enumerate() {
        x += problem.segment_length(k);
        // Model prediction; clamp only for the profile container, which is
        // a physical width. Retraction can push the linear model negative.
        samples.push((x, w.max(0.0)));
    }
    Solution {
        controls: ControlSequence::new(xi, problem.step),
        predicted: WidthProfile::new(samples).expect("x strictly increasing"),
        objective,
        kkt_residual: kkt,
        regimes,
    }
}

/// Solves the whole horizon under a single regime inferred from the
/// reference's overall monotonicity (averaged constant for mixed cases).
pub fn solve(problem: &TrackingProblem) -> Result<Solution, SolveError> {
    problem.validate()?;
    let direction = infer_direction(&problem.reference.target, problem.w0);
    let schedule = Schedule::build(problem, (0, problem.reference.len()), direction)?;
    let (lo, hi) = problem.bounds;
    let (xi, states, objective, kkt) =
        solve_box(&schedule, &problem.reference.target, problem.w0, lo, hi)?;
    let regimes = vec![direction; problem.reference.len()];
    Ok(build_solution(problem, xi, states, objective, kkt, regimes))
}

/// Solves run by run: the reference splits into maximal monotone runs, each
/// run uses its own regime's constants, and consecutive runs chain through
/// the terminal predicted width of their predecessor.
pub fn solve_per_regime(problem: &TrackingProblem) -> Result<Solution, SolveError> {
    problem.validate()?;
    let (lo, hi) = problem.bounds;
    let runs = partition_monotone_runs(&problem.reference.target, problem.w0);

    let n = problem.reference.len();
    let mut xi = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    let mut objective = 0.0;
    let mut kkt: f64 = 0.0;
    let mut w = problem.w0;
    for run in runs {
        let wref = &problem.reference.target[run.start..run.end];
        let direction = run.direction.unwrap_or(if wref[0] >= w {
            Direction::Expand
        } else {
            Direction::Shrink
        });
        let schedule = Schedule::build(problem, (run.start, run.end), direction)?;
        let (run_xi, run_states, run_obj, run_kkt) = solve_box(&schedule, wref, w, lo, hi)?;
        w = *run_states.last().expect("runs are nonempty");
        xi.extend_from_slice(&run_xi);
        states.extend_from_slice(&run_states);
        regimes.extend(std::iter::repeat(direction).take(run.end - run.start));
        objective += run_obj;
        kkt = kkt.max(run_kkt);
    }
    Ok(build_solution(problem, xi, states, objective, kkt, regimes))
}

/// Re-simulates a solution through the dynamics with its recorded regime
/// schedule; returns the states w_1..w_N.
pub fn resimulate(problem: &TrackingProblem, solution: &Solution) -> Vec<f64> {
    let mut w = problem.w0;
    let mut states = Vec::with_capacity(solution.controls.len());
    for (k, (&u, &dir)) in solution.controls.xi.iter().zip(&solution.regimes).enumerate() {
        let rate = problem.segment_length(k) / problem.model.tau(dir);
        w += rate * (problem.model.alpha * u - w);
        states.push(w);
    }
    states
}

#[cfg(test)]
#[path = "control_tests.rs"]
mod tests;

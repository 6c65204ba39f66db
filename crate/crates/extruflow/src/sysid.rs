//! Parameter estimation from measured width profiles, and generation of the
//! two calibration patterns those profiles come from.
//!
//! The extrusion pattern is four parallel lines: two at constant ratios
//! (steady-state width coefficient), two with a mid-line ratio step
//! (transient time constants, fitted against the first-order response
//! `w(x) = W- + (W+ - W-)(1 - exp(-x/tau))`). The corner pattern is four
//! isolated right-angle features printed at a constant ratio; the
//! deceleration-induced over-extrusion approaching each apex is fitted by
//! the corner kinematics law.

use crate::corner::CornerModel;
use crate::dynamics::ExtrusionModel;
use crate::error::IdError;
use crate::gcode::{ExtrusionMode, GMove, MoveKind, ToolPath};
use crate::geometry::Vec3;
use crate::profile::WidthProfile;
use serde::{Deserialize, Serialize};

/// First-order step fit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFitResult {
    /// Spatial time constant (mm).
    pub tau: f64,
    pub w_minus: f64,
    pub w_plus: f64,
    pub residual_rmse: f64,
}

/// Corner kinematics fit result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerFitResult {
    pub v_hat: f64,
    pub a_hat: f64,
    pub residual_rmse: f64,
    /// Individual fits of the four corners.
    pub per_corner_params: Vec<(f64, f64)>,
}

impl CornerFitResult {
    pub fn model(&self) -> Result<CornerModel, crate::error::ModelError> {
        CornerModel::new(self.v_hat, self.a_hat)
    }
}

/// Gaussian MLE of a constant width: sample mean and population standard
/// deviation. Requires at least 10 samples.
pub fn estimate_constant_width(samples: &[f64]) -> Result<(f64, f64), IdError> {
    if samples.len() < 10 {
        return Err(IdError::InsufficientData { need: 10, got: samples.len() });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Width coefficient from the two constant-line estimates:
/// the average of the per-line width/ratio quotients.
pub fn estimate_alpha(w_low: f64, w_high: f64, xi_low: f64, xi_high: f64) -> f64 {
    0.5 * (w_high / xi_high + w_low / xi_low)
}

/// Deterministic golden-section minimizer over [lo, hi].
fn golden_min(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Fits the spatial time constant of `w(x) = W- + (W+ - W-)(1 - e^(-x/tau))`
/// to the samples at `x >= transition_x` (x re-origined at the transition).
///
/// The asymptotes are fixed, not re-fit; tau comes from bounded 1-D scalar
/// minimization over `(pitch, 10 * span]`. A tau pinned at either search
/// boundary is reported as a fit-quality error carrying the residual.
pub fn fit_time_constant(
    profile: &WidthProfile,
    w_minus: f64,
    w_plus: f64,
    transition_x: f64,
) -> Result<StepFitResult, IdError> {
    if (w_plus - w_minus).abs() < 1e-12 {
        return Err(IdError::FitQuality {
            reason: "degenerate step: w_minus equals w_plus".to_string(),
            residual_rmse: f64::NAN,
        });
    }
    let tail: Vec<(f64, f64)> = profile
        .samples()
        .iter()
        .filter(|&&(x, _)| x >= transition_x)
        .map(|&(x, w)| (x - transition_x, w))
        .collect();
    if tail.len() < 10 {
        return Err(IdError::InsufficientData { need: 10, got: tail.len() });
    }
    let pitch = profile.pitch().unwrap_or(1e-3).max(1e-9);
    let span = tail.last().unwrap().0;
    let sse = |tau: f64| -> f64 {
        tail.iter()
            .map(|&(x, w)| {
                let m = w_minus + (w_plus - w_minus) * (1.0 - (-x / tau).exp());
                (w - m) * (w - m)
            })
            .sum()
    };
    let lo = pitch;
    let hi = 10.0 * span;
    let tau = golden_min(lo, hi, sse);
    let residual_rmse = (sse(tau) / tail.len() as f64).sqrt();
    let pinned = tau <= lo * (1.0 + 1e-6) || tau >= hi * (1.0 - 1e-6);
    if pinned || !tau.is_finite() {
        return Err(IdError::FitQuality {
            reason: format!("tau {tau:.4} pinned at the search boundary ({lo:.4}, {hi:.4})"),
            residual_rmse,
        });
    }
    Ok(StepFitResult { tau, w_minus, w_plus, residual_rmse })
}

/// Locates a step transition: the first sample departing more than
/// 3 sigma from `w_minus` toward `w_plus`, with the two following samples
/// confirming the departure (sigma estimated from the leading quarter of
/// the profile). Errors when no departure exists.
pub fn detect_step_transition(
    profile: &WidthProfile,
    w_minus: f64,
    w_plus: f64,
) -> Result<f64, IdError> {
    let samples = profile.samples();
    if samples.len() < 12 {
        return Err(IdError::InsufficientData { need: 12, got: samples.len() });
    }
    let head = &samples[..samples.len() / 4];
    let sigma = {
        let n = head.len() as f64;
        let mean = head.iter().map(|s| s.1).sum::<f64>() / n;
        (head.iter().map(|s| (s.1 - mean) * (s.1 - mean)).sum::<f64>() / n).sqrt()
    };
    let threshold = (3.0 * sigma).max(1e-9 * (w_plus - w_minus).abs());
    let direction = (w_plus - w_minus).signum();
    for i in 0..samples.len() - 2 {
        let departed = |j: usize| (samples[j].1 - w_minus) * direction > threshold;
        if departed(i) && departed(i + 1) && departed(i + 2) {
            return Ok(samples[i].0);
        }
    }
    Err(IdError::NoTransition)
}

/// Options for the corner fit.
#[derive(Debug, Clone, Default)]
pub struct CornerFitOptions {
    /// Commanded cruise speed (mm/s). The deceleration law depends on
    /// (v, a) only through the transient distance v^2/(2a), so the data fix
    /// a one-parameter ridge; the hint selects the ridge point with this
    /// speed. Without it the best multistart candidate is returned as-is.
    pub v_hint: Option<f64>,
    /// Manual deceleration-zone onsets (x per profile), overriding the
    /// automatic 3-sigma departure rule.
    pub manual_onsets: Option<Vec<f64>>,
    /// Exact apex positions (x per profile). The law is singular at the
    /// apex, so backward distances must be measured from the true corner;
    /// defaults to each profile's final sample.
    pub apex_x: Option<Vec<f64>>,
}

/// Joint corner-parameter fit over four deceleration profiles.
///
/// Every profile must end at its corner apex (the final sample marks the
/// apex position) and contain some pre-deceleration plateau. Profiles are
/// rescaled so their plateau (median of the leading quarter) equals
/// `w_nominal`, segmented at the point where the width departs from the
/// plateau, and jointly fitted by damped Gauss-Newton with a deterministic
/// 5x5 multistart over v in [10, 200] mm/s, a in [50, 5000] mm/s^2.
pub fn fit_corner_params(
    profiles: &[WidthProfile],
    w_nominal: f64,
) -> Result<CornerFitResult, IdError> {
    fit_corner_params_with(profiles, w_nominal, &CornerFitOptions::default())
}

pub fn fit_corner_params_with(
    profiles: &[WidthProfile],
    w_nominal: f64,
    options: &CornerFitOptions,
) -> Result<CornerFitResult, IdError> {
    if profiles.len() != 4 {
        return Err(IdError::WrongProfileCount { need: 4, got: profiles.len() });
    }
    if !(w_nominal > 0.0) {
        return Err(IdError::BadGeometry(format!("w_nominal must be > 0, got {w_nominal}")));
    }

    // Backward distances from the apex paired with normalized widths.
    let mut zones: Vec<Vec<(f64, f64)>> = Vec::with_capacity(4);
    for (index, profile) in profiles.iter().enumerate() {
        let samples = profile.samples();
        if samples.len() < 12 {
            return Err(IdError::InsufficientData { need: 12, got: samples.len() });
        }
        let quarter = &samples[..samples.len() / 4];
        let mut plateau_vals: Vec<f64> = quarter.iter().map(|s| s.1).collect();
        plateau_vals.sort_by(|a, b| a.total_cmp(b));
        let plateau = plateau_vals[plateau_vals.len() / 2];
        if !(plateau > 0.0) {
            return Err(IdError::BadGeometry(format!(
                "profile {index} has a non-positive pre-deceleration plateau"
            )));
        }
        let scale = w_nominal / plateau;
        let sigma = {
            let n = quarter.len() as f64;
            let mean = quarter.iter().map(|s| s.1).sum::<f64>() / n;
            (quarter.iter().map(|s| (s.1 - mean) * (s.1 - mean)).sum::<f64>() / n).sqrt() * scale
        };
        let threshold = (3.0 * sigma).max(1e-6 * w_nominal);

        let onset_x = match options.manual_onsets.as_ref() {
            Some(onsets) => onsets[index],
            None => {
                // Last position before the width departs from the plateau for good.
                let mut onset = samples[0].0;
                for i in 0..samples.len() {
                    if samples[i].1 * scale - w_nominal <= threshold {
                        onset = samples[i].0;
                    }
                }
                onset
            }
        };

        let apex_x = options
            .apex_x
            .as_ref()
            .map(|v| v[index])
            .unwrap_or_else(|| samples.last().unwrap().0);
        let pitch = profile.pitch().unwrap_or(1e-3);
        let zone: Vec<(f64, f64)> = samples
            .iter()
            .filter(|&&(x, _)| x >= onset_x && apex_x - x >= 0.5 * pitch)
            .map(|&(x, w)| (apex_x - x, w * scale))
            .collect();
        if zone.len() < 4 {
            return Err(IdError::NotMonotonicTowardApex { index });
        }
        // Data-quality gate: the segmented zone must rise toward the apex.
        let q = zone.len() / 4;
        let median = |vals: &mut Vec<f64>| {
            vals.sort_by(|a, b| a.total_cmp(b));
            vals[vals.len() / 2]
        };
        // Zone is ordered by x ascending: onset first, apex last.
        let mut near_onset: Vec<f64> = zone.iter().take(q.max(1)).map(|s| s.1).collect();
        let mut near_apex: Vec<f64> = zone.iter().rev().take(q.max(1)).map(|s| s.1).collect();
        if median(&mut near_apex) <= median(&mut near_onset) {
            return Err(IdError::NotMonotonicTowardApex { index });
        }
        zones.push(zone);
    }

    let all: Vec<(f64, f64)> = zones.iter().flatten().copied().collect();
    let joint = fit_decel_law(&all, w_nominal, options.v_hint);
    let per_corner_params: Vec<(f64, f64)> =
        zones.iter().map(|z| fit_decel_law(z, w_nominal, options.v_hint).0).collect();
    let ((v_hat, a_hat), sse) = joint;
    Ok(CornerFitResult {
        v_hat,
        a_hat,
        residual_rmse: (sse / all.len() as f64).sqrt(),
        per_corner_params,
    })
}

/// Sum of squared residuals of the deceleration law
/// `w(u) = w_nominal * v / sqrt(2 a u)` over backward distances u.
fn decel_sse(zone: &[(f64, f64)], w_nominal: f64, v: f64, a: f64) -> f64 {
    zone.iter()
        .map(|&(u, w)| {
            let m = w_nominal * v / (2.0 * a * u).sqrt();
            (w - m) * (w - m)
        })
        .sum()
}

/// Damped Gauss-Newton over (v, a) from a 5x5 multistart grid. The law is
/// scale-invariant under (v, a) -> (c v, c^2 a), so the residual has an
/// exactly flat valley; with a speed hint the returned point is the valley
/// member at that speed, otherwise the best candidate by residual (ties by
/// lower v).
fn fit_decel_law(zone: &[(f64, f64)], w_nominal: f64, v_hint: Option<f64>) -> ((f64, f64), f64) {
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    for iv in 0..5 {
        for ia in 0..5 {
            let mut v = 10.0 + 190.0 * iv as f64 / 4.0;
            let mut a = 50.0 + 4950.0 * ia as f64 / 4.0;
            let mut lambda = 1e-3;
            let mut sse = decel_sse(zone, w_nominal, v, a);
            for _ in 0..120 {
                // Residuals r = w_n v / sqrt(2 a u) - w, dr/dv = r_model / v,
                // dr/da = -r_model / (2a).
                let mut jtj = [[0.0f64; 2]; 2];
                let mut jtr = [0.0f64; 2];
                for &(u, w) in zone {
                    let m = w_nominal * v / (2.0 * a * u).sqrt();
                    let r = m - w;
                    let jv = m / v;
                    let ja = -m / (2.0 * a);
                    jtj[0][0] += jv * jv;
                    jtj[0][1] += jv * ja;
                    jtj[1][1] += ja * ja;
                    jtr[0] += jv * r;
                    jtr[1] += ja * r;
                }
                jtj[1][0] = jtj[0][1];
                let d0 = jtj[0][0] * (1.0 + lambda);
                let d3 = jtj[1][1] * (1.0 + lambda);
                let det = d0 * d3 - jtj[0][1] * jtj[0][1];
                if det.abs() < 1e-300 {
                    break;
                }
                let dv = -(d3 * jtr[0] - jtj[0][1] * jtr[1]) / det;
                let da = -(-jtj[0][1] * jtr[0] + d0 * jtr[1]) / det;
                let v_new = (v + dv).max(1e-3);
                let a_new = (a + da).max(1e-3);
                let sse_new = decel_sse(zone, w_nominal, v_new, a_new);
                if sse_new < sse {
                    let gain = (sse - sse_new) / sse.max(1e-300);
                    v = v_new;
                    a = a_new;
                    sse = sse_new;
                    lambda = (lambda / 10.0).max(1e-12);
                    if gain < 1e-14 {
                        break;
                    }
                } else {
                    lambda *= 10.0;
                    if lambda > 1e12 {
                        break;
                    }
                }
            }
            candidates.push((v, a, sse));
        }
    }
    let best_sse = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let mut tied: Vec<&(f64, f64, f64)> = candidates
        .iter()
        .filter(|c| c.2 <= best_sse * (1.0 + 1e-9) + 1e-300)
        .collect();
    tied.sort_by(|a, b| a.0.total_cmp(&b.0));
    let &&(v_best, a_best, sse_best) = tied.first().expect("multistart yields candidates");

    match v_hint {
        Some(v) if v > 0.0 => {
            // Project along the flat valley: keep d_tr, set the speed.
            let d_tr = v_best * v_best / (2.0 * a_best);
            let a = v * v / (2.0 * d_tr);
            ((v, a), decel_sse(zone, w_nominal, v, a))
        }
        _ => ((v_best, a_best), sse_best),
    }
}

/// Mean and standard deviation of a parameter across repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

/// One repetition of the extrusion calibration measurement: the four line
/// profiles plus optional designed transition locations (used instead of
/// automatic detection when available, as the pattern fixes them).
#[derive(Debug, Clone)]
pub struct ExtrusionMeasurement {
    pub const_low: WidthProfile,
    pub step_up: WidthProfile,
    pub const_high: WidthProfile,
    pub step_down: WidthProfile,
    pub transition_up: Option<f64>,
    pub transition_down: Option<f64>,
}

/// Aggregated extrusion identification across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionId {
    pub alpha: MeanStd,
    pub tau_expand: MeanStd,
    pub tau_shrink: MeanStd,
    pub xi_low: f64,
    pub xi_high: f64,
}

impl ExtrusionId {
    pub fn model(&self) -> Result<ExtrusionModel, crate::error::ModelError> {
        ExtrusionModel::new(
            self.alpha.mean,
            self.tau_expand.mean,
            self.tau_shrink.mean,
            self.xi_low,
            self.xi_high,
        )
    }
}

/// Full extrusion identification for one repetition:
/// constant-line MLE widths, the width coefficient, and both time constants.
pub fn identify_extrusion_once(
    m: &ExtrusionMeasurement,
    xi_low: f64,
    xi_high: f64,
) -> Result<(f64, f64, f64), IdError> {
    let widths_low: Vec<f64> = m.const_low.widths().collect();
    let widths_high: Vec<f64> = m.const_high.widths().collect();
    let (w_low, _) = estimate_constant_width(&widths_low)?;
    let (w_high, _) = estimate_constant_width(&widths_high)?;
    let alpha = estimate_alpha(w_low, w_high, xi_low, xi_high);
    let w_minus = alpha * xi_low;
    let w_plus = alpha * xi_high;

    let t_up = match m.transition_up {
        Some(x) => x,
        None => detect_step_transition(&m.step_up, w_minus, w_plus)?,
    };
    let tau_expand = fit_time_constant(&m.step_up, w_minus, w_plus, t_up)?.tau;

    let t_down = match m.transition_down {
        Some(x) => x,
        None => detect_step_transition(&m.step_down, w_plus, w_minus)?,
    };
    let tau_shrink = fit_time_constant(&m.step_down, w_plus, w_minus, t_down)?.tau;

    Ok((alpha, tau_expand, tau_shrink))
}

/// Identifies the extrusion model, averaging parameters across repetitions
/// (mean and standard deviation reported per parameter).
pub fn identify_extrusion(
    reps: &[ExtrusionMeasurement],
    xi_low: f64,
    xi_high: f64,
) -> Result<ExtrusionId, IdError> {
    if reps.is_empty() {
        return Err(IdError::InsufficientData { need: 1, got: 0 });
    }
    let mut alphas = Vec::new();
    let mut taus_e = Vec::new();
    let mut taus_s = Vec::new();
    for rep in reps {
        let (a, te, ts) = identify_extrusion_once(rep, xi_low, xi_high)?;
        alphas.push(a);
        taus_e.push(te);
        taus_s.push(ts);
    }
    Ok(ExtrusionId {
        alpha: mean_std(&alphas),
        tau_expand: mean_std(&taus_e),
        tau_shrink: mean_std(&taus_s),
        xi_low,
        xi_high,
    })
}

/// Geometry of the four-line extrusion calibration pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionPatternConfig {
    pub line_length: f64,
    pub line_spacing: f64,
    pub origin: (f64, f64),
    pub z: f64,
}

impl Default for ExtrusionPatternConfig {
    fn default() -> Self {
        ExtrusionPatternConfig { line_length: 40.0, line_spacing: 5.0, origin: (10.0, 10.0), z: 0.2 }
    }
}

impl ExtrusionPatternConfig {
    /// Transition location along a step line (the midpoint).
    pub fn transition_x(&self) -> f64 {
        0.5 * self.line_length
    }

    /// Measurement window along line `index` (0-based), relative to the
    /// line start; kept away from the line ends where corner transients live.
    pub fn measurement_region(&self, index: usize) -> (f64, f64) {
        match index {
            0 | 2 => (0.2 * self.line_length, 0.8 * self.line_length),
            _ => (0.1 * self.line_length, 0.9 * self.line_length),
        }
    }
}

fn validate_pattern(length: f64, speed: f64) -> Result<(), IdError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(IdError::BadGeometry(format!("line length must be > 0, got {length}")));
    }
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(IdError::BadGeometry(format!("speed must be > 0, got {speed}")));
    }
    Ok(())
}

fn print_move(to: Vec3, extrude: f64, feedrate: Option<f64>) -> GMove {
    GMove { target: to, extrude, feedrate, kind: MoveKind::Print, in_place: false }
}

fn travel_move(to: Vec3, feedrate: Option<f64>) -> GMove {
    GMove { target: to, extrude: 0.0, feedrate, kind: MoveKind::Travel, in_place: false }
}

/// Builds the four-line extrusion calibration pattern.
///
/// Lines 1 and 3 run at the constant low/high ratios; lines 2 and 4 step
/// low-to-high and high-to-low at the midpoint. Measurement regions are
/// recorded as comment markers.
pub fn generate_extrusion_pattern(
    xi_low: f64,
    xi_high: f64,
    speed: f64,
    config: &ExtrusionPatternConfig,
) -> Result<ToolPath, IdError> {
    validate_pattern(config.line_length, speed)?;
    if !(xi_low < xi_high) {
        return Err(IdError::BadGeometry(format!(
            "ratio range must satisfy xi_low < xi_high, got [{xi_low}, {xi_high}]"
        )));
    }
    let (ox, oy) = config.origin;
    let z = config.z;
    let len = config.line_length;
    let half = 0.5 * len;
    let mut moves = Vec::new();
    let mut markers: Vec<(usize, String)> = Vec::new();

    let programs: [(&str, Vec<(f64, f64)>); 4] = [
        ("constant xi_low", vec![(len, xi_low)]),
        ("step up", vec![(half, xi_low), (half, xi_high)]),
        ("constant xi_high", vec![(len, xi_high)]),
        ("step down", vec![(half, xi_high), (half, xi_low)]),
    ];
    for (i, (label, segments)) in programs.iter().enumerate() {
        let y = oy + i as f64 * config.line_spacing;
        let (m0, m1) = config.measurement_region(i);
        markers.push((
            moves.len(),
            format!("; line {} {}: measure x in [{:.3}, {:.3}] mm from line start", i + 1, label, m0, m1),
        ));
        if label.starts_with("step") {
            markers.push((
                moves.len(),
                format!("; line {} transition at {:.3} mm from line start", i + 1, half),
            ));
        }
        moves.push(travel_move(Vec3::new(ox, y, z), Some(6.0 * speed)));
        let mut x = ox;
        for &(seg_len, xi) in segments {
            x += seg_len;
            moves.push(print_move(Vec3::new(x, y, z), xi * seg_len, Some(speed)));
        }
    }

    let mut path = ToolPath::from_moves(moves, ExtrusionMode::Relative);
    for (anchor, text) in markers {
        path.add_passthrough(anchor, text);
    }
    Ok(path)
}

/// Geometry of the four-corner calibration pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerPatternConfig {
    /// Leg length of each L feature; must leave a constant-speed region,
    /// so at least 4x the expected transient distance.
    pub leg_length: f64,
    pub spacing: f64,
    pub origin: (f64, f64),
    pub z: f64,
}

impl Default for CornerPatternConfig {
    fn default() -> Self {
        CornerPatternConfig { leg_length: 25.0, spacing: 10.0, origin: (10.0, 10.0), z: 0.2 }
    }
}

/// Builds the four isolated L-shaped corner features, printed at the
/// constant ratio `zeta_c` (chosen so `alpha * zeta_c` equals the nominal
/// width).
pub fn generate_corner_pattern(
    zeta_c: f64,
    speed: f64,
    config: &CornerPatternConfig,
) -> Result<ToolPath, IdError> {
    validate_pattern(config.leg_length, speed)?;
    if !(zeta_c > 0.0) {
        return Err(IdError::BadGeometry(format!("zeta_c must be > 0, got {zeta_c}")));
    }
    let (ox, oy) = config.origin;
    let z = config.z;
    let leg = config.leg_length;
    let pitch = leg + config.spacing;
    let mut moves = Vec::new();
    let mut markers: Vec<(usize, String)> = Vec::new();
    for i in 0..4 {
        let cx = ox + (i % 2) as f64 * pitch;
        let cy = oy + (i / 2) as f64 * pitch;
        markers.push((
            moves.len(),
            format!("; corner {} apex at ({:.3}, {:.3})", i + 1, cx + leg, cy),
        ));
        moves.push(travel_move(Vec3::new(cx, cy, z), Some(6.0 * speed)));
        moves.push(print_move(Vec3::new(cx + leg, cy, z), zeta_c * leg, Some(speed)));
        moves.push(print_move(Vec3::new(cx + leg, cy + leg, z), zeta_c * leg, Some(speed)));
    }
    let mut path = ToolPath::from_moves(moves, ExtrusionMode::Relative);
    for (anchor, text) in markers {
        path.add_passthrough(anchor, text);
    }
    Ok(path)
}

/// Model parameter file: the identification output consumed by the
/// optimizer, human-readable JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub alpha: f64,
    pub tau_expand: f64,
    pub tau_shrink: f64,
    pub xi_low: f64,
    pub xi_high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_const: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decel: Option<f64>,
    pub provenance: String,
}

impl ModelFile {
    pub fn extrusion_model(&self) -> Result<ExtrusionModel, crate::error::ModelError> {
        ExtrusionModel::new(self.alpha, self.tau_expand, self.tau_shrink, self.xi_low, self.xi_high)
    }

    pub fn corner_model(&self) -> Option<Result<CornerModel, crate::error::ModelError>> {
        match (self.v_const, self.decel) {
            (Some(v), Some(a)) => Some(CornerModel::new(v, a)),
            _ => None,
        }
    }
}

#[cfg(test)]
#[path = "sysid_tests.rs"]
mod tests;

//! Extrusion process model: steady-state width law, first-order spatial
//! dynamics, discrete state transition, and the virtual-printer plant used
//! as the testing oracle in place of physical hardware.
//!
//! The width responds to the commanded extrusion ratio through a first-order
//! lag with *spatial* time constants (millimeters): `tau_expand` when the
//! width is rising, `tau_shrink` when it is falling. Discretized over steps
//! of length `ds` the transition is
//!
//! ```text
//! w[k+1] = A w[k] + B xi[k],   A = 1 - ds/tau,   B = alpha ds/tau
//! ```
//!
//! computed in residual form `w + (ds/tau) (alpha xi - w)` so a steady state
//! is an exact fixed point of the iteration.

use crate::corner::CornerModel;
use crate::error::ModelError;
use crate::path::DiscretizedPath;
use crate::profile::WidthProfile;
use serde::{Deserialize, Serialize};

/// Identified extrusion model parameters.
///
/// `alpha` maps a (dimensionless) velocity ratio to a bead width in mm; the
/// two time constants are spatial (mm). `xi_low..xi_high` is the ratio range
/// the model was identified over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionModel {
    pub alpha: f64,
    pub tau_expand: f64,
    pub tau_shrink: f64,
    pub xi_low: f64,
    pub xi_high: f64,
}

impl ExtrusionModel {
    pub fn new(
        alpha: f64,
        tau_expand: f64,
        tau_shrink: f64,
        xi_low: f64,
        xi_high: f64,
    ) -> Result<Self, ModelError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ModelError::InvalidExtrusionModel(format!("alpha must be > 0, got {alpha}")));
        }
        if !(tau_expand > 0.0) || !tau_expand.is_finite() {
            return Err(ModelError::InvalidExtrusionModel(format!(
                "tau_expand must be > 0, got {tau_expand}"
            )));
        }
        if !(tau_shrink > 0.0) || !tau_shrink.is_finite() {
            return Err(ModelError::InvalidExtrusionModel(format!(
                "tau_shrink must be > 0, got {tau_shrink}"
            )));
        }
        if !(xi_low < xi_high) {
            return Err(ModelError::InvalidExtrusionModel(format!(
                "ratio range must satisfy xi_low < xi_high, got [{xi_low}, {xi_high}]"
            )));
        }
        Ok(ExtrusionModel { alpha, tau_expand, tau_shrink, xi_low, xi_high })
    }

    /// Time constant for a transition direction.
    pub fn tau(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Expand => self.tau_expand,
            Direction::Shrink => self.tau_shrink,
            Direction::Mixed => 0.5 * (self.tau_expand + self.tau_shrink),
        }
    }
}

/// Width transition direction selecting the applicable time constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Expand,
    Shrink,
    /// Non-monotone reference; uses the average of the two constants.
    Mixed,
}

impl Direction {
    fn name(self) -> &'static str {
        match self {
            Direction::Expand => "tau_expand",
            Direction::Shrink => "tau_shrink",
            Direction::Mixed => "averaged tau",
        }
    }
}

/// Per-segment extrusion ratios over a ds-discretized path.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    pub xi: Vec<f64>,
    pub step: f64,
}

impl ControlSequence {
    pub fn new(xi: Vec<f64>, step: f64) -> Self {
        ControlSequence { xi, step }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

/// Steady-state width for a velocity ratio: `alpha * zeta`.
///
/// Returned even outside the identified validity range.
pub fn steady_width(model: &ExtrusionModel, zeta: f64) -> f64 {
    model.alpha * zeta
}

/// Discrete transition coefficients `(A, B)` for one spatial step.
///
/// Errors when `delta_s >= tau` (the explicit discretization would be
/// unstable), naming the offending time constant.
pub fn step_matrices(
    model: &ExtrusionModel,
    delta_s: f64,
    direction: Direction,
) -> Result<(f64, f64), ModelError> {
    let tau = model.tau(direction);
    if delta_s >= tau {
        return Err(ModelError::UnstableStep { delta_s, tau, which: direction.name() });
    }
    let a = 1.0 - delta_s / tau;
    let b = model.alpha * delta_s / tau;
    Ok((a, b))
}

/// One plant update in residual form, clamped at zero width.
#[inline]
fn plant_step(model: &ExtrusionModel, w: f64, xi: f64, ds: f64) -> f64 {
    let drive = model.alpha * xi - w;
    let tau = if drive > 0.0 {
        model.tau_expand
    } else if drive < 0.0 {
        model.tau_shrink
    } else {
        // Zero drive: either constant gives the identical (zero) increment.
        model.tau_expand
    };
    (w + ds / tau * drive).max(0.0)
}

/// Simulates the plant over a uniform-step control sequence.
///
/// The per-step time constant follows the instantaneous drive direction
/// `sign(alpha xi - w)`. Output samples sit at `x_k = k ds`, starting with
/// `(0, w0)`.
pub fn simulate_plant(
    model: &ExtrusionModel,
    controls: &ControlSequence,
    w0: f64,
) -> WidthProfile {
    let mut samples = Vec::with_capacity(controls.len() + 1);
    let mut w = w0.max(0.0);
    samples.push((0.0, w));
    for (k, &xi) in controls.xi.iter().enumerate() {
        w = plant_step(model, w, xi, controls.step);
        samples.push(((k + 1) as f64 * controls.step, w));
    }
    WidthProfile::new(samples).expect("plant output is monotone in x and nonnegative")
}

/// Ratio by which the plant floors the motion speed when amplifying the
/// commanded ratio near a corner, guarding the singularity of the
/// deceleration law.
pub const SPEED_FLOOR_RATIO: f64 = 0.02;

/// Motion speed at arc-length position `s` inside a line of length `len`,
/// for a trapezoidal profile that starts and ends at zero speed.
fn trapezoid_speed(corner: &CornerModel, s: f64, len: f64) -> f64 {
    let accel_limit = (2.0 * corner.decel * s.max(0.0)).sqrt();
    let decel_limit = (2.0 * corner.decel * (len - s).max(0.0)).sqrt();
    corner.v_const.min(accel_limit).min(decel_limit)
}

/// Simulates printing over a discretized geometry with corner kinematics.
///
/// The motion speed follows a trapezoidal profile on every line span
/// (uniform deceleration to zero into each span end, uniform acceleration
/// out of each span start); the quasi-static extruder turns each commanded
/// ratio into an effective ratio `xi * v_const / v(x)` (speed floored at
/// [`SPEED_FLOOR_RATIO`] of `v_const`), which is then filtered through the
/// extrusion dynamics.
pub fn simulate_corner_plant(
    ext: &ExtrusionModel,
    corner: &CornerModel,
    controls: &ControlSequence,
    geometry: &DiscretizedPath,
) -> WidthProfile {
    let amplification = corner_amplification(corner, geometry);
    simulate_path_plant(ext, controls, geometry, &amplification)
}

/// Plant simulation over a discretized geometry with an explicit
/// per-segment ratio amplification (1.0 everywhere simulates without
/// corner kinematics). Width restarts at zero after every travel gap.
pub fn simulate_path_plant(
    ext: &ExtrusionModel,
    controls: &ControlSequence,
    geometry: &DiscretizedPath,
    amplification: &[f64],
) -> WidthProfile {
    let seg_count = geometry.segment_count();
    assert_eq!(
        controls.len(),
        seg_count,
        "controls must align with geometry ({} controls, {} segments)",
        controls.len(),
        seg_count
    );
    assert_eq!(amplification.len(), seg_count);

    let mut samples = Vec::with_capacity(seg_count + 1);
    let mut w = 0.0;
    samples.push((0.0, w));
    for region in geometry.regions() {
        w = 0.0; // extrusion restarts from nothing after a travel gap
        for k in region.start_segment..region.end_segment {
            let ds = geometry.segment_length(k);
            let xi_eff = controls.xi[k] * amplification[k];
            w = plant_step(ext, w, xi_eff, ds);
            samples.push((geometry.cumulative_length(k + 1), w));
        }
    }
    WidthProfile::new(samples).expect("plant output is monotone in x and nonnegative")
}

/// Per-segment ratio amplification factor `v_const / v(x_mid)` induced by
/// corner deceleration/acceleration, with the speed floor applied.
pub fn corner_amplification(corner: &CornerModel, geometry: &DiscretizedPath) -> Vec<f64> {
    let mut amp = vec![1.0; geometry.segment_count()];
    let floor = SPEED_FLOOR_RATIO * corner.v_const;
    for span in geometry.line_spans() {
        let span_start_cum = geometry.cumulative_length(span.start_index);
        for k in span.start_index..span.end_index {
            let mid =
                0.5 * (geometry.cumulative_length(k) + geometry.cumulative_length(k + 1));
            let s = mid - span_start_cum;
            let v = trapezoid_speed(corner, s, span.length).max(floor);
            amp[k] = corner.v_const / v;
        }
    }
    amp
}

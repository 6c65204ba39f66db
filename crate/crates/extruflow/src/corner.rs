//! Corner kinematics and the five-stage compensated width reference.
//!
//! Approaching a corner the printhead decelerates faster than the extruder
//! responds, so the deposited width expands by `v / sqrt(v^2 - 2 a x)`;
//! leaving the corner it shrinks by `v / sqrt(2 a x)`. The compensated
//! reference pre-shapes the target width with the *inverse* of those
//! factors, plus zero-width trims of half a nominal width at each line end,
//! so that tracking it cancels the transient distortion.

use crate::dynamics::ExtrusionModel;
use crate::error::ModelError;
use crate::path::DiscretizedPath;
use serde::{Deserialize, Serialize};

/// Identified cornering parameters.
///
/// `v_const` is the effective constant motion speed (mm/s), `decel` the
/// deceleration magnitude (mm/s^2, also used as the acceleration), and
/// `d_tr = v_const^2 / (2 decel)` the derived transient distance (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerModel {
    pub v_const: f64,
    pub decel: f64,
    pub d_tr: f64,
}

impl CornerModel {
    pub fn new(v_const: f64, decel: f64) -> Result<Self, ModelError> {
        if !(v_const > 0.0) || !v_const.is_finite() {
            return Err(ModelError::InvalidCornerModel(format!(
                "v_const must be > 0, got {v_const}"
            )));
        }
        if !(decel > 0.0) || !decel.is_finite() {
            return Err(ModelError::InvalidCornerModel(format!("decel must be > 0, got {decel}")));
        }
        Ok(CornerModel { v_const, decel, d_tr: v_const * v_const / (2.0 * decel) })
    }
}

/// Predicted over-extruded width at distance `x` into the deceleration zone.
///
/// `w_dec(x) = w_nominal * v / sqrt(v^2 - 2 a x)` for `0 <= x < d_tr`;
/// the law is singular at `x = d_tr`.
pub fn decel_width(model: &CornerModel, w_nominal: f64, x: f64) -> Result<f64, ModelError> {
    if x < 0.0 || x >= model.d_tr {
        return Err(ModelError::DecelDomain { x, d_tr: model.d_tr });
    }
    let v = model.v_const;
    Ok(w_nominal * v / (v * v - 2.0 * model.decel * x).sqrt())
}

/// Predicted under-extruded width at distance `x` after the corner.
///
/// `w_acc(x) = w_nominal * v / sqrt(2 a x)` for `0 < x <= d_tr`; singular
/// at `x = 0`.
pub fn accel_width(model: &CornerModel, w_nominal: f64, x: f64) -> Result<f64, ModelError> {
    if x <= 0.0 || x > model.d_tr {
        return Err(ModelError::AccelDomain { x, d_tr: model.d_tr });
    }
    Ok(w_nominal * model.v_const / (2.0 * model.decel * x).sqrt())
}

/// Per-segment target widths aligned to a [`DiscretizedPath`], sampled at
/// segment midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthReference {
    pub target: Vec<f64>,
    pub nominal: f64,
}

impl WidthReference {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

/// Continuous five-stage reference value at distance `x` along a line of
/// length `len` bounded by two speed-zero points.
///
/// Stages (half-open exactly as the piecewise definition states them):
///
/// 1. `(0, w/2]`         zero-width initial trim (`x = 0` is also zero)
/// 2. `(w/2, d_tr]`      post-corner ramp-up `sqrt(2 a x) / v * w`
/// 3. `[d_tr, len-d_tr]` constant nominal width
/// 4. `(len-d_tr, len-w/2]` pre-corner ramp-down
/// 5. `(len-w/2, len]`   zero-width final trim
///
/// Short lines (`len <= 2 d_tr + w`) truncate the two ramps at their
/// intersection `x = len/2`, preserving continuity; if `len <= w` the whole
/// line is trimmed to zero.
pub fn reference_at(corner: &CornerModel, w_nominal: f64, len: f64, x: f64) -> f64 {
    let half_trim = 0.5 * w_nominal;
    if len <= w_nominal {
        return 0.0;
    }
    if x <= half_trim || x > len - half_trim {
        return 0.0;
    }
    let v = corner.v_const;
    let two_a = 2.0 * corner.decel;
    // Ramp-up from the line start and ramp-down into the line end; equal to
    // the piecewise stages and automatically truncated at their crossing
    // x = len/2 for short lines.
    let ramp_up = (two_a * x).sqrt() / v * w_nominal;
    let ramp_down = (two_a * (len - x)).sqrt() / v * w_nominal;
    ramp_up.min(ramp_down).min(w_nominal)
}

/// Builds the compensated width reference for every line span of `path`,
/// sampled at segment midpoints and concatenated.
pub fn build_reference(
    _ext: &ExtrusionModel,
    corner: &CornerModel,
    path: &DiscretizedPath,
    w_nominal: f64,
) -> WidthReference {
    let mut target = vec![0.0; path.segment_count()];
    for span in path.line_spans() {
        let span_start = path.cumulative_length(span.start_index);
        for k in span.start_index..span.end_index {
            let mid = 0.5 * (path.cumulative_length(k) + path.cumulative_length(k + 1));
            target[k] = reference_at(corner, w_nominal, span.length, mid - span_start);
        }
    }
    WidthReference { target, nominal: w_nominal }
}

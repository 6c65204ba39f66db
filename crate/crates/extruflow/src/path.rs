//! Spatial discretization of a toolpath into fixed-length segments with
//! corner and line-span metadata, the geometry consumed by reference
//! construction and control.

use crate::error::PathError;
use crate::gcode::{MoveKind, ToolPath};
use crate::geometry::{turn_angle_deg, Vec3};

/// Default interior turn angle (degrees) treated as a corner.
pub const DEFAULT_CORNER_ANGLE_DEG: f64 = 30.0;

/// XY displacement below this is considered a layer-change (Z-only) move.
const XY_EPS: f64 = 1e-9;

/// A straight line between two speed-zero points (corners or region ends),
/// covering segments `start_index..end_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSpan {
    pub start_index: usize,
    pub end_index: usize,
    pub length: f64,
}

/// A maximal run of connected print segments (broken by travel or Z-only
/// moves). Speed starts and ends at zero at its boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub start_segment: usize,
    pub end_segment: usize,
    pub start_point: usize,
    pub end_point: usize,
}

/// A toolpath resampled into segments of nominal length `step`.
///
/// Within each source line, all segments are exactly `step` long except the
/// final one, which carries the remainder. Points are grouped per region;
/// the cumulative arc length skips nothing (travel gaps contribute zero).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedPath {
    points: Vec<Vec3>,
    step: f64,
    corner_indices: Vec<usize>,
    line_spans: Vec<LineSpan>,
    regions: Vec<Region>,
    cum: Vec<f64>,
    segment_sources: Vec<usize>,
    warnings: Vec<String>,
}

impl DiscretizedPath {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Point indices of interior vertices whose turn angle met the corner
    /// threshold.
    pub fn corner_indices(&self) -> &[usize] {
        &self.corner_indices
    }

    pub fn line_spans(&self) -> &[LineSpan] {
        &self.line_spans
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn segment_count(&self) -> usize {
        self.cum.len() - 1
    }

    /// Printed arc length at segment boundary `i` (0..=segment_count).
    pub fn cumulative_length(&self, i: usize) -> f64 {
        self.cum[i]
    }

    pub fn total_length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        self.cum[k + 1] - self.cum[k]
    }

    /// Source-move index (into the originating toolpath) of segment `k`.
    pub fn segment_source(&self, k: usize) -> usize {
        self.segment_sources[k]
    }

    /// Endpoints of segment `k`.
    pub fn segment_endpoints(&self, k: usize) -> (Vec3, Vec3) {
        let region = self
            .regions
            .iter()
            .find(|r| (r.start_segment..r.end_segment).contains(&k))
            .expect("segment belongs to a region");
        let local = k - region.start_segment;
        (self.points[region.start_point + local], self.points[region.start_point + local + 1])
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// One source print line with its originating move index.
#[derive(Debug, Clone, Copy)]
struct SourceLine {
    move_index: usize,
    a: Vec3,
    b: Vec3,
    length: f64,
}

/// Groups consecutive print moves into connected regions. Travel moves,
/// in-place extrusions and Z-only (layer change) moves break regions.
fn print_regions(path: &ToolPath) -> Vec<Vec<SourceLine>> {
    let mut regions: Vec<Vec<SourceLine>> = Vec::new();
    let mut current: Vec<SourceLine> = Vec::new();
    let mut pos = path.start();
    for (i, mv) in path.moves().iter().enumerate() {
        let disp = mv.target - pos;
        let z_only = disp.x.abs() < XY_EPS && disp.y.abs() < XY_EPS;
        if mv.kind == MoveKind::Print && !z_only {
            current.push(SourceLine { move_index: i, a: pos, b: mv.target, length: disp.norm() });
        } else if !current.is_empty() {
            regions.push(std::mem::take(&mut current));
        }
        pos = mv.target;
    }
    if !current.is_empty() {
        regions.push(current);
    }
    regions
}

/// Indices of speed-zero vertices over the concatenated print-region
/// polylines: region endpoints always, plus interior vertices whose turn
/// angle is at least `angle_threshold` degrees.
pub fn detect_corners(path: &ToolPath, angle_threshold: f64) -> Result<Vec<usize>, PathError> {
    if !(angle_threshold > 0.0 && angle_threshold < 180.0) {
        return Err(PathError::BadAngleThreshold(angle_threshold));
    }
    let mut corners = Vec::new();
    let mut base = 0usize;
    for region in print_regions(path) {
        let vertex_count = region.len() + 1;
        corners.push(base);
        for v in 1..region.len() {
            let angle = turn_angle_deg(&region[v - 1].a, &region[v].a, &region[v].b);
            if let Some(angle) = angle {
                if angle >= angle_threshold {
                    corners.push(base + v);
                }
            }
        }
        corners.push(base + vertex_count - 1);
        base += vertex_count;
    }
    Ok(corners)
}

/// Discretizes with the default corner angle threshold.
pub fn discretize(path: &ToolPath, step: f64) -> Result<DiscretizedPath, PathError> {
    discretize_with_threshold(path, step, DEFAULT_CORNER_ANGLE_DEG)
}

/// Subdivides every source print line into ceil(L/step) segments, the final
/// segment of each line carrying the remainder, and records corner and
/// line-span metadata. Output arc length equals input arc length exactly.
///
/// A source line shorter than `step` becomes a single segment and adds a
/// warning to the result rather than failing.
pub fn discretize_with_threshold(
    path: &ToolPath,
    step: f64,
    angle_threshold: f64,
) -> Result<DiscretizedPath, PathError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(PathError::BadStep(step));
    }
    if !(angle_threshold > 0.0 && angle_threshold < 180.0) {
        return Err(PathError::BadAngleThreshold(angle_threshold));
    }
    let regions_src = print_regions(path);
    if regions_src.is_empty() {
        return Err(PathError::NoPrintMoves);
    }

    let mut points = Vec::new();
    let mut cum = vec![0.0];
    let mut corner_indices = Vec::new();
    let mut line_spans = Vec::new();
    let mut regions = Vec::new();
    let mut segment_sources = Vec::new();
    let mut warnings = Vec::new();

    for lines in &regions_src {
        let start_point = points.len();
        let start_segment = cum.len() - 1;
        points.push(lines[0].a);

        // Speed-zero vertices of this region: endpoints plus sharp turns.
        let mut is_break = vec![false; lines.len() + 1];
        is_break[0] = true;
        is_break[lines.len()] = true;
        for v in 1..lines.len() {
            if let Some(angle) = turn_angle_deg(&lines[v - 1].a, &lines[v].a, &lines[v].b) {
                if angle >= angle_threshold {
                    is_break[v] = true;
                }
            }
        }

        let mut span_start_segment = start_segment;
        let mut span_length = 0.0;
        for (li, line) in lines.iter().enumerate() {
            if li > 0 && is_break[li] {
                corner_indices.push(points.len() - 1);
                line_spans.push(LineSpan {
                    start_index: span_start_segment,
                    end_index: cum.len() - 1,
                    length: span_length,
                });
                span_start_segment = cum.len() - 1;
                span_length = 0.0;
            }

            let q = line.length / step;
            let n = if (q - q.round()).abs() < 1e-9 * q.max(1.0) {
                (q.round() as usize).max(1)
            } else {
                q.ceil() as usize
            };
            if line.length < step * (1.0 - 1e-9) {
                warnings.push(format!(
                    "source line of move {} is shorter than the step ({:.6} mm < {:.6} mm); kept as one segment",
                    line.move_index, line.length, step
                ));
            }
            let total = cum.last().copied().unwrap();
            for j in 1..=n {
                let (alen, t) = if j == n {
                    (line.length, 1.0)
                } else {
                    (j as f64 * step, j as f64 * step / line.length)
                };
                points.push(line.a.lerp(&line.b, t));
                cum.push(total + alen);
                segment_sources.push(line.move_index);
            }
            span_length += line.length;
        }
        line_spans.push(LineSpan {
            start_index: span_start_segment,
            end_index: cum.len() - 1,
            length: span_length,
        });

        regions.push(Region {
            start_segment,
            end_segment: cum.len() - 1,
            start_point,
            end_point: points.len() - 1,
        });
    }

    Ok(DiscretizedPath {
        points,
        step,
        corner_indices,
        line_spans,
        regions,
        cum,
        segment_sources,
        warnings,
    })
}

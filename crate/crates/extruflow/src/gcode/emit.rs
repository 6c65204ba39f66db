//! [`ToolPath`] and control-sequence to text emission.

use super::{ExtrusionMode, MoveKind, PathItem, ToolPath};
use crate::dynamics::ControlSequence;
use crate::error::GcodeError;
use crate::geometry::Vec3;
use std::fmt::Write as _;

pub const TOOL_NAME: &str = "extruflow";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Marker placed in every generated file; re-optimizing a file that carries
/// it triggers the double-compensation warning.
pub fn generator_marker() -> String {
    format!("; {} {}", TOOL_NAME, TOOL_VERSION)
}

/// Rounds to the emitted 5-decimal grid, normalizing negative zero.
pub fn round5(x: f64) -> f64 {
    let r = (x * 1e5).round() / 1e5;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt5(x: f64) -> String {
    format!("{:.5}", if x == 0.0 { 0.0 } else { x })
}

fn check_finite(x: f64, field: &'static str) -> Result<f64, GcodeError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(GcodeError::NonFiniteEmit { field })
    }
}

/// Emits one motion block over a discretized point sequence.
///
/// One motion line per segment with `E = xi_k * ds_k` (relative) or the
/// running sum of those increments (absolute). All numeric fields carry
/// fixed 5-decimal precision; a single F word rides on the first motion
/// line (the positioning travel to the block start). `header_notes` lines
/// are prepended as comments after the tool marker, recording the model
/// parameters in use.
pub fn emit_gcode(
    points: &[Vec3],
    controls: &ControlSequence,
    feedrate: f64,
    mode: ExtrusionMode,
    header_notes: &[String],
) -> Result<String, GcodeError> {
    if points.len() != controls.len() + 1 {
        return Err(GcodeError::LengthMismatch {
            controls: controls.len(),
            segments: points.len().saturating_sub(1),
        });
    }
    check_finite(feedrate, "F")?;

    let mut out = String::new();
    writeln!(out, "{}", generator_marker()).unwrap();
    for note in header_notes {
        writeln!(out, "; {}", note).unwrap();
    }
    out.push_str("G90\n");
    out.push_str(match mode {
        ExtrusionMode::Relative => "M83\n",
        ExtrusionMode::Absolute => "M82\n",
    });

    let p0 = points[0];
    writeln!(
        out,
        "G0 X{} Y{} Z{} F{}",
        fmt5(check_finite(p0.x, "X")?),
        fmt5(check_finite(p0.y, "Y")?),
        fmt5(check_finite(p0.z, "Z")?),
        fmt5(feedrate)
    )
    .unwrap();

    let mut cumulative = 0.0f64;
    for (k, pair) in points.windows(2).enumerate() {
        let ds = (pair[1] - pair[0]).norm();
        let increment = round5(check_finite(controls.xi[k] * ds, "E")?);
        let e = match mode {
            ExtrusionMode::Relative => increment,
            ExtrusionMode::Absolute => {
                cumulative += increment;
                cumulative
            }
        };
        writeln!(
            out,
            "G0 X{} Y{} Z{} E{}",
            fmt5(check_finite(pair[1].x, "X")?),
            fmt5(check_finite(pair[1].y, "Y")?),
            fmt5(check_finite(pair[1].z, "Z")?),
            fmt5(e)
        )
        .unwrap();
    }
    Ok(out)
}

/// Document-level emission of a parsed toolpath: moves are regenerated in
/// normalized form, passthrough lines are kept verbatim at their anchors.
pub struct ToolpathEmit {
    pub mode: ExtrusionMode,
    pub header_notes: Vec<String>,
}

impl Default for ToolpathEmit {
    fn default() -> Self {
        ToolpathEmit { mode: ExtrusionMode::Relative, header_notes: Vec::new() }
    }
}

/// Re-emits a whole toolpath document.
///
/// Travel moves keep their geometry, print moves their relative extrusion
/// (converted to cumulative E in absolute mode); F words appear exactly on
/// the moves that carry one.
pub fn emit_toolpath(path: &ToolPath, options: &ToolpathEmit) -> Result<String, GcodeError> {
    let mut out = String::new();
    writeln!(out, "{}", generator_marker()).unwrap();
    for note in &options.header_notes {
        writeln!(out, "; {}", note).unwrap();
    }
    out.push_str("G90\n");
    out.push_str(match options.mode {
        ExtrusionMode::Relative => "M83\n",
        ExtrusionMode::Absolute => "M82\n",
    });

    let mut cumulative = 0.0f64;
    for item in path.items() {
        match item {
            PathItem::Passthrough(line) => {
                out.push_str(line);
                out.push('\n');
            }
            PathItem::Move(_, mv) => {
                let word = match mv.kind {
                    MoveKind::Print => "G1",
                    MoveKind::Travel => "G0",
                };
                write!(
                    out,
                    "{} X{} Y{} Z{}",
                    word,
                    fmt5(check_finite(mv.target.x, "X")?),
                    fmt5(check_finite(mv.target.y, "Y")?),
                    fmt5(check_finite(mv.target.z, "Z")?)
                )
                .unwrap();
                if mv.extrude != 0.0 {
                    let increment = round5(check_finite(mv.extrude, "E")?);
                    let e = match options.mode {
                        ExtrusionMode::Relative => increment,
                        ExtrusionMode::Absolute => {
                            cumulative += increment;
                            cumulative
                        }
                    };
                    write!(out, " E{}", fmt5(e)).unwrap();
                }
                if let Some(f) = mv.feedrate {
                    write!(out, " F{}", fmt5(check_finite(f, "F")?)).unwrap();
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

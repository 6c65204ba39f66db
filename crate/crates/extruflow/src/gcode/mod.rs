//! G-code parsing and emission for a practical subset of the language.
//!
//! Parsing normalizes everything to one canonical form: positions become
//! absolute coordinates in a continuous frame (G92 redefinitions are folded
//! in), extrusion becomes relative increments per move (absolute E streams
//! are differenced against the running E, honoring G92 E resets), and any
//! line the subset does not cover is preserved verbatim as a passthrough
//! record anchored between moves, so optimized files stay printable on
//! stock firmware.
//!
//! Supported words: G0/G1, G90/G91, G92, M82/M83. Arc moves (G2/G3) and
//! inch units (G20) are rejected with dedicated errors; everything else
//! passes through.

mod emit;
mod parse;

pub use emit::{emit_gcode, emit_toolpath, round5, ToolpathEmit};
pub use parse::parse_gcode;

use crate::geometry::{Vec3, ORIGIN};
use serde::{Deserialize, Serialize};

/// Whether E values in a source file accumulate or restate per move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtrusionMode {
    Relative,
    Absolute,
}

/// Only millimeter files are supported; G20 is rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    Millimeters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    Travel,
    Print,
}

/// One linear move in the normalized toolpath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMove {
    /// Absolute target position (mm) in the continuous frame.
    pub target: Vec3,
    /// Relative filament increment for this move (mm); negative retracts.
    pub extrude: f64,
    /// F word value (mm/min) if one appeared on this line; inherits otherwise.
    pub feedrate: Option<f64>,
    pub kind: MoveKind,
    /// Zero-displacement move with nonzero extrusion (prime/retract in place).
    pub in_place: bool,
}

/// Parsed G-code: ordered moves plus passthrough lines anchored between them.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolPath {
    moves: Vec<GMove>,
    extrusion_mode: ExtrusionMode,
    units: Units,
    start: Vec3,
    /// `(i, line)`: the line appears immediately before `moves[i]`
    /// (`i == moves.len()` anchors it after the final move).
    passthrough: Vec<(usize, String)>,
    /// Tool marker consumed from a previously generated file's header.
    generated_by: Option<String>,
    /// Header comment block following the marker (comment text, `; ` stripped).
    header_notes: Vec<String>,
}

/// Document-order item of a toolpath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathItem<'a> {
    Move(usize, &'a GMove),
    Passthrough(&'a str),
}

impl ToolPath {
    /// Builds a toolpath from raw moves, recomputing move kinds, collapsing
    /// consecutive duplicate points (zero displacement, zero extrusion) and
    /// flagging in-place extrusions.
    pub fn from_moves(moves: Vec<GMove>, extrusion_mode: ExtrusionMode) -> Self {
        let mut path = ToolPath {
            moves: Vec::with_capacity(moves.len()),
            extrusion_mode,
            units: Units::Millimeters,
            start: ORIGIN,
            passthrough: Vec::new(),
            generated_by: None,
            header_notes: Vec::new(),
        };
        let mut pending_feedrate: Option<f64> = None;
        for mut mv in moves {
            debug_assert!(mv.target.is_finite(), "positions must be finite");
            debug_assert!(mv.feedrate.map_or(true, |f| f > 0.0));
            if mv.feedrate.is_none() {
                mv.feedrate = pending_feedrate.take();
            }
            path.push_move(mv.target, mv.extrude, mv.feedrate, &mut pending_feedrate);
        }
        path
    }

    /// Appends a move with kind normalization and duplicate collapsing.
    fn push_move(
        &mut self,
        target: Vec3,
        extrude: f64,
        feedrate: Option<f64>,
        pending_feedrate: &mut Option<f64>,
    ) {
        let prev = self.moves.last().map(|m| m.target).unwrap_or(self.start);
        let displacement = (target - prev).norm();
        if displacement == 0.0 && extrude == 0.0 {
            // Duplicate point: keep only its feedrate for the next move.
            if feedrate.is_some() {
                *pending_feedrate = feedrate;
            }
            return;
        }
        let in_place = displacement == 0.0 && extrude != 0.0;
        let kind = if extrude > 0.0 && displacement > 0.0 {
            MoveKind::Print
        } else {
            MoveKind::Travel
        };
        self.moves.push(GMove { target, extrude, feedrate, kind, in_place });
    }

    pub fn moves(&self) -> &[GMove] {
        &self.moves
    }

    pub fn extrusion_mode(&self) -> ExtrusionMode {
        self.extrusion_mode
    }

    pub fn units(&self) -> Units {
        self.units
    }

    /// Position before the first move.
    pub fn start(&self) -> Vec3 {
        self.start
    }

    pub fn set_start(&mut self, start: Vec3) {
        self.start = start;
    }

    pub fn passthrough(&self) -> &[(usize, String)] {
        &self.passthrough
    }

    pub(crate) fn add_passthrough(&mut self, anchor: usize, line: String) {
        self.passthrough.push((anchor, line));
    }

    /// Tool marker found in the file header, if the file was generated by
    /// this tool.
    pub fn generated_by(&self) -> Option<&str> {
        self.generated_by.as_deref()
    }

    pub(crate) fn set_generated_by(&mut self, marker: String) {
        self.generated_by = Some(marker);
    }

    /// Header comment block that followed the tool marker.
    pub fn header_notes(&self) -> &[String] {
        &self.header_notes
    }

    pub(crate) fn add_header_note(&mut self, note: String) {
        self.header_notes.push(note);
    }

    /// Items in document order (passthrough lines before their anchor move).
    pub fn items(&self) -> impl Iterator<Item = PathItem<'_>> {
        let mut out = Vec::with_capacity(self.moves.len() + self.passthrough.len());
        let mut pt = self.passthrough.iter().peekable();
        for (i, mv) in self.moves.iter().enumerate() {
            while pt.peek().map_or(false, |(a, _)| *a <= i) {
                out.push(PathItem::Passthrough(pt.next().unwrap().1.as_str()));
            }
            out.push(PathItem::Move(i, mv));
        }
        for (_, line) in pt {
            out.push(PathItem::Passthrough(line.as_str()));
        }
        out.into_iter()
    }

    /// Sum of relative extrusion increments over all moves.
    pub fn total_extrusion(&self) -> f64 {
        self.moves.iter().map(|m| m.extrude).sum()
    }

    /// Sum of displacement norms over all moves.
    pub fn total_path_length(&self) -> f64 {
        let mut pos = self.start;
        let mut total = 0.0;
        for mv in &self.moves {
            total += (mv.target - pos).norm();
            pos = mv.target;
        }
        total
    }
}

#[cfg(test)]
mod tests;

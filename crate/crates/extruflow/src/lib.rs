//! End-to-end extrusion optimization for high-speed FFF printing.
//!
//! The toolkit identifies a printer's extrusion and cornering dynamics from
//! two calibration prints measured via phone photographs, then rewrites
//! G-code with an optimal, constraint-respecting extrusion-ratio sequence
//! that keeps extrusion synchronized with printhead motion at speed. A
//! built-in virtual-printer simulator stands in for physical hardware as
//! the verification oracle.
//!
//! Subsystems:
//!
//! - [`gcode`]: parse a practical G-code subset, emit optimized files
//! - [`path`]: spatial discretization with corner/line-span metadata
//! - [`dynamics`]: extrusion model and the virtual-printer plant
//! - [`corner`]: corner kinematics and the compensated width reference
//! - [`control`]: box-constrained optimal width tracking
//! - [`sysid`]: parameter estimation and calibration pattern generation
//! - [`vision`]: photograph to metric width profile
//! - [`pipeline`]: the end-to-end commands behind the `extruflow` binary
//!
//! See the crate `examples/` directory for one runnable example per
//! capability.

pub mod config;
pub mod control;
pub mod corner;
pub mod dynamics;
pub mod error;
pub mod gcode;
pub mod geometry;
pub mod path;
pub mod pipeline;
pub mod plot;
pub mod profile;
pub mod sysid;
pub mod vision;

pub mod cli;

pub use error::{Error, Result};

//! End-to-end commands: generate calibration patterns, measure photos,
//! identify models, optimize G-code, simulate on the virtual printer, and
//! plot overlays. These are the functions behind the `extruflow` binary;
//! each has an in-memory core plus a file-level wrapper.

use crate::config::{BlurFlag, ProjectConfig};
use crate::control::{solve_per_regime, Solution, TrackingProblem};
use crate::corner::{build_reference, WidthReference};
use crate::dynamics::{corner_amplification, simulate_path_plant, ControlSequence};
use crate::error::{Error, Result};
use crate::gcode::{
    emit_toolpath, parse_gcode, ExtrusionMode, GMove, MoveKind, ToolPath, ToolpathEmit,
};
use crate::path::discretize_with_threshold;
use crate::profile::WidthProfile;
use crate::sysid::{
    fit_corner_params_with, generate_corner_pattern, generate_extrusion_pattern,
    identify_extrusion, CornerFitOptions, ExtrusionMeasurement, ModelFile,
};
use crate::vision::{
    self, detect_checkerboard, estimate_homography, measure_widths, rectify_into, GrayImage,
    Homography, SegmentationMethod,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Extrusion,
    Corner,
}

impl std::str::FromStr for PatternKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extrusion" => Ok(PatternKind::Extrusion),
            "corner" => Ok(PatternKind::Corner),
            other => Err(Error::Usage(format!(
                "unknown pattern kind '{other}' (expected 'extrusion' or 'corner')"
            ))),
        }
    }
}

/// Generates a calibration pattern as G-code text.
pub fn generate_pattern(kind: PatternKind, config: &ProjectConfig) -> Result<String> {
    let path = match kind {
        PatternKind::Extrusion => generate_extrusion_pattern(
            config.xi_low,
            config.xi_high,
            config.target_speed,
            &config.extrusion_pattern,
        )?,
        PatternKind::Corner => {
            // Constant ratio chosen so alpha * zeta_c = nominal width; before
            // identification the midpoint of the working range stands in.
            let zeta_c = 0.5 * (config.xi_low + config.xi_high);
            generate_corner_pattern(zeta_c, config.target_speed, &config.corner_pattern)?
        }
    };
    let notes = vec![
        format!(
            "calibration pattern: {}",
            match kind {
                PatternKind::Extrusion => "extrusion (four lines)",
                PatternKind::Corner => "corner (four L features)",
            }
        ),
        format!("target_speed={} mm/min", config.target_speed),
        format!("xi_low={} xi_high={}", config.xi_low, config.xi_high),
    ];
    Ok(emit_toolpath(&path, &ToolpathEmit { mode: ExtrusionMode::Relative, header_notes: notes })?)
}

pub fn cmd_pattern(kind: PatternKind, config: &ProjectConfig, out: &Path) -> Result<()> {
    let text = generate_pattern(kind, config)?;
    std::fs::write(out, text).map_err(|e| Error::io(out.display().to_string(), e))
}

/// One measured region of interest.
#[derive(Debug, Clone)]
pub struct RoiMeasurement {
    pub name: String,
    pub method: SegmentationMethod,
    pub profile: WidthProfile,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MeasureOutput {
    pub rois: Vec<RoiMeasurement>,
    pub pixel_scale: f64,
    pub reprojection_rms: f64,
    pub rectified_debug: GrayImage,
    pub warnings: Vec<String>,
}

/// Runs the photograph pipeline: checkerboard calibration, rectification,
/// per-region segmentation and width extraction.
pub fn measure_photo(
    image: &GrayImage,
    config: &ProjectConfig,
    external_corners: Option<Vec<[f64; 2]>>,
    blurry_override: Option<BlurFlag>,
) -> Result<MeasureOutput> {
    let spec = config.checkerboard;
    let corners = match external_corners {
        Some(c) => {
            if c.len() != spec.rows * spec.cols {
                return Err(Error::Usage(format!(
                    "external corner file has {} points, expected {}",
                    c.len(),
                    spec.rows * spec.cols
                )));
            }
            c
        }
        None => detect_checkerboard(image, spec.rows, spec.cols)?,
    };

    // Ideal rectified positions: corner (r, c) at (c, r) * square * px_per_mm.
    let ppm = config.px_per_mm;
    let pairs: Vec<([f64; 2], [f64; 2])> = corners
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let r = (i / spec.cols) as f64;
            let c = (i % spec.cols) as f64;
            (p, [c * spec.square_size_mm * ppm, r * spec.square_size_mm * ppm])
        })
        .collect();
    let h = estimate_homography(&pairs)?;
    let mut warnings = Vec::new();
    if h.quality_warning() {
        warnings.push(format!(
            "homography reprojection RMS {:.2} px exceeds 2 px",
            h.reprojection_rms
        ));
    }

    // Metric scale from the mean rectified pitch of neighboring corners.
    let mapped: Vec<[f64; 2]> = corners.iter().map(|&p| h.apply(p)).collect();
    let mut pitch_sum = 0.0;
    let mut pitch_count = 0usize;
    for r in 0..spec.rows {
        for c in 0..spec.cols.saturating_sub(1) {
            let a = mapped[r * spec.cols + c];
            let b = mapped[r * spec.cols + c + 1];
            pitch_sum += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            pitch_count += 1;
        }
    }
    let mean_pitch = pitch_sum / pitch_count.max(1) as f64;
    let pixel_scale = spec.square_size_mm / mean_pitch;
    let h = Homography { pixel_scale, ..h };

    // Debug overview: the rectified board area plus a margin.
    let margin_px = (10.0 * ppm) as usize;
    let bw = ((spec.cols - 1) as f64 * spec.square_size_mm * ppm) as usize + 2 * margin_px;
    let bh = ((spec.rows - 1) as f64 * spec.square_size_mm * ppm) as usize + 2 * margin_px;
    let rectified_debug = rectify_into(
        image,
        &h,
        [-(margin_px as f64), -(margin_px as f64)],
        bw.min(4096),
        bh.min(4096),
    )?;

    let mut rois = Vec::new();
    for roi in &config.rois {
        let origin = [roi.x0 * ppm, roi.y0 * ppm];
        let w = ((roi.x1 - roi.x0) * ppm).round() as usize;
        let hpx = ((roi.y1 - roi.y0) * ppm).round() as usize;
        let frame = rectify_into(image, &h, origin, w.max(2), hpx.max(2))?;
        let flag = blurry_override.unwrap_or(roi.blurry);
        let method = match flag {
            BlurFlag::On => SegmentationMethod::Gmm,
            BlurFlag::Off => SegmentationMethod::KMeans,
            BlurFlag::Auto => SegmentationMethod::Auto,
        };
        let (mask, chosen) = vision::segment_region(&frame, method, config.threshold_n)?;
        let measurement = measure_widths(&mask, pixel_scale, config.delta_s)?;
        let mut roi_warnings = Vec::new();
        if measurement.discarded_components > 0 {
            roi_warnings.push(format!(
                "{} disconnected mask components discarded",
                measurement.discarded_components
            ));
        }
        if !measurement.orientation_reliable {
            roi_warnings.push("bead aspect ratio below 3; orientation unreliable".to_string());
        }
        rois.push(RoiMeasurement {
            name: roi.name.clone(),
            method: chosen,
            profile: measurement.profile,
            warnings: roi_warnings,
        });
    }

    Ok(MeasureOutput {
        rois,
        pixel_scale,
        reprojection_rms: h.reprojection_rms,
        rectified_debug,
        warnings,
    })
}

/// Reads an external corner file: CSV of x_px,y_px with an optional header.
pub fn read_corner_file(path: &Path) -> Result<Vec<[f64; 2]>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("x_px") || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',');
        let x = cols.next().and_then(|c| c.trim().parse::<f64>().ok());
        let y = cols.next().and_then(|c| c.trim().parse::<f64>().ok());
        match (x, y) {
            (Some(x), Some(y)) => out.push([x, y]),
            _ => return Err(Error::Usage(format!("malformed corner line '{line}'"))),
        }
    }
    Ok(out)
}

pub fn cmd_measure(
    image_path: &Path,
    config: &ProjectConfig,
    out_dir: &Path,
    corners_file: Option<&Path>,
    blurry_override: Option<BlurFlag>,
) -> Result<Vec<std::path::PathBuf>> {
    let image = vision::load_image(image_path)?;
    let corners = corners_file.map(read_corner_file).transpose()?;
    let output = measure_photo(&image, config, corners, blurry_override)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for roi in &output.rois {
        let path = out_dir.join(format!("{}.csv", roi.name));
        std::fs::write(&path, roi.profile.to_csv())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
    }
    let debug_path = out_dir.join("rectified.png");
    vision::save_png(&output.rectified_debug, &debug_path)?;
    written.push(debug_path);
    for w in &output.warnings {
        log::warn!("{w}");
    }
    Ok(written)
}

/// Extrusion calibration input: either the four per-line profiles or one
/// whole-pattern profile to be sliced by the configured pattern geometry.
#[derive(Debug, Clone)]
pub enum ExtrusionInput {
    PerLine(Box<[WidthProfile; 4]>),
    FullPath(WidthProfile),
}

/// Corner calibration input: four per-corner profiles ending at their apex,
/// or one whole-pattern profile sliced by the corner pattern geometry.
#[derive(Debug, Clone)]
pub enum CornerInput {
    PerCorner(Box<[WidthProfile; 4]>),
    FullPath(WidthProfile),
}

fn slice_extrusion_full(profile: &WidthProfile, config: &ProjectConfig) -> [WidthProfile; 4] {
    let len = config.extrusion_pattern.line_length;
    [0, 1, 2, 3].map(|i| profile.window(i as f64 * len, (i as f64 + 1.0) * len))
}

fn extrusion_measurement(
    profiles: &[WidthProfile; 4],
    config: &ProjectConfig,
) -> ExtrusionMeasurement {
    let pattern = &config.extrusion_pattern;
    let len = pattern.line_length;
    let transition = pattern.transition_x();
    // Constant lines keep only their measurement window; step lines keep
    // everything up to shortly before the final corner transient and carry
    // the designed transition location.
    let (c0, c1) = pattern.measurement_region(0);
    let (h0, h1) = pattern.measurement_region(2);
    let s_max = 0.95 * len;
    ExtrusionMeasurement {
        const_low: profiles[0].window(c0, c1),
        step_up: profiles[1].window(0.0, s_max),
        const_high: profiles[2].window(h0, h1),
        step_down: profiles[3].window(0.0, s_max),
        transition_up: Some(transition),
        transition_down: Some(transition),
    }
}

/// Identifies the extrusion (and optionally corner) model from calibration
/// measurements, averaging repetitions at the parameter level.
pub fn identify(
    config: &ProjectConfig,
    extrusion_sets: &[ExtrusionInput],
    corner_sets: &[CornerInput],
) -> Result<ModelFile> {
    if extrusion_sets.is_empty() {
        return Err(Error::Usage(
            "identify needs at least one extrusion calibration measurement".to_string(),
        ));
    }
    let reps: Vec<ExtrusionMeasurement> = extrusion_sets
        .iter()
        .map(|set| match set {
            ExtrusionInput::PerLine(profiles) => extrusion_measurement(profiles, config),
            ExtrusionInput::FullPath(profile) => {
                extrusion_measurement(&slice_extrusion_full(profile, config), config)
            }
        })
        .collect();
    let id = identify_extrusion(&reps, config.xi_low, config.xi_high)?;

    let mut v_const = None;
    let mut decel = None;
    let mut corner_note = String::new();
    if !corner_sets.is_empty() {
        let mut v_hats = Vec::new();
        let mut a_hats = Vec::new();
        for set in corner_sets {
            let (profiles, apexes) = match set {
                CornerInput::PerCorner(profiles) => {
                    let apexes =
                        profiles.iter().map(|p| p.samples().last().unwrap().0).collect::<Vec<_>>();
                    (profiles.as_ref().to_vec(), apexes)
                }
                CornerInput::FullPath(profile) => slice_corner_full(profile, config),
            };
            let options = CornerFitOptions {
                v_hint: Some(config.target_speed_mm_s()),
                manual_onsets: None,
                apex_x: Some(apexes),
            };
            let fit = fit_corner_params_with(&profiles, config.nominal_width, &options)?;
            v_hats.push(fit.v_hat);
            a_hats.push(fit.a_hat);
        }
        let n = v_hats.len() as f64;
        v_const = Some(v_hats.iter().sum::<f64>() / n);
        decel = Some(a_hats.iter().sum::<f64>() / n);
        corner_note = format!("; corner reps={}", v_hats.len());
    }

    let provenance = format!(
        "extruflow identify: reps={}; alpha={:.4}+/-{:.4}; tau_expand={:.4}+/-{:.4}; tau_shrink={:.4}+/-{:.4}{}",
        reps.len(),
        id.alpha.mean,
        id.alpha.std,
        id.tau_expand.mean,
        id.tau_expand.std,
        id.tau_shrink.mean,
        id.tau_shrink.std,
        corner_note,
    );
    Ok(ModelFile {
        alpha: id.alpha.mean,
        tau_expand: id.tau_expand.mean,
        tau_shrink: id.tau_shrink.mean,
        xi_low: config.xi_low,
        xi_high: config.xi_high,
        v_const,
        decel,
        provenance,
    })
}

/// Slices one whole-pattern corner profile into the four deceleration
/// windows (each ending exactly at its apex).
fn slice_corner_full(profile: &WidthProfile, config: &ProjectConfig) -> (Vec<WidthProfile>, Vec<f64>) {
    let leg = config.corner_pattern.leg_length;
    let mut profiles = Vec::with_capacity(4);
    let mut apexes = Vec::with_capacity(4);
    for i in 0..4 {
        let region_start = i as f64 * 2.0 * leg;
        let apex = region_start + leg;
        let window = profile.window(region_start + 0.4 * leg, apex);
        apexes.push(window.samples().last().map(|s| s.0).unwrap_or(0.0));
        profiles.push(window);
    }
    (profiles, apexes)
}

pub fn cmd_identify(
    config: &ProjectConfig,
    extrusion_csvs: &[Vec<std::path::PathBuf>],
    corner_csvs: &[Vec<std::path::PathBuf>],
    out: &Path,
) -> Result<ModelFile> {
    let read_profile = |p: &Path| -> Result<WidthProfile> {
        let text =
            std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?;
        Ok(WidthProfile::from_csv(&text)?)
    };
    let mut extrusion_sets = Vec::new();
    for set in extrusion_csvs {
        match set.len() {
            1 => extrusion_sets.push(ExtrusionInput::FullPath(read_profile(&set[0])?)),
            4 => {
                let p: Vec<WidthProfile> =
                    set.iter().map(|p| read_profile(p)).collect::<Result<_>>()?;
                extrusion_sets.push(ExtrusionInput::PerLine(Box::new(
                    p.try_into().expect("length checked"),
                )));
            }
            n => {
                return Err(Error::Usage(format!(
                    "--extrusion takes 1 (whole pattern) or 4 (per line) CSVs, got {n}"
                )))
            }
        }
    }
    let mut corner_sets = Vec::new();
    for set in corner_csvs {
        match set.len() {
            1 => corner_sets.push(CornerInput::FullPath(read_profile(&set[0])?)),
            4 => {
                let p: Vec<WidthProfile> =
                    set.iter().map(|p| read_profile(p)).collect::<Result<_>>()?;
                corner_sets.push(CornerInput::PerCorner(Box::new(
                    p.try_into().expect("length checked"),
                )));
            }
            n => {
                return Err(Error::Usage(format!(
                    "--corner takes 1 (whole pattern) or 4 (per corner) CSVs, got {n}"
                )))
            }
        }
    }
    let model = identify(config, &extrusion_sets, &corner_sets)?;
    let json = serde_json::to_string_pretty(&model).expect("model serializes");
    std::fs::write(out, json).map_err(|e| Error::io(out.display().to_string(), e))?;
    Ok(model)
}

/// Per-line tracking report entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineReport {
    pub span_index: usize,
    pub length_mm: f64,
    pub predicted_rmse_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub lines: Vec<LineReport>,
    pub total_e_in_mm: f64,
    pub total_e_out_mm: f64,
    pub delta_e_mm: f64,
    pub segment_count: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutput {
    pub gcode: String,
    pub report: OptimizeReport,
}

/// Rewrites a G-code file with the optimal extrusion-ratio sequence.
pub fn optimize(input: &str, model: &ModelFile, config: &ProjectConfig) -> Result<OptimizeOutput> {
    let tp = parse_gcode(input)?;
    let mut warnings = Vec::new();
    if let Some(marker) = tp.generated_by() {
        warnings.push(format!(
            "input was already generated by {marker}; re-optimizing would compensate twice"
        ));
    }
    let ext = model.extrusion_model()?;
    let corner = match model.corner_model() {
        Some(cm) => cm?,
        None => {
            return Err(Error::Data(
                "model file lacks corner parameters (v_const, decel): print the corner \
                 calibration pattern, measure it, and re-run identify with --corner"
                    .to_string(),
            ))
        }
    };

    let geometry =
        discretize_with_threshold(&tp, config.delta_s, config.corner_angle_threshold)?;
    warnings.extend(geometry.warnings().iter().cloned());
    let reference = build_reference(&ext, &corner, &geometry, config.nominal_width);
    let bounds = config.control_bounds.unwrap_or((ext.xi_low, ext.xi_high));

    // Solve per region, chaining the initial width only within a region.
    let seg_count = geometry.segment_count();
    let mut xi = vec![0.0f64; seg_count];
    let mut predicted = vec![0.0f64; seg_count];
    for region in geometry.regions() {
        let range = region.start_segment..region.end_segment;
        let lengths: Vec<f64> = range.clone().map(|k| geometry.segment_length(k)).collect();
        let problem = TrackingProblem {
            reference: WidthReference {
                target: reference.target[range.clone()].to_vec(),
                nominal: reference.nominal,
            },
            model: ext,
            bounds,
            w0: 0.0,
            step: config.delta_s,
            lengths: Some(lengths),
        };
        let solution: Solution = solve_per_regime(&problem)?;
        for (local, k) in range.enumerate() {
            xi[k] = solution.controls.xi[local];
            predicted[k] = solution.predicted.samples()[local + 1].1;
        }
    }

    // Per-line predicted tracking RMSE.
    let mut lines = Vec::new();
    for (i, span) in geometry.line_spans().iter().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for k in span.start_index..span.end_index {
            let d = predicted[k] - reference.target[k];
            sum += d * d;
            n += 1;
        }
        lines.push(LineReport {
            span_index: i,
            length_mm: span.length,
            predicted_rmse_mm: (sum / n.max(1) as f64).sqrt(),
        });
    }

    // Rebuild the document: passthrough and non-print moves carried
    // through, print moves replaced by their optimized segments.
    let mut segment_range_of_move: Vec<Option<(usize, usize)>> = vec![None; tp.moves().len()];
    for k in 0..seg_count {
        let src = geometry.segment_source(k);
        let entry = segment_range_of_move[src].get_or_insert((k, k + 1));
        entry.1 = k + 1;
    }

    let mut out_moves = Vec::new();
    let mut anchor_map = vec![0usize; tp.moves().len() + 1];
    for (i, mv) in tp.moves().iter().enumerate() {
        anchor_map[i] = out_moves.len();
        match segment_range_of_move[i] {
            None => out_moves.push(*mv),
            Some((a, b)) => {
                for k in a..b {
                    let (_, end) = geometry.segment_endpoints(k);
                    out_moves.push(GMove {
                        target: end,
                        extrude: xi[k] * geometry.segment_length(k),
                        feedrate: if k == a { mv.feedrate } else { None },
                        kind: MoveKind::Print,
                        in_place: false,
                    });
                }
            }
        }
    }
    anchor_map[tp.moves().len()] = out_moves.len();

    let mut out_path = ToolPath::from_moves(out_moves, ExtrusionMode::Relative);
    for (anchor, line) in tp.passthrough() {
        out_path.add_passthrough(anchor_map[*anchor], line.clone());
    }

    let notes = vec![
        format!(
            "model: alpha={:.5} tau_expand={:.5} tau_shrink={:.5} v_const={:.5} decel={:.5}",
            model.alpha,
            model.tau_expand,
            model.tau_shrink,
            corner.v_const,
            corner.decel
        ),
        format!(
            "optimized: delta_s={} nominal_width={} bounds=[{}, {}]",
            config.delta_s, config.nominal_width, bounds.0, bounds.1
        ),
    ];
    let gcode = emit_toolpath(
        &out_path,
        &ToolpathEmit { mode: ExtrusionMode::Relative, header_notes: notes },
    )?;

    // File-accurate totals: read back what was actually written.
    let total_e_in_mm = tp.total_extrusion();
    let total_e_out_mm = parse_gcode(&gcode)?.total_extrusion();
    let report = OptimizeReport {
        lines,
        total_e_in_mm,
        total_e_out_mm,
        delta_e_mm: total_e_out_mm - total_e_in_mm,
        segment_count: seg_count,
        warnings,
    };
    Ok(OptimizeOutput { gcode, report })
}

impl OptimizeReport {
    pub fn human_readable(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "optimized {} segments over {} lines", self.segment_count, self.lines.len());
        let _ = writeln!(
            out,
            "total E: {:.5} mm in, {:.5} mm out (delta {:+.5} mm)",
            self.total_e_in_mm, self.total_e_out_mm, self.delta_e_mm
        );
        for line in &self.lines {
            let _ = writeln!(
                out,
                "  line {:>3}  length {:>8.3} mm  predicted tracking rmse {:.6} mm",
                line.span_index, line.length_mm, line.predicted_rmse_mm
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

pub fn cmd_optimize(
    input_path: &Path,
    model_path: &Path,
    config: &ProjectConfig,
    out: &Path,
    report_out: Option<&Path>,
) -> Result<OptimizeReport> {
    let input = std::fs::read_to_string(input_path)
        .map_err(|e| Error::io(input_path.display().to_string(), e))?;
    let model = read_model(model_path)?;
    let output = optimize(&input, &model, config)?;
    std::fs::write(out, &output.gcode).map_err(|e| Error::io(out.display().to_string(), e))?;
    if let Some(report_path) = report_out {
        let json = serde_json::to_string_pretty(&output.report).expect("report serializes");
        std::fs::write(report_path, json)
            .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    }
    for w in &output.report.warnings {
        log::warn!("{w}");
    }
    Ok(output.report)
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let model: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("cannot parse model file {}: {e}", path.display())))?;
    Ok(model)
}

/// Simulation defect metrics, mirroring the corner-quality evaluation:
/// the worst deviation from the nominal width, and the width variance
/// pooled over windows around every corner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimMetrics {
    pub max_abs_error_mm: f64,
    pub corner_window_variance_mm2: Option<f64>,
    pub sample_count: usize,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub profile: WidthProfile,
    pub metrics: SimMetrics,
}

/// Simulates a G-code file on the virtual printer and evaluates defect
/// metrics against the nominal width.
///
/// Optional measurement noise (sigma mm, seed) turns the simulation into a
/// synthetic measurement for desk-scale identification loops. Samples
/// inside the zero-width trim core at line junctions (within half a
/// nominal width of a span end), where the compensated reference commands
/// no material by design, are excluded from the metrics.
pub fn simulate(
    input: &str,
    model: &ModelFile,
    config: &ProjectConfig,
    noise: Option<(f64, u64)>,
) -> Result<SimulateOutput> {
    let tp = parse_gcode(input)?;
    let ext = model.extrusion_model()?;
    let corner = model.corner_model().transpose()?;

    let geometry = match discretize_with_threshold(
        &tp,
        config.delta_s,
        config.corner_angle_threshold,
    ) {
        Ok(g) => g,
        Err(crate::error::PathError::NoPrintMoves) => {
            // Nothing deposits: the all-zero profile.
            let profile = WidthProfile::new(vec![(0.0, 0.0)])?;
            return Ok(SimulateOutput {
                profile,
                metrics: SimMetrics {
                    max_abs_error_mm: 0.0,
                    corner_window_variance_mm2: None,
                    sample_count: 0,
                },
            });
        }
        Err(e) => return Err(e.into()),
    };

    // Per-segment commanded ratio: the source move's extrusion spread
    // uniformly over its displacement.
    let mut move_length = vec![0.0f64; tp.moves().len()];
    {
        let mut pos = tp.start();
        for (i, mv) in tp.moves().iter().enumerate() {
            move_length[i] = (mv.target - pos).norm();
            pos = mv.target;
        }
    }
    let xi: Vec<f64> = (0..geometry.segment_count())
        .map(|k| {
            let src = geometry.segment_source(k);
            tp.moves()[src].extrude / move_length[src]
        })
        .collect();
    let controls = ControlSequence::new(xi, config.delta_s);

    let amplification = match &corner {
        Some(cm) => corner_amplification(cm, &geometry),
        None => vec![1.0; geometry.segment_count()],
    };
    let mut profile = simulate_path_plant(&ext, &controls, &geometry, &amplification);

    if let Some((sigma, seed)) = noise {
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = profile
                .samples()
                .iter()
                .map(|&(x, w)| {
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let g = (-2.0 * u1.ln()).sqrt() * u2.cos();
                    (x, (w + sigma * g).max(0.0))
                })
                .collect();
            profile = WidthProfile::new(samples)?;
        }
    }

    // Metrics: per-sample distance to the owning span's ends decides trim
    // exclusion and corner-window membership.
    let nominal = config.nominal_width;
    let half_trim = 0.5 * nominal;
    let window = corner.as_ref().map(|cm| 2.0 * cm.d_tr);
    let mut max_err = 0.0f64;
    let mut window_widths = Vec::new();
    let mut counted = 0usize;
    for (k, &(_, w)) in profile.samples().iter().skip(1).enumerate() {
        let span = geometry
            .line_spans()
            .iter()
            .find(|s| (s.start_index..s.end_index).contains(&k));
        let span = match span {
            Some(s) => s,
            None => continue,
        };
        let mid = 0.5 * (geometry.cumulative_length(k) + geometry.cumulative_length(k + 1));
        let d_start = mid - geometry.cumulative_length(span.start_index);
        let d_end = geometry.cumulative_length(span.end_index) - mid;
        let edge = d_start.min(d_end);
        if edge <= half_trim {
            continue;
        }
        counted += 1;
        max_err = max_err.max((w - nominal).abs());
        if let Some(win) = window {
            if edge <= win {
                window_widths.push(w);
            }
        }
    }
    let corner_window_variance = if window_widths.len() > 1 {
        let n = window_widths.len() as f64;
        let mean = window_widths.iter().sum::<f64>() / n;
        Some(window_widths.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n)
    } else {
        None
    };

    Ok(SimulateOutput {
        profile,
        metrics: SimMetrics {
            max_abs_error_mm: max_err,
            corner_window_variance_mm2: corner_window_variance,
            sample_count: counted,
        },
    })
}

pub fn cmd_simulate(
    input_path: &Path,
    model_path: &Path,
    config: &ProjectConfig,
    out_csv: &Path,
    noise: Option<(f64, u64)>,
    metrics_out: Option<&Path>,
) -> Result<SimMetrics> {
    let input = std::fs::read_to_string(input_path)
        .map_err(|e| Error::io(input_path.display().to_string(), e))?;
    let model = read_model(model_path)?;
    let output = simulate(&input, &model, config, noise)?;
    std::fs::write(out_csv, output.profile.to_csv())
        .map_err(|e| Error::io(out_csv.display().to_string(), e))?;
    if let Some(path) = metrics_out {
        let json = serde_json::to_string_pretty(&output.metrics).expect("metrics serialize");
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(output.metrics)
}

pub fn cmd_plot(csvs: &[std::path::PathBuf], out: &Path) -> Result<()> {
    let mut series = Vec::new();
    for path in csvs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let profile = WidthProfile::from_csv(&text)?;
        if profile.is_empty() {
            return Err(Error::Data(format!("{} contains no samples", path.display())));
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        series.push((name, profile));
    }
    crate::plot::plot_to_file(&series, out)?;
    Ok(())
}

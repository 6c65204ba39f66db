use super::*;
use crate::dynamics::ControlSequence;
use crate::error::GcodeError;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn move_eq(a: &GMove, b: &GMove) -> bool {
    (a.target - b.target).norm() < 1e-9
        && (a.extrude - b.extrude).abs() < 1e-9
        && a.kind == b.kind
        && a.in_place == b.in_place
        && match (a.feedrate, b.feedrate) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() < 1e-9,
            _ => false,
        }
}

#[test]
fn single_axis_aligned_move() {
    let tp = parse_gcode("M83\nG1 X10 Y0 E0.4\n").unwrap();
    assert_eq!(tp.moves().len(), 1);
    let mv = &tp.moves()[0];
    assert_relative_eq!((mv.target - tp.start()).norm(), 10.0, epsilon = 1e-12);
    assert_relative_eq!(mv.extrude, 0.4, epsilon = 1e-12);
    assert_eq!(mv.kind, MoveKind::Print);
    assert_eq!(tp.extrusion_mode(), ExtrusionMode::Relative);
}

#[test]
fn absolute_e_is_differenced() {
    let tp = parse_gcode("M82\nG1 X10 E1.0\nG1 X20 E1.5\n").unwrap();
    assert_eq!(tp.moves().len(), 2);
    assert_relative_eq!(tp.moves()[0].extrude, 1.0, epsilon = 1e-12);
    assert_relative_eq!(tp.moves()[1].extrude, 0.5, epsilon = 1e-12);
}

#[test]
fn g92_e_reset_is_honored() {
    let tp = parse_gcode("M82\nG1 X10 E1.0\nG92 E0\nG1 X20 E0.7\n").unwrap();
    assert_relative_eq!(tp.moves()[0].extrude, 1.0, epsilon = 1e-12);
    assert_relative_eq!(tp.moves()[1].extrude, 0.7, epsilon = 1e-12);
}

#[test]
fn g92_position_keeps_geometry_continuous() {
    let tp = parse_gcode("G1 X10 E0.5\nG92 X0\nG1 X10 E0.5\n").unwrap();
    assert_eq!(tp.moves().len(), 2);
    // The second logical X10 is another +10 mm physically.
    assert_relative_eq!(tp.moves()[1].target.x, 20.0, epsilon = 1e-12);
}

#[test]
fn relative_positioning_accumulates() {
    let tp = parse_gcode("G91\nG1 X5 E0.1\nG1 X5 Y5 E0.1\n").unwrap();
    assert_relative_eq!(tp.moves()[1].target.x, 10.0, epsilon = 1e-12);
    assert_relative_eq!(tp.moves()[1].target.y, 5.0, epsilon = 1e-12);
    assert_eq!(tp.extrusion_mode(), ExtrusionMode::Relative);
}

#[test]
fn comments_and_crlf_are_handled() {
    let tp = parse_gcode("G1 X10 (inline note) E0.4 ; trailing\r\nG1 X20 E0.4\r\n").unwrap();
    assert_eq!(tp.moves().len(), 2);
}

#[test]
fn in_place_extrusion_is_flagged() {
    let tp = parse_gcode("M83\nG1 X10 E0.4\nG1 E-2.0\nG1 X20 E0.4\n").unwrap();
    assert_eq!(tp.moves().len(), 3);
    let retract = &tp.moves()[1];
    assert!(retract.in_place);
    assert_eq!(retract.kind, MoveKind::Travel);
    assert_relative_eq!(retract.extrude, -2.0, epsilon = 1e-12);
}

#[test]
fn feedrate_only_line_carries_to_next_move() {
    let tp = parse_gcode("G1 F1800\nG1 X10 E0.4\n").unwrap();
    assert_eq!(tp.moves().len(), 1);
    assert_eq!(tp.moves()[0].feedrate, Some(1800.0));
}

#[test]
fn duplicate_points_are_collapsed() {
    let tp = parse_gcode("G1 X10 E0.4\nG1 X10\nG1 X20 E0.4\n").unwrap();
    assert_eq!(tp.moves().len(), 2);
}

#[test]
fn passthrough_lines_are_preserved_in_order() {
    let text = "M104 S200\nG1 X10 E0.4\nM106 S255\nG1 X20 E0.4\nM107\n";
    let tp = parse_gcode(text).unwrap();
    assert_eq!(tp.moves().len(), 2);
    let pt: Vec<&str> = tp.passthrough().iter().map(|(_, l)| l.as_str()).collect();
    assert_eq!(pt, vec!["M104 S200", "M106 S255", "M107"]);
    assert_eq!(tp.passthrough()[0].0, 0);
    assert_eq!(tp.passthrough()[1].0, 1);
    assert_eq!(tp.passthrough()[2].0, 2);
}

#[test]
fn malformed_token_reports_line() {
    let err = parse_gcode("G1 X10 E0.4\nG1 X1..5 E0.4\n").unwrap_err();
    match err {
        GcodeError::MalformedToken { line, word, .. } => {
            assert_eq!(line, 2);
            assert_eq!(word, 'X');
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn inches_are_rejected() {
    assert!(matches!(
        parse_gcode("G20\nG1 X1 E0.1\n").unwrap_err(),
        GcodeError::Unsupported { line: 1, .. }
    ));
}

#[test]
fn arcs_are_rejected() {
    assert!(matches!(
        parse_gcode("G1 X1 E0.1\nG2 X2 Y1 I0.5 J0 E0.2\n").unwrap_err(),
        GcodeError::ArcMove { line: 2, .. }
    ));
}

fn straight_points(n: usize, ds: f64) -> Vec<crate::geometry::Vec3> {
    (0..=n).map(|i| crate::geometry::Vec3::new(i as f64 * ds, 0.0, 0.2)).collect()
}

#[test]
fn emit_product_example() {
    let points = straight_points(1, 0.1);
    let controls = ControlSequence::new(vec![0.04], 0.1);
    let text = emit_gcode(&points, &controls, 3600.0, ExtrusionMode::Relative, &[]).unwrap();
    assert!(text.contains("E0.00400"), "{text}");
}

#[test]
fn emit_zero_controls_travel_only() {
    let points = straight_points(5, 0.1);
    let controls = ControlSequence::new(vec![0.0; 5], 0.1);
    let text = emit_gcode(&points, &controls, 3600.0, ExtrusionMode::Relative, &[]).unwrap();
    for line in text.lines().filter(|l| l.contains('E')) {
        assert!(line.ends_with("E0.00000"), "{line}");
    }
    let tp = parse_gcode(&text).unwrap();
    // Segment geometry after the positioning travel is unchanged.
    let mut pos = tp.moves()[0].target;
    let mut total = 0.0;
    for mv in &tp.moves()[1..] {
        total += (mv.target - pos).norm();
        pos = mv.target;
    }
    assert_relative_eq!(total, 0.5, epsilon = 1e-9);
}

#[test]
fn emit_absolute_cumulative_sum() {
    let points = straight_points(2, 0.1);
    let controls = ControlSequence::new(vec![0.03, 0.05], 0.1);
    let text = emit_gcode(&points, &controls, 900.0, ExtrusionMode::Absolute, &[]).unwrap();
    assert!(text.contains("E0.00300"), "{text}");
    assert!(text.contains("E0.00800"), "{text}");
    assert!(text.contains("M82"));
}

#[test]
fn emit_rejects_length_mismatch() {
    let points = straight_points(3, 0.1);
    let controls = ControlSequence::new(vec![0.04; 5], 0.1);
    assert!(matches!(
        emit_gcode(&points, &controls, 900.0, ExtrusionMode::Relative, &[]).unwrap_err(),
        GcodeError::LengthMismatch { controls: 5, segments: 3 }
    ));
}

#[test]
fn emit_rejects_non_finite() {
    let points = straight_points(1, 0.1);
    let controls = ControlSequence::new(vec![f64::NAN], 0.1);
    assert!(matches!(
        emit_gcode(&points, &controls, 900.0, ExtrusionMode::Relative, &[]).unwrap_err(),
        GcodeError::NonFiniteEmit { field: "E" }
    ));
}

#[test]
fn emitted_header_is_consumed_on_parse() {
    let points = straight_points(2, 0.1);
    let controls = ControlSequence::new(vec![0.04, 0.04], 0.1);
    let notes = vec!["alpha=16.98".to_string(), "tau_expand=37.81".to_string()];
    let text = emit_gcode(&points, &controls, 900.0, ExtrusionMode::Relative, &notes).unwrap();
    let tp = parse_gcode(&text).unwrap();
    assert!(tp.generated_by().unwrap().starts_with(super::emit::TOOL_NAME));
    assert_eq!(tp.header_notes(), &notes[..]);
    assert!(tp.passthrough().is_empty());
}

#[test]
fn emit_parse_emit_is_text_fixed_point() {
    let points = straight_points(40, 0.1);
    let xi: Vec<f64> = (0..40).map(|k| 0.03 + 0.0007 * k as f64).collect();
    let controls = ControlSequence::new(xi, 0.1);
    let notes = vec!["alpha=16.98".to_string()];
    let text1 = emit_gcode(&points, &controls, 3600.0, ExtrusionMode::Relative, &notes).unwrap();
    let text2 = reemit(&text1);
    assert_eq!(text1, text2);

    let abs1 = emit_gcode(&points, &controls, 3600.0, ExtrusionMode::Absolute, &notes).unwrap();
    let abs2 = reemit(&abs1);
    assert_eq!(abs1, abs2);
}

/// Reconstructs (points, controls, feedrate, mode, notes) from a parsed
/// emit_gcode file and re-emits it.
fn reemit(text: &str) -> String {
    let tp = parse_gcode(text).unwrap();
    let mut points = vec![tp.moves()[0].target];
    let mut xi = Vec::new();
    let mut prev = tp.moves()[0].target;
    for mv in &tp.moves()[1..] {
        let ds = (mv.target - prev).norm();
        points.push(mv.target);
        xi.push(mv.extrude / ds);
        prev = mv.target;
    }
    let feedrate = tp.moves()[0].feedrate.expect("first emitted line carries F");
    let controls = ControlSequence::new(xi, 0.1);
    emit_gcode(&points, &controls, feedrate, tp.extrusion_mode(), tp.header_notes()).unwrap()
}

/// Deterministic corpus generator: about 100 moves with travels, comments,
/// passthrough codes and E resets.
fn corpus_file(seed: u64) -> String {
    let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
    let mut rand = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut out = String::from("; corpus file\nG90\nM82\nM104 S200\n");
    let mut x = 0.0f64;
    let mut y = 0.0f64;
    let mut e = 0.0f64;
    for i in 0..100 {
        x = (x + 2.0 + 30.0 * rand()).min(200.0);
        y = (y + 2.0 * rand()).min(200.0);
        let x = (x * 1000.0).round() / 1000.0;
        let y = (y * 1000.0).round() / 1000.0;
        if i % 9 == 3 {
            out.push_str(&format!("G0 X{:.3} Y{:.3} F9000\n", x, y));
        } else {
            e += ((0.1 + rand()) * 1e5).round() / 1e5;
            if i % 4 == 0 {
                out.push_str(&format!("G1 X{:.3} Y{:.3} E{:.5} F3600 ; seg {}\n", x, y, e, i));
            } else {
                out.push_str(&format!("G1 X{:.3} Y{:.3} E{:.5}\n", x, y, e));
            }
        }
        if i % 20 == 19 {
            out.push_str("G92 E0\n");
            e = 0.0;
        }
        if i % 25 == 12 {
            out.push_str("M106 S128\n");
        }
    }
    out.push_str("M107\n");
    out
}

#[test]
fn corpus_round_trip_preserves_moves() {
    for seed in 0..5u64 {
        let text = corpus_file(seed);
        let tp1 = parse_gcode(&text).unwrap();
        assert!(tp1.moves().len() >= 90);
        let emitted =
            emit_toolpath(&tp1, &ToolpathEmit { mode: ExtrusionMode::Relative, header_notes: vec![] })
                .unwrap();
        let tp2 = parse_gcode(&emitted).unwrap();
        assert_eq!(tp1.moves().len(), tp2.moves().len());
        for (a, b) in tp1.moves().iter().zip(tp2.moves()) {
            assert!(move_eq(a, b), "move mismatch: {a:?} vs {b:?}");
        }
        // Passthrough lines survive verbatim and in order.
        let pt1: Vec<&str> = tp1.passthrough().iter().map(|(_, l)| l.as_str()).collect();
        let pt2: Vec<&str> = tp2.passthrough().iter().map(|(_, l)| l.as_str()).collect();
        assert_eq!(pt1, pt2);

        // Document-level fixed point from the second generation onward.
        let emitted2 = emit_toolpath(
            &tp2,
            &ToolpathEmit { mode: ExtrusionMode::Relative, header_notes: vec![] },
        )
        .unwrap();
        assert_eq!(emitted, emitted2);
    }
}

#[test]
fn extrusion_conservation_absolute_inputs() {
    let text = corpus_file(7)
        .lines()
        .filter(|l| !l.starts_with("G92"))
        .collect::<Vec<_>>()
        .join("\n");
    let tp = parse_gcode(&text).unwrap();
    // Recover the final absolute E of the accepted motion lines.
    let final_e: f64 = text
        .lines()
        .filter_map(|l| {
            l.split_whitespace().find_map(|w| w.strip_prefix('E').and_then(|v| v.parse::<f64>().ok()))
        })
        .last()
        .unwrap();
    assert_relative_eq!(tp.total_extrusion(), final_e, epsilon = 1e-9);
}

proptest! {
    /// Parser never alters geometry: the toolpath length equals the sum of
    /// displacement norms of the accepted motion lines.
    #[test]
    fn geometry_is_preserved(seed in 0u64..200) {
        let text = corpus_file(seed);
        let tp = parse_gcode(&text).unwrap();

        // Independent accumulation straight from the text.
        let mut x = 0.0f64;
        let mut y = 0.0f64;
        let mut expected = 0.0f64;
        for line in text.lines() {
            let line = line.split(';').next().unwrap().trim();
            if !(line.starts_with("G0 ") || line.starts_with("G1 ")) {
                continue;
            }
            let mut nx = x;
            let mut ny = y;
            for w in line.split_whitespace().skip(1) {
                if let Some(v) = w.strip_prefix('X') { nx = v.parse().unwrap(); }
                if let Some(v) = w.strip_prefix('Y') { ny = v.parse().unwrap(); }
            }
            expected += ((nx - x).powi(2) + (ny - y).powi(2)).sqrt();
            x = nx;
            y = ny;
        }
        prop_assert!((tp.total_path_length() - expected).abs() < 1e-9);
    }
}

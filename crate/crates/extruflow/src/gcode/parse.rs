//! Text to [`ToolPath`] parsing.

use super::{ExtrusionMode, ToolPath};
use crate::error::GcodeError;
use crate::geometry::{Vec3, ORIGIN};

#[derive(Debug, Clone, Copy)]
struct MotionWords {
    x: Option<f64>,
    y: Option<f64>,
    z: Option<f64>,
    e: Option<f64>,
    f: Option<f64>,
}

/// Strips `;` comments and `(...)` comments from a line.
fn strip_comments(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_paren = false;
    for c in line.chars() {
        match c {
            ';' if !in_paren => break,
            '(' => in_paren = true,
            ')' if in_paren => in_paren = false,
            _ if !in_paren => out.push(c),
            _ => {}
        }
    }
    out
}

/// Splits a statement into (letter, number-text) words.
fn words(statement: &str) -> Vec<(char, String)> {
    let mut out = Vec::new();
    let mut chars = statement.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let letter = c.to_ascii_uppercase();
        chars.next();
        let mut num = String::new();
        while let Some(&d) = chars.peek() {
            if d.is_ascii_digit() || d == '.' || d == '-' || d == '+' {
                num.push(d);
                chars.next();
            } else {
                break;
            }
        }
        out.push((letter, num));
    }
    out
}

fn parse_number(line_no: usize, word: char, text: &str) -> Result<f64, GcodeError> {
    let value: f64 = text.parse().map_err(|_| GcodeError::MalformedToken {
        line: line_no,
        word,
        token: text.to_string(),
    })?;
    if !value.is_finite() {
        return Err(GcodeError::NonFinite { line: line_no });
    }
    Ok(value)
}

/// Parses G-code text into a normalized [`ToolPath`].
///
/// Accepts LF or CRLF input. Extrusion is normalized to relative increments
/// per move; absolute-E input is differenced against the running E value,
/// honoring `G92 E` resets. Lines outside the supported subset are kept as
/// passthrough records.
pub fn parse_gcode(text: &str) -> Result<ToolPath, GcodeError> {
    let mut path = ToolPath::from_moves(Vec::new(), ExtrusionMode::Absolute);

    // Modal state. Logical coordinates are what the file's numbers mean;
    // the physical position is the continuous frame stored on moves.
    let mut logical = ORIGIN;
    let mut physical = ORIGIN;
    let mut logical_e = 0.0f64;
    let mut absolute_xyz = true;
    let mut absolute_e = true;
    let mut seen_e_mode = false;
    let mut pending_feedrate: Option<f64> = None;
    // Whether we are still inside a generated-file header comment block.
    let mut in_generated_header = false;
    let mut at_file_start = true;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw_line = raw_line.trim_end_matches('\r');
        let statement = strip_comments(raw_line);
        let stripped = statement.trim();
        if stripped.is_empty() {
            if !raw_line.trim().is_empty() {
                let comment = raw_line.trim();
                if at_file_start && comment.starts_with(&format!("; {}", super::emit::TOOL_NAME)) {
                    // File produced by this tool: consume the marker and the
                    // following header comment block so re-emission does not
                    // duplicate them.
                    path.set_generated_by(comment.trim_start_matches("; ").to_string());
                    in_generated_header = true;
                } else if in_generated_header {
                    path.add_header_note(
                        comment.strip_prefix("; ").unwrap_or(comment).to_string(),
                    );
                } else {
                    // Pure comment line: preserve verbatim.
                    path.add_passthrough(path.moves().len(), raw_line.to_string());
                }
                at_file_start = false;
            }
            continue;
        }
        at_file_start = false;
        in_generated_header = false;

        let ws = words(stripped);
        let (first_letter, first_num) = match ws.first() {
            Some(w) => (w.0, w.1.as_str()),
            None => continue,
        };

        match (first_letter, first_num) {
            ('G', "0") | ('G', "00") | ('G', "1") | ('G', "01") => {
                let mw = collect_motion_words(line_no, &ws[1..])?;
                if let Some(f) = mw.f {
                    if f <= 0.0 {
                        return Err(GcodeError::BadFeedrate { line: line_no, value: f });
                    }
                }
                let target = if absolute_xyz {
                    Vec3::new(
                        mw.x.unwrap_or(logical.x),
                        mw.y.unwrap_or(logical.y),
                        mw.z.unwrap_or(logical.z),
                    )
                } else {
                    logical + Vec3::new(mw.x.unwrap_or(0.0), mw.y.unwrap_or(0.0), mw.z.unwrap_or(0.0))
                };
                let delta = target - logical;
                logical = target;
                physical = physical + delta;

                let de = match mw.e {
                    None => 0.0,
                    Some(e) => {
                        if absolute_e {
                            let d = e - logical_e;
                            logical_e = e;
                            d
                        } else {
                            logical_e += e;
                            e
                        }
                    }
                };

                if mw.x.is_none() && mw.y.is_none() && mw.z.is_none() && mw.e.is_none() {
                    // Feedrate-only motion line: update the modal feedrate.
                    if mw.f.is_some() {
                        pending_feedrate = mw.f;
                    }
                    continue;
                }
                let feedrate = mw.f.or_else(|| pending_feedrate.take());
                path.push_move(physical, de, feedrate, &mut pending_feedrate);
            }
            ('G', "2") | ('G', "02") | ('G', "3") | ('G', "03") => {
                return Err(GcodeError::ArcMove {
                    line: line_no,
                    word: format!("G{}", first_num),
                });
            }
            ('G', "20") => {
                return Err(GcodeError::Unsupported {
                    line: line_no,
                    feature: "G20".to_string(),
                    detail: "inch units; only millimeters are supported".to_string(),
                });
            }
            ('G', "90") => {
                absolute_xyz = true;
                if !seen_e_mode {
                    absolute_e = true;
                }
            }
            ('G', "91") => {
                absolute_xyz = false;
                if !seen_e_mode {
                    absolute_e = false;
                }
            }
            ('G', "92") => {
                for (letter, num) in &ws[1..] {
                    let value = if num.is_empty() { 0.0 } else { parse_number(line_no, *letter, num)? };
                    match letter {
                        'X' => logical.x = value,
                        'Y' => logical.y = value,
                        'Z' => logical.z = value,
                        'E' => logical_e = value,
                        other => {
                            return Err(GcodeError::MalformedToken {
                                line: line_no,
                                word: *other,
                                token: num.clone(),
                            })
                        }
                    }
                }
                if ws.len() == 1 {
                    // Bare G92 resets all axes and E to zero.
                    logical = ORIGIN;
                    logical_e = 0.0;
                }
            }
            ('M', "82") => {
                absolute_e = true;
                seen_e_mode = true;
            }
            ('M', "83") => {
                absolute_e = false;
                seen_e_mode = true;
            }
            _ => {
                path.add_passthrough(path.moves().len(), raw_line.to_string());
            }
        }
    }

    path.set_mode(if absolute_e { ExtrusionMode::Absolute } else { ExtrusionMode::Relative });
    Ok(path)
}

fn collect_motion_words(line_no: usize, ws: &[(char, String)]) -> Result<MotionWords, GcodeError> {
    let mut mw = MotionWords { x: None, y: None, z: None, e: None, f: None };
    for (letter, num) in ws {
        let value = parse_number(line_no, *letter, num)?;
        match letter {
            'X' => mw.x = Some(value),
            'Y' => mw.y = Some(value),
            'Z' => mw.z = Some(value),
            'E' => mw.e = Some(value),
            'F' => mw.f = Some(value),
            other => {
                return Err(GcodeError::Unsupported {
                    line: line_no,
                    feature: format!("axis word {other}"),
                    detail: "only X/Y/Z/E/F are supported on motion lines".to_string(),
                })
            }
        }
    }
    Ok(mw)
}

impl ToolPath {
    fn set_mode(&mut self, mode: ExtrusionMode) {
        self.extrusion_mode = mode;
    }
}

//! Checkerboard inner-corner detection: saddle points of the smoothed
//! intensity surface, ordered into a row-major grid.

use super::homography::estimate_homography;
use super::image::GrayImage;
use crate::error::VisionError;

/// Saddle response: positive where the Hessian of the smoothed image has
/// negative determinant (an X-crossing), rotation invariant.
fn saddle_response(image: &GrayImage) -> GrayImage {
    let smoothed = image.gaussian_blur(2.0);
    let w = image.width();
    let h = image.height();
    let mut out = GrayImage::filled(w, h, 0.0);
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let dxx = smoothed.get(x + 1, y) - 2.0 * smoothed.get(x, y) + smoothed.get(x - 1, y);
            let dyy = smoothed.get(x, y + 1) - 2.0 * smoothed.get(x, y) + smoothed.get(x, y - 1);
            let dxy = 0.25
                * (smoothed.get(x + 1, y + 1) - smoothed.get(x - 1, y + 1)
                    - smoothed.get(x + 1, y - 1)
                    + smoothed.get(x - 1, y - 1));
            let neg_det = dxy * dxy - dxx * dyy;
            if neg_det > 0.0 {
                out.set(x, y, neg_det);
            }
        }
    }
    out
}

/// Strict local maxima of the response above `threshold`.
fn local_maxima(response: &GrayImage, threshold: f64) -> Vec<(usize, usize, f64)> {
    let w = response.width();
    let h = response.height();
    let mut out = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = response.get(x, y);
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'outer: for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = response.get((x as i32 + dx) as usize, (y as i32 + dy) as usize);
                    if n > v || (n == v && (dy < 0 || (dy == 0 && dx < 0))) {
                        is_max = false;
                        break 'outer;
                    }
                }
            }
            if is_max {
                out.push((x, y, v));
            }
        }
    }
    out
}

/// Single-axis parabolic subpixel refinement on the response surface.
fn refine_subpixel(response: &GrayImage, x: usize, y: usize) -> [f64; 2] {
    let axis = |m1: f64, c: f64, p1: f64| -> f64 {
        let denom = 2.0 * (2.0 * c - m1 - p1);
        if denom.abs() < 1e-12 {
            0.0
        } else {
            ((p1 - m1) / denom).clamp(-1.0, 1.0)
        }
    };
    let dx = axis(response.get(x - 1, y), response.get(x, y), response.get(x + 1, y));
    let dy = axis(response.get(x, y - 1), response.get(x, y), response.get(x, y + 1));
    [x as f64 + dx, y as f64 + dy]
}

/// Orders candidate corners into a rows x cols grid.
///
/// The four extreme candidates seed a 4-point homography to grid
/// coordinates; all points must snap onto distinct integer nodes. Among
/// the valid labelings (corner rotations, transposition) the one whose
/// grid axes align best with the image axes wins, making the ordering
/// deterministic.
fn order_grid(points: &[[f64; 2]], rows: usize, cols: usize) -> Result<Vec<[f64; 2]>, VisionError> {
    let n = points.len();
    if n != rows * cols {
        return Err(VisionError::GridOrdering(format!(
            "{n} candidates cannot fill a {rows}x{cols} grid"
        )));
    }
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let extreme = |f: &dyn Fn(&[f64; 2]) -> f64| -> [f64; 2] {
        *points
            .iter()
            .max_by(|a, b| f(a).total_cmp(&f(b)))
            .expect("nonempty candidate set")
    };
    let tl = extreme(&|p| -(p[0] - cx) - (p[1] - cy));
    let tr = extreme(&|p| (p[0] - cx) - (p[1] - cy));
    let bl = extreme(&|p| -(p[0] - cx) + (p[1] - cy));
    let br = extreme(&|p| (p[0] - cx) + (p[1] - cy));

    // Candidate assignments: 4 rotations x optional transposition.
    let quads = [
        [tl, tr, bl, br],
        [tr, br, tl, bl],
        [br, bl, tr, tl],
        [bl, tl, br, tr],
    ];
    let mut best: Option<(f64, Vec<[f64; 2]>)> = None;
    for quad in &quads {
        for &(r_count, c_count, transpose) in
            &[(rows, cols, false), (cols, rows, true)]
        {
            let grid_corners = [
                [0.0, 0.0],
                [(c_count - 1) as f64, 0.0],
                [0.0, (r_count - 1) as f64],
                [(c_count - 1) as f64, (r_count - 1) as f64],
            ];
            let pairs: Vec<_> =
                quad.iter().zip(&grid_corners).map(|(&p, &g)| (p, g)).collect();
            let h = match estimate_homography(&pairs) {
                Ok(h) => h,
                Err(_) => continue,
            };
            // Snap every candidate to a grid node.
            let mut grid: Vec<Option<[f64; 2]>> = vec![None; n];
            let mut ok = true;
            for &p in points {
                let g = h.apply(p);
                let gc = g[0].round();
                let gr = g[1].round();
                if (g[0] - gc).abs() > 0.3
                    || (g[1] - gr).abs() > 0.3
                    || gc < 0.0
                    || gr < 0.0
                    || gc >= c_count as f64
                    || gr >= r_count as f64
                {
                    ok = false;
                    break;
                }
                let (gr, gc) = (gr as usize, gc as usize);
                let idx = if transpose { gc * cols + gr } else { gr * cols + gc };
                if grid[idx].is_some() {
                    ok = false;
                    break;
                }
                grid[idx] = Some(p);
            }
            if !ok || grid.iter().any(Option::is_none) {
                continue;
            }
            let ordered: Vec<[f64; 2]> = grid.into_iter().map(|p| p.unwrap()).collect();
            // Prefer the labeling whose axes align with the image axes.
            let row_dir = [ordered[1][0] - ordered[0][0], ordered[1][1] - ordered[0][1]];
            let col_dir =
                [ordered[cols][0] - ordered[0][0], ordered[cols][1] - ordered[0][1]];
            let score = row_dir[0] + col_dir[1];
            if best.as_ref().map_or(true, |(s, _)| score > *s) {
                best = Some((score, ordered));
            }
        }
    }
    best.map(|(_, g)| g)
        .ok_or_else(|| VisionError::GridOrdering("no consistent grid labeling found".to_string()))
}

/// Detects the rows x cols inner corners of a checkerboard, subpixel
/// refined and ordered row-major.
///
/// Externally supplied corner files can bypass this entirely (the
/// measurement pipeline accepts them); the count-mismatch error suggests
/// that path.
pub fn detect_checkerboard(
    image: &GrayImage,
    rows: usize,
    cols: usize,
) -> Result<Vec<[f64; 2]>, VisionError> {
    let expected = rows * cols;
    if expected == 0 {
        return Err(VisionError::GridOrdering("empty grid requested".to_string()));
    }
    let response = saddle_response(image);
    let peak = response.data().iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(VisionError::CornerCount { found: 0, expected });
    }

    // Raise the threshold until the strongest maxima resolve into exactly
    // the expected count after non-maximum suppression.
    for &rel in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let mut maxima = local_maxima(&response, rel * peak);
        if maxima.len() < expected {
            continue;
        }
        maxima.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));

        // Suppression radius from the candidate spacing.
        let top = &maxima[..maxima.len().min(2 * expected)];
        let mut nn: Vec<f64> = top
            .iter()
            .map(|&(x, y, _)| {
                top.iter()
                    .filter(|&&(ox, oy, _)| (ox, oy) != (x, y))
                    .map(|&(ox, oy, _)| {
                        ((ox as f64 - x as f64).powi(2) + (oy as f64 - y as f64).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        nn.sort_by(|a, b| a.total_cmp(b));
        let radius = (0.5 * nn[nn.len() / 2]).max(3.0);

        let mut kept: Vec<(usize, usize, f64)> = Vec::new();
        for &(x, y, v) in &maxima {
            let clear = kept.iter().all(|&(kx, ky, _)| {
                let d2 = (kx as f64 - x as f64).powi(2) + (ky as f64 - y as f64).powi(2);
                d2 >= radius * radius
            });
            if clear {
                kept.push((x, y, v));
            }
        }
        if kept.len() < expected {
            continue;
        }
        kept.truncate(expected);
        let refined: Vec<[f64; 2]> =
            kept.iter().map(|&(x, y, _)| refine_subpixel(&response, x, y)).collect();
        match order_grid(&refined, rows, cols) {
            Ok(grid) => return Ok(grid),
            Err(_) => continue,
        }
    }
    let found = local_maxima(&response, 0.2 * peak).len();
    Err(VisionError::CornerCount { found, expected })
}

#[cfg(test)]
mod tests {
    use super::super::render::{render_scene, tilted_camera, Checkerboard, Scene};
    use super::*;

    fn board_scene() -> (Scene, Checkerboard) {
        let board = Checkerboard { rows: 5, cols: 7, square: 8.0, origin: (20.0, 20.0) };
        let scene = Scene {
            lines: vec![],
            board: Some(board),
            background: 0.12,
            board_light: 0.85,
            board_dark: 0.05,
            ..Scene::default()
        };
        (scene, board)
    }

    #[test]
    fn fronto_parallel_corners_within_half_pixel() {
        let (scene, board) = board_scene();
        let px_per_mm = 6.0;
        let cam = tilted_camera(0.0, px_per_mm, 400.0, (45.0, 40.0), (240.0, 200.0));
        let img = render_scene(&scene, &cam, 480, 400, None);
        let corners = detect_checkerboard(&img, board.rows, board.cols).unwrap();
        assert_eq!(corners.len(), 35);
        let mut worst = 0.0f64;
        for r in 0..board.rows {
            for c in 0..board.cols {
                let world = board.corner_mm(r, c);
                let v = nalgebra::Vector3::new(world.0, world.1, 1.0);
                let p = cam * v;
                let expect = [p.x / p.z, p.y / p.z];
                let got = corners[r * board.cols + c];
                let err =
                    ((got[0] - expect[0]).powi(2) + (got[1] - expect[1]).powi(2)).sqrt();
                worst = worst.max(err);
            }
        }
        assert!(worst < 0.5, "worst corner error {worst} px");
    }

    #[test]
    fn rotated_board_detected_with_same_bound() {
        let (scene, board) = board_scene();
        let px_per_mm = 6.0;
        let base = tilted_camera(15.0, px_per_mm, 400.0, (45.0, 40.0), (240.0, 200.0));
        // Add an in-plane rotation of 15 degrees.
        let t = 15.0f64.to_radians();
        let rot = nalgebra::Matrix3::new(
            t.cos(),
            -t.sin(),
            45.0,
            t.sin(),
            t.cos(),
            40.0,
            0.0,
            0.0,
            1.0,
        ) * nalgebra::Matrix3::new(1.0, 0.0, -45.0, 0.0, 1.0, -40.0, 0.0, 0.0, 1.0);
        let cam = base * rot;
        let img = render_scene(&scene, &cam, 480, 400, None);
        let corners = detect_checkerboard(&img, board.rows, board.cols).unwrap();
        let mut worst = 0.0f64;
        for r in 0..board.rows {
            for c in 0..board.cols {
                let world = board.corner_mm(r, c);
                let v = nalgebra::Vector3::new(world.0, world.1, 1.0);
                let p = cam * v;
                let expect = [p.x / p.z, p.y / p.z];
                let got = corners[r * board.cols + c];
                let err =
                    ((got[0] - expect[0]).powi(2) + (got[1] - expect[1]).powi(2)).sqrt();
                worst = worst.max(err);
            }
        }
        assert!(worst < 0.5, "worst corner error {worst} px");
    }

    #[test]
    fn blank_image_is_a_detection_error() {
        let img = GrayImage::filled(200, 150, 0.3);
        assert!(matches!(
            detect_checkerboard(&img, 5, 7),
            Err(VisionError::CornerCount { .. })
        ));
    }
}

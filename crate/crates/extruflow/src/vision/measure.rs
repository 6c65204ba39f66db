//! Metric bead-width extraction from a segmentation mask: the largest
//! connected component is sliced orthogonally to its PCA axis, and the
//! per-slice pixel extent converts to millimeters through the rectified
//! pixel scale.

use crate::error::VisionError;
use crate::profile::WidthProfile;

/// Binary segmentation aligned with a rectified image.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, VisionError> {
        if data.len() != width * height {
            return Err(VisionError::BadImage(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(SegmentationMask { width, height, data })
    }
}

/// Width profile plus measurement quality indicators.
#[derive(Debug, Clone)]
pub struct WidthMeasurement {
    pub profile: WidthProfile,
    /// Mask components discarded in favor of the largest one.
    pub discarded_components: usize,
    /// False when the bead aspect ratio is below 3 and the PCA orientation
    /// is unreliable.
    pub orientation_reliable: bool,
}

/// Largest 8-connected component of the mask; returns (pixels, discarded
/// component count).
fn largest_component(mask: &SegmentationMask) -> (Vec<(usize, usize)>, usize) {
    let mut visited = vec![false; mask.data.len()];
    let mut components: Vec<Vec<(usize, usize)>> = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            let idx = y * mask.width + x;
            if !mask.data[idx] || visited[idx] {
                continue;
            }
            let mut queue = vec![(x, y)];
            visited[idx] = true;
            let mut comp = Vec::new();
            while let Some((cx, cy)) = queue.pop() {
                comp.push((cx, cy));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= mask.width as i64 || ny >= mask.height as i64
                        {
                            continue;
                        }
                        let nidx = ny as usize * mask.width + nx as usize;
                        if mask.data[nidx] && !visited[nidx] {
                            visited[nidx] = true;
                            queue.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            components.push(comp);
        }
    }
    components.sort_by(|a, b| b.len().cmp(&a.len()));
    match components.len() {
        0 => (Vec::new(), 0),
        n => (components.swap_remove(0), n - 1),
    }
}

/// Measures bead widths every `sample_pitch` mm along the bead axis.
///
/// PCA over the component's pixel coordinates gives the axis; each slice
/// is a one-pixel-wide band orthogonal to it, whose inclusive pixel extent
/// is the width. x runs along the axis from the bead start.
pub fn measure_widths(
    mask: &SegmentationMask,
    pixel_scale: f64,
    sample_pitch: f64,
) -> Result<WidthMeasurement, VisionError> {
    let (pixels, discarded) = largest_component(mask);
    if pixels.is_empty() {
        return Err(VisionError::NoBead);
    }
    let n = pixels.len() as f64;
    let mx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in &pixels {
        let dx = x as f64 - mx;
        let dy = y as f64 - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    sxx /= n;
    sxy /= n;
    syy /= n;
    // Principal axis of the 2x2 covariance, closed form.
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
    let l1 = trace / 2.0 + disc;
    let l2 = (trace / 2.0 - disc).max(1e-12);
    let axis = if sxy.abs() > 1e-12 {
        let norm = ((l1 - syy).powi(2) + sxy * sxy).sqrt();
        [(l1 - syy) / norm, sxy / norm]
    } else if sxx >= syy {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let ortho = [-axis[1], axis[0]];
    let orientation_reliable = (l1 / l2).sqrt() >= 3.0;

    // Axial and orthogonal pixel coordinates.
    let coords: Vec<(f64, f64)> = pixels
        .iter()
        .map(|&(x, y)| {
            let dx = x as f64 - mx;
            let dy = y as f64 - my;
            (dx * axis[0] + dy * axis[1], dx * ortho[0] + dy * ortho[1])
        })
        .collect();
    let t_min = coords.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let t_max = coords.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let pitch_px = (sample_pitch / pixel_scale).max(1.0);
    let slices = (((t_max - t_min) / pitch_px).floor() as usize).max(1);

    let mut samples = Vec::new();
    for j in 0..slices {
        let t_slice = t_min + (j as f64 + 0.5) * pitch_px;
        let mut s_min = f64::INFINITY;
        let mut s_max = f64::NEG_INFINITY;
        for &(t, s) in &coords {
            if (t - t_slice).abs() <= 0.5 {
                s_min = s_min.min(s);
                s_max = s_max.max(s);
            }
        }
        if s_min.is_finite() {
            let extent_px = s_max - s_min + 1.0;
            samples.push(((t_slice - t_min) * pixel_scale, extent_px * pixel_scale));
        }
    }
    if samples.is_empty() {
        return Err(VisionError::NoBead);
    }
    let profile = WidthProfile::new(samples)
        .map_err(|e| VisionError::BadImage(format!("slice profile invalid: {e}")))?;
    Ok(WidthMeasurement { profile, discarded_components: discarded, orientation_reliable })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> SegmentationMask {
        let mut data = vec![false; w * h];
        for y in y0..y1 {
            for x in x0..x1 {
                data[y * w + x] = true;
            }
        }
        SegmentationMask::new(w, h, data).unwrap()
    }

    #[test]
    fn rectangle_width_is_exact() {
        // 60x10 px rectangle at 0.05 mm/px: width exactly 0.5 mm.
        let mask = rect_mask(100, 40, 20, 15, 80, 25);
        let m = measure_widths(&mask, 0.05, 0.25).unwrap();
        assert!(m.orientation_reliable);
        for (_, w) in m.profile.samples() {
            assert!((w - 0.5).abs() < 1e-9, "width {w}");
        }
    }

    #[test]
    fn empty_mask_is_no_bead() {
        let mask = SegmentationMask::new(10, 10, vec![false; 100]).unwrap();
        assert!(matches!(measure_widths(&mask, 0.05, 0.2), Err(VisionError::NoBead)));
    }

    #[test]
    fn largest_component_wins_and_discards_are_counted() {
        let mut mask = rect_mask(100, 40, 10, 15, 70, 20);
        // Two small blobs elsewhere.
        for (x, y) in [(85usize, 5usize), (86, 5), (90, 30)] {
            mask.data[y * 100 + x] = true;
        }
        let m = measure_widths(&mask, 0.05, 0.25).unwrap();
        assert_eq!(m.discarded_components, 2);
        for (_, w) in m.profile.samples() {
            assert!((w - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_bead_measures_its_true_width() {
        // 45-degree bead, 7 px thick: PCA must recover the diagonal axis.
        let w = 120;
        let h = 120;
        let mut data = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let t = (x as f64 + y as f64) / 2.0f64.sqrt();
                let s = (x as f64 - y as f64) / 2.0f64.sqrt();
                if (10.0..100.0).contains(&t) && s.abs() <= 3.5 {
                    data[y * w + x] = true;
                }
            }
        }
        let mask = SegmentationMask::new(w, h, data).unwrap();
        let m = measure_widths(&mask, 0.05, 0.5).unwrap();
        let samples = m.profile.samples();
        // The diagonal pixel lattice quantizes the per-slice extent by up
        // to ~1.5 px either way; the median over slices stays close.
        let mut widths: Vec<f64> =
            samples[1..samples.len() - 1].iter().map(|s| s.1).collect();
        widths.sort_by(|a, b| a.total_cmp(b));
        let median = widths[widths.len() / 2];
        assert!((median - 7.0 * 0.05).abs() <= 0.075, "median width {median}");
        for &w in &widths {
            assert!((w - 0.35).abs() <= 0.1, "slice width {w}");
        }
    }

    #[test]
    fn orientation_warning_for_stubby_blobs() {
        let mask = rect_mask(60, 60, 20, 20, 40, 39);
        let m = measure_widths(&mask, 0.05, 0.25).unwrap();
        assert!(!m.orientation_reliable);
    }
}

//! Homography estimation (normalized DLT with Gauss-Newton refinement on
//! the symmetric reprojection error) and perspective rectification.

use super::image::GrayImage;
use crate::error::VisionError;
use nalgebra::{DMatrix, Matrix3, Vector3};

/// Projective map from distorted pixel coordinates to rectified
/// coordinates, scale-normalized so the bottom-right entry is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    pub matrix: Matrix3<f64>,
    /// Metric scale of the rectified frame (mm per rectified pixel).
    pub pixel_scale: f64,
    /// RMS reprojection error over the estimation correspondences (px).
    pub reprojection_rms: f64,
}

impl Homography {
    pub fn identity() -> Self {
        Homography { matrix: Matrix3::identity(), pixel_scale: 1.0, reprojection_rms: 0.0 }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        apply_matrix(&self.matrix, p)
    }

    pub fn inverse_matrix(&self) -> Result<Matrix3<f64>, VisionError> {
        self.matrix.try_inverse().ok_or(VisionError::Singular)
    }

    /// Reprojection quality gate: more than 2 px RMS is suspicious.
    pub fn quality_warning(&self) -> bool {
        self.reprojection_rms > 2.0
    }

    pub fn with_pixel_scale(mut self, mm_per_px: f64) -> Self {
        self.pixel_scale = mm_per_px;
        self
    }
}

fn apply_matrix(m: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    [v.x / v.z, v.y / v.z]
}

/// Hartley normalization: translate the centroid to the origin and scale
/// the mean distance to sqrt(2).
fn normalization(points: &[[f64; 2]]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 1e-12 { (2.0f64).sqrt() / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn symmetric_residuals(m: &Matrix3<f64>, pairs: &[([f64; 2], [f64; 2])], out: &mut Vec<f64>) {
    out.clear();
    let inv = m.try_inverse().unwrap_or_else(Matrix3::zeros);
    for &(from, to) in pairs {
        let f = apply_matrix(m, from);
        out.push(f[0] - to[0]);
        out.push(f[1] - to[1]);
        let b = apply_matrix(&inv, to);
        out.push(b[0] - from[0]);
        out.push(b[1] - from[1]);
    }
}

/// Estimates the homography mapping `from` points onto `to` points.
///
/// Normalized DLT seeds a Gauss-Newton refinement of the symmetric
/// reprojection error (8 free parameters, bottom-right entry pinned at 1).
/// Configurations with fewer than 4 points or a rank-deficient design
/// (3 collinear among 4, or all points collinear) are rejected.
pub fn estimate_homography(pairs: &[([f64; 2], [f64; 2])]) -> Result<Homography, VisionError> {
    if pairs.len() < 4 {
        return Err(VisionError::NotEnoughPoints(pairs.len()));
    }
    let from: Vec<[f64; 2]> = pairs.iter().map(|p| p.0).collect();
    let to: Vec<[f64; 2]> = pairs.iter().map(|p| p.1).collect();
    let t_from = normalization(&from);
    let t_to = normalization(&to);

    let mut design = DMatrix::zeros(2 * pairs.len(), 9);
    for (i, &(f, t)) in pairs.iter().enumerate() {
        let fp = apply_matrix(&t_from, f);
        let tp = apply_matrix(&t_to, t);
        let (x, y) = (fp[0], fp[1]);
        let (u, v) = (tp[0], tp[1]);
        let r0 = 2 * i;
        let r1 = 2 * i + 1;
        design[(r0, 0)] = -x;
        design[(r0, 1)] = -y;
        design[(r0, 2)] = -1.0;
        design[(r0, 6)] = u * x;
        design[(r0, 7)] = u * y;
        design[(r0, 8)] = u;
        design[(r1, 3)] = -x;
        design[(r1, 4)] = -y;
        design[(r1, 5)] = -1.0;
        design[(r1, 6)] = v * x;
        design[(r1, 7)] = v * y;
        design[(r1, 8)] = v;
    }
    // Nullspace of the design via the eigendecomposition of A^T A; a
    // degenerate configuration (collinear points) leaves a nullspace of
    // dimension two or more.
    let ata = design.transpose() * &design;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].abs().total_cmp(&eig.eigenvalues[j].abs()));
    let largest = eig.eigenvalues[order[8]].abs();
    if eig.eigenvalues[order[1]].abs() <= 1e-12 * largest.max(1e-300) {
        return Err(VisionError::Degenerate);
    }
    let h = eig.eigenvectors.column(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_to_inv = t_to.try_inverse().ok_or(VisionError::Singular)?;
    let mut matrix = t_to_inv * hn * t_from;
    if matrix[(2, 2)].abs() < 1e-15 {
        return Err(VisionError::Singular);
    }
    matrix /= matrix[(2, 2)];

    // Gauss-Newton on the symmetric reprojection error over the 8 free
    // entries; numeric Jacobian is plenty at this size.
    let mut params: Vec<f64> = vec![
        matrix[(0, 0)],
        matrix[(0, 1)],
        matrix[(0, 2)],
        matrix[(1, 0)],
        matrix[(1, 1)],
        matrix[(1, 2)],
        matrix[(2, 0)],
        matrix[(2, 1)],
    ];
    let to_matrix = |p: &[f64]| {
        Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0)
    };
    let mut residuals = Vec::new();
    let mut perturbed = Vec::new();
    for _ in 0..20 {
        let m = to_matrix(&params);
        symmetric_residuals(&m, pairs, &mut residuals);
        let nr = residuals.len();
        let mut jac = DMatrix::zeros(nr, 8);
        for j in 0..8 {
            let eps = 1e-7 * (1.0 + params[j].abs());
            let mut p2 = params.clone();
            p2[j] += eps;
            symmetric_residuals(&to_matrix(&p2), pairs, &mut perturbed);
            for i in 0..nr {
                jac[(i, j)] = (perturbed[i] - residuals[i]) / eps;
            }
        }
        let r = DMatrix::from_column_slice(nr, 1, &residuals);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let damped = &jtj + DMatrix::identity(8, 8) * (1e-12 * jtj.trace().max(1e-300));
        let delta = match damped.lu().solve(&jtr) {
            Some(d) => d,
            None => break,
        };
        let mut max_step = 0.0f64;
        for j in 0..8 {
            params[j] -= delta[(j, 0)];
            max_step = max_step.max(delta[(j, 0)].abs());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    let matrix = to_matrix(&params);
    if matrix.determinant().abs() <= 1e-12 {
        return Err(VisionError::Singular);
    }

    // Forward RMS in rectified units.
    let rms = {
        let mut sum = 0.0;
        for &(f, t) in pairs {
            let p = apply_matrix(&matrix, f);
            sum += (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2);
        }
        (sum / pairs.len() as f64).sqrt()
    };

    Ok(Homography { matrix, pixel_scale: 1.0, reprojection_rms: rms })
}

/// Rectifies into an explicit output frame: output pixel (u, v) samples the
/// source at `H^-1 (u + origin_x, v + origin_y)` with bilinear
/// interpolation; out-of-source pixels are 0.
pub fn rectify_into(
    image: &GrayImage,
    h: &Homography,
    origin: [f64; 2],
    out_width: usize,
    out_height: usize,
) -> Result<GrayImage, VisionError> {
    let inv = h.inverse_matrix()?;
    let mut data = Vec::with_capacity(out_width * out_height);
    for v in 0..out_height {
        for u in 0..out_width {
            let p = apply_matrix(&inv, [u as f64 + origin[0], v as f64 + origin[1]]);
            data.push(image.sample_bilinear(p[0], p[1]));
        }
    }
    GrayImage::new(out_width, out_height, data)
}

/// Rectifies onto the bounding box of the forward-mapped source corners.
pub fn rectify(image: &GrayImage, h: &Homography) -> Result<GrayImage, VisionError> {
    let (frame, _) = rectified_frame(image, h)?;
    Ok(frame)
}

/// Rectify returning the frame origin (rectified coordinates of output
/// pixel (0,0)), needed to address regions of interest afterwards.
pub fn rectified_frame(
    image: &GrayImage,
    h: &Homography,
) -> Result<(GrayImage, [f64; 2]), VisionError> {
    let w = (image.width() - 1) as f64;
    let ht = (image.height() - 1) as f64;
    let corners = [[0.0, 0.0], [w, 0.0], [0.0, ht], [w, ht]];
    let mapped: Vec<[f64; 2]> = corners.iter().map(|&c| h.apply(c)).collect();
    let min_x = mapped.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let min_y = mapped.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let max_x = mapped.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let max_y = mapped.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    if !(min_x.is_finite() && min_y.is_finite() && max_x.is_finite() && max_y.is_finite()) {
        return Err(VisionError::Singular);
    }
    let origin = [min_x, min_y];
    let out_w = ((max_x - min_x).round() as usize + 1).min(16384);
    let out_h = ((max_y - min_y).round() as usize + 1).min(16384);
    let frame = rectify_into(image, h, origin, out_w, out_h)?;
    Ok((frame, origin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_points(rows: usize, cols: usize, pitch: f64) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                out.push([c as f64 * pitch + 40.0, r as f64 * pitch + 60.0]);
            }
        }
        out
    }

    /// Perspective map of a plane tilted by `theta` about the x axis.
    fn tilt_matrix(theta_deg: f64) -> Matrix3<f64> {
        let t = theta_deg.to_radians();
        let (s, c) = t.sin_cos();
        let d = 500.0;
        let f = 3.0 * d;
        // world (x, y, 0) -> camera (x, c y, d - s y) -> pixel
        Matrix3::new(f, 0.0, 200.0, 0.0, f * c, 150.0, 0.0, -s, d)
    }

    #[test]
    fn identity_correspondences_give_identity() {
        let pts = grid_points(3, 4, 10.0);
        let pairs: Vec<_> = pts.iter().map(|&p| (p, p)).collect();
        let h = estimate_homography(&pairs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(h.matrix[(i, j)], expect, epsilon = 1e-9);
            }
        }
        assert!(h.reprojection_rms < 1e-9);
        assert!(!h.quality_warning());
    }

    #[test]
    fn synthetic_tilt_recovered_below_tenth_pixel() {
        // 30 degree tilt of a 7x10 corner grid.
        let m = tilt_matrix(30.0);
        let world = grid_points(7, 10, 10.0);
        let pairs: Vec<_> = world.iter().map(|&p| (apply_matrix(&m, p), p)).collect();
        let h = estimate_homography(&pairs).unwrap();
        let mut worst = 0.0f64;
        for &(img, w) in &pairs {
            let p = h.apply(img);
            worst = worst.max(((p[0] - w[0]).powi(2) + (p[1] - w[1]).powi(2)).sqrt());
        }
        assert!(worst < 0.1, "worst corner error {worst}");
        assert!(h.reprojection_rms < 0.1);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pairs: Vec<_> = (0..4)
            .map(|i| {
                let p = [i as f64 * 10.0, if i < 3 { 0.0 } else { 5.0 }];
                (p, p)
            })
            .collect();
        // Three of four collinear.
        assert!(matches!(estimate_homography(&pairs), Err(VisionError::Degenerate)));
    }

    #[test]
    fn too_few_points() {
        let pairs = vec![([0.0, 0.0], [0.0, 0.0]); 3];
        assert!(matches!(estimate_homography(&pairs), Err(VisionError::NotEnoughPoints(3))));
    }

    #[test]
    fn composition_property() {
        // Estimating on correspondences pre-warped by a known projective map
        // recovers H P^-1 (up to scale).
        let m = tilt_matrix(20.0);
        let p_warp = tilt_matrix(-35.0);
        let world = grid_points(5, 6, 12.0);
        let pairs: Vec<_> = world.iter().map(|&w| (apply_matrix(&m, w), w)).collect();
        let h = estimate_homography(&pairs).unwrap();

        let warped_pairs: Vec<_> = world
            .iter()
            .map(|&w| (apply_matrix(&p_warp, apply_matrix(&m, w)), w))
            .collect();
        let h2 = estimate_homography(&warped_pairs).unwrap();

        let expected = h.matrix * p_warp.try_inverse().unwrap();
        let expected = expected / expected[(2, 2)];
        let got = h2.matrix / h2.matrix[(2, 2)];
        let dist = (expected - got).norm() / expected.norm();
        assert!(dist < 1e-6, "relative Frobenius distance {dist}");
    }

    #[test]
    fn rectify_identity_is_pixel_identical() {
        let img = GrayImage::new(4, 3, (0..12).map(|i| i as f64 / 11.0).collect()).unwrap();
        let out = rectify(&img, &Homography::identity()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn warp_then_unwarp_recovers_smooth_gradient() {
        // Smooth gradient image, warped and unwarped: interior error stays
        // below 2/255.
        let w = 120usize;
        let h = 90usize;
        let img = GrayImage::new(
            w,
            h,
            (0..w * h)
                .map(|i| {
                    let x = (i % w) as f64 / w as f64;
                    let y = (i / w) as f64 / h as f64;
                    0.2 + 0.6 * (0.5 * x + 0.5 * y)
                })
                .collect(),
        )
        .unwrap();
        // Mild projective warp.
        let m = Matrix3::new(1.02, 0.03, 2.0, -0.02, 0.99, 1.5, 1e-4, -5e-5, 1.0);
        let fwd = Homography { matrix: m, pixel_scale: 1.0, reprojection_rms: 0.0 };
        let warped = rectify_into(&img, &fwd, [0.0, 0.0], w, h).unwrap();
        let back_h = Homography {
            matrix: m.try_inverse().unwrap(),
            pixel_scale: 1.0,
            reprojection_rms: 0.0,
        };
        let back = rectify_into(&warped, &back_h, [0.0, 0.0], w, h).unwrap();
        let mut worst = 0.0f64;
        for y in 8..h - 8 {
            for x in 8..w - 8 {
                worst = worst.max((back.get(x, y) - img.get(x, y)).abs());
            }
        }
        assert!(worst < 2.0 / 255.0, "worst interior error {worst}");
    }

    #[test]
    fn rectified_grid_pitch_is_uniform() {
        // A 1 mm grid warped by a perspective map, rectified back: the
        // recovered pitch varies below 1%.
        let m = tilt_matrix(25.0);
        let world = grid_points(6, 8, 20.0);
        let pairs: Vec<_> = world.iter().map(|&p| (apply_matrix(&m, p), p)).collect();
        let h = estimate_homography(&pairs).unwrap();
        let mapped: Vec<[f64; 2]> = pairs.iter().map(|&(img, _)| h.apply(img)).collect();
        let mut pitches = Vec::new();
        for r in 0..6 {
            for c in 0..7 {
                let a = mapped[r * 8 + c];
                let b = mapped[r * 8 + c + 1];
                pitches.push(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
            }
        }
        let mean: f64 = pitches.iter().sum::<f64>() / pitches.len() as f64;
        for p in &pitches {
            assert!((p - mean).abs() / mean < 0.01, "pitch {p} vs mean {mean}");
        }
    }
}

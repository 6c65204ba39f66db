use super::render::{render_scene, tilted_camera, Scene, SceneLine};
use super::*;

/// A printed line viewed through a region-of-interest-sized frame, with
/// the optical edge softness a phone photo always carries.
fn line_scene(width_mm: f64) -> Scene {
    Scene {
        lines: vec![SceneLine { from: (3.0, 6.0), to: (27.0, 6.0), width: width_mm }],
        edge_softness: 0.06,
        bead_shading: 0.3,
        ripple: 0.25,
        ripple_wavelength: 2.0,
        illumination_slope: (0.002, 0.004),
        bed_texture: 0.005,
        texture_seed: 1,
        ..Scene::default()
    }
}

/// Camera framing the line row in a 600x80 px window at 20 px/mm.
fn roi_camera(px_per_mm: f64) -> nalgebra::Matrix3<f64> {
    // Line sits at y = 6 mm; center it at row height/2.
    tilted_camera(0.0, px_per_mm, 300.0, (0.0, 0.0), (0.0, 40.0 - px_per_mm * 6.0))
}

fn measure_rendered(
    img: &GrayImage,
    method: SegmentationMethod,
    pixel_scale: f64,
) -> WidthMeasurement {
    let (mask, _) = segment_region(img, method, 2.0).unwrap();
    measure_widths(&mask, pixel_scale, 0.5).unwrap()
}

#[test]
fn rendered_line_width_recovered_within_one_pixel() {
    // 0.68 mm line at 20 px/mm, sharp: recovered within 0.05 mm (1 px).
    let px_per_mm = 20.0;
    let cam = roi_camera(px_per_mm);
    let img = render_scene(&line_scene(0.68), &cam, 600, 80, Some((0.015, 4)));
    let m = measure_rendered(&img, SegmentationMethod::KMeans, 1.0 / px_per_mm);
    let samples = m.profile.samples();
    let interior = &samples[2..samples.len() - 2];
    assert!(interior.len() > 20);
    for &(_, w) in interior {
        assert!((w - 0.68).abs() <= 0.05, "width {w}");
    }
}

#[test]
fn segmented_width_tracks_truth_within_one_pixel() {
    let px_per_mm = 20.0;
    let cam = roi_camera(px_per_mm);
    let img = render_scene(&line_scene(0.5), &cam, 600, 80, None);
    let summary = cluster_kmeans(img.data()).unwrap();
    let threshold = threshold_kmeans(&summary, 2.0);
    // Column cut through the line: the bright run matches the true width
    // within one pixel.
    let x = 300usize;
    let run = (0..img.height()).filter(|&y| img.get(x, y) > threshold).count();
    let expected = 0.5 * px_per_mm;
    assert!((run as f64 - expected).abs() <= 1.0, "run {run} px vs {expected}");
}

#[test]
fn raising_threshold_multiplier_never_grows_the_mask() {
    let px_per_mm = 20.0;
    let cam = roi_camera(px_per_mm);
    let img = render_scene(&line_scene(0.68), &cam, 400, 80, Some((0.02, 6)));
    let summary = cluster_kmeans(img.data()).unwrap();
    let mut prev = usize::MAX;
    for step in 0..=6 {
        let n = 1.0 + 0.25 * step as f64;
        let t = threshold_kmeans(&summary, n);
        let count = img.data().iter().filter(|&&p| p > t).count();
        assert!(count <= prev, "mask grew when n rose to {n}");
        prev = count;
    }
}

#[test]
fn gmm_beats_kmeans_on_blurred_lines() {
    let px_per_mm = 20.0;
    let cam = roi_camera(px_per_mm);
    let truth = 0.68;
    // Optics blur the scene; the sensor adds noise afterwards.
    let clean = render_scene(&line_scene(truth), &cam, 600, 80, None);
    let blurred = super::render::add_sensor_noise(&clean.gaussian_blur(3.0), 0.02, 11);

    let median_err = |m: &WidthMeasurement| -> f64 {
        let mut errs: Vec<f64> = m
            .profile
            .samples()
            .iter()
            .map(|&(_, w)| (w - truth).abs())
            .collect();
        errs.sort_by(|a, b| a.total_cmp(b));
        errs[errs.len() / 2]
    };

    let km = measure_rendered(&blurred, SegmentationMethod::KMeans, 1.0 / px_per_mm);
    let gm = measure_rendered(&blurred, SegmentationMethod::Gmm, 1.0 / px_per_mm);
    let km_err = median_err(&km);
    let gm_err = median_err(&gm);
    assert!(
        gm_err <= km_err,
        "GMM median error {gm_err} must not exceed K-means {km_err} on blur"
    );
}

#[test]
fn auto_method_flags_blurry_regions() {
    // Tight region around the bead, as the measurement pipeline crops it.
    let px_per_mm = 20.0;
    let cam = tilted_camera(0.0, px_per_mm, 300.0, (0.0, 0.0), (0.0, 24.0 - px_per_mm * 6.0));
    let clean = render_scene(&line_scene(0.68), &cam, 400, 48, None);
    let sharp = super::render::add_sensor_noise(&clean, 0.02, 3);
    let (_, chosen_sharp) = segment_region(&sharp, SegmentationMethod::Auto, 2.0).unwrap();
    assert_eq!(chosen_sharp, SegmentationMethod::KMeans);

    // Deep defocus: the halo dominates the tight region.
    let blurred = super::render::add_sensor_noise(&clean.gaussian_blur(9.0), 0.02, 3);
    let (_, chosen_blur) = segment_region(&blurred, SegmentationMethod::Auto, 2.0).unwrap();
    assert_eq!(chosen_blur, SegmentationMethod::Gmm);
}

#[test]
fn measurement_is_scale_equivariant() {
    // The same scene at twice the resolution with half the pixel scale
    // yields the same metric profile within one smaller-pixel tolerance.
    let scene = line_scene(0.6);
    let cam1 = tilted_camera(0.0, 10.0, 300.0, (0.0, 0.0), (0.0, 40.0 - 60.0));
    let cam2 = tilted_camera(0.0, 20.0, 300.0, (0.0, 0.0), (0.0, 80.0 - 120.0));
    let img1 = render_scene(&scene, &cam1, 300, 80, None);
    let img2 = render_scene(&scene, &cam2, 600, 160, None);
    let m1 = measure_rendered(&img1, SegmentationMethod::KMeans, 0.1);
    let m2 = measure_rendered(&img2, SegmentationMethod::KMeans, 0.05);

    // Median over slices smooths the per-slice lattice quantization.
    let median = |m: &WidthMeasurement| -> f64 {
        let mut w: Vec<f64> = m.profile.widths().collect();
        w.sort_by(|a, b| a.total_cmp(b));
        w[w.len() / 2]
    };
    assert!(
        (median(&m1) - median(&m2)).abs() <= 0.05 + 1e-9,
        "{} vs {}",
        median(&m1),
        median(&m2)
    );
}

//! Synthetic scene rendering: the camera-side counterpart of the virtual
//! printer. Renders printed lines and a checkerboard on a dark bed under a
//! known projective camera, so the measurement pipeline can be validated
//! end to end against exact ground truth without physical prints.

use super::image::GrayImage;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A straight printed bead in scene (mm) coordinates.
#[derive(Debug, Clone, Copy)]
pub struct SceneLine {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub width: f64,
}

/// Checkerboard with `rows x cols` inner corners; corner (0,0) sits at
/// `origin`, and squares of side `square` extend one square beyond the
/// corner grid on every side.
#[derive(Debug, Clone, Copy)]
pub struct Checkerboard {
    pub rows: usize,
    pub cols: usize,
    pub square: f64,
    pub origin: (f64, f64),
}

impl Checkerboard {
    pub fn corner_mm(&self, row: usize, col: usize) -> (f64, f64) {
        (self.origin.0 + col as f64 * self.square, self.origin.1 + row as f64 * self.square)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let s = self.square;
        x >= self.origin.0 - s
            && x <= self.origin.0 + self.cols as f64 * s
            && y >= self.origin.1 - s
            && y <= self.origin.1 + self.rows as f64 * s
    }

    fn shade(&self, x: f64, y: f64, light: f64, dark: f64) -> f64 {
        let a = ((y - self.origin.1) / self.square).floor() as i64 + 1;
        let b = ((x - self.origin.0) / self.square).floor() as i64 + 1;
        if (a + b) % 2 == 0 {
            dark
        } else {
            light
        }
    }
}

/// Scene description in metric coordinates.
#[derive(Debug, Clone)]
pub struct Scene {
    pub lines: Vec<SceneLine>,
    pub board: Option<Checkerboard>,
    pub background: f64,
    pub line_level: f64,
    pub board_light: f64,
    pub board_dark: f64,
    /// Optical softness of bead edges (mm): intensity ramps linearly over
    /// this span, centered on the geometric edge. Photographed beads always
    /// show such a transition band; it is what the intermediate "noise"
    /// intensity cluster segments against.
    pub edge_softness: f64,
    /// Cross-bead shading depth in [0, 1): a cylindrical bead photographs
    /// brighter at the crown than at the flanks, spreading the light
    /// cluster. 0 renders a flat bead.
    pub bead_shading: f64,
    /// Longitudinal brightness modulation depth in [0, 1): extruded beads
    /// carry a surface ripple along their axis.
    pub ripple: f64,
    /// Ripple wavelength (mm).
    pub ripple_wavelength: f64,
    /// Relative illumination slope per mm in x and y (vignetting).
    pub illumination_slope: (f64, f64),
    /// Bed texture amplitude (intensity units), applied to dark pixels
    /// before any optical blur.
    pub bed_texture: f64,
    pub texture_seed: u64,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            lines: Vec::new(),
            board: None,
            background: 0.10,
            line_level: 0.88,
            board_light: 0.85,
            board_dark: 0.05,
            edge_softness: 0.0,
            bead_shading: 0.0,
            ripple: 0.0,
            ripple_wavelength: 2.0,
            illumination_slope: (0.0, 0.0),
            bed_texture: 0.0,
            texture_seed: 0,
        }
    }
}

impl Scene {
    fn intensity(&self, x: f64, y: f64) -> f64 {
        if let Some(board) = &self.board {
            if board.contains(x, y) {
                return board.shade(x, y, self.board_light, self.board_dark);
            }
        }
        let mut best = self.background;
        for line in &self.lines {
            let (ax, ay) = line.from;
            let (bx, by) = line.to;
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            if len2 < 1e-12 {
                continue;
            }
            let t = (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (ax + t * dx, ay + t * dy);
            let dist = ((x - px) * (x - px) + (y - py) * (y - py)).sqrt();
            let coverage = if self.edge_softness > 1e-12 {
                ((0.5 * line.width - dist) / self.edge_softness + 0.5).clamp(0.0, 1.0)
            } else if dist <= 0.5 * line.width {
                1.0
            } else {
                0.0
            };
            let rel = (dist / (0.5 * line.width)).min(1.0);
            let mut level = self.line_level * (1.0 - self.bead_shading * rel * rel);
            if self.ripple > 0.0 {
                let t_mm = t * len2.sqrt();
                let phase = (std::f64::consts::TAU * t_mm / self.ripple_wavelength).sin();
                level *= 1.0 - self.ripple * 0.5 * (1.0 + phase);
            }
            best = best.max(self.background + (level - self.background) * coverage);
        }
        let (sx, sy) = self.illumination_slope;
        best * (1.0 + sx * x + sy * y)
    }
}

/// Projective camera of a plane tilted by `theta_deg` about the scene x
/// axis, viewed from distance `distance_mm` above `center_mm`, with focal
/// scale chosen so the image resolution at the plane center is
/// `px_per_mm`. Returns the 3x3 map from scene (x_mm, y_mm, 1) to pixels.
pub fn tilted_camera(
    theta_deg: f64,
    px_per_mm: f64,
    distance_mm: f64,
    center_mm: (f64, f64),
    principal_px: (f64, f64),
) -> Matrix3<f64> {
    let t = theta_deg.to_radians();
    let (s, c) = t.sin_cos();
    let f = px_per_mm * distance_mm;
    // Scene (x, y, 0), centered: camera coords (x, c*y, d - s*y).
    let center = Matrix3::new(1.0, 0.0, -center_mm.0, 0.0, 1.0, -center_mm.1, 0.0, 0.0, 1.0);
    let project = Matrix3::new(
        f,
        0.0,
        principal_px.0 * distance_mm,
        0.0,
        f * c,
        principal_px.1 * distance_mm,
        0.0,
        -s,
        distance_mm,
    );
    // Normalize the homogeneous row so the map stays well scaled.
    let m = project * center;
    m / m[(2, 2)]
}

/// Renders the scene through the camera with 3x3 supersampling; optional
/// additive pixel noise (sigma, seed) emulates sensor grain.
pub fn render_scene(
    scene: &Scene,
    camera: &Matrix3<f64>,
    width: usize,
    height: usize,
    noise: Option<(f64, u64)>,
) -> GrayImage {
    let inv = camera.try_inverse().expect("camera must be invertible");
    let mut data = Vec::with_capacity(width * height);
    const SUB: [f64; 3] = [-1.0 / 3.0, 0.0, 1.0 / 3.0];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for sy in SUB {
                for sx in SUB {
                    let p = inv * Vector3::new(x as f64 + sx, y as f64 + sy, 1.0);
                    acc += scene.intensity(p.x / p.z, p.y / p.z);
                }
            }
            data.push(acc / 9.0);
        }
    }
    let mut img = GrayImage::new(width, height, data).expect("rendered image is valid");
    if scene.bed_texture > 0.0 {
        img = add_bed_texture(&img, scene);
    }
    if let Some((sigma, seed)) = noise {
        img = add_sensor_noise(&img, sigma, seed);
    }
    img
}

/// Smoothed random texture on the dark bed (pixels well below the line
/// level), representing the print surface's grain. Sits under any optical
/// blur the caller applies afterwards.
fn add_bed_texture(image: &GrayImage, scene: &Scene) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.texture_seed);
    let mut field = GrayImage::filled(image.width(), image.height(), 0.0);
    for y in 0..field.height() {
        for x in 0..field.width() {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            field.set(x, y, (-2.0 * u1.ln()).sqrt() * u2.cos());
        }
    }
    let field = field.gaussian_blur(1.2);
    let std = {
        let n = field.data().len() as f64;
        let mean: f64 = field.data().iter().sum::<f64>() / n;
        (field.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
    }
    .max(1e-12);
    let cutoff = scene.background + 0.3 * (scene.line_level - scene.background);
    let mut out = image.clone();
    for y in 0..out.height() {
        for x in 0..out.width() {
            let v = out.get(x, y);
            if v <= cutoff {
                out.set(x, y, (v + scene.bed_texture * field.get(x, y) / std).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Additive Gaussian sensor noise, clamped to [0, 1]. Sensor noise lands
/// after any optical blur, so blur the clean render first and add noise to
/// the result.
pub fn add_sensor_noise(image: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    let mut img = image.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for y in 0..img.height() {
        for x in 0..img.width() {
            // Box-Muller keeps the dependency surface small here.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let g = (-2.0 * u1.ln()).sqrt() * u2.cos();
            let v = (img.get(x, y) + sigma * g).clamp(0.0, 1.0);
            img.set(x, y, v);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fronto_camera_is_metric() {
        let cam = tilted_camera(0.0, 10.0, 300.0, (0.0, 0.0), (0.0, 0.0));
        let p = cam * Vector3::new(5.0, 7.0, 1.0);
        assert!((p.x / p.z - 50.0).abs() < 1e-9);
        assert!((p.y / p.z - 70.0).abs() < 1e-9);
    }

    #[test]
    fn line_renders_at_expected_width() {
        let scene = Scene {
            lines: vec![SceneLine { from: (2.0, 5.0), to: (18.0, 5.0), width: 1.0 }],
            board: None,
            background: 0.1,
            line_level: 0.9,
            ..Scene::default()
        };
        let cam = tilted_camera(0.0, 10.0, 300.0, (0.0, 0.0), (0.0, 0.0));
        let img = render_scene(&scene, &cam, 200, 100, None);
        // Column through the line center: bright run of about 10 px.
        let col = 100;
        let bright: usize = (0..100).filter(|&y| img.get(col, y) > 0.5).count();
        assert!((9..=11).contains(&bright), "bright run {bright}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let scene = Scene {
            lines: vec![],
            board: None,
            background: 0.5,
            line_level: 0.9,
            ..Scene::default()
        };
        let cam = tilted_camera(0.0, 5.0, 300.0, (0.0, 0.0), (0.0, 0.0));
        let a = render_scene(&scene, &cam, 50, 40, Some((0.02, 9)));
        let b = render_scene(&scene, &cam, 50, 40, Some((0.02, 9)));
        let c = render_scene(&scene, &cam, 50, 40, Some((0.02, 10)));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

//! Grayscale image container and file I/O.

use crate::error::VisionError;
use std::path::Path;

/// Row-major luminance samples in [0, 1]. Pixel centers sit at integer
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::BadImage(format!("empty dimensions {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(VisionError::BadImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(VisionError::BadImage("non-finite sample".to_string()));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Bilinear sample at fractional pixel coordinates; 0 outside the image.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        if x < 0.0 || y < 0.0 || x > (self.width - 1) as f64 || y > (self.height - 1) as f64 {
            return 0.0;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Separable Gaussian blur (truncated at 3 sigma).
    pub fn gaussian_blur(&self, sigma: f64) -> GrayImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();

        let w = self.width as isize;
        let h = self.height as isize;
        let mut tmp = vec![0.0f64; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, k) in kernel.iter().enumerate() {
                    let sx = (x + i as isize - radius).clamp(0, w - 1);
                    acc += k * self.data[(y * w + sx) as usize];
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let mut out = vec![0.0f64; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, k) in kernel.iter().enumerate() {
                    let sy = (y + i as isize - radius).clamp(0, h - 1);
                    acc += k * tmp[(sy * w + x) as usize];
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        GrayImage { width: self.width, height: self.height, data: out }
    }

    /// Blurs only the given pixel rectangle (x0..x1, y0..y1, exclusive ends).
    pub fn gaussian_blur_region(
        &self,
        sigma: f64,
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
    ) -> GrayImage {
        let blurred = self.gaussian_blur(sigma);
        let mut out = self.clone();
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                out.set(x, y, blurred.get(x, y));
            }
        }
        out
    }
}

/// Loads a PNG or binary PGM/PPM image, converting color input to
/// luminance (0.2126 R + 0.7152 G + 0.0722 B).
pub fn load_image(path: &Path) -> Result<GrayImage, VisionError> {
    let dynamic = image::open(path).map_err(|e| VisionError::Image(e.to_string()))?;
    let rgb = dynamic.to_rgb8();
    let (w, h) = rgb.dimensions();
    let mut data = Vec::with_capacity((w * h) as usize);
    for p in rgb.pixels() {
        let [r, g, b] = p.0;
        data.push((0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64) / 255.0);
    }
    GrayImage::new(w as usize, h as usize, data)
}

/// Writes an 8-bit grayscale PNG.
pub fn save_png(image: &GrayImage, path: &Path) -> Result<(), VisionError> {
    let mut out = image::GrayImage::new(image.width() as u32, image.height() as u32);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let v = (image.get(x, y).clamp(0.0, 1.0) * 255.0).round() as u8;
            out.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    out.save(path).map_err(|e| VisionError::Image(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(GrayImage::new(0, 5, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn bilinear_interpolates_and_zeroes_outside() {
        let img = GrayImage::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.5, 0.5), 0.5);
        assert_eq!(img.sample_bilinear(-1.0, 0.0), 0.0);
        assert_eq!(img.sample_bilinear(0.0, 5.0), 0.0);
    }

    #[test]
    fn blur_preserves_mean_roughly() {
        let mut img = GrayImage::filled(21, 21, 0.0);
        img.set(10, 10, 1.0);
        let blurred = img.gaussian_blur(2.0);
        let total: f64 = blurred.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "mass {total}");
        assert!(blurred.get(10, 10) < 1.0);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = GrayImage::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.1]).unwrap();
        save_png(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.height(), 2);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-9);
        }
    }
}

//! Minimal line-plot rasterization to PNG: overlays of width profiles
//! (reference, measured, predicted) without any interactive display.

use crate::error::VisionError;
use crate::profile::WidthProfile;
use image::{Rgb, RgbImage};
use std::path::Path;

/// Data region covered by the plot axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Viewport {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

const PALETTE: [[u8; 3]; 6] = [
    [214, 69, 65],
    [31, 119, 180],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [23, 190, 207],
];

const MARGIN: u32 = 40;

/// Renders the overlay and returns the image with its autoscaled viewport.
pub fn render_profiles(
    series: &[(String, WidthProfile)],
    width: u32,
    height: u32,
) -> Result<(RgbImage, Viewport), VisionError> {
    if series.is_empty() || series.iter().all(|(_, p)| p.is_empty()) {
        return Err(VisionError::BadImage("nothing to plot".to_string()));
    }
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for (_, profile) in series {
        for &(x, y) in profile.samples() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    // Pad the y range so flat profiles stay visible.
    let pad = (0.05 * (y1 - y0)).max(0.02);
    y0 -= pad;
    y1 += pad;
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let viewport = Viewport { x0, x1, y0, y1 };

    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let plot_w = width - 2 * MARGIN;
    let plot_h = height - 2 * MARGIN;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN as f64 + (x - x0) / (x1 - x0) * plot_w as f64,
            (height - MARGIN) as f64 - (y - y0) / (y1 - y0) * plot_h as f64,
        )
    };

    // Grid.
    for i in 0..=5 {
        let gx = MARGIN + plot_w * i / 5;
        let gy = MARGIN + plot_h * i / 5;
        for y in MARGIN..height - MARGIN {
            img.put_pixel(gx, y, Rgb([225, 225, 225]));
        }
        for x in MARGIN..width - MARGIN {
            img.put_pixel(x, gy, Rgb([225, 225, 225]));
        }
    }
    // Frame.
    for x in MARGIN..=width - MARGIN {
        img.put_pixel(x, MARGIN, Rgb([0, 0, 0]));
        img.put_pixel(x, height - MARGIN, Rgb([0, 0, 0]));
    }
    for y in MARGIN..=height - MARGIN {
        img.put_pixel(MARGIN, y, Rgb([0, 0, 0]));
        img.put_pixel(width - MARGIN, y, Rgb([0, 0, 0]));
    }

    for (s, (_, profile)) in series.iter().enumerate() {
        let color = Rgb(PALETTE[s % PALETTE.len()]);
        let pts: Vec<(f64, f64)> =
            profile.samples().iter().map(|&(x, y)| to_px(x, y)).collect();
        for pair in pts.windows(2) {
            draw_segment(&mut img, pair[0], pair[1], color);
        }
        // Legend swatch.
        let ly = 8 + 10 * s as u32;
        for dx in 0..18u32 {
            for dy in 0..4u32 {
                if MARGIN + dx < width && ly + dy < height {
                    img.put_pixel(MARGIN + dx, ly + dy, color);
                }
            }
        }
    }
    Ok((img, viewport))
}

fn draw_segment(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = a.0 + (b.0 - a.0) * t;
        let y = a.1 + (b.1 - a.1) * t;
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Renders and writes the overlay PNG; returns the autoscaled viewport.
pub fn plot_to_file(
    series: &[(String, WidthProfile)],
    path: &Path,
) -> Result<Viewport, VisionError> {
    let (img, viewport) = render_profiles(series, 900, 600)?;
    img.save(path).map_err(|e| VisionError::Image(e.to_string()))?;
    Ok(viewport)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(offset: f64) -> WidthProfile {
        WidthProfile::new((0..100).map(|i| (i as f64 * 0.1, offset + 0.2 * (i as f64 * 0.07).sin().abs())).collect())
            .unwrap()
    }

    #[test]
    fn overlay_renders_and_viewport_covers_data() {
        let series =
            vec![("reference".to_string(), profile(0.5)), ("measured".to_string(), profile(0.52))];
        let (img, viewport) = render_profiles(&series, 900, 600).unwrap();
        assert_eq!(img.width(), 900);
        for (_, p) in &series {
            for &(x, y) in p.samples() {
                assert!(viewport.contains(x, y), "({x}, {y}) outside {viewport:?}");
            }
        }
        // Some non-background pixels were drawn inside the frame.
        let drawn = img
            .pixels()
            .filter(|p| p.0 != [255, 255, 255] && p.0 != [225, 225, 225] && p.0 != [0, 0, 0])
            .count();
        assert!(drawn > 100);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(render_profiles(&[], 300, 200).is_err());
    }
}

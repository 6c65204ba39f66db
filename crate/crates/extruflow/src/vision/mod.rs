//! Photograph to metric width profile: perspective rectification via a
//! printed checkerboard, unsupervised bead segmentation, PCA-oriented
//! width sampling, plus a synthetic scene renderer used as the desk-scale
//! stand-in for real photographs.

pub mod checkerboard;
pub mod cluster;
pub mod homography;
pub mod image;
pub mod measure;
pub mod render;

pub use checkerboard::detect_checkerboard;
pub use cluster::{cluster_gmm, cluster_kmeans, threshold_kmeans, ClusterStat, ClusterSummary, GmmResult};
pub use homography::{estimate_homography, rectified_frame, rectify, rectify_into, Homography};
pub use image::{load_image, save_png, GrayImage};
pub use measure::{measure_widths, SegmentationMask, WidthMeasurement};

use crate::error::VisionError;

/// Segmentation method choice per region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentationMethod {
    /// K-means + threshold rule: best on sharp imagery.
    KMeans,
    /// Gaussian mixture responsibilities: robust to blur.
    Gmm,
    /// Pick per region: the noise-cluster weight heuristic decides.
    Auto,
}

/// Noise-cluster weight above which a region is treated as blurry.
pub const BLUR_WEIGHT_THRESHOLD: f64 = 0.25;

/// Segments one region of interest into a line mask with the requested
/// method; `Auto` resolves through the noise-cluster weight heuristic.
/// Returns the mask and the method actually applied.
pub fn segment_region(
    image: &GrayImage,
    method: SegmentationMethod,
    threshold_n: f64,
) -> Result<(SegmentationMask, SegmentationMethod), VisionError> {
    let pixels = image.data();
    let chosen = match method {
        SegmentationMethod::Auto => {
            let summary = cluster_kmeans(pixels)?;
            if summary.noise().weight > BLUR_WEIGHT_THRESHOLD {
                SegmentationMethod::Gmm
            } else {
                SegmentationMethod::KMeans
            }
        }
        other => other,
    };
    let mask = match chosen {
        SegmentationMethod::KMeans => {
            let summary = cluster_kmeans(pixels)?;
            let threshold = threshold_kmeans(&summary, threshold_n);
            SegmentationMask::new(
                image.width(),
                image.height(),
                pixels.iter().map(|&p| p > threshold).collect(),
            )?
        }
        SegmentationMethod::Gmm => {
            let fit = cluster_gmm(pixels)?;
            SegmentationMask::new(image.width(), image.height(), fit.line_mask())?
        }
        SegmentationMethod::Auto => unreachable!("resolved above"),
    };
    Ok((mask, chosen))
}

#[cfg(test)]
#[path = "pipeline_tests.rs"]
mod pipeline_tests;

//! Sampled bead-width profiles, the common currency between the simulator,
//! the vision pipeline, identification and control.
//!
//! Serialized as two-column CSV (`x_mm,w_mm`) with one header line; every
//! module that exchanges width data uses this format.

use crate::error::ModelError;
use std::fmt::Write as _;

/// Ordered (arc-length x \[mm\], width w \[mm\]) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthProfile {
    samples: Vec<(f64, f64)>,
}

impl WidthProfile {
    /// Builds a profile, enforcing strictly increasing x and nonnegative w.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(ModelError::NonMonotonicProfile { index: i + 1 });
            }
        }
        if let Some(i) = samples.iter().position(|&(_, w)| w < 0.0 || !w.is_finite()) {
            return Err(ModelError::NegativeWidth { index: i });
        }
        Ok(WidthProfile { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// Sub-profile with x in [x0, x1], x re-origined at the first kept sample.
    pub fn window(&self, x0: f64, x1: f64) -> WidthProfile {
        let kept: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|&&(x, _)| x >= x0 && x <= x1)
            .copied()
            .collect();
        let origin = kept.first().map(|s| s.0).unwrap_or(0.0);
        WidthProfile { samples: kept.into_iter().map(|(x, w)| (x - origin, w)).collect() }
    }

    /// Median sample spacing; None with fewer than two samples.
    pub fn pitch(&self) -> Option<f64> {
        if self.samples.len() < 2 {
            return None;
        }
        let mut gaps: Vec<f64> = self.samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
        gaps.sort_by(|a, b| a.total_cmp(b));
        Some(gaps[gaps.len() / 2])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 20 + 16);
        out.push_str("x_mm,w_mm\n");
        for &(x, w) in &self.samples {
            let _ = writeln!(out, "{:.6},{:.6}", x, w);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ModelError> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("x_mm")) {
                continue;
            }
            let mut cols = line.split(',');
            let x = cols
                .next()
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or(ModelError::NonMonotonicProfile { index: i })?;
            let w = cols
                .next()
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or(ModelError::NegativeWidth { index: i })?;
            samples.push((x, w));
        }
        WidthProfile::new(samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotonic_x() {
        let err = WidthProfile::new(vec![(0.0, 0.5), (0.1, 0.5), (0.1, 0.5)]);
        assert!(matches!(err, Err(ModelError::NonMonotonicProfile { index: 2 })));
    }

    #[test]
    fn rejects_negative_width() {
        let err = WidthProfile::new(vec![(0.0, 0.5), (0.1, -0.1)]);
        assert!(matches!(err, Err(ModelError::NegativeWidth { index: 1 })));
    }

    #[test]
    fn csv_round_trip() {
        let p = WidthProfile::new(vec![(0.0, 0.5094), (0.1, 0.51), (0.25, 0.849)]).unwrap();
        let q = WidthProfile::from_csv(&p.to_csv()).unwrap();
        assert_eq!(p.len(), q.len());
        for (a, b) in p.samples().iter().zip(q.samples()) {
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn window_reorigins() {
        let p = WidthProfile::new(vec![(0.0, 0.1), (1.0, 0.2), (2.0, 0.3), (3.0, 0.4)]).unwrap();
        let w = p.window(1.0, 2.5);
        assert_eq!(w.len(), 2);
        assert_eq!(w.samples()[0], (0.0, 0.2));
        assert_eq!(w.samples()[1], (1.0, 0.3));
    }
}

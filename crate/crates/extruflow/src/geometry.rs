//! Minimal 3-vector used for printhead positions and directions.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const ORIGIN: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit direction, or None for a (near-)zero vector.
    pub fn normalized(&self) -> Option<Vec3> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(Vec3::new(self.x / n, self.y / n, self.z / n))
        }
    }

    pub fn lerp(&self, other: &Vec3, t: f64) -> Vec3 {
        Vec3::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
            self.z + (other.z - self.z) * t,
        )
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Interior turn angle (degrees) at vertex `b` of the polyline a-b-c.
/// 0 for collinear continuation, 180 for a full reversal.
pub fn turn_angle_deg(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let d1 = (*b - *a).normalized()?;
    let d2 = (*c - *b).normalized()?;
    let cos = d1.dot(&d2).clamp(-1.0, 1.0);
    Some(cos.acos().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn turn_angle_right_angle() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(10.0, 0.0, 0.0);
        let c = Vec3::new(10.0, 10.0, 0.0);
        assert_relative_eq!(turn_angle_deg(&a, &b, &c).unwrap(), 90.0, epsilon = 1e-12);
    }

    #[test]
    fn turn_angle_collinear_is_zero() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(5.0, 5.0, 0.0);
        let c = Vec3::new(9.0, 9.0, 0.0);
        assert!(turn_angle_deg(&a, &b, &c).unwrap() < 1e-5);
    }

    #[test]
    fn turn_angle_degenerate_is_none() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        assert!(turn_angle_deg(&a, &a, &a).is_none());
    }
}

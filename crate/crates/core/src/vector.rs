//! Small fixed-capacity vectors for planar (n = 2) and spatial (n = 3) runs.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector in R^2 or R^3. Unused trailing components are kept at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector {
    c: [f64; 3],
    dim: usize,
}

impl Vector {
    pub fn new2(x: f64, y: f64) -> Self {
        Vector {
            c: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Vector {
            c: [x, y, z],
            dim: 3,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 3);
        Vector { c: [0.0; 3], dim }
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        match s.len() {
            2 => Ok(Vector::new2(s[0], s[1])),
            3 => Ok(Vector::new3(s[0], s[1], s[2])),
            n => Err(Error::invalid(
                "dimension",
                format!("expected 2 or 3 components, got {n}"),
            )),
        }
    }

    /// Reads `dim` components starting at `offset`; the caller guarantees the layout.
    pub(crate) fn read(s: &[f64], offset: usize, dim: usize) -> Self {
        let mut c = [0.0; 3];
        c[..dim].copy_from_slice(&s[offset..offset + dim]);
        Vector { c, dim }
    }

    pub(crate) fn write(&self, s: &mut [f64], offset: usize) {
        s[offset..offset + self.dim].copy_from_slice(self.as_slice());
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.c[0] * other.c[0] + self.c[1] * other.c[1] + self.c[2] * other.c[2]
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Wedge product: scalar in the plane, the usual cross product in space.
    pub fn wedge(&self, other: &Vector) -> Wedge {
        let [a1, a2, a3] = self.c;
        let [b1, b2, b3] = other.c;
        if self.dim == 2 && other.dim == 2 {
            Wedge::Scalar(a1 * b2 - a2 * b1)
        } else {
            Wedge::Vector([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
        }
    }

    /// Polar angle in the (x, y) plane.
    pub fn angle(&self) -> f64 {
        self.c[1].atan2(self.c[0])
    }

    /// Rotation about the z axis.
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, co) = theta.sin_cos();
        let mut c = self.c;
        c[0] = co * self.c[0] - s * self.c[1];
        c[1] = s * self.c[0] + co * self.c[1];
        Vector { c, dim: self.dim }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(self, rhs: Vector) -> Vector {
        Vector {
            c: [
                self.c[0] + rhs.c[0],
                self.c[1] + rhs.c[1],
                self.c[2] + rhs.c[2],
            ],
            dim: self.dim,
        }
    }
}

impl AddAssign for Vector {
    fn add_assign(&mut self, rhs: Vector) {
        *self = *self + rhs;
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(self, rhs: Vector) -> Vector {
        Vector {
            c: [
                self.c[0] - rhs.c[0],
                self.c[1] - rhs.c[1],
                self.c[2] - rhs.c[2],
            ],
            dim: self.dim,
        }
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    fn mul(self, k: f64) -> Vector {
        Vector {
            c: [self.c[0] * k, self.c[1] * k, self.c[2] * k],
            dim: self.dim,
        }
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    fn mul(self, v: Vector) -> Vector {
        v * self
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self * -1.0
    }
}

impl Serialize for Vector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Vector::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

/// Result of [`Vector::wedge`]; angular momentum uses the same shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Wedge {
    Scalar(f64),
    Vector([f64; 3]),
}

impl Wedge {
    /// Signed value in the plane, Euclidean norm in space.
    pub fn magnitude(&self) -> f64 {
        match self {
            Wedge::Scalar(v) => *v,
            Wedge::Vector(v) => (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt(),
        }
    }

    pub fn distance(&self, other: &Wedge) -> f64 {
        match (self, other) {
            (Wedge::Scalar(a), Wedge::Scalar(b)) => (a - b).abs(),
            (a, b) => {
                let (a, b) = (a.components(), b.components());
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            }
        }
    }

    fn components(&self) -> [f64; 3] {
        match self {
            Wedge::Scalar(v) => [0.0, 0.0, *v],
            Wedge::Vector(v) => *v,
        }
    }

    pub fn scale(&self, k: f64) -> Wedge {
        match self {
            Wedge::Scalar(v) => Wedge::Scalar(v * k),
            Wedge::Vector(v) => Wedge::Vector([v[0] * k, v[1] * k, v[2] * k]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wedge_planar_and_spatial() {
        let a = Vector::new2(1.0, 0.0);
        let b = Vector::new2(0.0, 2.0);
        assert_eq!(a.wedge(&b), Wedge::Scalar(2.0));
        let a3 = Vector::new3(1.0, 0.0, 0.0);
        let b3 = Vector::new3(0.0, 2.0, 0.0);
        assert_eq!(a3.wedge(&b3), Wedge::Vector([0.0, 0.0, 2.0]));
        assert_eq!(a.wedge(&(a * 3.0)).magnitude(), 0.0);
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(Vector::from_slice(&[1.0]).is_err());
        assert!(Vector::from_slice(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}

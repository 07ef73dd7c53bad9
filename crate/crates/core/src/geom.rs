//! Small fixed-size vector types used for horizontal offsets and 3D points.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Horizontal (ground plane) vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn as_array(self) -> [T; 2] {
        [self.x, self.y]
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn cast<U: Scalar>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Point in 3D space; `z` is altitude above the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn distance(self, other: Self) -> T {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn delta(self, other: Self) -> [T; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }
}

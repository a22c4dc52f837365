//! Small fixed-size vector and quaternion types used by the kinematics.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Length of the horizontal (x, y) projection.
    pub fn planar_norm(self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion `w + xi + yj + zk` representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T = f64> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub fn identity() -> Self {
        Quat { w: T::one(), x: T::zero(), y: T::zero(), z: T::zero() }
    }

    /// Rotation by `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let half = angle * T::lit(0.5);
        let (s, c) = half.sin_cos();
        Quat { w: c, x: axis.x * s, y: axis.y * s, z: axis.z * s }
    }

    pub fn conjugate(self) -> Self {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = T::lit(2.0);
        let t = u.cross(v).scale(two);
        v + t.scale(self.w) + u.cross(t)
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn normalized(self) -> Self {
        let n = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// Rotation vector (axis times angle) of this rotation, taking the
    /// shorter of the two equivalent representations.
    pub fn to_rotation_vector(self) -> Vec3<T> {
        let q = if self.w < T::zero() {
            Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s <= T::epsilon() {
            return v.scale(T::lit(2.0));
        }
        let angle = T::lit(2.0) * s.atan2(q.w);
        v.scale(angle / s)
    }
}

impl<T: Real> Mul for Quat<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

/// Rigid transform: rotate then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T = f64> {
    pub position: Vec3<T>,
    pub orientation: Quat<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Pose { position: Vec3::zero(), orientation: Quat::identity() }
    }

    /// Maps a point expressed in this frame into the parent frame.
    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.position + self.orientation.rotate(p)
    }

    /// Expresses `other` relative to this frame.
    pub fn relative(&self, other: &Pose<T>) -> Pose<T> {
        let inv = self.orientation.conjugate();
        Pose {
            position: inv.rotate(other.position - self.position),
            orientation: inv * other.orientation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_turn_about_z() {
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        let v = q.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!((v.x).abs() < 1e-12 && (v.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_vector_roundtrip() {
        let axis = Vec3::new(1.0, 2.0, -0.5);
        let axis = axis.scale(1.0 / axis.norm());
        let q = Quat::from_axis_angle(axis, 0.7);
        let r = q.to_rotation_vector();
        assert!((r - axis.scale(0.7)).norm() < 1e-12);
        assert!(Quat::<f64>::identity().to_rotation_vector().norm() == 0.0);
    }

    #[test]
    fn relative_pose_inverts_composition() {
        let a = Pose {
            position: Vec3::new(0.3, -0.2, 0.1),
            orientation: Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 0.4),
        };
        let b = Pose {
            position: Vec3::new(1.0, 0.5, 0.0),
            orientation: Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), -1.1),
        };
        let rel = a.relative(&b);
        let back = a.transform_point(rel.position);
        assert!((back - b.position).norm() < 1e-12);
    }
}

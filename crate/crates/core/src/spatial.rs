//! Rotations, rigid transforms and 6D spatial vectors.
//!
//! Every spatial vector in this crate is stacked `[angular; linear]`.
//!
//! A [`Transform`] stores the pose of a child frame inside its parent frame, so
//! a point maps as `x_parent = R * x_child + p`. Re-expressing spatial vectors
//! from the child frame into the parent frame follows
//!
//! ```text
//! motion:  ω' = R ω        v' = R v + p × (R ω)
//! force:   f' = R f        n' = R n + p × (R f)
//! ```
//!
//! which keeps the power pairing `⟨f, v⟩ = n·ω + f·v` frame independent. The
//! spatial cross products are `v ×m w = [ω×ω_w ; ω×v_w + v×ω_w]` and
//! `v ×f f = [ω×n + v×f ; ω×f]`. These are the only places in the crate where
//! the cross-product signs are spelled out.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Matrix6, Quaternion, SymmetricEigen, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("invalid spatial inertia: {0}")]
    InvalidInertia(String),
}

/// Skew-symmetric matrix with `skew(a) * b == a × b`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// A proper rotation, stored as a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(UnitQuaternion<f64>);

/// Rotation vector of a rotation together with a flag raised when the angle is
/// exactly π and the axis sign had to be picked by convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationLog {
    pub vector: Vec3,
    pub at_pi: bool,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Right-handed rotation of `angle` radians about `axis` (normalized here).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        let (s, c) = half.sin_cos();
        let a = axis / n * s;
        Rotation(UnitQuaternion::new_unchecked(Quaternion::new(c, a.x, a.y, a.z)))
    }

    /// Inverse of [`Rotation::log`].
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            return Self::identity();
        }
        Self::from_axis_angle(v, angle)
    }

    /// Builds a rotation from a 3×3 matrix, projecting onto SO(3).
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let r = nalgebra::Rotation3::from_matrix(m);
        Rotation(UnitQuaternion::from_rotation_matrix(&r))
    }

    pub fn from_quaternion(q: Quaternion<f64>) -> Self {
        Rotation(UnitQuaternion::new_normalize(q))
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.0.inverse_transform_vector(v)
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.inverse())
    }

    /// `self * other`, renormalized so that long products do not drift.
    pub fn compose(&self, other: &Rotation) -> Self {
        let q = self.0.quaternion() * other.0.quaternion();
        Rotation(UnitQuaternion::new_normalize(q))
    }

    /// Rotation vector (axis × angle) with angle in `[0, π]`.
    ///
    /// At exactly π the axis sign is ambiguous; the axis whose first non-zero
    /// component is positive is returned and `at_pi` is set.
    pub fn log(&self) -> RotationLog {
        let q = self.0.quaternion();
        let (mut w, mut v) = (q.w, q.imag());
        if w < 0.0 {
            w = -w;
            v = -v;
        }
        let s = v.norm();
        if s < 1e-12 {
            // sin(θ/2) ≈ θ/2
            return RotationLog { vector: 2.0 * v, at_pi: false };
        }
        let angle = 2.0 * s.atan2(w);
        let mut axis = v / s;
        let at_pi = w < 1e-12;
        if at_pi {
            let lead = axis.iter().copied().find(|c| c.abs() > 1e-15).unwrap_or(1.0);
            if lead < 0.0 {
                axis = -axis;
            }
        }
        RotationLog { vector: axis * angle, at_pi }
    }

    pub fn angle(&self) -> f64 {
        self.0.angle()
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

/// Pose of a child frame expressed in its parent frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Transform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Transform {
    pub fn identity() -> Self {
        Transform { rotation: Rotation::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Transform { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Transform { rotation: Rotation::identity(), translation }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Transform { rotation, translation: Vec3::zeros() }
    }

    /// `self ∘ other`: coordinates go through `other` first, then `self`.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let rotation = self.rotation.inverse();
        Transform { translation: -rotation.rotate(&self.translation), rotation }
    }

    pub fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation.rotate(x) + self.translation
    }

    pub fn inverse_transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation.inverse_rotate(&(x - self.translation))
    }

    /// Child-frame motion vector re-expressed in the parent frame.
    pub fn apply_motion(&self, m: &SpatialMotion) -> SpatialMotion {
        let angular = self.rotation.rotate(&m.angular);
        let linear = self.rotation.rotate(&m.linear) + self.translation.cross(&angular);
        SpatialMotion { angular, linear }
    }

    /// Parent-frame motion vector re-expressed in the child frame.
    pub fn inverse_apply_motion(&self, m: &SpatialMotion) -> SpatialMotion {
        let angular = self.rotation.inverse_rotate(&m.angular);
        let linear = self.rotation.inverse_rotate(&(m.linear - self.translation.cross(&m.angular)));
        SpatialMotion { angular, linear }
    }

    /// Child-frame force vector re-expressed in the parent frame.
    pub fn apply_force(&self, f: &SpatialForce) -> SpatialForce {
        let force = self.rotation.rotate(&f.force);
        let torque = self.rotation.rotate(&f.torque) + self.translation.cross(&force);
        SpatialForce { torque, force }
    }

    /// Parent-frame force vector re-expressed in the child frame.
    pub fn inverse_apply_force(&self, f: &SpatialForce) -> SpatialForce {
        let force = self.rotation.inverse_rotate(&f.force);
        let torque = self.rotation.inverse_rotate(&(f.torque - self.translation.cross(&f.force)));
        SpatialForce { torque, force }
    }

    /// 6×6 matrix of [`Transform::apply_motion`].
    pub fn motion_matrix(&self) -> Matrix6<f64> {
        let r = self.rotation.matrix();
        let mut x = Matrix6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        x.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&self.translation) * r));
        x
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

pub fn compose(a: &Transform, b: &Transform) -> Transform {
    a.compose(b)
}

pub fn transform_motion(t: &Transform, v: &SpatialMotion) -> SpatialMotion {
    t.apply_motion(v)
}

pub fn transform_force(t: &Transform, f: &SpatialForce) -> SpatialForce {
    t.apply_force(f)
}

/// Twist: angular velocity and the linear velocity of the point at the frame origin.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialMotion {
    pub angular: Vec3,
    pub linear: Vec3,
}

/// Wrench: torque about the frame origin and force.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialForce {
    pub torque: Vec3,
    pub force: Vec3,
}

impl SpatialMotion {
    pub fn new(angular: Vec3, linear: Vec3) -> Self {
        SpatialMotion { angular, linear }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.angular.x,
            self.angular.y,
            self.angular.z,
            self.linear.x,
            self.linear.y,
            self.linear.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        SpatialMotion {
            angular: Vec3::new(v[0], v[1], v[2]),
            linear: Vec3::new(v[3], v[4], v[5]),
        }
    }

    /// Power delivered by `f` along this motion.
    pub fn dot(&self, f: &SpatialForce) -> f64 {
        self.angular.dot(&f.torque) + self.linear.dot(&f.force)
    }

    /// `self ×m other`.
    pub fn cross_motion(&self, other: &SpatialMotion) -> SpatialMotion {
        SpatialMotion {
            angular: self.angular.cross(&other.angular),
            linear: self.angular.cross(&other.linear) + self.linear.cross(&other.angular),
        }
    }

    /// `self ×f f`.
    pub fn cross_force(&self, f: &SpatialForce) -> SpatialForce {
        SpatialForce {
            torque: self.angular.cross(&f.torque) + self.linear.cross(&f.force),
            force: self.angular.cross(&f.force),
        }
    }

    /// Velocity of a point displaced by `r` from the frame origin.
    pub fn point_velocity(&self, r: &Vec3) -> Vec3 {
        self.linear + self.angular.cross(r)
    }
}

impl SpatialForce {
    pub fn new(torque: Vec3, force: Vec3) -> Self {
        SpatialForce { torque, force }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.torque.x,
            self.torque.y,
            self.torque.z,
            self.force.x,
            self.force.y,
            self.force.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        SpatialForce { torque: Vec3::new(v[0], v[1], v[2]), force: Vec3::new(v[3], v[4], v[5]) }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.torque.x, self.torque.y, self.torque.z, self.force.x, self.force.y, self.force.z]
    }

    pub fn dot(&self, m: &SpatialMotion) -> f64 {
        m.dot(self)
    }

    /// Same wrench with its reference point moved by `r` (new origin = old + r).
    pub fn shifted(&self, r: &Vec3) -> SpatialForce {
        SpatialForce { torque: self.torque - r.cross(&self.force), force: self.force }
    }
}

macro_rules! impl_vec6_ops {
    ($t:ident, $a:ident, $b:ident) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                $t { $a: self.$a + o.$a, $b: self.$b + o.$b }
            }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, o: $t) {
                self.$a += o.$a;
                self.$b += o.$b;
            }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, o: $t) {
                self.$a -= o.$a;
                self.$b -= o.$b;
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                $t { $a: self.$a - o.$a, $b: self.$b - o.$b }
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                $t { $a: -self.$a, $b: -self.$b }
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                $t { $a: self.$a * s, $b: self.$b * s }
            }
        }
    };
}

impl_vec6_ops!(SpatialMotion, angular, linear);
impl_vec6_ops!(SpatialForce, torque, force);

/// Rigid-body inertia: mass, centre of mass and rotational inertia about the
/// centre of mass, all in the body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialInertia {
    pub mass: f64,
    pub com: Vec3,
    pub inertia_com: Matrix3<f64>,
}

impl SpatialInertia {
    /// Validated constructor: `mass > 0`, symmetric positive semi-definite
    /// rotational inertia whose principal moments satisfy the triangle inequality.
    pub fn new(mass: f64, com: Vec3, inertia_com: Matrix3<f64>) -> Result<Self, SpatialError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(SpatialError::InvalidInertia(format!("mass must be positive, got {mass}")));
        }
        let asym = (inertia_com - inertia_com.transpose()).abs().max();
        if asym > 1e-9 * inertia_com.abs().max().max(1.0) {
            return Err(SpatialError::InvalidInertia("rotational inertia is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(inertia_com).eigenvalues;
        let scale = eig.abs().max().max(1e-12);
        if eig.min() < -1e-12 * scale {
            return Err(SpatialError::InvalidInertia("rotational inertia is not positive semi-definite".into()));
        }
        let mut p = [eig[0], eig[1], eig[2]];
        p.sort_by(f64::total_cmp);
        if p[0] + p[1] < p[2] - 1e-9 * scale {
            return Err(SpatialError::InvalidInertia(format!(
                "principal moments {p:?} violate the triangle inequality"
            )));
        }
        Ok(SpatialInertia { mass, com, inertia_com })
    }

    /// Massless body.
    pub fn zero() -> Self {
        SpatialInertia { mass: 0.0, com: Vec3::zeros(), inertia_com: Matrix3::zeros() }
    }

    pub fn is_zero(&self) -> bool {
        self.mass == 0.0 && self.inertia_com.iter().all(|v| *v == 0.0)
    }

    pub fn point_mass(mass: f64, at: Vec3) -> Result<Self, SpatialError> {
        Self::new(mass, at, Matrix3::zeros())
    }

    /// Uniform solid box with full edge lengths `size` along the body axes, centred at `com`.
    pub fn solid_box(mass: f64, com: Vec3, size: Vec3) -> Result<Self, SpatialError> {
        let (a, b, c) = (size.x * size.x, size.y * size.y, size.z * size.z);
        let i = Matrix3::from_diagonal(&Vec3::new(b + c, a + c, a + b)) * (mass / 12.0);
        Self::new(mass, com, i)
    }

    /// Uniform solid cylinder of radius `radius` and length `length` along `axis`
    /// (0 = x, 1 = y, 2 = z), centred at `com`.
    pub fn rod(mass: f64, com: Vec3, length: f64, radius: f64, axis: usize) -> Result<Self, SpatialError> {
        let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
        let axial = 0.5 * mass * radius * radius;
        let mut d = Vec3::repeat(transverse);
        d[axis] = axial;
        Self::new(mass, com, Matrix3::from_diagonal(&d))
    }

    /// 6×6 matrix mapping body-frame motion to body-frame momentum.
    pub fn matrix(&self) -> Matrix6<f64> {
        let c = skew(&self.com);
        let mc = c * self.mass;
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.inertia_com + mc * c.transpose()));
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&mc);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&mc.transpose());
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * self.mass));
        m
    }

    /// The same body described in the parent frame of `t`.
    pub fn transformed(&self, t: &Transform) -> SpatialInertia {
        let r = t.rotation.matrix();
        SpatialInertia {
            mass: self.mass,
            com: t.transform_point(&self.com),
            inertia_com: r * self.inertia_com * r.transpose(),
        }
    }

    /// Momentum `I v`.
    pub fn momentum(&self, v: &SpatialMotion) -> SpatialForce {
        let vcom = v.linear + v.angular.cross(&self.com);
        let force = vcom * self.mass;
        let torque = self.inertia_com * v.angular + self.com.cross(&force);
        SpatialForce { torque, force }
    }

    pub fn kinetic_energy(&self, v: &SpatialMotion) -> f64 {
        0.5 * v.dot(&self.momentum(v))
    }
}
